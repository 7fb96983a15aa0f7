"""Exception hierarchy shared by all modules."""


class SGError(Exception):
    """Base class for errors raised by sgstrip."""


class DomainError(SGError, ValueError):
    """An argument lies outside the domain of a function (e.g. lambda = 0)."""


class RegionError(DomainError):
    """A spectral parameter lies outside the validity region of a side."""


class PoleError(DomainError):
    """Evaluation at (or too close to) a genuine pole."""


class BoundaryValueError(DomainError):
    """An off-axis function was asked for a value on the real axis."""


class ConfigError(SGError, ValueError):
    """Invalid configuration or invalid discretization parameters."""


class ResolutionError(SGError):
    """A target point is too close to the discrete contour to be resolved."""


class DivergenceError(SGError):
    """Neumann iteration failed to contract."""


class ConditioningError(SGError):
    """Dense collocation system is singular to working precision."""


class InconsistencyError(SGError):
    """Reconstructed data violates a hard consistency bound (e.g. |cos q| > 1)."""


class GridError(SGError, ValueError):
    """Field grid does not satisfy the requirements of a check."""


class ExtrapolationError(GridError):
    """Grid is too far from a boundary to extrapolate to it."""


class TailTruncationWarning(UserWarning):
    """Boundary traces have not decayed at the truncation point."""

    def __init__(self, magnitude: float, side=None):
        self.magnitude = magnitude
        self.side = side
        super().__init__(f"boundary trace tail {magnitude:.3e} at truncation point (side {side})")
