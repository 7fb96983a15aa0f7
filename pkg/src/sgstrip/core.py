"""Scalar exponents of the Lax pair, 2x2 helpers and shared parameter records.

Matrices are plain ``numpy`` arrays of shape ``(..., 2, 2)``; every helper
here is pure and works on stacks of matrices as well as single ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

LAMBDA_GUARD = 1e-14

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


# |d| this close to pi makes tan(d/2) > 2000 and the jumps far from identity
D_MARGIN = 1e-3


@dataclass(frozen=True)
class ProblemParams:
    """Constant Dirichlet value ``d`` on x = 0 and strip width ``L``."""

    d: float
    L: float

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError(f"strip width must be positive, got L={self.L}")
        if not (math.isfinite(self.d) and abs(self.d) <= math.pi - D_MARGIN):
            raise DomainError(f"|d| must stay below pi - {D_MARGIN:g} (tan(d/2) blows up), got d={self.d}")

    @property
    def tan_half_d(self) -> float:
        return math.tan(self.d / 2)


@dataclass(frozen=True)
class PhysicalPoint:
    x: float
    y: float

    def is_interior(self, L: float) -> bool:
        return self.x >= 0 and 0 < self.y < L

    def check_closure(self, L: float) -> None:
        if not (self.x >= 0 and 0 <= self.y <= L):
            raise DomainError(f"point ({self.x}, {self.y}) outside the semistrip closure")


def _guard(lam):
    lam = np.asarray(lam, dtype=complex)
    if np.any(np.abs(lam) < LAMBDA_GUARD):
        raise DomainError("lambda = 0 is an essential singularity")
    return lam


def _unwrap(value):
    return value.item() if np.ndim(value) == 0 else value


def omega(lam):
    """(lam + 1/lam)/2, the y-exponent."""
    lam = _guard(lam)
    return _unwrap((lam + 1 / lam) / 2)


def omega_big(lam):
    """(lam - 1/lam)/(2i), the x-exponent."""
    lam = _guard(lam)
    return _unwrap((lam - 1 / lam) / 2j)


def theta(p: PhysicalPoint, lam):
    return _unwrap(np.asarray(omega_big(lam)) * p.x + np.asarray(omega(lam)) * p.y)


def mat2(e11, e12, e21, e22) -> np.ndarray:
    """Stack entries (scalars or equal-shape arrays) into ``(..., 2, 2)``."""
    b = np.broadcast_arrays(*(np.asarray(e, dtype=complex) for e in (e11, e12, e21, e22)))
    out = np.empty(b[0].shape + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = b
    return out


def det2(m):
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def inv2(m):
    m = np.asarray(m, dtype=complex)
    det = det2(m)
    if np.any(det == 0):
        raise DomainError("singular 2x2 matrix")
    return mat2(m[..., 1, 1], -m[..., 0, 1], -m[..., 1, 0], m[..., 0, 0]) / det[..., None, None]
