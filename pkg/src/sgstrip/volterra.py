"""Spectral functions {a_j, b_j} of the three sides from boundary traces.

The Volterra equations defining the eigenfunctions are solved in their
differentiated form: the first column (A, B) obeys

    A' = N11 A + N12 B,        B' = k B + N21 A + N22 B,

integrated backwards from the far end of the side to its initial point.
For sides 1/3, ``k = Omega(lam)`` and ``N = Q(x, y_side, lam)``; for side 2,
``k = omega(lam)`` and ``N = i Q(0, y, -lam)``.  The stiff factor ``exp(k t)``
is carried exactly by a Lawson (integrating factor) RK4 step.
"""
from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import CubicSpline

from .core import ProblemParams, _guard, omega, omega_big
from .errors import ConfigError, RegionError, TailTruncationWarning


class Side(enum.IntEnum):
    SIDE1 = 1  # y = L, 0 < x < inf
    SIDE2 = 2  # x = 0, 0 < y < L
    SIDE3 = 3  # y = 0, 0 < x < inf


UPPER_HALF_SIDES = (Side.SIDE1, Side.SIDE3)
AUTO_STEP = 0.1


def q_matrix(q, deriv_combo, lam):
    """Q(x, y, lam) from q, the combination q_x - i q_y and lam (broadcasts)."""
    lam = _guard(lam)
    q = np.asarray(q, dtype=float)
    c = np.asarray(deriv_combo, dtype=complex)
    one_minus_cos = (1 - np.cos(q)) / lam
    sin_over = 1j * np.sin(q) / lam
    q11, q12, q21, q22 = np.broadcast_arrays(one_minus_cos, c + sin_over, c - sin_over, -one_minus_cos)
    out = np.empty(q11.shape + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = q11, q12, q21, q22
    out *= 0.25j
    return out[()] if out.ndim == 2 else out


@dataclass(frozen=True, eq=False)
class BoundarySideData:
    """Sampled Dirichlet and Neumann traces of one side.

    ``neumann`` holds q_y on sides 1/3 and q_x on side 2.  Values between
    samples come from cubic splines; the tangential derivative is the
    derivative of the Dirichlet spline.
    """

    side: Side
    nodes: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    tail_tol: float = 1e-8
    _dir_spline: CubicSpline = field(init=False, repr=False)
    _neu_spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        side = Side(self.side)
        nodes = np.array(self.nodes, dtype=float)
        dirichlet = np.array(self.dirichlet, dtype=float)
        neumann = np.array(self.neumann, dtype=float)
        if nodes.ndim != 1 or nodes.size < 4:
            raise ConfigError("need at least 4 boundary samples")
        if dirichlet.shape != nodes.shape or neumann.shape != nodes.shape:
            raise ConfigError("dirichlet/neumann must have the same length as nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigError("nodes must be strictly increasing")
        if not (np.all(np.isfinite(dirichlet)) and np.all(np.isfinite(neumann))):
            raise ConfigError("non-finite boundary samples")
        for arr in (nodes, dirichlet, neumann):
            arr.setflags(write=False)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "dirichlet", dirichlet)
        object.__setattr__(self, "neumann", neumann)
        object.__setattr__(self, "_dir_spline", CubicSpline(nodes, dirichlet))
        object.__setattr__(self, "_neu_spline", CubicSpline(nodes, neumann))

    @classmethod
    def from_functions(cls, side, nodes, q_fn: Callable, qn_fn: Callable, **kw):
        nodes = np.asarray(nodes, dtype=float)
        return cls(side, nodes, q_fn(nodes), qn_fn(nodes), **kw)

    @classmethod
    def zero(cls, side, nodes, value: float = 0.0, **kw):
        nodes = np.asarray(nodes, dtype=float)
        return cls(side, nodes, np.full(nodes.shape, value), np.zeros(nodes.shape), **kw)

    @property
    def tail_magnitude(self) -> float:
        return float(max(abs(self.dirichlet[-1]), abs(self.neumann[-1])))

    def traces(self, t):
        """(q, q_x - i q_y) at positions ``t`` along the side.

        Outside the sampled range the end samples are held constant with a
        vanishing tangential derivative.
        """
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, self.nodes[0], self.nodes[-1])
        inside = (t >= self.nodes[0]) & (t <= self.nodes[-1])
        q = self._dir_spline(tc)
        dq = np.where(inside, self._dir_spline(tc, 1), 0.0)
        qn = self._neu_spline(tc)
        if self.side is Side.SIDE2:
            return q, qn - 1j * dq
        return q, dq - 1j * qn


@dataclass(frozen=True)
class SpectralPair:
    """The pair (a(lam), b(lam)) of one side.

    ``evaluate`` maps an array of lam to ``(a, b)`` arrays; it is only called
    inside the validity region (Im lam >= 0 for sides 1/3, lam != 0 for side 2).
    """

    side: Side
    evaluate: Callable[[np.ndarray], tuple]

    @property
    def upper_half_only(self) -> bool:
        return self.side in UPPER_HALF_SIDES

    def check_region(self, lam) -> np.ndarray:
        lam = _guard(lam)
        if self.upper_half_only and np.any(lam.imag < -1e-12 * np.maximum(1.0, np.abs(lam))):
            raise RegionError(f"side {int(self.side)} spectral functions need Im(lambda) >= 0")
        return lam

    def __call__(self, lam):
        lam = self.check_region(lam)
        return self.evaluate(lam)

    def a(self, lam):
        return self(lam)[0]

    def b(self, lam):
        return self(lam)[1]


def trivial_pair(side) -> SpectralPair:
    def evaluate(lam):
        lam = np.asarray(lam)
        return np.ones(lam.shape, dtype=complex), np.zeros(lam.shape, dtype=complex)

    return SpectralPair(Side(side), evaluate)


def _integration_grid(nodes: np.ndarray, start: float, stop: float, max_step: float | None) -> np.ndarray:
    pts = nodes[(nodes > start) & (nodes < stop)]
    pts = np.concatenate(([start], pts, [stop]))
    if max_step is not None:
        refined = [pts[:1]]
        for a, b in zip(pts[:-1], pts[1:]):
            m = max(1, int(np.ceil((b - a) / max_step - 1e-12)))
            refined.append(np.linspace(a, b, m + 1)[1:])
        pts = np.concatenate(refined)
    return pts


def _lawson_rk4(grid_desc: np.ndarray, coeff: Callable, kappa: np.ndarray):
    """Integrate (A, B) from grid_desc[0] to grid_desc[-1] (any direction).

    Lawson RK4 written in the original variables, so only the factors
    e^{kappa h/2} and e^{kappa h} appear; both stay bounded when B is
    integrated in its stable direction.
    """
    m = kappa.shape
    A = np.ones(m, dtype=complex)
    B = np.zeros(m, dtype=complex)

    def f(n, a, b):
        return (n[..., 0, 0] * a + n[..., 0, 1] * b,
                n[..., 1, 0] * a + n[..., 1, 1] * b)

    for t0, t1 in zip(grid_desc[:-1], grid_desc[1:]):
        h = t1 - t0
        n0, nh, n1 = coeff(t0), coeff(t0 + h / 2), coeff(t1)
        eh2 = np.exp(kappa * (h / 2))
        eh = eh2 * eh2
        f1a, f1b = f(n0, A, B)
        f2a, f2b = f(nh, A + h / 2 * f1a, eh2 * (B + h / 2 * f1b))
        f3a, f3b = f(nh, A + h / 2 * f2a, eh2 * B + h / 2 * f2b)
        f4a, f4b = f(n1, A + h * f3a, eh * B + h * eh2 * f3b)
        A = A + h / 6 * (f1a + 2 * f2a + 2 * f3a + f4a)
        B = eh * B + h / 6 * (eh * f1b + 2 * eh2 * (f2b + f3b) + f4b)
    return A, B


def spectral_functions(data: BoundarySideData, lam, params: ProblemParams, max_step: float | None = None):
    """(a, b) of ``data.side`` at ``lam`` (scalar or array).

    Sides 1/3 integrate from the last node (treated as infinity) down to
    x = 0; side 2 integrates from y = L down to y = 0.  Without ``max_step``
    the step is capped at 0.1 min(1, |lam|), since Q grows like 1/lam.
    """
    side = data.side
    scalar = np.ndim(lam) == 0
    pair = SpectralPair(side, lambda z: None)
    lam = np.atleast_1d(pair.check_region(lam)).astype(complex)
    if max_step is None:
        max_step = AUTO_STEP * min(1.0, float(np.min(np.abs(lam))))
    if side in UPPER_HALF_SIDES:
        if data.tail_magnitude > data.tail_tol:
            warnings.warn(TailTruncationWarning(data.tail_magnitude, int(side)), stacklevel=2)
        kappa = np.asarray(omega_big(lam))
        grid = _integration_grid(data.nodes, 0.0, float(data.nodes[-1]), max_step)[::-1]

        def coeff(t):
            q, c = data.traces(t)
            return q_matrix(q, c, lam)
    else:
        kappa = np.asarray(omega(lam))
        grid = _integration_grid(data.nodes, 0.0, params.L, max_step)[::-1]

        def coeff(t):
            q, c = data.traces(t)
            return 1j * q_matrix(q, c, -lam)

    a, b = _lawson_rk4(grid, coeff, kappa)
    if scalar:
        return complex(a[0]), complex(b[0])
    return a, b


def spectral_pair(data: BoundarySideData, params: ProblemParams, max_step: float | None = None) -> SpectralPair:
    def evaluate(lam):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailTruncationWarning)
            return spectral_functions(data, np.asarray(lam), params, max_step=max_step)

    if data.side in UPPER_HALF_SIDES and data.tail_magnitude > data.tail_tol:
        warnings.warn(TailTruncationWarning(data.tail_magnitude, int(data.side)), stacklevel=2)
    return SpectralPair(data.side, evaluate)


def unit_determinant_residual(pair: SpectralPair, lam_samples) -> float:
    """max |a(lam) a(-lam) - b(lam) b(-lam) - 1| over the samples.

    Each sample is divided by max(1, |a a(-lam)|, |b b(-lam)|) so that
    exponentially large side-2 values are judged relative to their size.
    """
    lam = np.atleast_1d(np.asarray(lam_samples, dtype=complex))
    a, b = pair(lam)
    am, bm = pair(-lam)
    scale = np.maximum(1.0, np.maximum(np.abs(a * am), np.abs(b * bm)))
    return float(np.max(np.abs(a * am - b * bm - 1) / scale))


def global_relation_residual(s1: SpectralPair, s2: SpectralPair, s3: SpectralPair,
                             params: ProblemParams, lam_samples) -> tuple[float, float]:
    lam = np.atleast_1d(np.asarray(lam_samples, dtype=complex))
    if np.any(lam.imag < 0):
        raise RegionError("global relations are sampled in the closed upper half plane")
    a1, b1 = s1(lam)
    a3, b3 = s3(lam)
    a2, b2 = s2(lam)
    a2m, b2m = s2(-lam)
    r1 = a1 - a2m * a3 + b2m * b3
    r2 = b1 * np.exp(-np.asarray(omega(lam)) * params.L) - a2 * b3 + a3 * b2
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


SPECTRAL_COLUMNS = ("lambda_re", "lambda_im", "a_re", "a_im", "b_re", "b_im", "side")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _data_lines(fh):
    return (line for line in fh if not line.startswith("#"))


def write_spectral_csv(path, rows: Iterable[tuple[complex, complex, complex, int]], comment: str | None = None) -> None:
    """Rows are (lam, a, b, side); an optional leading ``# comment`` line."""
    with open(path, "w", newline="") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(SPECTRAL_COLUMNS)
        for lam, a, b, side in rows:
            w.writerow([_fmt(lam.real), _fmt(lam.imag), _fmt(a.real), _fmt(a.imag),
                        _fmt(b.real), _fmt(b.imag), int(side)])


def read_spectral_csv(path) -> list[tuple[complex, complex, complex, int]]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(_data_lines(fh)):
            out.append((complex(float(rec["lambda_re"]), float(rec["lambda_im"])),
                        complex(float(rec["a_re"]), float(rec["a_im"])),
                        complex(float(rec["b_re"]), float(rec["b_im"])),
                        int(rec["side"])))
    return out


BOUNDARY_COLUMNS = ("side", "node", "dirichlet", "neumann")


def write_boundary_csv(path, sides: Iterable[BoundarySideData]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BOUNDARY_COLUMNS)
        for data in sides:
            for t, q, qn in zip(data.nodes, data.dirichlet, data.neumann):
                w.writerow([int(data.side), _fmt(t), _fmt(q), _fmt(qn)])


def read_boundary_csv(path, tail_tol: float = 1e-8) -> list[BoundarySideData]:
    """Parse a boundary-trace CSV; raises ConfigError on malformed input."""
    groups: dict[int, list[tuple[float, float, float]]] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(_data_lines(fh))
            if reader.fieldnames is None or tuple(reader.fieldnames) != BOUNDARY_COLUMNS:
                raise ConfigError(f"expected header {','.join(BOUNDARY_COLUMNS)}")
            for rec in reader:
                side = int(rec["side"])
                if side not in (1, 2, 3):
                    raise ConfigError(f"unknown side {side}")
                groups.setdefault(side, []).append(
                    (float(rec["node"]), float(rec["dirichlet"]), float(rec["neumann"])))
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed boundary file: {exc}") from exc
    if not groups:
        raise ConfigError("boundary file has no rows")
    out = []
    for side, rows in sorted(groups.items()):
        arr = np.array(rows)
        out.append(BoundarySideData(Side(side), arr[:, 0], arr[:, 1], arr[:, 2], tail_tol=tail_tol))
    return out
