"""Independent checks of a reconstructed field."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import PhysicalPoint, ProblemParams
from .errors import ConfigError, ExtrapolationError, GridError, TailTruncationWarning
from .linearizable import LinearizableSpectrum, relation_audit
from .reconstruct import SolutionField
from .volterra import BoundarySideData, Side, global_relation_residual, spectral_pair

ROUNDTRIP_UPPER = (0.5 + 0.5j, 1.0 + 1.0j, 2.0 + 0.5j, 0.3 + 1.0j, 1.5j)
ROUNDTRIP_REAL = (0.4, 0.7, 1.5, 2.5)


@dataclass(frozen=True)
class OracleSeries:
    """Separation-of-variables solution of the linearised problem q_xx + q_yy = q."""

    d: float
    L: float
    n_terms: int = 25

    def __post_init__(self):
        if self.n_terms < 1:
            raise ConfigError("n_terms must be >= 1")
        if self.L <= 0:
            raise ConfigError("L must be positive")

    def modes(self):
        n = np.arange(1, self.n_terms + 1, 2)
        kappa = np.sqrt(1 + (n * np.pi / self.L) ** 2)
        amp = 4 * self.d / (n * np.pi)
        return n, kappa, amp


def linear_oracle(p: PhysicalPoint, oracle: OracleSeries) -> float:
    n, kappa, amp = oracle.modes()
    return float(np.sum(amp * np.sin(n * np.pi * p.y / oracle.L) * np.exp(-kappa * p.x)))


def oracle_grid(x, y, oracle: OracleSeries) -> np.ndarray:
    n, kappa, amp = oracle.modes()
    X = np.asarray(x, dtype=float)[:, None, None]
    Y = np.asarray(y, dtype=float)[None, :, None]
    return np.sum(amp * np.sin(n * np.pi * Y / oracle.L) * np.exp(-kappa * X), axis=-1)


def _uniform_step(v: np.ndarray, name: str) -> float:
    if v.size < 3:
        raise GridError(f"need at least 3 {name}-points")
    dv = np.diff(v)
    if np.max(np.abs(dv - dv[0])) > 1e-9 * max(1.0, abs(dv[0])):
        raise GridError(f"{name}-grid is not uniform")
    return float(dv[0])


def pde_residual(field: SolutionField) -> float:
    """max |5-point Laplacian of q - sin q| over interior grid points."""
    hx = _uniform_step(field.x, "x")
    hy = _uniform_step(field.y, "y")
    q = field.q
    lap = ((q[2:, 1:-1] - 2 * q[1:-1, 1:-1] + q[:-2, 1:-1]) / hx**2
           + (q[1:-1, 2:] - 2 * q[1:-1, 1:-1] + q[1:-1, :-2]) / hy**2)
    return float(np.max(np.abs(lap - np.sin(q[1:-1, 1:-1]))))


def _quad_extrapolate(nodes, values, target):
    """Value at ``target`` of the quadratic through 3 nodes (values along axis 0)."""
    t = np.asarray(nodes, dtype=float)
    out = 0.0
    for k in range(3):
        others = [t[m] for m in range(3) if m != k]
        w = (target - others[0]) * (target - others[1]) / ((t[k] - others[0]) * (t[k] - others[1]))
        out = out + w * values[k]
    return out


def bc_recovery(field: SolutionField, params: ProblemParams, corner_cells: int = 2) -> tuple[float, float, float]:
    """Extrapolated boundary errors on y = L, x = 0, y = 0.

    The ``corner_cells`` rows/columns nearest the corners (0, 0) and (0, L)
    are left out, since the boundary data jump from 0 to d there.
    """
    x, y, q = field.x, field.y, field.q
    if x.size < 3 or y.size < 3:
        raise GridError("need at least 3 points per direction")
    hx = float(np.min(np.diff(x)))
    hy = float(np.min(np.diff(y)))
    L = params.L
    if x[0] > 3 * hx or y[0] > 3 * hy or (L - y[-1]) > 3 * hy:
        raise ExtrapolationError("grid ends more than 3 spacings from a boundary")
    cols = slice(corner_cells, None)
    bottom = _quad_extrapolate(y[:3], q[:, :3].T, 0.0)
    left = _quad_extrapolate(x[:3], q[:3, :], 0.0)
    top = _quad_extrapolate(y[[-1, -2, -3]], q[:, [-1, -2, -3]].T, L)
    rows = slice(corner_cells, y.size - corner_cells)
    if rows.start >= rows.stop or corner_cells >= x.size:
        raise GridError("grid too small for the corner exclusion")
    return (float(np.max(np.abs(top[cols]))),
            float(np.max(np.abs(left[rows] - params.d))),
            float(np.max(np.abs(bottom[cols]))))


def _fd_weights_first(nodes, x0):
    """Weights of the first derivative at x0 from values at ``nodes`` (Lagrange)."""
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    V = np.vander(nodes - x0, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def boundary_traces(field: SolutionField, params: ProblemParams, tail_length: float = 30.0,
                    tail_step: float = 0.05) -> list[BoundarySideData]:
    """Side traces from the field with 4th-order one-sided differences.

    Each stencil uses the known boundary value plus the four nearest grid
    lines.  Beyond the last x-sample the side 1/3 traces are continued with
    the slowest linear decay rate sqrt(1 + (pi/L)^2).
    """
    x, y, q = field.x, field.y, field.q
    L, d = params.L, params.d
    if x.size < 4 or y.size < 4:
        raise GridError("need at least 4 grid lines next to each boundary")
    w_top = _fd_weights_first(np.concatenate(([L], y[-1:-5:-1])), L)
    w_bot = _fd_weights_first(np.concatenate(([0.0], y[:4])), 0.0)
    w_left = _fd_weights_first(np.concatenate(([0.0], x[:4])), 0.0)
    # Dirichlet value is zero on y = 0 and y = L, so the boundary weight drops out
    qy_top = q[:, -1:-5:-1] @ w_top[1:]
    qy_bot = q[:, :4] @ w_bot[1:]
    qx_left = w_left[0] * d + w_left[1:] @ q[:4, :]

    kappa = math.sqrt(1 + (math.pi / L) ** 2)
    x_tail = np.arange(x[-1] + tail_step, x[-1] + tail_length, tail_step)
    decay = np.exp(-kappa * (x_tail - x[-1]))
    xs = np.concatenate((x, x_tail))

    def side(s, qy):
        ext = np.concatenate((qy, qy[-1] * decay))
        return BoundarySideData(s, xs, np.zeros(xs.size), ext)

    y_nodes = np.concatenate(([0.0], y, [L]))
    qx2 = np.concatenate(([qx_left[0]], qx_left, [qx_left[-1]]))
    side2 = BoundarySideData(Side.SIDE2, y_nodes, np.full(y_nodes.size, d), qx2)
    return [side(Side.SIDE1, qy_top), side2, side(Side.SIDE3, qy_bot)]


def spectral_roundtrip(field: SolutionField, spec: LinearizableSpectrum, params: ProblemParams,
                       lam_upper=ROUNDTRIP_UPPER, lam_real=ROUNDTRIP_REAL, max_step: float = 0.01,
                       sides: list[BoundarySideData] | None = None) -> dict:
    """Global-relation and real-axis identity residuals of the field's traces."""
    sides = sides if sides is not None else boundary_traces(field, params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailTruncationWarning)
        s1, s2, s3 = (spectral_pair(s, params, max_step=max_step) for s in sides)
    r1, r2 = global_relation_residual(s1, s2, s3, params, lam_upper)
    audit = relation_audit(s1, s3, spec, lam_real)
    return {"grab1": r1, "grab2": r2, **audit}


def _check(value: float, tol: float) -> dict:
    return {"value": float(value), "tolerance": float(tol), "pass": bool(np.isfinite(value) and value <= tol)}


def verification_report(field: SolutionField, params: ProblemParams, oracle_terms: int = 25,
                        solver_tol: float = 1e-10, roundtrip: dict | None = None) -> dict:
    bc_tol = 1e-3 * max(abs(params.d), 1.0)
    checks: dict = {}
    if field.x.size >= 3 and field.y.size >= 3:
        checks["pde_residual"] = _check(pde_residual(field), 1e-2)
        try:
            e1, e2, e3 = bc_recovery(field, params)
            checks["bc_side1"] = _check(e1, bc_tol)
            checks["bc_side2"] = _check(e2, bc_tol)
            checks["bc_side3"] = _check(e3, bc_tol)
        except (GridError, ExtrapolationError) as exc:
            checks["bc_recovery"] = {"value": None, "tolerance": bc_tol, "pass": False, "error": str(exc)}
    if np.any(np.isfinite(field.q_alt)):
        checks["route_consistency"] = _check(field.route_gap, max(1e-4, 10 * solver_tol))
    if np.any(np.isfinite(field.leak)):
        checks["imag_leak"] = _check(field.imag_leak, 1e-6)
    if abs(params.d) <= 0.05:
        ref = oracle_grid(field.x, field.y, OracleSeries(params.d, params.L, oracle_terms))
        checks["oracle_distance"] = _check(float(np.nanmax(np.abs(field.q - ref))), 5e-3 * abs(params.d))
    checks["solver_failures"] = _check(len(field.failures), 0)
    if roundtrip is not None:
        for key in ("grab1", "grab2", "rel1"):
            checks[f"roundtrip_{key}"] = _check(roundtrip[key], 5e-4)
    return {"d": params.d, "L": params.L, "checks": checks,
            "all_pass": all(c["pass"] for c in checks.values())}


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
