"""Recover q(x, y) from RH solutions and sweep a grid of the semistrip.

Two routes:

* lambda -> 0: Psi(x, y, 0) = [[cos(q/2), i sin(q/2)], [i sin(q/2), cos(q/2)]],
  which gives q by atan2 without differentiation (primary route);
* lambda -> inf: 2 (Psi*)_21 = q_x - i q_y, and the 1/lam term of the
  x-equation gives 1 - cos q = -4i (d_x Psi*)_11 - 2 (Psi*)_21^2.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import PhysicalPoint, ProblemParams
from .errors import ConfigError, GridError, InconsistencyError, SGError
from .rh_solver import ContourDiscretization, RHSolution, solve_rh

__version__ = "0.1.0"

PROBE_ANGLE = math.pi / 4


def q_derivative_combo(sol: RHSolution) -> complex:
    """q_x - i q_y at sol.point."""
    return complex(2 * sol.psi_star[1, 0])


def q_from_psi0(psi0: np.ndarray) -> tuple[float, float]:
    """(q, imaginary leak) from the lam -> 0 limit matrix."""
    q = 2 * math.atan2(psi0[1, 0].imag, psi0[0, 0].real)
    leak = max(abs(psi0[0, 0].imag), abs(psi0[1, 0].real))
    return q, leak


def psi_at_origin(sol: RHSolution, probe_radius: float | None = None) -> np.ndarray:
    """Psi_0 either from the representation at lam = 0 or by probing.

    With a probe radius r, Psi is sampled at r e^{i pi/4} and (r/2) e^{i pi/4}
    and the O(lam) term is removed by Richardson extrapolation.
    """
    if probe_radius is None:
        return sol.psi0
    lam = probe_radius * np.exp(1j * PROBE_ANGLE)
    return 2 * sol.psi(lam / 2) - sol.psi(lam)


def q_from_lambda_zero(p: PhysicalPoint, disc: ContourDiscretization, sol: RHSolution,
                       probe_radius: float | None = None) -> float:
    if sol.disc is not disc or sol.point != p:
        raise ConfigError("solution was computed for another point or discretisation")
    return q_from_psi0(psi_at_origin(sol, probe_radius))[0]


def one_minus_cos_q(psi_star: np.ndarray, dpsi_star_dx: np.ndarray) -> complex:
    return complex(-4j * dpsi_star_dx[0, 0] - 2 * psi_star[1, 0] ** 2)


def q_from_psistar(row: Sequence[RHSolution], sign_ref=None, tol: float = 1e-6) -> np.ndarray:
    """q along a row of solutions at fixed y, increasing x.

    d_x Psi* uses second-order differences over the row; the sign of q is
    taken from ``sign_ref`` (defaults to sin(q/2) of each lam -> 0 limit).
    """
    if len(row) < 3:
        raise GridError("need at least 3 consecutive x-samples")
    x = np.array([s.point.x for s in row])
    if np.any(np.diff(x) <= 0) or len({s.point.y for s in row}) != 1:
        raise GridError("row must share y and have increasing x")
    ps = np.array([s.psi_star for s in row])
    dps = np.gradient(ps, x, axis=0, edge_order=2)
    if sign_ref is None:
        sign_ref = [s.psi0[1, 0].imag for s in row]
    out = np.empty(len(row))
    for k in range(len(row)):
        omc = one_minus_cos_q(ps[k], dps[k]).real
        if omc < -tol or omc > 2 + tol:
            raise InconsistencyError(f"|cos q| = {abs(1 - omc):.3g} exceeds 1 at x={x[k]}")
        half = math.sqrt(min(max(omc, 0.0) / 2, 1.0))
        out[k] = math.copysign(2 * math.asin(half), sign_ref[k]) if sign_ref[k] != 0 else 2 * math.asin(half)
    return out


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    nx: int
    y_margin: float
    ny: int

    def axes(self, L: float) -> tuple[np.ndarray, np.ndarray]:
        if not (0 < self.x_min <= self.x_max) or self.nx < 1 or self.ny < 1:
            raise GridError("grid needs 0 < x_min <= x_max and positive counts")
        if not (0 < self.y_margin < L / 2 or (self.ny == 1 and 0 < self.y_margin <= L / 2)):
            raise GridError("y_margin must lie in (0, L/2)")
        x = np.linspace(self.x_min, self.x_max, self.nx)
        y = np.linspace(self.y_margin, L - self.y_margin, self.ny)
        return x, y


@dataclass
class SolutionField:
    params: ProblemParams
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray            # shape (nx, ny)
    q_alt: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    leak: np.ndarray
    combo: np.ndarray        # q_x - i q_y from Psi*
    failures: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    @property
    def imag_leak(self) -> float:
        finite = self.leak[np.isfinite(self.leak)]
        return float(finite.max()) if finite.size else math.nan

    @property
    def route_gap(self) -> float:
        gap = np.abs(self.q - self.q_alt)
        gap = gap[np.isfinite(gap)]
        return float(gap.max()) if gap.size else math.nan

    def rows(self):
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                yield xv, yv, self.q[i, j], self.q_alt[i, j], self.residual[i, j], int(self.iterations[i, j])

    def to_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment is not None:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(FIELD_COLUMNS)
            for xv, yv, q, qa, res, it in self.rows():
                w.writerow([_fmt(xv), _fmt(yv), _fmt(q), _fmt(qa), _fmt(res), it])

    def to_json(self, path, extra: dict | None = None) -> None:
        doc = {
            "metadata": {"d": self.params.d, "L": self.params.L, "version": __version__,
                         **self.metadata, **(extra or {})},
            "imag_leak": self.imag_leak,
            "failures": [list(f) for f in self.failures],
            "points": [dict(zip(FIELD_COLUMNS, r)) for r in self.rows()],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, default=_json_default)

    @classmethod
    def from_csv(cls, path, params: ProblemParams) -> "SolutionField":
        try:
            with open(path, newline="") as fh:
                recs = list(csv.DictReader(line for line in fh if not line.startswith("#")))
            data = np.array([[float(r[c]) for c in FIELD_COLUMNS] for r in recs])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed field file: {exc}") from exc
        if data.size == 0:
            raise ConfigError("field file has no rows")
        x = np.unique(data[:, 0])
        y = np.unique(data[:, 1])
        if len(data) != x.size * y.size:
            raise GridError("field file is not a full rectangular lattice")
        shape = (x.size, y.size)
        ix = np.searchsorted(x, data[:, 0])
        iy = np.searchsorted(y, data[:, 1])
        grids = [np.full(shape, np.nan) for _ in range(4)]
        for g, col in zip(grids, (2, 3, 4, 5)):
            g[ix, iy] = data[:, col]
        return cls(params, x, y, grids[0], grids[1], grids[2], grids[3].astype(int),
                   np.full(shape, np.nan), np.full(shape, np.nan + 0j))


FIELD_COLUMNS = ("x", "y", "q", "q_alt", "residual", "iterations")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _solve_point(p: PhysicalPoint, disc, backend, tol, max_iter, fd_step, probe_radius):
    sol = solve_rh(p, disc, backend=backend, tol=tol, max_iter=max_iter)
    q, leak = q_from_psi0(psi_at_origin(sol, probe_radius))
    if fd_step > 0:
        lo = solve_rh(PhysicalPoint(p.x - fd_step, p.y), disc, backend=backend, tol=tol, max_iter=max_iter)
        hi = solve_rh(PhysicalPoint(p.x + fd_step, p.y), disc, backend=backend, tol=tol, max_iter=max_iter)
        q_alt = q_from_psistar([lo, sol, hi], sign_ref=[q] * 3)[1]
    else:
        q_alt = math.nan
    return q, q_alt, sol.residual, sol.iterations, leak, q_derivative_combo(sol)


def field_sweep(grid: GridSpec, disc: ContourDiscretization, backend: str = "neumann", tol: float = 1e-10,
                max_iter: int = 200, threads: int | None = None, fd_step: float = 1e-3,
                probe_radius: float | None = None) -> SolutionField:
    """Solve the RH problem at every grid point (thread pool) and reconstruct q.

    ``q`` comes from the lam -> 0 route; ``q_alt`` from Psi* with d_x taken
    over the stencil x +- fd_step (set fd_step = 0 to skip it).
    """
    params = disc.spec.params
    x, y = grid.axes(params.L)
    if fd_step and fd_step >= grid.x_min:
        raise GridError("fd_step must be smaller than x_min")
    shape = (x.size, y.size)
    q = np.full(shape, np.nan)
    q_alt = np.full(shape, np.nan)
    residual = np.full(shape, np.nan)
    iterations = np.zeros(shape, dtype=int)
    leak = np.full(shape, np.nan)
    combo = np.full(shape, np.nan + 0j)
    failures = []
    tasks = [(i, j) for i in range(x.size) for j in range(y.size)]
    threads = threads or min(8, os.cpu_count() or 1)

    def run(ij):
        i, j = ij
        try:
            return ij, _solve_point(PhysicalPoint(float(x[i]), float(y[j])), disc, backend, tol,
                                    max_iter, fd_step, probe_radius), None
        except SGError as exc:
            return ij, None, exc

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for (i, j), res, exc in pool.map(run, tasks):
            if exc is not None:
                failures.append((float(x[i]), float(y[j]), f"{type(exc).__name__}: {exc}"))
                continue
            q[i, j], q_alt[i, j], residual[i, j], iterations[i, j], leak[i, j], combo[i, j] = res
    meta = {"grid": asdict(grid), "backend": backend, "tol": tol, "fd_step": fd_step,
            "contour": {"r_min": disc.r_min, "r_max": disc.r_max, "n_per_ray": disc.n_per_ray,
                        "grading": disc.grading}}
    return SolutionField(params, x, y, q, q_alt, residual, iterations, leak, combo, failures, meta)
