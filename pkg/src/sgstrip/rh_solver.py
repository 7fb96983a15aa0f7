"""Collocation solver for the 2x2 RH problem on the cross Gamma = R u iR.

Nodes are uniform in s = ln|lam| on each of the four rays.  The boundary
value Psi_+ (quadrants 1 and 3) is written Psi_+ = I + C_+[mu W] with
W = I - J, mu = Psi_+, and the integral equation

    mu_k (I - W_k/2) - sum_j K_kj mu_j W_j = I

is collocated at the nodes.  K is the trapezoid rule in s for the principal
value, with the odd/even rule on the ray that carries the singular point.

Orientation: the + side of every ray is its left side.  Real rays run
outward from 0, imaginary rays run inward from infinity, so the left side is
always quadrant 1 or 3.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import CubicSpline

from .core import IDENTITY, PhysicalPoint, _guard, det2, mat2, omega, omega_big
from .errors import ConditioningError, ConfigError, DivergenceError, DomainError, ResolutionError
from .linearizable import LinearizableSpectrum, g_fn, g_times_one_plus_exp, h_boundary_pair, h_fn

RAY_ANGLES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
RAY_SIGNS = (1.0, -1.0, 1.0, -1.0)
GRADINGS = ("log",)
BACKENDS = ("neumann", "direct")


def jump_closed_form(ray: int, theta, om, L: float, g_over_h=None, g_over_hminus=None, combo=None):
    """J for ray index 0..3 from its coefficients; exponents are combined before exp."""
    theta = np.asarray(theta, dtype=complex)
    om = np.asarray(om, dtype=complex)
    one = np.ones(theta.shape, dtype=complex)
    zero = np.zeros(theta.shape, dtype=complex)
    if ray == 0:
        a, b = np.asarray(g_over_h), np.asarray(g_over_hminus)
        return mat2(1 - a * b * np.exp(-om * L), -a * np.exp(-theta), b * np.exp(-om * L + theta), one)
    if ray == 2:
        a, b = np.asarray(g_over_h), np.asarray(g_over_hminus)
        return mat2(one, -a * np.exp(om * L - theta), b * np.exp(theta), 1 - a * b * np.exp(om * L))
    if ray == 1:
        return mat2(one, np.asarray(combo) * np.exp(-theta), zero, one)
    if ray == 3:
        return mat2(one, zero, np.asarray(combo) * np.exp(theta), one)
    raise ConfigError(f"ray index must be 0..3, got {ray}")


def _node_coefficients(lam: np.ndarray, ray: int, spec: LinearizableSpectrum) -> dict:
    params = spec.params
    if ray in (0, 2):
        G = np.asarray(g_fn(lam, params))
        h, hhat = h_boundary_pair(lam.real, spec)
        return {"g_over_h": G / h, "g_over_hminus": G / hhat}
    if ray == 1:
        return {"combo": -np.asarray(g_times_one_plus_exp(lam, 1, params)) / np.asarray(h_fn(lam, spec))}
    # h(-lam) with -lam on the positive imaginary axis
    return {"combo": np.asarray(g_times_one_plus_exp(lam, -1, params)) / np.asarray(h_fn(-lam, spec))}


def _check_interior(p: PhysicalPoint, L: float) -> None:
    if not p.is_interior(L):
        raise DomainError(f"jump matrices need 0 < y < L and x >= 0, got ({p.x}, {p.y})")


def assemble_jump(lam, ray: int, p: PhysicalPoint, spec: LinearizableSpectrum):
    """J at arbitrary nodes ``lam`` of ray ``ray`` (0: arg 0, 1: pi/2, 2: pi, 3: 3pi/2)."""
    _check_interior(p, spec.params.L)
    lam = np.atleast_1d(_guard(lam))
    coeff = _node_coefficients(lam, ray, spec)
    th = p.x * np.asarray(omega_big(lam)) + p.y * np.asarray(omega(lam))
    out = jump_closed_form(ray, th, np.asarray(omega(lam)), spec.params.L, **coeff)
    return out[0] if out.shape[0] == 1 else out


@dataclass(frozen=True, eq=False)
class ContourDiscretization:
    spec: LinearizableSpectrum
    r_min: float
    r_max: float
    n_per_ray: int
    grading: str
    lam: np.ndarray = field(repr=False)
    ray: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    omega_big: np.ndarray = field(repr=False)
    g_over_h: np.ndarray = field(repr=False)
    g_over_hminus: np.ndarray = field(repr=False)
    combo_pi2: np.ndarray = field(repr=False)
    combo_3pi2: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.lam.size

    @property
    def log_step(self) -> float:
        return math.log(self.r_max / self.r_min) / (self.n_per_ray - 1)

    def ray_slice(self, ray: int) -> slice:
        return slice(ray * self.n_per_ray, (ray + 1) * self.n_per_ray)

    def jumps(self, p: PhysicalPoint) -> np.ndarray:
        """J at every node for the point p, shape (N, 2, 2)."""
        L = self.spec.params.L
        _check_interior(p, L)
        th = p.x * self.omega_big + p.y * self.omega
        out = np.empty((self.n_nodes, 2, 2), dtype=complex)
        n = self.n_per_ray
        for ray in range(4):
            sl = self.ray_slice(ray)
            if ray in (0, 2):
                kw = {"g_over_h": self.g_over_h[ray // 2 * n:(ray // 2 + 1) * n],
                      "g_over_hminus": self.g_over_hminus[ray // 2 * n:(ray // 2 + 1) * n]}
            else:
                kw = {"combo": self.combo_pi2 if ray == 1 else self.combo_3pi2}
            out[sl] = jump_closed_form(ray, th[sl], self.omega[sl], L, **kw)
        return out


def discretize_contour(spec: LinearizableSpectrum, r_min: float = 1e-2, r_max: float = 1e2,
                       n_per_ray: int = 200, grading: str = "log") -> ContourDiscretization:
    """Nodes uniform in ln|lam| on [ln r_min, ln r_max] for each ray.

    With r_min = 1/r_max the node set is invariant under lam -> 1/lam.
    """
    if grading not in GRADINGS:
        raise ConfigError(f"unknown grading {grading!r}; expected one of {GRADINGS}")
    if not (0 < r_min < 1 < r_max < math.inf):
        raise ConfigError("need 0 < r_min < 1 < r_max < inf")
    if int(n_per_ray) != n_per_ray or n_per_ray < 8:
        raise ConfigError("n_per_ray must be an integer >= 8")
    n = int(n_per_ray)
    s = np.linspace(math.log(r_min), math.log(r_max), n)
    hs = s[1] - s[0]
    r = np.exp(s)
    lam = np.concatenate([np.exp(1j * a) * r for a in RAY_ANGLES])
    lam[n:2 * n] = 1j * r
    lam[2 * n:3 * n] = -r
    lam[3 * n:] = -1j * r
    ray = np.repeat(np.arange(4), n)
    sgn = np.asarray(RAY_SIGNS)[ray]
    weights = sgn * hs * lam

    diff = lam[None, :] - lam[:, None]
    same = ray[None, :] == ray[:, None]
    idx = np.arange(4 * n)
    odd = ((idx[None, :] - idx[:, None]) % 2) == 1
    factor = np.where(same, np.where(odd, 2.0, 0.0), 1.0)
    safe = np.where(factor == 0, 1.0, diff)
    kernel = factor * weights[None, :] / safe / (2j * np.pi)

    c_real = _node_coefficients(np.concatenate([r, -r]).astype(complex), 0, spec)
    combo_pi2 = _node_coefficients(1j * r, 1, spec)["combo"]
    combo_3pi2 = _node_coefficients(-1j * r, 3, spec)["combo"]
    tables = {
        "g_over_h": c_real["g_over_h"], "g_over_hminus": c_real["g_over_hminus"],
        "combo_pi2": combo_pi2, "combo_3pi2": combo_3pi2,
    }
    for name, arr in tables.items():
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"non-finite {name} coefficients; shrink the radial range")
    om, Om = np.asarray(omega(lam)), np.asarray(omega_big(lam))
    for arr in (lam, ray, weights, kernel, om, Om, *tables.values()):
        arr.setflags(write=False)
    return ContourDiscretization(spec, float(r_min), float(r_max), n, grading, lam, ray, weights,
                                 kernel, om, Om, **tables)


def _ray_of_point(t: complex, tol: float) -> int | None:
    if abs(t.imag) <= tol * abs(t):
        return 0 if t.real > 0 else 2
    if abs(t.real) <= tol * abs(t):
        return 1 if t.imag > 0 else 3
    return None


def cauchy_apply(values, target, disc: ContourDiscretization):
    """(1/2 pi i) int_Gamma f(l)/(l - target) dl from nodal values f (N, 2, 2).

    For a target on Gamma the + boundary value is returned: a subtracted
    principal value plus f(target)/2, with f(target) from a cubic spline in
    ln|lam| along the ray.
    """
    values = np.asarray(values, dtype=complex)
    t = complex(target)
    if t == 0:
        return np.tensordot(disc.weights / disc.lam, values, axes=(0, 0)) / (2j * np.pi)
    ray = _ray_of_point(t, 1e-12)
    r = abs(t)
    if ray is None:
        dist = np.min(np.abs(disc.lam - t) / np.abs(disc.lam))
        if dist < 0.5 * disc.log_step:
            raise ResolutionError("target closer to the contour than half the local node spacing")
        return np.tensordot(disc.weights / (disc.lam - t), values, axes=(0, 0)) / (2j * np.pi)
    if not (disc.r_min < r < disc.r_max):
        raise ResolutionError("on-contour target outside the discretised radial range")
    sl = disc.ray_slice(ray)
    s_nodes = np.log(np.abs(disc.lam[sl]))
    st = math.log(r)
    if np.min(np.abs(s_nodes - st)) < 0.25 * disc.log_step:
        raise ResolutionError("on-contour target coincides with a node")
    order = np.argsort(s_nodes)
    ft = CubicSpline(s_nodes[order], values[sl][order], axis=0)(st)
    pv = np.tensordot(disc.weights / (disc.lam - t), values - ft, axes=(0, 0)) / (2j * np.pi)
    # principal value of the constant over each truncated oriented ray
    const = 0j
    for k, ang in enumerate(RAY_ANGLES):
        u = np.exp(1j * ang)
        a, b = u * disc.r_min, u * disc.r_max
        if RAY_SIGNS[k] < 0:
            a, b = b, a
        if k == ray:
            const += math.log(abs(b - t)) - math.log(abs(a - t))
        else:
            const += np.log((b - t) / (a - t))
    return pv + ft * (const / (2j * np.pi)) + 0.5 * ft


@dataclass
class RHSolution:
    point: PhysicalPoint
    mu: np.ndarray
    W: np.ndarray
    psi_star: np.ndarray
    backend: str
    iterations: int
    residual: float
    contraction: float | None = None
    disc: ContourDiscretization | None = field(default=None, repr=False)

    def density(self) -> np.ndarray:
        return np.einsum("kij,kjl->kil", self.mu, self.W)

    def psi(self, lam) -> np.ndarray:
        """Psi(lam) = I + C[mu W](lam) off the contour (lam = 0 allowed)."""
        return IDENTITY + cauchy_apply(self.density(), lam, self.disc)

    @property
    def psi0(self) -> np.ndarray:
        return self.psi(0)

    def diagnostics(self) -> dict:
        ps = self.psi_star
        return {
            "x": self.point.x, "y": self.point.y, "backend": self.backend,
            "iterations": self.iterations, "residual": self.residual, "contraction": self.contraction,
            "psi_star": [[[ps[i, j].real, ps[i, j].imag] for j in range(2)] for i in range(2)],
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.diagnostics(), fh, indent=2)


def _apply_operator(mu, W, kernel):
    """mu (I - W/2) - K[mu W]."""
    dens = np.einsum("kij,kjl->kil", mu, W)
    conv = (kernel @ dens.reshape(len(mu), 4)).reshape(-1, 2, 2)
    return mu - 0.5 * dens - conv


def _neumann(W, kernel, tol, max_iter):
    n = W.shape[0]
    mu = np.broadcast_to(IDENTITY, (n, 2, 2)).copy()
    growth = 0
    prev = math.inf
    first = None
    ratios = []
    for it in range(1, max_iter + 1):
        dens = np.einsum("kij,kjl->kil", mu, W)
        new = IDENTITY + 0.5 * dens + (kernel @ dens.reshape(n, 4)).reshape(n, 2, 2)
        upd = float(np.max(np.abs(new - mu)))
        mu = new
        if first is None:
            first = upd
        elif prev > 0:
            ratios.append(upd / prev)
        if upd < tol:
            return mu, it, (float(np.median(ratios)) if ratios else None)
        growth = growth + 1 if upd > prev else 0
        if growth >= 3:
            raise DivergenceError("Neumann iteration diverges; use the direct backend")
        prev = upd
    raise DivergenceError(f"Neumann iteration did not reach tol={tol} in {max_iter} iterations; "
                          "use the direct backend")


def _direct(W, kernel):
    n = W.shape[0]
    A = IDENTITY - 0.5 * W
    M = np.empty((2 * n, 2 * n), dtype=complex)
    for l in range(2):
        for m in range(2):
            blk = -kernel * W[None, :, l, m]
            blk[np.diag_indices(n)] += A[:, l, m]
            M[m * n:(m + 1) * n, l * n:(l + 1) * n] = blk
    anorm = np.max(np.sum(np.abs(M), axis=0))
    lu, piv = sla.lu_factor(M, check_finite=False)
    rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond < 1e3 * np.finfo(float).eps:
        raise ConditioningError(f"collocation matrix is singular to working precision (rcond={rcond:.2e})")
    rhs = np.zeros((2 * n, 2), dtype=complex)
    rhs[:n, 0] = 1
    rhs[n:, 1] = 1
    u = sla.lu_solve((lu, piv), rhs, check_finite=False)
    mu = np.empty((n, 2, 2), dtype=complex)
    mu[:, :, 0] = u[:n]
    mu[:, :, 1] = u[n:]
    return mu


def solve_rh(p: PhysicalPoint, disc: ContourDiscretization, backend: str = "neumann",
             tol: float = 1e-10, max_iter: int = 200) -> RHSolution:
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    J = disc.jumps(p)
    W = IDENTITY - J
    n = disc.n_nodes
    if not np.any(W):
        mu = np.broadcast_to(IDENTITY, (n, 2, 2)).copy()
        return RHSolution(p, mu, W, np.zeros((2, 2), dtype=complex), backend, 0, 0.0, 0.0, disc)
    contraction = None
    if backend == "neumann":
        mu, iterations, contraction = _neumann(W, disc.kernel, tol, max_iter)
    else:
        mu, iterations = _direct(W, disc.kernel), 1
    residual = float(np.max(np.abs(_apply_operator(mu, W, disc.kernel) - IDENTITY)))
    dens = np.einsum("kij,kjl->kil", mu, W)
    psi_star = -np.tensordot(disc.weights, dens, axes=(0, 0)) / (2j * np.pi)
    return RHSolution(p, mu, W, psi_star, backend, iterations, residual, contraction, disc)


def jump_determinant_deviation(disc: ContourDiscretization, p: PhysicalPoint) -> float:
    return float(np.max(np.abs(det2(disc.jumps(p)) - 1)))
