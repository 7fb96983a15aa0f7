"""Explicit spectral data for the boundary conditions q = 0 on y = 0, L and q = d on x = 0.

F and G are closed forms in lam.  The scalar factor h = exp(H) comes from
the Cauchy transform of c = ln(1 - G^2) over the real line.  Because c is
even, the real-line integral folds onto the half line,

    H(lam) = 1/(2 pi i) * int_0^inf c(t) 2 lam / (t^2 - lam^2) dt,

which is evaluated by the trapezoid rule in s = ln t.  c tends to the same
constant ln sec^2(d/2) at t -> 0 and t -> inf, and the logarithmic variable
makes both ends decay (like e^{-|s|}) without any constant subtraction.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import ProblemParams, _guard, _unwrap, omega
from .errors import BoundaryValueError, ConfigError, DomainError, PoleError
from .volterra import SpectralPair

POLE_GUARD = 1e-6
TANH_SATURATION = 40.0
NEAR_AXIS_ANGLE = 0.1


def f_sym(lam, d: float):
    """i (1 - lam^2)/(1 + lam^2) tan(d/2)."""
    lam = np.asarray(lam, dtype=complex)
    if np.any(np.abs(1 + lam**2) < POLE_GUARD):
        raise PoleError("F has poles at lambda = +-i")
    return _unwrap(1j * (1 - lam**2) / (1 + lam**2) * math.tan(d / 2))


def _tanh_saturated(z):
    z = np.asarray(z, dtype=complex)
    big = np.abs(z.real) > TANH_SATURATION
    safe = np.where(big, 0.0, z)
    return np.where(big, np.sign(z.real), np.tanh(safe))


def g_fn(lam, params: ProblemParams):
    """G(lam) = i (1 - lam^2)/(1 + lam^2) tanh(omega L / 2) tan(d/2)."""
    lam = _guard(lam)
    if np.any(np.abs(1 + lam**2) < POLE_GUARD):
        raise PoleError("bare G is not evaluated next to lambda = +-i; use g_times_one_plus_exp")
    z = np.asarray(omega(lam)) * params.L / 2
    if np.any(np.abs(np.cosh(np.where(np.abs(z.real) > TANH_SATURATION, 0, z))) < 1e-12):
        raise PoleError("lambda sits on a pole of tanh(omega L / 2)")
    return _unwrap(1j * (1 - lam**2) / (1 + lam**2) * _tanh_saturated(z) * params.tan_half_d)


def _exprel(z):
    """(e^z - 1)/z, continuous at z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 + z / 2, np.expm1(zs) / zs)


def g_times_one_plus_exp(lam, sign: int, params: ProblemParams):
    """G(lam)(1 + e^{sign omega L}) without the removable singularity at +-i.

    With omega = (1 + lam^2)/(2 lam) the product equals
    i (1 - lam^2) tan(d/2) L/(2 lam) * exprel(sign L (1 + lam^2)/(2 lam)).
    """
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    lam = _guard(lam)
    z = sign * params.L * (1 + lam**2) / (2 * lam)
    return _unwrap(1j * (1 - lam**2) * params.tan_half_d * params.L / (2 * lam) * _exprel(z))


def _g_on_log_axis(s, L: float, tau: float):
    """-i G(e^s) as a real number: tanh(s) tanh(cosh(s) L/2) tan(d/2)."""
    return np.tanh(s) * np.tanh(np.cosh(np.clip(s, -700, 700)) * L / 2) * tau


def _c_of_s(s, L, tau):
    g = _g_on_log_axis(s, L, tau)
    return np.log1p(g * g)


def _dc_ds(s, L, tau):
    s = np.asarray(s, dtype=float)
    ch = np.cosh(np.clip(s, -700, 700))
    th2 = np.tanh(ch * L / 2)
    g = np.tanh(s) * th2 * tau
    dg = tau * (th2 / np.cosh(s) ** 2 + np.tanh(s) * (1 - th2**2) * np.sinh(s) * L / 2)
    return 2 * g * dg / (1 + g * g)


@dataclass(frozen=True, eq=False)
class LinearizableSpectrum:
    """G, H and h for one (d, L), with the s = ln t node table cached."""

    params: ProblemParams
    log_cut: float = 40.0
    n_nodes: int = 16001
    _s: np.ndarray = field(init=False, repr=False)
    _c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_nodes < 101 or self.log_cut <= 0:
            raise ConfigError("need n_nodes >= 101 and log_cut > 0")
        s = np.linspace(-self.log_cut, self.log_cut, self.n_nodes)
        c = _c_of_s(s, self.params.L, self.params.tan_half_d)
        s.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_c", c)

    @property
    def r_cut(self) -> float:
        return math.exp(self.log_cut)

    @property
    def c_inf(self) -> float:
        """Limit of ln(1 - G^2) at t -> 0 and t -> inf."""
        return math.log1p(self.params.tan_half_d**2)

    @property
    def step(self) -> float:
        return float(self._s[1] - self._s[0])

    def node_table(self):
        """(t, 1 - G(t)^2) at the quadrature nodes (read-only copies)."""
        return np.exp(self._s), np.exp(self._c)

    def log_jump(self, lam_real):
        """c(t) = ln(1 - G(t)^2) for real t (even in t)."""
        t = np.abs(np.asarray(lam_real, dtype=float))
        if np.any(t == 0):
            raise DomainError("lambda = 0 is an essential singularity")
        return _unwrap(_c_of_s(np.log(t), self.params.L, self.params.tan_half_d))

    def g(self, lam):
        return g_fn(lam, self.params)


def _near_axis(lam):
    ang = np.abs(np.angle(lam))
    return np.minimum(ang, np.pi - ang) < NEAR_AXIS_ANGLE


def _h_quad(lam: complex, spec: LinearizableSpectrum) -> complex:
    """Adaptive quadrature for lam close to the real axis.

    Subtracting c(|Re lam|) leaves a bounded integrand; the subtracted
    constant contributes (c/2) sgn(Im lam).
    """
    L, tau = spec.params.L, spec.params.tan_half_d
    s0 = math.log(abs(lam.real))
    c0 = float(_c_of_s(s0, L, tau))

    def f(s):
        t = math.exp(s)
        return (float(_c_of_s(s, L, tau)) - c0) * 2 * lam * t / (t * t - lam * lam)

    lo, hi = -spec.log_cut, spec.log_cut
    pts = [p for p in (s0 - 0.05, s0, s0 + 0.05) if lo < p < hi]
    # the tolerance sits at roundoff level, so quad's roundoff notice is expected
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(lambda s: f(s).real, lo, hi, points=pts, limit=400, epsabs=1e-15, epsrel=1e-13)[0]
        im = integrate.quad(lambda s: f(s).imag, lo, hi, points=pts, limit=400, epsabs=1e-15, epsrel=1e-13)[0]
    return (re + 1j * im) / (2j * np.pi) + 0.5 * c0 * np.sign(lam.imag)


def cauchy_log_transform(lam, spec: LinearizableSpectrum):
    """H(lam) for lam off the real axis (scalar or array)."""
    lam = _guard(lam)
    if np.any(lam.imag == 0):
        raise BoundaryValueError("H is not defined on the real axis; use h_boundary_pair")
    flat = np.atleast_1d(lam).ravel()
    out = np.empty(flat.shape, dtype=complex)
    if spec.params.d == 0:
        out[:] = 0
        return _unwrap(out.reshape(lam.shape))
    t = np.exp(spec._s)
    wc = spec._c * t * spec.step
    near = _near_axis(flat)
    far_idx = np.flatnonzero(~near)
    for chunk in np.array_split(far_idx, max(1, far_idx.size // 64)):
        if chunk.size == 0:
            continue
        lk = flat[chunk][:, None]
        out[chunk] = (wc[None, :] * 2 * lk / (t[None, :] ** 2 - lk**2)).sum(axis=1) / (2j * np.pi)
    for k in np.flatnonzero(near):
        out[k] = _h_quad(complex(flat[k]), spec)
    return _unwrap(out.reshape(lam.shape))


def h_fn(lam, spec: LinearizableSpectrum):
    """h = exp(H) off the real axis."""
    return _unwrap(np.exp(np.asarray(cauchy_log_transform(lam, spec))))


def _h_plus_log_positive(mu: np.ndarray, spec: LinearizableSpectrum) -> np.ndarray:
    """H_+(mu) for mu > 0: regularised principal value plus c(mu)/2."""
    L, tau = spec.params.L, spec.params.tan_half_d
    s_nodes = spec._s
    t = np.exp(s_nodes)
    out = np.empty(mu.shape, dtype=complex)
    for k, m in enumerate(mu):
        sm = math.log(m)
        cm = float(_c_of_s(sm, L, tau))
        dcdt = float(_dc_ds(sm, L, tau)) / m
        diff = t - m
        close = np.abs(diff) < 1e-7 * m
        ratio = np.where(close, dcdt, (spec._c - cm) / np.where(close, 1.0, diff))
        integrand = ratio * 2 * m / (t + m) * t
        out[k] = spec.step * integrand.sum() / (2j * np.pi) + cm / 2
    return out


def h_boundary_pair(lam_real, spec: LinearizableSpectrum):
    """(h_+(lam), (1 - G(lam)^2)/h_+(lam)) for real lam != 0.

    The second value is what the jump matrices use for h(-lam) on the real
    axis; it makes h_+ * partner = 1 - G^2 hold exactly.
    """
    lam = np.asarray(lam_real, dtype=float)
    if np.any(lam == 0):
        raise DomainError("lambda = 0 is an essential singularity")
    flat = np.atleast_1d(lam).ravel()
    c = np.atleast_1d(spec.log_jump(flat))
    if spec.params.d == 0:
        hp = np.ones(flat.shape, dtype=complex)
    else:
        Hp = _h_plus_log_positive(np.abs(flat), spec)
        # for lam < 0: H_+(lam) = -H_-(|lam|) = c - H_+(|lam|)
        Hp = np.where(flat > 0, Hp, c - Hp)
        hp = np.exp(Hp)
    partner = np.exp(c) / hp
    return _unwrap(hp.reshape(lam.shape)), _unwrap(partner.reshape(lam.shape))


def a2b2_from_sides(s1: SpectralPair, s3: SpectralPair, lam, params: ProblemParams):
    lam = np.asarray(lam, dtype=complex)
    a1m, _ = s1(-lam)
    a1, b1 = s1(lam)
    a3, b3 = s3(lam)
    a3m, b3m = s3(-lam)
    e = np.exp(-np.asarray(omega(lam)) * params.L)
    a2 = a1m * a3 - e * b1 * b3m
    b2 = a1m * b3 - e * b1 * a3m
    return _unwrap(a2), _unwrap(b2)


AUDIT_KEYS = ("rel1", "rel2", "fact0", "sol2_a", "sol2_b", "sol2a3_a", "sol2a3_b", "finid", "finid_side2")


def relation_audit(s1: SpectralPair, s3: SpectralPair, spec: LinearizableSpectrum, lam_samples) -> dict:
    """Max residual of every real-axis identity linking sides 1 and 3 to G and h.

    ``finid`` is the identity exactly as stated for a_1, b_1; ``finid_side2``
    is the same combination built from a_2, b_2 (which the derivation
    actually produces), with right side (E + 1/E)(1 - G^2) - 2 G^2.
    """
    lam = np.atleast_1d(np.asarray(lam_samples, dtype=float))
    if np.any(lam == 0):
        raise DomainError("lambda = 0 is an essential singularity")
    params = spec.params
    lc = lam.astype(complex)
    a1, b1 = s1(lc)
    a1m, b1m = s1(-lc)
    a3, b3 = s3(lc)
    a3m, b3m = s3(-lc)
    G = np.asarray(g_fn(lc, params))
    F = np.asarray(f_sym(lc, params.d))
    hp, _ = h_boundary_pair(lam, spec)
    om = np.asarray(omega(lc))
    E, Einv = np.exp(om * params.L), np.exp(-om * params.L)
    res = {
        "rel1": a1 * b1m - a1m * b1 - G,
        "rel2": a3 * b3m - a3m * b3 + G,
        "fact0": (a1**2 - b1**2) * (a1m**2 - b1m**2) - (1 - G**2),
        "sol2_a": a1m - (a1 + G * b1) / hp,
        "sol2_b": b1m - (b1 + G * a1) / hp,
        "sol2a3_a": a3m - (a3 - G * b3) / hp,
        "sol2a3_b": b3m - (b3 - G * a3) / hp,
        "finid": E * (a1**2 - b1**2) + Einv * (a1m**2 - b1m**2) - ((E + Einv) * (1 - F**2) + 2 * F**2),
    }
    a2, b2 = (np.asarray(v) for v in a2b2_from_sides(s1, s3, lc, params))
    a2m, b2m = (np.asarray(v) for v in a2b2_from_sides(s1, s3, -lc, params))
    res["finid_side2"] = (E * (a2**2 - b2**2) + Einv * (a2m**2 - b2m**2)
                          - ((E + Einv) * (1 - G**2) - 2 * G**2))
    return {k: float(np.max(np.abs(v))) for k, v in res.items()}


FUNCTION_TABLE_COLUMNS = ("lambda", "G_im", "lnh_re", "lnh_im")


def write_function_table(path, spec: LinearizableSpectrum, lam_real) -> None:
    """Real-axis table of G and ln h_+ for plotting."""
    lam = np.asarray(lam_real, dtype=float)
    G = np.asarray(g_fn(lam.astype(complex), spec.params))
    hp, _ = h_boundary_pair(lam, spec)
    lnh = np.log(np.asarray(hp))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FUNCTION_TABLE_COLUMNS)
        for row in zip(lam, G.imag, lnh.real, lnh.imag):
            w.writerow([format(float(v), ".17g") for v in row])
