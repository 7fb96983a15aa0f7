import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import h_log_direct
from sgstrip.core import ProblemParams
from sgstrip.errors import BoundaryValueError, ConfigError, DomainError, PoleError
from sgstrip.linearizable import (AUDIT_KEYS, LinearizableSpectrum, cauchy_log_transform, f_sym, g_fn,
                                  g_times_one_plus_exp, h_boundary_pair, h_fn, relation_audit,
                                  write_function_table)
from sgstrip.volterra import Side, trivial_pair

P = ProblemParams(0.5, 2.0)
OFF_AXIS = np.array([0.5 + 0.5j, 2 + 1j, 0.1 + 0.3j, 3j, -1 + 0.05j, 1 + 0.01j, -0.2 - 0.7j, 40 + 3j])
REAL = np.array([0.05, 0.3, 0.8, 1.0, 1.7, 4.0, 25.0, -0.6, -2.2])

upper = st.builds(complex, st.floats(-5, 5), st.floats(0.02, 5)).filter(lambda z: abs(z - 1j) > 1e-2)


def g_tanh_form(lam, p):
    om = (lam + 1 / lam) / 2
    e = np.exp(om * p.L)
    return 1j * (1 - lam**2) / (1 + lam**2) * (e - 1) / (e + 1) * math.tan(p.d / 2)


def test_f_values():
    assert f_sym(0.0, 0.5) == pytest.approx(1j * math.tan(0.25))
    assert f_sym(1.0, 0.5) == 0
    with pytest.raises(PoleError):
        f_sym(1j, 0.5)


def test_g_values():
    assert g_fn(1.0, P) == 0
    assert g_fn(-1.0, P) == 0
    # far out on the real axis tanh saturates and G -> -i tan(d/2)
    assert g_fn(1e7, P) == pytest.approx(-1j * math.tan(0.25), abs=1e-12)
    with pytest.raises(PoleError):
        g_fn(1j, P)


@settings(max_examples=60)
@given(upper)
def test_g_odd_and_tanh_form(lam):
    G = g_fn(lam, P)
    assert abs(g_fn(-lam, P) + G) <= 1e-10 * max(1, abs(G))
    ref = g_tanh_form(lam, P)
    if np.isfinite(ref) and abs(ref) < 1e8:
        assert abs(G - ref) <= 1e-12 * max(1, abs(ref))


@pytest.mark.parametrize("sign", [1, -1])
def test_g_times_one_plus_exp(sign):
    lam = np.array([0.5 + 0.5j, 2 + 0.3j, -1.3 + 0.2j, 1.5j])
    direct = g_fn(lam, P) * (1 + np.exp(sign * (lam + 1 / lam) / 2 * P.L))
    np.testing.assert_allclose(g_times_one_plus_exp(lam, sign, P), direct, rtol=1e-12)
    # removable singularity: the product at lam = i is L tan(d/2)
    assert g_times_one_plus_exp(1j, sign, P) == pytest.approx(P.L * math.tan(0.25), rel=1e-14)
    with pytest.raises(ConfigError):
        g_times_one_plus_exp(1j, 2, P)


def test_h_against_direct_quadrature(spec_half):
    for lam in OFF_AXIS:
        assert abs(cauchy_log_transform(lam, spec_half) - h_log_direct(lam, 0.5, 2.0)) <= 1e-10


def test_h_odd_conjugate_and_inverse(spec_half):
    H = np.asarray(cauchy_log_transform(OFF_AXIS, spec_half))
    np.testing.assert_allclose(cauchy_log_transform(-OFF_AXIS, spec_half), -H, atol=1e-10)
    np.testing.assert_allclose(cauchy_log_transform(OFF_AXIS.conj(), spec_half), -H.conj(), atol=1e-10)
    prod = np.asarray(h_fn(OFF_AXIS, spec_half)) * np.asarray(h_fn(-OFF_AXIS, spec_half))
    assert np.max(np.abs(prod - 1)) <= 1e-12


def test_h_limits(spec_half):
    sec = 1 / math.cos(0.25)
    for lam in (1e7j, 1e-7j, 1e6 + 1e6j):
        assert abs(h_fn(lam, spec_half) - sec) < 1e-6
    hp, partner = h_boundary_pair(1.0, spec_half)
    assert abs(hp - 1) < 1e-12 and abs(partner - 1) < 1e-12


def test_h_trivial_when_d_zero():
    spec = LinearizableSpectrum(ProblemParams(0.0, 1.0))
    assert h_fn(0.3 + 0.4j, spec) == 1
    assert h_boundary_pair(0.7, spec)[0] == 1


def test_real_axis_rejected(spec_half):
    with pytest.raises(BoundaryValueError):
        h_fn(0.7, spec_half)
    with pytest.raises(DomainError):
        h_boundary_pair(0.0, spec_half)


def _extrapolated(spec, mu):
    """h(mu + i0) from two off-axis values, linear in the offset."""
    f = lambda eps: np.asarray(h_fn(mu + 1j * eps, spec))
    e1, e2 = 1e-3, 5e-4
    return 2 * f(e2) - f(e1)


def test_plemelj_product(spec_half):
    hp, partner = h_boundary_pair(REAL, spec_half)
    # h_-(mu) is the upper boundary value at -mu, since h(lam) h(-lam) = 1
    up = _extrapolated(spec_half, REAL)
    down = _extrapolated(spec_half, -REAL)
    G = g_fn(REAL.astype(complex), P)
    assert np.max(np.abs(up - hp)) <= 1e-6
    assert np.max(np.abs(down - partner)) <= 1e-6
    assert np.max(np.abs(up * down - (1 - G**2))) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.2, 10))
def test_log_jump_even_and_bounded(d, L):
    spec = LinearizableSpectrum(ProblemParams(d, L), n_nodes=1001)
    t = np.array([0.01, 0.3, 1.0, 2.5, 100.0])
    c = spec.log_jump(t)
    np.testing.assert_array_equal(c, spec.log_jump(-t))
    assert np.all(c >= 0) and np.all(c <= spec.c_inf + 1e-12)


def test_relation_audit_trivial():
    spec = LinearizableSpectrum(ProblemParams(0.0, 1.0), n_nodes=1001)
    audit = relation_audit(trivial_pair(Side.SIDE1), trivial_pair(Side.SIDE3), spec, [0.4, 1.5])
    assert set(audit) == set(AUDIT_KEYS)
    assert max(audit.values()) == 0


def test_relation_audit_detects_wrong_data(spec_half):
    # unit pairs do not satisfy the d = 0.5 relations
    audit = relation_audit(trivial_pair(Side.SIDE1), trivial_pair(Side.SIDE3), spec_half, [0.4, 1.5])
    assert audit["rel1"] > 0.1


def test_spectrum_config():
    with pytest.raises(ConfigError):
        LinearizableSpectrum(P, n_nodes=10)


def test_function_table(tmp_path, spec_half):
    path = tmp_path / "g.csv"
    write_function_table(path, spec_half, [0.5, 1.0, 2.0])
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,G_im,lnh_re,lnh_im"
    assert len(lines) == 4
