import json
import math

import numpy as np
import pytest

from oracles import fd_semistrip, fd_value
from sgstrip.core import PhysicalPoint, ProblemParams
from sgstrip.errors import ConfigError, GridError, InconsistencyError
from sgstrip.linearizable import LinearizableSpectrum
from sgstrip.reconstruct import (GridSpec, SolutionField, field_sweep, one_minus_cos_q, psi_at_origin,
                                 q_from_lambda_zero, q_from_psi0, q_from_psistar)
from sgstrip.rh_solver import discretize_contour, solve_rh
from sgstrip.verify import OracleSeries, linear_oracle

FD_POINTS = [(0.5, 1.0), (1.0, 0.6), (2.0, 1.8), (0.2, 0.2)]


@pytest.fixture(scope="module")
def fd_reference():
    """Richardson-extrapolated nonlinear finite differences at FD_POINTS (d = 0.5, L = 2)."""
    coarse = fd_semistrip(0.5, 2.0, ny=100, X=8)
    fine = fd_semistrip(0.5, 2.0, ny=200, X=8)
    return [(4 * fd_value(*fine, x, y) - fd_value(*coarse, x, y)) / 3 for x, y in FD_POINTS]


def test_q_from_psi0_exact():
    q = 0.37
    psi0 = np.array([[math.cos(q / 2), 1j * math.sin(q / 2)], [1j * math.sin(q / 2), math.cos(q / 2)]])
    val, leak = q_from_psi0(psi0)
    assert val == pytest.approx(q, abs=1e-15) and leak == 0
    assert q_from_psi0(psi0.conj())[0] == pytest.approx(-q, abs=1e-15)


def test_lambda_zero_route_matches_fd(disc_half, fd_reference):
    for (x, y), ref in zip(FD_POINTS, fd_reference):
        p = PhysicalPoint(x, y)
        sol = solve_rh(p, disc_half)
        q, leak = q_from_psi0(sol.psi0)
        assert abs(q - ref) <= 2e-6
        assert leak <= 1e-10
        assert q_from_lambda_zero(p, disc_half, sol) == q


def test_probe_radius_agrees(disc_half):
    sol = solve_rh(PhysicalPoint(0.5, 1.0), disc_half)
    q0 = q_from_psi0(sol.psi0)[0]
    q_probe = q_from_psi0(psi_at_origin(sol, 1e-4))[0]
    assert abs(q_probe - q0) < 1e-6


def test_wrong_solution_rejected(disc_half):
    sol = solve_rh(PhysicalPoint(0.5, 1.0), disc_half)
    with pytest.raises(ConfigError):
        q_from_lambda_zero(PhysicalPoint(0.6, 1.0), disc_half, sol)


def _row(disc, x, y, h):
    return [solve_rh(PhysicalPoint(x + k * h, y), disc) for k in (-1, 0, 1)]


def test_psistar_route(disc_half):
    row = _row(disc_half, 0.5, 1.0, 1e-3)
    q = q_from_psi0(row[1].psi0)[0]
    assert abs(q_from_psistar(row)[1] - q) <= 1e-4


def test_psistar_derivative_combo(disc_half, fd_reference):
    # 2 (Psi*)_21 = q_x - i q_y, checked against differences of the lam -> 0 route
    h = 1e-4
    p = PhysicalPoint(1.0, 0.6)
    qf = lambda x, y: q_from_psi0(solve_rh(PhysicalPoint(x, y), disc_half).psi0)[0]
    qx = (qf(p.x + h, p.y) - qf(p.x - h, p.y)) / (2 * h)
    qy = (qf(p.x, p.y + h) - qf(p.x, p.y - h)) / (2 * h)
    combo = 2 * solve_rh(p, disc_half).psi_star[1, 0]
    assert abs(combo - (qx - 1j * qy)) < 1e-6


def test_psistar_step_order(disc_half):
    # halving the x-step changes cos q by O(step^2)
    cos_q = []
    for h in (4e-2, 2e-2, 1e-2):
        cos_q.append(math.cos(q_from_psistar(_row(disc_half, 0.5, 1.0, h))[1]))
    ratio = abs(cos_q[0] - cos_q[1]) / abs(cos_q[1] - cos_q[2])
    assert 3 < ratio < 5


def test_small_d_quadratic(spec_small, disc_small):
    row = _row(disc_small, 0.5, 0.5, 1e-3)
    ps = np.array([s.psi_star for s in row])
    omc = one_minus_cos_q(ps[1], (ps[2] - ps[0]) / 2e-3).real
    q_lin = linear_oracle(PhysicalPoint(0.5, 0.5), OracleSeries(0.01, 1.0))
    assert abs(omc - q_lin**2 / 2) <= 5e-2 * q_lin**2 / 2


def test_psistar_inconsistency(disc_half):
    row = _row(disc_half, 0.5, 1.0, 1e-3)
    for s in row:
        s.psi_star = s.psi_star + np.array([[5j, 0], [0, 0]]) * s.point.x
    with pytest.raises(InconsistencyError):
        q_from_psistar(row)


def test_psistar_row_validation(disc_half):
    row = _row(disc_half, 0.5, 1.0, 1e-3)
    with pytest.raises(GridError):
        q_from_psistar(row[:2])
    with pytest.raises(GridError):
        q_from_psistar(row[::-1])


@pytest.mark.parametrize("grid", [GridSpec(0.0, 1.0, 3, 0.1, 3), GridSpec(0.5, 0.2, 3, 0.1, 3),
                                  GridSpec(0.2, 1.0, 3, 0.6, 3), GridSpec(0.2, 1.0, 0, 0.1, 3)])
def test_grid_validation(grid):
    with pytest.raises(GridError):
        grid.axes(1.0)


def test_sweep_trivial():
    spec = LinearizableSpectrum(ProblemParams(0.0, 1.0), n_nodes=1001)
    disc = discretize_contour(spec, 1e-2, 1e2, 50)
    field = field_sweep(GridSpec(0.2, 1.0, 5, 0.1, 5), disc)
    assert np.abs(field.q).max() == 0 and np.abs(field.q_alt).max() == 0
    assert not field.partial


def test_sweep_decay_and_routes(disc_small):
    field = field_sweep(GridSpec(0.2, 2.0, 6, 0.1, 5), disc_small, threads=2)
    amp = np.abs(field.q).max(axis=1)
    assert np.all(np.diff(amp) <= 0)
    assert field.route_gap <= 1e-4
    assert field.imag_leak <= 1e-6
    assert field.metadata["contour"]["n_per_ray"] == 200


def test_sweep_records_failures(disc_half):
    field = field_sweep(GridSpec(0.5, 1.0, 2, 0.5, 2), disc_half, max_iter=1, tol=1e-15, fd_step=0)
    assert field.partial and len(field.failures) == 4
    assert np.all(np.isnan(field.q))
    assert "DivergenceError" in field.failures[0][2]


def test_field_files_round_trip(tmp_path, disc_small):
    field = field_sweep(GridSpec(0.2, 0.6, 3, 0.2, 3), disc_small)
    path = tmp_path / "f.csv"
    field.to_csv(path, comment="run")
    back = SolutionField.from_csv(path, field.params)
    np.testing.assert_array_equal(back.q, field.q)
    np.testing.assert_array_equal(back.q_alt, field.q_alt)
    np.testing.assert_array_equal(back.iterations, field.iterations)
    jpath = tmp_path / "f.json"
    field.to_json(jpath)
    doc = json.loads(jpath.read_text())
    assert doc["metadata"]["d"] == 0.01 and len(doc["points"]) == 9


def test_field_csv_malformed(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("x,y,q\n1,2,3\n")
    with pytest.raises(ConfigError):
        SolutionField.from_csv(path, ProblemParams(0.1, 1.0))
