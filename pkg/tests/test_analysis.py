import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkscheme.analysis import (
    THREADS_ENV,
    BumpTestFunction,
    check_ladder,
    dump_json,
    exact_convergence,
    restrict,
    self_convergence,
    transported_exact,
    weak_residual,
    weak_residual_study,
    WeakResidualReport,
)
from kkscheme.flux_model import affine_model, constant_model
from kkscheme.grid_state import Grid, InputError, State, make_initial_data, project_initial
from kkscheme.time_integrator import IntegratorConfig, integrate


def test_restrict_example():
    s = restrict(State(0.0, [1.0, 3.0, 5.0, 7.0], [2.0, 2.0, 0.0, 4.0]), Grid(0, 1, 2))
    np.testing.assert_array_equal(s.u, [2.0, 6.0])
    np.testing.assert_array_equal(s.v, [2.0, 2.0])
    with pytest.raises(InputError):
        restrict(State(0.0, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), Grid(0, 1, 2))


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40).filter(lambda l: len(l) % 2 == 0))
def test_restrict_conserves_mass(vals):
    fine = State(0.0, vals, vals)
    coarse = restrict(fine, Grid(0, 1, len(vals) // 2))
    assert coarse.u.sum() * 2 == pytest.approx(sum(vals), abs=1e-12)


@pytest.mark.parametrize("ladder", [[100, 200], [100, 300, 600], [100, 200, 300]])
def test_bad_ladders(ladder):
    with pytest.raises(ValueError):
        check_ladder(ladder)


def _constant_solver(n):
    g = Grid(-1, 1, n)
    s = integrate(State(0.0, np.ones(n), 2 * np.ones(n)), affine_model(), g,
                  IntegratorConfig(t_end=0.2)).final
    return g, s


def test_constant_state_has_zero_error():
    table = self_convergence(_constant_solver, [20, 40, 80])
    assert table.complete and table.exact
    assert max(table.l1_errors_r[:-1]) == 0.0
    exact = exact_convergence(_constant_solver, lambda g: State(0.2, np.ones(g.n_cells), 2 * np.ones(g.n_cells)),
                              [20, 40, 80])
    assert exact.exact


def test_aborted_level_marks_table_incomplete():
    table = self_convergence(lambda n: (Grid(0, 1, n), None), [10, 20, 40])
    assert not table.complete
    assert all(math.isnan(e) for e in table.l1_errors_r)


def test_threaded_ladder_matches_serial(monkeypatch):
    serial = self_convergence(_constant_solver, [20, 40, 80])
    monkeypatch.setenv(THREADS_ENV, "3")
    threaded = self_convergence(_constant_solver, [20, 40, 80])
    np.testing.assert_array_equal(serial.l1_errors_r, threaded.l1_errors_r)


def test_transport_rate():
    d = make_initial_data("gaussian_bump", center=-1.0)
    m = constant_model(1.0, r_max_valid=4.0)

    def solve(n):
        g = Grid(-2, 2, n)
        res = integrate(project_initial(d.u0, d.v0, g), m, g, IntegratorConfig(t_end=1.0))
        return g, res.final

    table = exact_convergence(solve, transported_exact(d.u0, d.v0, 1.0, 1.0), [200, 400, 800])
    assert table.min_rate("r") >= 0.8


def test_transported_exact_shifts_breakpoints():
    d = make_initial_data("riemann", left=(1, 1), right=(2, 1), x0=0.0)
    s = transported_exact(d.u0, d.v0, 1.0, 0.25)(Grid(-1, 1, 4))
    np.testing.assert_allclose(s.u, [1.0, 1.0, 1.5, 2.0])


def test_bump_vanishes_outside_support():
    psi = BumpTestFunction(0.0, 0.5, 0.3, 0.1)
    assert psi(0.6, 0.3) == 0.0 and psi(0.0, 0.45) == 0.0
    assert psi(0.0, 0.3) == pytest.approx(math.exp(-2))


def _trajectory():
    g, m = Grid(-2, 2, 80), affine_model()
    d = make_initial_data("riemann")
    res = integrate(project_initial(d.u0, d.v0, g), m, g,
                    IntegratorConfig(t_end=0.5, snapshot_every=0.0))
    return g, m, res.snapshots


def test_weak_residual_is_linear_in_psi():
    g, m, snaps = _trajectory()
    p1 = BumpTestFunction(0.3, 0.8, 0.2, 0.15, id="a")
    p2 = BumpTestFunction(-0.5, 0.6, 0.25, 0.2, id="b")
    r1, r2 = weak_residual(snaps, m, p1, g), weak_residual(snaps, m, p2, g)
    r12 = weak_residual(snaps, m, 2.5 * p1 + p2, g)
    assert r12.residual_u == pytest.approx(2.5 * r1.residual_u + r2.residual_u, rel=1e-12, abs=1e-15)
    assert r12.residual_v == pytest.approx(2.5 * r1.residual_v + r2.residual_v, rel=1e-12, abs=1e-15)


def test_weak_residual_support_checks():
    g, m, snaps = _trajectory()
    with pytest.raises(InputError):
        weak_residual(snaps, m, BumpTestFunction(1.5, 0.6, 0.2, 0.1), g)
    with pytest.raises(InputError):
        weak_residual(snaps, m, BumpTestFunction(0.0, 0.5, 0.4, 0.2), g)


def test_weak_residual_of_constant_state_is_quadrature_error():
    g, m = Grid(-2, 2, 64), affine_model()
    res = integrate(State(0.0, np.ones(64), np.ones(64)), m, g, IntegratorConfig(t_end=0.5))
    rep = weak_residual(res.snapshots, m, BumpTestFunction(0.0, 1.0, 0.2, 0.15), g)
    # Only the trapezoid error of the time integral remains.
    assert abs(rep.residual_u) < 1e-5 and rep.residual_u == pytest.approx(rep.residual_v)


def test_study_factors_and_json(tmp_path):
    reps = [WeakResidualReport("p", 0.4, -0.8, 100), WeakResidualReport("p", 0.2, 0.2, 200),
            WeakResidualReport("p", 0.0, 0.1, 400)]
    st_ = weak_residual_study(reps)
    assert st_.factors_u == [2.0, math.inf]
    assert st_.factors_v == [4.0, 2.0]
    assert st_.min_factor() == 2.0
    dump_json({"a": math.nan, "b": [1.0, math.inf]}, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text())["a"] is None
