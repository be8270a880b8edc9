import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkscheme.flux_model import affine_model, entropy_pair
from kkscheme.grid_state import Grid, InputError, State, to_polar
from kkscheme.scheme import semidiscrete_rhs
from kkscheme.diagnostics import (
    LemmaMonitor,
    angle_bv,
    boundary_outflux,
    dissipation_terms,
    entropy_residual,
    norms,
    ratio_bounds,
    rl1_budget_terms,
)
from kkscheme.time_integrator import METHODS, IntegratorConfig, integrate, stable_dt, step

from conftest import MODELS, model_names, positive_states


def test_norms_single_cell():
    assert norms(State(0.0, [3.0], [4.0]), Grid(0, 1, 1)) == pytest.approx((5.0, 5.0, 5.0))


def test_norms_two_cells():
    l1, l2, linf = norms(State(0.0, [1.0, 2.0], [0.0, 0.0]), Grid(0, 1, 2))
    assert (l1, l2, linf) == pytest.approx((1.5, math.sqrt(2.5), 2.0))


def test_ratio_bounds_example():
    rb = ratio_bounds(State(0.0, [1.0, 3.0], [2.0, 1.0]))
    assert (rb.lo, rb.hi, rb.excluded) == (0.5, 3.0, 0)


def test_ratio_bounds_skip_zero_v():
    rb = ratio_bounds(State(0.0, [1.0, 3.0], [0.0, 1.0]))
    assert (rb.lo, rb.hi, rb.excluded) == (3.0, 3.0, 1)


@pytest.mark.parametrize("angles, expected", [([0.1, 0.3, 0.2], 0.3), ([0.0, 0.4], 0.4), ([0.7], 0.0)])
def test_angle_bv_examples(angles, expected):
    assert angle_bv(np.array(angles)) == pytest.approx(expected)


def test_e2_hand_value():
    e = dissipation_terms(State(0.0, [1.0, 2.0], [0.0, 0.0]), affine_model(), Grid(0, 2, 2))
    # dx/2 f''(1.5) (D_- r)^2 with f'' = 2
    assert e.e2[1] == pytest.approx(1.0)
    # 2 f'(1.5) times that, f'(1.5) = 4
    assert e.e3[1] == pytest.approx(8.0)
    assert e.e1[1] == 0.0


def test_e1_vanishes_for_parallel_jump_and_not_otherwise():
    g, m = Grid(0, 2, 2), affine_model()
    assert dissipation_terms(State(0.0, [1.0, 2.0], [1.0, 2.0]), m, g).e1[1] == pytest.approx(0.0, abs=1e-15)
    e = dissipation_terms(State(0.0, [1.0, 0.0], [0.0, 1.0]), m, g)
    # U_m = (1/2, 1/2), D_-U = (-1, 1), cross product -1, phi(r_0) = 2, dx = 1
    expected = 2.0 * 1.0 * (-1 * 0.5 - 1 * 0.5) ** 2 / (math.sqrt(0.5) ** 3)
    assert e.e1[1] == pytest.approx(expected)


def test_budget_terms_hand_values():
    radial, gradient = rl1_budget_terms(State(0.0, [1.0, 2.0], [0.0, 0.0]), affine_model(), Grid(0, 2, 2))
    # int_1^2 (4 - s^2) ds and phi(1) * |U_1 - U_0|^2
    assert radial[1] == pytest.approx(5 / 3, abs=1e-12)
    assert gradient[1] == pytest.approx(2.0)
    assert radial[0] == 0.0 and gradient[0] == 0.0


def test_entropy_residual_euler_hand_value():
    g, m = Grid(0, 2, 2), affine_model()
    before = State(0.0, [1.0, 0.0], [0.0, 1.0])
    after = step(before, 0.1, lambda s: semidiscrete_rhs(s, m, g), "euler")
    np.testing.assert_allclose(after.u, [1.0, 0.2])
    np.testing.assert_allclose(after.v, [0.0, 0.8])
    res = entropy_residual(before, after, m, entropy_pair(m, 1, 0.0), g)
    # f(r_1) - f(r_0) = 0, so the residual is the radial change alone
    assert res.cells[0] == 0.0
    assert res.cells[1] == pytest.approx((math.sqrt(0.68) - 1.0) / 0.1, abs=1e-13)


def test_entropy_residual_rejects_bad_input():
    g, m = Grid(0, 1, 2), affine_model()
    s = State(0.0, [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(InputError):
        entropy_residual(s, s, m, entropy_pair(m, 1), g)
    with pytest.raises(InputError):
        entropy_residual(s, State(0.1, [1.0, 1.0], [1.0, 1.0]), m, entropy_pair(m, 1), g,
                         stages=[s], method="ssprk2")


def test_boundary_outflux():
    g = Grid(0, 1, 3)
    s = State(0.0, [1.0, 1.0, 3.0], [0.0, 0.0, 0.0])
    assert boundary_outflux([s], "euler", lambda r: r, g) == 2.0
    assert boundary_outflux([s], "euler", lambda r: r, Grid(0, 1, 3, "periodic")) == 0.0


def _one_step(name, uv, method, cfl):
    u, v = uv
    m, g = MODELS[name](), Grid(0, 1, u.size)
    s = State(0.0, u, v)
    dt = stable_dt(s, m, g, cfl)
    stages = []
    return m, g, s, step(s, dt, lambda w: semidiscrete_rhs(w, m, g), method, stages), dt, stages


step_args = (model_names, positive_states(), st.sampled_from(METHODS), st.floats(0.05, 1.0))


@given(*step_args)
def test_one_step_max_principle_and_positivity(name, uv, method, cfl):
    _, _, s, out, _, _ = _one_step(name, uv, method, cfl)
    assert out.r.max() <= s.r.max() * (1 + 1e-12)
    assert out.u.min() >= -1e-13 and out.v.min() >= -1e-13


@given(*step_args)
def test_one_step_ratio_bounds(name, uv, method, cfl):
    _, _, s, out, _, _ = _one_step(name, uv, method, cfl)
    rb0, rb1 = ratio_bounds(s), ratio_bounds(out)
    assert rb1.lo >= rb0.lo * (1 - 1e-10) and rb1.hi <= rb0.hi * (1 + 1e-10)


@given(model_names, positive_states(), st.floats(0.05, 1.0))
def test_one_step_euler_angle_bv(name, uv, cfl):
    # Each new U_j is a nonnegative mix of U_j and U_{j-1}, so the new angle
    # lies between theirs: an upwind update of the angle with Courant number in [0, 1].
    _, _, s, out, _, _ = _one_step(name, uv, "euler", cfl)
    assert angle_bv(to_polar(out)) <= angle_bv(to_polar(s)) + 1e-10


@given(model_names, positive_states(), st.sampled_from(["ssprk2", "ssprk3"]), st.floats(0.05, 0.5))
def test_one_step_ssp_angle_bv_at_moderate_cfl(name, uv, method, cfl):
    _, _, s, out, _, _ = _one_step(name, uv, method, cfl)
    assert angle_bv(to_polar(out)) <= angle_bv(to_polar(s)) + 1e-10


def test_ssp_averaging_can_raise_angle_bv_near_unit_cfl():
    # The final SSP blend averages vectors, and the angle of an average is not
    # the average of angles. At cfl = 1 with constant phi, ssprk2 gives
    # U_j <- (U_j + U_{j-2}) / 2.
    m, g = MODELS["constant"](), Grid(0, 1, 5)
    s = State(0.0, np.ones(5), [1.0, 2.0, 1.0, 1.0, 1.0])
    out = step(s, stable_dt(s, m, g, 1.0), lambda w: semidiscrete_rhs(w, m, g), "ssprk2")
    before = 2 * (math.atan(2.0) - math.pi / 4)
    after = 4 * (math.atan(1.5) - math.pi / 4)
    assert angle_bv(to_polar(s)) == pytest.approx(before)
    assert angle_bv(to_polar(out)) == pytest.approx(after)
    assert after > before


@given(*step_args)
def test_one_step_entropy_sign(name, uv, method, cfl):
    m, g, s, out, dt, stages = _one_step(name, uv, method, cfl)
    res = entropy_residual(s, out, m, entropy_pair(m, 1, 0.0), g, dt, stages, method)
    scale = 1.0 + np.abs(semidiscrete_rhs(s, m, g).du).max() + np.abs(semidiscrete_rhs(s, m, g).dv).max()
    assert res.max <= 1e-12 * scale


@given(model_names, positive_states())
def test_dissipation_terms_nonnegative(name, uv):
    u, v = uv
    e = dissipation_terms(State(0.0, u, v), MODELS[name](), Grid(0, 1, u.size))
    assert e.e1.min() >= 0.0 and e.e2.min() >= 0.0 and e.e3.min() >= 0.0


@given(model_names, positive_states())
def test_budget_terms_nonnegative(name, uv):
    u, v = uv
    radial, gradient = rl1_budget_terms(State(0.0, u, v), MODELS[name](), Grid(0, 1, u.size))
    assert radial.min() >= -1e-12 and gradient.min() >= 0.0


def test_monitor_flags_violation_at_unsafe_cfl():
    g, m = Grid(-2, 2, 400), affine_model()
    x = g.centers
    s = State(0.0, np.where(x < 0, 1.0, 2.0), np.ones_like(x))
    mon = LemmaMonitor(m, g, "ssprk3")
    integrate(s, m, g, IntegratorConfig(cfl=1.2, allow_unsafe_cfl=True, t_end=0.05), [mon])
    v = {d.name: d for d in mon.verdicts()}
    assert not v["linfty_max_principle"].passed
    assert v["linfty_max_principle"].worst_margin > 1e-4


def test_monitor_rows_and_report():
    g, m = Grid(-1, 1, 40), affine_model()
    s = State(0.0, np.linspace(1, 2, 40), np.ones(40))
    mon = LemmaMonitor(m, g, "euler", track_eta2=True)
    res = integrate(s, m, g, IntegratorConfig(method="euler", t_end=0.1, snapshot_every=0.05), [mon])
    assert len(mon.rows) == res.steps + 1
    rep = mon.report()
    assert rep["passed"] and rep["eta2_residual_integral"] <= 1e-10
    assert rep["initial"]["C"] == pytest.approx(2.0)
