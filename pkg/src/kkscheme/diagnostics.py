"""Discrete a priori estimates tracked along a run.

Each quantity here is the grid version of an estimate the semi-discrete
scheme is known to satisfy: decay of ||r|| in L1 and L2, the maximum
principle for r, preservation of u/v bounds, non-increasing total variation
of the polar angle, the sign of the radial entropy residual, and the
time-integrated dissipation budget. ``LemmaMonitor`` evaluates all of them
at every step and turns them into pass/fail verdicts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .flux_model import EntropyPair, FluxModel, entropy_pair, g_integral, simpson
from .grid_state import R_ZERO_TOL, Grid, InputError, PolarState, State, to_polar
from .scheme import backward_differences, left_neighbour
from .time_integrator import STAGE_WEIGHTS, StepEvent


@dataclass
class Slack:
    norm_rel: float = 1e-10
    linf: float = 1e-10
    ratio: float = 1e-8
    positivity: float = 1e-13
    bv: float = 1e-8
    entropy: float = 1e-10
    budget: float = 1e-8


def norms(state: State, grid: Grid) -> tuple[float, float, float]:
    r = state.r
    return (
        float(grid.dx * np.sum(r)),
        float(math.sqrt(grid.dx * np.sum(r * r))),
        float(np.max(r)) if r.size else 0.0,
    )


class RatioBounds(NamedTuple):
    lo: float
    hi: float
    excluded: int


def ratio_bounds(state: State, r_zero_tol: float = R_ZERO_TOL) -> RatioBounds:
    """Extrema of u_j / v_j over cells where v_j is not (numerically) zero."""
    ok = state.v > r_zero_tol
    if not np.any(ok):
        return RatioBounds(math.nan, math.nan, int(state.v.size))
    q = state.u[ok] / state.v[ok]
    return RatioBounds(float(q.min()), float(q.max()), int(np.count_nonzero(~ok)))


def angle_bv(polar: PolarState | np.ndarray) -> float:
    a = polar.angle if isinstance(polar, PolarState) else np.asarray(polar)
    return float(np.sum(np.abs(np.diff(a))))


@dataclass
class EntropyResidual:
    cells: np.ndarray
    integral: float

    @property
    def max(self) -> float:
        return float(np.max(self.cells))


def entropy_residual(
    before: State,
    after: State,
    model: FluxModel,
    pair: EntropyPair,
    grid: Grid,
    dt: float | None = None,
    stages: list | None = None,
    method: str = "euler",
) -> EntropyResidual:
    """[eta(r^{n+1}) - eta(r^n)] / dt + D_- Q.

    Without ``stages``, Q = q(r^n). With the stage states of an SSP step, Q is
    the stage-weighted entropy flux sum_k b_k q(r^(k)); this is the flux the
    step actually applied and reduces to q(r^n) for Euler.
    """
    if before.n_cells != grid.n_cells or after.n_cells != grid.n_cells:
        raise InputError("snapshots do not match the grid")
    if dt is None:
        dt = after.t - before.t
    if not dt > 0:
        raise InputError("snapshots must be separated by a positive dt")
    r0, r1 = before.r, after.r
    if stages:
        weights = STAGE_WEIGHTS[method]
        if len(weights) != len(stages):
            raise InputError(f"{method} expects {len(weights)} stages, got {len(stages)}")
        q = sum(b * pair.q(s.r) for b, s in zip(weights, stages))
    else:
        q = pair.q(r0)
    cells = (pair.eta(r1) - pair.eta(r0)) / dt + backward_differences(q, grid.dx, grid.boundary)
    return EntropyResidual(cells, float(grid.dx * np.sum(cells)))


class DissipationTerms(NamedTuple):
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    flagged: int


def dissipation_terms(state: State, model: FluxModel, grid: Grid, r_zero_tol: float = R_ZERO_TOL):
    """Cellwise e1, e2, e3 with mean-value points replaced by neighbour means.

    e1 is phi_{j-1} dx times the Hessian of |U| at the mean state applied to
    D_-U; in 2D that quadratic form is (D_-U x U_m)^2 / |U_m|^3, which is
    nonnegative and vanishes exactly for D_-U parallel to U_m.
    """
    bc = grid.boundary
    u, v = state.u, state.v
    ul, vl = left_neighbour(u, bc), left_neighbour(v, bc)
    du, dv = (u - ul) / grid.dx, (v - vl) / grid.dx
    um, vm = 0.5 * (u + ul), 0.5 * (v + vl)
    norm_m = np.hypot(um, vm)
    phi_left = model.phi(left_neighbour(state.r, bc))

    good = norm_m > r_zero_tol
    cross = du * vm - dv * um
    e1 = np.zeros_like(u)
    e1[good] = phi_left[good] * grid.dx * cross[good] ** 2 / norm_m[good] ** 3

    r = state.r
    rl = left_neighbour(r, bc)
    r_mean = 0.5 * (r + rl)
    dr = (r - rl) / grid.dx
    fpp = model.f_double_prime(r_mean)
    e2 = 0.5 * grid.dx * fpp * dr * dr
    e3 = 0.5 * grid.dx * 2.0 * model.f_prime(r_mean) * fpp * dr * dr
    return DissipationTerms(e1, e2, e3, int(np.count_nonzero(~good)))


def boundary_outflux(stages: list, method: str, flux, grid: Grid) -> float:
    """Net stage-weighted flux leaving the domain: Q(r_{n-1}) - Q(r_ghost).

    Zero for periodic grids. On an outflow grid this is what separates the
    norm balance of the truncated problem from the whole-line estimate.
    """
    if grid.boundary == "periodic":
        return 0.0
    total = 0.0
    for b, s in zip(STAGE_WEIGHTS[method], stages):
        r = s.r
        total += b * float(flux(r[-1]) - flux(r[0]))
    return total


def rl1_budget_terms(state: State, model: FluxModel, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (int_{r_{j-1}}^{r_j} (r_j^2 - s^2) phi'(s) ds, dx^2 phi_{j-1} |D_-U_j|^2)."""
    bc = grid.boundary
    r = state.r
    rl = left_neighbour(r, bc)
    radial = simpson(lambda s: (r * r - s * s) * model.phi_prime(s), rl, r)
    radial = np.atleast_1d(radial)
    gu = state.u - left_neighbour(state.u, bc)
    gv = state.v - left_neighbour(state.v, bc)
    gradient = model.phi(rl) * (gu * gu + gv * gv)
    return radial, gradient


def rl1_budget_increment(state: State, model: FluxModel, grid: Grid) -> float:
    radial, gradient = rl1_budget_terms(state, model, grid)
    return float(np.sum(radial) + np.sum(gradient))


@dataclass
class NormSeries:
    times: list = field(default_factory=list)
    l1_r: list = field(default_factory=list)
    l2_r: list = field(default_factory=list)
    linf_r: list = field(default_factory=list)


@dataclass
class AngleSeries:
    times: list = field(default_factory=list)
    bv: list = field(default_factory=list)
    min_angle: list = field(default_factory=list)
    max_angle: list = field(default_factory=list)


@dataclass
class DissipationBudget:
    e1_integral: float = 0.0
    e2_integral: float = 0.0
    e3_integral: float = 0.0
    rl1_budget: float = 0.0


@dataclass
class LemmaVerdict:
    name: str
    passed: bool
    worst_margin: float
    at_time: float
    detail: str = ""


SERIES_COLUMNS = (
    "step", "t", "dt", "l1_r", "l2_r", "linf_r", "bv_angle", "ratio_min", "ratio_max",
)


class _Worst:
    """Tracks max over the run of (observed - allowed) and where it happened."""

    def __init__(self):
        self.margin = -math.inf
        self.t = math.nan

    def update(self, margin: float, t: float):
        if margin > self.margin:
            self.margin, self.t = float(margin), float(t)

    @property
    def ok(self) -> bool:
        return self.margin <= 0


class LemmaMonitor:
    """Observer for ``integrate`` that checks every estimate at every step."""

    def __init__(self, model: FluxModel, grid: Grid, method: str = "ssprk3",
                 slack: Slack | None = None, track_eta2: bool = False):
        self.model = model
        self.grid = grid
        self.method = method
        self.slack = slack or Slack()
        self.pair1 = entropy_pair(model, 1, 0.0)
        self.track_eta2 = track_eta2
        self.norms = NormSeries()
        self.angles = AngleSeries()
        self.budget = DissipationBudget()
        self.rows: list[dict] = []
        self.snapshot_rows: list[dict] = []
        self.eta2_integral = 0.0
        self._initial = None
        self._prev_norms = None
        self._w = {k: _Worst() for k in (
            "l1", "l2", "l1_strict", "l2_strict", "linf", "ratio", "positivity", "bv", "entropy", "e1", "budget")}

    def __call__(self, event: StepEvent) -> None:
        s, grid = event.state, self.grid
        l1, l2, linf = norms(s, grid)
        polar = to_polar(s)
        bv = angle_bv(polar)
        rb = ratio_bounds(s)
        min_comp = float(min(s.u.min(), s.v.min()))

        if self._initial is None:
            C = max(rb.hi, 1.0 / rb.lo) if rb.excluded == 0 else math.inf
            self._initial = {"l1": l1, "l2": l2, "linf": linf, "bv": bv, "C": C}
        init = self._initial
        sl = self.slack

        if event.previous is not None:
            p1, p2, _ = self._prev_norms
            self._w["l1_strict"].update((l1 - p1) / max(p1, 1e-300) - sl.norm_rel, event.t)
            self._w["l2_strict"].update((l2 - p2) / max(p2, 1e-300) - sl.norm_rel, event.t)
            out1 = boundary_outflux(event.stages, self.method, self.model.f, grid)
            out2 = boundary_outflux(event.stages, self.method,
                                    lambda r: g_integral(self.model, r), grid)
            self._w["l1"].update(
                (l1 - p1 + event.dt * out1) / max(p1, 1e-300) - sl.norm_rel, event.t)
            self._w["l2"].update(
                (l2 * l2 - p2 * p2 + event.dt * out2) / max(p2 * p2, 1e-300) - sl.norm_rel, event.t)

            res = entropy_residual(event.previous, s, self.model, self.pair1, grid,
                                   event.dt, event.stages, self.method)
            self._w["entropy"].update(res.max - sl.entropy, event.t)
            # Left Riemann sums in time, matching the explicit step.
            prev = event.previous
            e = dissipation_terms(prev, self.model, grid)
            self._w["e1"].update(-float(e.e1.min()), event.t)
            b = self.budget
            b.e1_integral += event.dt * grid.dx * float(np.sum(e.e1))
            b.e2_integral += event.dt * grid.dx * float(np.sum(e.e2))
            b.e3_integral += event.dt * grid.dx * float(np.sum(e.e3))
            b.rl1_budget += event.dt * rl1_budget_increment(prev, self.model, grid)
            self._w["budget"].update(b.rl1_budget - (init["l2"] ** 2 + sl.budget), event.t)
            if self.track_eta2:
                pair2 = entropy_pair(self.model, 2, 0.0)
                self.eta2_integral += event.dt * entropy_residual(
                    prev, s, self.model, pair2, grid, event.dt, event.stages, self.method
                ).integral

        self._w["linf"].update(linf - (init["linf"] + sl.linf), event.t)
        C = init["C"]
        if math.isfinite(C) and not math.isnan(rb.lo):
            self._w["ratio"].update(max(1.0 / C - sl.ratio - rb.lo, rb.hi - (C + sl.ratio)), event.t)
        self._w["positivity"].update(-sl.positivity - min_comp, event.t)
        self._w["bv"].update(bv - (init["bv"] + sl.bv), event.t)
        self._prev_norms = (l1, l2, linf)

        self.norms.times.append(event.t)
        self.norms.l1_r.append(l1)
        self.norms.l2_r.append(l2)
        self.norms.linf_r.append(linf)
        self.angles.times.append(event.t)
        self.angles.bv.append(bv)
        self.angles.min_angle.append(float(polar.angle.min()))
        self.angles.max_angle.append(float(polar.angle.max()))

        row = {
            "step": event.step, "t": event.t, "dt": event.dt,
            "l1_r": l1, "l2_r": l2, "linf_r": linf, "bv_angle": bv,
            "ratio_min": rb.lo, "ratio_max": rb.hi,
        }
        self.rows.append(row)
        if event.snapshot:
            self.snapshot_rows.append({**row, **asdict(self.budget), "min_component": min_comp})

    def verdicts(self) -> list[LemmaVerdict]:
        w = self._w
        sl = self.slack

        def worst(*keys):
            best = max((w[k] for k in keys), key=lambda x: x.margin)
            return best.margin, best.t

        out = []
        m, t = worst("l1", "l2")
        strict = w["l1_strict"].ok and w["l2_strict"].ok
        out.append(LemmaVerdict("rl1_norm_decay", w["l1"].ok and w["l2"].ok, m, t,
                                f"per-step growth of ||r||_1, ||r||_2^2 net of boundary outflux "
                                f"<= {sl.norm_rel:g} relative; strict decay without boundary "
                                f"correction: {'yes' if strict else 'no'}"))
        m, t = worst("budget")
        out.append(LemmaVerdict("rl1_budget", w["budget"].ok, m, t,
                                f"accumulated budget {self.budget.rl1_budget:.6g} <= "
                                f"||r(0)||_2^2 = {self._initial['l2'] ** 2:.6g} + {sl.budget:g}"))
        m, t = worst("linf")
        out.append(LemmaVerdict("linfty_max_principle", w["linf"].ok, m, t,
                                f"max r <= {self._initial['linf']:.12g} + {sl.linf:g}"))
        m, t = worst("ratio", "positivity")
        out.append(LemmaVerdict("linfty_positivity_ratio", w["ratio"].ok and w["positivity"].ok, m, t,
                                f"u/v in [1/C, C] with C = {self._initial['C']:.12g} (+/- {sl.ratio:g}); "
                                f"u, v >= -{sl.positivity:g}"))
        m, t = worst("bv")
        out.append(LemmaVerdict("anglconv_bv", w["bv"].ok, m, t,
                                f"BV(angle) <= {self._initial['bv']:.12g} + {sl.bv:g}"))
        m, t = worst("entropy", "e1")
        out.append(LemmaVerdict("entropy_sign", w["entropy"].ok and w["e1"].ok, m, t,
                                f"radial entropy residual <= {sl.entropy:g}; e1 >= 0"))
        return out

    @property
    def initial(self) -> dict:
        """Norms, BV and ratio bound C of the first observed state."""
        return self._initial

    @property
    def strict_norm_decay(self) -> bool:
        """||r||_1 and ||r||_2 never grew, boundary fluxes not credited."""
        return self._w["l1_strict"].ok and self._w["l2_strict"].ok

    def worst_margins(self) -> dict:
        return {k: (v.margin, v.t) for k, v in self._w.items()}

    def report(self) -> dict:
        verdicts = self.verdicts()
        return {
            "initial": self._initial,
            "slack": asdict(self.slack),
            "budget": asdict(self.budget),
            "eta2_residual_integral": self.eta2_integral if self.track_eta2 else None,
            "worst_margins": {k: {"margin": m, "t": t} for k, (m, t) in self.worst_margins().items()},
            "snapshots": self.snapshot_rows,
            "verdicts": [asdict(v) for v in verdicts],
            "passed": all(v.passed for v in verdicts),
        }
