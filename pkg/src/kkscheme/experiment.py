"""Wiring from a RunConfig to runs, verification sweeps and refinement studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    BumpTestFunction,
    ConvergenceTable,
    WeakResidualAccumulator,
    WeakResidualStudy,
    check_ladder,
    exact_convergence,
    self_convergence,
    transported_exact,
    weak_residual_study,
)
from .config import ConfigError, RunConfig
from .diagnostics import LemmaMonitor, LemmaVerdict
from .flux_model import FluxModel, check_assumptions, get_model
from .grid_state import Grid, InitialData, InputError, State, make_initial_data, project_initial
from .time_integrator import RunResult, integrate


@dataclass
class Problem:
    config: RunConfig
    model: FluxModel
    grid: Grid
    data: InitialData
    state0: State


def build_problem(config: RunConfig, n_cells: int | None = None) -> Problem:
    """Validate everything that can be checked before running and set up the run."""
    gc = config.grid
    try:
        grid = Grid(gc.x_min, gc.x_max, n_cells or gc.n_cells, gc.boundary)
        config.integrator.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        data = make_initial_data(config.initial_data.kind, **config.initial_data.params)
    except InputError as exc:
        raise ConfigError(
            f"initial data rejected: {exc} (hypothesis u0 > 0, v0 > 0 with bounded u0/v0 "
            "is required for convergence to a weak solution)"
        ) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad initial data parameters: {exc}") from None

    mc = config.model
    r_env = mc.r_max_valid if mc.r_max_valid is not None else 2.0 * max(data.r_max, 0.5)
    try:
        model = get_model(mc.name, r_max_valid=r_env, **mc.params)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad flux model: {exc}") from None
    if model.r_max_valid < data.r_max:
        raise ConfigError(
            f"model envelope r <= {model.r_max_valid} does not cover initial max r = {data.r_max}"
        )
    report = check_assumptions(model)
    if not report.admissible:
        raise ConfigError(
            f"flux model {model.name!r} violates phi > 0 and phi' >= 0 on "
            f"[0, {model.r_max_valid}] (min phi = {report.min_phi:g}, "
            f"min phi' = {report.min_phi_prime:g})"
        )
    state0 = project_initial(data.u0, data.v0, grid)
    return Problem(config, model, grid, data, state0)


@dataclass
class Outcome:
    problem: Problem
    result: RunResult
    monitor: LemmaMonitor | None


def run(problem: Problem, diagnostics: bool = True, observers=()) -> Outcome:
    cfg = problem.config
    monitor = None
    obs = list(observers)
    if diagnostics:
        monitor = LemmaMonitor(problem.model, problem.grid, cfg.integrator.method,
                               cfg.diagnostics.slack, cfg.diagnostics.track_eta2)
        obs.insert(0, monitor)
    result = integrate(problem.state0, problem.model, problem.grid, cfg.integrator, obs)
    return Outcome(problem, result, monitor)


@dataclass
class BudgetSweepEntry:
    n_cells: int
    budget: float
    bound: float
    passed: bool


@dataclass
class VerifyOutcome:
    main: Outcome
    verdicts: list
    budget_sweep: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.main.result.complete and all(v.passed for v in self.verdicts)


def verify(config: RunConfig) -> VerifyOutcome:
    problem = build_problem(config)
    main = run(problem)
    verdicts = list(main.monitor.verdicts())
    if not main.result.complete:
        verdicts.append(LemmaVerdict("run_complete", False, math.inf, main.result.final.t,
                                     main.result.message))

    sweep = []
    slack = config.diagnostics.slack.budget
    for n in config.diagnostics.budget_resolutions:
        if n == problem.grid.n_cells:
            mon = main.monitor
        else:
            mon = run(build_problem(config, n)).monitor
        bound = mon.initial["l2"] ** 2 + slack
        sweep.append(BudgetSweepEntry(n, mon.budget.rl1_budget, bound, mon.budget.rl1_budget <= bound))
    if sweep:
        worst = max(sweep, key=lambda e: e.budget - e.bound)
        verdicts.append(LemmaVerdict(
            "rl1_budget_dx_uniform", all(e.passed for e in sweep), worst.budget - worst.bound,
            config.integrator.t_end,
            "budget <= ||r(0)||_2^2 + slack at n_cells in "
            + ", ".join(str(e.n_cells) for e in sweep),
        ))
    return VerifyOutcome(main, verdicts, sweep)


def make_test_functions(config: RunConfig) -> list:
    cc = config.convergence
    psis = [
        BumpTestFunction(tf.x_center, tf.x_half, tf.t_center, tf.t_half, id=f"bump{i}")
        for i, tf in enumerate(cc.test_functions)
    ]
    if cc.random_test_functions:
        rng = np.random.default_rng(config.seed)
        g, T = config.grid, config.integrator.t_end
        width = g.x_max - g.x_min
        for i in range(cc.random_test_functions):
            hx = width * rng.uniform(0.1, 0.25)
            xc = rng.uniform(g.x_min + hx + 0.05 * width, g.x_max - hx - 0.05 * width)
            ht = T * rng.uniform(0.15, 0.3)
            tc = rng.uniform(0.0, T - ht - 0.05 * T)
            psis.append(BumpTestFunction(xc, hx, tc, ht, id=f"random{i}"))
    return psis


@dataclass
class ConvergeOutcome:
    table: ConvergenceTable
    studies: dict
    passed: bool
    reasons: list


def converge(config: RunConfig) -> ConvergeOutcome:
    cc = config.convergence
    if cc.mode not in ("self", "exact_transport"):
        raise ConfigError(f"convergence.mode must be 'self' or 'exact_transport', got {cc.mode!r}")
    try:
        levels = check_ladder(cc.resolutions)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    base = build_problem(config, levels[0])
    if cc.mode == "exact_transport" and base.model.name != "constant":
        raise ConfigError("exact_transport mode needs the constant flux model")

    psis = make_test_functions(config)
    reports: dict = {p.id: {} for p in psis}

    def solve(n):
        problem = build_problem(config, n)
        accs = [WeakResidualAccumulator(problem.model, p, problem.grid, config.integrator.t_end)
                for p in psis]
        out = run(problem, diagnostics=False, observers=accs)
        for p, acc in zip(psis, accs):
            reports[p.id][n] = acc.report()
        ok = out.result.complete
        return problem.grid, out.result.final if ok else None

    try:
        if cc.mode == "self":
            table = self_convergence(solve, levels)
        else:
            speed = float(base.model.phi(0.0))
            exact = transported_exact(base.data.u0, base.data.v0, speed, config.integrator.t_end)
            table = exact_convergence(solve, exact, levels)
    except InputError as exc:
        raise ConfigError(str(exc)) from None

    studies = {pid: weak_residual_study([by_n[n] for n in levels]) for pid, by_n in reports.items()}

    reasons = []
    if not table.complete:
        reasons.append("at least one ladder run did not complete")
    if not table.exact:
        for fld in cc.rate_fields:
            rate = table.min_rate(fld)
            if not rate >= cc.min_rate:
                reasons.append(f"min {fld} rate {rate:.3f} < {cc.min_rate}")
    for pid, study in studies.items():
        if _negligible(study):
            continue
        f = study.min_factor()
        if not f >= cc.min_residual_factor:
            reasons.append(f"weak residual of {pid} shrinks by only {f:.3f} < {cc.min_residual_factor}")
    return ConvergeOutcome(table, studies, not reasons, reasons)


def _negligible(study: WeakResidualStudy, tol: float = 1e-13) -> bool:
    return all(abs(r.residual_u) < tol and abs(r.residual_v) < tol for r in study.reports)

