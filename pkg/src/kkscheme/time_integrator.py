"""Explicit SSP Runge-Kutta time stepping for the semi-discrete system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux_model import FluxModel, check_assumptions
from .grid_state import Grid, State
from .scheme import Tendency, max_phi, max_wave_speed, semidiscrete_rhs

log = logging.getLogger(__name__)

METHODS = ("euler", "ssprk2", "ssprk3")

# Weights of each stage's tendency in the net update U^{n+1} - U^n = dt sum_k b_k L(U^(k)).
STAGE_WEIGHTS = {
    "euler": (1.0,),
    "ssprk2": (0.5, 0.5),
    "ssprk3": (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0),
}


class AssumptionError(ValueError):
    """The flux model violates phi > 0 or phi' >= 0 on the run envelope."""


class IntegrationError(RuntimeError):
    pass


@dataclass
class IntegratorConfig:
    method: str = "ssprk3"
    cfl: float = 0.5
    t_end: float = 0.5
    max_steps: int = 1_000_000
    snapshot_every: float = 0.0
    # Lets cfl exceed 1; only used for deliberate negative tests.
    allow_unsafe_cfl: bool = False

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not self.cfl > 0:
            raise ValueError("cfl must be positive")
        if self.cfl > 1 and not self.allow_unsafe_cfl:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")


def _euler(state: State, dt: float, rhs) -> State:
    k = rhs(state)
    return State(state.t + dt, state.u + dt * k.du, state.v + dt * k.dv)


def _blend(a: float, s: State, b: float, w: State) -> State:
    return State(w.t, a * s.u + b * w.u, a * s.v + b * w.v)


def step(
    state: State,
    dt: float,
    rhs: Callable[[State], Tendency],
    method: str = "ssprk3",
    stages: list | None = None,
) -> State:
    """Advance by dt. SSP methods are written as convex blends of Euler steps.

    If ``stages`` is a list, the states at which the tendency was evaluated
    are appended to it (in the order matching ``STAGE_WEIGHTS[method]``).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    record = stages.append if stages is not None else (lambda s: None)
    t0 = state.t
    record(state)
    s1 = _euler(state, dt, rhs)
    if method == "euler":
        out = s1
    elif method == "ssprk2":
        record(s1)
        out = _blend(0.5, state, 0.5, _euler(s1, dt, rhs))
    elif method == "ssprk3":
        record(s1)
        s2 = _blend(0.75, state, 0.25, _euler(s1, dt, rhs))
        record(s2)
        out = _blend(1.0 / 3.0, state, 2.0 / 3.0, _euler(s2, dt, rhs))
    else:
        raise ValueError(f"unknown method {method!r}")
    out = State(t0 + dt, out.u, out.v)
    if not out.is_finite():
        raise IntegrationError(f"non-finite state after step at t={t0:.6g}, dt={dt:.3g}")
    return out


def stable_dt(state: State, model: FluxModel, grid: Grid, cfl: float) -> float:
    """min(cfl dx / max f'(r), dx / max phi(r)).

    The first keeps the radial update monotone, the second keeps each
    component's Euler update a nonnegative combination of neighbours.
    """
    return min(cfl * grid.dx / max_wave_speed(state, model), grid.dx / max_phi(state, model))


@dataclass
class StepEvent:
    step: int
    t: float
    dt: float
    state: State
    previous: State | None
    stages: list = field(default_factory=list)
    snapshot: bool = False


@dataclass
class RunResult:
    final: State
    snapshots: list
    dt_history: np.ndarray
    steps: int
    complete: bool = True
    aborted: bool = False
    message: str = ""

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def integrate(
    state0: State,
    model: FluxModel,
    grid: Grid,
    config: IntegratorConfig,
    observers: Sequence[Callable[[StepEvent], None]] = (),
) -> RunResult:
    """March from state0.t to config.t_end.

    Observers are called synchronously after every step (and once for the
    initial state); ``event.snapshot`` marks the steps that were stored.
    """
    config.validate()
    report = check_assumptions(model)
    if not report.admissible:
        raise AssumptionError(
            f"model {model.name!r} violates phi > 0 / phi' >= 0 on [0, {model.r_max_valid}]"
        )
    rhs = lambda s: semidiscrete_rhs(s, model, grid)  # noqa: E731

    t_end = state0.t + config.t_end
    state = state0
    snapshots = [state0]
    dts: list[float] = []
    next_snap = state0.t + config.snapshot_every
    for obs in observers:
        obs(StepEvent(0, state.t, 0.0, state, None, [], True))

    n = 0
    complete, aborted, message = True, False, ""
    while state.t < t_end:
        if n >= config.max_steps:
            complete = False
            message = f"max_steps={config.max_steps} reached at t={state.t:.6g}"
            log.warning(message)
            break
        dt = stable_dt(state, model, grid, config.cfl)
        remaining = t_end - state.t
        last = dt >= remaining * (1.0 - 1e-12)
        if last:
            dt = remaining
        stages: list = []
        try:
            new = step(state, dt, rhs, config.method, stages)
        except IntegrationError as exc:
            complete, aborted, message = False, True, str(exc)
            log.error(message)
            break
        if last:
            new = State(t_end, new.u, new.v)
        n += 1
        dts.append(dt)
        snap = last or config.snapshot_every == 0 or new.t >= next_snap
        if snap:
            snapshots.append(new)
            if config.snapshot_every > 0:
                while next_snap <= new.t:
                    next_snap += config.snapshot_every
        log.debug("step %d t=%.6g dt=%.3g max_r=%.6g", n, new.t, dt, float(np.max(new.r)))
        for obs in observers:
            obs(StepEvent(n, new.t, dt, new, state, stages, snap))
        state = new

    if snapshots[-1] is not state:
        snapshots.append(state)
    return RunResult(state, snapshots, np.asarray(dts), n, complete, aborted, message)

