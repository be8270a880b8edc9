"""Grid-refinement studies and weak-form residuals.

No exact solution of the nonlinear system is assumed. Convergence is measured
as self-convergence (each level against the next finer one, restricted), or
as direct error for linear transport, where the exact solution is the shifted
initial profile.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux_model import FluxModel
from .grid_state import Grid, InputError, State, cell_integrals, project_initial
from .time_integrator import StepEvent

THREADS_ENV = "KKSCHEME_THREADS"


def restrict(fine: State, coarse_grid: Grid) -> State:
    """Average pairs of children onto the parent cells (exactly conservative)."""
    if fine.n_cells != 2 * coarse_grid.n_cells:
        raise InputError(
            f"fine state has {fine.n_cells} cells, expected {2 * coarse_grid.n_cells}"
        )
    return State(
        fine.t,
        0.5 * (fine.u[0::2] + fine.u[1::2]),
        0.5 * (fine.v[0::2] + fine.v[1::2]),
    )


def l1_distance(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return float(dx * np.sum(np.abs(np.asarray(a) - np.asarray(b))))


def _rates(errors) -> list:
    rates = [math.nan]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0 and math.isfinite(prev) and math.isfinite(cur):
            rates.append(math.log2(prev / cur))
        else:
            rates.append(math.nan)
    return rates


@dataclass
class ConvergenceTable:
    kind: str
    resolutions: list
    l1_errors_r: list
    l1_errors_u: list
    l1_errors_v: list
    rates_r: list = field(default_factory=list)
    rates_u: list = field(default_factory=list)
    rates_v: list = field(default_factory=list)
    complete: bool = True
    note: str = ""

    def __post_init__(self):
        if not self.rates_r:
            self.rates_r = _rates(self.l1_errors_r)
            self.rates_u = _rates(self.l1_errors_u)
            self.rates_v = _rates(self.l1_errors_v)

    @property
    def exact(self) -> bool:
        """All measured errors vanish (rates undefined)."""
        errs = [e for e in self.l1_errors_r + self.l1_errors_u + self.l1_errors_v if math.isfinite(e)]
        return bool(errs) and max(errs) < 1e-14

    def min_rate(self, which: str = "r") -> float:
        finite = [x for x in getattr(self, f"rates_{which}") if math.isfinite(x)]
        return min(finite) if finite else math.nan

    def rows(self) -> list[dict]:
        return [
            {
                "n_cells": n,
                "l1_error_r": er, "l1_error_u": eu, "l1_error_v": ev,
                "rate_r": rr, "rate_u": ru, "rate_v": rv,
            }
            for n, er, eu, ev, rr, ru, rv in zip(
                self.resolutions, self.l1_errors_r, self.l1_errors_u, self.l1_errors_v,
                self.rates_r, self.rates_u, self.rates_v,
            )
        ]

    def write_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def to_dict(self) -> dict:
        return {**_jsonable(asdict(self)), "exact": self.exact}


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def check_ladder(resolutions: Sequence[int]) -> list[int]:
    res = [int(n) for n in resolutions]
    if len(res) < 3:
        raise ValueError("a convergence ladder needs at least 3 levels")
    if any(b != 2 * a for a, b in zip(res[:-1], res[1:])):
        raise ValueError(f"resolutions must double at each level, got {res}")
    return res


def _map_levels(fn, levels):
    threads = max(1, int(os.environ.get(THREADS_ENV, "1")))
    if threads == 1:
        return [fn(n) for n in levels]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, levels))


Solver = Callable[[int], "tuple[Grid, State | None]"]


def self_convergence(solve: Solver, resolutions: Sequence[int]) -> ConvergenceTable:
    """Cauchy-type study: error at level k is |restrict(level k+1) - level k|_1.

    ``solve(n)`` returns the grid and final state for n cells, or a None state
    if the run aborted. The finest level has no error entry of its own.
    """
    levels = check_ladder(resolutions)
    results = _map_levels(solve, levels)
    complete = all(s is not None for _, s in results)
    er, eu, ev = [], [], []
    for (grid, coarse), (_, fine) in zip(results[:-1], results[1:]):
        if coarse is None or fine is None:
            er.append(math.nan), eu.append(math.nan), ev.append(math.nan)
            continue
        f = restrict(fine, grid)
        er.append(l1_distance(f.r, coarse.r, grid.dx))
        eu.append(l1_distance(f.u, coarse.u, grid.dx))
        ev.append(l1_distance(f.v, coarse.v, grid.dx))
    er.append(math.nan), eu.append(math.nan), ev.append(math.nan)
    return ConvergenceTable("self", levels, er, eu, ev, complete=complete,
                            note="rate thresholds are harness calibration values")


def exact_convergence(solve: Solver, exact: Callable[[Grid], State],
                      resolutions: Sequence[int]) -> ConvergenceTable:
    """Direct L1 error against exact cell averages at every level."""
    levels = check_ladder(resolutions)
    results = _map_levels(solve, levels)
    complete = all(s is not None for _, s in results)
    er, eu, ev = [], [], []
    for grid, state in results:
        if state is None:
            er.append(math.nan), eu.append(math.nan), ev.append(math.nan)
            continue
        ref = exact(grid)
        er.append(l1_distance(state.r, ref.r, grid.dx))
        eu.append(l1_distance(state.u, ref.u, grid.dx))
        ev.append(l1_distance(state.v, ref.v, grid.dx))
    return ConvergenceTable("exact", levels, er, eu, ev, complete=complete,
                            note="direct error against the exact transported profile")


def transported_exact(u0, v0, speed: float, t: float) -> Callable[[Grid], State]:
    """Exact cell averages of (u0, v0)(x - speed t) for linear transport."""
    shift = speed * t

    def shifted(fn):
        g = lambda x: fn(np.asarray(x) - shift)  # noqa: E731
        g.breakpoints = tuple(b + shift for b in getattr(fn, "breakpoints", ()))
        return g

    def exact(grid: Grid) -> State:
        s = project_initial(shifted(u0), shifted(v0), grid)
        return State(t, s.u, s.v)

    return exact


def _bump(xi):
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    inside = np.abs(xi) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - xi[inside] ** 2))
    return out


def _bump_prime(xi):
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    inside = np.abs(xi) < 1.0
    s = 1.0 - xi[inside] ** 2
    out[inside] = np.exp(-1.0 / s) * (-2.0 * xi[inside] / s**2)
    return out


class TestFunction:
    """Space-time test function seen through its cell integrals.

    Subclasses provide, at time t, the per-cell integrals of psi_t and psi_x
    and the per-cell integral of psi, plus the support box.
    """

    __test__ = False  # not a pytest class

    id: str = "psi"

    def cell_terms(self, grid: Grid, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def support(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def __mul__(self, a: float) -> "CombinedTestFunction":
        return CombinedTestFunction([(float(a), self)])

    __rmul__ = __mul__

    def __add__(self, other: "TestFunction") -> "CombinedTestFunction":
        return CombinedTestFunction([(1.0, self), (1.0, other)])


@dataclass
class BumpTestFunction(TestFunction):
    """psi(x, t) = b((x - xc)/hx) b((t - tc)/ht) with b(s) = exp(-1/(1 - s^2))."""

    x_center: float
    x_half: float
    t_center: float
    t_half: float
    id: str = "bump"

    def X(self, x):
        return _bump((np.asarray(x) - self.x_center) / self.x_half)

    def T(self, t):
        return float(_bump((t - self.t_center) / self.t_half))

    def T_prime(self, t):
        return float(_bump_prime((t - self.t_center) / self.t_half)) / self.t_half

    def __call__(self, x, t):
        return self.X(x) * self.T(t)

    def cell_terms(self, grid, t):
        edges = grid.interfaces
        lo, hi = self.x_center - self.x_half, self.x_center + self.x_half
        x_int = cell_integrals(self.X, grid, breakpoints=(lo, hi))
        # Cell integral of psi_x is exact: the difference of X at the edges.
        x_edges = self.X(edges)
        T, Tp = self.T(t), self.T_prime(t)
        return x_int * Tp, (x_edges[1:] - x_edges[:-1]) * T, x_int * T

    def support(self):
        return (self.x_center - self.x_half, self.x_center + self.x_half,
                self.t_center - self.t_half, self.t_center + self.t_half)


@dataclass
class CombinedTestFunction(TestFunction):
    terms: list
    id: str = "combination"

    def cell_terms(self, grid, t):
        parts = [(a, f.cell_terms(grid, t)) for a, f in self.terms]
        return tuple(sum(a * p[i] for a, p in parts) for i in range(3))

    def support(self):
        boxes = [f.support() for _, f in self.terms]
        return (min(b[0] for b in boxes), max(b[1] for b in boxes),
                min(b[2] for b in boxes), max(b[3] for b in boxes))

    def __add__(self, other):
        extra = other.terms if isinstance(other, CombinedTestFunction) else [(1.0, other)]
        return CombinedTestFunction(self.terms + extra)

    def __mul__(self, a):
        return CombinedTestFunction([(a * c, f) for c, f in self.terms])

    __rmul__ = __mul__


@dataclass
class WeakResidualReport:
    test_function_id: str
    residual_u: float
    residual_v: float
    n_cells: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_support(psi: TestFunction, grid: Grid, t_final: float, margin_cells: int = 2):
    x_lo, x_hi, _, t_hi = psi.support()
    pad = margin_cells * grid.dx
    if x_lo < grid.x_min + pad or x_hi > grid.x_max - pad:
        raise InputError(f"test function support [{x_lo}, {x_hi}] touches the domain boundary")
    if t_hi >= t_final:
        raise InputError(f"test function support must end before t = {t_final}")


class WeakResidualAccumulator:
    """Observer that builds the weak-form residual on the fly (trapezoid in time).

    Accumulates int int (u psi_t + u phi(r) psi_x) dx dt + int u(x, 0) psi(x, 0) dx,
    and the same for v, without storing the trajectory.
    """

    def __init__(self, model: FluxModel, psi: TestFunction, grid: Grid, t_final: float):
        _check_support(psi, grid, t_final)
        self.model, self.psi, self.grid = model, psi, grid
        self.res_u = 0.0
        self.res_v = 0.0
        self._prev = None

    def _integrand(self, s: State):
        w_t, w_x, w_0 = self.psi.cell_terms(self.grid, s.t)
        phi = self.model.phi(s.r)
        iu = float(np.dot(s.u, w_t) + np.dot(s.u * phi, w_x))
        iv = float(np.dot(s.v, w_t) + np.dot(s.v * phi, w_x))
        return s.t, iu, iv, (float(np.dot(s.u, w_0)), float(np.dot(s.v, w_0)))

    def add(self, s: State) -> None:
        t, iu, iv, init = self._integrand(s)
        if self._prev is None:
            self.res_u += init[0]
            self.res_v += init[1]
        else:
            t0, iu0, iv0, _ = self._prev
            self.res_u += 0.5 * (t - t0) * (iu + iu0)
            self.res_v += 0.5 * (t - t0) * (iv + iv0)
        self._prev = (t, iu, iv, init)

    def __call__(self, event: StepEvent) -> None:
        self.add(event.state)

    def report(self) -> WeakResidualReport:
        return WeakResidualReport(self.psi.id, self.res_u, self.res_v, self.grid.n_cells)


def weak_residual(snapshots: Sequence[State], model: FluxModel, psi: TestFunction,
                  grid: Grid) -> WeakResidualReport:
    """Weak-form residual of a stored trajectory; snapshots[0] is the initial state."""
    if not snapshots:
        raise InputError("need at least one snapshot")
    acc = WeakResidualAccumulator(model, psi, grid, snapshots[-1].t)
    for s in snapshots:
        acc.add(s)
    return acc.report()


@dataclass
class WeakResidualStudy:
    reports: list
    factors_u: list
    factors_v: list

    def min_factor(self) -> float:
        vals = [f for f in self.factors_u + self.factors_v if math.isfinite(f)]
        return min(vals) if vals else math.nan

    def to_dict(self) -> dict:
        return _jsonable({
            "reports": [r.to_dict() for r in self.reports],
            "factors_u": self.factors_u,
            "factors_v": self.factors_v,
        })

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["test_function_id", "n_cells", "residual_u", "residual_v",
                        "factor_u", "factor_v"])
            fu = [math.nan] + self.factors_u
            fv = [math.nan] + self.factors_v
            for rep, a, b in zip(self.reports, fu, fv):
                w.writerow([rep.test_function_id, rep.n_cells, repr(rep.residual_u),
                            repr(rep.residual_v), repr(a), repr(b)])


def weak_residual_study(reports: Sequence[WeakResidualReport]) -> WeakResidualStudy:
    """Shrink factors |res_k| / |res_{k+1}| between consecutive refinement levels."""
    def factors(vals):
        return [abs(a) / abs(b) if b != 0 else math.inf for a, b in zip(vals[:-1], vals[1:])]

    return WeakResidualStudy(
        list(reports),
        factors([r.residual_u for r in reports]),
        factors([r.residual_v for r in reports]),
    )


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
