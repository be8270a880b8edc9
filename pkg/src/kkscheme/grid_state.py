"""Uniform grid, conserved state, polar decomposition and initial data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

R_ZERO_TOL = 1e-14
BOUNDARIES = ("outflow", "periodic")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


class InputError(ValueError):
    """Initial data or state arrays that cannot be used."""


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int
    boundary: str = "outflow"

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("need x_max > x_min")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        """x_{j-1/2} for j = 0..n, i.e. n + 1 cell edges."""
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.x_min, self.x_max, self.n_cells * factor, self.boundary)

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_cells": self.n_cells,
            "boundary": self.boundary,
        }


@dataclass(frozen=True)
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise InputError("u and v must be 1D arrays of equal length")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    @property
    def n_cells(self) -> int:
        return self.u.size

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass
class PolarState:
    r: np.ndarray
    angle: np.ndarray
    negative_cells: int = 0
    anchorless_cells: int = 0


def cell_integrals(fn, grid: Grid, breakpoints=()) -> np.ndarray:
    # Subdivide cells at the data's discontinuities so each piece is smooth.
    edges = grid.interfaces
    inner = [b for b in breakpoints if edges[0] < b < edges[-1]]
    points = np.unique(np.concatenate([edges, np.asarray(inner, dtype=float)]))
    a, b = points[:-1], points[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(fn(x), dtype=float) * np.ones_like(x)
    pieces = half * (vals @ _GL_WEIGHTS)
    owner = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, grid.n_cells - 1)
    return np.bincount(owner, weights=pieces, minlength=grid.n_cells)


def project_initial(u0: Callable, v0: Callable, grid: Grid) -> State:
    """Cell averages of (u0, v0), using 5-point Gauss-Legendre per smooth piece.

    Callables may carry a ``breakpoints`` attribute listing jump locations;
    cells containing one are split there.
    """
    u = cell_integrals(u0, grid, getattr(u0, "breakpoints", ())) / grid.dx
    v = cell_integrals(v0, grid, getattr(v0, "breakpoints", ())) / grid.dx
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise InputError("initial data produced non-finite cell averages")
    return State(0.0, u, v)


def to_polar(state: State, r_zero_tol: float = R_ZERO_TOL) -> PolarState:
    u, v = state.u, state.v
    r = np.hypot(u, v)
    negative = int(np.count_nonzero((u < -r_zero_tol) | (v < -r_zero_tol)))
    angle = np.clip(np.arctan2(np.maximum(v, 0.0), np.maximum(u, 0.0)), 0.0, math.pi / 2)

    zero = r <= r_zero_tol
    anchorless = 0
    if np.any(zero):
        # Vanishing cells inherit the angle of the nearest nonzero cell to the right.
        idx = np.where(~zero, np.arange(r.size), r.size)
        nxt = np.minimum.accumulate(idx[::-1])[::-1]
        has_anchor = nxt < r.size
        angle = angle.copy()
        angle[zero & has_anchor] = angle[nxt[zero & has_anchor]]
        orphan = zero & ~has_anchor
        angle[orphan] = math.pi / 4
        anchorless = int(np.count_nonzero(orphan))
    return PolarState(r, angle, negative, anchorless)


def from_polar(polar: PolarState, t: float = 0.0) -> State:
    r = np.asarray(polar.r, dtype=float)
    a = np.asarray(polar.angle, dtype=float)
    return State(t, r * np.cos(a), r * np.sin(a))


@dataclass
class InitialData:
    kind: str
    u0: Callable = field(repr=False)
    v0: Callable = field(repr=False)
    r_max: float
    ratio_bound: float
    params: dict = field(default_factory=dict)


def _ratio_bound(*pairs) -> float:
    ratios = [u / v for u, v in pairs]
    return max(max(ratios), 1.0 / min(ratios))


def make_initial_data(kind: str, **params) -> InitialData:
    """Positive test data with known envelope constants.

    ``r_max`` is max r(x, 0) and ``ratio_bound`` the smallest C with
    1/C <= u0/v0 <= C.
    """
    if kind == "riemann":
        uL, vL = params.get("left", (1.0, 1.0))
        uR, vR = params.get("right", (2.0, 1.0))
        x0 = float(params.get("x0", 0.0))
        if min(uL, vL, uR, vR) <= 0:
            raise InputError("riemann states must have u > 0 and v > 0")

        def u0(x):
            return np.where(np.asarray(x) < x0, uL, uR)

        def v0(x):
            return np.where(np.asarray(x) < x0, vL, vR)

        u0.breakpoints = v0.breakpoints = (x0,)
        return InitialData(
            kind, u0, v0, max(math.hypot(uL, vL), math.hypot(uR, vR)),
            _ratio_bound((uL, vL), (uR, vR)),
            {"left": [uL, vL], "right": [uR, vR], "x0": x0},
        )

    if kind == "gaussian_bump":
        floor = float(params.get("floor", 0.1))
        au = float(params.get("amplitude_u", 1.0))
        av = float(params.get("amplitude_v", 0.5))
        c = float(params.get("center", 0.0))
        w = float(params.get("width", 0.25))
        if floor <= 0 or floor + au <= 0 or floor + av <= 0 or w <= 0:
            raise InputError("gaussian_bump needs floor > 0, floor + amplitudes > 0, width > 0")

        def profile(x):
            return np.exp(-(((np.asarray(x) - c) / w) ** 2))

        def u0(x):
            return floor + au * profile(x)

        def v0(x):
            return floor + av * profile(x)

        # r and u/v are monotone along the segment between floor and peak values.
        r_max = max(math.hypot(floor + au, floor + av), math.hypot(floor, floor))
        return InitialData(
            kind, u0, v0, r_max, _ratio_bound((floor, floor), (floor + au, floor + av)),
            {"floor": floor, "amplitude_u": au, "amplitude_v": av, "center": c, "width": w},
        )

    if kind == "smooth_step":
        uL, vL = params.get("left", (1.0, 1.0))
        uR, vR = params.get("right", (2.0, 2.0))
        x0 = float(params.get("x0", 0.0))
        w = float(params.get("width", 0.1))
        if min(uL, vL, uR, vR) <= 0 or w <= 0:
            raise InputError("smooth_step states must be positive and width > 0")

        def s(x):
            return 0.5 * (1.0 + np.tanh((np.asarray(x) - x0) / w))

        def u0(x):
            return uL + (uR - uL) * s(x)

        def v0(x):
            return vL + (vR - vL) * s(x)

        return InitialData(
            kind, u0, v0, max(math.hypot(uL, vL), math.hypot(uR, vR)),
            _ratio_bound((uL, vL), (uR, vR)),
            {"left": [uL, vL], "right": [uR, vR], "x0": x0, "width": w},
        )

    raise InputError(f"unknown initial data kind {kind!r}")


SNAPSHOT_COLUMNS = ("x", "u", "v", "r", "angle")


def write_state_csv(path, state: State, grid: Grid) -> None:
    polar = to_polar(state)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for row in zip(grid.centers, state.u, state.v, polar.r, polar.angle):
            w.writerow([repr(float(x)) for x in row])


def read_state_csv(path, t: float = 0.0) -> State:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return State(t, np.atleast_1d(data["u"]), np.atleast_1d(data["v"]))


def save_snapshot(path, state: State, grid: Grid) -> None:
    np.savez(
        Path(path),
        t=state.t,
        u=state.u,
        v=state.v,
        x_min=grid.x_min,
        x_max=grid.x_max,
        n_cells=grid.n_cells,
        boundary=grid.boundary,
    )


def load_snapshot(path) -> tuple[State, Grid]:
    with np.load(Path(path)) as z:
        grid = Grid(float(z["x_min"]), float(z["x_max"]), int(z["n_cells"]), str(z["boundary"]))
        state = State(float(z["t"]), z["u"].copy(), z["v"].copy())
    if state.n_cells != grid.n_cells:
        raise InputError("snapshot arrays do not match stored grid")
    return state, grid
