"""Semi-discrete upwind right-hand side.

Both characteristic speeds, phi(r) and f'(r) = phi + r phi', are positive,
so the flux difference is taken one-sided from the left in every cell and
only one ghost cell (on the left) is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flux_model import FluxModel
from .grid_state import Grid, State


class SolverError(RuntimeError):
    pass


@dataclass
class Tendency:
    du: np.ndarray
    dv: np.ndarray


def left_neighbour(w: np.ndarray, boundary: str) -> np.ndarray:
    """w_{j-1} for every j, filling index -1 from the boundary policy."""
    w = np.asarray(w)
    ghost = w[-1] if boundary == "periodic" else w[0]
    out = np.empty_like(w)
    out[1:] = w[:-1]
    out[0] = ghost
    return out


def backward_difference(w, j: int, dx: float, boundary: str = "outflow") -> float:
    w = np.asarray(w, dtype=float)
    if not 0 <= j < w.size:
        raise IndexError(j)
    if j > 0:
        prev = w[j - 1]
    else:
        prev = w[-1] if boundary == "periodic" else w[0]
    return (w[j] - prev) / dx


def backward_differences(w, dx: float, boundary: str = "outflow") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return (w - left_neighbour(w, boundary)) / dx


def semidiscrete_rhs(state: State, model: FluxModel, grid: Grid) -> Tendency:
    r = np.hypot(state.u, state.v)
    phi = model.phi(r)
    if not np.all(np.isfinite(phi)):
        raise SolverError("flux model returned non-finite phi(r)")
    fu = phi * state.u
    fv = phi * state.v
    return Tendency(
        -backward_differences(fu, grid.dx, grid.boundary),
        -backward_differences(fv, grid.dx, grid.boundary),
    )


def max_wave_speed(state: State, model: FluxModel) -> float:
    """max_j f'(r_j) = phi(r_j) + r_j phi'(r_j)."""
    r = np.hypot(state.u, state.v)
    return float(np.max(model.f_prime(r)))


def max_phi(state: State, model: FluxModel) -> float:
    return float(np.max(model.phi(np.hypot(state.u, state.v))))
