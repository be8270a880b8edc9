"""Scalar flux models phi(r) and the functions derived from them.

The velocity phi(r) drives both components of the system, so everything the
solver and the diagnostics need (the radial flux f(r) = r phi(r), the L2
entropy flux g, the entropy pairs used for the compactness surrogates) is
built here from phi and its first two derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]

PANELS_PER_UNIT = 256
QUAD_TOL = 1e-10
DEGENERACY_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the range on which a flux model is defined."""


@dataclass(frozen=True)
class FluxModel:
    name: str
    phi: ScalarFn = field(repr=False)
    phi_prime: ScalarFn = field(repr=False)
    phi_double_prime: ScalarFn = field(repr=False)
    r_max_valid: float = 10.0
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.r_max_valid > 0:
            raise ValueError(f"r_max_valid must be positive, got {self.r_max_valid}")

    def with_envelope(self, r_max_valid: float) -> "FluxModel":
        return replace(self, r_max_valid=float(r_max_valid))

    def f(self, r):
        return r * self.phi(r)

    def f_prime(self, r):
        return self.phi(r) + r * self.phi_prime(r)

    def f_double_prime(self, r):
        return 2.0 * self.phi_prime(r) + r * self.phi_double_prime(r)


def _vec(fn):
    def wrapped(r):
        out = np.asarray(fn(np.asarray(r, dtype=float)), dtype=float)
        return out[()] if out.ndim == 0 else out
    return wrapped


def constant_model(c: float = 1.0, r_max_valid: float = 10.0) -> FluxModel:
    if c <= 0:
        raise ValueError("constant model needs c > 0")
    return FluxModel(
        "constant",
        _vec(lambda r: c + 0.0 * r),
        _vec(lambda r: 0.0 * r),
        _vec(lambda r: 0.0 * r),
        r_max_valid,
        {"c": c},
    )


def affine_model(a: float = 1.0, b: float = 1.0, r_max_valid: float = 10.0) -> FluxModel:
    """phi(r) = a + b r."""
    if a <= 0 or b < 0:
        raise ValueError("affine model needs a > 0, b >= 0")
    return FluxModel(
        "affine",
        _vec(lambda r: a + b * r),
        _vec(lambda r: b + 0.0 * r),
        _vec(lambda r: 0.0 * r),
        r_max_valid,
        {"a": a, "b": b},
    )


def quadratic_model(a: float = 1.0, b: float = 1.0, r_max_valid: float = 10.0) -> FluxModel:
    """phi(r) = a + b r^2."""
    if a <= 0 or b < 0:
        raise ValueError("quadratic model needs a > 0, b >= 0")
    return FluxModel(
        "quadratic",
        _vec(lambda r: a + b * r * r),
        _vec(lambda r: 2.0 * b * r),
        _vec(lambda r: 2.0 * b + 0.0 * r),
        r_max_valid,
        {"a": a, "b": b},
    )


def saturating_model(r_max_valid: float = 10.0) -> FluxModel:
    """phi(r) = 2 - 1/(1 + r): increasing, bounded, concave."""
    return FluxModel(
        "saturating",
        _vec(lambda r: 2.0 - 1.0 / (1.0 + r)),
        _vec(lambda r: 1.0 / (1.0 + r) ** 2),
        _vec(lambda r: -2.0 / (1.0 + r) ** 3),
        r_max_valid,
        {},
    )


def tabulated_model(r_samples, phi_samples, name: str = "tabulated") -> FluxModel:
    """Model from (r, phi) samples through a monotone cubic (PCHIP) interpolant.

    Derivatives come from the interpolant itself, so phi'' is piecewise linear.
    The valid envelope is the tabulated range.
    """
    from scipy.interpolate import PchipInterpolator

    r = np.asarray(r_samples, dtype=float)
    p = np.asarray(phi_samples, dtype=float)
    if r.ndim != 1 or r.shape != p.shape or r.size < 2:
        raise ValueError("need matching 1D arrays with at least two samples")
    if np.any(np.diff(r) <= 0):
        raise ValueError("r samples must be strictly increasing")
    if r[0] > 0:
        raise ValueError("table must start at r = 0")
    interp = PchipInterpolator(r, p, extrapolate=True)
    d1 = interp.derivative(1)
    d2 = interp.derivative(2)
    return FluxModel(
        name,
        _vec(interp),
        _vec(d1),
        _vec(d2),
        float(r[-1]),
        {"r": r.tolist(), "phi": p.tolist()},
    )


BUILTIN_MODELS = {
    "constant": constant_model,
    "affine": affine_model,
    "quadratic": quadratic_model,
    "saturating": saturating_model,
}


def get_model(name: str, r_max_valid: float = 10.0, **params) -> FluxModel:
    if name == "tabulated":
        model = tabulated_model(params["r"], params["phi"])
        return model
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(
            f"unknown flux model {name!r}; choose from {sorted(BUILTIN_MODELS)} or 'tabulated'"
        ) from None
    return factory(r_max_valid=r_max_valid, **params)


def _check_nonneg(r, what="r"):
    if np.any(np.asarray(r) < 0):
        raise DomainError(f"{what} must be >= 0")


def evaluate(model: FluxModel, r: float) -> tuple[float, float, float]:
    _check_nonneg(r)
    vals = (model.phi(r), model.phi_prime(r), model.phi_double_prime(r))
    return tuple(float(v) for v in vals)


def flux_f(model: FluxModel, r):
    _check_nonneg(r)
    return model.f(r)


def simpson(integrand, a, b, panels_per_unit: int = PANELS_PER_UNIT):
    """Composite Simpson rule on [a, b], vectorized over array endpoints.

    All intervals share the panel count needed by the longest one, so the
    result is exact for cubics and accurate to h^4 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    span = float(np.max(np.abs(b - a))) if a.size else 0.0
    n = max(2, math.ceil(panels_per_unit * span))
    n += n % 2
    k = np.arange(n + 1).reshape((-1,) + (1,) * a.ndim)
    nodes = a + (b - a) * (k / n)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    vals = integrand(nodes)
    out = np.tensordot(w, vals, axes=(0, 0)) * (b - a) / (3.0 * n)
    return out if out.ndim else float(out)


def _check_range(model: FluxModel, *args):
    for x in args:
        x = np.asarray(x)
        if np.any(x < 0) or np.any(x > model.r_max_valid * (1 + 1e-12)):
            raise DomainError(
                f"argument outside [0, {model.r_max_valid}] for model {model.name!r}"
            )


def entropy_flux_q2(model: FluxModel, k, s, panels_per_unit: int = PANELS_PER_UNIT):
    """q2(s) = int_k^s f'(theta)^2 dtheta."""
    _check_range(model, k, s)
    return simpson(lambda th: model.f_prime(th) ** 2, k, s, panels_per_unit)


def g_integral(model: FluxModel, r, panels_per_unit: int = PANELS_PER_UNIT):
    """g(r) = 2 int_0^r (s phi(s) + s^2 phi'(s)) ds, the L2 entropy flux."""
    _check_nonneg(r)
    _check_range(model, r)
    return simpson(
        lambda s: 2.0 * (s * model.phi(s) + s * s * model.phi_prime(s)),
        0.0,
        r,
        panels_per_unit,
    )


@dataclass(frozen=True)
class EntropyPair:
    """Entropy/entropy-flux pair in the radius r with reference level k."""

    index: int
    k: float
    model: FluxModel = field(repr=False)

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ValueError("entropy pair index must be 1 or 2")
        _check_range(self.model, self.k)

    def eta(self, s):
        if self.index == 1:
            return np.asarray(s, dtype=float) - self.k
        return self.model.f(s) - self.model.f(self.k)

    def q(self, s):
        if self.index == 1:
            return self.model.f(s) - self.model.f(self.k)
        return entropy_flux_q2(self.model, self.k, s)


def entropy_pair(model: FluxModel, index: int, k: float = 0.0) -> EntropyPair:
    return EntropyPair(index, float(k), model)


@dataclass
class AssumptionReport:
    model_name: str
    r_max_valid: float
    n_samples: int
    min_phi: float
    min_phi_prime: float
    max_abs_phi_double_prime: float
    degenerate_r: np.ndarray
    finite: bool

    @property
    def positive(self) -> bool:
        return self.min_phi > 0

    @property
    def monotone(self) -> bool:
        return self.min_phi_prime >= 0

    @property
    def admissible(self) -> bool:
        """phi > 0, phi' >= 0, all derivatives finite on the envelope."""
        return self.finite and self.positive and self.monotone

    @property
    def nondegenerate(self) -> bool:
        # Isolated sampled zeros are the discrete stand-in for a null set; two
        # neighbouring zero samples indicate an interval of degeneracy.
        if self.degenerate_r.size < 2:
            return True
        step = self.r_max_valid / (self.n_samples - 1)
        return not np.any(np.diff(self.degenerate_r) <= step * (1 + 1e-9))

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "r_max_valid": self.r_max_valid,
            "n_samples": self.n_samples,
            "min_phi": self.min_phi,
            "min_phi_prime": self.min_phi_prime,
            "max_abs_phi_double_prime": self.max_abs_phi_double_prime,
            "n_degenerate": int(self.degenerate_r.size),
            "degenerate_r_head": self.degenerate_r[:10].tolist(),
            "admissible": self.admissible,
            "nondegenerate": self.nondegenerate,
        }


def check_assumptions(
    model: FluxModel, n_samples: int = 1000, degeneracy_tol: float = DEGENERACY_TOL
) -> AssumptionReport:
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    r = np.linspace(0.0, model.r_max_valid, n_samples)
    p, dp, ddp = model.phi(r), model.phi_prime(r), model.phi_double_prime(r)
    finite = bool(np.all(np.isfinite(p)) and np.all(np.isfinite(dp)) and np.all(np.isfinite(ddp)))
    nondeg = np.abs(2.0 * dp + r * ddp)
    return AssumptionReport(
        model_name=model.name,
        r_max_valid=model.r_max_valid,
        n_samples=n_samples,
        min_phi=float(np.min(p)),
        min_phi_prime=float(np.min(dp)),
        max_abs_phi_double_prime=float(np.max(np.abs(ddp))),
        degenerate_r=r[nondeg < degeneracy_tol],
        finite=finite,
    )
