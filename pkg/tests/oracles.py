"""Reference computations in plain Python (lists, math, fractions), no numpy.

Kept deliberately naive so they share no code path with the package.
"""

import math
from fractions import Fraction


def upwind_rhs(u, v, phi, dx, periodic=False):
    n = len(u)
    r = [math.sqrt(a * a + b * b) if not isinstance(a, Fraction) else _exact_norm(a, b)
         for a, b in zip(u, v)]
    fu = [phi(rj) * uj for rj, uj in zip(r, u)]
    fv = [phi(rj) * vj for rj, vj in zip(r, v)]
    du, dv = [], []
    for j in range(n):
        if j == 0:
            k = n - 1 if periodic else 0
        else:
            k = j - 1
        du.append(-(fu[j] - fu[k]) / dx)
        dv.append(-(fv[j] - fv[k]) / dx)
    return du, dv


def _exact_norm(a, b):
    sq = a * a + b * b
    num, den = math.isqrt(sq.numerator), math.isqrt(sq.denominator)
    if Fraction(num, den) ** 2 != sq:
        raise ValueError("radius is not rational")
    return Fraction(num, den)


def euler(u, v, phi, dx, dt, periodic=False):
    du, dv = upwind_rhs(u, v, phi, dx, periodic)
    return [a + dt * b for a, b in zip(u, du)], [a + dt * b for a, b in zip(v, dv)]


def ssprk2(u, v, phi, dx, dt):
    u1, v1 = euler(u, v, phi, dx, dt)
    u2, v2 = euler(u1, v1, phi, dx, dt)
    return [(a + b) / 2 for a, b in zip(u, u2)], [(a + b) / 2 for a, b in zip(v, v2)]


def simpson(fn, a, b, n=2000):
    h = (b - a) / n
    s = fn(a) + fn(b)
    for i in range(1, n):
        s += (4 if i % 2 else 2) * fn(a + i * h)
    return s * h / 3
