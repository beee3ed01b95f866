"""Real solid harmonics as explicit Cartesian polynomials.

Polynomials are stored as ``{exponent tuple: coefficient}`` dicts. This keeps
values and gradients exact at any point of the ball, which the Galerkin
assembly relies on for its discrete integration-by-parts identities.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

Poly = dict


def poly_add(*polys: Poly) -> Poly:
    out: dict = defaultdict(float)
    for p in polys:
        for e, c in p.items():
            out[e] += c
    return {e: c for e, c in out.items() if c != 0.0}


def poly_scale(p: Poly, s: float) -> Poly:
    return {e: s * c for e, c in p.items()}


def poly_mul(p: Poly, q: Poly) -> Poly:
    out: dict = defaultdict(float)
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
    return {e: c for e, c in out.items() if c != 0.0}


def poly_deriv(p: Poly, axis: int) -> Poly:
    out = {}
    for e, c in p.items():
        if e[axis] > 0:
            e2 = list(e)
            e2[axis] -= 1
            out[tuple(e2)] = c * e[axis]
    return out


def poly_laplacian(p: Poly, dim: int) -> Poly:
    return poly_add(*(poly_deriv(poly_deriv(p, i), i) for i in range(dim)))


def poly_eval(p: Poly, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[:-1])
    for e, c in p.items():
        term = np.full(X.shape[:-1], c)
        for i, power in enumerate(e):
            if power:
                term = term * X[..., i] ** power
        out += term
    return out


def _xy_power(m: int, dim: int) -> tuple[Poly, Poly]:
    """Real and imaginary parts of (x + i y)^m."""
    re, im = {}, {}
    for p in range(m + 1):
        c = math.comb(m, p)
        q = m - p  # power of y, which carries i^q
        e = (p, q) + (0,) * (dim - 2)
        if q % 4 == 0:
            re[e] = c
        elif q % 4 == 1:
            im[e] = c
        elif q % 4 == 2:
            re[e] = -c
        else:
            im[e] = -c
    return re, im


def solid_harmonics(l: int, dim: int) -> list[Poly]:
    """Basis of harmonic homogeneous polynomials of degree ``l`` (unnormalized).

    dim=2: [Re (x+iy)^l, Im (x+iy)^l] (just [1] for l=0).
    dim=3: the 2l+1 real solid harmonics ordered m = 0, 1c, 1s, ..., lc, ls.
    """
    if dim == 2:
        if l == 0:
            return [{(0, 0): 1.0}]
        re, im = _xy_power(l, 2)
        return [re, im]
    if dim != 3:
        raise ValueError("dim must be 2 or 3")
    r2 = {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}
    out = []
    for m in range(l + 1):
        pi_lm: Poly = {}
        for j in range((l - m) // 2 + 1):
            coef = ((-1) ** j * 2.0**-l * math.comb(l, j) * math.comb(2 * l - 2 * j, l)
                    * math.factorial(l - 2 * j) / math.factorial(l - 2 * j - m))
            term = {(0, 0, l - 2 * j - m): coef}
            for _ in range(j):
                term = poly_mul(term, r2)
            pi_lm = poly_add(pi_lm, term)
        a_m, b_m = _xy_power(m, 3)
        if m == 0:
            out.append(poly_mul(pi_lm, {(0, 0, 0): 1.0}))
        else:
            out.append(poly_mul(pi_lm, a_m))
            out.append(poly_mul(pi_lm, b_m))
    return out
