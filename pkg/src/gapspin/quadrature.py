"""Quadrature rules on the reference tetrahedron.

Points are barycentric coordinates (4 per point) and weights sum to one, so a
rule computes the *mean* of a function over a tetrahedron; multiply by the
element volume to integrate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, factorial

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 4) barycentric
    weights: np.ndarray  # (nq,), sums to 1
    order: int

    def __len__(self):
        return len(self.weights)


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def _grundmann_moeller(s):
    # exact for degree 2s+1 on the 3-simplex
    n = 3
    d = 2 * s + 1
    pts, wts = [], []
    for i in range(s + 1):
        w = (-1) ** i * 2.0 ** (-2 * s) * (d + n - 2 * i) ** d
        w /= factorial(i) * factorial(d + n - i)
        denom = d + n - 2 * i
        for beta in _compositions(s - i, n + 1):
            pts.append([(2 * b + 1) / denom for b in beta])
            wts.append(w)
    wts = np.array(wts) * factorial(n)  # reference volume 1/3! -> unit mean
    return np.array(pts), wts


@lru_cache(maxsize=None)
def tet_rule(order=2):
    """Return a rule exact for polynomials of total degree ``order``."""
    if order < 1:
        raise ParameterError(f"quadrature order must be >= 1, got {order}")
    if order == 1:
        pts = np.full((1, 4), 0.25)
        wts = np.ones(1)
    elif order == 2:
        a = 0.5854101966249685
        b = 0.1381966011250105
        pts = np.full((4, 4), b)
        np.fill_diagonal(pts, a)
        wts = np.full(4, 0.25)
    else:
        pts, wts = _grundmann_moeller(int(ceil((order - 1) / 2)))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, order)


def monomial_mean(exponents):
    """Exact mean of prod(lambda_i**k_i) over a tetrahedron (barycentric monomial)."""
    k = list(exponents)
    num = factorial(3)
    for e in k:
        num *= factorial(e)
    return num / factorial(sum(k) + 3)
