"""Approximation of a martingale by one adapted to an atomic sub-filtration.

The sub-filtration is generated by quantised copies of the martingale:
G_n = σ(u(f_0), ..., u(f_n)), with u rounding each coordinate to a grid of
mesh ε/2 anchored at 0 (ties go to the smaller grid point).  Distances are
measured in the sup norm over coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .filtration import Filtration1P, Martingale1P
from .measure import SimpleFunction, cond_expect, join


def quantize(x: Fraction, mesh: Fraction) -> Fraction:
    """Nearest multiple of ``mesh``; an exact tie rounds down."""
    k = math.ceil(x / mesh - Fraction(1, 2))
    return k * mesh


def _quantize_value(v, mesh):
    if isinstance(v, tuple):
        return tuple(quantize(x, mesh) for x in v)
    return quantize(v, mesh)


def _sup_dist(a, b) -> Fraction:
    if isinstance(a, tuple):
        return max(abs(x - y) for x, y in zip(a, b))
    return abs(a - b)


@dataclass(frozen=True, eq=False)
class Approximation:
    G: Filtration1P
    approx: Martingale1P
    max_error: Fraction
    mesh: Fraction
    errors: tuple  # sup error per index n = 0..N


def atomic_approximation(m: Martingale1P, eps) -> Approximation:
    """Build G_n and the martingale E[f_N | G_n] with sup-norm error below ``eps``.

    Index 0 uses f_0 = E[f_N | F_0].  ``max_error`` is the exact maximum of
    |f_n − E[f_N | G_n]| over n = 0..N and all points.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    mesh = eps / 2
    filt = m.filtration
    fN = m.terms[-1]
    terms = [cond_expect(fN, filt.levels[0])] + list(m.terms)
    levels = []
    gen = None
    for f in terms:
        q = f.map(lambda v: _quantize_value(v, mesh)).level_sets()
        gen = q if gen is None else join(gen, q)
        levels.append(gen)
    G = Filtration1P(filt.space, tuple(levels))
    approx_terms = [cond_expect(fN, g) for g in levels]
    errors = tuple(
        max(_sup_dist(a, b) for a, b in zip(f.pointwise, g.pointwise))
        for f, g in zip(terms, approx_terms)
    )
    return Approximation(G, Martingale1P(G, tuple(approx_terms[1:])), max(errors), mesh, errors)


def generated_filtration(m: Martingale1P) -> Filtration1P:
    """σ(f_0, ..., f_n) for n = 0..N, with f_0 = E[f_N | F_0]."""
    filt = m.filtration
    terms = [cond_expect(m.terms[-1], filt.levels[0])] + list(m.terms)
    levels, gen = [], None
    for f in terms:
        gen = f.level_sets() if gen is None else join(gen, f.level_sets())
        levels.append(gen)
    return Filtration1P(filt.space, tuple(levels))
