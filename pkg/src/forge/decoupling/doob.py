"""Doob-type constants for finite families of sigma-fields and the weighted
lower bound that uses them.

A constant δ > 0 works for a family (F_α : α ∈ A) when

    δ ‖ sup_α |E[f | F_α]| ‖₂ ≤ ‖f‖₂   for every f.

Since sup_α |E[f|F_α]|² ≤ Σ_α E[f|F_α]² and each conditional expectation
is an L² contraction, δ = |A|^{-1/2} always works.  It is irrational in
general, so it is carried as the rational δ² = 1/|A| and checks are made
exactly at the squared level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh

from ..measure import Partition, SampleSpace, SimpleFunction, cond_expect


def projection_matrix(space: SampleSpace, part: Partition) -> np.ndarray:
    """Float matrix P with (P f)(ω) = E[f | part](ω), points in space order."""
    n = len(space)
    idx = space.index
    w = np.array([float(x) for x in space.weights])
    P = np.zeros((n, n))
    for block in part.blocks:
        ks = [idx[p] for p in block]
        mass = w[ks].sum()
        for a in ks:
            P[a, ks] = w[ks] / mass
    return P


@dataclass(frozen=True)
class DoobResult:
    """``delta_sq_certified`` = 1/|A| exactly; ``delta_empirical`` is the
    reciprocal of the largest ‖sup_α|E[f|F_α]|‖₂ / ‖f‖₂ the ascent found."""

    delta_sq_certified: Fraction
    delta_certified: float
    delta_empirical: float
    best_ratio: float
    best_f: tuple


def maximal_sq(f: SimpleFunction, fields) -> SimpleFunction:
    """sup_α E[f | F_α]², exact."""
    out = None
    for part in fields:
        c = cond_expect(f, part).square()
        out = c if out is None else _pmax(out, c)
    return out


def _pmax(a: SimpleFunction, b: SimpleFunction) -> SimpleFunction:
    return SimpleFunction.from_points(
        a.space, {p: max(x, y) for p, x, y in zip(a.space.points, a.pointwise, b.pointwise)}
    )


def doob_inequality_holds(f: SimpleFunction, fields, delta_sq: Fraction) -> bool:
    """δ² E[sup_α E[f|F_α]²] ≤ E[f²], compared exactly."""
    return delta_sq * maximal_sq(f, fields).integral() <= f.square().integral()


def doob_delta(fields, space: SampleSpace, starts: int = 8, iters: int = 200, seed: int = 0) -> DoobResult:
    """Certified and empirical Doob-type constants for a family of partitions.

    The empirical value maximises E[max_α (P_α f)²] / E[f²] by alternating
    two steps from several random starts: pick the maximising α at each
    point, then solve the generalised eigenproblem of the resulting quadratic
    form against diag(P).
    """
    fields = list(fields)
    if not fields:
        raise ValueError("empty family of sigma-fields")
    Ps = np.stack([projection_matrix(space, part) for part in fields])
    w = np.array([float(x) for x in space.weights])
    D = np.diag(w)
    rng = np.random.default_rng(seed)
    n = len(space)
    best, best_f = 0.0, np.zeros(n)

    def value(f):
        proj = Ps @ f
        return float(w @ (proj**2).max(axis=0)) / float(w @ f**2)

    for _ in range(starts):
        f = rng.standard_normal(n)
        prev = -1.0
        for _ in range(iters):
            choice = (Ps @ f) ** 2
            alpha = choice.argmax(axis=0)
            R = Ps[alpha, np.arange(n), :]
            Q = R.T @ (w[:, None] * R)
            vals, vecs = eigh(Q, D)
            f = vecs[:, -1]
            cur = value(f)
            if cur <= prev + 1e-13:
                break
            prev = cur
        if prev > best:
            best, best_f = prev, f
    k = len(fields)
    return DoobResult(
        Fraction(1, k),
        1 / math.sqrt(k),
        1 / math.sqrt(best) if best > 0 else math.inf,
        math.sqrt(best),
        tuple(best_f.tolist()),
    )


@dataclass(frozen=True, eq=False)
class WeightedSystem:
    """Weights w_{α,β} ∈ [0, 1] and F_α-measurable f_{α,β} on one space.

    ``delta_sq`` is δ² for a Doob-type constant of ``fields`` (``None`` until
    supplied).
    """

    space: SampleSpace
    A: tuple
    B: tuple
    fields: dict
    w: dict
    f: dict
    kappa: Fraction
    delta_sq: Fraction | None = None

    def __post_init__(self):
        for key, wf in self.w.items():
            if any(v < 0 or v > 1 for v in wf.values):
                raise ValueError(f"weight {key} leaves [0, 1]")
        for (a, b), fn in self.f.items():
            if not fn.is_measurable(self.fields[a]):
                raise ValueError(f"f[{a},{b}] is not measurable w.r.t. its field")


@dataclass(frozen=True)
class Lemma2Result:
    lhs: float
    rhs: float
    holds: bool
    sets: dict  # (α, β) -> frozenset A^κ_{α,β}


def lemma2_check(ws: WeightedSystem, delta_sq: Fraction | None = None) -> Lemma2Result:
    """E(Σ|w f|²)^{1/2} ≥ κ² δ E(Σ 1_{A^κ} |f|²)^{1/2}, A^κ = {E[w|F_α] ≥ κ}.

    Sums are exact; the two square-root expectations are floats and the
    verdict allows a slack of 1e-9.
    """
    delta_sq = ws.delta_sq if delta_sq is None else Fraction(delta_sq)
    if delta_sq is None:
        raise ValueError("δ not supplied")
    if delta_sq <= 0:
        raise ValueError("δ must be positive")
    space = ws.space
    zero = SimpleFunction.constant(space, 0)
    left, right, sets = zero, zero, {}
    for a in ws.A:
        for b in ws.B:
            w, f = ws.w[a, b], ws.f[a, b]
            left = left + (w * f).square()
            ew = cond_expect(w, ws.fields[a])
            A = frozenset(p for p, v in zip(space.points, ew.pointwise) if v >= ws.kappa)
            sets[a, b] = A
            right = right + SimpleFunction.indicator(space, A) * f.square()
    lhs = _expected_sqrt(left)
    rhs = float(ws.kappa) ** 2 * math.sqrt(delta_sq) * _expected_sqrt(right)
    return Lemma2Result(lhs, rhs, lhs >= rhs - 1e-9, sets)


def _expected_sqrt(f: SimpleFunction) -> float:
    return math.fsum(float(f.space.prob(b)) * math.sqrt(v) for b, v in zip(f.partition.blocks, f.values))
