"""Decoupled tangent sequences on canonical product spaces.

The engine works on any finite product space whose coordinates are grouped
into disjoint blocks 1..K (plus an optional prefix block that is never
replaced).  A term attached to block k is rebuilt on the doubled space as

    g(x, y) = f(x with the coordinates of block k taken from y),

which is the one-step construction g_k = f_k(ω_1, ..., ω_{k-1}, ω̃_k).  The
doubled space carries H_k = σ(x and y coordinates of blocks ≤ k), and each
stage is checked against E[f_k ⊗ 1 | H_{k-1}] = E[g_k | H_{k-1}] and against
conditional independence of the blocks given x.

Two-parameter sequences are decoupled in two stages, rows then columns, so
that the final term reads h_ij(x_{[1,i-1]×[1,j-1]}, y_{i×[1,j-1]},
z_{[1,i-1]×j}, t_ij) on the four-fold product.  Mode ``"cells"`` instead
replaces each single coordinate (i, j), in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from ..embedding import CanonicalModel1P, CanonicalModel2P
from ..errors import NotAdaptedError
from ..filtration import Martingale1P, Martingale2P
from ..measure import SimpleFunction, cond_expect
from ..product import DEFAULT_CAP, ProductSpace, check_cap


@dataclass(frozen=True, eq=False)
class TangentStage:
    """One decoupling step from ``base`` to ``doubled`` = base ⊗ fresh copy.

    ``keys`` names the terms; ``block_of[key]`` is the block a term is
    decoupled along, and ``blocks[k]`` lists the labels of block k
    (``blocks[0]`` is the prefix).  ``fresh`` maps each base label to its
    label in the copy.
    """

    base: ProductSpace
    doubled: ProductSpace
    blocks: tuple
    fresh: dict
    keys: tuple
    block_of: dict
    original: dict
    tangent: dict

    def level(self, k: int):
        """H_k on the doubled space: x and y coordinates of blocks 0..k."""
        labels = [lab for b in self.blocks[: k + 1] for lab in b]
        return self.doubled.coord_partition(labels + [self.fresh[lab] for lab in labels])

    def lift(self, f: SimpleFunction) -> SimpleFunction:
        """f ⊗ 1: a function of the x coordinates on the doubled space."""
        n = len(self.base.labels)
        return SimpleFunction.from_points(self.doubled.space, {p: f(p[:n]) for p in self.doubled.space.points})


def decouple(
    base: ProductSpace,
    terms: dict,
    block_of: dict,
    blocks,
    fresh,
    cap: int | None = DEFAULT_CAP,
) -> TangentStage:
    """Replace, in every term, the coordinates of its block by fresh ones."""
    blocks = tuple(tuple(b) for b in blocks)
    fresh = {lab: fresh(lab) for lab in base.labels}
    check_cap(base.size**2, cap)
    doubled = ProductSpace(base.labels + tuple(fresh[lab] for lab in base.labels), base.factors * 2)
    n = len(base.labels)
    pos = base.position
    keys = tuple(terms)
    tangent = {}
    for key in keys:
        f = terms[key]
        swap = [pos[lab] for lab in blocks[block_of[key]]]
        vals = {}
        for p in doubled.space.points:
            x = list(p[:n])
            for k in swap:
                x[k] = p[n + k]
            vals[p] = f(tuple(x))
        tangent[key] = SimpleFunction.from_points(doubled.space, vals)
    return TangentStage(base, doubled, blocks, fresh, keys, dict(block_of), dict(terms), tangent)


@dataclass(frozen=True, eq=False)
class TangentPair:
    """An adapted sequence on a product model and its decoupled tangent copy.

    ``original`` and ``tangent`` are dicts keyed by the sequence index (n,
    or (i, j)); ``tangent`` lives on ``doubled_space``.
    """

    model: object
    mode: str
    stages: tuple
    original: dict

    @property
    def tangent(self) -> dict:
        return self.stages[-1].tangent

    @property
    def doubled(self) -> ProductSpace:
        return self.stages[-1].doubled

    @property
    def doubled_space(self):
        return self.doubled.space

    def with_term(self, key, g: SimpleFunction) -> "TangentPair":
        """Copy with one tangent term replaced (for building failing instances)."""
        last = self.stages[-1]
        stage = replace(last, tangent={**last.tangent, key: g})
        return replace(self, stages=self.stages[:-1] + (stage,))


def _as_dict(model, fs) -> dict:
    if isinstance(fs, (Martingale1P, Martingale2P)):
        return dict(fs.indexed_terms())
    if isinstance(fs, dict):
        return dict(fs)
    fs = list(fs)
    if isinstance(model, CanonicalModel1P):
        return {n: f for n, f in enumerate(fs, start=1)}
    if fs and isinstance(fs[0], (list, tuple)):
        return {(i, j): f for i, row in enumerate(fs, start=1) for j, f in enumerate(row, start=1)}
    raise TypeError("two-parameter sequences are given as a dict or a nested list")


def tangent_copy(model, fs, mode: str = "two-stage", cap: int | None = DEFAULT_CAP) -> TangentPair:
    """Decoupled tangent copy of an adapted sequence on a canonical model."""
    terms = _as_dict(model, fs)
    can = model.canonical
    for key, f in terms.items():
        if f.space != model.space:
            raise NotAdaptedError(f"term {key} is not on the model space")
        level = can.levels[key] if isinstance(model, CanonicalModel1P) else can.grid[key[0]][key[1]]
        if not f.is_measurable(level):
            raise NotAdaptedError(f"term {key} is not adapted")
    prod_space = model.product
    if isinstance(model, CanonicalModel1P):
        blocks = [(0,)] + [(n,) for n in range(1, model.source.N + 1)]
        stage = decouple(prod_space, terms, {k: k for k in terms}, blocks, lambda lab: ("~", lab), cap)
        return TangentPair(model, "one-param", (stage,), terms)
    N, M = model.source.N, model.source.M
    labels = prod_space.labels
    if mode == "cells":
        blocks = [()] + [(lab,) for lab in labels]
        order = {lab: k for k, lab in enumerate(labels, start=1)}
        stage = decouple(prod_space, terms, {k: order[k] for k in terms}, blocks, lambda lab: ("t", lab), cap)
        return TangentPair(model, mode, (stage,), terms)
    if mode != "two-stage":
        raise ValueError(f"unknown mode {mode!r}")
    rows = [()] + [tuple((i, j) for j in range(1, M + 1)) for i in range(1, N + 1)]
    first = decouple(prod_space, terms, {k: k[0] for k in terms}, rows, lambda lab: ("y", lab), cap)
    cols = [()] + [
        tuple(lab for i in range(1, N + 1) for lab in ((i, j), ("y", (i, j)))) for j in range(1, M + 1)
    ]

    def to_zt(lab):
        return ("t", lab[1]) if isinstance(lab[0], str) else ("z", lab)

    check_cap(prod_space.size**4, cap)
    second = decouple(first.doubled, first.tangent, {k: k[1] for k in terms}, cols, to_zt, cap)
    return TangentPair(model, mode, (first, second), terms)


@dataclass(frozen=True)
class TangentCertificate:
    """Outcome of checking one tangent pair.

    On failure, ``stage``/``key`` locate the first failing term, ``kind`` is
    ``"conditional"`` (the one-step conditional expectations differ) or
    ``"independence"``; ``lhs``/``rhs`` are E[f_k ⊗ 1 | H_{k-1}] and
    E[g_k | H_{k-1}] (or the joint and product masses), and ``deficit`` is
    the largest pointwise |rhs − lhs|.
    """

    ok: bool
    stage: int | None = None
    key: object = None
    kind: str | None = None
    lhs: object = None
    rhs: object = None
    deficit: Fraction | None = None
    checked: int = 0

    def __bool__(self):
        return self.ok


def _gap(a: SimpleFunction, b: SimpleFunction) -> Fraction:
    out = Fraction(0)
    for u, v in zip(a.pointwise, b.pointwise):
        d = max(abs(x - y) for x, y in zip(u, v)) if isinstance(u, tuple) else abs(u - v)
        out = max(out, d)
    return out


def _independence(stage: TangentStage):
    """First x at which the block vectors of g(x, ·) fail to factorize."""
    n = len(stage.base.labels)
    groups = {}
    for key in stage.keys:
        groups.setdefault(stage.block_of[key], []).append(key)
    order = sorted(groups)
    cols = {key: stage.tangent[key].pointwise for key in stage.keys}
    by_x: dict = {}
    base_w = stage.base.space.weight_of
    for idx, (p, w) in enumerate(zip(stage.doubled.space.points, stage.doubled.space.weights)):
        by_x.setdefault(p[:n], []).append((idx, w / base_w[p[:n]]))
    for x, rows in by_x.items():
        joint: dict = {}
        margs = [dict() for _ in order]
        for idx, w in rows:
            vec = tuple(tuple(cols[key][idx] for key in groups[b]) for b in order)
            joint[vec] = joint.get(vec, 0) + w
            for m, v in zip(margs, vec):
                m[v] = m.get(v, 0) + w
        total = Fraction(0)
        for vec, mass in joint.items():
            prodm = Fraction(1)
            for m, v in zip(margs, vec):
                prodm *= m[v]
            total += prodm
            if prodm != mass:
                return x, vec, mass, prodm
        if total != 1:
            return x, None, Fraction(1), total
    return None


def verify_tangent(tp: TangentPair) -> TangentCertificate:
    checked = 0
    for s, stage in enumerate(tp.stages):
        levels = {}
        for key in stage.keys:
            k = stage.block_of[key]
            if k - 1 not in levels:
                levels[k - 1] = stage.level(k - 1)
            h = levels[k - 1]
            lhs = cond_expect(stage.lift(stage.original[key]), h)
            rhs = cond_expect(stage.tangent[key], h)
            checked += 1
            if lhs != rhs:
                return TangentCertificate(False, s, key, "conditional", lhs, rhs, _gap(lhs, rhs), checked)
        bad = _independence(stage)
        if bad is not None:
            x, vec, mass, prodm = bad
            return TangentCertificate(False, s, x, "independence", mass, prodm, abs(mass - prodm), checked)
    return TangentCertificate(True, checked=checked)
