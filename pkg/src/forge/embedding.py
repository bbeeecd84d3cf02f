"""Canonical product models of atomic filtrations and the morphism π onto them.

One parameter: the domain of π is (Ω, F_0, P) ⊗ ⊗_n ⊗_{A ∈ at F_{n-1}} (A, F_n ∩ A, P_A);
a point is (A_0, φ_1, ..., φ_N) where φ_n picks a child atom of every atom
of F_{n-1}, and π is the composition φ_N ∘ ... ∘ φ_1(A_0).

Two parameters: factor (i, j) is ⊗_{A ∈ at F⁻_{i,j}} (A, F_{i,j} ∩ A, P_A), and
π(B) is the intersection over (i, j) of the union of the chosen atoms.  It
is evaluated through the chain of atoms A_{i,j}, filled in first along row 1,
then column 1, then the interior in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import prod

from .errors import F4ViolationError, MorphismNotVerifiedError, NotAdaptedError, SpaceMismatchError
from .filtration import (
    BiFiltration,
    Filtration1P,
    Martingale1P,
    Martingale2P,
    check_f4,
    f_minus,
    validate_bifiltration,
    validate_filtration,
)
from .measure import Partition, SampleSpace, SimpleFunction
from .product import DEFAULT_CAP, ProductSpace, check_cap


def _children(coarse: Partition, fine: Partition) -> tuple:
    """For each atom of ``coarse``, the indices of the atoms of ``fine`` inside it."""
    kids = [[] for _ in coarse.blocks]
    lab = coarse.label
    for k, b in enumerate(fine.blocks):
        kids[lab[next(iter(b))]].append(k)
    return tuple(tuple(c) for c in kids)


def _factor(space: SampleSpace, coarse: Partition, fine: Partition, kids) -> SampleSpace:
    """⊗_{A} (A, fine ∩ A, P_A); a point picks one child index per parent atom."""
    probs = [space.prob(b) for b in fine.blocks]
    cond = []
    for a, cs in zip(coarse.blocks, kids):
        pa = space.prob(a)
        cond.append([(c, probs[c] / pa) for c in cs])
    points, weights = [], []
    for choice in product(*cond):
        points.append(tuple(c for c, _ in choice))
        weights.append(prod((w for _, w in choice), start=Fraction(1)))
    return SampleSpace(tuple(points), tuple(weights))


# -- one parameter ---------------------------------------------------------------


def count_atoms_1p(filt: Filtration1P) -> int:
    count = len(filt.levels[0])
    for n in range(1, filt.N + 1):
        count *= prod(len(c) for c in _children(filt.levels[n - 1], filt.levels[n]))
    return count


@dataclass(frozen=True, eq=False)
class CanonicalModel1P:
    """Product model of a one-parameter filtration.

    ``product`` has coordinates 0..N; coordinate 0 is an atom index of
    F_0 and coordinate n is a tuple of child indices (into F_n), one per
    atom of F_{n-1}.  ``canonical`` is the filtration generated by the
    coordinates 0..n.
    """

    source: Filtration1P
    product: ProductSpace
    children: tuple
    canonical: Filtration1P

    @property
    def space(self) -> SampleSpace:
        return self.product.space

    def image_index(self, x) -> int:
        a = x[0]
        for n in range(1, len(x)):
            a = x[n][a]
        return a


def build_canonical_1p(filt: Filtration1P, cap: int | None = DEFAULT_CAP):
    """Return ``(model, morphism)`` for a one-parameter filtration."""
    verdict = validate_filtration(filt)
    if not verdict:
        raise ValueError(verdict.violation)
    check_cap(count_atoms_1p(filt), cap)
    space, levels = filt.space, filt.levels
    factors = [SampleSpace(tuple(range(len(levels[0]))), tuple(space.prob(b) for b in levels[0]))]
    children = [None]
    for n in range(1, filt.N + 1):
        kids = _children(levels[n - 1], levels[n])
        children.append(kids)
        factors.append(_factor(space, levels[n - 1], levels[n], kids))
    prod_space = ProductSpace(tuple(range(filt.N + 1)), tuple(factors))
    canonical = Filtration1P(
        prod_space.space, tuple(prod_space.coord_partition(range(n + 1)) for n in range(filt.N + 1))
    )
    model = CanonicalModel1P(filt, prod_space, tuple(children), canonical)
    image = {x: model.image_index(x) for x in prod_space.space.points}
    return model, Morphism(model, image)


# -- two parameters --------------------------------------------------------------


def count_atoms_2p(bf: BiFiltration) -> int:
    count = 1
    for i, j in bf.interior():
        count *= prod(len(c) for c in _children(f_minus(bf, i, j), bf.grid[i][j]))
    return count


def chain_order(N: int, M: int) -> list:
    """Row 1, then column 1, then the interior in lexicographic order."""
    order = [(1, j) for j in range(1, M + 1)]
    order += [(i, 1) for i in range(2, N + 1)]
    order += [(i, j) for i in range(2, N + 1) for j in range(2, M + 1)]
    return order


@dataclass(frozen=True, eq=False)
class CanonicalModel2P:
    """Product model of a biparameter filtration.

    ``product`` has one coordinate per interior index (i, j) in
    lexicographic order; its value is a tuple of child indices into
    F_{i,j}, one per atom of F⁻_{i,j}.  ``canonical`` is the biparameter
    filtration generated by the coordinates (i', j') ≤ (i, j).
    """

    source: BiFiltration
    product: ProductSpace
    fminus: dict
    children: dict
    canonical: BiFiltration

    @property
    def space(self) -> SampleSpace:
        return self.product.space

    @cached_property
    def order(self) -> list:
        return chain_order(self.source.N, self.source.M)


def build_canonical_2p(bf: BiFiltration, cap: int | None = DEFAULT_CAP, require_f4: bool = True):
    """Return ``(model, morphism)`` for a biparameter filtration.

    Non-F4 input is refused with :class:`F4ViolationError` unless
    ``require_f4`` is false (useful only to study the failure).
    """
    verdict = validate_bifiltration(bf)
    if not verdict:
        raise ValueError(verdict.violation)
    if require_f4:
        report = check_f4(bf, direct=False)
        if not report.holds:
            raise F4ViolationError(report.witness)
    check_cap(count_atoms_2p(bf), cap)
    space = bf.space
    labels = tuple(bf.interior())
    fminus, children, factors = {}, {}, []
    for i, j in labels:
        fm = f_minus(bf, i, j)
        kids = _children(fm, bf.grid[i][j])
        fminus[i, j], children[i, j] = fm, kids
        factors.append(_factor(space, fm, bf.grid[i][j], kids))
    prod_space = ProductSpace(labels, tuple(factors))
    grid = [[Partition.trivial(prod_space.space.points)] * (bf.M + 1) for _ in range(bf.N + 1)]
    for n, m in labels:
        grid[n][m] = prod_space.coord_partition([(i, j) for i, j in labels if i <= n and j <= m])
    canonical = BiFiltration(prod_space.space, tuple(tuple(r) for r in grid))
    model = CanonicalModel2P(bf, prod_space, fminus, children, canonical)
    image = {}
    for x in prod_space.space.points:
        atom = evaluate_chain(model, x)
        image[x] = None if atom is None else bf.finest.index_of(atom)
    return model, Morphism(model, image)


def _chain(model: CanonicalModel2P, x):
    """Chain atoms (A, B) per index, or None as soon as the chain breaks."""
    bf = model.source
    pos = model.product.position
    A, B = {}, {}
    full = bf.space.full
    for i, j in model.order:
        if (i, j) == (1, 1):
            a = full
        elif j == 1:
            a = B[i - 1, 1]
        elif i == 1:
            a = B[1, j - 1]
        else:
            a = B[i - 1, j] & B[i, j - 1]
            if not a:
                return None
        fm = model.fminus[i, j]
        try:
            k = fm.index_of(a)
        except KeyError:
            return None
        A[i, j] = a
        B[i, j] = bf.grid[i][j].blocks[x[pos[i, j]][k]]
    return A, B


def evaluate_chain(model: CanonicalModel2P, x):
    """π(x) as an atom of F_{N,M}, or ``None`` when the image is empty."""
    chain = _chain(model, x)
    if chain is None:
        return None
    return chain[1][model.source.N, model.source.M]


def evaluate_brute(model: CanonicalModel2P, x) -> frozenset:
    """π(x) straight from its definition: ⋂_{i,j} ⋃_A B^{i,j}_A."""
    bf = model.source
    pos = model.product.position
    result = set(bf.space.points)
    for i, j in bf.interior():
        blocks = bf.grid[i][j].blocks
        union = set()
        for k in x[pos[i, j]]:
            union |= blocks[k]
        result &= union
    return frozenset(result)


@dataclass(frozen=True)
class PreimageMeasure:
    """μ(π⁻¹(U)) for an atom U of F_{N,M}, with the per-(n, m) products.

    ``intermediates[n, m]`` is (∏_{i≤n, j≤m} P_{A_ij}(B_ij), P(B_nm)); the
    factors P_{A_ij}(B_ij) are read off the factor spaces as the mass of the
    cylinder {y : y picks B_ij over A_ij}.  ``ratio_terms[n, m]`` for n, m ≥ 2
    is P(B_{n-1,m}) P(B_{n,m-1}) / (P(B_{n-1,m-1}) P(A_nm)).
    """

    value: Fraction
    target: Fraction
    factors: dict
    intermediates: dict
    ratio_terms: dict

    @property
    def holds(self) -> bool:
        return self.value == self.target and all(a == b for a, b in self.intermediates.values())


def preimage_measure(model: CanonicalModel2P, U) -> PreimageMeasure:
    bf = model.source
    U = frozenset(U)
    try:
        bf.finest.index_of(U)
    except KeyError:
        raise ValueError("U is not an atom of F_{N,M}") from None
    space = bf.space
    rep = next(iter(U))
    A, B, factors = {}, {}, {}
    for k, (i, j) in enumerate(model.product.labels):
        a_idx = model.fminus[i, j].label[rep]
        b_idx = bf.grid[i][j].label[rep]
        A[i, j] = model.fminus[i, j].blocks[a_idx]
        B[i, j] = bf.grid[i][j].blocks[b_idx]
        fac = model.product.factors[k]
        factors[i, j] = sum(
            (w for y, w in zip(fac.points, fac.weights) if y[a_idx] == b_idx), Fraction(0)
        )
    inter, ratios = {}, {}
    for n, m in bf.interior():
        partial = prod(
            (factors[i, j] for i, j in bf.interior() if i <= n and j <= m), start=Fraction(1)
        )
        inter[n, m] = (partial, space.prob(B[n, m]))
        if n >= 2 and m >= 2:
            ratios[n, m] = (
                space.prob(B[n - 1, m])
                * space.prob(B[n, m - 1])
                / (space.prob(B[n - 1, m - 1]) * space.prob(A[n, m]))
            )
    value = inter[bf.N, bf.M][0]
    return PreimageMeasure(value, space.prob(U), factors, inter, ratios)


# -- morphisms -------------------------------------------------------------------


@dataclass(frozen=True)
class MorphismCertificate:
    """Result of checking measurability of preimages and measure preservation.

    ``preimages_measurable`` maps each index to whether every preimage of a
    source atom at that index is a union of canonical atoms at the same
    index.  ``masses`` lists (atom, μ(π⁻¹(atom)), P(atom)) over the atoms of
    the finest source field.
    """

    preimages_measurable: dict
    masses: tuple
    empty_mass: Fraction

    @property
    def measure_preserved(self) -> bool:
        return all(mu == p for _, mu, p in self.masses)

    @property
    def verdict(self) -> bool:
        return self.measure_preserved and all(self.preimages_measurable.values())

    def deficits(self) -> list:
        """(atom, P(atom) − μ(π⁻¹(atom))) for every atom where they differ."""
        return [(a, p - mu) for a, mu, p in self.masses if mu != p]

    def __bool__(self):
        return self.verdict


@dataclass(frozen=True, eq=False)
class Morphism:
    """π from a canonical model onto the source space.

    ``image_map`` sends each product point to the index of its image atom in
    the finest source field, or ``None`` for an empty image.
    """

    model: object
    image_map: dict

    @property
    def two_param(self) -> bool:
        return isinstance(self.model, CanonicalModel2P)

    def image(self, x) -> frozenset | None:
        k = self.image_map[x]
        return None if k is None else self.model.source.finest.blocks[k]

    def indices(self) -> list:
        src = self.model.source
        return src.interior() if self.two_param else list(range(src.N + 1))

    def source_level(self, index) -> Partition:
        src = self.model.source
        return src.grid[index[0]][index[1]] if self.two_param else src.levels[index]

    def canonical_level(self, index) -> Partition:
        can = self.model.canonical
        return can.grid[index[0]][index[1]] if self.two_param else can.levels[index]

    @cached_property
    def certificate(self) -> MorphismCertificate:
        return verify_morphism(self)


def verify_morphism(morph: Morphism) -> MorphismCertificate:
    model = morph.model
    src = model.source
    finest = src.finest
    reps = [next(iter(b)) for b in finest.blocks]
    points = model.space.points
    measurable = {}
    for idx in morph.indices():
        lab = morph.source_level(idx).label
        key = {x: (None if morph.image_map[x] is None else lab[reps[morph.image_map[x]]]) for x in points}
        ok = True
        for block in morph.canonical_level(idx).blocks:
            it = iter(block)
            first = key[next(it)]
            if any(key[x] != first for x in it):
                ok = False
                break
        measurable[idx] = ok
    mass = [Fraction(0)] * len(finest.blocks)
    empty = Fraction(0)
    for x, w in zip(points, model.space.weights):
        k = morph.image_map[x]
        if k is None:
            empty += w
        else:
            mass[k] += w
    rows = tuple((b, mu, src.space.prob(b)) for b, mu in zip(finest.blocks, mass))
    return MorphismCertificate(measurable, rows, empty)


def pullback(morph: Morphism, f: SimpleFunction, index) -> SimpleFunction:
    """f ∘ π, measurable w.r.t. the canonical level with the same index."""
    src = morph.model.source
    if f.space != src.space:
        raise SpaceMismatchError("function is not on the source space")
    if not f.is_measurable(morph.source_level(index)):
        raise NotAdaptedError(f"function is not measurable at level {index}")
    if not morph.certificate.verdict:
        raise MorphismNotVerifiedError("morphism fails measurability or measure preservation")
    reps = [next(iter(b)) for b in src.finest.blocks]
    vals = {}
    for x in morph.model.space.points:
        k = morph.image_map[x]
        vals[x] = f(reps[k]) if k is not None else _zero_like(f)
    g = SimpleFunction.from_points(morph.model.space, vals)
    return g.on(morph.canonical_level(index))


def _zero_like(f):
    v = f.values[0]
    return tuple(0 for _ in v) if isinstance(v, tuple) else 0


def pullback_martingale(morph: Morphism, m):
    """Pull every term back; the result lives on the canonical filtration."""
    can = morph.model.canonical
    if isinstance(m, Martingale1P):
        return Martingale1P(can, tuple(pullback(morph, f, n) for n, f in m.indexed_terms()))
    if isinstance(m, Martingale2P):
        rows = [[pullback(morph, m.term(i, j), (i, j)) for j in range(1, m.M + 1)] for i in range(1, m.N + 1)]
        return Martingale2P(can, rows)
    raise TypeError("expected a martingale")


def joint_law(fs) -> dict:
    """Exact law of the tuple (f_1, ..., f_k): value tuple → mass."""
    fs = list(fs)
    if not fs:
        raise ValueError("no functions")
    space = fs[0].space
    for f in fs[1:]:
        if f.space != space:
            raise SpaceMismatchError("functions live on different spaces")
    law: dict = {}
    columns = [f.pointwise for f in fs]
    for k, w in enumerate(space.weights):
        key = tuple(col[k] for col in columns)
        law[key] = law.get(key, 0) + w
    return {k: Fraction(v) for k, v in sorted(law.items(), key=lambda kv: repr(kv[0]))}


def equal_law(d1: dict, d2: dict) -> bool:
    a = {k: v for k, v in d1.items() if v}
    b = {k: v for k, v in d2.items() if v}
    return a == b


def martingale_law(m) -> dict:
    return joint_law([f for _, f in m.indexed_terms()])
