"""Finite probability spaces with exact rational weights.

Atomic sigma-fields are represented by set partitions of the sample points,
and every random variable is a :class:`SimpleFunction`, i.e. a value attached
to each block of a partition.  All measure arithmetic uses
:class:`fractions.Fraction`, so identities such as the tower property hold
with ``==`` rather than within a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

from .errors import NotAdaptedError, SpaceMismatchError

Point = Hashable
Value = Any  # Fraction or tuple of Fractions


def point_key(p):
    """Total order on point identifiers: ints, then strings, then tuples."""
    if isinstance(p, (bool, int)):
        return (0, int(p))
    if isinstance(p, str):
        return (1, p)
    if isinstance(p, tuple):
        return (2, tuple(point_key(x) for x in p))
    raise TypeError(f"unsupported point identifier {p!r}")


def as_value(v):
    """Coerce a scalar or vector value to exact rationals."""
    if isinstance(v, (tuple, list)):
        return tuple(Fraction(x) for x in v)
    return Fraction(v)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a validation: ``ok`` or the first violated invariant."""

    ok: bool
    violation: str | None = None
    notes: tuple = ()

    def __bool__(self):
        return self.ok


def _space_violation(pairs: Sequence[tuple]) -> str | None:
    seen = set()
    for p, _ in pairs:
        point_key(p)
        if p in seen:
            return f"duplicate point {p!r}"
        seen.add(p)
    for p, w in pairs:
        if w == 0:
            return f"zero weight at {p}"
        if w < 0:
            return f"negative weight {w} at {p}"
    total = sum((w for _, w in pairs), Fraction(0))
    if total != 1:
        return f"weights sum to {total}"
    return None


def _pairs(weights) -> list[tuple]:
    items = weights.items() if isinstance(weights, Mapping) else weights
    return [(p, Fraction(w)) for p, w in items]


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """A finite sample space with strictly positive rational weights."""

    points: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "weights", tuple(Fraction(w) for w in self.weights))
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights differ in length")
        problem = _space_violation(list(zip(self.points, self.weights)))
        if problem:
            raise ValueError(problem)

    @classmethod
    def from_weights(cls, weights) -> "SampleSpace":
        pairs = _pairs(weights)
        return cls(tuple(p for p, _ in pairs), tuple(w for _, w in pairs))

    @classmethod
    def uniform(cls, points: Iterable) -> "SampleSpace":
        points = tuple(points)
        w = Fraction(1, len(points))
        return cls(points, (w,) * len(points))

    @cached_property
    def index(self) -> dict:
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def weight_of(self) -> dict:
        return dict(zip(self.points, self.weights))

    @cached_property
    def full(self) -> frozenset:
        return frozenset(self.points)

    def weight(self, p) -> Fraction:
        return self.weight_of[p]

    def prob(self, event: Iterable) -> Fraction:
        w = self.weight_of
        return sum((w[p] for p in event), Fraction(0))

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, SampleSpace):
            return NotImplemented
        return self.points == other.points and self.weights == other.weights

    def __hash__(self):
        return hash((self.points, self.weights))

    def __repr__(self):
        body = ", ".join(f"{p!r}: {w}" for p, w in zip(self.points, self.weights))
        return f"SampleSpace({{{body}}})"


def validate_space(space) -> Verdict:
    """Check the sample-space invariants on a space or a raw point→weight map.

    Violations are returned as data; nothing is raised.
    """
    if isinstance(space, SampleSpace):
        return Verdict(True)
    try:
        problem = _space_violation(_pairs(space))
    except (TypeError, ValueError) as exc:
        return Verdict(False, str(exc))
    return Verdict(problem is None, problem)


def ingest_space(weights) -> tuple[SampleSpace, Verdict]:
    """Build a space from raw weights, stripping zero-weight points."""
    pairs = _pairs(weights)
    notes = tuple(f"stripped zero-weight point {p!r}" for p, w in pairs if w == 0)
    kept = [(p, w) for p, w in pairs if w != 0]
    problem = _space_violation(kept)
    if problem:
        raise ValueError(problem)
    return SampleSpace.from_weights(kept), Verdict(True, None, notes)


def conditional_space(space: SampleSpace, event: Iterable) -> SampleSpace:
    """Restrict ``space`` to ``event`` and renormalise: P_A(u) = P(u)/P(A)."""
    event = frozenset(event)
    if not event:
        raise ValueError("conditioning on null/empty event")
    if not event <= space.full:
        raise SpaceMismatchError("event contains points outside the space")
    pa = space.prob(event)
    kept = [(p, w / pa) for p, w in zip(space.points, space.weights) if p in event]
    return SampleSpace.from_weights(kept)


@dataclass(frozen=True, eq=False)
class Partition:
    """A set partition of a finite point set; blocks are the atoms of a sigma-field.

    Blocks are stored sorted by their least point, so two partitions of the
    same set are equal exactly when their ``blocks`` tuples are.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = [frozenset(b) for b in self.blocks]
        seen = set()
        for b in blocks:
            if not b:
                raise ValueError("empty block")
            if seen & b:
                raise ValueError("blocks overlap")
            seen |= b
        blocks.sort(key=lambda b: min(map(point_key, b)))
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def trivial(cls, points: Iterable) -> "Partition":
        return cls((frozenset(points),))

    @classmethod
    def discrete(cls, points: Iterable) -> "Partition":
        return cls(tuple(frozenset([p]) for p in points))

    @classmethod
    def by_key(cls, points: Iterable, key: Callable) -> "Partition":
        """Level sets of ``key`` on ``points``."""
        groups: dict = {}
        for p in points:
            groups.setdefault(key(p), []).append(p)
        return cls(tuple(groups.values()))

    @cached_property
    def label(self) -> dict:
        return {p: i for i, b in enumerate(self.blocks) for p in b}

    @cached_property
    def points(self) -> frozenset:
        return frozenset(self.label)

    def block_of(self, p) -> frozenset:
        return self.blocks[self.label[p]]

    def index_of(self, block) -> int:
        """Index of ``block``; raises ``KeyError`` if it is not an atom."""
        block = frozenset(block)
        i = self.label[next(iter(block))]
        if self.blocks[i] != block:
            raise KeyError("not an atom of this partition")
        return i

    def is_trivial(self) -> bool:
        return len(self.blocks) == 1

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Partition):
            return NotImplemented
        return self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        inner = ", ".join(
            "{" + ",".join(map(str, sorted(b, key=point_key))) + "}" for b in self.blocks
        )
        return f"Partition({inner})"


def _same_points(p: Partition, q: Partition):
    if p.points != q.points:
        raise SpaceMismatchError("partitions are over different point sets")


def refines(fine: Partition, coarse: Partition) -> bool:
    """True iff every block of ``fine`` lies inside a block of ``coarse``."""
    _same_points(fine, coarse)
    lab = coarse.label
    for b in fine.blocks:
        it = iter(b)
        first = lab[next(it)]
        if any(lab[p] != first for p in it):
            return False
    return True


def join(*parts: Partition) -> Partition:
    """Coarsest common refinement; its atoms are the non-empty intersections."""
    if not parts:
        raise ValueError("join of no partitions")
    base = parts[0]
    for q in parts[1:]:
        _same_points(base, q)
    if len(parts) == 1:
        return base
    labels = [q.label for q in parts]
    return Partition.by_key(base.points, lambda p: tuple(lab[p] for lab in labels))


def _vzero(v):
    return tuple(Fraction(0) for _ in v) if isinstance(v, tuple) else Fraction(0)


def _vadd(a, b):
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def _vscale(c, a):
    if isinstance(a, tuple):
        return tuple(c * x for x in a)
    return c * a


@dataclass(frozen=True, eq=False)
class SimpleFunction:
    """A function on a finite space that is constant on each block of ``partition``.

    Values are exact rationals, or tuples of rationals of one common length
    for vector-valued functions.
    """

    space: SampleSpace
    partition: Partition
    values: tuple

    def __post_init__(self):
        if self.partition.points != self.space.full:
            raise SpaceMismatchError("partition does not cover the sample space")
        values = tuple(as_value(v) for v in self.values)
        if len(values) != len(self.partition.blocks):
            raise ValueError("one value per block is required")
        dims = {len(v) if isinstance(v, tuple) else None for v in values}
        if len(dims) > 1:
            raise ValueError("vector values must share one dimension")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, space: SampleSpace, values) -> "SimpleFunction":
        """Build from a point→value map (or a sequence aligned with the points)."""
        if not isinstance(values, Mapping):
            values = dict(zip(space.points, values))
        vals = {p: as_value(values[p]) for p in space.points}
        part = Partition.by_key(space.points, vals.__getitem__)
        return cls(space, part, tuple(vals[next(iter(b))] for b in part.blocks))

    @classmethod
    def from_callable(cls, space: SampleSpace, fn: Callable) -> "SimpleFunction":
        return cls.from_points(space, {p: fn(p) for p in space.points})

    @classmethod
    def constant(cls, space: SampleSpace, c) -> "SimpleFunction":
        return cls(space, Partition.trivial(space.points), (c,))

    @classmethod
    def indicator(cls, space: SampleSpace, event) -> "SimpleFunction":
        event = frozenset(event)
        return cls.from_points(space, {p: int(p in event) for p in space.points})

    @property
    def dim(self) -> int | None:
        v = self.values[0]
        return len(v) if isinstance(v, tuple) else None

    def __call__(self, p):
        return self.values[self.partition.label[p]]

    @cached_property
    def pointwise(self) -> tuple:
        lab, vals = self.partition.label, self.values
        return tuple(vals[lab[p]] for p in self.space.points)

    def _check(self, other: "SimpleFunction"):
        if self.space != other.space:
            raise SpaceMismatchError("functions live on different spaces")

    def _combine(self, other, op) -> "SimpleFunction":
        if isinstance(other, SimpleFunction):
            self._check(other)
            if self.partition == other.partition:
                return SimpleFunction(
                    self.space, self.partition, tuple(map(op, self.values, other.values))
                )
            part = join(self.partition, other.partition)
            vals = tuple(op(self(next(iter(b))), other(next(iter(b)))) for b in part.blocks)
            return SimpleFunction(self.space, part, vals)
        c = as_value(other)
        return SimpleFunction(self.space, self.partition, tuple(op(v, c) for v in self.values))

    def __add__(self, other):
        return self._combine(other, _vadd)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: _vadd(a, _vscale(-1, b)))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self.map(lambda v: _vscale(-1, v))

    def __mul__(self, other):
        if isinstance(other, SimpleFunction):
            return self._combine(other, _vmul)
        c = Fraction(other)
        return self.map(lambda v: _vscale(c, v))

    __rmul__ = __mul__

    def map(self, fn: Callable) -> "SimpleFunction":
        return SimpleFunction(self.space, self.partition, tuple(fn(v) for v in self.values))

    def square(self) -> "SimpleFunction":
        """Pointwise |f|^2 (squared Euclidean norm for vector values)."""
        return self.map(lambda v: sum(x * x for x in v) if isinstance(v, tuple) else v * v)

    def abs(self) -> "SimpleFunction":
        return self.map(abs)

    def integral(self):
        """Exact expectation sum_w P(w) f(w)."""
        total = _vzero(self.values[0])
        for b, v in zip(self.partition.blocks, self.values):
            total = _vadd(total, _vscale(self.space.prob(b), v))
        return total

    def is_measurable(self, partition: Partition) -> bool:
        """True iff the function is constant on every block of ``partition``."""
        if partition.points != self.space.full:
            return False
        for b in partition.blocks:
            it = iter(b)
            v = self(next(it))
            if any(self(p) != v for p in it):
                return False
        return True

    def on(self, partition: Partition) -> "SimpleFunction":
        """Re-express on ``partition``; raises if not measurable there."""
        if not self.is_measurable(partition):
            raise NotAdaptedError("not adapted: function is not constant on the given atoms")
        return SimpleFunction(
            self.space, partition, tuple(self(next(iter(b))) for b in partition.blocks)
        )

    def level_sets(self) -> Partition:
        """The sigma-field generated by the function."""
        return Partition.by_key(self.space.points, self)

    def __eq__(self, other):
        if not isinstance(other, SimpleFunction):
            return NotImplemented
        return self.space == other.space and self.pointwise == other.pointwise

    __hash__ = None

    def __repr__(self):
        return f"SimpleFunction({dict(zip(self.space.points, self.pointwise))})"


def _vmul(a, b):
    if isinstance(a, tuple) and isinstance(b, tuple):
        raise TypeError("product of two vector-valued functions is undefined")
    if isinstance(a, tuple):
        return _vscale(b, a)
    return _vscale(a, b)


def cond_expect(f: SimpleFunction, g: Partition) -> SimpleFunction:
    """E[f | g] as a g-measurable simple function (exact)."""
    space = f.space
    if g.points != space.full:
        raise NotAdaptedError("not adapted: conditioning partition is over other points")
    lab = g.label
    num = [None] * len(g.blocks)
    den = [Fraction(0)] * len(g.blocks)
    for p, w, v in zip(space.points, space.weights, f.pointwise):
        b = lab[p]
        term = _vscale(w, v)
        num[b] = term if num[b] is None else _vadd(num[b], term)
        den[b] += w
    return SimpleFunction(space, g, tuple(_vscale(1 / d, n) for n, d in zip(num, den)))


@dataclass(frozen=True)
class CondIndepWitness:
    """A triple of atoms where P(B∩C|A) differs from P(B|A)P(C|A)."""

    given: frozenset
    first: frozenset
    second: frozenset
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class CondIndepResult:
    holds: bool
    witness: CondIndepWitness | None = None

    def __bool__(self):
        return self.holds


def cond_indep(space: SampleSpace, p: Partition, q: Partition, given: Partition) -> CondIndepResult:
    """Exact test of conditional independence of ``p`` and ``q`` given ``given``.

    Atoms are scanned in canonical order, so the reported witness is the
    first failing triple (A, B, C).
    """
    for part in (p, q, given):
        if part.points != space.full:
            raise SpaceMismatchError("partition is over other points")
    lp, lq = p.label, q.label
    w = space.weight_of
    for a in given.blocks:
        pa = Fraction(0)
        mb: dict = {}
        mc: dict = {}
        mbc: dict = {}
        for x in a:
            wx = w[x]
            b, c = lp[x], lq[x]
            pa += wx
            mb[b] = mb.get(b, 0) + wx
            mc[c] = mc.get(c, 0) + wx
            mbc[b, c] = mbc.get((b, c), 0) + wx
        for b in sorted(mb):
            for c in sorted(mc):
                # compare P(B∩C∩A)P(A) with P(B∩A)P(C∩A) to avoid division
                if mbc.get((b, c), 0) * pa != mb[b] * mc[c]:
                    return CondIndepResult(
                        False,
                        CondIndepWitness(
                            a,
                            p.blocks[b],
                            q.blocks[c],
                            Fraction(mbc.get((b, c), 0)) / pa,
                            Fraction(mb[b]) * mc[c] / (pa * pa),
                        ),
                    )
    return CondIndepResult(True)
