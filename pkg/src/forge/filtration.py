"""One- and two-parameter filtrations of atomic sigma-fields and their martingales."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import NotAdaptedError
from .measure import (
    Partition,
    SampleSpace,
    SimpleFunction,
    Verdict,
    cond_expect,
    cond_indep,
    join,
    refines,
)


@dataclass(frozen=True, eq=False)
class Filtration1P:
    """Increasing partitions ``levels[0] ≤ ... ≤ levels[N]`` of one space.

    Construction does not validate; use :func:`validate_filtration`.
    """

    space: SampleSpace
    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))

    @classmethod
    def from_levels(cls, space: SampleSpace, levels, prepend_trivial=False):
        levels = list(levels)
        if prepend_trivial:
            levels.insert(0, Partition.trivial(space.points))
        return cls(space, tuple(levels))

    @property
    def N(self) -> int:
        return len(self.levels) - 1

    @property
    def finest(self) -> Partition:
        return self.levels[-1]

    def __eq__(self, other):
        if not isinstance(other, Filtration1P):
            return NotImplemented
        return self.space == other.space and self.levels == other.levels

    def __hash__(self):
        return hash((self.space, self.levels))


def validate_filtration(filt: Filtration1P) -> Verdict:
    if not filt.levels:
        return Verdict(False, "no levels")
    for n, level in enumerate(filt.levels):
        if level.points != filt.space.full:
            return Verdict(False, f"level {n} is over other points")
    for n in range(filt.N):
        if not refines(filt.levels[n + 1], filt.levels[n]):
            return Verdict(False, f"level {n}⊄level {n + 1}")
    return Verdict(True)


@dataclass(frozen=True, eq=False)
class BiFiltration:
    """An (N+1)×(M+1) grid of partitions with trivial row 0 and column 0.

    ``grid[i][j]`` is the sigma-field F_{i,j}; interior indices run over
    1..N × 1..M.  Construction does not validate; use
    :func:`validate_bifiltration`.
    """

    space: SampleSpace
    grid: tuple

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(tuple(row) for row in self.grid))

    @classmethod
    def from_interior(cls, space: SampleSpace, interior) -> "BiFiltration":
        """Pad an N×M table of partitions (indices 1..N, 1..M) with trivial boundaries."""
        interior = [list(row) for row in interior]
        triv = Partition.trivial(space.points)
        m = len(interior[0])
        grid = [[triv] * (m + 1)]
        for row in interior:
            grid.append([triv] + row)
        return cls(space, tuple(tuple(r) for r in grid))

    @property
    def N(self) -> int:
        return len(self.grid) - 1

    @property
    def M(self) -> int:
        return len(self.grid[0]) - 1

    def __getitem__(self, ij) -> Partition:
        i, j = ij
        return self.grid[i][j]

    @property
    def finest(self) -> Partition:
        return self.grid[self.N][self.M]

    def interior(self):
        """Interior indices (i, j) in lexicographic order."""
        return list(product(range(1, self.N + 1), range(1, self.M + 1)))

    def __eq__(self, other):
        if not isinstance(other, BiFiltration):
            return NotImplemented
        return self.space == other.space and self.grid == other.grid

    def __hash__(self):
        return hash((self.space, self.grid))


def validate_bifiltration(bf: BiFiltration) -> Verdict:
    """Check shape, point sets, the trivial boundary and monotonicity in both indices."""
    if bf.N < 1 or bf.M < 1:
        return Verdict(False, "grid needs at least one interior index")
    if any(len(row) != bf.M + 1 for row in bf.grid):
        return Verdict(False, "grid is not rectangular")
    for i, row in enumerate(bf.grid):
        for j, part in enumerate(row):
            if part.points != bf.space.full:
                return Verdict(False, f"({i},{j}) is over other points")
    for i in range(bf.N + 1):
        if not bf.grid[i][0].is_trivial():
            return Verdict(False, f"boundary ({i},0) is not trivial")
    for j in range(bf.M + 1):
        if not bf.grid[0][j].is_trivial():
            return Verdict(False, f"boundary (0,{j}) is not trivial")
    for i in range(bf.N + 1):
        for j in range(bf.M + 1):
            if i < bf.N and not refines(bf.grid[i + 1][j], bf.grid[i][j]):
                return Verdict(False, f"({i},{j})⊄({i + 1},{j})")
            if j < bf.M and not refines(bf.grid[i][j + 1], bf.grid[i][j]):
                return Verdict(False, f"({i},{j})⊄({i},{j + 1})")
    return Verdict(True)


def f_minus(bf: BiFiltration, i: int, j: int) -> Partition:
    """F⁻_{i,j} = F_{i-1,j} ∨ F_{i,j-1}, using the trivial boundary."""
    if not (1 <= i <= bf.N and 1 <= j <= bf.M):
        raise IndexError(f"({i},{j}) outside 1..{bf.N} × 1..{bf.M}")
    return join(bf.grid[i - 1][j], bf.grid[i][j - 1])


# -- the F4 condition ---------------------------------------------------------


@dataclass(frozen=True)
class F4Witness:
    """Conditional-independence failure of F_{i,j+1} and F_{i+1,j} given F_{i,j}."""

    index: tuple
    given: frozenset
    first: frozenset
    second: frozenset
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class CommutationWitness:
    """Failure of E(E(1_B|F_outer)|F_inner) = E(1_B|F_meet) at one point."""

    outer: tuple
    inner: tuple
    atom: frozenset
    point: object
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class F4Report:
    holds: bool
    witness: F4Witness | None = None
    direct_holds: bool | None = None
    direct_witness: CommutationWitness | None = None

    def __bool__(self):
        return self.holds


DIRECT_CHECK_MAX_POINTS = 64


def _check_commuting(bf: BiFiltration):
    idx = list(product(range(bf.N + 1), range(bf.M + 1)))
    for atom in bf.finest.blocks:
        ind = SimpleFunction.indicator(bf.space, atom)
        ce = {ij: cond_expect(ind, bf.grid[ij[0]][ij[1]]) for ij in idx}
        for outer in idx:
            for inner in idx:
                meet = (min(outer[0], inner[0]), min(outer[1], inner[1]))
                lhs = cond_expect(ce[outer], bf.grid[inner[0]][inner[1]])
                rhs = ce[meet]
                for p, a, b in zip(bf.space.points, lhs.pointwise, rhs.pointwise):
                    if a != b:
                        return CommutationWitness(outer, inner, atom, p, a, b)
    return None


def check_f4(bf: BiFiltration, direct: bool | None = None) -> F4Report:
    """Decide the F4 condition.

    The verdict comes from conditional independence of F_{i,j+1} and
    F_{i+1,j} given F_{i,j} for every (i, j).  With ``direct`` (default:
    spaces of at most 64 points) the commuting identity is also checked on
    the indicator of every atom of F_{N,M} for every pair of indices.
    """
    witness = None
    for i in range(bf.N):
        for j in range(bf.M):
            res = cond_indep(bf.space, bf.grid[i][j + 1], bf.grid[i + 1][j], bf.grid[i][j])
            if not res.holds:
                w = res.witness
                witness = F4Witness((i, j), w.given, w.first, w.second, w.lhs, w.rhs)
                break
        if witness:
            break
    if direct is None:
        direct = len(bf.space) <= DIRECT_CHECK_MAX_POINTS
    direct_holds = direct_witness = None
    if direct:
        direct_witness = _check_commuting(bf)
        direct_holds = direct_witness is None
    return F4Report(witness is None, witness, direct_holds, direct_witness)


# -- martingales ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Martingale1P:
    """Terms ``f_1..f_N``; ``terms[n-1]`` is measurable w.r.t. ``levels[n]``."""

    filtration: Filtration1P
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def N(self) -> int:
        return len(self.terms)

    def term(self, n: int) -> SimpleFunction:
        if n == 0:
            return SimpleFunction.constant(self.filtration.space, 0)
        return self.terms[n - 1]

    def indexed_terms(self):
        return [(n, self.terms[n - 1]) for n in range(1, self.N + 1)]


@dataclass(frozen=True, eq=False)
class Martingale2P:
    """Terms ``f_{i,j}`` for 1 ≤ i ≤ N, 1 ≤ j ≤ M, stored as ``terms[i-1][j-1]``."""

    filtration: BiFiltration
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(r) for r in self.terms))

    @property
    def N(self) -> int:
        return len(self.terms)

    @property
    def M(self) -> int:
        return len(self.terms[0])

    def term(self, i: int, j: int) -> SimpleFunction:
        """f_{i,j}, with f_{i,0} = f_{0,j} = 0 as in the difference formulas."""
        if i == 0 or j == 0:
            return SimpleFunction.constant(self.filtration.space, 0)
        return self.terms[i - 1][j - 1]

    def indexed_terms(self):
        return [((i, j), self.terms[i - 1][j - 1]) for i, j in self.filtration.interior()]


def is_martingale(m) -> Verdict:
    """Adaptedness plus E[f_later | F_earlier] = f_earlier for every ordered pair."""
    if isinstance(m, Martingale1P):
        levels = m.filtration.levels
        if m.N != m.filtration.N:
            return Verdict(False, "term count does not match filtration depth")
        for n, f in m.indexed_terms():
            if not f.is_measurable(levels[n]):
                return Verdict(False, f"term {n} is not adapted")
        for n, f in m.indexed_terms():
            for k in range(n + 1, m.N + 1):
                if cond_expect(m.term(k), levels[n]) != f:
                    return Verdict(False, f"E[f_{k}|F_{n}] != f_{n}")
        return Verdict(True)
    bf = m.filtration
    if (m.N, m.M) != (bf.N, bf.M):
        return Verdict(False, "term grid does not match filtration shape")
    for (i, j), f in m.indexed_terms():
        if not f.is_measurable(bf.grid[i][j]):
            return Verdict(False, f"term ({i},{j}) is not adapted")
    for (i, j), f in m.indexed_terms():
        for k, l in bf.interior():
            if (k, l) != (i, j) and k >= i and l >= j:
                if cond_expect(m.term(k, l), bf.grid[i][j]) != f:
                    return Verdict(False, f"E[f_({k},{l})|F_({i},{j})] != f_({i},{j})")
    return Verdict(True)


def martingale_from_terminal(f: SimpleFunction, filt):
    """The martingale closed by ``f``: each term is E[f | level]."""
    if isinstance(filt, Filtration1P):
        if not f.is_measurable(filt.finest):
            raise NotAdaptedError("terminal function is not measurable w.r.t. the finest level")
        return Martingale1P(filt, tuple(cond_expect(f, filt.levels[n]) for n in range(1, filt.N + 1)))
    if not f.is_measurable(filt.finest):
        raise NotAdaptedError("terminal function is not measurable w.r.t. F_{N,M}")
    rows = [
        [cond_expect(f, filt.grid[i][j]) for j in range(1, filt.M + 1)]
        for i in range(1, filt.N + 1)
    ]
    return Martingale2P(filt, rows)


def differences(m):
    """Martingale differences.

    One parameter: a tuple ``(Δ_1, ..., Δ_N)`` with Δ_1 = f_1.
    Two parameters: a dict ``{(i, j): Δ_{i,j}}`` from the rectangle
    formula f_{i,j} − f_{i-1,j} − f_{i,j-1} + f_{i-1,j-1}, where terms with a
    zero index vanish (this gives the three boundary cases).
    """
    if isinstance(m, Martingale1P):
        levels = m.filtration.levels
        out = []
        for n, f in m.indexed_terms():
            d = f if n == 1 else f - m.term(n - 1)
            out.append(d.on(levels[n]))
        return tuple(out)
    bf = m.filtration
    out = {}
    for i, j in bf.interior():
        d = m.term(i, j)
        if i > 1:
            d = d - m.term(i - 1, j)
        if j > 1:
            d = d - m.term(i, j - 1)
        if i > 1 and j > 1:
            d = d + m.term(i - 1, j - 1)
        out[i, j] = d.on(bf.grid[i][j])
    return out


def d_operator(bf: BiFiltration, f: SimpleFunction, i: int, j: int) -> SimpleFunction:
    """D_{i,j} f = E[f|F_{i,j}] − E[f|F_{i-1,j}] − E[f|F_{i,j-1}] + E[f|F_{i-1,j-1}]."""
    g = bf.grid
    return (
        cond_expect(f, g[i][j])
        - cond_expect(f, g[i - 1][j])
        - cond_expect(f, g[i][j - 1])
        + cond_expect(f, g[i - 1][j - 1])
    ).on(g[i][j])
