"""Random spaces, filtrations, martingales and weighted systems.

All generators take a numpy Generator (see :mod:`forge.harness.rng`) and are
deterministic given its state.  Weights and values are small rationals so
that exact arithmetic stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..embedding import count_atoms_2p
from ..filtration import BiFiltration, Filtration1P, check_f4, martingale_from_terminal, validate_bifiltration
from ..measure import Partition, SampleSpace, SimpleFunction, join
from ..decoupling.doob import WeightedSystem
from ..product import ProductSpace

F4_MODES = ("guaranteed", "generic", "adversarial-non-f4")


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the generators; ``cap`` bounds the canonical-model atom count."""

    seed: int = 0
    points_max: int = 6
    N: int = 2
    M: int = 2
    branching_max: int = 2
    value_range: tuple = (Fraction(-3), Fraction(3))
    f4_mode: str = "guaranteed"
    cap: int = 10**4
    dim: int | None = None

    def __post_init__(self):
        lo, hi = (Fraction(v) for v in self.value_range)
        object.__setattr__(self, "value_range", (lo, hi))
        if min(self.points_max, self.N, self.M, self.branching_max, self.cap) <= 0:
            raise ValueError("generator caps must be positive")
        if lo > hi:
            raise ValueError("empty value range")
        if self.f4_mode not in F4_MODES:
            raise ValueError(f"unknown f4_mode {self.f4_mode!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _int(rng, lo, hi) -> int:
    """Uniform integer in lo..hi inclusive."""
    return int(rng.integers(lo, hi + 1))


def gen_weights(rng, n: int, top: int = 6) -> list:
    raw = [_int(rng, 1, top) for _ in range(n)]
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


def gen_space(rng, n: int, uniform: bool = False) -> SampleSpace:
    pts = tuple(range(n))
    if uniform:
        return SampleSpace.uniform(pts)
    return SampleSpace(pts, tuple(gen_weights(rng, n)))


def refine(rng, part: Partition, branching_max: int) -> Partition:
    """Split every block into at most ``branching_max`` random pieces."""
    blocks = []
    for block in part.blocks:
        b = _int(rng, 1, branching_max)
        pieces = [[] for _ in range(b)]
        for p in sorted(block):
            pieces[_int(rng, 0, b - 1)].append(p)
        blocks.extend(pc for pc in pieces if pc)
    return Partition(blocks)


def random_partition(rng, points, blocks_max: int | None = None) -> Partition:
    points = list(points)
    k = _int(rng, 1, blocks_max or len(points))
    return Partition.by_key(points, lambda p: _int(rng, 0, k - 1))


def gen_filtration1p(cfg: GeneratorConfig, rng, random_start: bool = True) -> Filtration1P:
    n = _int(rng, 1, cfg.points_max)
    space = gen_space(rng, n)
    N = _int(rng, 1, cfg.N)
    level = Partition.trivial(space.points)
    if random_start and rng.random() < 0.25:
        level = refine(rng, level, cfg.branching_max)
    levels = [level]
    for _ in range(N):
        level = refine(rng, level, cfg.branching_max)
        levels.append(level)
    return Filtration1P(space, tuple(levels))


def _relabel(rng, space: SampleSpace, grid) -> BiFiltration:
    perm = [int(k) for k in rng.permutation(len(space))]
    name = {p: perm[k] for k, p in enumerate(space.points)}
    order = sorted(space.points, key=lambda p: name[p])
    new_space = SampleSpace(tuple(name[p] for p in order), tuple(space.weight_of[p] for p in order))
    new_grid = [[Partition([{name[p] for p in b} for b in part.blocks]) for part in row] for row in grid]
    return BiFiltration(new_space, new_grid)


def _tensor(cfg, rng, N, M) -> BiFiltration:
    a = _int(rng, 1, max(1, cfg.points_max // 2))
    b = _int(rng, 1, max(1, cfg.points_max // a))
    s1, s2 = gen_space(rng, a), gen_space(rng, b)
    f1 = [Partition.trivial(s1.points)]
    f2 = [Partition.trivial(s2.points)]
    for _ in range(N):
        f1.append(refine(rng, f1[-1], cfg.branching_max))
    for _ in range(M):
        f2.append(refine(rng, f2[-1], cfg.branching_max))
    pts = tuple((x, y) for x in s1.points for y in s2.points)
    space = SampleSpace(pts, tuple(s1.weight_of[x] * s2.weight_of[y] for x, y in pts))
    grid = [
        [
            Partition.by_key(pts, lambda p, i=i, j=j: (f1[i].label[p[0]], f2[j].label[p[1]]) if i and j else 0)
            for j in range(M + 1)
        ]
        for i in range(N + 1)
    ]
    return _relabel(rng, space, grid)


def _canonical_product(cfg, rng, N, M) -> BiFiltration:
    labels = [(i, j) for i in range(1, N + 1) for j in range(1, M + 1)]
    budget = cfg.points_max
    factors = []
    for _ in labels:
        k = _int(rng, 1, min(cfg.branching_max, budget)) if budget > 1 else 1
        budget //= k
        factors.append(gen_space(rng, k))
    prod_space = ProductSpace(tuple(labels), tuple(factors))
    space = prod_space.space
    grid = [[Partition.trivial(space.points)] * (M + 1) for _ in range(N + 1)]
    for n, m in labels:
        grid[n][m] = prod_space.coord_partition([(i, j) for i, j in labels if i <= n and j <= m])
    return _relabel(rng, space, grid)


def _generic(cfg, rng, N, M) -> BiFiltration:
    n = _int(rng, 1, cfg.points_max)
    space = gen_space(rng, n)
    triv = Partition.trivial(space.points)
    grid = [[triv] * (M + 1) for _ in range(N + 1)]
    for i in range(1, N + 1):
        for j in range(1, M + 1):
            base = join(grid[i - 1][j], grid[i][j - 1])
            grid[i][j] = refine(rng, base, cfg.branching_max)
    return BiFiltration(space, tuple(tuple(r) for r in grid))


def _break_f4(cfg, rng, bf: BiFiltration) -> BiFiltration | None:
    """Refine one interior level by a random split and push it up by joins."""
    N, M = bf.N, bf.M
    i, j = _int(rng, 1, N), _int(rng, 1, M)
    part = bf.grid[i][j]
    k = _int(rng, 0, len(part.blocks) - 1)
    blocks = [set(b) for b in part.blocks]
    target = sorted(blocks[k])
    if len(target) < 2:
        return None
    cut = set(p for p in target if rng.random() < 0.5)
    if not cut or cut == set(target):
        cut = {target[0]}
    blocks[k] = set(target) - cut
    blocks.append(cut)
    extra = Partition(blocks)
    grid = [list(row) for row in bf.grid]
    for a in range(i, N + 1):
        for b in range(j, M + 1):
            grid[a][b] = join(grid[a][b], extra)
    return BiFiltration(bf.space, tuple(tuple(r) for r in grid))


def gen_bifiltration(cfg: GeneratorConfig, rng, attempts: int = 200) -> BiFiltration:
    """A bifiltration in the configured F4 mode.

    ``guaranteed`` alternates between a tensor product of two random
    one-parameter filtrations and a canonical product of random factor
    spaces (both F4), with points relabelled at random.  ``generic`` refines
    joins at random.  ``adversarial-non-f4`` takes a tensor or generic
    instance on an N, M ≥ 2 grid, refines one level, propagates the
    refinement upwards by joins and retries until check_f4 fails.
    """
    for _ in range(attempts):
        if cfg.f4_mode == "adversarial-non-f4":
            N, M = _int(rng, 2, max(2, cfg.N)), _int(rng, 2, max(2, cfg.M))
            base = _tensor(cfg, rng, N, M) if rng.random() < 0.5 else _generic(cfg, rng, N, M)
            bf = _break_f4(cfg, rng, base)
            if bf is None or not validate_bifiltration(bf) or check_f4(bf, direct=False).holds:
                continue
            return bf
        N, M = _int(rng, 1, cfg.N), _int(rng, 1, cfg.M)
        if cfg.f4_mode == "generic":
            return _generic(cfg, rng, N, M)
        bf = _tensor(cfg, rng, N, M) if rng.random() < 0.5 else _canonical_product(cfg, rng, N, M)
        if count_atoms_2p(bf) <= cfg.cap:
            return bf
    raise RuntimeError("generator attempts exhausted")


def random_value(rng, cfg: GeneratorConfig, denom: int = 4):
    lo, hi = cfg.value_range
    a, b = lo * denom, hi * denom
    lo_i, hi_i = int(a.__ceil__()), int(b.__floor__())
    if lo_i > hi_i:
        return lo
    return Fraction(_int(rng, lo_i, hi_i), denom)


def gen_terminal(finest: Partition, space: SampleSpace, cfg: GeneratorConfig, rng, dim=None) -> SimpleFunction:
    dim = cfg.dim if dim is None else dim
    if dim is None:
        vals = tuple(random_value(rng, cfg) for _ in finest.blocks)
    else:
        vals = tuple(tuple(random_value(rng, cfg) for _ in range(dim)) for _ in finest.blocks)
    return SimpleFunction(space, finest, vals)


def gen_martingale(filt, cfg: GeneratorConfig, rng, dim=None):
    """The martingale closed by a random rational terminal function."""
    f = gen_terminal(filt.finest, filt.space, cfg, rng, dim)
    return martingale_from_terminal(f, filt)


def gen_weighted_system(rng, points_max: int = 4, A_max: int = 2, B_max: int = 2, kappas=None) -> WeightedSystem:
    n = _int(rng, 1, points_max)
    space = gen_space(rng, n)
    A = tuple(range(_int(rng, 1, A_max)))
    B = tuple(range(_int(rng, 1, B_max)))
    fields = {a: random_partition(rng, space.points) for a in A}
    w, f = {}, {}
    for a in A:
        for b in B:
            w[a, b] = SimpleFunction.from_points(space, {p: Fraction(_int(rng, 0, 6), 6) for p in space.points})
            part = fields[a]
            f[a, b] = SimpleFunction(space, part, tuple(Fraction(_int(rng, -8, 8), 4) for _ in part.blocks))
    kappas = kappas or (Fraction(1, 4), Fraction(1, 2), Fraction(1))
    kappa = kappas[_int(rng, 0, len(kappas) - 1)]
    return WeightedSystem(space, A, B, fields, w, f, kappa, Fraction(1, len(A)))
