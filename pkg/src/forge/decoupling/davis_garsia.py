"""Numerical decomposition f = g + h minimising ‖g‖_{H¹_σ} + Σ E|Δ_ij h|.

Each difference Δ_ij(f) is split atom by atom: on every atom a of F_ij where
Δ_ij ≠ 0 a fraction θ ∈ [0, 1] goes to φ_ij = θ Δ_ij and the rest to
ψ_ij = (1 − θ) Δ_ij.  Both parts are re-projected with

    D_ij u = E[u|F_ij] − E[u|F_{i-1,j}] − E[u|F_{i,j-1}] + E[u|F_{i-1,j-1}],

and g_ij = Σ_{m≤i, n≤j} D_mn φ_mn, h = f − g.  Under F4 the D_ij are
commuting orthogonal projections, so Δ_ij(g) = D_ij φ_ij and the objective

    E (Σ_ij E[|D_ij φ_ij|² | F⁻_ij])^{1/2} + Σ_ij E|Δ_ij − D_ij φ_ij|

is convex in θ.  It is minimised by smoothing both non-smooth terms
(√(v + μ²)), running bounded L-BFGS-B for a decreasing sequence of μ, and
keeping the best of several starts and the two endpoint decompositions
(g = f and g = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.optimize import minimize

from ..errors import CapExceededError, F4ViolationError
from ..filtration import (
    Martingale2P,
    check_f4,
    d_operator,
    differences,
    f_minus,
    martingale_from_terminal,
)
from ..measure import SimpleFunction
from ..square import garsia_norm, square_functions
from .doob import projection_matrix

MU_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10)
MAX_ITERATIONS = 10**5
REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SplitProblem:
    """Float data of the objective for one martingale.

    ``coords`` lists (i, j, atom index) per split coordinate; ``U[ij]`` maps
    that index's split fractions to D_ij φ_ij; ``C[ij]`` is E[· | F⁻_ij];
    ``d[ij]`` is D_ij Δ_ij.
    """

    p: np.ndarray
    coords: tuple
    slices: dict
    U: dict
    C: dict
    d: dict

    @property
    def dim(self) -> int:
        return len(self.coords)

    def objective(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        v = np.zeros_like(self.p)
        l1 = 0.0
        for ij, U in self.U.items():
            u = U @ theta[self.slices[ij]]
            v += self.C[ij] @ (u * u)
            l1 += float(self.p @ np.abs(self.d[ij] - u))
        return float(self.p @ np.sqrt(np.maximum(v, 0.0))) + l1

    def smoothed(self, theta, mu):
        v = np.zeros_like(self.p)
        us = {}
        for ij, U in self.U.items():
            u = U @ theta[self.slices[ij]]
            us[ij] = u
            v += self.C[ij] @ (u * u)
        s = np.sqrt(v + mu * mu)
        value = float(self.p @ s)
        grad = np.zeros_like(theta)
        w = self.p / s
        for ij, U in self.U.items():
            u = us[ij]
            r = self.d[ij] - u
            t = np.sqrt(r * r + mu * mu)
            value += float(self.p @ t)
            grad[self.slices[ij]] += U.T @ (u * (self.C[ij].T @ w)) - U.T @ (self.p * r / t)
        return value, grad


def split_problem(m: Martingale2P) -> SplitProblem:
    bf = m.filtration
    space = bf.space
    idx = space.index
    n = len(space)
    p = np.array([float(w) for w in space.weights])
    proj = {}

    def P(i, j):
        if (i, j) not in proj:
            proj[i, j] = projection_matrix(space, bf.grid[i][j])
        return proj[i, j]

    coords, slices, U, C, d = [], {}, {}, {}, {}
    for (i, j), delta in differences(m).items():
        cols = []
        start = len(coords)
        for a, (block, val) in enumerate(zip(delta.partition.blocks, delta.values)):
            if val == 0:
                continue
            e = np.zeros(n)
            for pt in block:
                e[idx[pt]] = float(val)
            cols.append(e)
            coords.append((i, j, a))
        if not cols:
            continue
        D = P(i, j) - P(i - 1, j) - P(i, j - 1) + P(i - 1, j - 1)
        E = np.stack(cols, axis=1)
        slices[i, j] = slice(start, len(coords))
        U[i, j] = D @ E
        C[i, j] = projection_matrix(space, f_minus(bf, i, j))
        d[i, j] = D @ E.sum(axis=1)
    return SplitProblem(p, tuple(coords), slices, U, C, d)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """f = g + h with the objective of the split and the reference values.

    ``objective`` is ‖g‖_{H¹_σ} + Σ E|Δ_ij h| evaluated on the exact g and h.
    ``objective_g_is_f`` = ‖f‖_{H¹_σ} and ``objective_h_is_f`` = Σ E|Δ_ij f|
    are the two endpoint decompositions; ``H1_S`` = ‖f‖_{H¹_S}.
    """

    f: Martingale2P
    g: Martingale2P
    h: Martingale2P
    theta: dict
    objective: float
    objective_g_is_f: float
    objective_h_is_f: float
    H1_S: float
    trace: tuple = field(default=())

    @property
    def ratio(self) -> float:
        """objective / ‖f‖_{H¹_S} (1 for the zero martingale)."""
        if self.H1_S == 0:
            return 1.0
        return self.objective / self.H1_S


def _rational(t: float) -> Fraction:
    if t <= 1e-12:
        return Fraction(0)
    if t >= 1 - 1e-12:
        return Fraction(1)
    return Fraction(t).limit_denominator(10**6)


def decomposition_from_theta(m: Martingale2P, theta: dict, trace=()) -> Decomposition:
    """Exact g and h for split fractions ``theta[(i, j, atom)]`` (missing = 0)."""
    bf = m.filtration
    space = bf.space
    g_top = SimpleFunction.constant(space, 0)
    for (i, j), delta in differences(m).items():
        vals = tuple(Fraction(theta.get((i, j, a), 0)) * v for a, v in enumerate(delta.values))
        phi = SimpleFunction(space, delta.partition, vals)
        g_top = g_top + d_operator(bf, phi, i, j)
    g = martingale_from_terminal(g_top.on(bf.finest), bf)
    h = Martingale2P(bf, [[m.term(i, j) - g.term(i, j) for j in range(1, m.M + 1)] for i in range(1, m.N + 1)])
    sq_g = square_functions(g)
    sq_f = square_functions(m)
    objective = sq_g.H1_sigma + float(garsia_norm(h))
    return Decomposition(m, g, h, dict(theta), objective, sq_f.H1_sigma, float(sq_f.garsia), sq_f.H1_S, tuple(trace))


def _minimise(problem: SplitProblem, x0, trace, budget):
    x = np.array(x0, dtype=float)
    bounds = [(0.0, 1.0)] * problem.dim
    prev = problem.objective(x)
    for mu in MU_SCHEDULE:
        if budget[0] <= 0:
            break
        res = minimize(
            problem.smoothed,
            x,
            args=(mu,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": min(5000, budget[0]), "ftol": 1e-15, "gtol": 1e-13},
        )
        budget[0] -= res.nit
        x = np.clip(res.x, 0.0, 1.0)
        cur = problem.objective(x)
        trace.append((mu, cur, int(res.nit)))
        if abs(prev - cur) <= REL_TOL * max(abs(cur), 1e-300) and mu < 1e-4:
            break
        prev = cur
    return x


def davis_garsia_decompose(m: Martingale2P, seed: int = 0, starts: int = 4, verbose: bool = False) -> Decomposition:
    """Minimise the split objective; deterministic for a given ``seed``.

    Starts: θ = 0, θ = 1, θ = 1/2 and ``starts`` seeded uniform points.  The
    iteration budget over all starts is 10⁵ L-BFGS-B iterations.  With
    ``verbose`` the returned decomposition carries the per-μ trace.
    """
    report = check_f4(m.filtration, direct=False)
    if not report.holds:
        raise F4ViolationError(report.witness)
    problem = split_problem(m)
    k = problem.dim
    if k == 0:
        return decomposition_from_theta(m, {})
    rng = np.random.default_rng(seed)
    inits = [np.zeros(k), np.ones(k), np.full(k, 0.5)] + [rng.uniform(size=k) for _ in range(starts)]
    budget = [MAX_ITERATIONS]
    candidates = [np.zeros(k), np.ones(k)]
    trace = []
    for s, x0 in enumerate(inits):
        steps = []
        candidates.append(_minimise(problem, x0, steps, budget))
        trace.extend((s,) + t for t in steps)
    scored = []
    for x in candidates:
        theta = np.array([float(_rational(t)) for t in x])
        scored.append((problem.objective(theta), len(scored), x))
    _, _, best = min(scored)
    theta = {c: _rational(t) for c, t in zip(problem.coords, best)}
    return decomposition_from_theta(m, theta, trace if verbose else ())


# -- brute-force oracle ----------------------------------------------------------


def _cond_matrix(labels: np.ndarray, p: np.ndarray) -> np.ndarray:
    """E[· | σ(labels)] as a matrix, built from block masses."""
    mass = np.bincount(labels, weights=p)
    same = labels[:, None] == labels[None, :]
    return same * (p[None, :] / mass[labels][:, None])


@dataclass(frozen=True, eq=False)
class OracleResult:
    objective: float
    theta: dict
    grid: tuple
    evaluated: int


def davis_garsia_oracle(m: Martingale2P, grid_steps: int = 21, cap: int = 10**7, chunk: int = 4096) -> OracleResult:
    """Exhaustive search over split fractions {0, 1/(K-1), ..., 1} per coordinate."""
    bf = m.filtration
    space = bf.space
    points = space.points
    p = np.array([float(w) for w in space.weights])
    n = len(points)

    def labels(part):
        lab = part.label
        return np.array([lab[q] for q in points])

    cond = {}

    def E(i, j):
        if (i, j) not in cond:
            cond[i, j] = _cond_matrix(labels(bf.grid[i][j]), p)
        return cond[i, j]

    pieces = []
    coords = []
    for (i, j), delta in differences(m).items():
        D = E(i, j) - E(i - 1, j) - E(i, j - 1) + E(i - 1, j - 1)
        Fm = _cond_matrix(labels(f_minus(bf, i, j)), p)
        dvec = np.array([float(delta(q)) for q in points])
        lab = labels(delta.partition)
        for a, v in enumerate(delta.values):
            if v != 0:
                coords.append((i, j, a))
                pieces.append(((i, j), D @ np.where(lab == a, dvec, 0.0)))
        if any(v != 0 for v in delta.values):
            pieces.append(((i, j, "fixed"), (D, Fm, D @ dvec)))
    dim = len(coords)
    if grid_steps < 2:
        raise ValueError("grid_steps must be at least 2")
    if grid_steps**dim > cap:
        raise CapExceededError(grid_steps**dim, cap, "oracle grid size")
    grid = tuple(Fraction(k, grid_steps - 1) for k in range(grid_steps))
    if dim == 0:
        return OracleResult(0.0, {}, grid, 1)
    vals = np.array([float(g) for g in grid])
    cols = {}
    info = {}
    for key, data in pieces:
        if len(key) == 3:
            info[key[:2]] = data
    for k, (key, vec) in enumerate(pc for pc in pieces if len(pc[0]) == 2):
        cols.setdefault(key, []).append((k, vec))
    best, best_theta, count = math.inf, None, 0
    combos = product(range(grid_steps), repeat=dim)
    while True:
        block = np.array(list(_take(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        T = vals[block]  # rows: candidate θ vectors
        v = np.zeros((T.shape[0], n))
        l1 = np.zeros(T.shape[0])
        for ij, entries in cols.items():
            _, Fm, dD = info[ij]
            u = sum(T[:, [k]] * vec[None, :] for k, vec in entries)
            v += (u * u) @ Fm.T
            l1 += np.abs(dD[None, :] - u) @ p
        obj = np.sqrt(np.maximum(v, 0.0)) @ p + l1
        k = int(np.argmin(obj))
        if obj[k] < best:
            best = float(obj[k])
            best_theta = {c: grid[t] for c, t in zip(coords, block[k])}
        count += T.shape[0]
    return OracleResult(best, best_theta, grid, count)


def _take(it, k):
    for _ in range(k):
        try:
            yield next(it)
        except StopIteration:
            return
