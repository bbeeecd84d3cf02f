"""Concave-function ratios between a sequence and its tangent copy, the S/σ
harness and the orthogonality identities on canonical grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..embedding import CanonicalModel2P
from ..filtration import Martingale1P, Martingale2P, differences, f_minus
from ..measure import SimpleFunction, cond_expect
from ..square import square_functions
from .tangent import TangentPair, tangent_copy


@dataclass(frozen=True)
class TabulatedPhi:
    """Piecewise-linear φ through ``points`` = ((t_0=0, φ_0), (t_1, φ_1), ...).

    It must be non-decreasing and concave on the breakpoints (slopes do not
    increase); beyond the last breakpoint it stays constant.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple((Fraction(t), Fraction(v)) for t, v in self.points)
        object.__setattr__(self, "points", pts)
        if not pts or pts[0][0] != 0:
            raise ValueError("tabulated φ must start at t = 0")
        if pts[0][1] < 0:
            raise ValueError("tabulated φ must be non-negative")
        slopes = []
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValueError("breakpoints must increase")
            slopes.append((v1 - v0) / (t1 - t0))
        if any(s < 0 for s in slopes):
            raise ValueError("tabulated φ is not increasing")
        if any(b > a for a, b in zip(slopes, slopes[1:])):
            raise ValueError("tabulated φ is not concave on its breakpoints")

    def __call__(self, t) -> float:
        t = Fraction(t)
        pts = self.points
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t <= t1:
                return float(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
        return float(pts[-1][1])


def make_phi(kind):
    """``"sqrt"``, ``"log1p"``, ``"capped:c"`` (t ↦ min(t, c)), or a callable/TabulatedPhi."""
    if callable(kind):
        return kind
    if kind == "sqrt":
        return lambda t: math.sqrt(t)
    if kind == "log1p":
        return lambda t: math.log1p(t)
    if isinstance(kind, str) and kind.startswith("capped:"):
        c = Fraction(kind.split(":", 1)[1])
        if c <= 0:
            raise ValueError("cap must be positive")
        return lambda t: float(min(Fraction(t), c))
    raise ValueError(f"unknown φ {kind!r}")


def expected_phi(f: SimpleFunction, phi) -> float:
    """E φ(f), summed over the exact law of f in increasing value order."""
    law: dict = {}
    for b, v in zip(f.partition.blocks, f.values):
        law[v] = law.get(v, 0) + f.space.prob(b)
    return math.fsum(float(p) * phi(v) for v, p in sorted(law.items()))


@dataclass(frozen=True, eq=False)
class RatioResult:
    lhs: float
    rhs: float
    ratio: float
    tangent: TangentPair


def _ratio(a: float, b: float) -> float:
    if a == b:
        return 1.0
    return math.inf if b == 0 else a / b


def decoupling_ratio(model_or_pair, fs=None, phi="sqrt", mode: str = "two-stage") -> RatioResult:
    """E φ(f_1 + ... + f_n) against E φ(g_1 + ... + g_n) for non-negative f.

    Accepts a canonical model plus a sequence, or a ready :class:`TangentPair`.
    ``ratio`` is lhs/rhs, and 1 when both sides agree (including 0 = 0).
    """
    tp = model_or_pair if isinstance(model_or_pair, TangentPair) else None
    if tp is None:
        tp = tangent_copy(model_or_pair, fs, mode=mode)
    for key, f in tp.original.items():
        if any(v < 0 for v in f.values):
            raise ValueError(f"term {key} takes negative values")
    phi = make_phi(phi)
    src = tp.model.space
    total = SimpleFunction.constant(src, 0)
    for f in tp.original.values():
        total = total + f
    tilde = SimpleFunction.constant(tp.doubled_space, 0)
    for g in tp.tangent.values():
        tilde = tilde + g
    lhs, rhs = expected_phi(total, phi), expected_phi(tilde, phi)
    return RatioResult(lhs, rhs, _ratio(lhs, rhs), tp)


@dataclass(frozen=True)
class SSigmaResult:
    """‖S(f)‖₁ against ‖σ(f)‖₁ (two parameters) or ‖s(f)‖₁ (one parameter)."""

    S: float
    other: float
    ratio: float
    name: str


def s_sigma_harness(m) -> SSigmaResult:
    sq = square_functions(m)
    if isinstance(m, Martingale2P):
        return SSigmaResult(sq.H1_S, sq.H1_sigma, _ratio(sq.H1_S, sq.H1_sigma), "sigma")
    if isinstance(m, Martingale1P):
        return SSigmaResult(sq.H1_S, sq.H1_s, _ratio(sq.H1_S, sq.H1_s), "s")
    raise TypeError("expected a martingale")


@dataclass(frozen=True)
class OrthogonalityFailure:
    index: tuple
    kind: str  # "column", "row" or "fminus"
    point: object
    value: object


@dataclass(frozen=True)
class OrthogonalityCertificate:
    ok: bool
    failures: tuple
    checked: int

    def __bool__(self):
        return self.ok


def orthogonality_check(model: CanonicalModel2P, m: Martingale2P) -> OrthogonalityCertificate:
    """Check, exactly, for every (i, j) ≠ (1, 1) on the canonical grid:

    * integrating Δ_ij over the coordinates [1, i] × {j} gives 0 ("column");
    * integrating Δ_ij over the coordinates {i} × [1, j] gives 0 ("row");
    * E[Δ_ij² | F⁻_ij] equals the integral of Δ_ij² over coordinate (i, j)
      alone ("fminus").

    Integration over a coordinate block with the other coordinates fixed is
    the conditional expectation given the other coordinates.
    """
    prod_space = model.product
    if m.filtration.space != model.space:
        raise ValueError("martingale is not on the model space")
    labels = prod_space.labels
    failures = []
    checked = 0
    for (i, j), d in differences(m).items():
        if (i, j) == (1, 1):
            continue
        column = {(k, j) for k in range(1, i + 1)}
        row = {(i, k) for k in range(1, j + 1)}
        for kind, block in (("column", column), ("row", row)):
            ce = cond_expect(d, prod_space.coord_partition([lab for lab in labels if lab not in block]))
            checked += 1
            for p, v in zip(model.space.points, ce.pointwise):
                if v != 0:
                    failures.append(OrthogonalityFailure((i, j), kind, p, v))
                    break
        d2 = d.square()
        lhs = cond_expect(d2, f_minus(model.canonical, i, j))
        rhs = cond_expect(d2, prod_space.coord_partition([lab for lab in labels if lab != (i, j)]))
        checked += 1
        if lhs != rhs:
            p = next(p for p, a, b in zip(model.space.points, lhs.pointwise, rhs.pointwise) if a != b)
            failures.append(OrthogonalityFailure((i, j), "fminus", p, (lhs(p), rhs(p))))
    return OrthogonalityCertificate(not failures, tuple(failures), checked)
