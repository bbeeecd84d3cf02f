"""Square functions, Hardy-space norms and the Garsia norm.

Everything up to and including the squared functions is exact; only the
final square roots and their expectations are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .filtration import Martingale1P, Martingale2P, differences, f_minus
from .measure import SimpleFunction, cond_expect


def expected_root(f2: SimpleFunction) -> float:
    """E[sqrt(f2)] for a non-negative rational simple function."""
    space = f2.space
    return math.fsum(
        float(space.prob(b)) * math.sqrt(v) for b, v in zip(f2.partition.blocks, f2.values)
    )


def _zero(space):
    return SimpleFunction.constant(space, 0)


@dataclass(frozen=True, eq=False)
class SquareFunctions:
    """Squared square functions (exact) and their L¹ norms (float).

    ``s2``/``sigma2`` sum over every index starting at (1, 1); the
    ``*_displayed`` variants start the inner sum at j = 2.  In one
    parameter ``sigma2`` and the displayed variants are ``None``.
    """

    S2: SimpleFunction
    s2: SimpleFunction
    sigma2: SimpleFunction | None
    s2_displayed: SimpleFunction | None
    sigma2_displayed: SimpleFunction | None
    energy: Fraction
    garsia: Fraction

    @property
    def H1_S(self) -> float:
        return expected_root(self.S2)

    @property
    def H1_s(self) -> float:
        return expected_root(self.s2)

    @property
    def H1_sigma(self) -> float | None:
        return None if self.sigma2 is None else expected_root(self.sigma2)

    def norms(self) -> dict:
        out = {
            "H1_S": self.H1_S,
            "H1_s": self.H1_s,
            "garsia": self.garsia,
            "energy": self.energy,
        }
        if self.sigma2 is not None:
            out["H1_sigma"] = self.H1_sigma
            out["H1_s_displayed"] = expected_root(self.s2_displayed)
            out["H1_sigma_displayed"] = expected_root(self.sigma2_displayed)
        return out


def square_functions(m) -> SquareFunctions:
    space = m.filtration.space
    if isinstance(m, Martingale1P):
        levels = m.filtration.levels
        S2 = s2 = _zero(space)
        energy = garsia = Fraction(0)
        for n, d in enumerate(differences(m), start=1):
            d2 = d.square()
            S2 = S2 + d2
            s2 = s2 + cond_expect(d2, levels[n - 1])
            energy += d2.integral()
            garsia += d.abs().integral()
        return SquareFunctions(S2, s2, None, None, None, energy, garsia)
    if not isinstance(m, Martingale2P):
        raise TypeError("expected a martingale")
    bf = m.filtration
    S2 = s2 = sig2 = s2d = sig2d = _zero(space)
    energy = garsia = Fraction(0)
    for (i, j), d in differences(m).items():
        d2 = d.square()
        cs = cond_expect(d2, bf.grid[i - 1][j - 1])
        cm = cond_expect(d2, f_minus(bf, i, j))
        S2 = S2 + d2
        s2 = s2 + cs
        sig2 = sig2 + cm
        if j >= 2:
            s2d = s2d + cs
            sig2d = sig2d + cm
        energy += d2.integral()
        garsia += d.abs().integral()
    return SquareFunctions(S2, s2, sig2, s2d, sig2d, energy, garsia)


def garsia_norm(m) -> Fraction:
    """sum over all differences of E|Δ|."""
    d = differences(m)
    items = d.values() if isinstance(d, dict) else d
    return sum((x.abs().integral() for x in items), Fraction(0))
