"""Finite product probability spaces with labelled coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import prod

from .errors import CapExceededError
from .measure import Partition, SampleSpace

DEFAULT_CAP = 10**6


@dataclass(frozen=True, eq=False)
class ProductSpace:
    """⊗ factors[k], with points the tuples of factor points in label order.

    Points are enumerated lexicographically: the first coordinate varies
    slowest, and each coordinate follows its factor's point order.
    """

    labels: tuple
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.labels) != len(self.factors):
            raise ValueError("one factor per label is required")

    @property
    def size(self) -> int:
        return prod(len(f) for f in self.factors)

    @cached_property
    def position(self) -> dict:
        return {lab: k for k, lab in enumerate(self.labels)}

    @cached_property
    def space(self) -> SampleSpace:
        points, weights = [()], [Fraction(1)]
        for f in self.factors:
            points = [p + (x,) for p in points for x in f.points]
            weights = [w * v for w in weights for v in f.weights]
        return SampleSpace(tuple(points), tuple(weights))

    def coordinates(self, x, labels) -> tuple:
        pos = self.position
        return tuple(x[pos[lab]] for lab in labels)

    def coord_partition(self, labels) -> Partition:
        """The sigma-field generated by the coordinates in ``labels``."""
        pos = [self.position[lab] for lab in labels]
        return Partition.by_key(self.space.points, lambda x: tuple(x[k] for k in pos))

    def doubled(self, tags=("x", "y")) -> "ProductSpace":
        """Product of the space with an independent copy of itself."""
        a, b = tags
        return ProductSpace(
            tuple((a, lab) for lab in self.labels) + tuple((b, lab) for lab in self.labels),
            self.factors + self.factors,
        )


def check_cap(count: int, cap: int | None):
    if cap is not None and count > cap:
        raise CapExceededError(count, cap)
