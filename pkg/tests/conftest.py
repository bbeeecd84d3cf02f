"""Shared small worlds used across the tests.

w1: uniform on {1, 2, 3, 4}, levels trivial -> pairs -> singletons.
w2: two fair bits; F_{2,1} = σ(bit1), F_{1,2} = σ(bit2), F_{2,2} discrete.
w3: uniform on {0, 1, 2} with crossing partitions at (2,1) and (1,2).
"""

import sys
from fractions import Fraction as Q

import pytest

from forge.filtration import BiFiltration, Filtration1P
from forge.measure import Partition, SampleSpace

BITS = ((0, 0), (0, 1), (1, 0), (1, 1))


def make_w1():
    space = SampleSpace.uniform((1, 2, 3, 4))
    levels = (
        Partition.trivial(space.points),
        Partition([{1, 2}, {3, 4}]),
        Partition.discrete(space.points),
    )
    return Filtration1P(space, levels)


def make_w2():
    space = SampleSpace.uniform(BITS)
    triv = Partition.trivial(BITS)
    bit1 = Partition.by_key(BITS, lambda p: p[0])
    bit2 = Partition.by_key(BITS, lambda p: p[1])
    return BiFiltration.from_interior(space, [[triv, bit2], [bit1, Partition.discrete(BITS)]])


def make_w3():
    space = SampleSpace.uniform((0, 1, 2))
    triv = Partition.trivial(space.points)
    return BiFiltration.from_interior(
        space,
        [[triv, Partition([{0, 1}, {2}])], [Partition([{0}, {1, 2}]), Partition.discrete(space.points)]],
    )


def make_tensor(a_weights, b_weights):
    """Tensor of two two-step coin filtrations with the given factor weights."""
    pa = tuple(range(len(a_weights)))
    pb = tuple(range(len(b_weights)))
    pts = tuple((x, y) for x in pa for y in pb)
    space = SampleSpace(pts, tuple(Q(a_weights[x]) * Q(b_weights[y]) for x, y in pts))
    triv = Partition.trivial(pts)
    fa = Partition.by_key(pts, lambda p: p[0])
    fb = Partition.by_key(pts, lambda p: p[1])
    return BiFiltration.from_interior(space, [[triv, fb], [fa, Partition.discrete(pts)]])


@pytest.fixture
def w1():
    return make_w1()


@pytest.fixture
def w2():
    return make_w2()


@pytest.fixture
def w3():
    return make_w3()


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[n])
