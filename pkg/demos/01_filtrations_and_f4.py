"""Two small bifiltrations: one that commutes and one that does not.

Run with ``python3 demos/01_filtrations_and_f4.py``.
"""

from fractions import Fraction as Q

from forge import BiFiltration, Partition, SampleSpace, SimpleFunction
from forge.filtration import check_f4, differences, martingale_from_terminal
from forge.square import square_functions

# Two fair bits.  Row index reveals the first bit, column index the second.
bits = ((0, 0), (0, 1), (1, 0), (1, 1))
space = SampleSpace.uniform(bits)
triv = Partition.trivial(bits)
first = Partition.by_key(bits, lambda p: p[0])
second = Partition.by_key(bits, lambda p: p[1])
w2 = BiFiltration.from_interior(space, [[triv, second], [first, Partition.discrete(bits)]])

report = check_f4(w2)
print("independent bits, F4 holds:", report.holds)

# Three points with crossing partitions: the information in the two
# directions is not conditionally independent.
tri = SampleSpace.uniform((0, 1, 2))
w3 = BiFiltration.from_interior(
    tri,
    [[Partition.trivial(tri.points), Partition([{0, 1}, {2}])],
     [Partition([{0}, {1, 2}]), Partition.discrete(tri.points)]],
)
report = check_f4(w3)
w = report.witness
print("crossing partitions, F4 holds:", report.holds)
print(f"  witness at {w.index}: P(B∩C|A) = {w.lhs} but P(B|A)P(C|A) = {w.rhs}")
print(f"  A = {sorted(w.given)}, B = {sorted(w.first)}, C = {sorted(w.second)}")

# A martingale on the commuting grid, its rectangle differences and the
# three square functions.  Their second moments agree exactly.
f = SimpleFunction.from_points(space, {(0, 0): 3, (0, 1): -1, (1, 0): 1, (1, 1): Q(-1, 2)})
m = martingale_from_terminal(f, w2)
for ij, d in sorted(differences(m).items()):
    print(f"Δ{ij}:", "  ".join(f"{p}: {v}" for p, v in zip(bits, d.pointwise)))
sq = square_functions(m)
print("E[S²] =", sq.S2.integral(), " E[s²] =", sq.s2.integral(), " E[σ²] =", sq.sigma2.integral())
print(f"‖f‖ in H¹ via S, s, σ: {sq.H1_S:.6f}, {sq.H1_s:.6f}, {sq.H1_sigma:.6f}")
