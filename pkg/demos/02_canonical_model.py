"""Canonical product models and the measure-preserving map back to the
original filtration.

Run with ``python3 demos/02_canonical_model.py``.
"""

from fractions import Fraction as Q

from forge import Filtration1P, Partition, SampleSpace, SimpleFunction
from forge.embedding import (
    build_canonical_1p,
    build_canonical_2p,
    equal_law,
    evaluate_chain,
    martingale_law,
    preimage_measure,
    pullback_martingale,
)
from forge.filtration import martingale_from_terminal
from forge.harness import generators as gen
from forge.harness.rng import stream

# One parameter: four equally likely points revealed in pairs, then singly.
space = SampleSpace.uniform((1, 2, 3, 4))
filt = Filtration1P(space, (Partition.trivial(space.points), Partition([{1, 2}, {3, 4}]), Partition.discrete(space.points)))
model, morph = build_canonical_1p(filt)
print(f"one-parameter model: {len(model.space)} atoms, each of weight {model.space.weights[0]}")
print("coordinates:", model.product.labels)
for x in model.space.points[:3]:
    print("  ", x, "->", sorted(morph.image(x)))
cert = morph.certificate
print("preimages measurable and measure preserved:", cert.verdict)

f = SimpleFunction.from_points(space, {1: 1, 2: -1, 3: 3, 4: -3})
m = martingale_from_terminal(f, filt)
print("pulled-back martingale has the same joint law:", equal_law(martingale_law(m), martingale_law(pullback_martingale(morph, m))))

# Two parameters: a random commuting grid.  The chain of atoms picked by
# each product point is intersected into a single atom of the finest level.
cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, branching_max=3)
k = 0
while True:
    rng = stream(2024, k)
    bf = gen.gen_bifiltration(cfg, rng)
    if len(bf.space) >= 5 and (bf.N, bf.M) == (2, 2):
        break
    k += 1
model2, morph2 = build_canonical_2p(bf)
print(f"\ntwo-parameter model over {len(bf.space)} points: {len(model2.space)} product atoms")
x = model2.space.points[0]
print("first product point", x, "lands on", sorted(evaluate_chain(model2, x)))

# The preimage of each atom factors through the chain, one coordinate at a
# time; every partial product equals the measure of the intermediate atom.
for U in bf.finest.blocks[:3]:
    pm = preimage_measure(model2, U)
    steps = ", ".join(f"{k}: {v[0]}" for k, v in sorted(pm.intermediates.items()))
    print(f"atom {sorted(U)}: mass {pm.value} (target {pm.target}) via {steps}")

m2 = gen.gen_martingale(bf, cfg, rng)
same = equal_law(martingale_law(m2), martingale_law(pullback_martingale(morph2, m2)))
print("two-parameter pullback keeps the joint law:", same)
print("empty-image mass:", morph2.certificate.empty_mass, "(zero on commuting grids)")
print("total mass check:", sum(model2.space.weights) == Q(1))
