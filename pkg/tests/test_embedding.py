from collections import Counter
from fractions import Fraction as Q
from itertools import product

import pytest

from forge.embedding import (
    Morphism,
    build_canonical_1p,
    build_canonical_2p,
    count_atoms_1p,
    count_atoms_2p,
    equal_law,
    evaluate_brute,
    evaluate_chain,
    joint_law,
    martingale_law,
    preimage_measure,
    pullback,
    pullback_martingale,
    verify_morphism,
)
from forge.errors import (
    CapExceededError,
    F4ViolationError,
    MorphismNotVerifiedError,
    NotAdaptedError,
    SpaceMismatchError,
)
from forge.filtration import BiFiltration, Filtration1P, check_f4, f_minus, is_martingale, martingale_from_terminal
from forge.harness import generators as gen
from forge.harness.rng import stream
from forge.measure import Partition, SampleSpace, SimpleFunction

from conftest import BITS


# -- oracles: enumerate assignments as maps atom -> child atom -------------------------


def _assignments(space, coarse, fine):
    """Every way to pick a child of each coarse atom, with its product weight."""
    options = []
    for a in coarse.blocks:
        kids = [b for b in fine.blocks if b <= a]
        options.append([(a, b, space.prob(b) / space.prob(a)) for b in kids])
    for choice in product(*options):
        w = Q(1)
        for _, _, p in choice:
            w *= p
        yield {a: b for a, b, _ in choice}, w


def oracle_1p(filt):
    """Multiset of (image atom, weight) over all (A_0, φ_1, ..., φ_N)."""
    space, levels = filt.space, filt.levels
    out = Counter()
    pieces = [list(_assignments(space, levels[n - 1], levels[n])) for n in range(1, filt.N + 1)]
    for a0 in levels[0].blocks:
        for combo in product(*pieces):
            atom, w = a0, space.prob(a0)
            for phi, p in combo:
                atom = phi[atom]
                w *= p
            out[atom, w] += 1
    return out


def oracle_2p(bf):
    """Multiset of (⋂_ij ⋃_A B^ij_A or empty, weight) over all assignments."""
    space = bf.space
    idx = bf.interior()
    pieces = [list(_assignments(space, f_minus(bf, i, j), bf.grid[i][j])) for i, j in idx]
    out = Counter()
    for combo in product(*pieces):
        img = set(space.points)
        w = Q(1)
        for phi, p in combo:
            img &= set().union(*phi.values())
            w *= p
        out[frozenset(img), w] += 1
    return out


def model_multiset(morph):
    out = Counter()
    for x, w in zip(morph.model.space.points, morph.model.space.weights):
        img = morph.image(x)
        out[img if img is not None else frozenset(), w] += 1
    return out


def tensor3(a=(Q(1, 2), Q(1, 4), Q(1, 4)), b=(Q(1, 3), Q(2, 3))):
    """Tensor of a 3-level filtration on 3 points and a 2-level one on 2 points."""
    pa, pb = tuple(range(len(a))), tuple(range(len(b)))
    pts = tuple((x, y) for x in pa for y in pb)
    space = SampleSpace(pts, tuple(a[x] * b[y] for x, y in pts))
    fa = [lambda p: 0, lambda p: p[0] == 0, lambda p: p[0]]
    fb = [lambda p: 0, lambda p: p[1]]
    interior = [[Partition.by_key(pts, lambda p, i=i, j=j: (fa[i](p), fb[j](p))) for j in range(2)] for i in range(3)]
    return BiFiltration.from_interior(space, interior)


# -- one parameter ---------------------------------------------------------------------


def test_fair_coin_single_refinement():
    s = SampleSpace.uniform(("H", "T"))
    filt = Filtration1P(s, (Partition.trivial(s.points), Partition.discrete(s.points)))
    model, morph = build_canonical_1p(filt)
    assert len(model.space) == 2 and set(model.space.weights) == {Q(1, 2)}
    assert {morph.image(x) for x in model.space.points} == {frozenset({"H"}), frozenset({"T"})}


def test_w1_dyadic(w1):
    model, morph = build_canonical_1p(w1)
    assert len(model.space) == count_atoms_1p(w1) == 8
    assert set(model.space.weights) == {Q(1, 8)}
    pre = [x for x in model.space.points if morph.image(x) == frozenset({1})]
    assert len(pre) == 2 and sum(model.space.weight_of[x] for x in pre) == Q(1, 4)
    assert model_multiset(morph) == oracle_1p(w1)
    assert verify_morphism(morph).verdict


def test_all_trivial_levels():
    s = SampleSpace.uniform((1, 2, 3))
    filt = Filtration1P(s, (Partition.trivial(s.points),) * 3)
    model, morph = build_canonical_1p(filt)
    assert len(model.space) == 1
    assert morph.image(model.space.points[0]) == s.full


def test_cap_reports_count(w1):
    with pytest.raises(CapExceededError) as e:
        build_canonical_1p(w1, cap=7)
    assert e.value.count == 8 and e.value.cap == 7


@pytest.mark.parametrize("k", range(40))
def test_random_1p_matches_oracle(k):
    rng = stream(31, k)
    cfg = gen.GeneratorConfig(points_max=5, N=3, branching_max=3)
    filt = gen.gen_filtration1p(cfg, rng)
    model, morph = build_canonical_1p(filt)
    assert model_multiset(morph) == oracle_1p(filt)
    assert sum(model.space.weights) == 1
    assert all(morph.image_map[x] is not None for x in model.space.points)
    cert = morph.certificate
    assert cert.verdict and cert.empty_mass == 0
    m = gen.gen_martingale(filt, cfg, rng)
    pulled = pullback_martingale(morph, m)
    assert is_martingale(pulled).ok
    assert equal_law(martingale_law(m), martingale_law(pulled))


# -- two parameters -----------------------------------------------------------------------


def test_one_by_one_grid_is_identity_on_atoms():
    s = SampleSpace(("a", "b", "c"), (Q(1, 2), Q(1, 3), Q(1, 6)))
    part = Partition([{"a"}, {"b", "c"}])
    bf = BiFiltration.from_interior(s, [[part]])
    model, morph = build_canonical_2p(bf)
    assert len(model.space) == 2
    assert sorted((morph.image(x), w) for x, w in zip(model.space.points, model.space.weights)) == sorted(
        (b, s.prob(b)) for b in part.blocks
    )
    for x in model.space.points:
        assert evaluate_chain(model, x) == morph.image(x)
    for U in part.blocks:
        assert preimage_measure(model, U).value == s.prob(U)


def test_w2_model(w2):
    model, morph = build_canonical_2p(w2)
    assert len(model.space) == count_atoms_2p(w2) == 4
    assert set(model.space.weights) == {Q(1, 4)}
    images = [morph.image(x) for x in model.space.points]
    assert sorted(images, key=sorted) == [frozenset({p}) for p in BITS]
    assert model_multiset(morph) == oracle_2p(w2)
    assert check_f4(model.canonical).holds


def test_w2_chain_example(w2):
    model, _ = build_canonical_2p(w2)
    pos = model.product.position
    bit1_0 = w2.grid[2][1].index_of({(0, 0), (0, 1)})
    bit2_1 = w2.grid[1][2].index_of({(0, 1), (1, 1)})
    hits = [
        x for x in model.space.points if x[pos[2, 1]] == (bit1_0,) and x[pos[1, 2]] == (bit2_1,)
    ]
    assert len(hits) == 1
    assert evaluate_chain(model, hits[0]) == frozenset({(0, 1)}) == evaluate_brute(model, hits[0])


def test_w2_preimage_measure(w2):
    model, _ = build_canonical_2p(w2)
    pm = preimage_measure(model, {(0, 1)})
    assert pm.value == pm.target == Q(1, 4)
    assert {k: v[0] for k, v in pm.intermediates.items()} == {
        (1, 1): 1,
        (1, 2): Q(1, 2),
        (2, 1): Q(1, 2),
        (2, 2): Q(1, 4),
    }
    assert pm.holds
    assert pm.ratio_terms[2, 2] == 1


def test_preimage_measure_rejects_non_atoms(w2):
    model, _ = build_canonical_2p(w2)
    with pytest.raises(ValueError):
        preimage_measure(model, {(0, 0), (0, 1)})


def test_w3_refused_and_empty_images(w3):
    with pytest.raises(F4ViolationError) as e:
        build_canonical_2p(w3)
    assert (e.value.witness.lhs, e.value.witness.rhs) == (Q(1, 3), Q(2, 9))
    model, morph = build_canonical_2p(w3, require_f4=False)
    empties = [x for x in model.space.points if evaluate_chain(model, x) is None]
    assert empties
    for x in model.space.points:
        assert (evaluate_chain(model, x) or frozenset()) == evaluate_brute(model, x)
    assert model_multiset(morph) == oracle_2p(w3)
    cert = morph.certificate
    assert cert.empty_mass > 0 and not cert.measure_preserved


def test_three_level_tensor_preimages():
    bf = tensor3()
    assert check_f4(bf).holds
    model, morph = build_canonical_2p(bf)
    assert model_multiset(morph) == oracle_2p(bf)
    for U in bf.finest.blocks:
        brute = sum(w for x, w in zip(model.space.points, model.space.weights) if morph.image(x) == U)
        pm = preimage_measure(model, U)
        assert pm.value == brute == bf.space.prob(U)
        assert pm.holds
    # tensor-of-products: no empty images
    assert all(morph.image_map[x] is not None for x in model.space.points)


@pytest.mark.parametrize("k", range(40))
def test_random_2p_matches_oracle(k):
    rng = stream(37, k)
    cfg = gen.GeneratorConfig(points_max=5, N=2, M=2, branching_max=2, cap=2000)
    bf = gen.gen_bifiltration(cfg, rng)
    model, morph = build_canonical_2p(bf)
    assert model_multiset(morph) == oracle_2p(bf)
    assert morph.certificate.verdict
    assert check_f4(model.canonical).holds
    for x in model.space.points:
        assert (evaluate_chain(model, x) or frozenset()) == evaluate_brute(model, x)
    m = gen.gen_martingale(bf, cfg, rng)
    pulled = pullback_martingale(morph, m)
    assert is_martingale(pulled).ok
    assert equal_law(martingale_law(m), martingale_law(pulled))
    one = SimpleFunction.constant(bf.space, 1)
    assert pullback(morph, one, (bf.N, bf.M)) == SimpleFunction.constant(model.space, 1)


def test_two_param_cap(w2):
    with pytest.raises(CapExceededError) as e:
        build_canonical_2p(w2, cap=3)
    assert e.value.count == 4


# -- pullback and laws ------------------------------------------------------------------------


def test_pullback_constant(w1):
    model, morph = build_canonical_1p(w1)
    g = pullback(morph, SimpleFunction.constant(w1.space, 5), 0)
    assert g == SimpleFunction.constant(model.space, 5)


def test_pullback_w1_indicator(w1):
    model, morph = build_canonical_1p(w1)
    f = SimpleFunction.indicator(w1.space, {1, 2})
    g = pullback(morph, f, 1)
    ones = [x for x in model.space.points if g(x) == 1]
    # φ_1(Ω) = {1, 2} is coordinate 1 picking child 0
    assert ones == [x for x in model.space.points if x[1] == (0,)]
    assert len(ones) == 4
    assert joint_law([g]) == {(0,): Q(1, 2), (1,): Q(1, 2)}
    assert g.is_measurable(model.canonical.levels[1])


def test_pullback_errors(w1, w2):
    model, morph = build_canonical_1p(w1)
    with pytest.raises(NotAdaptedError):
        pullback(morph, SimpleFunction.indicator(w1.space, {1}), 1)
    with pytest.raises(SpaceMismatchError):
        pullback(morph, SimpleFunction.constant(w2.space, 1), 1)
    bad = Morphism(model, {x: 0 for x in model.space.points})
    with pytest.raises(MorphismNotVerifiedError):
        pullback(bad, SimpleFunction.constant(w1.space, 1), 0)


def test_w2_joint_law(w2):
    f = SimpleFunction.from_points(w2.space, {(0, 0): 1, (0, 1): -2, (1, 0): 3, (1, 1): 0})
    m = martingale_from_terminal(f, w2)
    _, morph = build_canonical_2p(w2)
    pulled = pullback_martingale(morph, m)
    assert equal_law(martingale_law(m), martingale_law(pulled))


def test_w1_pair_law(w1):
    f = SimpleFunction.from_points(w1.space, {1: 1, 2: -1, 3: 2, 4: -2})
    m = martingale_from_terminal(f, w1)
    _, morph = build_canonical_1p(w1)
    assert equal_law(martingale_law(m), martingale_law(pullback_martingale(morph, m)))


def test_joint_law_basics(w1):
    c = SimpleFunction.constant(w1.space, 7)
    assert joint_law([c]) == {(Q(7),): 1}
    f = SimpleFunction.from_points(w1.space, {1: 1, 2: 1, 3: 1, 4: -3})
    assert not equal_law(joint_law([f]), joint_law([-f]))


def test_corrupted_image_map_deficit(w1):
    model, morph = build_canonical_1p(w1)
    x = model.space.points[0]
    old = morph.image_map[x]
    new = (old + 1) % 4
    bad = Morphism(model, {**morph.image_map, x: new})
    cert = verify_morphism(bad)
    assert not cert.measure_preserved
    deficits = dict(cert.deficits())
    blocks = w1.finest.blocks
    assert deficits == {blocks[old]: Q(1, 8), blocks[new]: -Q(1, 8)}
