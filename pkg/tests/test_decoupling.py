import math
from fractions import Fraction as Q
from itertools import product

import numpy as np
import pytest

from forge.decoupling import (
    TabulatedPhi,
    WeightedSystem,
    davis_garsia_decompose,
    davis_garsia_oracle,
    decoupling_ratio,
    doob_delta,
    doob_inequality_holds,
    lemma2_check,
    make_phi,
    orthogonality_check,
    s_sigma_harness,
    tangent_copy,
    verify_tangent,
)
from forge.decoupling.doob import maximal_sq
from forge.embedding import build_canonical_1p, build_canonical_2p, pullback_martingale
from forge.errors import CapExceededError, F4ViolationError, NotAdaptedError
from forge.filtration import (
    Martingale2P,
    differences,
    f_minus,
    is_martingale,
    martingale_from_terminal,
)
from forge.harness import generators as gen
from forge.harness.rng import stream
from forge.harness.suites import gen_dg_instance
from forge.measure import Partition, SampleSpace, SimpleFunction
from forge.square import garsia_norm, square_functions

from conftest import BITS, make_tensor


def w1_martingale(w1, values=(1, -1, 3, -3)):
    f = SimpleFunction.from_points(w1.space, dict(zip((1, 2, 3, 4), values)))
    return martingale_from_terminal(f, w1)


def pulled_1p(filt, m):
    model, morph = build_canonical_1p(filt)
    return model, pullback_martingale(morph, m)


def pulled_2p(bf, m):
    model, morph = build_canonical_2p(bf)
    return model, pullback_martingale(morph, m)


# -- oracles ------------------------------------------------------------------------------


def oracle_tangent_1p(model, terms):
    """g_k(x, y) = f_k(x with coordinate k taken from y), over all (x, y)."""
    pts, wts = model.space.points, model.space.weights
    rows = []
    for (x, wx), (y, wy) in product(zip(pts, wts), repeat=2):
        g = {}
        for k, f in terms.items():
            z = list(x)
            z[k] = y[k]
            g[k] = f(tuple(z))
        rows.append((x, y, wx * wy, g))
    return rows


def oracle_conditional_ok(rows, terms):
    """E[f_k(x) | x_<k, y_<k] == E[g_k | x_<k, y_<k], by grouping sums."""
    for k, f in terms.items():
        groups = {}
        for x, y, w, g in rows:
            key = (x[:k], y[:k])
            a, b, m = groups.get(key, (0, 0, 0))
            groups[key] = (a + w * f(x), b + w * g[k], m + w)
        if any(a != b for a, b, _ in groups.values()):
            return False
    return True


# -- tangent copies ------------------------------------------------------------------------


def test_tangent_1p_w1_matches_oracle(w1):
    model, pm = pulled_1p(w1, w1_martingale(w1))
    terms = dict(enumerate(differences(pm), start=1))
    tp = tangent_copy(model, list(terms.values()))
    assert verify_tangent(tp).ok
    rows = oracle_tangent_1p(model, terms)
    assert oracle_conditional_ok(rows, terms)
    got = {k: tp.tangent[k] for k in terms}
    for x, y, w, g in rows:
        assert tp.doubled_space.weight_of[x + y] == w
        assert all(got[k](x + y) == g[k] for k in terms)


def test_broken_tangent_term_is_located(w1):
    model, pm = pulled_1p(w1, w1_martingale(w1))
    tp = tangent_copy(model, differences(pm))
    bad = tp.with_term(2, tp.tangent[2] + 1)
    cert = verify_tangent(bad)
    assert not cert.ok
    assert (cert.key, cert.kind, cert.deficit) == (2, "conditional", 1)


def test_tangent_two_stage_and_cells_w2(w2):
    f = SimpleFunction.from_points(w2.space, {(0, 0): 2, (0, 1): -1, (1, 0): 0, (1, 1): 3})
    model, pm = pulled_2p(w2, martingale_from_terminal(f, w2))
    for mode in ("two-stage", "cells"):
        tp = tangent_copy(model, differences(pm), mode=mode)
        cert = verify_tangent(tp)
        assert cert.ok and cert.checked >= 4
    tp = tangent_copy(model, differences(pm))
    assert len(tp.stages) == 2 and len(tp.doubled_space) == 4**4


def test_tangent_rejects_bad_input(w2):
    model, _ = build_canonical_2p(w2)
    with pytest.raises(ValueError):
        tangent_copy(model, {(1, 1): SimpleFunction.constant(model.space, 0)}, mode="rows")
    non_adapted = SimpleFunction.from_points(model.space, {p: k for k, p in enumerate(model.space.points)})
    with pytest.raises(NotAdaptedError):
        tangent_copy(model, {(1, 1): non_adapted})
    with pytest.raises(CapExceededError):
        tangent_copy(model, {(1, 1): SimpleFunction.constant(model.space, 0)}, cap=100)


@pytest.mark.parametrize("k", range(20))
def test_tangent_random(k):
    rng = stream(41, k)
    cfg = gen.GeneratorConfig(points_max=4, N=2, M=2, branching_max=2)
    bf = gen.gen_bifiltration(cfg, rng)
    m = gen.gen_martingale(bf, cfg, rng)
    model, pm = pulled_2p(bf, m)
    if model.product.size**4 > 20000:
        pytest.skip("instance too large for the test budget")
    for mode in ("two-stage", "cells"):
        assert verify_tangent(tangent_copy(model, differences(pm), mode=mode)).ok


@pytest.mark.parametrize("k", range(20))
def test_tangent_random_1p_oracle(k):
    rng = stream(43, k)
    cfg = gen.GeneratorConfig(points_max=4, N=3, branching_max=2)
    filt = gen.gen_filtration1p(cfg, rng)
    model, pm = pulled_1p(filt, gen.gen_martingale(filt, cfg, rng))
    terms = dict(enumerate(differences(pm), start=1))
    assert oracle_conditional_ok(oracle_tangent_1p(model, terms), terms)
    assert verify_tangent(tangent_copy(model, terms)).ok


# -- ratios ---------------------------------------------------------------------------------


def test_ratio_all_zero(w1):
    model, _ = build_canonical_1p(w1)
    zero = SimpleFunction.constant(model.space, 0)
    res = decoupling_ratio(model, [zero, zero])
    assert (res.lhs, res.rhs, res.ratio) == (0.0, 0.0, 1.0)


def test_ratio_single_term_is_one(w1):
    model, pm = pulled_1p(w1, w1_martingale(w1))
    sq = differences(pm)[0].square()
    res = decoupling_ratio(model, [sq, SimpleFunction.constant(model.space, 0)])
    assert res.ratio == 1.0


def test_ratio_w1_second_term_only(w1):
    model, pm = pulled_1p(w1, w1_martingale(w1))
    d2 = differences(pm)[1]
    res = decoupling_ratio(model, [SimpleFunction.constant(model.space, 0), d2.square()])
    # d2 = ±1 on the first pair, ±3 on the second; E sqrt(d2²) = E|d2| = 2
    assert res.lhs == pytest.approx(2.0, abs=1e-15)
    assert res.ratio == 1.0


@pytest.mark.parametrize("phi", ["sqrt", "log1p", "capped:2"])
def test_ratio_matches_oracle(w1, phi):
    model, pm = pulled_1p(w1, w1_martingale(w1, (2, 0, 1, -3)))
    terms = {k: d.square() for k, d in enumerate(differences(pm), start=1)}
    fn = make_phi(phi)
    lhs = sum(float(w) * fn(sum(f(x) for f in terms.values())) for x, w in zip(model.space.points, model.space.weights))
    rhs = sum(float(w) * fn(sum(g.values())) for _, _, w, g in oracle_tangent_1p(model, terms))
    res = decoupling_ratio(model, terms, phi=phi)
    assert res.lhs == pytest.approx(lhs, rel=1e-12)
    assert res.rhs == pytest.approx(rhs, rel=1e-12)
    assert res.ratio == pytest.approx(lhs / rhs, rel=1e-12)


def test_ratio_rejects_negative_terms(w1):
    model, pm = pulled_1p(w1, w1_martingale(w1))
    with pytest.raises(ValueError):
        decoupling_ratio(model, differences(pm))


def test_phi_specs():
    assert make_phi("capped:3/2")(5) == 1.5
    assert make_phi("sqrt")(Q(9, 4)) == 1.5
    with pytest.raises(ValueError):
        make_phi("cube")
    with pytest.raises(ValueError):
        make_phi("capped:0")
    t = TabulatedPhi(((0, 0), (1, 2), (3, 3)))
    assert (t(Q(1, 2)), t(2), t(10)) == (1.0, 2.5, 3.0)
    with pytest.raises(ValueError):
        TabulatedPhi(((0, 0), (1, 1), (2, 3)))
    with pytest.raises(ValueError):
        TabulatedPhi(((0, 1), (1, 0)))


# -- S / σ harness ------------------------------------------------------------------------------


def test_s_sigma_zero(w2):
    zero = martingale_from_terminal(SimpleFunction.constant(w2.space, 0), w2)
    res = s_sigma_harness(zero)
    assert (res.S, res.other, res.ratio, res.name) == (0.0, 0.0, 1.0, "sigma")


def test_s_sigma_single_difference(w2):
    f = SimpleFunction.from_points(w2.space, {p: 1 if p[0] else -1 for p in BITS})
    res = s_sigma_harness(martingale_from_terminal(f, w2))
    # only Δ_21 = ±1 is non-zero; F⁻_21 is trivial, so S = σ = 1
    assert (res.S, res.other, res.ratio) == (1.0, 1.0, 1.0)


def test_s_sigma_one_param(w1):
    res = s_sigma_harness(w1_martingale(w1))
    sq = square_functions(w1_martingale(w1))
    assert res.name == "s" and res.S == sq.H1_S and res.other == sq.H1_s


# -- orthogonality on canonical grids -------------------------------------------------------


def test_orthogonality_holds_for_pulled_martingale(w2):
    f = SimpleFunction.from_points(w2.space, {(0, 0): 5, (0, 1): -1, (1, 0): 2, (1, 1): 0})
    model, pm = pulled_2p(w2, martingale_from_terminal(f, w2))
    cert = orthogonality_check(model, pm)
    assert cert.ok and cert.checked == 9


def test_orthogonality_fails_for_non_martingale(w2):
    model, _ = build_canonical_2p(w2)
    bf = model.canonical
    fine = SimpleFunction.from_points(model.space, {p: k for k, p in enumerate(model.space.points)})
    terms = [[fine.on(bf.grid[i][j]) if (i, j) == (2, 2) else SimpleFunction.constant(model.space, 0) for j in (1, 2)] for i in (1, 2)]
    m = Martingale2P(bf, terms)
    assert not is_martingale(m).ok
    cert = orthogonality_check(model, m)
    assert not cert.ok
    assert cert.failures[0].index == (2, 2)


def test_orthogonality_constant(w2):
    model, pm = pulled_2p(w2, martingale_from_terminal(SimpleFunction.constant(w2.space, 4), w2))
    assert orthogonality_check(model, pm).ok


@pytest.mark.parametrize("k", range(15))
def test_orthogonality_random(k):
    rng = stream(47, k)
    cfg = gen.GeneratorConfig(points_max=5, N=2, M=3, branching_max=2)
    bf = gen.gen_bifiltration(cfg, rng)
    model, pm = pulled_2p(bf, gen.gen_martingale(bf, cfg, rng))
    assert orthogonality_check(model, pm).ok


# -- Doob constants ------------------------------------------------------------------------------


def test_doob_single_field():
    s = SampleSpace.uniform((0, 1, 2))
    res = doob_delta([Partition([{0}, {1, 2}])], s)
    assert res.delta_sq_certified == 1
    assert res.best_ratio == pytest.approx(1.0, abs=1e-9)


def test_doob_coin():
    s = SampleSpace.uniform(("H", "T"))
    fields = [Partition.trivial(s.points), Partition.discrete(s.points)]
    res = doob_delta(fields, s)
    assert res.delta_sq_certified == Q(1, 2)
    assert res.delta_empirical >= 1 / math.sqrt(2) - 1e-12
    # oracle: sup over f = (a, b) of E[max((Ef)², f²)] / E[f²], on a fine grid
    best = 0.0
    for t in np.linspace(0, 2 * math.pi, 20001):
        a, b = math.cos(t), math.sin(t)
        m = (a + b) / 2
        best = max(best, (max(m * m, a * a) + max(m * m, b * b)) / (a * a + b * b))
    assert res.best_ratio == pytest.approx(math.sqrt(best), abs=1e-6)


def test_doob_fminus_family_w2(w2):
    fields = [f_minus(w2, i, j) for i, j in w2.interior()]
    res = doob_delta(fields, w2.space)
    assert res.delta_sq_certified == Q(1, 4)
    rng = np.random.default_rng(5)
    for _ in range(100):
        vals = {p: Q(int(v), 3) for p, v in zip(BITS, rng.integers(-9, 10, size=4))}
        assert doob_inequality_holds(SimpleFunction.from_points(w2.space, vals), fields, Q(1, 4))


def test_maximal_sq_oracle():
    s = SampleSpace.uniform((0, 1, 2, 3))
    p1, p2 = Partition([{0, 1}, {2, 3}]), Partition([{0, 2}, {1, 3}])
    f = SimpleFunction.from_points(s, {0: 4, 1: 0, 2: -2, 3: 2})
    # E[f|p1] = (2, 2, 0, 0), E[f|p2] = (1, 1, 1, 1)
    assert maximal_sq(f, [p1, p2]).pointwise == (4, 4, 1, 1)
    # 1/2 · E[max] = 5/4 ≤ E[f²] = 6
    assert doob_inequality_holds(f, [p1, p2], Q(1, 2))
    assert not doob_inequality_holds(f, [p1, p2], Q(5))


# -- weighted lower bound ------------------------------------------------------------------------


def _system(w_value, kappa=Q(1, 2)):
    s = SampleSpace(("a", "b", "c"), (Q(1, 2), Q(1, 4), Q(1, 4)))
    fields = {0: Partition([{"a"}, {"b", "c"}]), 1: Partition.trivial(s.points)}
    w = {(a, 0): SimpleFunction.constant(s, w_value) for a in fields}
    f = {
        (0, 0): SimpleFunction(s, fields[0], (Q(3), Q(-1))),
        (1, 0): SimpleFunction.constant(s, 2),
    }
    return WeightedSystem(s, (0, 1), (0,), fields, w, f, kappa, Q(1, 2))


def test_lemma2_weights_one():
    res = lemma2_check(_system(1))
    # Σ|f|² = 13 on a, 5 on b and c; every set is the whole space
    expected = 0.5 * math.sqrt(13) + 0.5 * math.sqrt(5)
    assert res.lhs == pytest.approx(expected, rel=1e-15)
    assert res.rhs == pytest.approx(0.25 * math.sqrt(0.5) * expected, rel=1e-15)
    assert res.holds and all(len(A) == 3 for A in res.sets.values())


def test_lemma2_weights_zero():
    res = lemma2_check(_system(0))
    assert (res.lhs, res.rhs, res.holds) == (0.0, 0.0, True)
    assert all(not A for A in res.sets.values())


def test_lemma2_input_errors():
    ws = _system(1)
    with pytest.raises(ValueError):
        lemma2_check(WeightedSystem(ws.space, ws.A, ws.B, ws.fields, ws.w, ws.f, ws.kappa))
    with pytest.raises(ValueError):
        lemma2_check(ws, delta_sq=0)
    with pytest.raises(ValueError):
        _system(2)


@pytest.mark.parametrize("k", range(100))
def test_lemma2_random(k):
    ws = gen.gen_weighted_system(stream(53, k))
    res = lemma2_check(ws)
    assert res.holds
    for (a, b), A in res.sets.items():
        w = ws.w[a, b]
        for blk in ws.fields[a].blocks:
            mean = sum(ws.space.weight_of[p] * w(p) for p in blk) / ws.space.prob(blk)
            assert (blk <= A) == (mean >= ws.kappa)


# -- Davis–Garsia-type decomposition ------------------------------------------------------------


def test_dg_zero_martingale(w2):
    m = martingale_from_terminal(SimpleFunction.constant(w2.space, 0), w2)
    dec = davis_garsia_decompose(m)
    assert dec.objective == 0 and dec.theta == {}


def test_dg_single_difference(w2):
    f = SimpleFunction.from_points(w2.space, {p: 1 if p[0] else -1 for p in BITS})
    m = martingale_from_terminal(f, w2)
    dec = davis_garsia_decompose(m)
    best = min(dec.objective_g_is_f, dec.objective_h_is_f)
    assert dec.objective == pytest.approx(best, abs=1e-6)
    assert dec.objective_h_is_f == float(garsia_norm(m))


def test_dg_w2_matches_oracle_and_sums(w2):
    # s1 + 2 s1 s2 with s = ±1: Δ_21 has 2 non-zero atoms and Δ_22 has 4
    f = SimpleFunction.from_points(w2.space, {(a, b): (2 * a - 1) * (1 + 2 * (2 * b - 1)) for a, b in BITS})
    m = martingale_from_terminal(f, w2)
    dec = davis_garsia_decompose(m, seed=3)
    orc = davis_garsia_oracle(m, grid_steps=5)
    assert orc.evaluated == 5**6
    assert dec.objective <= orc.objective + 1e-6
    for i, j in w2.interior():
        assert dec.g.term(i, j) + dec.h.term(i, j) == m.term(i, j)
    assert is_martingale(dec.g).ok and is_martingale(dec.h).ok
    assert dec.objective <= dec.objective_g_is_f + 1e-9


def test_dg_deterministic(w2):
    f = SimpleFunction.from_points(w2.space, {(0, 0): 3, (0, 1): 1, (1, 0): -2, (1, 1): -2})
    m = martingale_from_terminal(f, w2)
    a, b = davis_garsia_decompose(m, seed=9), davis_garsia_decompose(m, seed=9)
    assert a.theta == b.theta and a.objective == b.objective


def test_dg_refuses_non_f4(w3):
    f = SimpleFunction.from_points(w3.space, {0: 1, 1: 0, 2: -1})
    with pytest.raises(F4ViolationError):
        davis_garsia_decompose(martingale_from_terminal(f, w3))


def test_oracle_grid_one_coordinate(w2):
    f = SimpleFunction.from_points(w2.space, {p: 1 if p[0] else -1 for p in BITS})
    orc = davis_garsia_oracle(martingale_from_terminal(f, w2), grid_steps=3)
    # Δ_21 = ±1 has two non-zero atoms
    assert orc.grid == (0, Q(1, 2), 1)
    assert orc.evaluated == 9
    with pytest.raises(CapExceededError):
        davis_garsia_oracle(martingale_from_terminal(f, w2), grid_steps=3, cap=8)
    with pytest.raises(ValueError):
        davis_garsia_oracle(martingale_from_terminal(f, w2), grid_steps=1)


def test_oracle_exhaustive_small_grid():
    bf = make_tensor((Q(1, 3), Q(2, 3)), (Q(1, 2), Q(1, 2)))
    f = SimpleFunction.from_points(bf.space, {(0, 0): 2, (0, 1): 2, (1, 0): -1, (1, 1): -1})
    m = martingale_from_terminal(f, bf)
    orc = davis_garsia_oracle(m, grid_steps=5)
    from forge.decoupling.davis_garsia import decomposition_from_theta

    # re-evaluate every grid point exactly through the decomposition itself
    coords = sorted(orc.theta)
    best = min(
        decomposition_from_theta(m, dict(zip(coords, t))).objective
        for t in product(orc.grid, repeat=len(coords))
    )
    assert orc.objective == pytest.approx(best, abs=1e-12)


@pytest.mark.parametrize("k", range(6))
def test_dg_random_against_oracle(k):
    m = gen_dg_instance(stream(59, k))
    dec = davis_garsia_decompose(m, seed=k)
    orc = davis_garsia_oracle(m, grid_steps=21)
    assert abs(dec.objective - orc.objective) <= 1e-4
    assert dec.objective <= dec.objective_g_is_f + 1e-6
