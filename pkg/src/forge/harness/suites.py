"""Named property suites over seeded random instances.

Instance ``k`` of a suite run with seed ``s`` draws from ``stream(s, k)``
only, so results do not depend on ``jobs``.  Reports are plain dicts ready
for ``json.dumps(sort_keys=True)``; the ``timestamp`` field is the only part
that changes between identical runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction

from ..approximation import atomic_approximation, generated_filtration
from ..decoupling.davis_garsia import davis_garsia_decompose, davis_garsia_oracle, split_problem
from ..decoupling.doob import doob_delta, doob_inequality_holds, lemma2_check
from ..decoupling.ratios import decoupling_ratio, orthogonality_check, s_sigma_harness
from ..decoupling.tangent import tangent_copy, verify_tangent
from ..embedding import (
    build_canonical_1p,
    build_canonical_2p,
    equal_law,
    evaluate_brute,
    evaluate_chain,
    martingale_law,
    preimage_measure,
    pullback_martingale,
)
from ..errors import F4ViolationError
from ..filtration import (
    Martingale2P,
    check_f4,
    d_operator,
    differences,
    f_minus,
    is_martingale,
    martingale_from_terminal,
)
from ..measure import SimpleFunction, refines
from ..square import square_functions
from . import generators as gen
from .rng import ALGORITHM, stream
from .serialize import parse, serialize, structurally_equal

VERSION = "forge-suite/1"


def _q(x) -> str:
    return str(Fraction(x))


# -- individual instances ---------------------------------------------------------


def embed_1p(seed, k):
    rng = stream(seed, k)
    cfg = gen.GeneratorConfig(points_max=5, N=3, branching_max=3)
    filt = gen.gen_filtration1p(cfg, rng)
    model, morph = build_canonical_1p(filt)
    cert = morph.certificate
    m = gen.gen_martingale(filt, cfg, rng)
    pulled = pullback_martingale(morph, m)
    law = equal_law(martingale_law(m), martingale_law(pulled))
    nonempty = all(v is not None for v in morph.image_map.values())
    ok = cert.verdict and law and nonempty and bool(is_martingale(pulled))
    return {
        "ok": ok,
        "points": len(filt.space),
        "N": filt.N,
        "atoms": len(model.space),
        "eq4": all(cert.preimages_measurable.values()),
        "eq5": cert.measure_preserved,
        "joint_law": law,
    }


def embed_2p(seed, k):
    rng = stream(seed, k)
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, branching_max=3, cap=10**4)
    bf = gen.gen_bifiltration(cfg, rng)
    model, morph = build_canonical_2p(bf, cap=10**4)
    cert = morph.certificate
    chain_ok = True
    for x in model.space.points:
        atom = evaluate_chain(model, x)
        if (atom or frozenset()) != evaluate_brute(model, x):
            chain_ok = False
            break
    eq23 = all(preimage_measure(model, U).holds for U in bf.finest.blocks)
    canonical_f4 = check_f4(model.canonical, direct=False).holds
    m = gen.gen_martingale(bf, cfg, rng)
    law = equal_law(martingale_law(m), martingale_law(pullback_martingale(morph, m)))
    ok = cert.verdict and chain_ok and eq23 and canonical_f4 and law
    return {
        "ok": ok,
        "points": len(bf.space),
        "shape": [bf.N, bf.M],
        "atoms": len(model.space),
        "eq4": all(cert.preimages_measurable.values()),
        "eq5": cert.measure_preserved,
        "empty_mass": _q(cert.empty_mass),
        "eq23": eq23,
        "chain_matches_brute_force": chain_ok,
        "canonical_f4": canonical_f4,
        "joint_law": law,
    }


def witness_reproduces(bf, w) -> bool:
    """Recompute both sides of a conditional-independence witness from scratch."""
    i, j = w.index
    space = bf.space
    A, B, C = w.given, w.first, w.second
    try:
        bf.grid[i][j].index_of(A)
        bf.grid[i][j + 1].index_of(B)
        bf.grid[i + 1][j].index_of(C)
    except KeyError:
        return False
    pa = space.prob(A)
    lhs = space.prob(A & B & C) / pa
    rhs = space.prob(A & B) * space.prob(A & C) / (pa * pa)
    return lhs == w.lhs and rhs == w.rhs and lhs != rhs


def negative_f4(seed, k):
    rng = stream(seed, k)
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, f4_mode="adversarial-non-f4")
    bf = gen.gen_bifiltration(cfg, rng)
    try:
        build_canonical_2p(bf)
    except F4ViolationError as e:
        good = witness_reproduces(bf, e.witness)
        return {"ok": good, "rejected": True, "witness_index": list(e.witness.index),
                "lhs": _q(e.witness.lhs), "rhs": _q(e.witness.rhs)}
    return {"ok": False, "rejected": False}


def conservation(seed, k):
    rng = stream(seed, k)
    mode = "guaranteed" if k % 2 == 0 else "generic"
    cfg = gen.GeneratorConfig(points_max=6, N=3, M=3, branching_max=2, f4_mode=mode)
    bf = gen.gen_bifiltration(cfg, rng)
    m = gen.gen_martingale(bf, cfg, rng)
    sq = square_functions(m)
    eS, es, esig = sq.S2.integral(), sq.s2.integral(), sq.sigma2.integral()
    diffs = differences(m)
    telescopes = True
    for n, mm in bf.interior():
        total = SimpleFunction.constant(bf.space, 0)
        for (i, j), d in diffs.items():
            if i <= n and j <= mm:
                total = total + d
        if total != m.term(n, mm):
            telescopes = False
    ok = eS == es == esig == sq.energy and telescopes
    return {"ok": ok, "mode": mode, "E_S2": _q(eS), "E_s2": _q(es), "E_sigma2": _q(esig), "telescopes": telescopes}


def tangent(seed, k):
    rng = stream(seed, k)
    if k % 2 == 0:
        cfg = gen.GeneratorConfig(points_max=4, N=3, branching_max=2)
        filt = gen.gen_filtration1p(cfg, rng)
        model, morph = build_canonical_1p(filt)
        m = pullback_martingale(morph, gen.gen_martingale(filt, cfg, rng))
        seq = list(differences(m))
        single = [seq[0].square()]
    else:
        cfg = gen.GeneratorConfig(points_max=4, N=2, M=2, branching_max=2)
        while True:
            bf = gen.gen_bifiltration(cfg, rng)
            model, morph = build_canonical_2p(bf)
            if len(model.space) <= 6:
                break
        m = pullback_martingale(morph, gen.gen_martingale(bf, cfg, rng))
        seq = differences(m)
        single = {(1, 1): seq[1, 1].square()}
    tp = tangent_copy(model, seq)
    cert = verify_tangent(tp)
    one = decoupling_ratio(model, single, "sqrt")
    sq = seq if isinstance(seq, dict) else {n: f for n, f in enumerate(seq, start=1)}
    full = decoupling_ratio(model, {key: f.square() for key, f in sq.items()}, "sqrt")
    ok = cert.ok and one.ratio == 1.0 and one.lhs == one.rhs
    return {
        "ok": ok,
        "params": 1 if k % 2 == 0 else 2,
        "atoms": len(model.space),
        "doubled": len(tp.doubled_space),
        "eq30_and_independence": cert.ok,
        "single_term_ratio": one.ratio,
        "ratio": full.ratio,
    }


def lemma2(seed, k):
    rng = stream(seed, k)
    ws = gen.gen_weighted_system(rng)
    res = lemma2_check(ws)
    return {"ok": res.holds, "lhs": res.lhs, "rhs": res.rhs, "A": len(ws.A), "B": len(ws.B), "kappa": _q(ws.kappa)}


def doob(seed, k, samples=200):
    rng = stream(seed, k)
    if k % 2 == 0:
        n = gen._int(rng, 1, 6)
        space = gen.gen_space(rng, n)
        fields = [gen.random_partition(rng, space.points) for _ in range(gen._int(rng, 1, 4))]
    else:
        cfg = gen.GeneratorConfig(points_max=6, N=2, M=2)
        bf = gen.gen_bifiltration(cfg, rng)
        space = bf.space
        fields = [f_minus(bf, i, j) for i, j in bf.interior()]
    res = doob_delta(fields, space, seed=k)
    failures = 0
    for _ in range(samples):
        f = SimpleFunction.from_points(space, {p: Fraction(gen._int(rng, -12, 12), 4) for p in space.points})
        if not doob_inequality_holds(f, fields, res.delta_sq_certified):
            failures += 1
    ok = failures == 0 and res.delta_empirical >= res.delta_certified - 1e-9
    return {
        "ok": ok,
        "family_size": len(fields),
        "delta_sq_certified": _q(res.delta_sq_certified),
        "delta_empirical": res.delta_empirical,
        "failures": failures,
    }


def gen_dg_instance(rng, max_coords: int = 3, attempts: int = 500) -> Martingale2P:
    """A martingale on a 2×2 F4 grid whose differences are non-zero on at most
    ``max_coords`` atoms in total (the split coordinates)."""
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, branching_max=3)
    for _ in range(attempts):
        while True:
            bf = gen.gen_bifiltration(cfg, rng)
            if (bf.N, bf.M) == (2, 2):
                break
        chosen = [ij for ij in bf.interior() if rng.random() < 0.5] or [bf.interior()[gen._int(rng, 0, 3)]]
        top = SimpleFunction.constant(bf.space, 0)
        for i, j in chosen:
            part = bf.grid[i][j]
            u = SimpleFunction(bf.space, part, tuple(gen.random_value(rng, cfg) for _ in part.blocks))
            top = top + d_operator(bf, u, i, j)
        m = martingale_from_terminal(top.on(bf.finest), bf)
        coords = sum(sum(1 for v in d.values if v != 0) for d in differences(m).values())
        if 1 <= coords <= max_coords:
            return m
    raise RuntimeError("could not draw a Davis–Garsia instance")


def dg_oracle(seed, k):
    rng = stream(seed, k)
    m = gen_dg_instance(rng)
    dec = davis_garsia_decompose(m, seed=k)
    orc = davis_garsia_oracle(m, grid_steps=21)
    gap = abs(dec.objective - orc.objective)
    ok = gap <= 1e-4 and dec.objective <= dec.objective_g_is_f + 1e-6 and orc.objective >= dec.objective - 1e-6
    return {
        "ok": ok,
        "coords": split_problem(m).dim,
        "solver": dec.objective,
        "oracle": orc.objective,
        "gap": gap,
        "H1_sigma": dec.objective_g_is_f,
        "garsia": dec.objective_h_is_f,
    }


def dg_sandwich(seed, k):
    rng = stream(seed, k)
    m = gen_dg_instance(rng)
    dec = davis_garsia_decompose(m, seed=k)
    ok = dec.objective <= dec.objective_g_is_f + 1e-6 and math.isfinite(dec.ratio) and dec.ratio > 0
    return {"ok": ok, "objective": dec.objective, "H1_S": dec.H1_S, "H1_sigma": dec.objective_g_is_f, "ratio": dec.ratio}


def atomic_approx(seed, k):
    rng = stream(seed, k)
    dim = gen._int(rng, 1, 3)
    cfg = gen.GeneratorConfig(points_max=8, N=3, branching_max=3, dim=dim)
    filt = gen.gen_filtration1p(cfg, rng)
    m = gen.gen_martingale(filt, cfg, rng)
    out = {"ok": True, "dim": dim}
    gen_f = generated_filtration(m)
    for eps in (Fraction(1), Fraction(1, 4)):
        ap = atomic_approximation(m, eps)
        inside = all(refines(filt.levels[n], ap.G.levels[n]) for n in range(filt.N + 1))
        coarser = all(refines(gen_f.levels[n], ap.G.levels[n]) for n in range(filt.N + 1))
        increasing = all(refines(ap.G.levels[n + 1], ap.G.levels[n]) for n in range(filt.N))
        good = inside and coarser and increasing and ap.max_error < eps
        out[f"eps={eps}"] = {"max_error": _q(ap.max_error), "ok": good}
        out["ok"] = out["ok"] and good
    return out


def roundtrip(seed, k):
    rng = stream(seed, k)
    values = _roundtrip_values(rng)
    bad = [type(v).__name__ for v in values if not structurally_equal(parse(serialize(v)), v)]
    return {"ok": not bad, "types": len(values), "failures": bad}


def _roundtrip_values(rng):
    cfg = gen.GeneratorConfig(points_max=5, N=2, M=2, branching_max=3)
    filt = gen.gen_filtration1p(cfg, rng)
    bf = gen.gen_bifiltration(cfg, rng)
    vcfg = gen.GeneratorConfig(points_max=5, N=2, dim=2)
    m1 = gen.gen_martingale(filt, cfg, rng)
    m2 = gen.gen_martingale(bf, cfg, rng)
    mv = gen.gen_martingale(filt, vcfg, rng, dim=2)
    _, morph = build_canonical_1p(filt)
    return [
        filt.space,
        filt.finest,
        filt,
        bf,
        m1.terms[-1],
        m1,
        mv,
        m2,
        morph,
        morph.certificate,
        gen.gen_weighted_system(rng),
    ]


def s_sigma(seed, k):
    rng = stream(seed, k)
    cfg = gen.GeneratorConfig(points_max=16, N=2, M=2, branching_max=2)
    while True:
        bf = gen.gen_bifiltration(cfg, rng)
        if len(bf.space) <= 16:
            break
    m = gen.gen_martingale(bf, cfg, rng)
    res = s_sigma_harness(m)
    return {"ok": math.isfinite(res.ratio), "S": res.S, "sigma": res.other, "ratio": res.ratio}


def orthogonality(seed, k):
    rng = stream(seed, k)
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, branching_max=2)
    bf = gen.gen_bifiltration(cfg, rng)
    model, morph = build_canonical_2p(bf)
    m = pullback_martingale(morph, gen.gen_martingale(bf, cfg, rng))
    cert = orthogonality_check(model, m)
    return {"ok": cert.ok, "checked": cert.checked, "atoms": len(model.space)}


SUITES = {
    "embed-1p": embed_1p,
    "embed-2p": embed_2p,
    "negative-f4": negative_f4,
    "conservation": conservation,
    "tangent": tangent,
    "lemma2": lemma2,
    "doob": doob,
    "davis-garsia-oracle": dg_oracle,
    "davis-garsia-sandwich": dg_sandwich,
    "atomic-approx": atomic_approx,
    "roundtrip": roundtrip,
    "s-sigma": s_sigma,
    "orthogonality": orthogonality,
}


# -- running and aggregation ----------------------------------------------------


def _run_one(args):
    name, seed, k = args
    res = SUITES[name](seed, k)
    return {"index": k, **res}


def _aggregate(name, results) -> dict:
    agg = {"instances": len(results), "passed": sum(1 for r in results if r["ok"])}
    agg["failed"] = agg["instances"] - agg["passed"]
    key = {"davis-garsia-sandwich": "ratio", "s-sigma": "ratio", "tangent": "ratio", "davis-garsia-oracle": "gap"}.get(name)
    if key and results:
        vals = [r[key] for r in results if isinstance(r.get(key), float) and math.isfinite(r[key])]
        if vals:
            agg[key] = {"max": max(vals), "min": min(vals), "mean": math.fsum(vals) / len(vals)}
            worst = max(results, key=lambda r: r.get(key, -math.inf))
            agg["witness_index"] = worst["index"]
            if name == "s-sigma":
                agg["histogram"] = _histogram(vals)
    return agg


def _histogram(vals, bins=10) -> list:
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return [[lo, hi, len(vals)]]
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in vals:
        counts[min(bins - 1, int((v - lo) / width))] += 1
    return [[lo + b * width, lo + (b + 1) * width, c] for b, c in enumerate(counts)]


def run_suite(name: str, seed: int, trials: int, jobs: int = 1) -> dict:
    """Run ``trials`` instances of suite ``name`` and return the report dict."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    if trials < 0:
        raise ValueError("trials must be non-negative")
    tasks = [(name, seed, k) for k in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    return {
        "format": "ff/1",
        "type": "suite-report",
        "version": VERSION,
        "suite": name,
        "config": {"seed": seed, "trials": trials, "rng": ALGORITHM},
        "results": results,
        "aggregate": _aggregate(name, results),
        "passed": all(r["ok"] for r in results),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def comparable(report: dict) -> dict:
    """The report without its timestamp, the one field that changes between runs."""
    return {k: v for k, v in report.items() if k != "timestamp"}
