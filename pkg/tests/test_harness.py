import json
from fractions import Fraction as Q

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forge.embedding import build_canonical_1p, build_canonical_2p
from forge.errors import SchemaError
from forge.filtration import check_f4, is_martingale, martingale_from_terminal, validate_bifiltration, validate_filtration
from forge.harness import generators as gen
from forge.harness.rng import stream
from forge.harness.serialize import dumps, parse, serialize, structurally_equal, to_obj
from forge.harness.suites import SUITES, comparable, run_suite, witness_reproduces
from forge.measure import Partition, SampleSpace, SimpleFunction

from conftest import BITS


# -- rng and generators ------------------------------------------------------------------


def test_stream_depends_only_on_seed_and_index():
    a = stream(5, 3).integers(0, 2**32, size=8).tolist()
    assert a == stream(5, 3).integers(0, 2**32, size=8).tolist()
    assert a != stream(5, 4).integers(0, 2**32, size=8).tolist()
    assert a != stream(6, 3).integers(0, 2**32, size=8).tolist()
    with pytest.raises(ValueError):
        stream(-1)
    with pytest.raises(ValueError):
        stream(2**64)


def test_config_validation():
    with pytest.raises(ValueError):
        gen.GeneratorConfig(N=0)
    with pytest.raises(ValueError):
        gen.GeneratorConfig(value_range=(1, 0))
    with pytest.raises(ValueError):
        gen.GeneratorConfig(f4_mode="sometimes")
    with pytest.raises(ValueError):
        gen.GeneratorConfig(seed=-1)


@pytest.mark.parametrize("mode", gen.F4_MODES)
def test_generator_modes(mode):
    cfg = gen.GeneratorConfig(points_max=6, N=3, M=3, f4_mode=mode)
    for k in range(30):
        a = gen.gen_bifiltration(cfg, stream(17, k))
        b = gen.gen_bifiltration(cfg, stream(17, k))
        assert a == b
        assert validate_bifiltration(a).ok
        holds = check_f4(a, direct=False).holds
        if mode == "guaranteed":
            assert holds
        elif mode == "adversarial-non-f4":
            assert not holds and a.N >= 2 and a.M >= 2


def test_generated_1p_and_martingale_valid():
    cfg = gen.GeneratorConfig(points_max=6, N=3)
    for k in range(30):
        rng = stream(19, k)
        filt = gen.gen_filtration1p(cfg, rng)
        assert validate_filtration(filt).ok
        assert is_martingale(gen.gen_martingale(filt, cfg, rng)).ok


def test_zero_value_range_gives_zero_martingale():
    cfg = gen.GeneratorConfig(value_range=(0, 0))
    rng = stream(23)
    bf = gen.gen_bifiltration(cfg, rng)
    m = gen.gen_martingale(bf, cfg, rng)
    assert all(v == 0 for _, f in m.indexed_terms() for v in f.values)


def test_seed_pairs_give_different_laws():
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2)
    same = 0
    for s in range(100):
        a = gen.gen_martingale(gen.gen_bifiltration(cfg, stream(s)), cfg, stream(s, 1))
        b = gen.gen_martingale(gen.gen_bifiltration(cfg, stream(s + 1000)), cfg, stream(s + 1000, 1))
        same += structurally_equal(a, b)
    assert same <= 5


def test_values_within_range():
    cfg = gen.GeneratorConfig(value_range=(Q(-1, 2), Q(3, 4)))
    rng = stream(29)
    vals = [gen.random_value(rng, cfg) for _ in range(500)]
    assert min(vals) >= Q(-1, 2) and max(vals) <= Q(3, 4)
    assert {Q(-1, 2), Q(3, 4)} <= set(vals)


# -- serialisation ------------------------------------------------------------------------------


def test_roundtrip_w2(w2):
    f = SimpleFunction.from_points(w2.space, {(0, 0): Q(1, 3), (0, 1): 0, (1, 0): -2, (1, 1): Q(7, 5)})
    m = martingale_from_terminal(f, w2)
    for x in (w2, w2.space, w2.finest, f, m):
        back = parse(serialize(x))
        assert structurally_equal(back, x)
        assert serialize(back) == serialize(x)


def test_exact_third_is_written_as_strings():
    s = SampleSpace.uniform((0, 1, 2))
    doc = json.loads(serialize(s))
    assert doc["format"] == "ff/1" and doc["type"] == "space"
    assert doc["weights"][0] == {"num": "1", "den": "3"}
    assert parse(serialize(s)).weights == (Q(1, 3),) * 3


def test_tuple_points_survive():
    s = SampleSpace.uniform((("a", 1), ("b", (2, 3))))
    assert parse(serialize(s)) == s


def test_model_roundtrip(w1, w2):
    for morph in (build_canonical_1p(w1)[1], build_canonical_2p(w2)[1]):
        back = parse(serialize(morph))
        assert back.image_map == morph.image_map
        assert back.certificate.verdict


def _bad(doc_text, path):
    with pytest.raises(SchemaError) as e:
        parse(doc_text)
    assert e.value.path == path


def test_schema_error_paths(w2):
    doc = json.loads(serialize(w2.space))
    del doc["weights"][1]["den"]
    _bad(json.dumps(doc), "/weights/1/den")
    doc = json.loads(serialize(w2.space))
    doc["weights"][0]["den"] = "0"
    _bad(json.dumps(doc), "/weights/0/den")
    doc = json.loads(serialize(w2))
    doc["grid"][1][1] = [[[0, 0]]]
    _bad(json.dumps(doc), "/grid/1/1")
    _bad("[1, 2]", "/")
    _bad("{not json", "/")
    _bad(json.dumps({"format": "ff/0", "type": "space"}), "/format")
    _bad(json.dumps({"format": "ff/1", "type": "widget"}), "/type")
    doc = json.loads(serialize(w2.space))
    doc["weights"][0] = {"num": "1", "den": "5"}
    _bad(json.dumps(doc), "/")


def test_model_with_corrupt_image_index(w1):
    doc = json.loads(serialize(build_canonical_1p(w1)[1]))
    doc["image"][0][1] = 99
    _bad(json.dumps(doc), "/image/0/1")
    doc["image"] = doc["image"][1:]
    _bad(json.dumps(doc), "/image")


def test_serialisation_is_canonical():
    # point order is part of a space and is kept on disk
    a = SampleSpace(("b", "a"), (Q(1, 4), Q(3, 4)))
    assert parse(serialize(a)).points == ("b", "a")
    assert serialize(a) == serialize(SampleSpace(("b", "a"), (Q(2, 8), Q(6, 8))))
    assert dumps(a).encode() == serialize(a)
    assert to_obj(Partition([{2}, {1}])) == {"type": "partition", "blocks": [[1], [2]]}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_random_roundtrips(seed):
    rng = stream(seed)
    cfg = gen.GeneratorConfig(points_max=5, N=2, M=2, branching_max=3)
    bf = gen.gen_bifiltration(cfg, rng)
    m = gen.gen_martingale(bf, cfg, rng, dim=gen._int(rng, 1, 2) if rng.random() < 0.3 else None)
    ws = gen.gen_weighted_system(rng)
    for x in (bf, m, ws, m.terms[0][0]):
        assert structurally_equal(parse(serialize(x)), x)


# -- suites -------------------------------------------------------------------------------------


def test_suite_names():
    assert set(SUITES) >= {
        "embed-1p",
        "embed-2p",
        "negative-f4",
        "conservation",
        "tangent",
        "lemma2",
        "doob",
        "davis-garsia-oracle",
        "davis-garsia-sandwich",
        "roundtrip",
    }


@pytest.mark.parametrize("name", sorted(SUITES))
def test_suite_smoke_and_determinism(name):
    a = run_suite(name, 3, 4)
    b = run_suite(name, 3, 4)
    assert a["passed"], a["results"]
    assert comparable(a) == comparable(b)
    assert json.dumps(comparable(a), sort_keys=True) == json.dumps(comparable(b), sort_keys=True)
    assert a["config"]["seed"] == 3 and a["aggregate"]["instances"] == 4


def test_parallel_equals_serial():
    a = run_suite("embed-2p", 7, 12, jobs=1)
    b = run_suite("embed-2p", 7, 12, jobs=2)
    assert comparable(a) == comparable(b)


def test_suite_input_errors():
    with pytest.raises(KeyError):
        run_suite("nope", 0, 1)
    with pytest.raises(ValueError):
        run_suite("embed-1p", 0, -1)


def test_witness_reproduces(w3):
    report = check_f4(w3)
    assert witness_reproduces(w3, report.witness)


def test_negative_f4_witnesses_reproduce():
    cfg = gen.GeneratorConfig(points_max=6, N=2, M=2, f4_mode="adversarial-non-f4")
    for k in range(20):
        bf = gen.gen_bifiltration(cfg, stream(31, k))
        report = check_f4(bf)
        assert not report.holds and witness_reproduces(bf, report.witness)


def test_point_ids_in_generated_spaces_are_plain():
    bf = gen.gen_bifiltration(gen.GeneratorConfig(), stream(37))
    assert all(isinstance(p, int) for p in bf.space.points)
    assert SampleSpace.uniform(BITS) == parse(serialize(SampleSpace.uniform(BITS)))
