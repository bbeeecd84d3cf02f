"""The "ff/1" JSON interchange format.

Documents are UTF-8 JSON objects with ``"format": "ff/1"`` and a ``"type"``
tag.  Rationals are ``{"num": "<int>", "den": "<int>"}`` with decimal
strings; point identifiers are integers, strings or arrays (tuples);
partitions are arrays of arrays of point ids.  See ``docs/format.md``.
Parse errors raise :class:`SchemaError` carrying a JSON-pointer path.
"""

from __future__ import annotations

import json
from fractions import Fraction

from ..decoupling.doob import WeightedSystem
from ..embedding import (
    CanonicalModel1P,
    CanonicalModel2P,
    Morphism,
    MorphismCertificate,
    build_canonical_1p,
    build_canonical_2p,
)
from ..errors import SchemaError
from ..filtration import BiFiltration, Filtration1P, Martingale1P, Martingale2P
from ..measure import Partition, SampleSpace, SimpleFunction, point_key

FORMAT = "ff/1"


# -- encoding ------------------------------------------------------------------


def enc_rational(x) -> dict:
    x = Fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


def enc_point(p):
    if isinstance(p, tuple):
        return [enc_point(q) for q in p]
    return p


def enc_value(v):
    if isinstance(v, tuple):
        return [enc_rational(x) for x in v]
    return enc_rational(v)


def enc_blocks(part: Partition) -> list:
    return [[enc_point(p) for p in sorted(b, key=point_key)] for b in part.blocks]


def enc_space(s: SampleSpace) -> dict:
    return {"points": [enc_point(p) for p in s.points], "weights": [enc_rational(w) for w in s.weights]}


def enc_function_body(f: SimpleFunction) -> dict:
    return {"blocks": enc_blocks(f.partition), "values": [enc_value(v) for v in f.values]}


def to_obj(x) -> dict:
    """Encode a core value as a tagged JSON-ready dict."""
    if isinstance(x, SampleSpace):
        return {"type": "space", **enc_space(x)}
    if isinstance(x, Partition):
        return {"type": "partition", "blocks": enc_blocks(x)}
    if isinstance(x, SimpleFunction):
        return {"type": "function", "space": enc_space(x.space), **enc_function_body(x)}
    if isinstance(x, Filtration1P):
        return {"type": "filtration1p", "space": enc_space(x.space), "levels": [enc_blocks(p) for p in x.levels]}
    if isinstance(x, BiFiltration):
        return {
            "type": "bifiltration",
            "space": enc_space(x.space),
            "grid": [[enc_blocks(p) for p in row] for row in x.grid],
        }
    if isinstance(x, Martingale1P):
        return {
            "type": "martingale1p",
            "filtration": to_obj(x.filtration),
            "terms": [enc_function_body(f) for f in x.terms],
        }
    if isinstance(x, Martingale2P):
        return {
            "type": "martingale2p",
            "filtration": to_obj(x.filtration),
            "terms": [[enc_function_body(f) for f in row] for row in x.terms],
        }
    if isinstance(x, Morphism):
        kind = "2p" if isinstance(x.model, CanonicalModel2P) else "1p"
        return {
            "type": "model",
            "kind": kind,
            "source": to_obj(x.model.source),
            "image": [[enc_point(p), x.image_map[p]] for p in x.model.space.points],
        }
    if isinstance(x, MorphismCertificate):
        return {
            "type": "certificate",
            "verdict": x.verdict,
            "measure_preserved": x.measure_preserved,
            "preimages_measurable": [[enc_point(k), v] for k, v in x.preimages_measurable.items()],
            "masses": [
                {"atom": [enc_point(p) for p in sorted(a, key=point_key)], "preimage": enc_rational(mu), "measure": enc_rational(pr)}
                for a, mu, pr in x.masses
            ],
            "empty_mass": enc_rational(x.empty_mass),
        }
    if isinstance(x, WeightedSystem):
        return {
            "type": "weighted_system",
            "space": enc_space(x.space),
            "A": [enc_point(a) for a in x.A],
            "B": [enc_point(b) for b in x.B],
            "fields": [[enc_point(a), enc_blocks(x.fields[a])] for a in x.A],
            "w": [[enc_point(a), enc_point(b), enc_function_body(x.w[a, b])] for a in x.A for b in x.B],
            "f": [[enc_point(a), enc_point(b), enc_function_body(x.f[a, b])] for a in x.A for b in x.B],
            "kappa": enc_rational(x.kappa),
            "delta_sq": None if x.delta_sq is None else enc_rational(x.delta_sq),
        }
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(x) -> str:
    doc = x if isinstance(x, dict) and "type" in x else to_obj(x)
    return json.dumps({"format": FORMAT, **doc}, ensure_ascii=False, sort_keys=True, indent=1)


def serialize(x) -> bytes:
    return dumps(x).encode("utf-8")


# -- decoding ------------------------------------------------------------------


def _ptr(path: str, key) -> str:
    key = str(key).replace("~", "~0").replace("/", "~1")
    return f"{path.rstrip('/')}/{key}"


def _get(obj, key, path, kind=None):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(_ptr(path, key), f"missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(_ptr(path, key), f"expected {kind.__name__ if isinstance(kind, type) else 'value'}")
    return val


def dec_rational(obj, path) -> Fraction:
    num = _get(obj, "num", path, str)
    den = _get(obj, "den", path, str)
    try:
        n, d = int(num), int(den)
    except ValueError:
        raise SchemaError(path, "num/den must be decimal integers") from None
    if d == 0:
        raise SchemaError(_ptr(path, "den"), "zero denominator")
    return Fraction(n, d)


def dec_point(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, str, list)):
        raise SchemaError(path, "point ids are integers, strings or arrays")
    if isinstance(x, list):
        return tuple(dec_point(q, _ptr(path, k)) for k, q in enumerate(x))
    return x


def dec_value(x, path):
    if isinstance(x, list):
        return tuple(dec_rational(v, _ptr(path, k)) for k, v in enumerate(x))
    return dec_rational(x, path)


def _list(obj, key, path) -> list:
    return _get(obj, key, path, list)


def dec_space(obj, path) -> SampleSpace:
    pts = _list(obj, "points", path)
    ws = _list(obj, "weights", path)
    points = tuple(dec_point(p, _ptr(_ptr(path, "points"), k)) for k, p in enumerate(pts))
    weights = tuple(dec_rational(w, _ptr(_ptr(path, "weights"), k)) for k, w in enumerate(ws))
    if len(points) != len(weights):
        raise SchemaError(_ptr(path, "weights"), "one weight per point is required")
    try:
        return SampleSpace(points, weights)
    except ValueError as e:
        raise SchemaError(path, str(e)) from None


def dec_blocks(x, path, space: SampleSpace | None = None) -> Partition:
    if not isinstance(x, list):
        raise SchemaError(path, "expected an array of blocks")
    blocks = []
    for k, b in enumerate(x):
        bp = _ptr(path, k)
        if not isinstance(b, list) or not b:
            raise SchemaError(bp, "blocks are non-empty arrays")
        blocks.append([dec_point(p, _ptr(bp, i)) for i, p in enumerate(b)])
    try:
        part = Partition(blocks)
    except ValueError as e:
        raise SchemaError(path, str(e)) from None
    if space is not None and part.points != space.full:
        raise SchemaError(path, "blocks do not cover the space")
    return part


def dec_function_body(obj, path, space: SampleSpace) -> SimpleFunction:
    part = dec_blocks(_get(obj, "blocks", path), _ptr(path, "blocks"), space)
    vals = _list(obj, "values", path)
    if len(vals) != len(part.blocks):
        raise SchemaError(_ptr(path, "values"), "one value per block is required")
    # values follow the block order as written; re-key them to canonical order
    written = _get(obj, "blocks", path)
    by_block = {}
    for k, (b, v) in enumerate(zip(written, vals)):
        block = frozenset(dec_point(p, path) for p in b)
        by_block[block] = dec_value(v, _ptr(_ptr(path, "values"), k))
    try:
        return SimpleFunction(space, part, tuple(by_block[b] for b in part.blocks))
    except ValueError as e:
        raise SchemaError(path, str(e)) from None


def dec_filtration1p(obj, path) -> Filtration1P:
    space = dec_space(_get(obj, "space", path), _ptr(path, "space"))
    levels = _list(obj, "levels", path)
    return Filtration1P(space, tuple(dec_blocks(x, _ptr(_ptr(path, "levels"), k), space) for k, x in enumerate(levels)))


def dec_bifiltration(obj, path) -> BiFiltration:
    space = dec_space(_get(obj, "space", path), _ptr(path, "space"))
    grid = _list(obj, "grid", path)
    rows = []
    for i, row in enumerate(grid):
        rp = _ptr(_ptr(path, "grid"), i)
        if not isinstance(row, list):
            raise SchemaError(rp, "expected an array")
        rows.append(tuple(dec_blocks(x, _ptr(rp, j), space) for j, x in enumerate(row)))
    if not rows:
        raise SchemaError(_ptr(path, "grid"), "empty grid")
    return BiFiltration(space, tuple(rows))


def _typed(obj, path, expected):
    t = _get(obj, "type", path, str)
    if t != expected:
        raise SchemaError(_ptr(path, "type"), f"expected type {expected!r}, got {t!r}")


def from_obj(obj, path: str = "/"):
    """Decode a tagged dict (the ``format`` field is checked by :func:`parse`)."""
    t = _get(obj, "type", path, str)
    if t == "space":
        return dec_space(obj, path)
    if t == "partition":
        return dec_blocks(_get(obj, "blocks", path), _ptr(path, "blocks"))
    if t == "function":
        space = dec_space(_get(obj, "space", path), _ptr(path, "space"))
        return dec_function_body(obj, path, space)
    if t == "filtration1p":
        return dec_filtration1p(obj, path)
    if t == "bifiltration":
        return dec_bifiltration(obj, path)
    if t == "martingale1p":
        fp = _ptr(path, "filtration")
        filt_obj = _get(obj, "filtration", path, dict)
        _typed(filt_obj, fp, "filtration1p")
        filt = dec_filtration1p(filt_obj, fp)
        terms = _list(obj, "terms", path)
        tp = _ptr(path, "terms")
        return Martingale1P(filt, tuple(dec_function_body(x, _ptr(tp, k), filt.space) for k, x in enumerate(terms)))
    if t == "martingale2p":
        fp = _ptr(path, "filtration")
        filt_obj = _get(obj, "filtration", path, dict)
        _typed(filt_obj, fp, "bifiltration")
        bf = dec_bifiltration(filt_obj, fp)
        terms = _list(obj, "terms", path)
        tp = _ptr(path, "terms")
        rows = []
        for i, row in enumerate(terms):
            rp = _ptr(tp, i)
            if not isinstance(row, list):
                raise SchemaError(rp, "expected an array")
            rows.append([dec_function_body(x, _ptr(rp, j), bf.space) for j, x in enumerate(row)])
        if not rows or not rows[0]:
            raise SchemaError(tp, "empty term grid")
        return Martingale2P(bf, rows)
    if t == "model":
        return dec_model(obj, path)
    if t == "weighted_system":
        return dec_weighted_system(obj, path)
    if t == "certificate":
        return dec_certificate(obj, path)
    raise SchemaError(_ptr(path, "type"), f"unknown type {t!r}")


def dec_model(obj, path, cap: int | None = None) -> Morphism:
    """Rebuild the canonical model from its source and restore the stored image map."""
    kind = _get(obj, "kind", path, str)
    sp = _ptr(path, "source")
    src_obj = _get(obj, "source", path, dict)
    if kind == "1p":
        _typed(src_obj, sp, "filtration1p")
        model, morph = build_canonical_1p(dec_filtration1p(src_obj, sp), cap=cap)
    elif kind == "2p":
        _typed(src_obj, sp, "bifiltration")
        model, morph = build_canonical_2p(dec_bifiltration(src_obj, sp), cap=cap)
    else:
        raise SchemaError(_ptr(path, "kind"), "kind must be '1p' or '2p'")
    image = {}
    ip = _ptr(path, "image")
    n_atoms = len(model.source.finest.blocks)
    for k, entry in enumerate(_list(obj, "image", path)):
        ep = _ptr(ip, k)
        if not isinstance(entry, list) or len(entry) != 2:
            raise SchemaError(ep, "expected [point, atom index or null]")
        p = dec_point(entry[0], _ptr(ep, 0))
        a = entry[1]
        if a is not None and (isinstance(a, bool) or not isinstance(a, int) or not 0 <= a < n_atoms):
            raise SchemaError(_ptr(ep, 1), "atom index out of range")
        image[p] = a
    if set(image) != set(model.space.points):
        raise SchemaError(ip, "image map does not cover the product space")
    return Morphism(model, image)


def dec_certificate(obj, path) -> MorphismCertificate:
    measurable = {}
    mp = _ptr(path, "preimages_measurable")
    for k, entry in enumerate(_list(obj, "preimages_measurable", path)):
        if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[1], bool):
            raise SchemaError(_ptr(mp, k), "expected [index, bool]")
        measurable[dec_point(entry[0], _ptr(mp, k))] = entry[1]
    rows = []
    rp = _ptr(path, "masses")
    for k, row in enumerate(_list(obj, "masses", path)):
        ep = _ptr(rp, k)
        atom = frozenset(dec_point(p, ep) for p in _get(row, "atom", ep, list))
        rows.append((atom, dec_rational(_get(row, "preimage", ep), _ptr(ep, "preimage")),
                     dec_rational(_get(row, "measure", ep), _ptr(ep, "measure"))))
    empty = dec_rational(_get(obj, "empty_mass", path), _ptr(path, "empty_mass"))
    return MorphismCertificate(measurable, tuple(rows), empty)


def dec_weighted_system(obj, path) -> WeightedSystem:
    space = dec_space(_get(obj, "space", path), _ptr(path, "space"))
    A = tuple(dec_point(a, _ptr(_ptr(path, "A"), k)) for k, a in enumerate(_list(obj, "A", path)))
    B = tuple(dec_point(b, _ptr(_ptr(path, "B"), k)) for k, b in enumerate(_list(obj, "B", path)))
    fields = {}
    for k, (a, blocks) in enumerate(_list(obj, "fields", path)):
        fields[dec_point(a, path)] = dec_blocks(blocks, _ptr(_ptr(path, "fields"), k), space)
    w, f = {}, {}
    for name, target in (("w", w), ("f", f)):
        for k, entry in enumerate(_list(obj, name, path)):
            ep = _ptr(_ptr(path, name), k)
            if not isinstance(entry, list) or len(entry) != 3:
                raise SchemaError(ep, "expected [alpha, beta, function]")
            target[dec_point(entry[0], ep), dec_point(entry[1], ep)] = dec_function_body(entry[2], _ptr(ep, 2), space)
    kappa = dec_rational(_get(obj, "kappa", path), _ptr(path, "kappa"))
    ds = obj.get("delta_sq")
    delta_sq = None if ds is None else dec_rational(ds, _ptr(path, "delta_sq"))
    try:
        return WeightedSystem(space, A, B, fields, w, f, kappa, delta_sq)
    except (ValueError, KeyError) as e:
        raise SchemaError(path, str(e)) from None


def parse(data, cap: int | None = None):
    """Parse bytes or text of an ff/1 document into a core value."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError("/", f"invalid JSON: {e.msg}") from None
    if not isinstance(obj, dict):
        raise SchemaError("/", "expected an object")
    fmt = _get(obj, "format", "/")
    if fmt != FORMAT:
        raise SchemaError("/format", f"unsupported format {fmt!r}")
    if obj.get("type") == "model" and cap is not None:
        return dec_model(obj, "/", cap)
    return from_obj(obj, "/")


def structurally_equal(a, b) -> bool:
    """Equality used for round-trip checks (functions compare by partition and values)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, SimpleFunction):
        return a.space == b.space and a.partition == b.partition and a.values == b.values
    if isinstance(a, (Martingale1P, Martingale2P)):
        return a.filtration == b.filtration and all(
            structurally_equal(x, y) for (_, x), (_, y) in zip(a.indexed_terms(), b.indexed_terms())
        )
    if isinstance(a, Morphism):
        return a.model.source == b.model.source and a.image_map == b.image_map
    if isinstance(a, WeightedSystem):
        return (
            a.space == b.space
            and a.A == b.A
            and a.B == b.B
            and a.fields == b.fields
            and a.kappa == b.kappa
            and a.delta_sq == b.delta_sq
            and a.w.keys() == b.w.keys()
            and all(structurally_equal(a.w[k], b.w[k]) and structurally_equal(a.f[k], b.f[k]) for k in a.w)
        )
    return a == b
