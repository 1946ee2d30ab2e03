"""YAML files for walks and amalgams.

Walk file::

    alphabet:
      - {symbol: a, length: 1}
    pair_transitions:
      aa: [{to: aaa, p: 1/3}, {to: a, p: 2/3}]
    single_transitions:        # optional
      a: [{to: aa, p: 1}]
    empty_transitions:         # optional; "" is the empty word
      - {to: a, p: 1}

Amalgam file::

    subgroup: {elements: [e, z], table: [[e, z], [z, e]], identity: e}
    factors:
      - {elements: [...], table: [[...], ...], identity: e}
      - {cyclic: 6, generator: b}          # shorthand for Z/n
    embeddings: [{e: e, z: a3}, {e: e, z: b3}]
    weights: [1/2, 1/2]                    # optional, uniform by default
    measures: [{a: 1}, {b: 1}]
    representatives: [[e, a, a2], [e, b, b2]]   # optional
    lengths: [{a: 1, a2: 2}, {b: 1, b2: 1}]      # optional, per representative

Probabilities may be numbers or fraction strings.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .amalgam.groups import FiniteGroup, cyclic
from .amalgam.model import AmalgamSpec, validate_amalgam
from .exceptions import AmalgamError, ParseError, WalkError
from .walk import RegularLanguageWalk, validate_walk


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(doc, dict) or not doc:
        raise ParseError(f"{path}: expected a non-empty mapping at the top level")
    return doc


def file_kind(path) -> str:
    """``"walk"`` or ``"amalgam"``, from the ``kind`` key or the keys present."""
    doc = _load(path)
    return _kind(doc, path)


def _kind(doc, where):
    kind = doc.get("kind")
    if kind in ("walk", "amalgam"):
        return kind
    if kind is not None:
        raise ParseError(f"{where}: unknown kind {kind!r}")
    if "factors" in doc:
        return "amalgam"
    if "pair_transitions" in doc:
        return "walk"
    raise ParseError(f"{where}: cannot tell whether this is a walk or an amalgam file")


def _prob(v, where) -> float:
    try:
        return float(Fraction(v.strip())) if isinstance(v, str) else float(v)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ParseError(f"{where}: {v!r} is not a probability") from None


def _target(v, where):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return [str(s) for s in v]
    if isinstance(v, (str, int)):
        return str(v)
    raise ParseError(f"{where}: bad target {v!r}")


def _row(entries, where) -> list:
    if not isinstance(entries, list):
        raise ParseError(f"{where}: expected a list of {{to, p}} entries")
    out = []
    for k, ent in enumerate(entries):
        loc = f"{where}[{k}]"
        if not isinstance(ent, dict) or "to" not in ent or "p" not in ent:
            raise ParseError(f"{loc}: expected {{to: ..., p: ...}}")
        out.append((_target(ent["to"], loc), _prob(ent["p"], loc)))
    return out


def walk_from_dict(doc: dict, where: str = "<walk>") -> RegularLanguageWalk:
    alpha = doc.get("alphabet")
    if not isinstance(alpha, list) or not alpha:
        raise ParseError(f"{where}: 'alphabet' must be a non-empty list")
    letters = []
    for k, ent in enumerate(alpha):
        if isinstance(ent, dict):
            if "symbol" not in ent:
                raise ParseError(f"{where}: alphabet[{k}] has no symbol")
            sym, length = str(ent["symbol"]), ent.get("length", 1)
        else:
            sym, length = str(ent), 1
        if not sym or any(c.isspace() for c in sym) or sym in ("ε", "eps"):
            raise ParseError(f"{where}: alphabet[{k}] symbol {sym!r} is not allowed")
        try:
            length = float(length)
        except (TypeError, ValueError):
            raise ParseError(f"{where}: alphabet[{k}] length {length!r} is not a number") from None
        letters.append((sym, length))
    syms = [s for s, _ in letters]
    dup = {s for s in syms if syms.count(s) > 1}
    if dup:
        raise ParseError(f"{where}: duplicate letter symbol(s) {sorted(dup)}")
    pairs = doc.get("pair_transitions")
    if not isinstance(pairs, dict) or not pairs:
        raise ParseError(f"{where}: 'pair_transitions' must be a non-empty mapping")
    pair_rows = {str(k): _row(v, f"{where}: pair_transitions.{k}") for k, v in pairs.items()}
    single_rows = None
    if doc.get("single_transitions") is not None:
        st = doc["single_transitions"]
        if not isinstance(st, dict):
            raise ParseError(f"{where}: 'single_transitions' must be a mapping")
        single_rows = {str(k): _row(v, f"{where}: single_transitions.{k}") for k, v in st.items()}
    empty_row = None
    if doc.get("empty_transitions") is not None:
        empty_row = _row(doc["empty_transitions"], f"{where}: empty_transitions")
    try:
        walk = RegularLanguageWalk.from_rows(letters, pair_rows, single_rows, empty_row)
    except WalkError as exc:
        raise type(exc)(f"{where}: {exc}") from None
    return walk


def parse_walk_file(path, validate: bool = True) -> RegularLanguageWalk:
    doc = _load(path)
    if _kind(doc, path) != "walk":
        raise ParseError(f"{path}: not a walk file")
    walk = walk_from_dict(doc, str(path))
    if validate:
        try:
            validate_walk(walk)
        except WalkError as exc:
            raise type(exc)(f"{path}: {exc}") from None
    return walk


def walk_to_dict(walk: RegularLanguageWalk) -> dict:
    fmt = walk.format_word

    def row(r):
        return [{"to": fmt(t), "p": float(p)} for t, p in r.items()]

    doc = {"kind": "walk",
           "alphabet": [{"symbol": l.symbol, "length": float(l.length)} for l in walk.alphabet],
           "pair_transitions": {fmt(k): row(r) for k, r in walk.pair_rows.items()}}
    if walk.single_rows is not None:
        doc["single_transitions"] = {k[0]: row(r) for k, r in walk.single_rows.items()}
    if walk.empty_row is not None:
        doc["empty_transitions"] = row(walk.empty_row)
    return doc


def _group(doc, where) -> FiniteGroup:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected a group mapping")
    if "cyclic" in doc:
        try:
            n = int(doc["cyclic"])
        except (TypeError, ValueError):
            raise ParseError(f"{where}: 'cyclic' must be an integer") from None
        if n < 1:
            raise ParseError(f"{where}: 'cyclic' must be positive")
        return cyclic(n, str(doc.get("generator", "a")), str(doc.get("identity", "e")))
    for key in ("elements", "table", "identity"):
        if key not in doc:
            raise ParseError(f"{where}: missing {key!r}")
    if not isinstance(doc["elements"], list) or not isinstance(doc["table"], list):
        raise ParseError(f"{where}: 'elements' and 'table' must be lists")
    try:
        return FiniteGroup.from_table(doc["elements"], doc["table"], doc["identity"])
    except AmalgamError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def _per_factor(doc, key, r, where, required=False):
    v = doc.get(key)
    if v is None:
        if required:
            raise ParseError(f"{where}: missing {key!r}")
        return None
    if not isinstance(v, list) or len(v) != r:
        raise ParseError(f"{where}: {key!r} must list one entry per factor ({r})")
    return v


def amalgam_from_dict(doc: dict, where: str = "<amalgam>") -> AmalgamSpec:
    if "subgroup" not in doc:
        raise ParseError(f"{where}: missing 'subgroup'")
    H = _group(doc["subgroup"], f"{where}: subgroup")
    fac = doc.get("factors")
    if not isinstance(fac, list) or not fac:
        raise ParseError(f"{where}: 'factors' must be a non-empty list")
    factors = [_group(f, f"{where}: factors[{k}]") for k, f in enumerate(fac)]
    r = len(factors)
    emb = _per_factor(doc, "embeddings", r, where, required=True)
    for k, m in enumerate(emb):
        if not isinstance(m, dict):
            raise ParseError(f"{where}: embeddings[{k}] must map subgroup elements to factor elements")
        extra = set(map(str, m)) - set(H.elements)
        if extra:
            raise ParseError(f"{where}: embeddings[{k}] maps unknown subgroup element(s) {sorted(extra)}")
    weights = doc.get("weights")
    if weights is not None:
        if not isinstance(weights, list) or len(weights) != r:
            raise ParseError(f"{where}: 'weights' must list one weight per factor")
        weights = [_prob(w, f"{where}: weights[{k}]") for k, w in enumerate(weights)]
    meas = _per_factor(doc, "measures", r, where, required=True)
    measures = []
    for k, m in enumerate(meas):
        if not isinstance(m, dict):
            raise ParseError(f"{where}: measures[{k}] must map element names to probabilities")
        measures.append({str(x): _prob(p, f"{where}: measures[{k}].{x}") for x, p in m.items()})
    reps = _per_factor(doc, "representatives", r, where)
    lens = _per_factor(doc, "lengths", r, where)
    if lens is not None:
        for k, d in enumerate(lens):
            if d is not None and not isinstance(d, dict):
                raise ParseError(f"{where}: lengths[{k}] must map representatives to lengths")
        try:
            lens = [{str(x): float(v) for x, v in (d or {}).items()} for d in lens]
        except (TypeError, ValueError):
            raise ParseError(f"{where}: lengths must be numbers") from None
    try:
        emb_names = [{str(h): str(v) for h, v in m.items()} for m in emb]
        for k, m in enumerate(emb_names):
            missing = set(H.elements) - set(m)
            if missing:
                raise ParseError(f"{where}: embeddings[{k}] does not map {sorted(missing)}")
        reps = [[str(x) for x in rl] for rl in reps] if reps is not None else None
        return AmalgamSpec.build(factors, H, emb_names, weights, measures, reps, lens)
    except AmalgamError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def parse_amalgam_file(path, validate: bool = True) -> AmalgamSpec:
    doc = _load(path)
    if _kind(doc, path) != "amalgam":
        raise ParseError(f"{path}: not an amalgam file")
    spec = amalgam_from_dict(doc, str(path))
    if validate:
        try:
            validate_amalgam(spec)
        except AmalgamError as exc:
            raise type(exc)(f"{path}: {exc}") from None
    return spec


def _group_dict(G: FiniteGroup) -> dict:
    return {"elements": list(G.elements), "table": G.table_names(), "identity": G.elements[G.identity]}


def amalgam_to_dict(spec: AmalgamSpec) -> dict:
    H = spec.subgroup
    doc = {
        "kind": "amalgam",
        "subgroup": _group_dict(H),
        "factors": [_group_dict(G) for G in spec.factors],
        "embeddings": [{H.elements[h]: G.elements[int(phi[h])] for h in range(len(H))}
                       for G, phi in zip(spec.factors, spec.embedding.maps)],
        "weights": [float(w) for w in spec.weights],
        "measures": [{G.elements[g]: float(p) for g, p in enumerate(m) if p > 0}
                     for G, m in zip(spec.factors, spec.measures)],
    }
    if spec.representatives is not None:
        doc["representatives"] = [[G.elements[x] for x in rl]
                                  for G, rl in zip(spec.factors, spec.representatives)]
    if spec.rep_lengths is not None:
        doc["lengths"] = [dict(d or {}) for d in spec.rep_lengths]
    return doc


def dump_yaml(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, width=120)


def write_walk(walk: RegularLanguageWalk, path) -> None:
    Path(path).write_text(dump_yaml(walk_to_dict(walk)), encoding="utf-8")


def write_amalgam(spec: AmalgamSpec, path) -> None:
    Path(path).write_text(dump_yaml(amalgam_to_dict(spec)), encoding="utf-8")


def specs_equal(a: AmalgamSpec, b: AmalgamSpec) -> bool:
    """Structural equality of two amalgam specs (tables, maps, weights, measures)."""
    if a.r != b.r or a.subgroup.elements != b.subgroup.elements:
        return False
    if not np.array_equal(a.subgroup.table, b.subgroup.table):
        return False
    for Ga, Gb, pa, pb, ma, mb in zip(a.factors, b.factors, a.embedding.maps, b.embedding.maps,
                                      a.measures, b.measures):
        if Ga.elements != Gb.elements or Ga.identity != Gb.identity:
            return False
        if not (np.array_equal(Ga.table, Gb.table) and np.array_equal(pa, pb) and np.array_equal(ma, mb)):
            return False
    return (np.array_equal(a.weights, b.weights) and a.representatives == b.representatives
            and a.rep_lengths == b.rep_lengths)
