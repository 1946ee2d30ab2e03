import pytest
import yaml

from escaperate import data_path, escape_rate
from escaperate.amalgam import exit_rate, random_amalgam
from escaperate.exceptions import AmalgamError, ParseError, WalkError
from escaperate.io import (amalgam_from_dict, amalgam_to_dict, file_digest, file_kind, parse_amalgam_file,
                           parse_walk_file, specs_equal, walk_from_dict, walk_to_dict, write_amalgam, write_walk)

SHIPPED = ["three_letter_walk.yaml", "three_letter_walk_completed.yaml", "birth_death_0.6.yaml", "birth_death_0.75.yaml",
           "birth_death_0.9.yaml", "two_class.yaml", "cyclic_amalgam_d6.yaml", "cyclic_amalgam_d8.yaml",
           "cyclic_amalgam_d10.yaml", "cyclic_amalgam_d12.yaml", "z2_free_z2.yaml"]


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_files_parse(name):
    path = data_path(name)
    kind = file_kind(path)
    model = parse_walk_file(path) if kind == "walk" else parse_amalgam_file(path)
    assert model is not None
    assert len(file_digest(path)) == 64


def test_walk_round_trip(tmp_path):
    w = parse_walk_file(data_path("three_letter_walk_completed.yaml"))
    out = tmp_path / "w.yaml"
    write_walk(w, out)
    back = parse_walk_file(out)
    assert walk_to_dict(back) == walk_to_dict(w)
    assert escape_rate(back).ell == escape_rate(w).ell


def test_amalgam_round_trip(tmp_path):
    import numpy as np
    rng = np.random.default_rng(1)
    for k in range(5):
        spec = random_amalgam(rng)
        out = tmp_path / f"a{k}.yaml"
        write_amalgam(spec, out)
        back = parse_amalgam_file(out)
        assert specs_equal(spec, back)
        assert exit_rate(back).ell == pytest.approx(exit_rate(spec).ell, abs=1e-13)


def test_cyclic_shorthand_matches_table():
    doc = yaml.safe_load(open(data_path("cyclic_amalgam_d6.yaml")))
    spec = amalgam_from_dict(doc)
    assert [len(G) for G in spec.factors] == [6, 6]
    assert specs_equal(spec, amalgam_from_dict(amalgam_to_dict(spec)))


@pytest.mark.parametrize("doc, where", [
    ({"alphabet": [{"symbol": "a"}, {"symbol": "a"}], "pair_transitions": {}}, "duplicate"),
    ({"alphabet": [{"symbol": "a"}], "pair_transitions": {"aa": [{"to": "aaa", "p": "x"}]}}, "aa"),
    ({"alphabet": [{"symbol": "a"}], "pair_transitions": {"aa": [{"p": 1}]}}, "aa"),
])
def test_walk_parse_errors_name_location(doc, where):
    with pytest.raises((ParseError, WalkError)) as info:
        walk_from_dict(doc, "f.yaml")
    assert where in str(info.value)


def test_bad_row_mass_rejected(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("alphabet: [{symbol: a, length: 1}]\npair_transitions:\n  aa: [{to: aaa, p: 0.5}]\n")
    with pytest.raises(WalkError):
        parse_walk_file(p)
    assert parse_walk_file(p, validate=False).pair_rows


def test_missing_file_and_bad_yaml(tmp_path):
    with pytest.raises(ParseError):
        parse_walk_file(tmp_path / "none.yaml")
    p = tmp_path / "x.yaml"
    p.write_text("a: [1, 2\n")
    with pytest.raises(ParseError):
        file_kind(p)


def test_unknown_kind(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("foo: 1\n")
    with pytest.raises(ParseError):
        file_kind(p)


def test_amalgam_bad_embedding(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("subgroup: {cyclic: 2, generator: z}\nfactors: [{cyclic: 4}, {cyclic: 4, generator: b}]\n"
                 "embeddings: [{e: e, z: a}, {e: e, z: b2}]\nmeasures: [{a: 1}, {b: 1}]\n")
    with pytest.raises(AmalgamError):
        parse_amalgam_file(p)
