import itertools

import numpy as np
import pytest

from escaperate.amalgam import (AmalgamSpec, FiniteGroup, catalog, cyclic, cyclic_amalgam, from_elements,
                                identity_word, induced_mu, injective_homomorphisms, parse_word, format_word,
                                random_amalgam, recurrence_check, SubgroupEmbedding, validate_amalgam, word_inverse,
                                word_length, word_multiply)
from escaperate.amalgam.model import NormalWord, element_lengths, is_natural
from escaperate.exceptions import (AmalgamError, BadCosets, BadMeasure, BadWeights, NotAGroup,
                                   NotAHomomorphism)


def test_catalog_groups_pass_checks():
    cat = catalog()
    assert len(cat) == 14
    for name, G in cat.items():
        G.check()
    assert len(cat["Q8"]) == 8 and len(cat["S3"]) == 6


def test_nonabelian_catalog_groups():
    for name in ("S3", "D4", "Q8"):
        T = catalog()[name].table
        assert not np.array_equal(T, T.T)


def test_from_table_by_name_and_index():
    G = FiniteGroup.from_table(["e", "x"], [["e", "x"], ["x", "e"]], "e")
    assert G.mul(1, 1) == 0
    K = FiniteGroup.from_table(["e", "x"], [[0, 1], [1, 0]], "e")
    assert np.array_equal(G.table, K.table)


@pytest.mark.parametrize("table", [
    [["e", "x"], ["x", "x"]],  # no inverse for x
    [["e", "x"], ["e", "e"]],  # identity fails on the right
])
def test_check_rejects_non_groups(table):
    with pytest.raises(NotAGroup):
        FiniteGroup.from_table(["e", "x"], table, "e").check()


def test_check_rejects_non_associative():
    # a Latin square with identity that is not a group
    names = ["e", "a", "b", "c", "d"]
    t = [[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]]
    with pytest.raises(NotAGroup, match="associative"):
        FiniteGroup.from_table(names, t, "e").check()


def test_injective_homomorphism_counts():
    z2, c4 = cyclic(2), cyclic(4)
    assert len(injective_homomorphisms(z2, c4)) == 1
    assert len(injective_homomorphisms(z2, catalog()["V4"])) == 3
    assert len(injective_homomorphisms(cyclic(3), c4)) == 0
    assert len(injective_homomorphisms(c4, catalog()["Q8"])) == 6


def test_d6_normal_form_identities():
    spec = cyclic_amalgam(6)
    # a3 = b3 is the central subgroup generator
    assert parse_word(spec, "a3 b") == parse_word(spec, "b4")
    assert parse_word(spec, "a b3 a3") == parse_word(spec, "a")
    assert parse_word(spec, "a3 b a b2") == parse_word(spec, "b a4 b2")
    assert format_word(spec, parse_word(spec, "a3")) == "z"
    assert format_word(spec, identity_word(spec)) == "e"
    assert len(parse_word(spec, "a b a b")) == 4


def test_parse_word_errors():
    spec = cyclic_amalgam(6)
    with pytest.raises(AmalgamError):
        parse_word(spec, "q")
    with pytest.raises(AmalgamError):
        parse_word(spec, "3:a")


def _random_words(spec, rng, count, max_len=5):
    elems = [(i, g) for i, G in enumerate(spec.factors) for g in range(len(G))]
    out = []
    for _ in range(count):
        k = int(rng.integers(0, max_len + 1))
        out.append(from_elements(spec, [elems[j] for j in rng.integers(len(elems), size=k)]))
    return out


def _in_normal_form(spec, w: NormalWord):
    lay = spec.layout
    for (i, x), (j, _) in zip(w.reps, w.reps[1:]):
        if i == j:
            return False
    return all(lay.in_h[i][x] < 0 and x in lay.reps[i] for i, x in w.reps)


def test_word_multiplication_is_associative_with_inverses():
    rng = np.random.default_rng(3)
    for spec in [cyclic_amalgam(6)] + [random_amalgam(rng, max_factor=8) for _ in range(8)]:
        e = identity_word(spec)
        words = _random_words(spec, rng, 12)
        for w in words:
            assert _in_normal_form(spec, w)
            assert word_multiply(spec, w, word_inverse(spec, w)) == e
            assert word_multiply(spec, word_inverse(spec, w), w) == e
            assert word_multiply(spec, w, e) == w == word_multiply(spec, e, w)
        for u, v, w in itertools.islice(itertools.product(words, repeat=3), 200):
            left = word_multiply(spec, word_multiply(spec, u, v), w)
            right = word_multiply(spec, u, word_multiply(spec, v, w))
            assert left == right


def test_length_counts_representatives():
    spec = cyclic_amalgam(6).with_lengths(({"a": 2.0}, {}))
    w = parse_word(spec, "a b a")
    assert word_length(spec, w) == 3
    assert word_length(spec, w, element_lengths(spec)) == 5
    assert not is_natural(spec, element_lengths(spec))
    assert is_natural(spec, element_lengths(spec, "natural"))


def test_induced_mu_sums_to_one():
    rng = np.random.default_rng(8)
    for _ in range(10):
        spec = random_amalgam(rng)
        assert sum(induced_mu(spec).values()) == pytest.approx(1.0, abs=1e-12)
    mu = induced_mu(cyclic_amalgam(6))
    assert mu == pytest.approx({"h:e": 0.0, "h:z": 0.0, "1:a": 0.5, "1:a2": 0.0, "1:a4": 0.0, "1:a5": 0.0,
                                "2:b": 0.5, "2:b2": 0.0, "2:b4": 0.0, "2:b5": 0.0})


def test_subgroup_mass_from_every_factor_is_pooled():
    z2, c4 = cyclic(2, "z"), cyclic(4)
    spec = AmalgamSpec.build([c4, cyclic(4, "b")], z2, [{"e": "e", "z": "a2"}, {"e": "e", "z": "b2"}],
                             measures=[{"a2": "1/2", "a": "1/2"}, {"b2": "1/4", "b": "3/4"}])
    mu = induced_mu(spec)
    assert mu["h:z"] == pytest.approx(0.5 * 0.5 + 0.5 * 0.25)


def test_recurrence_gate():
    z2 = cyclic(2, "x")
    spec = AmalgamSpec.build([cyclic(2, "a"), cyclic(2, "b")], cyclic(1, "e"), [{"e": "e"}, {"e": "e"}],
                             measures=[{"a": 1}, {"b": 1}])
    assert recurrence_check(spec)
    assert validate_amalgam(spec).recurrent
    assert not recurrence_check(cyclic_amalgam(6))
    assert not recurrence_check(AmalgamSpec.build(
        [cyclic(2, "a"), cyclic(2, "b"), z2], cyclic(1, "e"), [{"e": "e"}] * 3,
        measures=[{"a": 1}, {"b": 1}, {"x": 1}]))


@pytest.mark.parametrize("kw, exc", [
    (dict(maps=[{"e": "e", "z": "a"}, {"e": "e", "z": "b3"}]), NotAHomomorphism),
    (dict(maps=[{"e": "e", "z": "e"}, {"e": "e", "z": "b3"}]), NotAHomomorphism),
    (dict(weights=[0.7, 0.7]), BadWeights),
    (dict(weights=[1.0, 0.0]), BadWeights),
    (dict(measures=[{"a": 0.5}, {"b": 1}]), BadMeasure),
    (dict(representatives=[["e", "a", "a3"], ["e", "b", "b2"]]), BadCosets),
    (dict(representatives=[["a", "e", "a2"], ["e", "b", "b2"]]), BadCosets),
    (dict(rep_lengths=[{"a3": 2}, {}]), BadCosets),
])
def test_validation_errors(kw, exc):
    args = dict(maps=[{"e": "e", "z": "a3"}, {"e": "e", "z": "b3"}], measures=[{"a": 1}, {"b": 1}])
    args.update(kw)
    spec = AmalgamSpec.build([cyclic(6, "a"), cyclic(6, "b")], cyclic(2, "z"), **args)
    with pytest.raises(exc):
        validate_amalgam(spec)


def test_needs_two_factors():
    spec = AmalgamSpec.build([cyclic(4)], cyclic(2, "z"), [{"e": "e", "z": "a2"}], measures=[{"a": 1}])
    with pytest.raises(AmalgamError):
        validate_amalgam(spec)


def test_embedding_must_be_homomorphism_of_right_size():
    spec = cyclic_amalgam(6)
    bad = AmalgamSpec(spec.factors, SubgroupEmbedding(cyclic(3, "z"), (np.array([0, 2, 4]), np.array([0, 1, 2]))),
                      spec.weights, spec.measures)
    with pytest.raises(NotAHomomorphism):
        validate_amalgam(bad)


def test_random_amalgams_validate():
    rng = np.random.default_rng(0)
    for _ in range(30):
        spec = random_amalgam(rng)
        d = validate_amalgam(spec)
        assert not d.recurrent
        assert all(len(G) <= 8 for G in spec.factors) and len(spec.subgroup) <= 4
