import numpy as np
import pytest

from escaperate import RegularLanguageWalk, closed_classes, data_path, escape_rate
from escaperate.exceptions import NonDeterministicRate
from escaperate.io import parse_walk_file

PRINTED_NU = {"aaa": 0.32475, "aab": 0.13194, "aba": 0.12597, "abc": 0.08021, "baa": 0.05350,
              "bca": 0.13095, "bab": 0.02174, "caa": 0.07844, "cab": 0.05251}


def bd(p):
    return RegularLanguageWalk.from_rows("a", {"aa": {"aaa": p, "a": 1 - p}})


@pytest.fixture(scope="module")
def example():
    return escape_rate(parse_walk_file(data_path("three_letter_walk.yaml")))


def test_three_letter_example_matches_printed_values(example):
    assert example.nu.as_dict().keys() == PRINTED_NU.keys()
    for k, v in PRINTED_NU.items():
        assert example.nu[k] == pytest.approx(v, abs=5e-5)
    assert example.Lambda == pytest.approx(3.78507, abs=1e-4)
    assert example.ell == pytest.approx(0.264196, abs=1e-4)


def test_three_letter_example_boundary_rows_do_not_change_rate(example):
    full = escape_rate(parse_walk_file(data_path("three_letter_walk_completed.yaml")))
    assert full.ell == pytest.approx(example.ell, abs=1e-14)


def test_stationary_law_is_invariant(example):
    nu, Q = example.nu.probs, example.kernel.matrix
    assert np.all(nu >= 0)
    assert nu.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(nu @ Q - nu)) < 1e-12


@pytest.mark.parametrize("p", [0.6, 0.75, 0.9])
def test_birth_death_closed_form(p):
    rep = escape_rate(bd(p))
    assert rep.ell == pytest.approx(2 * p - 1, abs=1e-10)
    assert rep.Lambda == pytest.approx(1 / (2 * p - 1), abs=1e-8)
    assert rep.speed_natural == pytest.approx(2 * p - 1, abs=1e-10)
    assert len(rep.kernel) == 1 and rep.kernel.matrix[0, 0] == pytest.approx(1.0)


def test_length_scales_rate():
    rep = escape_rate(bd(0.75), {"a": 3.0})
    assert rep.ell == pytest.approx(1.5, abs=1e-10)
    assert rep.Delta == pytest.approx(3.0)


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_critical_or_recurrent_has_zero_rate(p):
    rep = escape_rate(bd(p))
    assert not rep.transient
    assert rep.ell == 0.0
    assert rep.note


def test_counterexample_has_two_closed_classes():
    w = parse_walk_file(data_path("two_class.yaml"))
    with pytest.raises(NonDeterministicRate) as info:
        escape_rate(w)
    assert len(info.value.classes) == 2
    rates = sorted(c["ell"] for c in info.value.class_rates)
    assert rates == pytest.approx([0.4, 0.6], abs=1e-10)


def test_equal_parameters_still_split_into_two_classes():
    w = RegularLanguageWalk.from_rows("ab", {"aa": {"aaa": 0.7, "a": 0.3}, "bb": {"bbb": 0.7, "b": 0.3}})
    with pytest.raises(NonDeterministicRate) as info:
        escape_rate(w)
    assert len(info.value.classes) == 2


def test_kernel_rows_are_stochastic(walks):
    assert len(walks) >= 50
    for _, rep in walks:
        assert np.max(np.abs(rep.kernel.matrix.sum(axis=1) - 1.0)) < 1e-10
        assert rep.kernel.matrix.min() >= 0


def test_unit_lengths_give_unit_delta(walks):
    for _, rep in walks:
        assert rep.Delta == pytest.approx(1.0, abs=1e-10)
        assert rep.Lambda >= 1.0
        assert rep.ell == pytest.approx(rep.speed_natural, abs=1e-12)


def test_single_closed_class(walks):
    for _, rep in walks:
        assert len(closed_classes(rep.kernel)) == 1


def test_rate_is_linear_in_lengths(walks):
    rng = np.random.default_rng(5)
    for w, rep in walks[:10]:
        l1, l2 = rng.uniform(0.5, 2, w.n_letters), rng.uniform(0.5, 2, w.n_letters)
        a = escape_rate(w, l1).ell + escape_rate(w, l2).ell
        assert escape_rate(w, l1 + l2).ell == pytest.approx(a, abs=1e-12)
