import numpy as np
import pytest

from escaperate import RegularLanguageWalk, compute_K, compute_xi, differentiate_H, solve_Gbar, solve_H
from escaperate.exceptions import NoConvergence, SingularSystem
from escaperate.series import iterate_H, level_matrices

from helpers import richardson, transient_walks, truncated_H, truncated_escape


def bd(p):
    return RegularLanguageWalk.from_rows("a", {"aa": {"aaa": p, "a": 1 - p}})


def jets(walk):
    H = differentiate_H(walk, solve_H(walk))
    G = solve_Gbar(walk, H)
    return H, G, compute_xi(walk, H), compute_K(walk, G)


@pytest.fixture(scope="module")
def fast_walks():
    # quick escape, so a depth cutoff of 16 is accurate to well below 1e-6
    return [(w, r) for w, r in transient_walks(2, 12, n_letters=2, push=0.75) if r.ell > 0.3]


def test_birth_death_hand_values():
    # H = 1/4 + 3/4 H^2 has least root 1/3; differentiating in z gives H' = 2/3
    H, G, xi, K = jets(bd(0.75))
    assert H["aa", "a"].value == pytest.approx(1 / 3, abs=1e-14)
    assert H["aa", "a"].dz == pytest.approx(2 / 3, abs=1e-12)
    assert G["aa", "aa"].value == pytest.approx(4 / 3, abs=1e-12)
    assert G["aa", "aa"].dz == pytest.approx(4 / 3, abs=1e-12)
    assert xi["aaa"] == pytest.approx(0.5, abs=1e-14)
    assert K["aa", "aaa"].value == pytest.approx(1.0, abs=1e-12)
    assert K["aa", "aaa"].dz == pytest.approx(2.0, abs=1e-12)


def test_pure_growth_escapes_surely():
    H, G, xi, K = jets(RegularLanguageWalk.from_rows("a", {"aa": {"aaa": 1.0}}))
    assert H["aa", "a"].value == 0.0
    assert xi["aaa"] == 1.0


def test_recurrent_side_has_full_descent():
    H = solve_H(bd(0.4))
    assert H["aa", "a"].value == pytest.approx(1.0, abs=1e-12)


def test_critical_walk_has_singular_derivative_system():
    with pytest.raises(SingularSystem):
        differentiate_H(bd(0.5), solve_H(bd(0.5), tol=1e-14, max_iter=10**6))


def test_plain_iteration_is_monotone_and_bounded():
    w = transient_walks(3, 1)[0][0]
    H = solve_H(w).value
    prev = None
    for x in iterate_H(w, 200):
        assert np.all(x <= H + 1e-12)
        if prev is not None:
            assert np.all(x >= prev - 1e-15)
        prev = x


def test_newton_and_plain_iteration_agree():
    w = transient_walks(4, 1)[0][0]
    a = solve_H(w).value
    b = solve_H(w, accelerate=False).value
    assert np.max(np.abs(a - b)) < 1e-12


def test_iteration_cap_raises():
    with pytest.raises(NoConvergence):
        solve_H(bd(0.75), max_iter=3, accelerate=False)


def test_H_matches_truncated_chain(fast_walks):
    assert len(fast_walks) >= 4
    for w, rep in fast_walks:
        for ab in w.pair_rows:
            got = truncated_H(w, ab, max_depth=16)
            for c in w.symbols:
                exact = rep.H[ab, c].value
                assert got.get(c, 0.0) <= exact + 1e-12
                assert exact - got.get(c, 0.0) < 1e-6


def test_xi_matches_truncated_chain(fast_walks):
    for w, rep in fast_walks[:3]:
        for a in w.symbols:
            for bc in w.pair_rows:
                abc = (a,) + bc
                back = truncated_escape(w, abc, max_depth=16)
                assert abs((1 - back) - rep.xi[abc]) < 1e-6


def test_H_row_sums_at_most_one(walks):
    assert len(walks) >= 50
    for _, rep in walks:
        assert np.all(rep.H.row_sums() <= 1 + 1e-10)
        assert np.all(rep.H.value >= 0)


def test_xi_first_letter_independent(walks):
    for w, rep in walks:
        d = rep.xi.as_dict()
        for bc in w.pair_rows:
            vals = [d[(a,) + bc] for a in w.symbols]
            assert max(vals) - min(vals) < 1e-12


def test_xi_agrees_with_its_defining_sum(walks):
    for w, rep in walks[:10]:
        for bc, row in w.pair_rows.items():
            total = sum(p * (1 - rep.H.value[rep.H.tensors.pair_index[t[1:]]].sum())
                        for t, p in row.items() if len(t) == 3)
            assert rep.xi["a" + "".join(bc)] == pytest.approx(min(max(total, 0), 1), abs=1e-12)


def _H_at(walk, z):
    return solve_H(walk, z=z).value


def _Gbar_at(walk, z):
    H = solve_H(walk, z=z)
    M, _ = level_matrices(walk, H)
    # one level step costs z; M already carries H(z)
    return np.linalg.inv(np.eye(M.shape[0]) - z * M)


def test_H_derivative_against_richardson(walks):
    for w, rep in walks:
        fd = richardson(lambda z: _H_at(w, z))
        exact = rep.H.dz
        mask = np.abs(exact) > 1e-8
        rel = np.abs(fd[mask] - exact[mask]) / np.abs(exact[mask])
        assert rel.size == 0 or rel.max() < 1e-4


def test_Gbar_derivative_against_richardson(walks):
    for w, rep in walks[:20]:
        fd = richardson(lambda z: _Gbar_at(w, z))
        exact = rep.Gbar.dz
        mask = np.abs(exact) > 1e-8
        rel = np.abs(fd[mask] - exact[mask]) / np.abs(exact[mask])
        assert rel.size == 0 or rel.max() < 1e-4


def test_H_value_jet_consistent_with_z_solve():
    w = bd(0.75)
    assert solve_H(w, z=1.0).value[0, 0] == pytest.approx(1 / 3)
    # at z = 0.9: H = 0.9 (1/4 + 3/4 H^2)
    z = 0.9
    h = (1 - np.sqrt(1 - 4 * (0.75 * z) * (0.25 * z))) / (2 * 0.75 * z)
    assert solve_H(w, z=z).value[0, 0] == pytest.approx(h, abs=1e-13)
