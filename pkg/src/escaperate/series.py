"""Generating functions of a regular-language walk at ``z = 1``.

Every function is carried as a :class:`Jet`: its value at ``z = 1`` and its
first ``z``-derivative there.  Notation (pairs ``ab``, letters ``c``):

* ``H(ab, c)``: first descent from the two-letter word ``ab`` to the
  one-letter word ``c`` (quadratic system, least solution);
* ``Gbar(ab, cd)``: visits to ``cd`` before leaving the two-letter level
  (linear system, given ``H``);
* ``xi(abc)``: probability that the walk started at ``abc`` never comes back
  to length three;
* ``K(ef, abc)``: one step up from ``ef`` followed by a stay at the new level
  ending in ``abc``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._polysys import SystemBuilder, iterate, least_solution, singular_threshold, solve_checked
from .exceptions import MalformedRow, SingularSystem
from .walk import PairTensors, RegularLanguageWalk, descent_support, pair_tensors

XI_EPS = 1e-12


@dataclass(frozen=True)
class Jet:
    value: float
    dz: float = float("nan")


class _PairTable:
    """Shared lookup helpers; ``walk`` and ``tensors`` identify the index sets."""

    walk: RegularLanguageWalk
    tensors: PairTensors

    def _pair(self, key):
        key = self.walk.word(key) if not isinstance(key, tuple) else key
        return self.tensors.pair_index.get(key)

    def _letter(self, key):
        key = self.walk.word(key) if not isinstance(key, tuple) else key
        return self.walk.index[key[0]]


@dataclass(frozen=True, eq=False)
class HTable(_PairTable):
    """``value[p, c]`` = H(pair p, letter c | 1); ``dz`` likewise, or None."""

    walk: RegularLanguageWalk
    tensors: PairTensors
    value: np.ndarray
    dz: np.ndarray | None
    residual: float
    iterations: int

    def __getitem__(self, key) -> Jet:
        ab, c = key
        p = self._pair(ab)
        if p is None:
            return Jet(0.0, 0.0)
        c = self._letter(c)
        dz = float(self.dz[p, c]) if self.dz is not None else float("nan")
        return Jet(float(self.value[p, c]), dz)

    def row_sums(self) -> np.ndarray:
        return self.value.sum(axis=1)


@dataclass(frozen=True, eq=False)
class GbarTable(_PairTable):
    walk: RegularLanguageWalk
    tensors: PairTensors
    value: np.ndarray
    dz: np.ndarray
    residual: float

    def __getitem__(self, key) -> Jet:
        ab, cd = key
        p, q = self._pair(ab), self._pair(cd)
        if p is None or q is None:
            return Jet(float(p is not None and p == q), 0.0)
        return Jet(float(self.value[p, q]), float(self.dz[p, q]))


@dataclass(frozen=True, eq=False)
class XiTable(_PairTable):
    """Escape weights.  ``xi(abc)`` depends on ``bc`` only, stored per pair."""

    walk: RegularLanguageWalk
    tensors: PairTensors
    pair_values: np.ndarray

    def __getitem__(self, abc) -> float:
        abc = self.walk.word(abc) if not isinstance(abc, tuple) else abc
        p = self.tensors.pair_index.get(abc[1:])
        return 0.0 if p is None else float(self.pair_values[p])

    def as_dict(self) -> dict:
        out = {}
        for a in self.walk.symbols:
            for bc, p in self.tensors.pair_index.items():
                out[(a,) + bc] = float(self.pair_values[p])
        return out


@dataclass(frozen=True, eq=False)
class KTable(_PairTable):
    """``value[p, a, q]`` = K(pair p, letter a + pair q | 1)."""

    walk: RegularLanguageWalk
    tensors: PairTensors
    value: np.ndarray
    dz: np.ndarray

    def __getitem__(self, key) -> Jet:
        ef, abc = key
        abc = self.walk.word(abc) if not isinstance(abc, tuple) else abc
        p, q = self._pair(ef), self.tensors.pair_index.get(abc[1:])
        if p is None or q is None:
            return Jet(0.0, 0.0)
        a = self.walk.index[abc[0]]
        return Jet(float(self.value[p, a, q]), float(self.dz[p, a, q]))


def _h_system(walk: RegularLanguageWalk, tensors: PairTensors):
    """Compile the first-descent equations over their structural support."""
    sup = descent_support(walk)
    pidx, idx = tensors.pair_index, walk.index
    unknowns = []
    for ab in tensors.pairs:
        for c in sorted(sup[ab], key=idx.__getitem__):
            unknowns.append((pidx[ab], idx[c]))
    uidx = {u: i for i, u in enumerate(unknowns)}
    b = SystemBuilder(len(unknowns))
    for ab in tensors.pairs:
        p = pidx[ab]
        for t, prob in walk.pair_rows[ab].items():
            if prob <= 0:
                continue
            if len(t) == 1:
                b.add_const(uidx[(p, idx[t[0]])], prob)
            elif len(t) == 2:
                q = pidx[t]
                for c in sup[t]:
                    b.add_linear(uidx[(p, idx[c])], uidx[(q, idx[c])], prob)
            else:
                d, e, f = t
                q = pidx[(e, f)]
                for g in sup[(e, f)]:
                    dg = (d, g)
                    if dg not in pidx:
                        raise MalformedRow(
                            f"row {''.join(ab)!r} can return to pair {''.join(dg)!r}, which has no row")
                    r = pidx[dg]
                    for c in sup[dg]:
                        b.add_quad(uidx[(p, idx[c])], uidx[(q, idx[g])], uidx[(r, idx[c])], prob)
    return b.build(), unknowns


def _scatter(walk, tensors, unknowns, x):
    out = np.zeros((len(tensors.pairs), walk.n_letters))
    for (p, c), v in zip(unknowns, x):
        out[p, c] = v
    return out


def iterate_H(walk: RegularLanguageWalk, n_iter: int, z: float = 1.0):
    """Yield the plain fixed-point iterates of the H-system, as ``(P, n)`` arrays."""
    tensors = pair_tensors(walk)
    system, unknowns = _h_system(walk, tensors)
    for x in iterate(system, n_iter, z):
        yield _scatter(walk, tensors, unknowns, x)


def solve_H(walk: RegularLanguageWalk, tol: float = 1e-14, max_iter: int = 10**6,
            z: float = 1.0, accelerate: bool = True) -> HTable:
    """Least non-negative solution of the first-descent system (values only).

    ``z`` other than 1 evaluates the generating functions at ``z``; this is
    only used by finite-difference checks.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    tensors = pair_tensors(walk)
    system, unknowns = _h_system(walk, tensors)
    fp = least_solution(system, z=z, tol=tol, max_iter=max_iter, accelerate=accelerate)
    value = _scatter(walk, tensors, unknowns, fp.x)
    return HTable(walk, tensors, value, None, fp.residual, fp.iterations)


def differentiate_H(walk: RegularLanguageWalk, H: HTable) -> HTable:
    """Fill in ``dz`` by solving the z-differentiated first-descent system.

    At ``z = 1`` the derivative ``h'`` solves ``(I - D phi(h)) h' = phi(h)``.
    """
    system, unknowns = _h_system(walk, H.tensors)
    x = np.array([H.value[u] for u in unknowns])
    phi = system.phi(x)
    M = np.eye(system.size) - system.jacobian(x)
    dx = solve_checked(M, phi, singular_threshold(H.residual))
    res = float(np.max(np.abs(M @ dx - phi))) if dx.size else 0.0
    if res >= 1e-10 * max(1.0, float(np.max(np.abs(dx), initial=0.0))):
        raise SingularSystem(f"derivative system residual {res:.2e}")
    return replace(H, dz=_scatter(walk, H.tensors, unknowns, dx))


def level_matrices(walk: RegularLanguageWalk, H: HTable):
    """Return ``(M, dM)``: the level-two step matrix at ``z = 1`` and the
    part of its z-derivative coming from ``H'``."""
    t = H.tensors
    M = t.modify + _push_return(walk, t, H.value)
    dM = _push_return(walk, t, H.dz) if H.dz is not None else None
    return M, dM


def _push_return(walk, tensors, h):
    n = walk.n_letters
    out = np.zeros_like(tensors.modify)
    back = np.einsum("paq,qc->pac", tensors.push, h)
    for (a, c), q in tensors.pair_index.items():
        out[:, q] += back[:, walk.index[a], walk.index[c]]
    covered = np.zeros((n, n), dtype=bool)
    for (a, c) in tensors.pair_index:
        covered[walk.index[a], walk.index[c]] = True
    stray = np.abs(back[:, ~covered]).sum() if (~covered).any() else 0.0
    if stray > 0:
        raise MalformedRow("walk can return to a pair that has no transition row")
    return out


def solve_Gbar(walk: RegularLanguageWalk, H: HTable) -> GbarTable:
    """Level-two Green functions and their z-derivatives at ``z = 1``.

    ``Gbar(z) = I + z M(z) Gbar(z)``, hence ``(I - M) Gbar = I`` and
    ``(I - M) Gbar' = (M + M') Gbar``.
    """
    if H.dz is None:
        raise ValueError("H must carry derivatives; call differentiate_H first")
    M, dM = level_matrices(walk, H)
    P = M.shape[0]
    eye = np.eye(P)
    A = eye - M
    thr = singular_threshold(H.residual)
    G = solve_checked(A, eye, thr)
    rhs = (M + dM) @ G
    dG = solve_checked(A, rhs, thr)
    res = 0.0
    if P:
        scale = max(1.0, float(np.max(np.abs(G))), float(np.max(np.abs(dG))))
        res = max(float(np.max(np.abs(A @ G - eye))), float(np.max(np.abs(A @ dG - rhs)))) / scale
    if res >= 1e-10:
        raise SingularSystem(f"Gbar system residual {res:.2e}")
    return GbarTable(walk, H.tensors, G, dG, res)


def compute_xi(walk: RegularLanguageWalk, H: HTable) -> XiTable:
    """Escape weight of every pair ``bc`` (shared by all triples ``abc``)."""
    t = H.tensors
    stay = 1.0 - H.value.sum(axis=1)
    xi = np.einsum("paq,q->p", t.push, stay)
    xi[np.abs(xi) < XI_EPS] = 0.0
    xi = np.clip(xi, 0.0, 1.0)
    return XiTable(walk, t, xi)


def compute_K(walk: RegularLanguageWalk, Gbar: GbarTable) -> KTable:
    """One push followed by a stay at the new level, with z-derivative.

    The derivative of ``z * Gbar(z)`` at 1 is ``Gbar + Gbar'``.
    """
    push = Gbar.tensors.push
    value = np.einsum("paq,qr->par", push, Gbar.value)
    dz = np.einsum("paq,qr->par", push, Gbar.value + Gbar.dz)
    return KTable(walk, Gbar.tensors, value, dz)


def transience_check(xi: XiTable, reachable) -> bool:
    """True iff some reachable pair has a positive escape weight."""
    pidx = xi.tensors.pair_index
    for bc in reachable:
        key = (bc.first, bc.second) if hasattr(bc, "first") else tuple(bc)
        p = pidx.get(key)
        if p is not None and xi.pair_values[p] > XI_EPS:
            return True
    return False
