"""The chain of last-three-letter suffixes at exit times, and the rate of escape.

At the last visit of the walk to length ``k`` its word ends in some triple
``abc``.  These triples form a finite Markov chain whose kernel is

    qt(def, abc) = xi(abc) / xi(def) * K(ef, abc | 1).

With ``nu`` its stationary law, ``Lambda`` (mean time between exit times)
uses the z-derivative of ``K`` and ``Delta`` (mean length gained) uses the
letter lengths; the rate of escape is ``Delta / Lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import NonDeterministicRate, NotTransient, RowDefect, SingularSystem
from .series import (XI_EPS, GbarTable, HTable, KTable, XiTable, compute_K, compute_xi,
                     differentiate_H, solve_Gbar, solve_H, transience_check)
from .walk import RegularLanguageWalk, reachable_pairs, validate_walk

ROW_DEFECT_TOL = 1e-8


@dataclass(frozen=True)
class TripleState:
    letters: tuple

    def __str__(self):
        return "".join(self.letters) if all(len(s) == 1 for s in self.letters) else " ".join(self.letters)


@dataclass(frozen=True, eq=False)
class ExitKernel:
    """Row-stochastic kernel on triples.

    ``states[i] = (a, q)``: letter index ``a`` followed by pair index ``q``.
    """

    states: tuple
    labels: tuple
    matrix: np.ndarray
    row_defect: float

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class StationaryDist:
    kernel: ExitKernel
    probs: np.ndarray
    residual: float

    def as_dict(self) -> dict:
        return {str(l): float(p) for l, p in zip(self.kernel.labels, self.probs)}

    def __getitem__(self, label) -> float:
        return self.as_dict().get(str(label) if not isinstance(label, str) else label, 0.0)


@dataclass(eq=False)
class EscapeReport:
    ell: float
    Lambda: float
    Delta: float
    speed_natural: float
    nu: StationaryDist | None
    transient: bool
    irreducible: bool
    closed_class_count: int
    H: HTable | None = None
    Gbar: GbarTable | None = None
    xi: XiTable | None = None
    K: KTable | None = None
    kernel: ExitKernel | None = None
    residuals: dict = field(default_factory=dict)
    note: str = ""


def _weights(xi: XiTable, K: KTable, jet: str) -> np.ndarray:
    """``W[q, a, r] = xi(r) / xi(q) * K(q, a r)`` restricted to positive weights."""
    x = xi.pair_values
    pos = x > XI_EPS
    # LU leaves entries like -1e-17 where the exact value is 0
    k = np.maximum(getattr(K, jet), 0.0)
    W = np.zeros_like(k)
    inv = np.zeros_like(x)
    inv[pos] = 1.0 / x[pos]
    W[:] = k * x[None, None, :] * inv[:, None, None]
    W[:, :, ~pos] = 0.0
    return W


def build_kernel(walk: RegularLanguageWalk, xi: XiTable, K: KTable, reachable) -> ExitKernel:
    """Kernel of the exit-time suffix chain.

    Candidates are triples ``a bc`` with ``bc`` reachable and ``xi(bc) > 0``;
    triples that no candidate can move to are pruned repeatedly, since the
    stationary law vanishes on them.
    """
    pidx = xi.tensors.pair_index
    reach = set()
    for bc in reachable:
        key = (bc.first, bc.second) if hasattr(bc, "first") else tuple(bc)
        if key in pidx and xi.pair_values[pidx[key]] > XI_EPS:
            reach.add(pidx[key])
    if not reach:
        raise NotTransient("no reachable triple has a positive escape weight")
    W = _weights(xi, K, "value")
    n = walk.n_letters
    cand = {(a, q) for a in range(n) for q in reach}
    while True:
        hit = set()
        for (_, q) in cand:
            a_idx, r_idx = np.nonzero(W[q] > 0)
            hit.update(zip(a_idx.tolist(), r_idx.tolist()))
        new = cand & hit
        if new == cand:
            break
        cand = new
    if not cand:
        raise NotTransient("the exit chain has no recurrent triple")
    pairs = xi.tensors.pairs
    states = tuple(sorted(cand))
    sidx = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for i, (_, q) in enumerate(states):
        for (a, r) in zip(*np.nonzero(W[q])):
            j = sidx.get((int(a), int(r)))
            if j is not None:
                Q[i, j] = W[q, a, r]
    defect = float(np.max(np.abs(Q.sum(axis=1) - 1.0)))
    if defect > ROW_DEFECT_TOL:
        raise RowDefect(f"exit kernel rows deviate from 1 by {defect:.3e}")
    labels = tuple(TripleState((walk.symbols[a],) + pairs[q]) for a, q in states)
    return ExitKernel(states, labels, Q, defect)


def closed_classes(kernel: ExitKernel) -> list:
    """Closed communicating classes, as sorted lists of state indices."""
    Q = kernel.matrix
    ncomp, comp = connected_components(Q > 0, directed=True, connection="strong")
    leaves = np.ones(ncomp, dtype=bool)
    src, dst = np.nonzero(Q > 0)
    for s, d in zip(src, dst):
        if comp[s] != comp[d]:
            leaves[comp[s]] = False
    classes = [sorted(np.nonzero(comp == c)[0].tolist()) for c in range(ncomp) if leaves[c]]
    return sorted(classes)


def stationary(kernel: ExitKernel) -> StationaryDist:
    """Unique invariant law, by a direct solve with a normalization row."""
    classes = closed_classes(kernel)
    if len(classes) != 1:
        raise NonDeterministicRate(
            f"exit chain has {len(classes)} closed classes; the rate of escape is not a.s. constant",
            [[str(kernel.labels[i]) for i in c] for c in classes])
    return _solve_stationary(kernel)


def _solve_stationary(kernel):
    Q = kernel.matrix
    m = Q.shape[0]
    A = Q.T - np.eye(m)
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    nu = np.linalg.solve(A, rhs)
    nu[np.abs(nu) < 1e-15] = 0.0
    if nu.min() < -1e-10:
        raise SingularSystem("stationary solve produced negative mass")
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    res = float(np.max(np.abs(nu @ Q - nu)))
    return StationaryDist(kernel, nu, res)


def rate_lambda(nu: StationaryDist, xi: XiTable, K: KTable) -> float:
    """Mean exit-time increment under the stationary law."""
    W = _weights(xi, K, "dz")
    total = 0.0
    for p, (_, q) in zip(nu.probs, nu.kernel.states):
        if p:
            total += p * W[q].sum()
    return float(total)


def rate_delta(nu: StationaryDist, xi: XiTable, K: KTable, lengths) -> float:
    """Mean length gained per exit step: the new triple's first letter."""
    W = _weights(xi, K, "value")
    lengths = np.asarray(lengths, dtype=float)
    total = 0.0
    for p, (_, q) in zip(nu.probs, nu.kernel.states):
        if p:
            total += p * float(np.einsum("ar,a->", W[q], lengths))
    return float(total)


def _resolve_lengths(walk, lengths):
    if lengths is None:
        return walk.lengths
    if isinstance(lengths, dict):
        return walk.with_lengths(lengths).lengths
    arr = np.asarray(lengths, dtype=float)
    if arr.shape != (walk.n_letters,):
        raise ValueError("need one length per letter")
    return arr


def _not_transient(note, **parts):
    return EscapeReport(0.0, float("inf"), 0.0, 0.0, None, False, False, 0, note=note, **parts)


def escape_rate(walk: RegularLanguageWalk, lengths=None, *, tol: float = 1e-14,
                max_iter: int = 10**6, assume_all: bool | None = None) -> EscapeReport:
    """Run the whole pipeline and return the rate of escape with intermediates.

    ``assume_all`` defaults to True when the walk has no boundary rows.
    Recurrent or critical walks give ``transient=False`` and ``ell = 0``;
    several closed exit classes raise :class:`NonDeterministicRate`.
    """
    validate_walk(walk)
    lengths = _resolve_lengths(walk, lengths)
    if assume_all is None:
        assume_all = not walk.boundary_complete
    reach = reachable_pairs(walk, assume_all=assume_all)
    H = solve_H(walk, tol=tol, max_iter=max_iter)
    try:
        H = differentiate_H(walk, H)
    except SingularSystem as exc:
        return _not_transient(f"critical walk: {exc}", H=H)
    xi = compute_xi(walk, H)
    if not transience_check(xi, reach):
        return _not_transient("all escape weights vanish", H=H, xi=xi)
    Gbar = solve_Gbar(walk, H)
    K = compute_K(walk, Gbar)
    kernel = build_kernel(walk, xi, K, reach)
    classes = closed_classes(kernel)
    if len(classes) != 1:
        err = NonDeterministicRate(
            f"exit chain has {len(classes)} closed classes; the rate of escape is not a.s. constant",
            [[str(kernel.labels[i]) for i in c] for c in classes])
        err.class_rates = per_class_rates(kernel, classes, xi, K, lengths)
        raise err
    nu = stationary(kernel)
    Lam = rate_lambda(nu, xi, K)
    Del = rate_delta(nu, xi, K, lengths)
    residuals = {"H": H.residual, "Gbar": Gbar.residual, "kernel_rows": kernel.row_defect,
                 "stationary": nu.residual}
    return EscapeReport(Del / Lam, Lam, Del, 1.0 / Lam, nu, True, True, 1, H, Gbar, xi, K,
                        kernel, residuals)


def per_class_rates(kernel: ExitKernel, classes, xi: XiTable, K: KTable, lengths) -> list:
    """Rate of escape of the walk conditioned to end up in each closed class."""
    out = []
    for c in classes:
        sub = ExitKernel(tuple(kernel.states[i] for i in c), tuple(kernel.labels[i] for i in c),
                         kernel.matrix[np.ix_(c, c)], kernel.row_defect)
        nu = _solve_stationary(sub)
        Lam = rate_lambda(nu, xi, K)
        Del = rate_delta(nu, xi, K, lengths)
        out.append({"states": [str(l) for l in sub.labels], "Lambda": Lam, "Delta": Del,
                    "ell": Del / Lam})
    return out
