"""Rate of escape on an amalgam by three independent formulas.

The walk is watched through the last letter ``s`` of its normal form, an
element of some factor outside the subgroup (a *factor state*).  From ``s``
in factor ``i`` one step ``t`` either stays in factor ``i`` (``s t`` is a
new last letter or falls into the subgroup, shortening the word) or
appends a letter of another factor, after which the walk must come back
down; by left invariance the excursion from ``s t`` returns to ``s h``
with the probability that a walk from ``t`` first hits the subgroup at
``h``.

* exit times: the chain of last letters at the last visits to each length;
* double generating functions: first-return sums ``L(e, x)`` and their
  derivatives;
* limit process: Green function on words of length at most one and the
  law of the first letter of the limit word (natural length only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._polysys import SystemBuilder, least_solution, singular_threshold, solve_checked
from ..exceptions import AmalgamError, NotTransient, NonDeterministicRate, RowDefect, SingularSystem
from ..exit_chain import ROW_DEFECT_TOL, ExitKernel, StationaryDist, _solve_stationary, closed_classes
from .model import AmalgamSpec, element_lengths, is_left_invariant, is_natural, recurrence_check

XI_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class AmalgamH:
    """``value[s, h]``: probability that the walk from factor state ``s``
    first reaches the subgroup at ``h``; ``dz`` its z-derivative at 1."""

    spec: AmalgamSpec
    value: np.ndarray
    dz: np.ndarray
    residual: float
    iterations: int

    def __getitem__(self, key):
        s, h = key
        return float(self.value[_state(self.spec, s), _helem(self.spec, h)])

    def row_sums(self) -> np.ndarray:
        return self.value.sum(axis=1)


@dataclass(frozen=True, eq=False)
class AmalgamGbar:
    """Visits to ``t`` from ``s`` before the word becomes shorter than one letter."""

    spec: AmalgamSpec
    value: np.ndarray
    dz: np.ndarray
    M: np.ndarray
    residual: float

    def __getitem__(self, key):
        s, t = key
        return float(self.value[_state(self.spec, s), _state(self.spec, t)])


def _state(spec, s):
    if isinstance(s, str):
        return spec.layout.labels.index(s)
    if isinstance(s, tuple):
        return spec.layout.state_index[s]
    return int(s)


def _helem(spec, h):
    return spec.subgroup.index[h] if isinstance(h, str) else int(h)


def _require_transient(spec):
    if recurrence_check(spec):
        raise NotTransient("two factors of index two: the walk is recurrent")


def _push_matrix(spec) -> np.ndarray:
    """``P[s, t]``: probability of appending the letter ``t`` (another factor) to ``s``."""
    lay = spec.layout
    N = lay.n_states
    P = np.zeros((N, N))
    mu_t = np.array([lay.mu[i][g] for i, g in lay.states])
    for k in range(N):
        other = lay.state_factor != lay.state_factor[k]
        P[k, other] = mu_t[other]
    return P


def _landing(spec) -> np.ndarray:
    """``land[s, h]``: the factor state ``s * phi(h)``."""
    lay = spec.layout
    land = np.empty((lay.n_states, lay.nH), dtype=np.intp)
    for k, (i, g) in enumerate(lay.states):
        G = spec.factors[i]
        for h in range(lay.nH):
            land[k, h] = lay.state_index[(i, int(G.table[g, lay.phi[i][h]]))]
    return land


def _h_system(spec):
    lay = spec.layout
    nH, N = lay.nH, lay.n_states
    land = _landing(spec)
    b = SystemBuilder(N * nH)

    def u(s, h):
        return s * nH + h

    for k, (i, g) in enumerate(lay.states):
        G = spec.factors[i]
        mu = lay.mu[i]
        for t in np.nonzero(mu > 0)[0]:
            c = int(G.table[g, t])
            hc = lay.in_h[i][c]
            if hc >= 0:
                b.add_const(u(k, hc), mu[t])
            else:
                kc = lay.state_index[(i, c)]
                for h in range(nH):
                    b.add_linear(u(k, h), u(kc, h), mu[t])
        for kt, (j, t) in enumerate(lay.states):
            p = lay.mu[j][t]
            if j == i or p <= 0:
                continue
            for h3 in range(nH):
                ks = land[k, h3]
                for h in range(nH):
                    b.add_quad(u(k, h), u(kt, h3), u(ks, h), p)
    return b.build()


def solve_amalgam_H(spec: AmalgamSpec, tol: float = 1e-14, max_iter: int = 10**6,
                    z: float = 1.0) -> AmalgamH:
    """Least solution of the first-descent system plus its z-derivative.

    From ``x = z phi(x)`` the derivative solves ``(I - z J) x' = phi(x)``.
    """
    _require_transient(spec)
    lay = spec.layout
    system = _h_system(spec)
    fp = least_solution(system, z=z, tol=tol, max_iter=max_iter)
    x = fp.x
    M = np.eye(system.size) - z * system.jacobian(x)
    dx = solve_checked(M, system.phi(x), singular_threshold(fp.residual))
    shape = (lay.n_states, lay.nH)
    return AmalgamH(spec, x.reshape(shape), dx.reshape(shape), fp.residual, fp.iterations)


def _level_matrix(spec, h) -> np.ndarray:
    """One step at the one-letter level, excursions above it collapsed, using ``h[s, h']``."""
    lay = spec.layout
    N = lay.n_states
    M = np.zeros((N, N))
    land = _landing(spec)
    back = _push_matrix(spec) @ h
    for k in range(N):
        np.add.at(M[k], land[k], back[k])
    return M


def _modify_matrix(spec) -> np.ndarray:
    lay = spec.layout
    N = lay.n_states
    M = np.zeros((N, N))
    for k, (i, g) in enumerate(lay.states):
        G = spec.factors[i]
        mu = lay.mu[i]
        for t in np.nonzero(mu > 0)[0]:
            c = int(G.table[g, t])
            if lay.in_h[i][c] < 0:
                M[k, lay.state_index[(i, c)]] += mu[t]
    return M


def solve_amalgam_Gbar(spec: AmalgamSpec, H: AmalgamH) -> AmalgamGbar:
    """``(I - M) Gbar = I`` and ``(I - M) Gbar' = (M + M') Gbar``."""
    M = _modify_matrix(spec) + _level_matrix(spec, H.value)
    dM = _level_matrix(spec, H.dz)
    N = M.shape[0]
    eye = np.eye(N)
    A = eye - M
    thr = singular_threshold(H.residual)
    G = solve_checked(A, eye, thr)
    rhs = (M + dM) @ G
    dG = solve_checked(A, rhs, thr)
    scale = max(1.0, float(np.abs(G).max()), float(np.abs(dG).max()))
    res = max(float(np.abs(A @ G - eye).max()), float(np.abs(A @ dG - rhs).max())) / scale
    if res >= 1e-10:
        raise SingularSystem(f"Gbar system residual {res:.2e}")
    return AmalgamGbar(spec, G, dG, M, res)


def xi_factor(spec: AmalgamSpec, H: AmalgamH) -> np.ndarray:
    """Probability of leaving for good after appending a letter to a word ending in factor ``i``."""
    lay = spec.layout
    stay = 1.0 - H.value.sum(axis=1)
    out = np.zeros(spec.r)
    for i in range(spec.r):
        for k, (j, t) in enumerate(lay.states):
            if j != i:
                out[i] += lay.mu[j][t] * stay[k]
    out[np.abs(out) < XI_EPS] = 0.0
    out = np.clip(out, 0.0, 1.0)
    if not np.any(out > 0):
        raise NotTransient("all escape weights vanish")
    return out


@dataclass(eq=False)
class ExitRateReport:
    ell: float
    Lambda: float
    Delta: float
    nu: StationaryDist
    xi: np.ndarray
    kernel: ExitKernel
    H: AmalgamH
    Gbar: AmalgamGbar


def _exit_weights(spec, Gmat, xi):
    """``W[y, x]`` before pruning: push a letter ``w`` of another factor
    after ``y`` and stay above, ending at ``x``, weighted by escape odds."""
    lay = spec.layout
    N = lay.n_states
    W = np.zeros((N, N))
    for ky, (i, g) in enumerate(lay.states):
        if xi[i] <= 0:
            continue
        hy = lay.trail_of[i][g]
        for j in range(spec.r):
            if j == i or xi[j] <= 0:
                continue
            G = spec.factors[j]
            lead = lay.phi[j][hy]
            for kw in lay.factor_states(j):
                w = lay.states[kw][1]
                p = lay.mu[j][w]
                if p > 0:
                    start = lay.state_index[(j, int(G.table[lead, w]))]
                    W[ky] += p * Gmat[start]
    ratio = np.zeros((N, N))
    xs = xi[lay.state_factor]
    pos = xs > 0
    ratio[np.ix_(pos, pos)] = xs[pos][None, :] / xs[pos][:, None]
    return np.maximum(W, 0.0) * ratio


def exit_kernel(spec: AmalgamSpec, Gbar: AmalgamGbar, xi: np.ndarray) -> ExitKernel:
    lay = spec.layout
    W = _exit_weights(spec, Gbar.value, xi)
    cand = {k for k in range(lay.n_states) if xi[lay.state_factor[k]] > 0}
    while True:
        hit = {int(x) for k in cand for x in np.nonzero(W[k] > 0)[0]}
        new = cand & hit
        if new == cand:
            break
        cand = new
    if not cand:
        raise NotTransient("the exit chain has no recurrent state")
    states = tuple(sorted(cand))
    Q = W[np.ix_(states, states)]
    defect = float(np.max(np.abs(Q.sum(axis=1) - 1.0)))
    if defect > ROW_DEFECT_TOL:
        raise RowDefect(f"exit kernel rows deviate from 1 by {defect:.3e}")
    return ExitKernel(states, tuple(lay.labels[k] for k in states), Q, defect)


def exit_rate(spec: AmalgamSpec, lengths=None, *, H: AmalgamH | None = None,
              Gbar: AmalgamGbar | None = None, tol: float = 1e-14) -> ExitRateReport:
    """``ell = Delta / Lambda`` from the chain of last letters at exit times."""
    _require_transient(spec)
    lens = element_lengths(spec, lengths)
    H = H if H is not None else solve_amalgam_H(spec, tol=tol)
    Gbar = Gbar if Gbar is not None else solve_amalgam_Gbar(spec, H)
    xi = xi_factor(spec, H)
    kernel = exit_kernel(spec, Gbar, xi)
    classes = closed_classes(kernel)
    if len(classes) != 1:
        raise NonDeterministicRate(
            f"exit chain has {len(classes)} closed classes; the rate of escape is not a.s. constant",
            [[kernel.labels[i] for i in c] for c in classes])
    nu = _solve_stationary(kernel)
    lay = spec.layout
    states = list(kernel.states)
    W = _exit_weights(spec, Gbar.value, xi)
    dW = _exit_weights(spec, Gbar.value + Gbar.dz, xi)
    ls = np.array([lens[i][g] for i, g in lay.states])
    Lam = float(nu.probs @ dW[states].sum(axis=1))
    Del = float(nu.probs @ (W[states] @ ls))
    return ExitRateReport(Del / Lam, Lam, Del, nu, xi, kernel, H, Gbar)


@dataclass(frozen=True, eq=False)
class LTable:
    """``value[h, s]`` = L(h, s | 1): visits to factor state ``s`` before the
    walk from subgroup element ``h`` returns to the subgroup."""

    spec: AmalgamSpec
    value: np.ndarray
    dz: np.ndarray

    def __getitem__(self, key):
        h, x = key
        spec = self.spec
        h = _helem(spec, h)
        if isinstance(x, str) and x.startswith("h:"):
            return (1.0 if spec.subgroup.index[x[2:]] == h else 0.0), 0.0
        k = _state(spec, x)
        return float(self.value[h, k]), float(self.dz[h, k])


def L_table(spec: AmalgamSpec, Gbar: AmalgamGbar) -> LTable:
    lay = spec.layout
    N = lay.n_states
    step = np.zeros((lay.nH, N))
    for h in range(lay.nH):
        for k, (i, g) in enumerate(lay.states):
            G = spec.factors[i]
            step[h, k] = lay.mu[i][int(G.table[G.inverse[lay.phi[i][h]], g])]
    return LTable(spec, step @ Gbar.value, step @ (Gbar.value + Gbar.dz))


@dataclass(frozen=True)
class DgfTerms:
    ell: float
    upsilon1: float
    upsilon2: float


def dgf_terms(spec: AmalgamSpec, lengths=None, *, H=None, Gbar=None, tol: float = 1e-14) -> DgfTerms:
    """Both derivatives of the denominator of the double generating function.

    Splitting the generating function by first letter shifts the rest of the
    word by a subgroup element, so lengths must satisfy ``l(h x) = l(x)``.
    """
    _require_transient(spec)
    lens = element_lengths(spec, lengths)
    if not is_left_invariant(spec, lens):
        raise AmalgamError("the dgf formula needs lengths constant on double cosets H g H")
    H = H if H is not None else solve_amalgam_H(spec, tol=tol)
    xi_factor(spec, H)
    Gbar = Gbar if Gbar is not None else solve_amalgam_Gbar(spec, H)
    L = L_table(spec, Gbar)
    lay = spec.layout
    e = spec.subgroup.identity
    ls = np.array([lens[i][g] for i, g in lay.states])
    u1 = u2 = 0.0
    for i in range(spec.r):
        ks = lay.factor_states(i)
        S = L.value[e, ks].sum()
        den = (1.0 + S) ** 2
        u1 += float(ls[ks] @ L.value[e, ks]) / den
        u2 += float(L.dz[e, ks].sum()) / den
    return DgfTerms(float(u1 / u2), float(u1), float(u2))


def dgf_rate(spec: AmalgamSpec, lengths=None, **kw) -> float:
    """Rate of escape from the double generating function of lengths and times."""
    return dgf_terms(spec, lengths, **kw).ell


@dataclass(frozen=True, eq=False)
class GreenTable:
    """Green function on the words of length at most one.

    Index ``h`` (``< nH``) is a subgroup element, ``nH + s`` a factor state.
    """

    spec: AmalgamSpec
    value: np.ndarray
    residual: float

    def index(self, x) -> int:
        spec = self.spec
        if isinstance(x, str) and x.startswith("h:"):
            return spec.subgroup.index[x[2:]]
        return spec.layout.nH + _state(spec, x)

    def __getitem__(self, key):
        x, y = key
        return float(self.value[self.index(x), self.index(y)])

    @property
    def G_ee(self) -> float:
        e = self.spec.subgroup.identity
        return float(self.value[e, e])


def green_table(spec: AmalgamSpec, H: AmalgamH) -> GreenTable:
    lay = spec.layout
    nH, N = lay.nH, lay.n_states
    Hg = spec.subgroup
    P = np.zeros((nH + N, nH + N))
    for h in range(nH):
        for h2 in range(nH):
            P[h, int(Hg.table[h, h2])] += lay.mu_h[h2]
        for k, (j, t) in enumerate(lay.states):
            G = spec.factors[j]
            P[h, nH + lay.state_index[(j, int(G.table[lay.phi[j][h], t]))]] += lay.mu[j][t]
    for k, (i, g) in enumerate(lay.states):
        G = spec.factors[i]
        mu = lay.mu[i]
        for t in np.nonzero(mu > 0)[0]:
            c = int(G.table[g, t])
            hc = lay.in_h[i][c]
            P[nH + k, hc if hc >= 0 else nH + lay.state_index[(i, c)]] += mu[t]
    P[nH:, nH:] += _level_matrix(spec, H.value)
    A = np.eye(nH + N) - P
    eye = np.eye(nH + N)
    Gm = solve_checked(A, eye, singular_threshold(H.residual))
    res = float(np.abs(A @ Gm - eye).max()) / max(1.0, float(np.abs(Gm).max()))
    if res >= 1e-10:
        raise SingularSystem(f"Green system residual {res:.2e}")
    return GreenTable(spec, Gm, res)


def rho(spec: AmalgamSpec, green: GreenTable, H: AmalgamH) -> np.ndarray:
    """Law of the factor of the first letter of the limit word."""
    lay = spec.layout
    stay = 1.0 - H.value.sum(axis=1)
    e = spec.subgroup.identity
    out = np.zeros(spec.r)
    for i in range(spec.r):
        G = spec.factors[i]
        for h in range(lay.nH):
            for k in lay.factor_states(i):
                g = lay.states[k][1]
                p = lay.mu[i][g]
                if p > 0:
                    start = lay.state_index[(i, int(G.table[lay.phi[i][h], g]))]
                    out[i] += green.value[e, h] * p * stay[start]
    return out


@dataclass(frozen=True)
class LimitProcessTerms:
    ell: float
    rho: np.ndarray
    G_ee: float
    xi: np.ndarray


def lp_terms(spec: AmalgamSpec, lengths=None, *, H=None, tol: float = 1e-14,
             variant: str = "last-visit") -> LimitProcessTerms:
    """Limit of ``E|X_{n+1}| - E|X_n|``, summed over one-letter steps ``g``.

    Left multiplication by ``g`` cancels the first letter of the limit word
    when that letter lies in the coset ``g^-1 H``.  The walk's last visit to
    words of length at most one then happens at some ``u`` in that coset,
    after which it escapes; so the probability is
    ``sum_u G(e, u) * xi(i)``.

    ``variant="first-hit"`` instead uses
    ``(1 - rho(i)) / G(e, e) * sum_u G(e, u)``, which adds up first-hitting
    probabilities of the coset elements as if those events were disjoint.
    It agrees with the other variant only when the subgroup is trivial and
    is kept for comparison.
    """
    if variant not in ("last-visit", "first-hit"):
        raise ValueError(f"unknown variant {variant!r}")
    _require_transient(spec)
    if lengths is not None and not is_natural(spec, element_lengths(spec, lengths)):
        raise AmalgamError("the limit-process formula only holds for the natural word length")
    H = H if H is not None else solve_amalgam_H(spec, tol=tol)
    xi = xi_factor(spec, H)
    green = green_table(spec, H)
    rh = rho(spec, green, H)
    lay = spec.layout
    nH = lay.nH
    e = spec.subgroup.identity
    Gee = green.G_ee
    ell = 0.0
    for i in range(spec.r):
        G = spec.factors[i]
        ks = lay.factor_states(i)
        mass = sum(lay.mu[i][lay.states[k][1]] for k in ks)
        back = 0.0
        for k in ks:
            g = lay.states[k][1]
            p = lay.mu[i][g]
            if p <= 0:
                continue
            ginv = int(G.inverse[g])
            for h in range(nH):
                back += p * green.value[e, nH + lay.state_index[(i, int(G.table[ginv, lay.phi[i][h]]))]]
        cancel = xi[i] if variant == "last-visit" else (1.0 - rh[i]) / Gee
        ell += mass * (1.0 - rh[i]) - cancel * back
    return LimitProcessTerms(float(ell), rh, Gee, xi)


def lp_rate(spec: AmalgamSpec, lengths=None, **kw) -> float:
    """Rate of escape for the natural word length from the limit word's first letter."""
    return lp_terms(spec, lengths, **kw).ell


METHODS = ("exit-time", "dgf", "limit-process")


def applicable_methods(spec: AmalgamSpec, lengths=None) -> tuple:
    """Methods whose formula holds for these lengths, cheapest last."""
    lens = element_lengths(spec, lengths)
    ok = {"exit-time"}
    if is_left_invariant(spec, lens):
        ok.add("dgf")
    if is_natural(spec, lens):
        ok.add("limit-process")
    return tuple(m for m in METHODS if m in ok)


def default_method(spec: AmalgamSpec, lengths=None) -> str:
    """Limit process for the natural length, else dgf when it applies, else exit time."""
    return applicable_methods(spec, lengths)[-1]


def amalgam_rates(spec: AmalgamSpec, lengths=None, methods=METHODS, tol: float = 1e-14) -> dict:
    """Run the requested methods sharing one H/Gbar solve; returns ``{method: ell}``."""
    _require_transient(spec)
    H = solve_amalgam_H(spec, tol=tol)
    Gbar = solve_amalgam_Gbar(spec, H)
    out = {}
    for m in methods:
        if m == "exit-time":
            out[m] = exit_rate(spec, lengths, H=H, Gbar=Gbar).ell
        elif m == "dgf":
            out[m] = dgf_rate(spec, lengths, H=H, Gbar=Gbar)
        elif m == "limit-process":
            out[m] = lp_rate(spec, lengths, H=H)
        else:
            raise ValueError(f"unknown method {m!r}")
    return out
