"""Seeded Monte Carlo estimates of the rate of escape.

Each trial runs one trajectory from the empty word (or the identity) and
records ``(l(X_n) - l(X_b)) / (n - b)`` with ``b`` the burn-in step
(``b = 0`` by default, giving the endpoint ratio ``l(X_n) / n``).  Trial
``k`` draws its uniforms from ``default_rng(seed ^ splitmix64(k))``, so
trials are independent of execution order and the result is
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .amalgam.model import AmalgamSpec, element_lengths, validate_amalgam
from .exceptions import BoundaryMissing
from .walk import RegularLanguageWalk, validate_walk

MASK64 = (1 << 64) - 1


def splitmix64(k: int) -> int:
    z = (k + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(seed: int, k: int) -> int:
    return (int(seed) & MASK64) ^ splitmix64(k)


@dataclass(frozen=True)
class SimConfig:
    steps: int = 100_000
    trials: int = 200
    seed: int = 0
    burn_in_fraction: float = 0.0

    def __post_init__(self):
        if int(self.steps) < 1 or int(self.trials) < 1:
            raise ValueError("steps and trials must be at least 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")

    @property
    def burn_in(self) -> int:
        return int(self.burn_in_fraction * self.steps)


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    stderr: float
    trials: int
    steps: int
    samples: np.ndarray

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


def _aggregate(samples, cfg) -> SimEstimate:
    samples = np.asarray(samples, dtype=float)
    mean = math.fsum(samples) / samples.size
    std = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    return SimEstimate(mean, std / math.sqrt(samples.size), samples.size, int(cfg.steps), samples)


# ---- regular-language walks -------------------------------------------------

@dataclass(frozen=True)
class _WalkTables:
    pair_row: np.ndarray  # (n, n) -> row id or -1
    single_row: np.ndarray  # (n,) -> row id or -1
    empty_row: int
    start: np.ndarray  # row id -> first outcome
    cum: np.ndarray  # cumulative probabilities per outcome
    out_len: np.ndarray
    out: np.ndarray  # (K, 3) letters
    lengths: np.ndarray


def _walk_tables(walk: RegularLanguageWalk, lengths) -> _WalkTables:
    n = walk.n_letters
    idx = walk.index
    rows = []
    pair_row = np.full((n, n), -1, dtype=np.int64)
    for ab, row in walk.pair_rows.items():
        pair_row[idx[ab[0]], idx[ab[1]]] = len(rows)
        rows.append(row)
    single_row = np.full(n, -1, dtype=np.int64)
    for (a,), row in (walk.single_rows or {}).items():
        single_row[idx[a]] = len(rows)
        rows.append(row)
    empty = -1
    if walk.empty_row is not None:
        empty = len(rows)
        rows.append(walk.empty_row)
    start = [0]
    cum, out_len, out = [], [], []
    for row in rows:
        acc = 0.0
        for target, p in row.items():
            if p <= 0:
                continue
            acc += p
            cum.append(acc)
            out_len.append(len(target))
            out.append([idx[s] for s in target] + [-1] * (3 - len(target)))
        if cum:
            cum[-1] = max(cum[-1], 1.0)  # absorb rounding in the last outcome
        start.append(len(cum))
    return _WalkTables(pair_row, single_row, empty, np.array(start, dtype=np.int64),
                       np.array(cum, dtype=float), np.array(out_len, dtype=np.int64),
                       np.array(out, dtype=np.int64).reshape(-1, 3), np.asarray(lengths, dtype=float))


@njit(cache=True)
def _walk_kernel(u, burn, pair_row, single_row, empty_row, start, cum, out_len, out, lengths):
    """Returns (l(X_b), l(X_n), status); status -1 means a missing boundary row."""
    n = u.shape[0]
    word = np.empty(n + 2, dtype=np.int64)
    m = 0
    l_burn = 0.0
    for step in range(n):
        if step == burn:
            l_burn = 0.0
            for k in range(m):
                l_burn += lengths[word[k]]
        if m >= 2:
            r = pair_row[word[m - 2], word[m - 1]]
            keep = m - 2
        elif m == 1:
            r = single_row[word[0]]
            keep = 0
        else:
            r = empty_row
            keep = 0
        if r < 0:
            return 0.0, 0.0, -1
        lo = start[r]
        hi = start[r + 1] - 1
        x = u[step]
        j = lo
        while j < hi and cum[j] <= x:
            j += 1
        for k in range(out_len[j]):
            word[keep + k] = out[j, k]
        m = keep + out_len[j]
    total = 0.0
    for k in range(m):
        total += lengths[word[k]]
    if burn >= n:
        l_burn = total
    return l_burn, total, 0


def simulate_walk(walk: RegularLanguageWalk, lengths=None, cfg: SimConfig = SimConfig()) -> SimEstimate:
    """Monte Carlo estimate of the rate of escape of a regular-language walk."""
    validate_walk(walk)
    if not walk.boundary_complete:
        raise BoundaryMissing("simulation starts from the empty word and needs all boundary rows")
    if lengths is None:
        lens = walk.lengths
    elif isinstance(lengths, dict):
        lens = walk.with_lengths(lengths).lengths
    else:
        lens = np.asarray(lengths, dtype=float)
    t = _walk_tables(walk, lens)
    b = cfg.burn_in
    samples = np.empty(cfg.trials)
    for k in range(cfg.trials):
        u = np.random.default_rng(trial_seed(cfg.seed, k)).random(cfg.steps)
        lb, ln, status = _walk_kernel(u, b, t.pair_row, t.single_row, t.empty_row, t.start, t.cum,
                                      t.out_len, t.out, t.lengths)
        if status < 0:
            raise BoundaryMissing("the walk reached a word without a transition row")
        samples[k] = (ln - lb) / (cfg.steps - b)
    return _aggregate(samples, cfg)


# ---- amalgams ----------------------------------------------------------------

@dataclass(frozen=True)
class _AmalgamTables:
    mult: np.ndarray  # (r, m, m)
    phi: np.ndarray  # (r, nH)
    in_h: np.ndarray  # (r, m)
    rep_of: np.ndarray
    trail_of: np.ndarray
    elen: np.ndarray  # (r, m)
    step_f: np.ndarray  # factor of each step element
    step_g: np.ndarray  # element index within that factor
    cum: np.ndarray
    identity: int


def _amalgam_tables(spec: AmalgamSpec, lengths) -> _AmalgamTables:
    lay = spec.layout
    r = spec.r
    m = max(len(G) for G in spec.factors)
    mult = np.zeros((r, m, m), dtype=np.int64)
    in_h = np.full((r, m), -1, dtype=np.int64)
    rep_of = np.zeros((r, m), dtype=np.int64)
    trail_of = np.zeros((r, m), dtype=np.int64)
    elen = np.zeros((r, m))
    lens = element_lengths(spec, lengths)
    for i, G in enumerate(spec.factors):
        n = len(G)
        mult[i, :n, :n] = G.table
        in_h[i, :n] = lay.in_h[i]
        rep_of[i, :n] = lay.rep_of[i]
        trail_of[i, :n] = lay.trail_of[i]
        elen[i, :n] = lens[i]
    phi = np.array([lay.phi[i] for i in range(r)], dtype=np.int64)
    sf, sg, probs = [], [], []
    for h in range(lay.nH):
        if lay.mu_h[h] > 0:
            sf.append(0)
            sg.append(int(lay.phi[0][h]))
            probs.append(lay.mu_h[h])
    for i, g in lay.states:
        if lay.mu[i][g] > 0:
            sf.append(i)
            sg.append(g)
            probs.append(lay.mu[i][g])
    cum = np.cumsum(probs)
    cum[-1] = max(cum[-1], 1.0)
    return _AmalgamTables(mult, phi, in_h, rep_of, trail_of, elen, np.array(sf, dtype=np.int64),
                          np.array(sg, dtype=np.int64), cum,
                          int(spec.subgroup.identity))


@njit(cache=True)
def _amalgam_kernel(u, burn, fac, rep, mult, phi, in_h, rep_of, trail_of, elen, step_f, step_g, cum,
                    identity):
    """Runs the walk on the stack ``fac``/``rep`` (capacity ``len(u)``)."""
    n = u.shape[0]
    m = 0
    carry = identity
    l_burn = 0.0
    nsteps = cum.shape[0]
    for step in range(n):
        if step == burn:
            l_burn = 0.0
            for k in range(m):
                l_burn += elen[fac[k], rep[k]]
        x = u[step]
        j = 0
        while j < nsteps - 1 and cum[j] <= x:
            j += 1
        i = step_f[j]
        c = mult[i, phi[i, carry], step_g[j]]
        if m > 0 and fac[m - 1] == i:
            m -= 1
            c = mult[i, rep[m], c]
        h = in_h[i, c]
        if h >= 0:
            carry = h
        else:
            fac[m] = i
            rep[m] = rep_of[i, c]
            m += 1
            carry = trail_of[i, c]
    total = 0.0
    for k in range(m):
        total += elen[fac[k], rep[k]]
    if burn >= n:
        l_burn = total
    return l_burn, total, m, carry


def simulate_amalgam(spec: AmalgamSpec, lengths=None, cfg: SimConfig = SimConfig()) -> SimEstimate:
    """Monte Carlo estimate of the rate of escape of the amalgam walk ``X_{n+1} = X_n g``."""
    validate_amalgam(spec)
    t = _amalgam_tables(spec, lengths)
    b = cfg.burn_in
    samples = np.empty(cfg.trials)
    fac = np.empty(cfg.steps, dtype=np.int64)
    rep = np.empty(cfg.steps, dtype=np.int64)
    for k in range(cfg.trials):
        u = np.random.default_rng(trial_seed(cfg.seed, k)).random(cfg.steps)
        lb, ln, _, _ = _amalgam_kernel(u, b, fac, rep, t.mult, t.phi, t.in_h, t.rep_of, t.trail_of, t.elen,
                                       t.step_f, t.step_g, t.cum, t.identity)
        samples[k] = (ln - lb) / (cfg.steps - b)
    return _aggregate(samples, cfg)


def amalgam_trajectory(spec: AmalgamSpec, u):
    """Run the compiled walk on uniforms ``u``.

    Returns the step elements ``[(factor, element), ...]`` and the final
    normal form as ``(reps, trailing)``, for checks against the reference
    multiplication.
    """
    t = _amalgam_tables(spec, None)
    u = np.asarray(u, dtype=float)
    fac = np.empty(max(u.size, 1), dtype=np.int64)
    rep = np.empty(max(u.size, 1), dtype=np.int64)
    _, _, m, carry = _amalgam_kernel(u, u.size, fac, rep, t.mult, t.phi, t.in_h, t.rep_of, t.trail_of,
                                     t.elen, t.step_f, t.step_g, t.cum, t.identity)
    pick = np.minimum(np.searchsorted(t.cum, u, side="right"), t.cum.size - 1)
    steps = [(int(t.step_f[j]), int(t.step_g[j])) for j in pick]
    word = tuple((int(fac[k]), int(rep[k])) for k in range(m))
    return steps, (word, int(carry))
