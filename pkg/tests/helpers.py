"""Random instances and brute-force oracles shared by the test modules.

The oracles never touch the generating-function code: they enumerate words
up to a depth cutoff and solve the absorption problem of the truncated chain
directly.  Mass that climbs above the cutoff is lost, so oracle values
approach the true ones from below.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from escaperate import RegularLanguageWalk, escape_rate
from escaperate.amalgam import random_amalgam
from escaperate.amalgam.model import NormalWord, from_elements, word_multiply
from escaperate.exceptions import NonDeterministicRate


def random_walk(rng, n_letters=None, push=0.55):
    """Every pair owns a row of 2 to 4 random targets; ``push`` biases towards growth."""
    n = int(n_letters or rng.integers(2, 4))
    letters = "abc"[:n]
    rows = {}
    for a in letters:
        for b in letters:
            k = int(rng.integers(2, 5))
            row = {}
            for p in rng.dirichlet(np.ones(k)):
                size = 3 if rng.random() < push else int(rng.integers(1, 3))
                t = "".join(rng.choice(list(letters), size))
                row[t] = row.get(t, 0.0) + float(p)
            rows[a + b] = row
    return RegularLanguageWalk.from_rows(letters, rows)


def transient_walks(seed, count, **kw):
    """``count`` random walks whose exit chain is transient with a single class."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        w = random_walk(rng, **kw)
        try:
            rep = escape_rate(w)
        except NonDeterministicRate:
            continue
        if rep.transient:
            out.append((w, rep))
    return out


def random_amalgams(seed, count, **kw):
    rng = np.random.default_rng(seed)
    return [random_amalgam(rng, **kw) for _ in range(count)]


def random_lengths(spec, rng):
    """Independent random length per representative (generally not H-invariant)."""
    lay = spec.layout
    return tuple({spec.factors[i].elements[x]: float(rng.uniform(0.2, 3.0)) for x in lay.reps[i][1:]}
                 for i in range(spec.r))


def invariant_lengths(spec, rng):
    """Random lengths constant on each double coset H g H."""
    lay = spec.layout
    out = []
    for i, G in enumerate(spec.factors):
        phi = lay.phi[i]
        seen, d = {}, {}
        for x in lay.reps[i][1:]:
            orbit = frozenset(int(lay.rep_of[i][G.table[G.table[h, x], k]]) for h in phi for k in phi)
            if orbit not in seen:
                seen[orbit] = float(rng.uniform(0.2, 3.0))
            d[G.elements[x]] = seen[orbit]
        out.append(d)
    return tuple(out)


def _absorb(start, step, absorbed, depth_of, max_depth):
    """Absorption probabilities of a chain explored breadth-first from ``start``.

    ``step(x)`` yields ``(y, p)``; ``absorbed(y)`` returns an outcome key or
    None; states deeper than ``max_depth`` are killed.  Returns
    ``{outcome: probability}``.
    """
    index = {start: 0}
    order = [start]
    rows, cols, vals = [], [], []
    hits = {}
    k = 0
    while k < len(order):
        x = order[k]
        for y, p in step(x):
            key = absorbed(y)
            if key is not None:
                hits.setdefault(key, []).append((k, p))
                continue
            if depth_of(y) > max_depth:
                continue
            j = index.get(y)
            if j is None:
                j = index[y] = len(order)
                order.append(y)
            rows.append(k)
            cols.append(j)
            vals.append(p)
        k += 1
    n = len(order)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A = (sp.identity(n, format="csc") - Q.tocsc())
    lu = spla.splu(A)
    out = {}
    for key, entries in hits.items():
        b = np.zeros(n)
        for i, p in entries:
            b[i] += p
        out[key] = float(lu.solve(b)[0])
    return out


def walk_step(walk):
    def step(word):
        row = walk.pair_rows[word[-2:]]
        for t, p in row.items():
            if p > 0:
                yield word[:-2] + t, p
    return step


def truncated_H(walk, ab, max_depth=12):
    """``P_ab[first word of length one is c]`` for each letter ``c``."""
    return _absorb(tuple(ab), walk_step(walk), lambda y: y[0] if len(y) == 1 else None, len, max_depth)


def truncated_escape(walk, abc, max_depth=12):
    """Probability that the walk from ``abc`` returns to length three or less (lower bound)."""
    got = _absorb(tuple(abc), walk_step(walk), lambda y: "back" if len(y) <= 3 else None, len, max_depth)
    return got.get("back", 0.0)


def amalgam_steps(spec):
    lay = spec.layout
    out = []
    for h in range(lay.nH):
        if lay.mu_h[h] > 0:
            out.append((from_elements(spec, [(0, int(lay.phi[0][h]))]), float(lay.mu_h[h])))
    for i, g in lay.states:
        if lay.mu[i][g] > 0:
            out.append((from_elements(spec, [(i, g)]), float(lay.mu[i][g])))
    return out


def truncated_amalgam_H(spec, state, max_depth=8):
    """``P_g[first visit to the subgroup is at h]`` for the factor state ``g``."""
    steps = amalgam_steps(spec)
    start = from_elements(spec, [state])

    def step(w):
        for s, p in steps:
            yield word_multiply(spec, w, s), p

    def absorbed(w: NormalWord):
        return w.trailing if not w.reps else None

    return _absorb(start, step, absorbed, len, max_depth)


def richardson(f, h=1e-5):
    """Central difference at 1 with one Richardson extrapolation."""
    d1 = (f(1 + h) - f(1 - h)) / (2 * h)
    d2 = (f(1 + h / 2) - f(1 - h / 2)) / h
    return (4 * d2 - d1) / 3
