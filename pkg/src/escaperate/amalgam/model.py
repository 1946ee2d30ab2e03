"""Free products of finite groups amalgamated over a common subgroup.

Elements are normal-form words ``x_1 ... x_n h``: coset representatives
from alternating factors followed by a trailing element of the shared
subgroup ``H``.  A factor element outside ``H`` is addressed as a pair
``(i, g)``: factor index and element index in that factor's table.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np

from ..exceptions import (AmalgamError, BadCosets, BadMeasure, BadWeights, NotAGroup,
                          NotAHomomorphism)
from .groups import FiniteGroup, cyclic

MASS_TOL = 1e-12


def _prob(v) -> float:
    return float(Fraction(v.strip())) if isinstance(v, str) else float(v)


@dataclass(frozen=True, eq=False)
class SubgroupEmbedding:
    """The shared subgroup and, per factor, an injective map into it (index arrays)."""

    subgroup: FiniteGroup
    maps: tuple


@dataclass(frozen=True, eq=False)
class AmalgamSpec:
    """Factors, embeddings, mixing weights and factor measures.

    ``measures[i][g]`` is the probability of element ``g`` of factor ``i``.
    ``representatives[i]`` lists one element index per coset of the
    subgroup, identity first; None picks the first element of each coset in
    table order.  ``rep_lengths[i]`` maps representative names to lengths;
    None (or a missing name) means length one.
    """

    factors: tuple
    embedding: SubgroupEmbedding
    weights: np.ndarray
    measures: tuple
    representatives: tuple | None = None
    rep_lengths: tuple | None = None

    @classmethod
    def build(cls, factors, subgroup, maps, weights=None, measures=None,
              representatives=None, rep_lengths=None) -> "AmalgamSpec":
        """Build from names.

        ``maps[i]`` maps subgroup element names to factor ``i`` names;
        ``measures[i]`` maps element names to probabilities (fraction
        strings allowed); ``representatives[i]`` is a list of names.
        Weights default to uniform.
        """
        factors = tuple(factors)
        r = len(factors)
        emaps = []
        for G, m in zip(factors, maps):
            if isinstance(m, Mapping):
                try:
                    arr = [G.index[str(m[h])] for h in subgroup.elements]
                except KeyError as exc:
                    raise NotAHomomorphism(f"embedding does not map {exc.args[0]!r} into the factor") from None
            else:
                arr = list(m)
            emaps.append(np.asarray(arr, dtype=np.intp))
        if weights is None:
            weights = [1.0 / r] * r
        w = np.array([_prob(x) for x in weights], dtype=float)
        if measures is None:
            raise BadMeasure("factor measures are required")
        mus = []
        for G, m in zip(factors, measures):
            arr = np.zeros(len(G))
            if isinstance(m, Mapping):
                for name, p in m.items():
                    if str(name) not in G.index:
                        raise BadMeasure(f"measure names unknown element {name!r}")
                    arr[G.index[str(name)]] += _prob(p)
            else:
                arr[:] = [_prob(p) for p in m]
            mus.append(arr)
        reps = None
        if representatives is not None:
            reps = []
            for G, rl in zip(factors, representatives):
                try:
                    reps.append(tuple(G.index[str(x)] for x in rl))
                except KeyError as exc:
                    raise BadCosets(f"unknown representative {exc.args[0]!r}") from None
            reps = tuple(reps)
        lens = None
        if rep_lengths is not None:
            lens = tuple({str(k): float(v) for k, v in (d or {}).items()} for d in rep_lengths)
        return cls(factors, SubgroupEmbedding(subgroup, tuple(emaps)), w, tuple(mus), reps, lens)

    @property
    def r(self) -> int:
        return len(self.factors)

    @property
    def subgroup(self) -> FiniteGroup:
        return self.embedding.subgroup

    @cached_property
    def layout(self) -> "Layout":
        return Layout(self)

    def with_lengths(self, rep_lengths) -> "AmalgamSpec":
        return AmalgamSpec(self.factors, self.embedding, self.weights, self.measures,
                           self.representatives, rep_lengths)


class Layout:
    """Index tables derived from a spec.

    * ``in_h[i][g]``: subgroup index of ``g`` or -1;
    * ``rep_of[i][g]``, ``trail_of[i][g]``: ``g = rep * phi_i(trail)``;
    * ``states``: all ``(i, g)`` with ``g`` outside the subgroup, in factor
      order; ``state_index`` inverts it;
    * ``mu[i][g]``: the mixed step law on factor ``i`` (subgroup elements
      carry their total mass ``mu_h``);
    * ``mu_h[h]``: mass of subgroup element ``h``.
    """

    def __init__(self, spec: AmalgamSpec):
        H = spec.subgroup
        self.nH = len(H)
        self.r = spec.r
        self.phi = [np.asarray(m, dtype=np.intp) for m in spec.embedding.maps]
        self.in_h = []
        self.reps = []
        self.rep_of = []
        self.trail_of = []
        for i, G in enumerate(spec.factors):
            inh = np.full(len(G), -1, dtype=np.intp)
            inh[self.phi[i]] = np.arange(self.nH)
            self.in_h.append(inh)
            reps = spec.representatives[i] if spec.representatives is not None else _default_reps(G, self.phi[i])
            rep_of = np.full(len(G), -1, dtype=np.intp)
            trail = np.full(len(G), -1, dtype=np.intp)
            for x in reps:
                for h in range(self.nH):
                    g = int(G.table[x, self.phi[i][h]])
                    rep_of[g] = x
                    trail[g] = h
            self.reps.append(tuple(int(x) for x in reps))
            self.rep_of.append(rep_of)
            self.trail_of.append(trail)
        self.states = [(i, g) for i, G in enumerate(spec.factors) for g in range(len(G)) if self.in_h[i][g] < 0]
        self.state_index = {s: k for k, s in enumerate(self.states)}
        self.state_factor = np.array([i for i, _ in self.states], dtype=np.intp)
        self.mu_h = np.zeros(self.nH)
        for i in range(self.r):
            self.mu_h += spec.weights[i] * np.asarray(spec.measures[i])[self.phi[i]]
        self.mu = []
        for i in range(self.r):
            m = spec.weights[i] * np.asarray(spec.measures[i], dtype=float)
            m[self.phi[i]] = self.mu_h
            self.mu.append(m)
        self.labels = [f"{i + 1}:{spec.factors[i].elements[g]}" for i, g in self.states]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def factor_states(self, i) -> np.ndarray:
        return np.nonzero(self.state_factor == i)[0]


def _default_reps(G: FiniteGroup, phi) -> tuple:
    seen = set()
    reps = []
    for x in [G.identity] + [g for g in range(len(G)) if g != G.identity]:
        coset = frozenset(int(G.table[x, h]) for h in phi)
        if coset not in seen:
            seen.add(coset)
            reps.append(x)
    return tuple(reps)


@dataclass(frozen=True)
class AmalgamDiagnostics:
    r: int
    indices: tuple
    recurrent: bool
    mass: float


def validate_amalgam(spec: AmalgamSpec) -> AmalgamDiagnostics:
    """Check group axioms, embeddings, cosets, weights and measures."""
    if spec.r < 2:
        raise AmalgamError("an amalgam needs at least two factors")
    H = spec.subgroup
    H.check()
    if len(spec.embedding.maps) != spec.r:
        raise NotAHomomorphism("need one embedding per factor")
    for i, (G, phi) in enumerate(zip(spec.factors, spec.embedding.maps)):
        try:
            G.check()
        except NotAGroup as exc:
            raise NotAGroup(f"factor {i + 1}: {exc}") from None
        phi = np.asarray(phi)
        if phi.shape != (len(H),) or phi.min() < 0 or phi.max() >= len(G):
            raise NotAHomomorphism(f"factor {i + 1}: embedding must send every subgroup element into the factor")
        if len(set(phi.tolist())) != len(H):
            raise NotAHomomorphism(f"factor {i + 1}: embedding is not injective")
        if not np.array_equal(phi[H.table], G.table[np.ix_(phi, phi)]):
            raise NotAHomomorphism(f"factor {i + 1}: embedding does not respect multiplication")
        if len(G) % len(H):
            raise BadCosets(f"factor {i + 1}: subgroup order does not divide {len(G)}")
    if spec.representatives is not None:
        if len(spec.representatives) != spec.r:
            raise BadCosets("need one representative list per factor")
        for i, (G, reps) in enumerate(zip(spec.factors, spec.representatives)):
            phi = spec.embedding.maps[i]
            if not reps or reps[0] != G.identity:
                raise BadCosets(f"factor {i + 1}: the first representative must be the identity")
            cover = [int(G.table[x, h]) for x in reps for h in phi]
            if len(reps) * len(H) != len(G) or len(set(cover)) != len(G):
                raise BadCosets(f"factor {i + 1}: representatives do not pick one element per coset")
    w = np.asarray(spec.weights, dtype=float)
    if w.shape != (spec.r,) or np.any(~(w > 0)) or abs(w.sum() - 1.0) > MASS_TOL:
        raise BadWeights(f"weights must be {spec.r} positive numbers summing to 1, got {w.tolist()}")
    for i, (G, m) in enumerate(zip(spec.factors, spec.measures)):
        m = np.asarray(m, dtype=float)
        if m.shape != (len(G),) or np.any(~(m >= 0)) or abs(m.sum() - 1.0) > MASS_TOL:
            raise BadMeasure(f"factor {i + 1}: measure is not a probability vector")
    if spec.rep_lengths is not None:
        lay = spec.layout
        for i, d in enumerate(spec.rep_lengths):
            names = {spec.factors[i].elements[x] for x in lay.reps[i][1:]}
            for k, v in (d or {}).items():
                if k not in names:
                    raise BadCosets(f"factor {i + 1}: length given for {k!r}, which is not a representative")
                if not v >= 0:
                    raise AmalgamError(f"factor {i + 1}: negative length for {k!r}")
    mass = float(sum(induced_mu(spec).values()))
    idx = tuple(len(G) // len(H) for G in spec.factors)
    return AmalgamDiagnostics(spec.r, idx, recurrence_check(spec), mass)


def recurrence_check(spec: AmalgamSpec) -> bool:
    """Two factors, each containing the subgroup with index two."""
    H = spec.subgroup
    return spec.r == 2 and all(len(G) == 2 * len(H) for G in spec.factors)


def induced_mu(spec: AmalgamSpec) -> dict:
    """The step law on the amalgam, keyed by ``"i:name"`` (factor elements)
    and ``"h:name"`` (subgroup elements)."""
    lay = spec.layout
    out = {f"h:{spec.subgroup.elements[h]}": float(lay.mu_h[h]) for h in range(lay.nH)}
    for k, (i, g) in enumerate(lay.states):
        out[lay.labels[k]] = float(lay.mu[i][g])
    return out


def element_lengths(spec: AmalgamSpec, lengths=None) -> list:
    """Per factor, the length ``l(rep(g))`` of every element (0 on the subgroup).

    ``lengths`` may be None (the spec's own), ``"natural"``, or one mapping
    per factor from representative names to lengths.
    """
    lay = spec.layout
    if isinstance(lengths, str):
        if lengths != "natural":
            raise ValueError(f"unknown length function {lengths!r}")
        table = None
    else:
        table = spec.rep_lengths if lengths is None else tuple(lengths)
    out = []
    for i, G in enumerate(spec.factors):
        d = table[i] if table is not None else None
        d = d or {}
        arr = np.zeros(len(G))
        for g in range(len(G)):
            if lay.in_h[i][g] < 0:
                arr[g] = float(d.get(G.elements[lay.rep_of[i][g]], 1.0))
        out.append(arr)
    return out


def is_natural(spec: AmalgamSpec, elem_lengths) -> bool:
    lay = spec.layout
    return all(np.all(elem_lengths[i][lay.in_h[i] < 0] == 1.0) for i in range(spec.r))


def is_left_invariant(spec: AmalgamSpec, elem_lengths) -> bool:
    """True iff ``l(h x) = l(x)`` for subgroup elements ``h``.

    Letterwise this says ``l(rep(phi_i(h) g)) = l(rep(g))``, i.e. lengths are
    constant on double cosets ``H g H``.  It always holds for the natural
    length and for abelian factors.
    """
    lay = spec.layout
    for i, G in enumerate(spec.factors):
        lens = np.asarray(elem_lengths[i])
        moved = lens[G.table[lay.phi[i]]]  # moved[h, g] = l(phi(h) g)
        if not np.allclose(moved, lens[None, :], rtol=0, atol=1e-12):
            return False
    return True


@dataclass(frozen=True)
class NormalWord:
    """``reps``: ``(factor, element)`` pairs of representatives; ``trailing``: subgroup index."""

    reps: tuple = ()
    trailing: int = 0

    def __len__(self):
        return len(self.reps)


def identity_word(spec: AmalgamSpec) -> NormalWord:
    return NormalWord((), spec.subgroup.identity)


def _push(spec, stack, carry, i, g):
    """Right-multiply the word ``stack * carry`` by element ``g`` of factor ``i``."""
    lay = spec.layout
    G = spec.factors[i]
    c = int(G.table[lay.phi[i][carry], g])
    if stack and stack[-1][0] == i:
        c = int(G.table[stack.pop()[1], c])
    h = lay.in_h[i][c]
    if h >= 0:
        return int(h)
    stack.append((i, int(lay.rep_of[i][c])))
    return int(lay.trail_of[i][c])


def word_multiply(spec: AmalgamSpec, w1: NormalWord, w2: NormalWord) -> NormalWord:
    """Normal form of ``w1 w2``: feed the letters of ``w2`` through the trailing part of ``w1``."""
    stack = list(w1.reps)
    carry = w1.trailing
    for i, x in w2.reps:
        carry = _push(spec, stack, carry, i, x)
    carry = int(spec.subgroup.table[carry, w2.trailing])
    return NormalWord(tuple(stack), carry)


def from_elements(spec: AmalgamSpec, elems) -> NormalWord:
    """Product of factor elements ``[(i, g), ...]`` in normal form."""
    stack: list = []
    carry = spec.subgroup.identity
    for i, g in elems:
        carry = _push(spec, stack, carry, i, g)
    return NormalWord(tuple(stack), carry)


def word_inverse(spec: AmalgamSpec, w: NormalWord) -> NormalWord:
    lay = spec.layout
    H = spec.subgroup
    elems = [(0, int(lay.phi[0][H.inverse[w.trailing]]))]
    elems += [(i, int(spec.factors[i].inverse[x])) for i, x in reversed(w.reps)]
    return from_elements(spec, elems)


def word_length(spec: AmalgamSpec, w: NormalWord, elem_lengths=None) -> float:
    if elem_lengths is None:
        return float(len(w))
    return float(sum(elem_lengths[i][x] for i, x in w.reps))


def parse_word(spec: AmalgamSpec, text: str) -> NormalWord:
    """Parse whitespace-separated element names; ``i:name`` selects a factor,
    a bare name must be unique across factors (subgroup names resolve in factor 1)."""
    elems = []
    for tok in text.split():
        if ":" in tok:
            f, name = tok.split(":", 1)
            i = int(f) - 1
            if not 0 <= i < spec.r or name not in spec.factors[i].index:
                raise AmalgamError(f"unknown element {tok!r}")
            elems.append((i, spec.factors[i].index[name]))
            continue
        hits = [(i, G.index[tok]) for i, G in enumerate(spec.factors) if tok in G.index]
        nonh = [(i, g) for i, g in hits if spec.layout.in_h[i][g] < 0]
        if len(nonh) > 1:
            raise AmalgamError(f"element name {tok!r} is ambiguous; prefix it with its factor")
        if not hits:
            raise AmalgamError(f"unknown element {tok!r}")
        elems.append(nonh[0] if nonh else hits[0])
    return from_elements(spec, elems)


def format_word(spec: AmalgamSpec, w: NormalWord) -> str:
    parts = [spec.factors[i].elements[x] for i, x in w.reps]
    if w.trailing != spec.subgroup.identity or not parts:
        parts.append(spec.subgroup.elements[w.trailing])
    return " ".join(parts)


def cyclic_amalgam(d: int) -> AmalgamSpec:
    """``Z/d *_{Z/2} Z/d`` with generators ``a``, ``b``; each factor steps by
    its generator and the two factors are chosen with probability 1/2."""
    if d < 2 or d % 2:
        raise AmalgamError("d must be even and at least 2")
    A, B = cyclic(d, "a"), cyclic(d, "b")
    H = cyclic(2, "z")
    half = d // 2
    step = [0.0] * d
    step[1] = 1.0
    return AmalgamSpec(
        (A, B), SubgroupEmbedding(H, (np.array([0, half]), np.array([0, half]))),
        np.array([0.5, 0.5]), (np.array(step), np.array(step)))


def random_amalgam(rng: np.random.Generator, max_factor: int = 8, max_subgroup: int = 4,
                   r: int | None = None, sparsity: float = 0.0) -> AmalgamSpec:
    """A random transient amalgam of catalog groups.

    Elements of each factor are shuffled (identity kept first) so that the
    default representatives vary.  ``sparsity`` is the chance that an
    element outside the subgroup gets zero mass; at least one element
    outside the subgroup always keeps positive mass.
    """
    from .groups import catalog, injective_homomorphisms, relabel

    cat = catalog()
    subs = [g for g in cat.values() if len(g) <= max_subgroup]
    while True:
        H = subs[rng.integers(len(subs))]
        n_f = int(r) if r is not None else int(rng.integers(2, 4))
        pool = [g for g in cat.values() if len(g) <= max_factor and len(g) % len(H) == 0 and len(g) > len(H)]
        factors, maps = [], []
        for _ in range(n_f):
            G = pool[rng.integers(len(pool))]
            order = [G.identity] + list(rng.permutation([g for g in range(len(G)) if g != G.identity]))
            G = relabel(G, order)
            homs = injective_homomorphisms(H, G, limit=16)
            if not homs:
                break
            factors.append(G)
            maps.append(homs[rng.integers(len(homs))])
        if len(factors) != n_f:
            continue
        probe = AmalgamSpec(tuple(factors), SubgroupEmbedding(H, tuple(maps)), np.full(n_f, 1.0 / n_f),
                            tuple(np.full(len(G), 1.0 / len(G)) for G in factors))
        if recurrence_check(probe):
            continue
        w = rng.dirichlet(np.ones(n_f))
        w = np.maximum(w, 0.05)
        w /= w.sum()
        mus = []
        for G, phi in zip(factors, maps):
            m = rng.dirichlet(np.ones(len(G)))
            outside = np.setdiff1d(np.arange(len(G)), phi)
            if sparsity > 0:
                drop = outside[rng.random(outside.size) < sparsity]
                if drop.size == outside.size:
                    drop = drop[1:]
                m[drop] = 0.0
            mus.append(m / m.sum())
        return AmalgamSpec(tuple(factors), SubgroupEmbedding(H, tuple(maps)), w, tuple(mus))
