"""Finite groups given by multiplication tables, plus a small catalog."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..exceptions import NotAGroup


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """``table[i, j]`` is the index of ``elements[i] * elements[j]``."""

    elements: tuple
    table: np.ndarray
    identity: int = 0

    @classmethod
    def from_table(cls, elements, table, identity) -> "FiniteGroup":
        """Build from element names and a table of names (or indices)."""
        elements = tuple(str(e) for e in elements)
        if len(set(elements)) != len(elements):
            raise NotAGroup(f"duplicate element names in {elements}")
        pos = {e: i for i, e in enumerate(elements)}
        n = len(elements)
        rows = list(table)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise NotAGroup(f"multiplication table must be {n} x {n}")
        arr = np.empty((n, n), dtype=np.intp)
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                k = pos.get(str(v))
                if k is None:
                    k = int(v) if isinstance(v, (int, np.integer)) and not isinstance(v, bool) else -1
                if not 0 <= k < n:
                    raise NotAGroup(f"table entry {v!r} is not an element")
                arr[i, j] = k
        if str(identity) not in pos:
            raise NotAGroup(f"identity {identity!r} is not an element")
        return cls(elements, arr, pos[str(identity)])

    def __len__(self):
        return len(self.elements)

    @cached_property
    def index(self) -> dict:
        return {e: i for i, e in enumerate(self.elements)}

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.full(len(self), -1, dtype=np.intp)
        for i in range(len(self)):
            hits = np.nonzero(self.table[i] == self.identity)[0]
            if hits.size:
                inv[i] = hits[0]
        return inv

    def mul(self, *xs) -> int:
        out = self.identity
        for x in xs:
            out = int(self.table[out, x])
        return out

    def check(self) -> None:
        """Raise :class:`NotAGroup` unless the table defines a group."""
        n = len(self)
        T = self.table
        if T.shape != (n, n) or T.min() < 0 or T.max() >= n:
            raise NotAGroup("table is not closed")
        e = self.identity
        idx = np.arange(n)
        if not (np.array_equal(T[e], idx) and np.array_equal(T[:, e], idx)):
            raise NotAGroup(f"{self.elements[e]!r} is not a two-sided identity")
        inv = self.inverse
        if np.any(inv < 0) or not np.all(T[inv, idx] == e):
            raise NotAGroup("some element has no inverse")
        # (ab)c == a(bc) for all triples
        left = T[T[:, :, None], idx[None, None, :]]
        right = T[idx[:, None, None], T[None, :, :]]
        if not np.array_equal(left, right):
            a, b, c = np.argwhere(left != right)[0]
            names = self.elements
            raise NotAGroup(f"not associative: ({names[a]}{names[b]}){names[c]} != {names[a]}({names[b]}{names[c]})")

    def table_names(self) -> list:
        return [[self.elements[k] for k in row] for row in self.table]


def cyclic(n: int, gen: str = "a", identity: str = "e") -> FiniteGroup:
    """``Z/nZ`` with elements ``e, a, a2, ..., a{n-1}``."""
    names = [identity] + [gen if k == 1 else f"{gen}{k}" for k in range(1, n)]
    table = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return FiniteGroup(tuple(names), table.astype(np.intp), 0)


def from_permutations(gens, prefix: str = "g") -> FiniteGroup:
    """Group generated by permutations (tuples), closed by breadth-first search."""
    gens = [tuple(g) for g in gens]
    ident = tuple(range(len(gens[0])))
    elems = [ident]
    seen = {ident: 0}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = tuple(x[i] for i in g)
                if y not in seen:
                    seen[y] = len(elems)
                    elems.append(y)
                    nxt.append(y)
        frontier = nxt
    n = len(elems)
    table = np.empty((n, n), dtype=np.intp)
    for i, x in enumerate(elems):
        for j, y in enumerate(elems):
            table[i, j] = seen[tuple(x[k] for k in y)]
    names = ["e"] + [f"{prefix}{k}" for k in range(1, n)]
    return FiniteGroup(tuple(names), table, 0)


def direct_product(G: FiniteGroup, K: FiniteGroup) -> FiniteGroup:
    pairs = list(itertools.product(range(len(G)), range(len(K))))
    pos = {p: i for i, p in enumerate(pairs)}
    table = np.empty((len(pairs), len(pairs)), dtype=np.intp)
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            table[i, j] = pos[(int(G.table[a, c]), int(K.table[b, d]))]
    names = tuple(f"({G.elements[a]},{K.elements[b]})" for a, b in pairs)
    return FiniteGroup(names, table, pos[(G.identity, K.identity)])


def relabel(G: FiniteGroup, order) -> FiniteGroup:
    """Same group with elements listed in a new order (identity kept)."""
    order = list(order)
    back = np.empty(len(order), dtype=np.intp)
    back[order] = np.arange(len(order))
    table = back[G.table[np.ix_(order, order)]]
    return FiniteGroup(tuple(G.elements[i] for i in order), table, int(back[G.identity]))


def injective_homomorphisms(H: FiniteGroup, G: FiniteGroup, limit: int | None = None) -> list:
    """All injective homomorphisms ``H -> G`` as index arrays (brute force).

    Only meant for the small groups of the catalog.
    """
    gens = _generators(H)
    out = []
    for images in itertools.product(range(len(G)), repeat=len(gens)):
        phi = _extend(H, G, gens, images)
        if phi is not None and len(set(phi.tolist())) == len(H):
            out.append(phi)
            if limit is not None and len(out) >= limit:
                break
    return out


def _generators(H: FiniteGroup) -> list:
    gens: list = []
    span = {H.identity}
    for x in range(len(H)):
        if x in span:
            continue
        gens.append(x)
        span = _closure(H, gens)
    return gens


def _closure(H, gens):
    span = {H.identity}
    frontier = [H.identity]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = int(H.table[x, g])
                if y not in span:
                    span.add(y)
                    nxt.append(y)
        frontier = nxt
    return span


def _extend(H, G, gens, images):
    phi = np.full(len(H), -1, dtype=np.intp)
    phi[H.identity] = G.identity
    frontier = [H.identity]
    while frontier:
        nxt = []
        for x in frontier:
            for g, im in zip(gens, images):
                y = int(H.table[x, g])
                v = int(G.table[phi[x], im])
                if phi[y] < 0:
                    phi[y] = v
                    nxt.append(y)
                elif phi[y] != v:
                    return None
        frontier = nxt
    if np.any(phi < 0) or not np.array_equal(phi[H.table], G.table[np.ix_(phi, phi)]):
        return None
    return phi


def catalog() -> dict:
    """Small groups used by tests and random instance generators."""
    z2 = cyclic(2)
    return {
        "C1": cyclic(1),
        "C2": z2,
        "C3": cyclic(3),
        "C4": cyclic(4),
        "C5": cyclic(5),
        "C6": cyclic(6),
        "C7": cyclic(7),
        "C8": cyclic(8),
        "V4": direct_product(z2, z2),
        "C2xC4": direct_product(z2, cyclic(4)),
        "C2^3": direct_product(direct_product(z2, z2), z2),
        "S3": from_permutations([(1, 0, 2), (1, 2, 0)], "s"),
        "D4": from_permutations([(1, 2, 3, 0), (3, 2, 1, 0)], "d"),
        "Q8": _quaternion(),
    }


def _quaternion() -> FiniteGroup:
    names = ["1", "-1", "i", "-i", "j", "-j", "k", "-k"]
    basis = {"1": (1, "1"), "i": (1, "i"), "j": (1, "j"), "k": (1, "k")}
    mult = {("1", x): (1, x) for x in "1ijk"}
    mult.update({(x, "1"): (1, x) for x in "1ijk"})
    mult.update({("i", "i"): (-1, "1"), ("j", "j"): (-1, "1"), ("k", "k"): (-1, "1"),
                 ("i", "j"): (1, "k"), ("j", "k"): (1, "i"), ("k", "i"): (1, "j"),
                 ("j", "i"): (-1, "k"), ("k", "j"): (-1, "i"), ("i", "k"): (-1, "j")})

    def parse(nm):
        return (-1, nm[1:]) if nm.startswith("-") else basis[nm]

    pos = {n: i for i, n in enumerate(names)}
    table = np.empty((8, 8), dtype=np.intp)
    for a in names:
        for b in names:
            sa, ua = parse(a)
            sb, ub = parse(b)
            s, u = mult[(ua, ub)]
            s *= sa * sb
            table[pos[a], pos[b]] = pos[u if s > 0 else "-" + u]
    return FiniteGroup(tuple(names), table, 0)
