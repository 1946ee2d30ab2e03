"""Encode an amalgam walk as a walk on a regular language.

Letters are the factor elements outside the subgroup, written ``i:name``.
A word ``x_1 ... x_{n-1} (x_n h)`` keeps every letter but the last as a
bare representative, so the last two letters carry all the information a
step needs.  Words of length zero forget the subgroup element; the rate of
escape does not see the boundary, only which pairs can occur.
"""

from __future__ import annotations

from ..walk import Letter, RegularLanguageWalk
from .model import AmalgamSpec, element_lengths


def _add(row, target, p):
    if p > 0:
        row[target] = row.get(target, 0.0) + float(p)


def encode_as_regular_language(spec: AmalgamSpec, lengths=None) -> RegularLanguageWalk:
    """Regular-language walk with the same rate of escape; letter lengths
    are the lengths of the letters' representatives."""
    lay = spec.layout
    lens = element_lengths(spec, lengths)
    sym = {s: lab for s, lab in zip(lay.states, lay.labels)}
    alphabet = tuple(Letter(sym[(i, g)], float(lens[i][g])) for i, g in lay.states)

    def moves(i, g):
        """Steps from last letter ``g`` of factor ``i``: (kind, payload, p)."""
        G = spec.factors[i]
        for t in range(len(G)):
            p = lay.mu[i][t]
            if p <= 0:
                continue
            c = int(G.table[g, t])
            h = lay.in_h[i][c]
            yield ("drop", int(h), p) if h >= 0 else ("stay", sym[(i, c)], p)
        rep = sym.get((i, int(lay.rep_of[i][g])))
        lead = lay.trail_of[i][g]
        for j, t in lay.states:
            p = lay.mu[j][t]
            if j != i and p > 0:
                new = sym[(j, int(spec.factors[j].table[lay.phi[j][lead], t]))]
                yield "push", (rep, new), p

    pair_rows = {}
    for j, x in lay.states:
        if lay.rep_of[j][x] != x:
            continue  # only representatives sit before the last letter
        a = sym[(j, x)]
        Gj = spec.factors[j]
        for i, g in lay.states:
            if i == j:
                continue
            row: dict = {}
            for kind, what, p in moves(i, g):
                if kind == "drop":
                    _add(row, (sym[(j, int(Gj.table[x, lay.phi[j][what]]))],), p)
                elif kind == "stay":
                    _add(row, (a, what), p)
                else:
                    _add(row, (a,) + what, p)
            pair_rows[(a, sym[(i, g)])] = row

    single_rows = {}
    for i, g in lay.states:
        row = {}
        for kind, what, p in moves(i, g):
            if kind == "drop":
                _add(row, (), p)
            elif kind == "stay":
                _add(row, (what,), p)
            else:
                _add(row, what, p)
        single_rows[(sym[(i, g)],)] = row

    empty_row: dict = {}
    _add(empty_row, (), float(lay.mu_h.sum()))
    for i, t in lay.states:
        _add(empty_row, (sym[(i, t)],), lay.mu[i][t])
    return RegularLanguageWalk(alphabet, pair_rows, single_rows, empty_row)
