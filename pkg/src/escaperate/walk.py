"""Random walks on regular languages.

A walk lives on the words over a finite alphabet.  Each step looks only at
the last two letters ``ab`` of the current word ``w ab`` and replaces them by
one, two or three letters, so the length changes by at most one.  Words of
length one and the empty word have their own (optional) boundary rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np

from .exceptions import BoundaryMissing, MalformedRow, UnknownSymbol

ROW_TOL = 1e-12

Word = tuple  # tuple of symbols


@dataclass(frozen=True)
class Letter:
    symbol: str
    length: float = 1.0


@dataclass(frozen=True)
class PairState:
    first: str
    second: str

    def __str__(self):
        return self.first + self.second


@dataclass(frozen=True)
class WalkDiagnostics:
    stochastic: bool
    reachable_pairs: frozenset
    boundary_complete: bool


def _to_prob(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True, eq=False)
class RegularLanguageWalk:
    """Transition structure of a walk on ``A*``.

    Rows are keyed by tuples of symbols; targets are tuples too, the empty
    tuple standing for the empty word.  Use :meth:`from_rows` to build one
    from string-keyed mappings.
    """

    alphabet: tuple
    pair_rows: Mapping = field(default_factory=dict)
    single_rows: Mapping | None = None
    empty_row: Mapping | None = None

    @classmethod
    def from_rows(cls, alphabet, pair_rows, single_rows=None, empty_row=None):
        """Build a walk, normalizing keys and probabilities.

        ``alphabet`` is a sequence of :class:`Letter`, ``(symbol, length)``
        tuples or bare symbols (length 1).  Row keys and targets may be
        strings (split into characters when every symbol is one character,
        on whitespace otherwise) or sequences of symbols.  Probabilities may
        be numbers or fraction strings such as ``"1/3"``.
        """
        letters = []
        for item in alphabet:
            if isinstance(item, Letter):
                letters.append(item)
            elif isinstance(item, str):
                letters.append(Letter(item))
            else:
                sym, length = item
                letters.append(Letter(str(sym), float(length)))
        symbols = [l.symbol for l in letters]
        if len(set(symbols)) != len(symbols):
            raise MalformedRow(f"duplicate letter symbols in alphabet {symbols}")
        split = _splitter(symbols)

        def norm_row(row):
            out = {}
            items = row.items() if isinstance(row, Mapping) else row
            for target, p in items:
                t = split(target)
                out[t] = out.get(t, 0.0) + _to_prob(p)
            return out

        pairs = {}
        for key, row in pair_rows.items():
            k = split(key)
            if len(k) != 2:
                raise MalformedRow(f"pair row key {key!r} is not two letters")
            pairs[k] = norm_row(row)
        singles = None
        if single_rows is not None:
            singles = {}
            for key, row in single_rows.items():
                k = split(key)
                if len(k) != 1:
                    raise MalformedRow(f"single row key {key!r} is not one letter")
                singles[k] = norm_row(row)
        empty = norm_row(empty_row) if empty_row is not None else None
        return cls(tuple(letters), pairs, singles, empty)

    @cached_property
    def symbols(self) -> tuple:
        return tuple(l.symbol for l in self.alphabet)

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.symbols)}

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([l.length for l in self.alphabet], dtype=float)

    @property
    def n_letters(self) -> int:
        return len(self.alphabet)

    def word(self, text) -> Word:
        """Parse ``text`` into a tuple of symbols."""
        return _splitter(self.symbols)(text)

    def format_word(self, word) -> str:
        sep = "" if all(len(s) == 1 for s in self.symbols) else " "
        return sep.join(word)

    @property
    def boundary_complete(self) -> bool:
        if self.single_rows is None or self.empty_row is None:
            return False
        return all((s,) in self.single_rows for s in self.symbols)

    def with_lengths(self, lengths) -> "RegularLanguageWalk":
        """Copy of the walk with letter lengths replaced."""
        if isinstance(lengths, Mapping):
            new = tuple(Letter(l.symbol, float(lengths.get(l.symbol, l.length))) for l in self.alphabet)
        else:
            lengths = list(lengths)
            if len(lengths) != self.n_letters:
                raise ValueError("need one length per letter")
            new = tuple(Letter(l.symbol, float(x)) for l, x in zip(self.alphabet, lengths))
        return RegularLanguageWalk(new, self.pair_rows, self.single_rows, self.empty_row)


def _splitter(symbols):
    symset = set(symbols)
    single_char = all(len(s) == 1 for s in symbols)

    def split(text) -> Word:
        if isinstance(text, (tuple, list)):
            return tuple(str(s) for s in text)
        if text is None:
            return ()
        text = str(text)
        if text in ("", "ε", "eps"):
            return ()
        if single_char:
            return tuple(text.replace(" ", ""))
        if text in symset:
            return (text,)
        return tuple(text.split())

    return split


def _check_row(row, key, symbols, allowed_lengths):
    total = 0.0
    for target, p in row.items():
        if len(target) not in allowed_lengths:
            raise MalformedRow(f"row {key!r}: target {target!r} has length {len(target)}")
        for s in target:
            if s not in symbols:
                raise UnknownSymbol(f"row {key!r}: unknown symbol {s!r} in target {target!r}")
        if not p >= 0.0:
            raise MalformedRow(f"row {key!r}: negative probability {p} for {target!r}")
        total += p
    if abs(total - 1.0) > ROW_TOL:
        raise MalformedRow(f"row {key!r}: probabilities sum to {total!r}, not 1")


def validate_walk(walk: RegularLanguageWalk) -> WalkDiagnostics:
    """Check every row of ``walk`` and report what is reachable."""
    symbols = set(walk.symbols)
    for l in walk.alphabet:
        if not l.length >= 0:
            raise MalformedRow(f"letter {l.symbol!r} has negative length {l.length}")
    for key, row in walk.pair_rows.items():
        for s in key:
            if s not in symbols:
                raise UnknownSymbol(f"pair row key {key!r} uses unknown symbol {s!r}")
        _check_row(row, "".join(key), symbols, (1, 2, 3))
    if walk.single_rows is not None:
        for key, row in walk.single_rows.items():
            if key[0] not in symbols:
                raise UnknownSymbol(f"single row key {key!r} uses unknown symbol")
            _check_row(row, key[0], symbols, (0, 1, 2))
    if walk.empty_row is not None:
        _check_row(walk.empty_row, "ε", symbols, (0, 1))
    complete = walk.boundary_complete
    reach = reachable_pairs(walk, assume_all=not complete)
    return WalkDiagnostics(True, frozenset(PairState(*p) for p in reach), complete)


def descent_support(walk: RegularLanguageWalk) -> dict:
    """Map each pair ``ab`` to the letters ``c`` it can descend to.

    This is the structural (zero/non-zero) least fixed point of the
    first-descent equations, i.e. the support of ``H(ab, c | 1)``.
    """
    sup = {k: set() for k in walk.pair_rows}
    changed = True
    while changed:
        changed = False
        for ab, row in walk.pair_rows.items():
            cur = sup[ab]
            before = len(cur)
            for t, p in row.items():
                if p <= 0:
                    continue
                if len(t) == 1:
                    cur.add(t[0])
                elif len(t) == 2:
                    cur |= sup.get(t, set())
                else:
                    d, e, f = t
                    for g in list(sup.get((e, f), ())):
                        cur |= sup.get((d, g), set())
            if len(cur) != before:
                changed = True
    return sup


def reachable_pairs(walk: RegularLanguageWalk, assume_all: bool = False) -> set:
    """Pairs of letters that can appear as the last two letters.

    With ``assume_all`` every pair owning a row with positive mass is
    returned.  Otherwise the words reachable from the empty word are
    explored; excursions above the current level are summarized by
    :func:`descent_support`, so the exploration is finite.
    """
    if assume_all:
        return {k for k, row in walk.pair_rows.items() if any(p > 0 for p in row.values())}
    if walk.single_rows is None or walk.empty_row is None:
        raise BoundaryMissing("forward reachability needs single-letter and empty-word rows")
    sup = descent_support(walk)
    singles: set = set()
    pairs: set = set()
    base: set = set()  # pairs that occur as a whole word of length two
    for t, p in walk.empty_row.items():
        if p > 0 and len(t) == 1:
            singles.add(t)
    changed = True
    while changed:
        n_before = (len(singles), len(pairs), len(base))
        for a in list(singles):
            row = walk.single_rows.get(a)
            if row is None:
                raise BoundaryMissing(f"no row for the one-letter word {a[0]!r}")
            for t, p in row.items():
                if p <= 0:
                    continue
                if len(t) == 1:
                    singles.add(t)
                elif len(t) == 2:
                    pairs.add(t)
                    base.add(t)
        for ab in list(pairs):
            row = walk.pair_rows.get(ab)
            if row is None:
                raise MalformedRow(f"reachable pair {''.join(ab)!r} has no transition row")
            is_base = ab in base
            for t, p in row.items():
                if p <= 0:
                    continue
                if len(t) == 1:
                    if is_base:
                        singles.add(t)
                elif len(t) == 2:
                    pairs.add(t)
                    if is_base:
                        base.add(t)
                else:
                    d, e, f = t
                    pairs.add((e, f))
                    for g in sup.get((e, f), ()):
                        pairs.add((d, g))
                        if is_base:
                            base.add((d, g))
        changed = (len(singles), len(pairs), len(base)) != n_before
    return pairs


def successor_distribution(walk: RegularLanguageWalk, suffix) -> dict:
    """One-step law from the word ``suffix``.

    Returns ``{(next_word, length_delta): probability}``.  Only the last two
    letters take part in the step; any longer prefix is carried along.
    """
    word = walk.word(suffix) if not isinstance(suffix, tuple) else suffix
    if len(word) >= 2:
        prefix, key = word[:-2], word[-2:]
        row = walk.pair_rows.get(key)
        if row is None:
            raise MalformedRow(f"no transition row for pair {''.join(key)!r}")
        base_len = 2
    elif len(word) == 1:
        prefix, key = (), word
        row = (walk.single_rows or {}).get(key)
        if row is None:
            raise BoundaryMissing(f"no row for the one-letter word {word[0]!r}")
        base_len = 1
    else:
        prefix, key = (), ()
        row = walk.empty_row
        if row is None:
            raise BoundaryMissing("no row for the empty word")
        base_len = 0
    out: dict = {}
    for t, p in row.items():
        if p <= 0:
            continue
        k = (prefix + t, len(t) - base_len)
        out[k] = out.get(k, 0.0) + p
    return out


@dataclass(frozen=True)
class PairTensors:
    """Dense transition arrays indexed by the pairs that own a row.

    ``single[p, c]`` is the probability that pair ``p`` is replaced by the
    letter ``c``; ``modify[p, q]`` that it becomes pair ``q``;
    ``push[p, a, q]`` that it becomes the three letters ``a`` + pair ``q``.
    """

    pairs: tuple
    pair_index: dict
    single: np.ndarray
    modify: np.ndarray
    push: np.ndarray


def pair_tensors(walk: RegularLanguageWalk) -> PairTensors:
    pairs = tuple(sorted(walk.pair_rows, key=lambda k: (walk.index[k[0]], walk.index[k[1]])))
    pidx = {k: i for i, k in enumerate(pairs)}
    n, P = walk.n_letters, len(pairs)
    single = np.zeros((P, n))
    modify = np.zeros((P, P))
    push = np.zeros((P, n, P))
    for ab, row in walk.pair_rows.items():
        i = pidx[ab]
        for t, p in row.items():
            if p == 0:
                continue
            if len(t) == 1:
                single[i, walk.index[t[0]]] += p
            elif len(t) == 2:
                if t not in pidx:
                    raise MalformedRow(
                        f"row {''.join(ab)!r} moves to pair {''.join(t)!r}, which has no row")
                modify[i, pidx[t]] += p
            else:
                tail = t[1:]
                if tail not in pidx:
                    raise MalformedRow(
                        f"row {''.join(ab)!r} moves to pair {''.join(tail)!r}, which has no row")
                push[i, walk.index[t[0]], pidx[tail]] += p
    return PairTensors(pairs, pidx, single, modify, push)
