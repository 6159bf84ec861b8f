"""Empirical entropy of order ell, context tables and empirical Markov models.

Strings live over the integer alphabet ``{0, ..., n-1}``. All logarithms are
base 2.  Contexts that never occur are simply absent from a
:class:`ContextTable`, so nothing here iterates over the ``n**ell`` possible
contexts.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ContextTable",
    "Distribution",
    "MarkovModel",
    "Sequence",
    "context_keys",
    "count_contexts",
    "empirical_entropy",
    "empirical_markov_model",
    "entropy_profile",
    "kl_divergence",
    "self_information",
    "zeroth_order_entropy",
]

_KEY_LIMIT = 1 << 62


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Sequence:
    """A string over ``{0, ..., n-1}``.

    ``labels`` optionally records the original character for each rank, as
    produced by :meth:`from_text`.
    """

    symbols: np.ndarray
    n: int
    labels: tuple | None = None

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError(f"alphabet size must be positive, got {n}")
        s = np.array(self.symbols, dtype=np.int64).reshape(-1)
        if s.size and (s.min() < 0 or s.max() >= n):
            bad = int(s[(s < 0) | (s >= n)][0])
            raise ValueError(f"symbol {bad} outside alphabet [0, {n})")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must have one entry per rank")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "symbols", _frozen(s))

    @property
    def m(self) -> int:
        return int(self.symbols.size)

    def __len__(self) -> int:
        return self.m

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sequence):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.symbols, other.symbols)

    def __repr__(self) -> str:
        head = self.symbols[:12].tolist()
        more = ", ..." if self.m > 12 else ""
        return f"Sequence(n={self.n}, m={self.m}, symbols={head}{more})"

    @classmethod
    def from_text(cls, text: Iterable) -> Sequence:
        """Rank characters by first appearance, e.g. TORONTO -> 0 1 2 1 3 0 1."""
        ranks: dict = {}
        out = []
        for ch in text:
            out.append(ranks.setdefault(ch, len(ranks)))
        labels = tuple(ranks)
        return cls(np.array(out, dtype=np.int64), max(len(labels), 1), labels or None)

    def distinct(self) -> int:
        return int(np.unique(self.symbols).size)


def context_keys(windows: np.ndarray, n: int) -> np.ndarray:
    """Base-``n`` integer key of each row (most significant symbol first).

    Key order equals lexicographic order of the rows.  Only valid when
    ``n ** width`` stays below 2**62.
    """
    width = windows.shape[1]
    keys = np.zeros(windows.shape[0], dtype=np.int64)
    for j in range(width):
        keys = keys * n + windows[:, j]
    return keys


def _fits(n: int, width: int) -> bool:
    return n ** width < _KEY_LIMIT


@dataclass(frozen=True, eq=False)
class ContextTable:
    """Follower counts of every occurring context, stored CSR-style.

    ``contexts[k]`` is the k-th context (lexicographically sorted) and its
    followers are ``followers[ptr[k]:ptr[k+1]]`` with multiplicities
    ``counts[ptr[k]:ptr[k+1]]``, followers sorted ascending.
    """

    order: int
    n: int
    contexts: np.ndarray
    ptr: np.ndarray
    followers: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        for name in ("contexts", "ptr", "followers", "counts"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.contexts.shape[0])

    @property
    def totals(self) -> np.ndarray:
        """|S_alpha| for each context."""
        return np.add.reduceat(self.counts, self.ptr[:-1]) if len(self) else np.zeros(0, np.int64)

    @property
    def pair_context(self) -> np.ndarray:
        """Context index of every (context, follower) pair."""
        return np.repeat(np.arange(len(self)), np.diff(self.ptr))

    def total_followers(self) -> int:
        return int(self.counts.sum())

    def index(self, context) -> int | None:
        ctx = np.asarray(tuple(context), dtype=np.int64)
        if ctx.size != self.order:
            raise ValueError(f"context length {ctx.size} != order {self.order}")
        if self.order == 0:
            return 0 if len(self) else None
        lo, hi = 0, len(self)
        rows = self.contexts
        target = tuple(ctx.tolist())
        while lo < hi:
            mid = (lo + hi) // 2
            row = tuple(rows[mid].tolist())
            if row < target:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self) and tuple(rows[lo].tolist()) == target:
            return lo
        return None

    def followers_of(self, context) -> dict[int, int]:
        k = self.index(context)
        if k is None:
            return {}
        a, b = self.ptr[k], self.ptr[k + 1]
        return dict(zip(self.followers[a:b].tolist(), self.counts[a:b].tolist()))

    def as_dict(self) -> dict[tuple, dict[int, int]]:
        out = {}
        for k, row in enumerate(self.contexts.tolist()):
            a, b = self.ptr[k], self.ptr[k + 1]
            out[tuple(row)] = dict(zip(self.followers[a:b].tolist(), self.counts[a:b].tolist()))
        return out


def count_contexts(S: Sequence, order: int) -> ContextTable:
    """Tabulate S_alpha for every context alpha of length ``order``.

    Window ``s_i..s_{i+ell-1}`` contributes follower ``s_{i+ell}``; the final
    window has no follower, so a context that is a suffix of S is counted
    once less.
    """
    ell = int(order)
    if ell < 0:
        raise ValueError("order must be non-negative")
    m, n = S.m, S.n
    if m < ell:
        raise ValueError("sequence shorter than order")
    s = S.symbols
    if ell == 0:
        sym, cnt = np.unique(s, return_counts=True)
        has = sym.size > 0
        return ContextTable(
            0,
            n,
            np.zeros((1 if has else 0, 0), dtype=np.int64),
            np.array([0, sym.size] if has else [0], dtype=np.int64),
            sym,
            cnt,
        )
    if m == ell:
        return ContextTable(ell, n, np.zeros((0, ell), np.int64), np.zeros(1, np.int64),
                            np.zeros(0, np.int64), np.zeros(0, np.int64))

    windows = sliding_window_view(s, ell + 1)
    if _fits(n, ell + 1):
        pair_keys, cnt = np.unique(context_keys(windows, n), return_counts=True)
        ctx_keys = pair_keys // n
        foll = pair_keys % n
        starts = np.flatnonzero(np.r_[True, ctx_keys[1:] != ctx_keys[:-1]])
        ctx_rows = windows_from_keys(ctx_keys[starts], n, ell)
    else:
        rows, cnt = np.unique(windows, axis=0, return_counts=True)
        foll = rows[:, -1].copy()
        ctx_part = rows[:, :-1]
        change = np.any(ctx_part[1:] != ctx_part[:-1], axis=1)
        starts = np.flatnonzero(np.r_[True, change])
        ctx_rows = ctx_part[starts]
    ptr = np.r_[starts, foll.size].astype(np.int64)
    return ContextTable(ell, n, ctx_rows, ptr, foll, cnt)


def windows_from_keys(keys: np.ndarray, n: int, width: int) -> np.ndarray:
    """Inverse of :func:`context_keys`."""
    out = np.empty((keys.size, width), dtype=np.int64)
    k = keys.copy()
    for j in range(width - 1, -1, -1):
        out[:, j] = k % n
        k //= n
    return out


def _h_terms(counts: np.ndarray, totals: np.ndarray) -> list[float]:
    c = counts.astype(np.float64)
    return (c * np.log2(totals.astype(np.float64) / c)).tolist()


def zeroth_order_entropy(histogram) -> float:
    """H_0 of a histogram (mapping symbol->count or sequence of counts)."""
    if isinstance(histogram, Mapping):
        values = list(histogram.values())
    else:
        values = list(np.asarray(histogram).reshape(-1))
    c = np.asarray(values, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("negative count in histogram")
    c = c[c > 0]
    if c.size == 0:
        raise ValueError("histogram has no positive count")
    total = math.fsum(c.tolist())
    return math.fsum((c * np.log2(total / c)).tolist()) / total


def _entropy_from_table(table: ContextTable, m: int) -> float:
    if table.counts.size == 0:
        return 0.0
    totals = table.totals[table.pair_context]
    return math.fsum(_h_terms(table.counts, totals)) / m


def empirical_entropy(S: Sequence, order: int) -> float:
    """H_ell(S) = (1/m) * sum over contexts of |S_alpha| * H_0(S_alpha)."""
    if S.m < max(int(order), 1):
        raise ValueError("sequence shorter than order")
    return _entropy_from_table(count_contexts(S, order), S.m)


def entropy_profile(S: Sequence, max_order: int) -> list[float]:
    """[H_0(S), ..., H_{max_order}(S)]."""
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    if max_order >= S.m:
        raise ValueError(f"max_order {max_order} must be below m = {S.m}")
    return [empirical_entropy(S, ell) for ell in range(max_order + 1)]


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probabilities over ``{0, ..., n-1}``.

    ``deficient`` marks weights that legitimately sum to less than one (the
    t = n reconstruction of a quantized distribution).
    """

    probs: np.ndarray
    deficient: bool = False

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.size == 0:
            raise ValueError("empty distribution")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        total = float(p.sum())  # pairwise summation is ample for a 1e-9 tolerance
        lo = 0.0 if self.deficient else 1 - 1e-9
        if not lo <= total <= 1 + 1e-9:
            raise ValueError(f"probabilities sum to {total}")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def total(self) -> float:
        return math.fsum(self.probs.tolist())

    def entropy(self) -> float:
        return self._entropy

    @cached_property
    def _entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return math.fsum((p * np.log2(1.0 / p)).tolist())

    @classmethod
    def from_counts(cls, counts) -> Distribution:
        c = np.asarray(counts, dtype=np.float64)
        return cls(c / c.sum())

    def __len__(self) -> int:
        return self.n


def _probs(d) -> np.ndarray:
    return d.probs if isinstance(d, Distribution) else np.asarray(d, dtype=np.float64)


def kl_divergence(P, Q) -> float:
    """D(P || Q) in bits; ``math.inf`` when P puts mass where Q has none."""
    p, q = _probs(P), _probs(Q)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    ps, qs = p[support], q[support]
    return math.fsum((ps * np.log2(ps / qs)).tolist())


@dataclass(frozen=True, eq=False)
class MarkovModel:
    """Order-ell process: emits ``prefix`` with probability 1, then draws each
    symbol from ``conditionals[context]``."""

    order: int
    n: int
    prefix: tuple
    conditionals: dict = field(default_factory=dict)

    def __post_init__(self):
        prefix = tuple(int(x) for x in self.prefix)
        if len(prefix) != self.order:
            raise ValueError("prefix length must equal the order")
        if any(not 0 <= x < self.n for x in prefix):
            raise ValueError("prefix symbol outside alphabet")
        conds = {}
        for ctx, dist in self.conditionals.items():
            ctx = tuple(int(x) for x in ctx)
            if len(ctx) != self.order:
                raise ValueError(f"context {ctx} has wrong length")
            if not isinstance(dist, Distribution):
                dist = Distribution(dist)
            if dist.n != self.n:
                raise ValueError("conditional over wrong alphabet")
            conds[ctx] = dist
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "conditionals", conds)

    def prob(self, context, symbol: int) -> float:
        dist = self.conditionals.get(tuple(context))
        return 0.0 if dist is None else float(dist.probs[symbol])


def empirical_markov_model(S: Sequence, order: int) -> MarkovModel:
    """The model whose conditional at alpha is the follower distribution of S_alpha."""
    table = count_contexts(S, order)
    conds = {}
    for k, row in enumerate(table.contexts.tolist()):
        a, b = table.ptr[k], table.ptr[k + 1]
        p = np.zeros(S.n)
        p[table.followers[a:b]] = table.counts[a:b]
        conds[tuple(row)] = Distribution(p / p.sum())
    return MarkovModel(order, S.n, tuple(S.symbols[:order].tolist()), conds)


def self_information(Q: MarkovModel, S: Sequence) -> float:
    """log2(1 / Pr[Q emits S]); ``math.inf`` for an impossible emission."""
    if Q.n != S.n:
        raise ValueError(f"alphabet mismatch: model n={Q.n}, sequence n={S.n}")
    ell = Q.order
    if S.m < ell or tuple(S.symbols[:ell].tolist()) != Q.prefix:
        return math.inf
    table = count_contexts(S, ell)
    terms = []
    for k, row in enumerate(table.contexts.tolist()):
        dist = Q.conditionals.get(tuple(row))
        if dist is None:
            return math.inf
        a, b = table.ptr[k], table.ptr[k + 1]
        q = dist.probs[table.followers[a:b]]
        if np.any(q <= 0):
            return math.inf
        terms.extend((table.counts[a:b] * np.log2(1.0 / q)).tolist())
    return math.fsum(terms)
