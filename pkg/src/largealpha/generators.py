"""Input generators: uniform random strings, linear de Bruijn sequences and
digit streams of the Champernowne and Copeland-Erdos constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .entropy_core import Sequence, entropy_profile

__all__ = [
    "DEFAULT_ENUM_CAP",
    "DeBruijnGraph",
    "ResourceLimitError",
    "champernowne_digits",
    "copeland_erdos_digits",
    "de_bruijn_count",
    "enumerate_de_bruijn",
    "is_de_bruijn",
    "normality_report",
    "random_de_bruijn",
    "random_string",
]

DEFAULT_ENUM_CAP = 1 << 20
DEFAULT_DEBRUIJN_BUDGET = 1 << 26


class ResourceLimitError(ValueError):
    """Requested output exceeds the configured work or memory cap."""


def random_string(n: int, m: int, seed=0) -> Sequence:
    """m i.i.d. uniform symbols from {0..n-1}; ``seed`` is an int or tuple of ints."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    rng = make_rng(seed)
    return Sequence(rng.integers(0, n, size=m, dtype=np.int64), n)


@dataclass(frozen=True)
class DeBruijnGraph:
    """Vertices are (ell-1)-tuples as base-n integers; edge ``v -> (v*n + a) % n**(ell-1)``
    carries the ell-tuple ``v*n + a``."""

    n: int
    order: int

    @property
    def num_vertices(self) -> int:
        return self.n ** (self.order - 1)

    @property
    def num_edges(self) -> int:
        return self.n ** self.order

    def successor(self, v: int, a: int) -> int:
        return (v * self.n + a) % self.num_vertices

    def vertex_tuple(self, v: int) -> tuple:
        out = []
        for _ in range(self.order - 1):
            out.append(v % self.n)
            v //= self.n
        return tuple(reversed(out))


def de_bruijn_count(n: int, order: int) -> int:
    """Number of n-ary linear de Bruijn sequences of the given order, (n!)**(n**(order-1))."""
    return math.factorial(n) ** (n ** (order - 1))


def is_de_bruijn(S, n: int, order: int) -> bool:
    """True iff S has length n**order + order - 1 and holds every order-tuple once."""
    s = np.asarray(S.symbols if isinstance(S, Sequence) else S, dtype=np.int64)
    if s.size != n ** order + order - 1:
        return False
    keys = np.zeros(s.size - order + 1, dtype=np.int64)
    for j in range(order):
        keys = keys * n + s[j: j + keys.size]
    return np.unique(keys).size == n ** order


def enumerate_de_bruijn(n: int, order: int, cap: int = DEFAULT_ENUM_CAP) -> list[Sequence]:
    """All n-ary linear de Bruijn sequences of ``order``, in lexicographic order.

    Backtracks over Eulerian trails of the de Bruijn graph.  ``cap`` bounds the
    total work, measured as (number of sequences) x (sequence length).
    """
    if n < 1 or order < 1:
        raise ValueError("need n >= 1 and order >= 1")
    length = n ** order + order - 1
    expected = de_bruijn_count(n, order)
    if expected * length > cap:
        raise ResourceLimitError(
            f"enumerating {expected} sequences of length {length} exceeds the work cap {cap}; "
            "use random_de_bruijn instead"
        )
    g = DeBruijnGraph(n, order)
    edges = g.num_edges
    used = bytearray(edges)
    path: list[int] = []
    results: list[Sequence] = []
    work = 0

    def extend(v: int, depth: int) -> None:
        nonlocal work
        work += 1
        if work > cap:
            raise ResourceLimitError(f"work cap {cap} exceeded")
        if depth == edges:
            results.append(Sequence(np.array(path, dtype=np.int64), n))
            return
        for a in range(n):
            e = v * n + a
            if not used[e]:
                used[e] = 1
                path.append(a)
                extend(e % g.num_vertices, depth + 1)
                path.pop()
                used[e] = 0

    for v in range(g.num_vertices):
        path[:] = list(g.vertex_tuple(v))
        extend(v, 0)
    return results


def random_de_bruijn(n: int, order: int, seed=0, budget: int = DEFAULT_DEBRUIJN_BUDGET) -> Sequence:
    """A linear de Bruijn sequence from a random Eulerian trail.

    Each vertex gets an independently shuffled out-edge order and Hierholzer's
    algorithm starts from a random vertex.  The result is always valid but
    not uniformly distributed over all sequences.
    """
    if n < 2 or order < 1:
        raise ValueError("need n >= 2 and order >= 1")
    g = DeBruijnGraph(n, order)
    if g.num_edges > budget:
        raise ResourceLimitError(f"n**order = {g.num_edges} exceeds the budget {budget}")
    rng = make_rng(seed)
    V = g.num_vertices
    order_of = rng.permuted(np.tile(np.arange(n, dtype=np.int64), (V, 1)), axis=1)
    nxt = np.zeros(V, dtype=np.int64)
    start = int(rng.integers(V))

    # iterative Hierholzer; the circuit comes out reversed as edge labels
    stack_v = [start]
    stack_a: list[int] = []
    labels: list[int] = []
    while stack_v:
        v = stack_v[-1]
        if nxt[v] < n:
            a = int(order_of[v, nxt[v]])
            nxt[v] += 1
            stack_v.append((v * n + a) % V)
            stack_a.append(a)
        else:
            stack_v.pop()
            if stack_a:
                labels.append(stack_a.pop())
    labels.reverse()
    body = list(g.vertex_tuple(start)) + labels
    return Sequence(np.array(body, dtype=np.int64), n)


def _digits(x: int, base: int) -> list[int]:
    out = []
    while x:
        x, d = divmod(x, base)
        out.append(d)
    return out[::-1]


def champernowne_digits(base: int, m: int) -> Sequence:
    """First m digits after the point of 0.1 2 3 ... written in ``base``."""
    if base < 2 or m < 1:
        raise ValueError("need base >= 2 and m >= 1")
    out: list[int] = []
    k = 1
    while len(out) < m:
        out.extend(_digits(k, base))
        k += 1
    return Sequence(np.array(out[:m], dtype=np.int64), base)


def _primes_upto(limit: int) -> np.ndarray:
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p:: p] = False
    return np.flatnonzero(sieve)


def copeland_erdos_digits(base: int, m: int) -> Sequence:
    """First m digits after the point of 0.2 3 5 7 11 ... written in ``base``."""
    if base < 2 or m < 1:
        raise ValueError("need base >= 2 and m >= 1")
    out: list[int] = []
    done = 1
    limit = 64
    while len(out) < m:
        # extend the sieve by doubling; only primes above the previous limit are new
        primes = _primes_upto(limit)
        for p in primes[primes > done].tolist():
            out.extend(_digits(p, base))
            if len(out) >= m:
                break
        done = limit
        limit *= 2
    return Sequence(np.array(out[:m], dtype=np.int64), base)


def normality_report(digits: Sequence, max_order: int) -> list[dict]:
    """Per order: H_ell of the digit prefix and its gap to log2(base)."""
    if digits.m == 0:
        raise ValueError("digits must be non-empty")
    top = math.log2(digits.n)
    return [
        {"order": ell, "entropy": h, "log2_n": top, "gap": top - h}
        for ell, h in enumerate(entropy_profile(digits, min(max_order, digits.m - 1)))
    ]
