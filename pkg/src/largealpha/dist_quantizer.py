"""Lossy storage of a probability distribution with bounded relative entropy.

Given ``c >= 1`` and ``eps > 0`` put ``r = 2**(eps/2) / (2**(eps/2) - 1)``.
Every probability ``p_i >= 1 / (r * n**(1/c))`` is kept as the pair
``(i, floor(p_i * r**2 * n))``; everything else is forgotten.  The
reconstruction ``Q`` spreads ``1 - 1/r`` over the kept symbols in proportion
to their floors and ``1/r`` uniformly over the rest, which guarantees
``D(P || Q) < (c - 1) H(P) + eps`` while storing ``O(n**(1/c) log n)`` bits.

Wire format (all integers LEB128 varints)::

    version:u8  n  c:f64le  eps:f64le  t  { index_delta  floor } * t

The first index delta is the index itself, later ones are gaps.  ``r`` is
never stored; it is recomputed from ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._wire import FormatError, Reader, put_f64, put_varint, varint_size
from .entropy_core import Distribution, kl_divergence

__all__ = [
    "FORMAT_VERSION",
    "KLCheck",
    "QuantizedDistribution",
    "QuantizerParams",
    "quantize",
    "reconstruct",
    "storage_bits",
    "storage_bound_bits",
    "verify_kl_bound",
]

FORMAT_VERSION = 1


def r_from_eps(eps: float) -> float:
    # 2**(eps/2) / (2**(eps/2) - 1) rewritten so neither tiny nor huge eps overflows
    return -1.0 / math.expm1(-eps * math.log(2.0) / 2.0)


@dataclass(frozen=True)
class QuantizerParams:
    c: float
    eps: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c >= 1):
            raise ValueError(f"c must be >= 1, got {self.c}")
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if int(self.n) < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "n", int(self.n))
        if not self.scale < 2.0 ** 62:
            raise ValueError(f"eps={self.eps} is too small for n={self.n}: r**2 n overflows 62 bits")

    @property
    def r(self) -> float:
        return r_from_eps(self.eps)

    @property
    def threshold(self) -> float:
        """Smallest probability that gets recorded."""
        return 1.0 / (self.r * self.n ** (1.0 / self.c))

    @property
    def scale(self) -> float:
        """Multiplier r**2 * n applied before flooring."""
        r = self.r
        return r * r * self.n

    @property
    def max_entries(self) -> int:
        return math.ceil(self.r * self.n ** (1.0 / self.c))


@dataclass(frozen=True, eq=False)
class QuantizedDistribution:
    params: QuantizerParams
    indices: np.ndarray
    floors: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        fl = np.array(self.floors, dtype=np.int64).reshape(-1)
        if idx.shape != fl.shape:
            raise ValueError("indices and floors differ in length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.params.n or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing within [0, n)")
            if fl.min() < 1:
                raise ValueError("recorded floor values must be positive")
        idx.setflags(write=False)
        fl.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "floors", fl)

    @property
    def t(self) -> int:
        return int(self.indices.size)

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.indices.tolist(), self.floors.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantizedDistribution):
            return NotImplemented
        return (self.params == other.params and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.floors, other.floors))

    def to_bytes(self) -> bytes:
        out = bytearray([FORMAT_VERSION])
        put_varint(out, self.params.n)
        put_f64(out, self.params.c)
        put_f64(out, self.params.eps)
        write_body(out, self.indices, self.floors)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> QuantizedDistribution:
        rd = Reader(data)
        version = rd.byte()
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported quantized-distribution version {version}")
        n = rd.varint()
        c, eps = rd.f64(), rd.f64()
        params = QuantizerParams(c, eps, n)
        idx, fl = read_body(rd)
        if not rd.at_end():
            raise FormatError("trailing bytes after quantized distribution")
        return cls(params, idx, fl)


def write_body(out: bytearray, indices: np.ndarray, floors: np.ndarray) -> None:
    put_varint(out, len(indices))
    prev = 0
    for i, f in zip(indices.tolist(), floors.tolist()):
        put_varint(out, i - prev)
        put_varint(out, f)
        prev = i


def read_body(rd: Reader) -> tuple[np.ndarray, np.ndarray]:
    t = rd.varint()
    idx = np.empty(t, dtype=np.int64)
    fl = np.empty(t, dtype=np.int64)
    prev = 0
    for k in range(t):
        prev += rd.varint()
        idx[k] = prev
        fl[k] = rd.varint()
    return idx, fl


def quantize(P, params: QuantizerParams) -> QuantizedDistribution:
    """Record ``(i, floor(p_i r^2 n))`` for every ``p_i >= 1/(r n^(1/c))``."""
    if not isinstance(P, Distribution):
        P = Distribution(P)
    if P.deficient:
        raise ValueError("quantize expects a proper distribution")
    if P.n != params.n:
        raise ValueError(f"distribution has {P.n} entries, params say n={params.n}")
    p = P.probs
    idx = np.flatnonzero(p >= params.threshold)
    floors = np.floor(p[idx] * params.scale).astype(np.int64)
    return QuantizedDistribution(params, idx, floors)


def reconstruct(qd: QuantizedDistribution, renormalize: bool = False) -> Distribution:
    """Rebuild Q from the recorded pairs.

    With ``t == n`` there is no unrecorded symbol to receive the ``1/r``
    share, so Q sums to ``1 - 1/r`` and is flagged deficient unless
    ``renormalize`` is set.
    """
    params = qd.params
    n, t, r = params.n, qd.t, params.r
    q = np.full(n, 1.0 / (r * (n - t)) if t < n else 0.0)
    if t:
        total = float(qd.floors.sum())
        q[qd.indices] = (1.0 - 1.0 / r) * qd.floors / total
    if t == n:
        if renormalize:
            return Distribution(q / q.sum())
        return Distribution(q, deficient=True)
    return Distribution(q, deficient=t == 0)


def storage_bits(qd: QuantizedDistribution) -> int:
    """Exact size of the canonical encoding in bits."""
    p = qd.params
    size = 1 + varint_size(p.n) + 16 + varint_size(qd.t)
    prev = 0
    for i, f in zip(qd.indices.tolist(), qd.floors.tolist()):
        size += varint_size(i - prev) + varint_size(f)
        prev = i
    return 8 * size


def storage_bound_bits(params: QuantizerParams, t: int | None = None) -> int:
    """Worst-case encoded size for ``t`` entries (default: the maximum t).

    Each pair costs at most one varint of ``n - 1`` plus one of
    ``floor(r^2 n)``; the header is 18 bytes plus two varints.
    """
    if t is None:
        t = params.max_entries
    header = 1 + varint_size(params.n) + 16 + varint_size(t)
    pair = varint_size(params.n - 1) + varint_size(math.floor(params.scale))
    return 8 * (header + t * pair)


class KLCheck(NamedTuple):
    kl: float
    bound: float
    ok: bool


def verify_kl_bound(P, params: QuantizerParams) -> KLCheck:
    if not isinstance(P, Distribution):
        P = Distribution(P)
    kl = kl_divergence(P, reconstruct(quantize(P, params)))
    bound = (params.c - 1.0) * P.entropy() + params.eps
    return KLCheck(kl, bound, kl < bound)
