"""Two-part compression: a stored order-ell Markov model plus the string
arithmetic-coded under it.

Two model kinds are supported:

* ``quantized`` -- each context's follower distribution is stored with
  :mod:`largealpha.dist_quantizer`, so the model costs roughly
  ``O(n**(ell + 1/c) log n)`` bits and the string costs at most
  ``(c H_ell(S) + eps) m`` bits of self-information.
* ``exact`` -- the full table of ``(ell+1)``-tuple counts, under which the
  payload is essentially ``m H_ell(S)`` bits.

Only contexts that occur in S are stored; decoding replays S's own context
chain so it never meets an unseen one.

Container layout (little-endian, integers LEB128)::

    magic "LAMC" | version:u8 | mode:u8 | n | m | ell | c:f64 | eps:f64
    model_len | model bytes
    payload_bits | payload bytes (ceil(payload_bits / 8))

Model bytes start with the prefix ``s_1..s_ell`` packed at ``ceil(log2 n)``
bits per symbol (byte padded), then the context count and, per context, the
gap to the previous context key followed by its entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _coder
from ._wire import FormatError, Reader, pack_fixed, put_f64, put_varint, unpack_fixed
from .dist_quantizer import (
    QuantizedDistribution,
    QuantizerParams,
    read_body,
    write_body,
)
from .entropy_core import (
    ContextTable,
    MarkovModel,
    Sequence,
    context_keys,
    count_contexts,
    empirical_entropy,
    self_information,
    windows_from_keys,
)

__all__ = [
    "CodecError",
    "CompressedContainer",
    "CountTable",
    "Payload",
    "QuantizedMarkovModel",
    "compress",
    "compression_stats",
    "count_table",
    "decode",
    "decompress",
    "encode",
    "exact_table_bits",
    "model_self_information",
    "quantize_model",
]

MAGIC = b"LAMC"
VERSION = 1
MODES = ("quantized", "exact_table")
_KEY_LIMIT = 1 << 62
# coder precision per context table: at least 2**16, and 2**12 units per entry
MIN_PRECISION_BITS = 16
PRECISION_HEADROOM = 12


class CodecError(ValueError):
    """A string cannot be coded under the given model."""


def _check_keys(n: int, ell: int) -> None:
    if n ** (ell + 1) >= _KEY_LIMIT:
        raise ValueError(f"n**(ell+1) = {n}**{ell + 1} exceeds the 2**62 context-key range")


def _prefix_width(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True, eq=False)
class QuantizedMarkovModel:
    """Per-context quantized follower distributions, CSR layout.

    Context ``k`` is ``contexts[k]`` and its recorded pairs are
    ``indices[ptr[k]:ptr[k+1]]`` / ``floors[ptr[k]:ptr[k+1]]``.
    """

    order: int
    n: int
    prefix: tuple
    params: QuantizerParams
    contexts: np.ndarray
    ptr: np.ndarray
    indices: np.ndarray
    floors: np.ndarray

    def __len__(self) -> int:
        return int(self.contexts.shape[0])

    @property
    def keys(self) -> np.ndarray:
        return context_keys(self.contexts, self.n)

    def distribution(self, context) -> QuantizedDistribution:
        k = self._index(context)
        a, b = self.ptr[k], self.ptr[k + 1]
        return QuantizedDistribution(self.params, self.indices[a:b], self.floors[a:b])

    def _index(self, context) -> int:
        ctx = np.asarray([tuple(context)], dtype=np.int64).reshape(1, self.order)
        key = context_keys(ctx, self.n)[0]
        keys = self.keys
        k = int(np.searchsorted(keys, key))
        if k >= keys.size or keys[k] != key:
            raise KeyError(tuple(context))
        return k

    def to_markov_model(self) -> MarkovModel:
        """Dense reconstruction (for modest n); deficient conditionals allowed."""
        from .dist_quantizer import reconstruct

        conds = {}
        for k, row in enumerate(self.contexts.tolist()):
            a, b = self.ptr[k], self.ptr[k + 1]
            qd = QuantizedDistribution(self.params, self.indices[a:b], self.floors[a:b])
            conds[tuple(row)] = reconstruct(qd)
        return MarkovModel(self.order, self.n, self.prefix, conds)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantizedMarkovModel):
            return NotImplemented
        return (
            (self.order, self.n, self.prefix, self.params)
            == (other.order, other.n, other.prefix, other.params)
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("contexts", "ptr", "indices", "floors")
            )
        )


@dataclass(frozen=True, eq=False)
class CountTable:
    """Exact ``#_{alpha a}(S)`` counts plus the prefix ``s_1..s_ell``."""

    order: int
    n: int
    prefix: tuple
    table: ContextTable

    def __len__(self) -> int:
        return int(self.table.counts.size)

    def total(self) -> int:
        return self.table.total_followers()

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountTable):
            return NotImplemented
        a, b = self.table, other.table
        return (
            (self.order, self.n, self.prefix) == (other.order, other.n, other.prefix)
            and np.array_equal(a.contexts, b.contexts)
            and np.array_equal(a.ptr, b.ptr)
            and np.array_equal(a.followers, b.followers)
            and np.array_equal(a.counts, b.counts)
        )


Model = Union[QuantizedMarkovModel, CountTable]


def _require_length(S: Sequence, ell: int) -> None:
    if S.m < ell + 1:
        raise ValueError(f"need m >= ell + 1, got m={S.m}, ell={ell}")


def quantize_model(S: Sequence, order: int, c: float, eps: float) -> QuantizedMarkovModel:
    """Quantize the follower distribution of every occurring context."""
    ell = int(order)
    _require_length(S, ell)
    params = QuantizerParams(c, eps, S.n)
    table = count_contexts(S, ell)
    totals = table.totals
    p = table.counts / totals[table.pair_context].astype(np.float64)
    keep = p >= params.threshold
    floors = np.floor(p[keep] * params.scale).astype(np.int64)
    kept_per_ctx = np.add.reduceat(keep.astype(np.int64), table.ptr[:-1])
    ptr = np.r_[0, np.cumsum(kept_per_ctx)].astype(np.int64)
    return QuantizedMarkovModel(
        ell, S.n, tuple(S.symbols[:ell].tolist()), params,
        table.contexts, ptr, table.followers[keep], floors,
    )


def count_table(S: Sequence, order: int) -> CountTable:
    ell = int(order)
    _require_length(S, ell)
    return CountTable(ell, S.n, tuple(S.symbols[:ell].tolist()), count_contexts(S, ell))


def _lookup(model_keys: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pos = np.searchsorted(model_keys, keys)
    pos_c = np.minimum(pos, max(model_keys.size - 1, 0))
    found = (pos < model_keys.size) & (model_keys[pos_c] == keys) if model_keys.size else np.zeros(keys.size, bool)
    return pos_c, found


def model_self_information(model, S: Sequence) -> float:
    """log2(1/Pr[model emits S]) in bits; ``math.inf`` if impossible."""
    if isinstance(model, MarkovModel):
        return self_information(model, S)
    if model.n != S.n:
        raise ValueError(f"alphabet mismatch: model n={model.n}, sequence n={S.n}")
    ell = model.order
    if S.m < ell or tuple(S.symbols[:ell].tolist()) != model.prefix:
        return math.inf
    _check_keys(S.n, ell)
    n = S.n
    table = count_contexts(S, ell)
    if table.counts.size == 0:
        return 0.0
    pair_ctx_keys = context_keys(table.contexts, n)[table.pair_context]
    pair_keys = pair_ctx_keys * n + table.followers

    if isinstance(model, CountTable):
        mt = model.table
        mkeys = context_keys(mt.contexts, n)
        model_pairs = mkeys[mt.pair_context] * n + mt.followers
        pos, found = _lookup(model_pairs, pair_keys)
        if not found.all():
            return math.inf
        num = mt.counts[pos].astype(np.float64)
        den = mt.totals[mt.pair_context[pos]].astype(np.float64)
        q_inv = den / num
    else:
        mkeys = model.keys
        kpos, kfound = _lookup(mkeys, pair_ctx_keys)
        if not kfound.all():
            return math.inf
        r = model.params.r
        t = np.diff(model.ptr)
        csum = np.r_[0, np.cumsum(model.floors)]
        fsum = csum[model.ptr[1:]] - csum[model.ptr[:-1]]
        rec_ctx = np.repeat(np.arange(len(model)), t)
        rec_keys = mkeys[rec_ctx] * n + model.indices
        rpos, rfound = _lookup(rec_keys, pair_keys)
        q_inv = np.empty(pair_keys.size)
        if rfound.any():
            fl = model.floors[rpos[rfound]].astype(np.float64)
            q_inv[rfound] = fsum[kpos[rfound]] / ((1.0 - 1.0 / r) * fl)
        miss = ~rfound
        if miss.any():
            free = n - t[kpos[miss]]
            if np.any(free <= 0):
                return math.inf
            q_inv[miss] = r * free
    return math.fsum((table.counts * np.log2(q_inv)).tolist())


def _integerize(weights: np.ndarray, total: int) -> np.ndarray:
    x = weights / weights.sum() * total
    f = np.maximum(1, np.floor(x).astype(np.int64))
    f[int(np.argmax(f))] += total - int(f.sum())
    return f


@dataclass(frozen=True)
class _Tables:
    keys: np.ndarray
    ptr: np.ndarray
    syms: np.ndarray
    cumlo: np.ndarray
    freq: np.ndarray
    tot: np.ndarray
    esc: np.ndarray

    def args(self):
        return (self.keys, self.ptr, self.syms, self.cumlo, self.freq, self.tot, self.esc)


def _precision_bits(t: int) -> int:
    return max(MIN_PRECISION_BITS, math.ceil(math.log2(t + 1)) + PRECISION_HEADROOM)


def _coder_tables(model: Model) -> _Tables:
    n = model.n
    if isinstance(model, CountTable):
        tb = model.table
        cum = np.cumsum(tb.counts) - tb.counts
        cumlo = cum - np.repeat(cum[tb.ptr[:-1]] if len(tb) else cum[:0], np.diff(tb.ptr))
        return _Tables(context_keys(tb.contexts, n), tb.ptr, tb.followers, cumlo,
                       tb.counts, tb.totals, np.zeros(len(tb), np.int64))

    r = model.params.r
    k = len(model)
    freq = np.empty(model.floors.size, np.int64)
    cumlo = np.empty(model.floors.size, np.int64)
    tot = np.empty(k, np.int64)
    esc = np.zeros(k, np.int64)
    for i in range(k):
        a, b = int(model.ptr[i]), int(model.ptr[i + 1])
        t = b - a
        total = 1 << _precision_bits(t)
        fl = model.floors[a:b].astype(np.float64)
        if t == 0:
            f = np.array([total], np.int64)
        elif t < n:
            w = np.r_[(1.0 - 1.0 / r) * fl / fl.sum(), 1.0 / r]
            f = _integerize(w, total)
        else:
            f = _integerize(fl, total)
        if t < n:
            esc[i] = f[-1]
            f = f[:-1]
        freq[a:b] = f
        cumlo[a:b] = np.cumsum(f) - f
        tot[i] = total
    return _Tables(model.keys, model.ptr, model.indices, cumlo, freq, tot, esc)


@dataclass(frozen=True, eq=False)
class Payload:
    data: bytes
    nbits: int

    def __len__(self) -> int:
        return self.nbits

    def __eq__(self, other) -> bool:
        return isinstance(other, Payload) and (self.data, self.nbits) == (other.data, other.nbits)


def coded_information(model: Model, S: Sequence) -> float:
    """Self-information of S under the coder's integer frequency tables."""
    tabs = _coder_tables(model)
    ell = model.order
    s = S.symbols
    if S.m <= ell:
        return 0.0
    from numpy.lib.stride_tricks import sliding_window_view

    ctx = context_keys(sliding_window_view(s[:-1], ell), model.n) if ell else np.zeros(S.m, np.int64)
    ctx = ctx[: S.m - ell]
    k = np.searchsorted(tabs.keys, ctx)
    fol = s[ell:]
    bits = []
    for kk, a in zip(k.tolist(), fol.tolist()):
        lo, hi = tabs.ptr[kk], tabs.ptr[kk + 1]
        j = int(np.searchsorted(tabs.syms[lo:hi], a)) + lo
        if j < hi and tabs.syms[j] == a:
            bits.append(math.log2(tabs.tot[kk] / tabs.freq[j]))
        else:
            bits.append(math.log2(tabs.tot[kk] / tabs.esc[kk]) + math.log2(model.n - (hi - lo)))
    return math.fsum(bits)


def encode(S: Sequence, model: Model) -> Payload:
    """Arithmetic-code ``s_{ell+1}..s_m`` under ``model``."""
    ell = model.order
    if model.n != S.n:
        raise ValueError(f"alphabet mismatch: model n={model.n}, sequence n={S.n}")
    if S.m < ell or tuple(S.symbols[:ell].tolist()) != model.prefix:
        raise CodecError("sequence does not start with the model prefix")
    _check_keys(S.n, ell)
    tabs = _coder_tables(model)
    buf, nbits, status, pos = _coder.encode_sequence(S.symbols, np.int64(S.n), ell, *tabs.args())
    if status != _coder.OK:
        raise CodecError(f"zero-probability transition at position {pos}")
    return Payload(bytes(buf), int(nbits))


def decode(payload: Payload, model: Model, m: int) -> Sequence:
    if len(payload.data) < (payload.nbits + 7) // 8:
        raise FormatError("truncated payload")
    ell = model.order
    if m < ell:
        raise ValueError("m shorter than the model order")
    tabs = _coder_tables(model)
    data = np.frombuffer(payload.data, dtype=np.uint8)
    prefix = np.asarray(model.prefix, dtype=np.int64)
    out, status, pos = _coder.decode_sequence(
        data, payload.nbits, m, prefix, np.int64(model.n), *tabs.args()
    )
    if status != _coder.OK:
        raise FormatError(f"payload does not decode under this model (position {pos})")
    return Sequence(out, model.n)


# --- model block serialization -------------------------------------------------


def _write_prefix(out: bytearray, prefix: tuple, n: int) -> None:
    out += pack_fixed(prefix, _prefix_width(n))


def _read_prefix(rd: Reader, ell: int, n: int) -> tuple:
    width = _prefix_width(n)
    nbytes = (ell * width + 7) // 8
    vals = unpack_fixed(rd.take(nbytes), ell, width)
    if np.any(vals >= n):
        raise FormatError("prefix symbol outside alphabet")
    return tuple(vals.tolist())


def _model_bytes(model: Model) -> bytes:
    out = bytearray()
    _write_prefix(out, model.prefix, model.n)
    if isinstance(model, QuantizedMarkovModel):
        keys, ptr, syms, vals = model.keys, model.ptr, model.indices, model.floors
    else:
        tb = model.table
        keys, ptr, syms, vals = context_keys(tb.contexts, model.n), tb.ptr, tb.followers, tb.counts
    put_varint(out, keys.size)
    prev = 0
    for k, key in enumerate(keys.tolist()):
        put_varint(out, key - prev)
        prev = key
        a, b = ptr[k], ptr[k + 1]
        write_body(out, syms[a:b], vals[a:b])
    return bytes(out)


def _parse_model(data: bytes, mode: str, n: int, ell: int, c: float, eps: float) -> Model:
    rd = Reader(data)
    prefix = _read_prefix(rd, ell, n)
    count = rd.varint()
    if count > len(data):
        raise FormatError("context count exceeds the model block")
    keys = np.empty(count, np.int64)
    ptr = [0]
    syms, vals = [], []
    key = 0
    limit = n ** ell
    for k in range(count):
        gap = rd.varint()
        if k and gap == 0:
            raise FormatError("context keys must be strictly increasing")
        key += gap
        if key >= limit:
            raise FormatError("context key outside the alphabet")
        keys[k] = key
        idx, fl = read_body(rd)
        if idx.size:
            if idx[-1] >= n or np.any(np.diff(idx) <= 0):
                raise FormatError("follower symbols must be increasing and inside the alphabet")
            if fl.min() < 1:
                raise FormatError("stored frequencies must be positive")
        elif mode != "quantized":
            raise FormatError("empty context in count table")
        syms.append(idx)
        vals.append(fl)
        ptr.append(ptr[-1] + idx.size)
    if not rd.at_end():
        raise FormatError("trailing bytes in model block")
    syms_a = np.concatenate(syms) if syms else np.zeros(0, np.int64)
    vals_a = np.concatenate(vals) if vals else np.zeros(0, np.int64)
    ptr_a = np.asarray(ptr, np.int64)
    contexts = windows_from_keys(keys, n, ell)
    if mode == "quantized":
        # the container's eps is the total budget; the quantizer received half
        params = QuantizerParams(c, eps / 2.0, n)
        return QuantizedMarkovModel(ell, n, prefix, params, contexts, ptr_a, syms_a, vals_a)
    return CountTable(ell, n, prefix, ContextTable(ell, n, contexts, ptr_a, syms_a, vals_a))


@dataclass(frozen=True, eq=False)
class CompressedContainer:
    n: int
    m: int
    order: int
    mode: str
    c: float
    eps: float
    model: Model
    payload: Payload

    def _header(self) -> bytes:
        out = bytearray(MAGIC)
        out.append(VERSION)
        out.append(MODES.index(self.mode))
        put_varint(out, self.n)
        put_varint(out, self.m)
        put_varint(out, self.order)
        put_f64(out, self.c)
        put_f64(out, self.eps)
        return bytes(out)

    def _blocks(self) -> tuple[bytes, bytes, bytes]:
        header = self._header()
        mb = _model_bytes(self.model)
        model_block = bytearray()
        put_varint(model_block, len(mb))
        model_block += mb
        payload_block = bytearray()
        put_varint(payload_block, self.payload.nbits)
        payload_block += self.payload.data
        return header, bytes(model_block), bytes(payload_block)

    def to_bytes(self) -> bytes:
        return b"".join(self._blocks())

    def sizes(self) -> dict[str, int]:
        """Bit sizes of each block; the three blocks sum to ``total_bits``."""
        header, model_block, payload_block = self._blocks()
        return {
            "header_bits": 8 * len(header),
            "model_bits": 8 * len(model_block),
            "payload_block_bits": 8 * len(payload_block),
            "payload_bits": self.payload.nbits,
            "total_bits": 8 * (len(header) + len(model_block) + len(payload_block)),
        }

    @property
    def total_bits(self) -> int:
        return 8 * len(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> CompressedContainer:
        rd = Reader(data)
        if rd.take(4) != MAGIC:
            raise FormatError("not a compressed container (bad magic)")
        version = rd.byte()
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        mode_id = rd.byte()
        if mode_id >= len(MODES):
            raise FormatError(f"unknown model mode {mode_id}")
        mode = MODES[mode_id]
        n, m, ell = rd.varint(), rd.varint(), rd.varint()
        c, eps = rd.f64(), rd.f64()
        if n < 1:
            raise FormatError("alphabet size must be positive")
        model = _parse_model(rd.take(rd.varint()), mode, n, ell, c, eps)
        nbits = rd.varint()
        payload = Payload(rd.take((nbits + 7) // 8), nbits)
        if not rd.at_end():
            raise FormatError("trailing bytes after payload")
        return cls(n, m, ell, mode, c, eps, model, payload)


def compress(S: Sequence, order: int, c: float = 1.0, eps: float = 0.5,
             mode: str = "quantized") -> CompressedContainer:
    """Store S as model + payload.

    In quantized mode half of ``eps`` goes to the distribution quantizer; the
    other half is the allowance for model storage and coder overhead.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    ell = int(order)
    _require_length(S, ell)
    _check_keys(S.n, ell)
    if mode == "quantized":
        model = quantize_model(S, ell, c, eps / 2.0)
    else:
        model = count_table(S, ell)
    payload = encode(S, model)
    return CompressedContainer(S.n, S.m, ell, mode, float(c), float(eps), model, payload)


def decompress(container) -> Sequence:
    if isinstance(container, (bytes, bytearray, memoryview)):
        container = CompressedContainer.from_bytes(bytes(container))
    return decode(container.payload, container.model, container.m)


def exact_table_bits(S: Sequence, order: int) -> int:
    """Serialized size in bits of the exact count table (prefix included)."""
    _check_keys(S.n, int(order))
    return 8 * len(_model_bytes(count_table(S, order)))


def compression_stats(S: Sequence, container: CompressedContainer) -> dict:
    """Measured sizes next to the budget (c H_ell(S) + eps) m."""
    h = empirical_entropy(S, container.order)
    sizes = container.sizes()
    budget = (container.c * h + container.eps) * S.m
    if container.mode == "quantized":
        ideal = model_self_information(container.model, S)
    else:
        ideal = h * S.m
    return {
        "n": S.n,
        "m": S.m,
        "order": container.order,
        "mode": container.mode,
        "c": container.c,
        "eps": container.eps,
        "entropy": h,
        "model_self_information": ideal,
        **sizes,
        "budget_bits": budget,
        "budget_met": sizes["total_bits"] < budget,
    }
