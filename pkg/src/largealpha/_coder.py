"""Binary arithmetic coder over per-context integer frequency tables.

This is the classic low/high coder with underflow (E3) handling and a 62-bit
state held in int64.  The interval is split as ``step = range // total``, so
totals up to 2**40 are safe and the truncation loss per symbol is below
``total / 2**60``.  The last symbol of a table absorbs the remainder, which
makes probability-one steps free.

A context table ``k`` lists coded symbols ``syms[ptr[k]:ptr[k+1]]`` (sorted)
with cumulative starts ``cumlo`` and widths ``freq``; the top ``esc[k]``
units of ``tot[k]`` are an escape band.  After an escape the symbol is coded
uniformly among the ``n - t`` symbols absent from the table.

Termination writes a single 1 bit; the decoder reads zeros past the end.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATE_BITS = 62
FULL = np.int64(1) << np.int64(STATE_BITS)
MASK = FULL - np.int64(1)
HALF = np.int64(1) << np.int64(STATE_BITS - 1)
QUARTER = np.int64(1) << np.int64(STATE_BITS - 2)
MAX_TOTAL = np.int64(1) << np.int64(40)

OK = 0
ERR_NO_CONTEXT = 1
ERR_ZERO_FREQ = 2


@njit(cache=True)
def _find_context(ctx_keys, key):
    lo = 0
    hi = ctx_keys.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if ctx_keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < ctx_keys.size and ctx_keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def _find_sym(syms, a, b, s):
    # index j in [a, b) with syms[j] == s, else -(insertion point) - 1
    lo = a
    hi = b
    while lo < hi:
        mid = (lo + hi) >> 1
        if syms[mid] < s:
            lo = mid + 1
        else:
            hi = mid
    if lo < b and syms[lo] == s:
        return lo
    return -(lo - a) - 1


@njit(cache=True)
def _emit(buf, nbits, bit):
    if (nbits >> 3) >= buf.size:
        grown = np.zeros(buf.size * 2, dtype=np.uint8)
        grown[: buf.size] = buf
        buf = grown
    if bit:
        buf[nbits >> 3] |= np.uint8(0x80 >> (nbits & 7))
    return buf, nbits + 1


@njit(cache=True)
def _encode_step(state, cl, ch, tot, buf, nbits):
    low = state[0]
    high = state[1]
    pending = state[2]
    rng = high - low + 1
    step = rng // tot
    if ch < tot:
        high = low + ch * step - 1
    low = low + cl * step
    while ((low ^ high) & HALF) == 0:
        bit = low >> (STATE_BITS - 1)
        buf, nbits = _emit(buf, nbits, bit)
        while pending > 0:
            buf, nbits = _emit(buf, nbits, bit ^ 1)
            pending -= 1
        low = (low << 1) & MASK
        high = ((high << 1) & MASK) | 1
    while (low & ~high & QUARTER) != 0:
        pending += 1
        low = (low << 1) & (MASK >> 1)
        high = ((high << 1) & (MASK >> 1)) | HALF | 1
    state[0] = low
    state[1] = high
    state[2] = pending
    return buf, nbits


@njit(cache=True)
def encode_sequence(symbols, n, ell, ctx_keys, ptr, syms, cumlo, freq, tot, esc):
    """Returns (bytes, nbits, status, position)."""
    m = symbols.size
    buf = np.zeros(max(64, m // 2), dtype=np.uint8)
    nbits = 0
    state = np.zeros(3, dtype=np.int64)
    state[1] = MASK
    nl = np.int64(1)
    for _ in range(ell):
        nl *= n
    sub = nl // n if ell > 0 else np.int64(1)
    key = np.int64(0)
    for i in range(ell):
        key = key * n + symbols[i]
    for i in range(ell, m):
        k = _find_context(ctx_keys, key)
        if k < 0:
            return buf[:0], 0, ERR_NO_CONTEXT, i
        s = symbols[i]
        a = ptr[k]
        b = ptr[k + 1]
        j = _find_sym(syms, a, b, s)
        if j >= 0:
            buf, nbits = _encode_step(state, cumlo[j], cumlo[j] + freq[j], tot[k], buf, nbits)
        else:
            if esc[k] == 0:
                return buf[:0], 0, ERR_ZERO_FREQ, i
            buf, nbits = _encode_step(state, tot[k] - esc[k], tot[k], tot[k], buf, nbits)
            below = -j - 1
            t = b - a
            buf, nbits = _encode_step(state, s - below, s - below + 1, n - t, buf, nbits)
        if ell > 0:
            key = (key % sub) * n + s
    buf, nbits = _emit(buf, nbits, 1)
    return buf[: (nbits + 7) >> 3], nbits, OK, -1


@njit(cache=True)
def _read_bit(data, nbits, pos):
    if pos >= nbits:
        return 0
    return (data[pos >> 3] >> (7 - (pos & 7))) & 1


@njit(cache=True)
def decode_sequence(data, nbits, m, prefix, n, ctx_keys, ptr, syms, cumlo, freq, tot, esc):
    """Returns (symbols, status, position)."""
    ell = prefix.size
    out = np.empty(m, dtype=np.int64)
    out[:ell] = prefix
    low = np.int64(0)
    high = MASK
    code = np.int64(0)
    pos = 0
    for _ in range(STATE_BITS):
        code = (code << 1) | _read_bit(data, nbits, pos)
        pos += 1
    nl = np.int64(1)
    for _ in range(ell):
        nl *= n
    sub = nl // n if ell > 0 else np.int64(1)
    key = np.int64(0)
    for i in range(ell):
        key = key * n + prefix[i]
    i = ell
    # a symbol may need two coded steps (escape, then uniform rank)
    stage = 0
    k = -1
    while i < m:
        if stage == 0:
            k = _find_context(ctx_keys, key)
            if k < 0:
                return out, ERR_NO_CONTEXT, i
            total = tot[k]
        else:
            total = n - (ptr[k + 1] - ptr[k])
        rng = high - low + 1
        step = rng // total
        v = (code - low) // step
        if v >= total:
            v = total - 1
        a = ptr[k]
        b = ptr[k + 1]
        if stage == 0:
            if v >= total - esc[k]:
                cl = total - esc[k]
                ch = total
                stage = 1
                s = -1
            else:
                lo = a
                hi = b - 1
                while lo < hi:
                    mid = (lo + hi + 1) >> 1
                    if cumlo[mid] <= v:
                        lo = mid
                    else:
                        hi = mid - 1
                cl = cumlo[lo]
                ch = cl + freq[lo]
                s = syms[lo]
        else:
            # v-th symbol missing from syms[a:b]; syms[j] - (j - a) is non-decreasing
            lo = a
            hi = b
            while lo < hi:
                mid = (lo + hi) >> 1
                if syms[mid] - (mid - a) <= v:
                    lo = mid + 1
                else:
                    hi = mid
            s = v + (lo - a)
            cl = v
            ch = v + 1
            stage = 0
        if ch < total:
            high = low + ch * step - 1
        low = low + cl * step
        while ((low ^ high) & HALF) == 0:
            low = (low << 1) & MASK
            high = ((high << 1) & MASK) | 1
            code = ((code << 1) & MASK) | _read_bit(data, nbits, pos)
            pos += 1
        while (low & ~high & QUARTER) != 0:
            low = (low << 1) & (MASK >> 1)
            high = ((high << 1) & (MASK >> 1)) | HALF | 1
            code = (code & HALF) | ((code << 1) & (MASK >> 1)) | _read_bit(data, nbits, pos)
            pos += 1
        if stage == 0:
            out[i] = s
            if ell > 0:
                key = (key % sub) * n + s
            i += 1
    return out, OK, -1
