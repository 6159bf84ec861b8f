"""Sequence files: a ``{n: varint, m: varint}`` header followed by the
symbols, one raw byte each when ``n <= 256`` and LEB128 varints otherwise.

Several records may be concatenated in one file (``gen --enumerate`` does
this); :func:`read_sequences` returns them in order.
"""

from __future__ import annotations

import numpy as np

from ._wire import FormatError, Reader, put_varint
from .entropy_core import Sequence

__all__ = ["parse_sequences", "read_sequence", "read_sequences", "sequence_bytes", "write_sequences"]


def sequence_bytes(S: Sequence) -> bytes:
    out = bytearray()
    put_varint(out, S.n)
    put_varint(out, S.m)
    if S.n <= 256:
        out += S.symbols.astype(np.uint8).tobytes()
    else:
        for s in S.symbols.tolist():
            put_varint(out, s)
    return bytes(out)


def write_sequences(path, seqs) -> None:
    with open(path, "wb") as fh:
        fh.writelines(sequence_bytes(S) for S in seqs)


def parse_sequences(data: bytes) -> list[Sequence]:
    rd = Reader(data)
    out = []
    while not rd.at_end():
        n, m = rd.varint(), rd.varint()
        if n < 1:
            raise FormatError("alphabet size must be positive")
        if n <= 256:
            body = np.frombuffer(rd.take(m), dtype=np.uint8).astype(np.int64)
        else:
            body = np.array([rd.varint() for _ in range(m)], dtype=np.int64)
        if body.size and body.max() >= n:
            raise FormatError(f"symbol {int(body.max())} outside alphabet of size {n}")
        out.append(Sequence(body, n))
    return out


def read_sequences(path) -> list[Sequence]:
    with open(path, "rb") as fh:
        return parse_sequences(fh.read())


def read_sequence(path) -> Sequence:
    seqs = read_sequences(path)
    if len(seqs) != 1:
        raise FormatError(f"expected one sequence record, found {len(seqs)}")
    return seqs[0]
