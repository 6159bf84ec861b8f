"""Byte-level helpers shared by the on-disk formats: LEB128 varints, raw
binary64 fields and fixed-width bit packing."""

from __future__ import annotations

import struct

import numpy as np


class FormatError(ValueError):
    """Malformed or truncated serialized data."""


def put_varint(out: bytearray, value: int) -> None:
    value = int(value)
    if value < 0:
        raise ValueError("varint must be non-negative")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def varint_size(value: int) -> int:
    """Encoded length in bytes."""
    return max(1, (int(value).bit_length() + 6) // 7)


def put_f64(out: bytearray, value: float) -> None:
    out += struct.pack("<d", float(value))


class Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = memoryview(data)
        self.pos = pos

    def byte(self) -> int:
        if self.pos >= len(self.data):
            raise FormatError("unexpected end of data")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def varint(self) -> int:
        shift = value = 0
        while True:
            b = self.byte()
            value |= (b & 0x7F) << shift
            if not b & 0x80:
                return value
            shift += 7
            if shift > 70:
                raise FormatError("varint too long")

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise FormatError("unexpected end of data")
        chunk = bytes(self.data[self.pos:self.pos + k])
        self.pos += k
        return chunk

    def at_end(self) -> bool:
        return self.pos == len(self.data)


def pack_fixed(values, width: int) -> bytes:
    """Pack non-negative ints MSB-first at ``width`` bits each."""
    v = np.asarray(values, dtype=np.uint64)
    if width == 0 or v.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((v[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)
    return np.packbits(bits).tobytes()


def unpack_fixed(data: bytes, count: int, width: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.int64)
    need = (count * width + 7) // 8
    if len(data) < need:
        raise FormatError("truncated fixed-width block")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: count * width]
    bits = bits.reshape(count, width).astype(np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits @ weights
