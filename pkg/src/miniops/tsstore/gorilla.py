"""Bit-level codecs for sealed segments.

Timestamps are stored as delta-of-delta values in zigzag LEB128 varints:
monotone clocks make the second difference almost always zero, so steady
series cost one byte per point. Values use XOR float compression: each
value is XORed with its predecessor and only the meaningful bit window is
stored, with a one-bit fast path for repeated values and a reuse path for
windows contained in the previous one.

Both codecs are lossless for any finite float64 and any int64 timestamp
sequence; decode(encode(xs)) == xs bit for bit.
"""

from __future__ import annotations

import struct
from typing import Sequence

_F64 = struct.Struct("<d")


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nbits = 0

    def write_bit(self, bit: int) -> None:
        self._acc = (self._acc << 1) | (bit & 1)
        self._nbits += 1
        if self._nbits == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nbits = 0

    def write_bits(self, value: int, count: int) -> None:
        for shift in range(count - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def getvalue(self) -> bytes:
        out = bytearray(self._buf)
        if self._nbits:
            out.append(self._acc << (8 - self._nbits))
        return bytes(out)


class BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # bit position

    def read_bit(self) -> int:
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, count: int) -> int:
        value = 0
        for _ in range(count):
            value = (value << 1) | self.read_bit()
        return value


def _zigzag(n: int) -> int:
    return (n << 1) ^ (n >> 63) if n < 0 else n << 1


def _unzigzag(z: int) -> int:
    return (z >> 1) ^ -(z & 1)


def _write_varint(buf: bytearray, z: int) -> None:
    while True:
        byte = z & 0x7F
        z >>= 7
        if z:
            buf.append(byte | 0x80)
        else:
            buf.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def encode_timestamps(timestamps: Sequence[int]) -> bytes:
    """Delta-of-delta encode a strictly increasing timestamp sequence."""
    buf = bytearray()
    _write_varint(buf, len(timestamps))
    if not timestamps:
        return bytes(buf)
    _write_varint(buf, _zigzag(timestamps[0]))
    if len(timestamps) == 1:
        return bytes(buf)
    prev_delta = timestamps[1] - timestamps[0]
    _write_varint(buf, _zigzag(prev_delta))
    for i in range(2, len(timestamps)):
        delta = timestamps[i] - timestamps[i - 1]
        _write_varint(buf, _zigzag(delta - prev_delta))
        prev_delta = delta
    return bytes(buf)


def decode_timestamps(data: bytes) -> list[int]:
    count, pos = _read_varint(data, 0)
    if count == 0:
        return []
    z, pos = _read_varint(data, pos)
    first = _unzigzag(z)
    out = [first]
    if count == 1:
        return out
    z, pos = _read_varint(data, pos)
    delta = _unzigzag(z)
    out.append(first + delta)
    for _ in range(count - 2):
        z, pos = _read_varint(data, pos)
        delta += _unzigzag(z)
        out.append(out[-1] + delta)
    return out


def _float_bits(value: float) -> int:
    return int.from_bytes(_F64.pack(value), "little")


def _bits_float(bits: int) -> float:
    return _F64.unpack(bits.to_bytes(8, "little"))[0]


def _clz64(x: int) -> int:
    return 64 - x.bit_length()


def _ctz64(x: int) -> int:
    return (x & -x).bit_length() - 1


def encode_values(values: Sequence[float]) -> bytes:
    """XOR-compress a float64 sequence (Gorilla value stream)."""
    writer = BitWriter()
    if not values:
        return writer.getvalue()
    prev = _float_bits(values[0])
    writer.write_bits(prev, 64)
    prev_leading = -1
    prev_trailing = 0
    for value in values[1:]:
        bits = _float_bits(value)
        xor = bits ^ prev
        prev = bits
        if xor == 0:
            writer.write_bit(0)
            continue
        writer.write_bit(1)
        leading = min(_clz64(xor), 31)
        trailing = _ctz64(xor)
        if prev_leading >= 0 and leading >= prev_leading and trailing >= prev_trailing:
            width = 64 - prev_leading - prev_trailing
            writer.write_bit(0)
            writer.write_bits(xor >> prev_trailing, width)
        else:
            width = 64 - leading - trailing
            writer.write_bit(1)
            writer.write_bits(leading, 5)
            writer.write_bits(width - 1, 6)  # width in 1..64
            writer.write_bits(xor >> trailing, width)
            prev_leading = leading
            prev_trailing = trailing
    return writer.getvalue()


def decode_values(data: bytes, count: int) -> list[float]:
    if count == 0:
        return []
    reader = BitReader(data)
    bits = reader.read_bits(64)
    out = [_bits_float(bits)]
    leading = 0
    trailing = 0
    have_window = False
    for _ in range(count - 1):
        if reader.read_bit() == 0:
            out.append(_bits_float(bits))
            continue
        if reader.read_bit() == 0:
            if not have_window:
                raise ValueError("value stream reuses a window before defining one")
            width = 64 - leading - trailing
            xor = reader.read_bits(width) << trailing
        else:
            leading = reader.read_bits(5)
            width = reader.read_bits(6) + 1
            trailing = 64 - leading - width
            have_window = True
            xor = reader.read_bits(width) << trailing
        bits ^= xor
        out.append(_bits_float(bits))
    return out
