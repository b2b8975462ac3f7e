"""Bit file storage helpers for the CLI encode/decode commands.

Two layouts are supported:

``ascii``
    the characters ``0`` and ``1``; whitespace is ignored on read and a trailing
    newline is written.
``packed``
    an unsigned 64-bit little-endian bit count followed by the bits packed
    most-significant-bit first, zero padded to a whole byte.
"""
from __future__ import annotations

import struct
from ._compat import StrEnum
from pathlib import Path

import numpy as np

from .codebook import BitVector


class BitFileFormat(StrEnum):
    ASCII = "ascii"
    PACKED = "packed"


class BitFileError(ValueError):
    """Raised when a bit file is malformed."""


_HEADER = struct.Struct("<Q")


def _ensure_path(path: str | Path) -> Path:
    return Path(path).expanduser()


def encode_bits(bits: BitVector, fmt: BitFileFormat | str = BitFileFormat.ASCII) -> bytes:
    fmt = BitFileFormat(fmt)
    if fmt is BitFileFormat.ASCII:
        return (str(bits) + "\n").encode("ascii")
    packed = np.packbits(np.asarray(bits.bits, dtype=np.uint8), bitorder="big")
    return _HEADER.pack(len(bits)) + packed.tobytes()


def decode_bits(data: bytes, fmt: BitFileFormat | str = BitFileFormat.ASCII) -> BitVector:
    fmt = BitFileFormat(fmt)
    if fmt is BitFileFormat.ASCII:
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise BitFileError("ascii bit files may only contain '0', '1' and whitespace") from exc
        try:
            return BitVector.from_str(text)
        except ValueError as exc:
            raise BitFileError("ascii bit files may only contain '0', '1' and whitespace") from exc

    if len(data) < _HEADER.size:
        raise BitFileError(f"packed bit file shorter than its {_HEADER.size}-byte header")
    (count,) = _HEADER.unpack_from(data)
    body = data[_HEADER.size :]
    expected = (count + 7) // 8
    if len(body) != expected:
        raise BitFileError(f"header announces {count} bits ({expected} bytes) but {len(body)} bytes follow")
    if not count:
        return BitVector()
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="big")
    if bits[count:].any():
        raise BitFileError("non-zero padding after the last bit")
    return BitVector(tuple(int(bit) for bit in bits[:count]))


def read_bits(path: str | Path, fmt: BitFileFormat | str = BitFileFormat.ASCII) -> BitVector:
    return decode_bits(_ensure_path(path).read_bytes(), fmt)


def write_bits(path: str | Path, bits: BitVector, fmt: BitFileFormat | str = BitFileFormat.ASCII) -> Path:
    p = _ensure_path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_bits(bits, fmt))
    return p
