"""Bit-string helpers.

Bit strings are 1-D ``numpy.uint8`` arrays of 0/1 values. Index 0 is the
most significant bit whenever a bit string is read as an integer or
serialized to hex.
"""
from __future__ import annotations

import numpy as np

from .errors import FormatError


def as_bits(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise FormatError("bit strings may only contain 0 and 1")
    return arr


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in as_bits(bits):
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or (width < value.bit_length()):
        raise FormatError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_hex(bits) -> str:
    """Lowercase hex, MSB first, ceil(len/8) bytes with high-order zero padding."""
    bits = as_bits(bits)
    nbytes = (bits.size + 7) // 8
    return bits_to_int(bits).to_bytes(nbytes, "big").hex()


def hex_to_bits(text: str, width: int) -> np.ndarray:
    text = text.strip().lower()
    if len(text) != 2 * ((width + 7) // 8):
        raise FormatError(f"expected {(width + 7) // 8} hex bytes for {width} bits, got {text!r}")
    try:
        value = int(text, 16) if text else 0
    except ValueError as exc:
        raise FormatError(f"not a hex string: {text!r}") from exc
    return int_to_bits(value, width)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def str_to_bits(text: str) -> np.ndarray:
    text = "".join(text.split())
    if any(ch not in "01" for ch in text):
        raise FormatError("message text must consist of 0 and 1 characters")
    return np.array([ch == "1" for ch in text], dtype=np.uint8)


def index_bits(indices, width: int) -> np.ndarray:
    """Matrix of the ``width``-bit big-endian expansions of integer ``indices``."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 1)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((idx >> shifts) & 1).astype(np.uint8)


def pack_rows(bit_matrix: np.ndarray) -> np.ndarray:
    """Inverse of :func:`index_bits`: each row of bits to one integer."""
    bit_matrix = np.asarray(bit_matrix, dtype=np.int64)
    width = bit_matrix.shape[1]
    weights = (1 << np.arange(width - 1, -1, -1, dtype=np.int64))
    return bit_matrix @ weights
