"""Canonical Huffman coding over a fixed integer alphabet.

Codes are fully determined by the code lengths plus (length, symbol) order,
so the serialized table is just the length array; encoder and decoder derive
identical codes deterministically.  Bitstream is MSB-first.
"""

from __future__ import annotations

import heapq
import struct

import numpy as np
from numba import njit

_HDR = struct.Struct("<IQQ")  # alphabet size, symbol count, bit count

MAX_CODE_LEN = 60


def code_lengths(counts: np.ndarray) -> np.ndarray:
    """Huffman code lengths (uint8) from symbol counts; 0 for unused symbols."""
    lens = np.zeros(len(counts), dtype=np.uint8)
    present = np.flatnonzero(counts)
    if present.size == 0:
        return lens
    if present.size == 1:
        lens[present[0]] = 1
        return lens
    # heap entries: (weight, serial, leaf-symbols); serial keeps ties stable
    heap = [(int(counts[s]), int(s), [int(s)]) for s in present]
    heapq.heapify(heap)
    serial = int(present[-1]) + 1
    depth = {int(s): 0 for s in present}
    while len(heap) > 1:
        w1, _, l1 = heapq.heappop(heap)
        w2, _, l2 = heapq.heappop(heap)
        for s in l1:
            depth[s] += 1
        for s in l2:
            depth[s] += 1
        heapq.heappush(heap, (w1 + w2, serial, l1 + l2))
        serial += 1
    for s, d in depth.items():
        lens[s] = d
    if lens.max() > MAX_CODE_LEN:
        raise ValueError(f"code length {lens.max()} exceeds {MAX_CODE_LEN}")
    return lens


def canonical_codes(lens: np.ndarray) -> np.ndarray:
    """Assign canonical codewords (uint64) by ascending (length, symbol)."""
    codes = np.zeros(len(lens), dtype=np.uint64)
    order = sorted(np.flatnonzero(lens), key=lambda s: (lens[s], s))
    code = 0
    prev_len = 0
    for s in order:
        code <<= int(lens[s]) - prev_len
        prev_len = int(lens[s])
        codes[s] = code
        code += 1
    return codes


@njit(cache=True)
def _pack_bits(symbols, codes, lens, out):
    pos = 0
    for k in range(symbols.size):
        s = symbols[k]
        c = codes[s]
        L = lens[s]
        for b in range(L - 1, -1, -1):
            if (c >> np.uint64(b)) & np.uint64(1):
                out[pos >> 3] |= np.uint8(1 << (7 - (pos & 7)))
            pos += 1
    return pos


@njit(cache=True)
def _unpack_bits(data, n_symbols, max_len, first_code, count_at, offset_at,
                 symtab, out):
    pos = 0
    for k in range(n_symbols):
        code = np.uint64(0)
        L = 0
        while True:
            bit = (data[pos >> 3] >> np.uint8(7 - (pos & 7))) & np.uint8(1)
            pos += 1
            code = (code << np.uint64(1)) | np.uint64(bit)
            L += 1
            if L > max_len:
                return -1  # corrupt stream
            if count_at[L] > 0:
                idx = np.int64(code) - np.int64(first_code[L])
                if 0 <= idx < count_at[L]:
                    out[k] = symtab[offset_at[L] + idx]
                    break
    return pos


def encode(symbols: np.ndarray, alphabet_size: int) -> bytes:
    """Encode int symbols in [0, alphabet_size) into a self-describing blob."""
    symbols = np.ascontiguousarray(symbols, dtype=np.int64)
    counts = np.bincount(symbols, minlength=alphabet_size) if symbols.size \
        else np.zeros(alphabet_size, dtype=np.int64)
    lens = code_lengths(counts)
    codes = canonical_codes(lens)
    total_bits = int(lens[symbols].astype(np.int64).sum()) if symbols.size else 0
    out = np.zeros((total_bits + 7) // 8, dtype=np.uint8)
    if symbols.size:
        _pack_bits(symbols, codes, lens, out)
    return (_HDR.pack(alphabet_size, symbols.size, total_bits)
            + lens.tobytes() + out.tobytes())


def decode(blob: bytes | memoryview) -> np.ndarray:
    """Inverse of encode(); returns int64 symbols."""
    blob = memoryview(blob)
    alphabet, n_symbols, total_bits = _HDR.unpack_from(blob, 0)
    off = _HDR.size
    lens = np.frombuffer(blob, dtype=np.uint8, count=alphabet, offset=off)
    off += alphabet
    out = np.empty(n_symbols, dtype=np.int64)
    if n_symbols == 0:
        return out
    data = np.frombuffer(blob, dtype=np.uint8,
                         count=(total_bits + 7) // 8, offset=off)

    max_len = int(lens.max())
    order = sorted(np.flatnonzero(lens), key=lambda s: (lens[s], s))
    symtab = np.array(order, dtype=np.int64)
    count_at = np.zeros(max_len + 1, dtype=np.int64)
    for s in order:
        count_at[lens[s]] += 1
    offset_at = np.zeros(max_len + 1, dtype=np.int64)
    first_code = np.zeros(max_len + 1, dtype=np.uint64)
    code = 0
    idx = 0
    for L in range(1, max_len + 1):
        code <<= 1
        first_code[L] = code
        offset_at[L] = idx
        code += int(count_at[L])
        idx += int(count_at[L])
    used = _unpack_bits(data, n_symbols, max_len, first_code, count_at,
                        offset_at, symtab, out)
    if used != total_bits:
        raise ValueError("corrupt entropy stream")
    return out
