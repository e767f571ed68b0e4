"""Bit-level processing: scrambler, BCC encoder/puncturer, interleaver, Viterbi.

The Viterbi kernel is compiled with Cython when available; set
``UPCLOCKSIM_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .trellis import G0, G1

if os.environ.get("UPCLOCKSIM_PURE_PYTHON"):
    from ._viterbi_py import viterbi_core

    BACKEND = "python"
else:
    try:
        from ._viterbi_ext import viterbi_core

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._viterbi_py import viterbi_core

        BACKEND = "python"


class CodingError(ValueError):
    """Length or geometry mismatch inside the coding chain."""


RATE_1_2 = Fraction(1, 2)
RATE_3_4 = Fraction(3, 4)

# Keep-mask over the mother-code stream A0 B0 A1 B1 A2 B2 for rate 3/4.
_PUNCTURE = {RATE_1_2: np.array([1, 1], dtype=bool), RATE_3_4: np.array([1, 1, 1, 0, 0, 1], dtype=bool)}


def _rate(rate) -> Fraction:
    rate = Fraction(rate)
    if rate not in _PUNCTURE:
        raise CodingError(f"unsupported code rate {rate}")
    return rate


# --- scrambler -------------------------------------------------------------

@lru_cache(maxsize=128)
def lfsr_sequence(init: int) -> np.ndarray:
    """One period (127 bits) of the x^7 + x^4 + 1 scrambler seeded with ``init``.

    Bit 6 of ``init`` is register x7, bit 0 is x1.
    """
    if not 0 <= init < 128:
        raise ValueError("scrambler state must fit in 7 bits")
    state = [(init >> i) & 1 for i in range(7)]  # state[i] is x_{i+1}
    out = np.empty(127, dtype=np.uint8)
    for n in range(127):
        bit = state[6] ^ state[3]
        out[n] = bit
        state = [bit] + state[:6]
    out.flags.writeable = False
    return out


def scramble(bits, init: int) -> np.ndarray:
    """XOR ``bits`` with the scrambler sequence; applying it twice is the identity."""
    bits = np.asarray(bits, dtype=np.uint8)
    seq = lfsr_sequence(init)
    reps = -(-bits.size // 127)
    return bits ^ np.tile(seq, reps)[: bits.size]


descramble = scramble


# --- convolutional code ----------------------------------------------------

def _taps(gen: int) -> np.ndarray:
    # tap d multiplies the input delayed by d samples
    return np.array([(gen >> (6 - d)) & 1 for d in range(7)], dtype=np.int64)


def conv_encode(bits) -> tuple[np.ndarray, np.ndarray]:
    """Rate-1/2 mother code outputs (A, B), one pair per input bit."""
    bits = np.asarray(bits, dtype=np.int64)
    a = np.convolve(bits, _taps(G0))[: bits.size] & 1
    b = np.convolve(bits, _taps(G1))[: bits.size] & 1
    return a.astype(np.uint8), b.astype(np.uint8)


def bcc_encode(bits, rate) -> np.ndarray:
    """Encode and puncture. The caller appends the 6 zero tail bits."""
    rate = _rate(rate)
    bits = np.asarray(bits, dtype=np.uint8)
    if (bits.size * 2) % _PUNCTURE[rate].size:
        raise CodingError(f"{bits.size} input bits do not fill the rate {rate} puncturing period")
    a, b = conv_encode(bits)
    mother = np.empty(2 * bits.size, dtype=np.uint8)
    mother[0::2] = a
    mother[1::2] = b
    return puncture(mother, rate)


def puncture(mother, rate) -> np.ndarray:
    mask = _PUNCTURE[_rate(rate)]
    mother = np.asarray(mother)
    if mother.size % mask.size:
        raise CodingError("mother stream length is not a whole number of puncturing periods")
    return mother[np.tile(mask, mother.size // mask.size)]


def depuncture(llrs, rate) -> np.ndarray:
    """Re-insert zero LLRs (erasures) at punctured positions."""
    mask = _PUNCTURE[_rate(rate)]
    llrs = np.asarray(llrs, dtype=np.float64)
    kept = int(mask.sum())
    if llrs.size % kept:
        raise CodingError(f"{llrs.size} LLRs do not match the rate {rate} puncturing period")
    full = np.zeros(llrs.size // kept * mask.size)
    full[np.tile(mask, llrs.size // kept)] = llrs
    return full


def viterbi_decode(llrs, rate) -> np.ndarray:
    """Maximum-likelihood decode of a punctured, zero-terminated BCC stream.

    Returns one bit per trellis step, tail bits included.
    """
    full = depuncture(llrs, rate)
    return viterbi_core(full[0::2], full[1::2])


# --- interleaver -----------------------------------------------------------

N_COL = 13


@lru_cache(maxsize=None)
def interleaver_permutation(n_cbps: int, bits_per_subcarrier: int) -> np.ndarray:
    """Position ``perm[k]`` of input bit ``k`` after both permutations."""
    n_row = n_cbps // N_COL
    if n_row * N_COL != n_cbps:
        raise CodingError(f"n_cbps={n_cbps} is not a multiple of {N_COL} columns")
    s = max(bits_per_subcarrier // 2, 1)
    k = np.arange(n_cbps)
    i = n_row * (k % N_COL) + k // N_COL
    j = s * (i // s) + (i + n_cbps - (N_COL * i) // n_cbps) % s
    j.flags.writeable = False
    return j


def interleave(bits, n_cbps: int, bits_per_subcarrier: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size % n_cbps:
        raise CodingError(f"{bits.size} bits is not a multiple of n_cbps={n_cbps}")
    perm = interleaver_permutation(n_cbps, bits_per_subcarrier)
    blocks = bits.reshape(-1, n_cbps)
    out = np.empty_like(blocks)
    out[:, perm] = blocks
    return out.reshape(-1)


def deinterleave(values, n_cbps: int, bits_per_subcarrier: int) -> np.ndarray:
    values = np.asarray(values)
    if values.size % n_cbps:
        raise CodingError(f"{values.size} values is not a multiple of n_cbps={n_cbps}")
    perm = interleaver_permutation(n_cbps, bits_per_subcarrier)
    return values.reshape(-1, n_cbps)[:, perm].reshape(-1)
