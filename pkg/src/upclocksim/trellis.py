"""Trellis tables for the K=7 convolutional code with generators 133/171 (octal).

State convention: the 6-bit state holds the previous inputs with the most
recent one in bit 5. Feeding bit ``b`` into state ``s`` forms the register
``(b << 6) | s``; the next state is ``register >> 1``.
"""

from functools import lru_cache

import numpy as np

K = 7
N_STATES = 1 << (K - 1)
G0 = 0o133
G1 = 0o171


def parity(x: int) -> int:
    return bin(x).count("1") & 1


@lru_cache(maxsize=None)
def branch_outputs():
    """Output bit tables indexed ``[next_state, prev_state]``.

    Only entries where ``prev_state`` is a predecessor of ``next_state`` are
    meaningful.
    """
    out_a = np.zeros((N_STATES, N_STATES), dtype=np.int8)
    out_b = np.zeros((N_STATES, N_STATES), dtype=np.int8)
    for s in range(N_STATES):
        for b in (0, 1):
            reg = (b << 6) | s
            nxt = reg >> 1
            out_a[nxt, s] = parity(reg & G0)
            out_b[nxt, s] = parity(reg & G1)
    out_a.flags.writeable = False
    out_b.flags.writeable = False
    return out_a, out_b
