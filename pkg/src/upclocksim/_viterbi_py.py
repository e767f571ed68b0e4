"""Pure numpy Viterbi kernel, used when the compiled extension is unavailable."""

import numpy as np

from .trellis import N_STATES, branch_outputs


def viterbi_core(llr_a, llr_b):
    """Soft-input Viterbi for the K=7 (133, 171) code.

    ``llr_a``/``llr_b`` hold one LLR per mother-code output bit (positive
    favours 0). The trellis starts and ends in state 0. Returns uint8 bits.
    """
    llr_a = np.ascontiguousarray(llr_a, dtype=np.float64)
    llr_b = np.ascontiguousarray(llr_b, dtype=np.float64)
    n = llr_a.shape[0]
    if llr_b.shape[0] != n:
        raise ValueError("llr_a and llr_b must have equal length")
    if n == 0:
        return np.zeros(0, dtype=np.uint8)

    out_a, out_b = branch_outputs()
    ns = np.arange(N_STATES)
    pred0 = (ns & 31) << 1
    pred1 = pred0 | 1
    # +1 where the branch emits 0, -1 where it emits 1
    sa0 = 1.0 - 2.0 * out_a[ns, pred0]
    sb0 = 1.0 - 2.0 * out_b[ns, pred0]
    sa1 = 1.0 - 2.0 * out_a[ns, pred1]
    sb1 = 1.0 - 2.0 * out_b[ns, pred1]

    metric = np.full(N_STATES, -np.inf)
    metric[0] = 0.0
    decisions = np.empty((n, N_STATES), dtype=np.uint8)
    for t in range(n):
        la = llr_a[t]
        lb = llr_b[t]
        m0 = metric[pred0] + sa0 * la + sb0 * lb
        m1 = metric[pred1] + sa1 * la + sb1 * lb
        choose1 = m1 > m0
        decisions[t] = choose1
        metric = np.where(choose1, m1, m0)
        metric -= metric.max()

    bits = np.empty(n, dtype=np.uint8)
    state = 0
    for t in range(n - 1, -1, -1):
        bits[t] = state >> 5
        state = ((state & 31) << 1) | decisions[t, state]
    return bits
