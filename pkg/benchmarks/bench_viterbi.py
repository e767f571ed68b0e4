"""Compiled vs pure-numpy Viterbi kernel on full-length PSDUs.

    python benchmarks/bench_viterbi.py [--bytes 4096 1024] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from upclocksim import _viterbi_py
from upclocksim.coding import RATE_1_2, bcc_encode, depuncture

try:
    from upclocksim import _viterbi_ext
except ImportError:  # extension not built
    _viterbi_ext = None


def make_stream(n_bytes: int, seed: int = 0, snr_db: float = 3.0):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, 8 * n_bytes + 22, dtype=np.uint8)
    bits[-6:] = 0
    sigma = 10 ** (-snr_db / 20)
    llr = (1 - 2 * bcc_encode(bits, RATE_1_2).astype(float)) + sigma * rng.standard_normal(2 * bits.size)
    full = depuncture(llr, RATE_1_2)
    return full[0::2].copy(), full[1::2].copy()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bytes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    kernels = {"numpy": _viterbi_py.viterbi_core}
    if _viterbi_ext is not None:
        kernels["cython"] = _viterbi_ext.viterbi_core
    print(f"{'bytes':>6} {'steps':>7} " + " ".join(f"{k + ' ms':>10}" for k in kernels) + "   speedup  match")
    for n in args.bytes:
        a, b = make_stream(n)
        times, outs = {}, {}
        for name, fn in kernels.items():
            outs[name] = fn(a, b)
            times[name] = min(timeit.repeat(lambda fn=fn: fn(a, b), number=1, repeat=args.repeat)) * 1e3
        match = all(np.array_equal(o, outs["numpy"]) for o in outs.values())
        speed = f"{times['numpy'] / times['cython']:8.1f}x" if "cython" in times else "       -"
        print(f"{n:6d} {a.size:7d} " + " ".join(f"{t:10.2f}" for t in times.values()) + f"  {speed}  {match}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
