import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from upclocksim.coding import (
    RATE_1_2,
    RATE_3_4,
    bcc_encode,
    deinterleave,
    interleave,
    scramble,
    viterbi_decode,
)
from upclocksim.harness import PerPoint, derive_trial_seed, merge_points, wilson_interval
from upclocksim.phy import Modulation, make_config, ppdu_geometry
from upclocksim.rx import demap_llr
from upclocksim.tx import constellation, dft, idft, map_symbols

bit_arrays = st.lists(st.integers(0, 1), min_size=1, max_size=400).map(lambda b: np.array(b, dtype=np.uint8))


@given(bit_arrays, st.integers(1, 127))
def test_scramble_involution(bits, init):
    assert np.array_equal(scramble(scramble(bits, init), init), bits)


@given(st.sampled_from([(52, 1), (104, 2), (208, 4)]), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_interleave_inverse(geom, blocks, seed):
    n_cbps, nb = geom
    vals = np.random.default_rng(seed).standard_normal(n_cbps * blocks)
    assert np.array_equal(deinterleave(interleave(vals, n_cbps, nb), n_cbps, nb), vals)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([RATE_1_2, RATE_3_4]), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_encode_decode_identity(rate, periods, seed):
    n = 3 * periods + 6  # a whole number of rate-3/4 puncturing periods
    bits = np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)
    bits[-6:] = 0
    llr = 3.0 * (1 - 2 * bcc_encode(bits, rate).astype(float))
    assert np.array_equal(viterbi_decode(llr, rate), bits)


@given(st.sampled_from(list(Modulation)), st.integers(0, 2**32 - 1), st.floats(0.01, 10))
def test_demap_of_clean_points_recovers_bits(mod, seed, nv):
    nb = mod.bits_per_subcarrier
    bits = np.random.default_rng(seed).integers(0, 2, 8 * nb, dtype=np.uint8)
    llr = demap_llr(map_symbols(bits, mod), mod, nv)
    assert np.array_equal((llr < 0).astype(np.uint8), bits)


@given(st.sampled_from(list(Modulation)))
def test_constellation_energy(mod):
    assert math.isclose(np.mean(np.abs(constellation(mod)) ** 2), 1.0, rel_tol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_dft_pair_unitary(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert np.allclose(dft(idft(x)), x)
    assert math.isclose(np.sum(np.abs(idft(x)) ** 2), np.sum(np.abs(x) ** 2), rel_tol=1e-9)


@given(st.sampled_from([0, 1, 4]), st.integers(1, 5000))
def test_geometry_law(mcs, length):
    cfg = make_config(mcs, 8, length)
    g = ppdu_geometry(cfg)
    need = 16 + 8 * length + 6
    assert g.n_sym * cfg.mcs.n_dbps >= need > (g.n_sym - 1) * cfg.mcs.n_dbps
    assert (g.n_pad_bits == 0) == (g.n_sym * cfg.mcs.n_dbps == need)


@given(st.integers(1, 10_000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_contains_estimate(kn):
    k, n = kn
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)).map(lambda t: (min(t), max(t))),
                min_size=1, max_size=8), st.randoms())
def test_merge_commutative(parts, rnd):
    pts = [PerPoint(1.0, n, k) for k, n in parts]
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert merge_points(pts) == merge_points(shuffled)
    left = merge_points([merge_points(pts[: len(pts) // 2 or 1])] + pts[len(pts) // 2 or 1 :])
    assert left == merge_points(pts)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**20))
def test_seed_in_range_and_index_sensitive(s, h, i):
    a = derive_trial_seed(s, h, i)
    assert 0 <= a < 2**64
    assert a != derive_trial_seed(s, h, i + 1)
