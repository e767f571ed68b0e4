import numpy as np
import pytest

from upclocksim.phy import TONE_PLAN, Modulation, make_config, make_upclock_profile
from upclocksim.tx import (
    Waveform,
    assemble_ppdu,
    bits_to_psdu,
    build_preamble,
    constellation,
    data_symbol_count,
    dft,
    idft,
    l_ltf_tones,
    map_symbols,
    ofdm_modulate,
    pilot_polarity,
    pilot_values,
    psdu_to_bits,
    read_waveform,
    write_waveform,
)

# L-LTF, tones -26..26 (DC = 0), as printed in the OFDM PHY standard
LTF_TABLE = (
    "1 1 -1 -1 1 1 -1 1 -1 1 1 1 1 1 1 -1 -1 1 1 -1 1 -1 1 1 1 1 0 "
    "1 -1 -1 1 1 -1 1 -1 1 -1 -1 -1 -1 -1 1 1 -1 -1 1 -1 1 -1 1 1 1 1"
)
# first 16 entries of the pilot polarity sequence p_n
POLARITY_HEAD = [1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, -1, 1, 1, -1, 1]


def _psdu(n, seed=0):
    return np.random.default_rng(seed).integers(0, 256, n, dtype=np.uint8).tobytes()


def test_bpsk_and_qpsk_points():
    assert np.array_equal(map_symbols([0, 1], Modulation.BPSK), [-1, 1])
    assert map_symbols([1, 1], Modulation.QPSK)[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert map_symbols([0, 0], Modulation.QPSK)[0] == pytest.approx((-1 - 1j) / np.sqrt(2))


def test_qam16_gray_labels():
    # per axis: b0 b1 = 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    axis = {(0, 0): -3, (0, 1): -1, (1, 1): 1, (1, 0): 3}
    for (i0, i1), vi in axis.items():
        for (q0, q1), vq in axis.items():
            got = map_symbols([i0, i1, q0, q1], Modulation.QAM16)[0]
            assert got == pytest.approx((vi + 1j * vq) / np.sqrt(10))


@pytest.mark.parametrize("mod", list(Modulation))
def test_constellation_unit_energy_and_gray(mod):
    pts = constellation(mod)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)
    if mod is Modulation.QAM16:
        # nearest neighbours differ in exactly one bit
        dmin = 2 / np.sqrt(10)
        for a in range(16):
            for b in range(16):
                if abs(abs(pts[a] - pts[b]) - dmin) < 1e-9:
                    assert bin(a ^ b).count("1") == 1


def test_map_rejects_partial_group():
    with pytest.raises(ValueError):
        map_symbols([0, 1, 1], Modulation.QPSK)


def test_ltf_table():
    expected = np.array([int(t) for t in LTF_TABLE.split()], dtype=float)
    grid = l_ltf_tones()
    got = np.array([grid[k % 64] for k in range(-26, 27)])
    assert np.array_equal(got, expected)
    occupied = got[got != 0]
    assert set(np.unique(occupied)) == {-1.0, 1.0}


def test_pilot_polarity_head():
    assert pilot_polarity()[:16].tolist() == POLARITY_HEAD


def test_pilot_rotation():
    p = pilot_values(5)
    base = np.array([1, 1, 1, -1])
    for n in range(5):
        assert np.array_equal(p[n], np.roll(base, -n) * POLARITY_HEAD[n + 4])


def test_zero_symbols_zero_samples():
    out = ofdm_modulate(np.zeros(52 * 3), pilots=np.zeros((3, 4)))
    assert not np.any(out)


@pytest.mark.parametrize("k", [-28, -7, 1, 13, 28])
def test_single_tone_is_exponential(k):
    profile = make_upclock_profile("AC", 8)
    grid = np.zeros(64, dtype=complex)
    grid[k % 64] = 1
    n = np.arange(64)
    expected = np.exp(2j * np.pi * k * profile.subcarrier_spacing * n / profile.sample_rate) / 8
    assert np.allclose(idft(grid), expected, atol=1e-14)


def test_parseval():
    rng = np.random.default_rng(1)
    grid = rng.standard_normal((10, 64)) + 1j * rng.standard_normal((10, 64))
    x = idft(grid)
    # unitary transform: energy preserved
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(grid) ** 2), rel=1e-9)
    assert np.allclose(dft(x), grid, atol=1e-12)


def test_stf_periodicity_and_duration():
    for f, duration in [(1, 8e-6), (8, 1e-6)]:
        profile = make_upclock_profile("AC", f)
        pre = build_preamble(profile)
        stf = pre[:160]
        assert np.allclose(stf[16:], stf[:-16], atol=1e-12)
        assert 160 / profile.sample_rate == pytest.approx(duration, rel=1e-12)


def test_ltf_repetitions():
    pre = build_preamble(make_upclock_profile("AC", 8))
    ltf = pre[160:320]
    assert np.allclose(ltf[32:96], ltf[96:160], atol=1e-12)
    assert np.allclose(ltf[:32], ltf[128:160], atol=1e-12)


def test_preamble_fields_unit_power():
    pre = build_preamble(make_upclock_profile("AC", 8))
    for seg in (pre[:160], pre[192:320], pre[336:400]):
        assert np.mean(np.abs(seg) ** 2) == pytest.approx(1.0, rel=1e-12)


def test_symbol_count_mcs0_x8():
    wave = assemble_ppdu(_psdu(4096), make_config(0, 8, 4096))
    assert data_symbol_count(wave) == 1262
    assert len(wave) == 400 + 80 * 1262
    assert wave.data_power() == pytest.approx(1.0, rel=1e-12)
    assert wave.sample_rate == 160e6


def test_unused_tones_are_empty():
    cfg = make_config(4, 8, 300)
    wave = assemble_ppdu(_psdu(300), cfg)
    body = wave.data.reshape(-1, 80)[:, 16:]
    tones = dft(body)
    occupied = np.zeros(64, dtype=bool)
    occupied[TONE_PLAN.bins(TONE_PLAN.occupied_tone_indices)] = True
    assert not occupied[0]
    assert np.max(np.abs(tones[:, ~occupied])) < 1e-12
    assert np.min(np.abs(tones[:, occupied])) > 0.1
    # the cyclic prefix copies the symbol tail
    sym = wave.data.reshape(-1, 80)
    assert np.allclose(sym[:, :16], sym[:, 64:], atol=1e-12)


def test_psdu_bits_round_trip():
    data = _psdu(77, 3)
    bits = psdu_to_bits(data)
    assert bits.size == 616
    assert bits[:8].tolist() == [(data[0] >> i) & 1 for i in range(8)]
    assert bits_to_psdu(bits) == data


def test_assemble_rejects_wrong_length():
    with pytest.raises(ValueError):
        assemble_ppdu(_psdu(10), make_config(0, 8, 11))


def test_waveform_rejects_nonfinite():
    with pytest.raises(ValueError):
        Waveform(np.array([1, np.nan]), 1.0)


def test_waveform_dump_round_trip(tmp_path):
    wave = assemble_ppdu(_psdu(100), make_config(1, 16, 100))
    path = write_waveform(tmp_path / "w.bin", wave, mcs=1)
    back, header = read_waveform(path)
    assert header["mcs"] == "1"
    assert back.sample_rate == wave.sample_rate
    assert back.data_start == wave.data_start
    assert np.allclose(back.samples, wave.samples, atol=1e-6)
    assert path.stat().st_size == 8 * len(wave)
