import math
from fractions import Fraction

import pytest

from upclocksim.phy import (
    BaseStandard,
    ConfigError,
    Modulation,
    PpduConfig,
    cfo_bound,
    cfo_resolvable,
    cfo_threshold_factor,
    ltf_cfo_range,
    make_config,
    make_upclock_profile,
    mcs_params,
    ppdu_geometry,
    stf_cfo_range,
)


@pytest.mark.parametrize(
    "base, factor, spacing, period",
    [
        ("AC", 4, 1.25e6, 800e-9),
        ("AC", 8, 2.5e6, 400e-9),
        ("BE", 16, 1.25e6, 800e-9),
        ("AC", 16, 5e6, 200e-9),
        ("AC", 1, 312.5e3, 3.2e-6),
    ],
)
def test_profile_table(base, factor, spacing, period):
    p = make_upclock_profile(base, factor)
    assert p.subcarrier_spacing == pytest.approx(spacing, rel=1e-12)
    assert p.idft_period == pytest.approx(period, rel=1e-12)
    assert p.cp_period == pytest.approx(period / 4, rel=1e-12)
    assert p.sample_rate == pytest.approx(p.idft_size * spacing, rel=1e-12)


def test_profile_keeps_baseband_size():
    sizes = {make_upclock_profile("AC", f).idft_size for f in (1, 4, 8, 16)}
    assert sizes == {64}
    assert make_upclock_profile(BaseStandard.AC, 8).occupied_bandwidth == 160e6


@pytest.mark.parametrize("bad", [0, 2, 3, 32])
def test_profile_rejects_factor(bad):
    with pytest.raises(ConfigError):
        make_upclock_profile("AC", bad)


def test_profile_rejects_base():
    with pytest.raises(ConfigError):
        make_upclock_profile("AX", 8)


@pytest.mark.parametrize(
    "index, modulation, rate, n_dbps",
    [(0, Modulation.BPSK, Fraction(1, 2), 26), (1, Modulation.QPSK, Fraction(1, 2), 52), (4, Modulation.QAM16, Fraction(3, 4), 156)],
)
def test_mcs_table(index, modulation, rate, n_dbps):
    p = mcs_params(index)
    assert p.modulation is modulation
    assert p.code_rate == rate
    # oracle: tones x bits x rate
    assert p.n_dbps == 52 * modulation.value * rate
    assert p.n_dbps == n_dbps
    assert p.n_cbps == 52 * modulation.value


@pytest.mark.parametrize("index", [2, 3, 5, 9, -1])
def test_mcs_unsupported(index):
    with pytest.raises(ConfigError):
        mcs_params(index)


@pytest.mark.parametrize("length, mcs, n_sym", [(4096, 0, 1262), (4096, 4, 211), (1, 0, 2)])
def test_geometry(length, mcs, n_sym):
    g = ppdu_geometry(make_config(mcs, 8, length))
    assert g.n_sym == n_sym
    bits = 16 + 8 * length + 6
    assert g.n_sym * mcs_params(mcs).n_dbps - g.n_pad_bits == bits
    assert g.total_samples == 400 + 80 * n_sym


def test_data_duration_mcs4_x16():
    cfg = make_config(4, 16, 4096)
    g = ppdu_geometry(cfg)
    data_samples = g.total_samples - 400
    assert data_samples / cfg.profile.sample_rate == pytest.approx(211 * (200e-9 + 50e-9), rel=1e-12)


def test_cfo_bound():
    assert cfo_bound(73.44e9, 40) == pytest.approx(2.9376e6, rel=1e-12)
    assert cfo_bound(73.44e9, 0) == 0
    assert cfo_bound(5e9, 40) == pytest.approx(200e3, rel=1e-12)


def test_cfo_ranges():
    assert stf_cfo_range(make_upclock_profile("AC", 1)) == pytest.approx(625e3)
    assert stf_cfo_range(make_upclock_profile("AC", 4)) == pytest.approx(2.5e6)
    assert stf_cfo_range(make_upclock_profile("AC", 8)) == pytest.approx(5e6)
    assert ltf_cfo_range(make_upclock_profile("AC", 1)) == pytest.approx(156.25e3)


def test_cfo_resolvability():
    got = {f: cfo_resolvable(make_upclock_profile("AC", f), 73.44e9, 40) for f in (4, 8, 16)}
    assert got == {4: False, 8: True, 16: True}


def test_threshold_factor_exact():
    # bound / (2 x 312.5 kHz)
    assert cfo_threshold_factor(73.44e9, 40) == pytest.approx(2.9376e6 / 625e3, rel=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        {"psdu_length": 0},
        {"scrambler_init": 0},
        {"scrambler_init": 128},
        {"carrier_freq": -1.0},
    ],
)
def test_config_validation(kw):
    args = dict(mcs=0, factor=8, psdu_length=100)
    args.update(kw)
    with pytest.raises(ConfigError):
        make_config(**args)


def test_config_is_frozen():
    cfg = make_config()
    assert isinstance(cfg, PpduConfig)
    with pytest.raises(Exception):
        cfg.psdu_length = 3
    assert math.isclose(cfg.carrier_freq, 73.44e9)
