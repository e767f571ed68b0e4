"""Static PHY knowledge: upclock profiles, MCS table, tone plan and PPDU geometry.

Everything here is immutable and shared by the transmit, receive and harness
code. Upclocking keeps the 20 MHz VHT baseband (64-point IDFT, 52 data and
4 pilot tones) and only scales rates and durations by an integer factor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class ConfigError(ValueError):
    """Raised for unsupported or inconsistent configuration values."""


class BaseStandard(enum.Enum):
    AC = "AC"
    BE = "BE"


class Modulation(enum.Enum):
    BPSK = 1
    QPSK = 2
    QAM16 = 4

    @property
    def bits_per_subcarrier(self) -> int:
        return self.value


BASE_CHANNEL_BANDWIDTH = 20e6
BASE_SUBCARRIER_SPACING = {BaseStandard.AC: 312.5e3, BaseStandard.BE: 78.125e3}
SUPPORTED_FACTORS = (1, 4, 8, 16)

# Preamble geometry in samples; identical for every factor.
N_FFT = 64
N_CP = 16
STF_PERIOD = 16
STF_LEN = 160
LTF_LEN = 160
VHT_LTF_LEN = 80
PREAMBLE_LEN = STF_LEN + LTF_LEN + VHT_LTF_LEN
SYMBOL_LEN = N_FFT + N_CP

SERVICE_BITS = 16
TAIL_BITS = 6


@dataclass(frozen=True)
class UpclockProfile:
    base_standard: BaseStandard
    factor: int
    base_subcarrier_spacing: float
    subcarrier_spacing: float
    idft_size: int
    idft_period: float
    cp_period: float
    sample_rate: float
    base_channel_bandwidth: float = BASE_CHANNEL_BANDWIDTH

    @property
    def cp_samples(self) -> int:
        return self.idft_size // 4

    @property
    def symbol_period(self) -> float:
        return self.idft_period + self.cp_period

    @property
    def occupied_bandwidth(self) -> float:
        return self.base_channel_bandwidth * self.factor


def make_upclock_profile(base: BaseStandard | str, factor: int) -> UpclockProfile:
    """Build the numerology of ``base`` upclocked by ``factor``.

    The IDFT size is the base standard's 20 MHz size; only the subcarrier
    spacing (and hence every rate and duration) scales.
    """
    try:
        base = BaseStandard(base) if not isinstance(base, BaseStandard) else base
    except ValueError:
        raise ConfigError(f"unsupported base standard {base!r}") from None
    if factor not in SUPPORTED_FACTORS:
        raise ConfigError(f"unsupported upclock factor {factor!r}; expected one of {SUPPORTED_FACTORS}")
    base_spacing = BASE_SUBCARRIER_SPACING[base]
    spacing = base_spacing * factor
    idft_size = int(round(BASE_CHANNEL_BANDWIDTH / base_spacing))
    idft_period = 1.0 / spacing
    return UpclockProfile(
        base_standard=base,
        factor=factor,
        base_subcarrier_spacing=base_spacing,
        subcarrier_spacing=spacing,
        idft_size=idft_size,
        idft_period=idft_period,
        cp_period=idft_period / 4,
        sample_rate=idft_size * spacing,
    )


@dataclass(frozen=True)
class McsParams:
    index: int
    modulation: Modulation
    bits_per_subcarrier: int
    code_rate: Fraction
    n_dbps: int
    n_cbps: int


_MCS_TABLE = {
    0: (Modulation.BPSK, Fraction(1, 2)),
    1: (Modulation.QPSK, Fraction(1, 2)),
    4: (Modulation.QAM16, Fraction(3, 4)),
}
SUPPORTED_MCS = tuple(_MCS_TABLE)


def mcs_params(index: int, n_data_tones: int = 52) -> McsParams:
    if index not in _MCS_TABLE:
        raise ConfigError(f"unsupported MCS {index!r}; expected one of {SUPPORTED_MCS}")
    modulation, rate = _MCS_TABLE[index]
    n_cbps = modulation.bits_per_subcarrier * n_data_tones
    n_dbps = n_cbps * rate
    if n_dbps.denominator != 1:
        raise ConfigError(f"MCS {index} gives a fractional N_DBPS for {n_data_tones} tones")
    return McsParams(index, modulation, modulation.bits_per_subcarrier, rate, int(n_dbps), n_cbps)


@dataclass(frozen=True)
class TonePlan:
    """Tone roles as signed subcarrier indices in ``[-idft_size/2, idft_size/2)``."""

    idft_size: int
    data_tone_indices: tuple[int, ...]
    pilot_tone_indices: tuple[int, ...]
    dc_null_indices: tuple[int, ...]
    guard_null_indices: tuple[int, ...]

    def bins(self, tones) -> np.ndarray:
        """Map signed subcarrier indices to FFT bin positions."""
        return np.asarray(tones, dtype=np.intp) % self.idft_size

    @property
    def data_bins(self) -> np.ndarray:
        return self.bins(self.data_tone_indices)

    @property
    def pilot_bins(self) -> np.ndarray:
        return self.bins(self.pilot_tone_indices)

    @property
    def occupied_tone_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.data_tone_indices + self.pilot_tone_indices))


PILOT_TONES = (-21, -7, 7, 21)


def vht20_tone_plan() -> TonePlan:
    """20 MHz VHT layout: tones -28..28 minus DC, pilots at +-7 and +-21."""
    occupied = [k for k in range(-28, 29) if k != 0]
    data = tuple(k for k in occupied if k not in PILOT_TONES)
    guard = tuple(k for k in range(-32, 32) if abs(k) > 28)
    return TonePlan(N_FFT, data, PILOT_TONES, (0,), guard)


TONE_PLAN = vht20_tone_plan()


@dataclass(frozen=True)
class PpduConfig:
    mcs: McsParams
    psdu_length: int
    profile: UpclockProfile
    carrier_freq: float = 73.44e9
    scrambler_init: int = 0b1011101
    genie_signaling: bool = True

    def __post_init__(self):
        if self.psdu_length < 1:
            raise ConfigError("psdu_length must be at least 1 byte")
        if not self.carrier_freq > 0:
            raise ConfigError("carrier_freq must be positive")
        if not 0 < self.scrambler_init < 128:
            raise ConfigError("scrambler_init must be a nonzero 7-bit value")
        if self.profile.base_standard is not BaseStandard.AC:
            raise ConfigError("waveform generation supports the AC base only")
        if not self.genie_signaling:
            raise ConfigError("only genie signaling is implemented")


def make_config(mcs: int = 0, factor: int = 8, psdu_length: int = 4096, **kwargs) -> PpduConfig:
    """Shorthand for an AC-based PpduConfig."""
    return PpduConfig(mcs_params(mcs), psdu_length, make_upclock_profile(BaseStandard.AC, factor), **kwargs)


@dataclass(frozen=True)
class PpduGeometry:
    n_sym: int
    n_pad_bits: int
    total_samples: int
    n_data_bits: int = field(default=0)


def ppdu_geometry(cfg: PpduConfig) -> PpduGeometry:
    payload = SERVICE_BITS + 8 * cfg.psdu_length + TAIL_BITS
    n_sym = -(-payload // cfg.mcs.n_dbps)
    n_data_bits = n_sym * cfg.mcs.n_dbps
    return PpduGeometry(
        n_sym=n_sym,
        n_pad_bits=n_data_bits - payload,
        total_samples=PREAMBLE_LEN + n_sym * SYMBOL_LEN,
        n_data_bits=n_data_bits,
    )


def cfo_bound(carrier_freq: float, ppm_total: float) -> float:
    """Worst-case carrier offset in Hz for a combined oscillator error."""
    return carrier_freq * ppm_total * 1e-6


def stf_cfo_range(profile: UpclockProfile) -> float:
    """Half the L-STF tone spacing: the unambiguous range of the lag-16 estimator."""
    return 4 * profile.subcarrier_spacing / 2


def ltf_cfo_range(profile: UpclockProfile) -> float:
    """Half the L-LTF tone spacing: the unambiguous range of the lag-64 estimator."""
    return profile.subcarrier_spacing / 2


def cfo_resolvable(profile: UpclockProfile, carrier_freq: float, ppm_total: float) -> bool:
    return stf_cfo_range(profile) >= cfo_bound(carrier_freq, ppm_total)


def cfo_threshold_factor(carrier_freq: float, ppm_total: float, base: BaseStandard = BaseStandard.AC) -> float:
    """Smallest real upclock factor whose STF range covers the CFO bound."""
    per_unit_factor = 4 * BASE_SUBCARRIER_SPACING[base] / 2
    return cfo_bound(carrier_freq, ppm_total) / per_unit_factor


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0
