"""Hardware and propagation impairments applied to a transmitted Waveform.

Fixed chain order: PA -> CFO -> phase noise -> channel -> AWGN. Every stage
can be switched off, and with all of them off the chain returns the input
samples unchanged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from .phy import ConfigError, UpclockProfile, cfo_bound
from .tx import Waveform

# --- carrier frequency offset ---------------------------------------------


class CfoMode(enum.Enum):
    FIXED = "fixed"
    UNIFORM_WORST_CASE = "uniform_worst_case"


@dataclass(frozen=True)
class CfoSpec:
    mode: CfoMode = CfoMode.FIXED
    ppm_total: float = 40.0
    fixed_offset: float = 2.9376e6

    def validate(self, carrier_freq: float) -> None:
        bound = cfo_bound(carrier_freq, self.ppm_total)
        if self.mode is CfoMode.FIXED and abs(self.fixed_offset) > bound * (1 + 1e-12):
            raise ConfigError(
                f"cfo_fixed_offset {self.fixed_offset:g} Hz exceeds the {self.ppm_total:g} ppm bound {bound:g} Hz"
            )


def draw_cfo(spec: CfoSpec, carrier_freq: float, rng: np.random.Generator) -> float:
    if spec.mode is CfoMode.FIXED:
        return float(spec.fixed_offset)
    bound = cfo_bound(carrier_freq, spec.ppm_total)
    return float(rng.uniform(-bound, bound)) if bound > 0 else 0.0


def apply_cfo(wave: Waveform, offset: float) -> Waveform:
    if not abs(offset) < wave.sample_rate / 2:
        raise ValueError("CFO must be below half the sample rate")
    if offset == 0:
        return wave
    n = np.arange(len(wave))
    return wave.with_samples(wave.samples * np.exp(2j * np.pi * offset * n / wave.sample_rate))


# --- phase noise -----------------------------------------------------------


class PsdAnchor(enum.Enum):
    DC = "dc"  # psd0 is the PSD at f = 0
    FLOOR = "floor"  # psd0 is the high-frequency floor beyond the zero


@dataclass(frozen=True)
class PhaseNoiseModel:
    pole_freq: float = 1e6
    zero_freq: float = 100e6
    psd0: float = -93.0
    anchor: PsdAnchor = PsdAnchor.DC

    def __post_init__(self):
        if not self.pole_freq < self.zero_freq:
            raise ConfigError("phase-noise pole frequency must be below the zero frequency")
        if not self.psd0 < 0:
            raise ConfigError("phase-noise psd0 must be negative (dBc/Hz)")

    @property
    def dc_level(self) -> float:
        """PSD at f = 0 in dBc/Hz, whichever anchor was configured."""
        if self.anchor is PsdAnchor.DC:
            return self.psd0
        return self.psd0 + 20 * math.log10(self.zero_freq / self.pole_freq)

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.psd0)


def phase_noise_psd(model: PhaseNoiseModel, f) -> np.ndarray:
    """One-pole/one-zero PSD in dBc/Hz (two-sided density of the phase process)."""
    f = np.abs(np.asarray(f, dtype=float))
    shape = (1 + (f / model.zero_freq) ** 2) / (1 + (f / model.pole_freq) ** 2)
    return model.dc_level + 10 * np.log10(shape)


def phase_noise_filter(model: PhaseNoiseModel, sample_rate: float):
    """Matched-z first-order filter with unit DC gain: (b, a) for lfilter."""
    p = math.exp(-2 * math.pi * model.pole_freq / sample_rate)
    z = math.exp(-2 * math.pi * model.zero_freq / sample_rate)
    k = (1 - p) / (1 - z)
    return np.array([k, -k * z]), np.array([1.0, -p])


def gen_phase_noise(n: int, sample_rate: float, model: PhaseNoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Stationary phase-noise samples in radians with the model's PSD."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not model.enabled:
        return np.zeros(n)
    b, a = phase_noise_filter(model, sample_rate)
    sigma = math.sqrt(10 ** (model.dc_level / 10) * sample_rate)
    pole = -a[1]
    warmup = int(math.ceil(20 / (1 - pole)))  # settle the filter state before keeping samples
    white = rng.standard_normal(n + warmup) * sigma
    return signal.lfilter(b, a, white)[warmup:]


def apply_phase_noise(wave: Waveform, phases) -> Waveform:
    phases = np.asarray(phases, dtype=float)
    if phases.shape != wave.samples.shape:
        raise ValueError(f"phase sequence length {phases.size} != waveform length {len(wave)}")
    return wave.with_samples(wave.samples * np.exp(1j * phases))


# --- power amplifier -------------------------------------------------------


@dataclass(frozen=True)
class RappPaModel:
    small_signal_gain: float = 1.0
    sat_amplitude: float = 1.0
    smoothness_p: float = 0.81
    ampm_alpha: float = 0.0
    ampm_beta: float = 1.0
    ampm_q1: float = 2.0
    ampm_q2: float = 2.0
    obo: float = 8.0

    def __post_init__(self):
        if not self.smoothness_p > 0:
            raise ConfigError("pa_smoothness must be positive")
        if not self.sat_amplitude > 0:
            raise ConfigError("pa_sat_amplitude must be positive")
        if not self.obo >= 0:
            raise ConfigError("pa_obo_db must be non-negative")
        if not self.small_signal_gain > 0:
            raise ConfigError("pa_gain must be positive")


def rapp_amam(a, model: RappPaModel) -> np.ndarray:
    ga = model.small_signal_gain * np.asarray(a, dtype=float)
    two_p = 2 * model.smoothness_p
    return ga / (1 + (ga / model.sat_amplitude) ** two_p) ** (1 / two_p)


def rapp_ampm(a, model: RappPaModel) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if model.ampm_alpha == 0:
        return np.zeros_like(a)
    return model.ampm_alpha * a**model.ampm_q1 / (1 + (a / model.ampm_beta) ** model.ampm_q2)


def backoff_scale(amplitudes: np.ndarray, model: RappPaModel, tol_db: float = 0.01) -> float:
    """Input scale putting the mean output power ``obo`` dB under saturation."""
    target = model.sat_amplitude**2 * 10 ** (-model.obo / 10)
    mean_sq = float(np.mean(amplitudes**2))
    if mean_sq == 0:
        raise ConfigError("cannot back off an all-zero waveform")

    def excess_db(log_s: float) -> float:
        out = rapp_amam(math.exp(log_s) * amplitudes, model)
        return 10 * math.log10(np.mean(out**2) / target)

    # linear-region guess, then bracket
    guess = math.log(math.sqrt(target / mean_sq) / model.small_signal_gain)
    lo, hi = guess - 1.0, guess + 1.0
    for _ in range(60):
        if excess_db(lo) < 0:
            break
        lo -= 2.0
    for _ in range(60):
        if excess_db(hi) > 0:
            break
        hi += 2.0
    else:
        raise ConfigError(f"PA output backoff {model.obo} dB is unreachable for this model")
    if excess_db(lo) >= 0:
        raise ConfigError("PA backoff solve failed to bracket the target")
    log_s = optimize.brentq(excess_db, lo, hi, xtol=1e-10)
    if abs(excess_db(log_s)) > tol_db:
        raise ConfigError("PA backoff solve did not converge")
    return math.exp(log_s)


def apply_pa(wave: Waveform, model: RappPaModel) -> Waveform:
    """Back off the input for the configured OBO, then apply AM-AM and AM-PM."""
    amp = np.abs(wave.samples)
    scale = backoff_scale(amp, model)
    a_in = scale * amp
    gain = np.divide(rapp_amam(a_in, model), a_in, out=np.full_like(a_in, model.small_signal_gain), where=a_in > 0)
    out = scale * wave.samples * gain * np.exp(1j * rapp_ampm(a_in, model))
    return wave.with_samples(out)


# --- multipath channel -----------------------------------------------------


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "awgn_only"  # or "tdl"
    rms_delay_spread: float = 10e-9
    k_factor_db: float = 3.0
    max_excess_factor: float = 8.0

    def __post_init__(self):
        if self.kind not in ("awgn_only", "tdl"):
            raise ConfigError(f"unknown channel kind {self.kind!r}")
        if self.rms_delay_spread < 0:
            raise ConfigError("channel_rms_delay_spread must be non-negative")


@dataclass(frozen=True)
class TdlChannel:
    tap_delays: np.ndarray
    tap_gains: np.ndarray
    realization_seed: int = 0

    def delay_samples(self, sample_rate: float) -> np.ndarray:
        return np.rint(np.asarray(self.tap_delays) * sample_rate).astype(int)


def rms_delay_spread(delays, powers) -> float:
    powers = np.asarray(powers, dtype=float)
    delays = np.asarray(delays, dtype=float)
    w = powers / powers.sum()
    mean = np.sum(w * delays)
    return float(np.sqrt(max(np.sum(w * delays**2) - mean**2, 0.0)))


def expected_pdp(config: ChannelConfig, profile: UpclockProfile) -> tuple[np.ndarray, np.ndarray]:
    """Mean tap powers on the sample grid, calibrated to the configured RMS delay spread.

    LOS power K/(K+1) sits at delay 0; the Rayleigh cluster carries 1/(K+1)
    with an exponential profile whose decay constant is solved numerically.
    """
    ts = 1.0 / profile.sample_rate
    target = config.rms_delay_spread
    n_taps = max(2, int(math.ceil(config.max_excess_factor * target / ts)) + 1)
    delays = np.arange(n_taps) * ts
    k = 10 ** (config.k_factor_db / 10)
    if target == 0:
        return delays[:1], np.ones(1)

    def pdp(log_tau: float) -> np.ndarray:
        w = np.exp(-delays / math.exp(log_tau))
        p = w / w.sum() / (k + 1)
        p[0] += k / (k + 1)
        return p

    def err(log_tau: float) -> float:
        return rms_delay_spread(delays, pdp(log_tau)) - target

    lo, hi = math.log(ts * 1e-3), math.log(ts * 1e4)
    if err(hi) < 0:
        raise ConfigError("channel_rms_delay_spread is unreachable with this K-factor and tap span")
    return delays, pdp(optimize.brentq(err, lo, hi, xtol=1e-12))


def cr_channel_realization(seed: int, profile: UpclockProfile, config: ChannelConfig | None = None) -> TdlChannel:
    """Unit-energy conference-room-like TDL draw (LOS tap + Rayleigh cluster)."""
    config = config or ChannelConfig()
    if config.kind == "awgn_only":
        return TdlChannel(np.zeros(1), np.ones(1, dtype=complex), seed)
    delays, powers = expected_pdp(config, profile)
    rng = np.random.default_rng(seed)
    k = 10 ** (config.k_factor_db / 10)
    cluster = powers.copy()
    cluster[0] -= k / (k + 1)
    gains = np.sqrt(cluster / 2) * (rng.standard_normal(delays.size) + 1j * rng.standard_normal(delays.size))
    gains[0] += math.sqrt(k / (k + 1))
    gains /= np.sqrt(np.sum(np.abs(gains) ** 2))
    return TdlChannel(delays, gains, seed)


def apply_channel(wave: Waveform, ch: TdlChannel) -> Waveform:
    """Linear convolution; output grows by the largest tap delay."""
    d = ch.delay_samples(wave.sample_rate)
    if d.size == 1 and d[0] == 0 and ch.tap_gains[0] == 1:
        return wave
    if d.max() >= len(wave):
        raise ValueError("tap delays must be shorter than the waveform")
    h = np.zeros(d.max() + 1, dtype=complex)
    np.add.at(h, d, ch.tap_gains)
    return wave.with_samples(np.convolve(wave.samples, h))


# --- AWGN ------------------------------------------------------------------


def add_awgn(wave: Waveform, snr_db: float, rng: np.random.Generator) -> Waveform:
    """Circular Gaussian noise of variance 10^(-snr/10) per sample (unit-power signal)."""
    if math.isinf(snr_db) and snr_db > 0:
        return wave
    var = 10 ** (-snr_db / 10)
    n = len(wave)
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(var / 2)
    return wave.with_samples(wave.samples + noise)


# --- chain -----------------------------------------------------------------


@dataclass(frozen=True)
class ImpairmentModel:
    name: str = "ideal"
    pa: RappPaModel | None = None
    cfo: CfoSpec | None = None
    phase_noise: PhaseNoiseModel | None = None
    pn_both_sides: bool = False
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    @classmethod
    def ideal(cls) -> ImpairmentModel:
        return cls()

    @classmethod
    def full(cls, name: str = "full") -> ImpairmentModel:
        return cls(name, RappPaModel(), CfoSpec(), PhaseNoiseModel())


@dataclass
class ImpairmentTrace:
    """Ground truth the harness may hand to a genie receiver."""

    cfo: float = 0.0
    channel: TdlChannel | None = None
    noise_var: float = 0.0
    pa_scale: float = 1.0


def apply_impairments(
    wave: Waveform,
    imp: ImpairmentModel,
    profile: UpclockProfile,
    carrier_freq: float,
    snr_db: float,
    rng: np.random.Generator,
) -> tuple[Waveform, ImpairmentTrace]:
    """Run the enabled stages in fixed order.

    Each stage draws from its own child of ``rng``, so toggling one stage does
    not change the random draws of the others (paired ideal/impaired runs).
    """
    cfo_rng, pn_rng, channel_rng, noise_rng = rng.spawn(4)
    trace = ImpairmentTrace(noise_var=0.0 if math.isinf(snr_db) else 10 ** (-snr_db / 10))
    if imp.pa is not None:
        wave = apply_pa(wave, imp.pa)
        # fixed linear gain back to unit data power so the SNR axis stays per-sample
        trace.pa_scale = 1 / math.sqrt(wave.data_power())
        wave = wave.with_samples(wave.samples * trace.pa_scale)
    if imp.cfo is not None:
        trace.cfo = draw_cfo(imp.cfo, carrier_freq, cfo_rng)
        wave = apply_cfo(wave, trace.cfo)
    if imp.phase_noise is not None and imp.phase_noise.enabled:
        phases = gen_phase_noise(len(wave), wave.sample_rate, imp.phase_noise, pn_rng)
        if imp.pn_both_sides:
            phases = phases + gen_phase_noise(len(wave), wave.sample_rate, imp.phase_noise, pn_rng)
        wave = apply_phase_noise(wave, phases)
    if imp.channel.kind != "awgn_only":
        trace.channel = cr_channel_realization(int(channel_rng.integers(2**63)), profile, imp.channel)
        wave = apply_channel(wave, trace.channel)
    wave = add_awgn(wave, snr_db, noise_rng)
    return wave, trace
