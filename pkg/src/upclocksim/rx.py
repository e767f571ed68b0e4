"""Receive chain: impaired Waveform back to PSDU bits plus diagnostics."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coding
from .phy import (
    LTF_LEN,
    N_CP,
    N_FFT,
    PREAMBLE_LEN,
    SERVICE_BITS,
    STF_LEN,
    STF_PERIOD,
    SYMBOL_LEN,
    TONE_PLAN,
    Modulation,
    PpduConfig,
    UpclockProfile,
    ppdu_geometry,
)
from .tx import (
    L_LTF_SCALE,
    VHT_LTF_SCALE,
    constellation,
    dft,
    encode_data_symbols,
    l_ltf_tones,
    pilot_values,
    vht_ltf_tones,
)

log = logging.getLogger(__name__)

ERASURE_THRESHOLD = 1e-12
DETECTION_THRESHOLD = 0.75
_LLR_CLIP = 1e8
_MIN_NOISE_VAR = 1e-10


class CfoCorrection(enum.Enum):
    OFF = "off"
    AUTOCORRELATION = "autocorrelation"
    GENIE = "genie"


class Timing(enum.Enum):
    ESTIMATED = "estimated"
    GENIE = "genie"


class NoiseVarSource(enum.Enum):
    GENIE = "genie"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class RxConfig:
    cfo_correction: CfoCorrection = CfoCorrection.AUTOCORRELATION
    pilot_cpe_tracking: bool = True
    timing: Timing = Timing.GENIE
    equalizer: str = "zero_forcing"
    noise_var_source: NoiseVarSource = NoiseVarSource.GENIE

    def __post_init__(self):
        if self.equalizer != "zero_forcing":
            raise ValueError(f"unsupported equalizer {self.equalizer!r}")


@dataclass(frozen=True)
class GenieInfo:
    """Ground truth from the harness; only read when an RxConfig option asks for it."""

    start: int = 0
    cfo: float = 0.0
    noise_var: float = 0.0


@dataclass
class RxResult:
    detected: bool
    psdu_bits: np.ndarray
    bit_errors: int
    packet_error: bool
    cfo_estimate: float = 0.0
    evm_db: float = math.nan
    equalized_symbols: np.ndarray | None = None
    detection_index: int | None = None
    reason: str = ""
    stages: list[str] = field(default_factory=list)


# --- synchronization ------------------------------------------------------

def _lag_metric(x: np.ndarray, lag: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding lag correlation and its normalized magnitude (Schmidl-Cox style)."""
    prod = x[lag:] * np.conj(x[:-lag])
    energy = np.abs(x[lag:]) ** 2
    c = np.concatenate([[0], np.cumsum(prod)])
    e = np.concatenate([[0], np.cumsum(energy)])
    corr = c[window:] - c[:-window]
    power = e[window:] - e[:-window]
    with np.errstate(divide="ignore", invalid="ignore"):
        metric = np.where(power > 0, np.abs(corr) / power, 0.0)
    return corr, metric


def detect_packet(samples, profile: UpclockProfile | None = None, threshold: float = DETECTION_THRESHOLD) -> int | None:
    """First index where the lag-16 autocorrelation metric stays above threshold.

    The metric must hold for at least half an STF repetition (8 samples).
    """
    x = np.asarray(samples, dtype=complex)
    lag = STF_PERIOD
    window = 2 * STF_PERIOD
    if x.size < lag + window:
        return None
    _, metric = _lag_metric(x, lag, window)
    above = metric > threshold
    run = STF_PERIOD // 2
    if above.size < run:
        return None
    counts = np.convolve(above.astype(np.int32), np.ones(run, dtype=np.int32), mode="valid")
    hits = np.flatnonzero(counts == run)
    return int(hits[0]) if hits.size else None


def _lag_phase_cfo(x: np.ndarray, lag: int, sample_rate: float) -> float:
    corr = np.sum(x[lag:] * np.conj(x[:-lag]))
    return float(np.angle(corr) * sample_rate / (2 * np.pi * lag))


def estimate_cfo_coarse(stf_samples, profile: UpclockProfile) -> float:
    """CFO from the lag-16 STF autocorrelation; unambiguous within +-stf_cfo_range."""
    return _lag_phase_cfo(np.asarray(stf_samples, dtype=complex), STF_PERIOD, profile.sample_rate)


def estimate_cfo_fine(ltf_samples, profile: UpclockProfile) -> float:
    """CFO from the two L-LTF repetitions (lag 64); range +-subcarrier_spacing/2."""
    return _lag_phase_cfo(np.asarray(ltf_samples, dtype=complex), N_FFT, profile.sample_rate)


def _derotate(x: np.ndarray, offset: float, sample_rate: float, start: int = 0) -> np.ndarray:
    if offset == 0:
        return x
    n = np.arange(start, start + x.size)
    return x * np.exp(-2j * np.pi * offset * n / sample_rate)


# --- per-tone processing ---------------------------------------------------

def estimate_channel(ltf_tones, known_ltf) -> np.ndarray:
    """Least-squares single-snapshot estimate on tones where the training is nonzero."""
    ltf_tones = np.asarray(ltf_tones, dtype=complex)
    known_ltf = np.asarray(known_ltf, dtype=complex)
    h = np.zeros(np.broadcast(ltf_tones, known_ltf).shape, dtype=complex)
    nz = known_ltf != 0
    h[..., nz] = ltf_tones[..., nz] / known_ltf[nz]
    return h


def equalize(symbol_tones, h) -> tuple[np.ndarray, np.ndarray]:
    """Zero-forcing division. Returns (equalized, erased) with erased tones set to 0."""
    symbol_tones = np.asarray(symbol_tones, dtype=complex)
    h = np.asarray(h, dtype=complex)
    erased = np.abs(h) < ERASURE_THRESHOLD
    safe = np.where(erased, 1.0, h)
    eq = np.where(erased, 0.0, symbol_tones / safe)
    return eq, np.broadcast_to(erased, eq.shape)


def track_cpe(pilot_tones, expected_pilots) -> np.ndarray:
    """Per-symbol common phase: angle of sum(pilots * conj(expected)) along the last axis."""
    return np.angle(np.sum(np.asarray(pilot_tones) * np.conj(expected_pilots), axis=-1))


def demap_llr(symbols, modulation: Modulation, noise_var) -> np.ndarray:
    """Max-log LLRs, ``bits_per_subcarrier`` per symbol; positive favours bit 0.

    LLR_i = (min_{b_i=1} |y-s|^2 - min_{b_i=0} |y-s|^2) / noise_var
    """
    symbols = np.asarray(symbols, dtype=complex)
    nv = np.broadcast_to(np.maximum(np.asarray(noise_var, dtype=float), _MIN_NOISE_VAR), symbols.shape).reshape(-1)
    y = symbols.reshape(-1)
    pts = constellation(modulation)
    nb = modulation.bits_per_subcarrier
    d2 = np.abs(y[:, None] - pts[None, :]) ** 2
    idx = np.arange(pts.size)
    llr = np.empty((y.size, nb))
    for i in range(nb):
        one = ((idx >> i) & 1).astype(bool)
        llr[:, i] = (d2[:, one].min(axis=1) - d2[:, ~one].min(axis=1)) / nv
    return np.clip(llr, -_LLR_CLIP, _LLR_CLIP).reshape(-1)


def evm_db(received, reference) -> float:
    received = np.asarray(received)
    reference = np.asarray(reference)
    err = np.mean(np.abs(received - reference) ** 2)
    return float(10 * np.log10(err / np.mean(np.abs(reference) ** 2))) if err > 0 else -math.inf


# --- full pipeline ---------------------------------------------------------

def _fail(n_bits: int, reason: str, stages: list[str], **kw) -> RxResult:
    log.debug("packet lost: %s", reason)
    return RxResult(False, np.zeros(0, dtype=np.uint8), n_bits, True, reason=reason, stages=stages, **kw)


def recover_psdu(
    wave,
    cfg: PpduConfig,
    rx: RxConfig | None = None,
    truth=None,
    genie: GenieInfo | None = None,
    keep_symbols: bool = False,
) -> RxResult:
    """Detect, synchronize, equalize, demap and decode one PPDU.

    ``truth`` is the transmitted PSDU (bytes) used for error counting and EVM.
    """
    rx = rx or RxConfig()
    genie = genie or GenieInfo()
    profile = cfg.profile
    fs = profile.sample_rate
    geom = ppdu_geometry(cfg)
    n_psdu_bits = 8 * cfg.psdu_length
    stages: list[str] = []
    x = np.asarray(getattr(wave, "samples", wave), dtype=complex)

    det = detect_packet(x, profile)
    stages.append(f"detect: index={det}")
    if rx.timing is Timing.GENIE:
        start = genie.start
    else:
        if det is None:
            return _fail(n_psdu_bits, "no packet detected", stages)
        start = _fine_timing(x, det)
        stages.append(f"timing: start={start}")
    if start < 0 or start + geom.total_samples > x.size:
        return _fail(n_psdu_bits, "packet truncated", stages, detection_index=det)

    # CFO
    cfo_est = 0.0
    if rx.cfo_correction is CfoCorrection.GENIE:
        cfo_est = genie.cfo
    elif rx.cfo_correction is CfoCorrection.AUTOCORRELATION:
        stf = x[start + STF_PERIOD : start + STF_LEN]
        coarse = estimate_cfo_coarse(stf, profile)
        ltf0 = start + STF_LEN + 2 * N_CP
        ltf = _derotate(x[ltf0 : ltf0 + 2 * N_FFT], coarse, fs, ltf0)
        fine = estimate_cfo_fine(ltf, profile)
        cfo_est = coarse + fine
        stages.append(f"cfo: coarse={coarse:.1f} Hz fine={fine:.1f} Hz")
    seg = x[start : start + geom.total_samples]
    seg = _derotate(seg, cfo_est, fs, start)

    # channel and noise
    ltf0 = STF_LEN + 2 * N_CP
    l_ltf = dft(seg[ltf0 : ltf0 + 2 * N_FFT].reshape(2, N_FFT))
    vht0 = STF_LEN + LTF_LEN + N_CP
    h = estimate_channel(dft(seg[vht0 : vht0 + N_FFT]), vht_ltf_tones())
    # average in both L-LTF repetitions on the legacy tones, rescaled to the VHT field gain
    h_legacy = estimate_channel(l_ltf.mean(axis=0), l_ltf_tones()) * (VHT_LTF_SCALE / L_LTF_SCALE)
    legacy = l_ltf_tones() != 0
    h[legacy] = (h[legacy] + 2 * h_legacy[legacy]) / 3
    if rx.noise_var_source is NoiseVarSource.GENIE:
        noise_var = genie.noise_var
    else:
        occupied = l_ltf_tones() != 0
        noise_var = float(np.mean(np.abs(l_ltf[0, occupied] - l_ltf[1, occupied]) ** 2) / 2)
    stages.append(f"noise_var={noise_var:.3e}")

    # data symbols
    body = seg[PREAMBLE_LEN:].reshape(geom.n_sym, SYMBOL_LEN)[:, N_CP:]
    tones = dft(body)
    data_bins = TONE_PLAN.data_bins
    pilot_bins = TONE_PLAN.pilot_bins
    eq_data, erased = equalize(tones[:, data_bins], h[data_bins])
    if rx.pilot_cpe_tracking:
        eq_pilots, _ = equalize(tones[:, pilot_bins], h[pilot_bins])
        cpe = track_cpe(eq_pilots, pilot_values(geom.n_sym))
        eq_data = eq_data * np.exp(-1j * cpe)[:, None]
        stages.append(f"cpe: rms={np.sqrt(np.mean(cpe ** 2)):.3e} rad")

    # noise on each data tone after ZF
    h_data = h[data_bins]
    tone_var = np.where(np.abs(h_data) < ERASURE_THRESHOLD, np.inf, noise_var / np.maximum(np.abs(h_data) ** 2, ERASURE_THRESHOLD))
    llr = demap_llr(eq_data, cfg.mcs.modulation, np.broadcast_to(tone_var, eq_data.shape))
    nb = cfg.mcs.bits_per_subcarrier
    llr[np.repeat(erased.reshape(-1), nb)] = 0.0
    llr = np.nan_to_num(llr)

    deint = coding.deinterleave(llr, cfg.mcs.n_cbps, nb)
    decoded = coding.viterbi_decode(deint, cfg.mcs.code_rate)
    bits = coding.descramble(decoded, cfg.scrambler_init)
    psdu_bits = bits[SERVICE_BITS : SERVICE_BITS + n_psdu_bits]
    stages.append(f"decoded {psdu_bits.size} PSDU bits")

    bit_errors = 0
    packet_error = False
    evm = math.nan
    if truth is not None:
        ref_bits = np.unpackbits(np.frombuffer(bytes(truth), dtype=np.uint8), bitorder="little")
        bit_errors = int(np.count_nonzero(ref_bits != psdu_bits))
        packet_error = bit_errors > 0
        ref = encode_data_symbols(truth, cfg).reshape(eq_data.shape)
        evm = evm_db(eq_data, ref)
        stages.append(f"bit_errors={bit_errors} evm={evm:.2f} dB")
    return RxResult(
        detected=det is not None or rx.timing is Timing.GENIE,
        psdu_bits=psdu_bits,
        bit_errors=bit_errors,
        packet_error=packet_error,
        cfo_estimate=cfo_est,
        evm_db=evm,
        equalized_symbols=eq_data if keep_symbols else None,
        detection_index=det,
        stages=stages,
    )


def _fine_timing(x: np.ndarray, coarse: int) -> int:
    """Locate the L-LTF by cross-correlation near the detected STF and back off to the packet start."""
    from .tx import idft

    ltf_sym = idft(l_ltf_tones())
    lo = max(coarse, 0)
    hi = min(x.size - N_FFT, coarse + STF_LEN + 2 * N_CP + 2 * N_FFT)
    if hi <= lo:
        return coarse
    window = x[lo : hi + N_FFT]
    corr = np.abs(np.correlate(window, ltf_sym, mode="valid"))
    # first LTF repetition peak; the second sits 64 samples later
    peak = int(np.argmax(corr[:-N_FFT] + corr[N_FFT:])) if corr.size > N_FFT else int(np.argmax(corr))
    return lo + peak - (STF_LEN + 2 * N_CP)


def write_constellation(path, symbols: np.ndarray) -> Path:
    """Text dump: re, im, symbol_index, tone_index (one row per tone use)."""
    path = Path(path)
    symbols = np.asarray(symbols)
    n_sym, n_tones = symbols.shape
    tone_ids = np.asarray(TONE_PLAN.data_tone_indices)
    with path.open("w") as fh:
        fh.write("re,im,symbol_index,tone_index\n")
        for s in range(n_sym):
            for t in range(n_tones):
                v = symbols[s, t]
                fh.write(f"{v.real:.6e},{v.imag:.6e},{s},{tone_ids[t]}\n")
    return path


def read_constellation(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_sym = int(data[:, 2].max()) + 1 if data.size else 0
    return (data[:, 0] + 1j * data[:, 1]).reshape(n_sym, -1)
