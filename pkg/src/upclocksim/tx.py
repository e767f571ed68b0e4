"""Transmit chain: PSDU bytes to a unit-power complex baseband PPDU.

Preamble (genie signaling, no SIG fields)::

    L-STF (160) | L-LTF (32 CP + 2 x 64) | VHT-LTF (16 CP + 64) | data symbols (16 CP + 64 each)

Sample counts are the same for every upclock factor; only the sample rate
changes. DFTs are unitary (1/sqrt(N) both ways).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
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
    SYMBOL_LEN,
    TAIL_BITS,
    TONE_PLAN,
    Modulation,
    PpduConfig,
    TonePlan,
    UpclockProfile,
    ppdu_geometry,
)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float
    preamble_end: int = 0
    data_start: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray) -> Waveform:
        return replace(self, samples=samples)

    @property
    def data(self) -> np.ndarray:
        return self.samples[self.data_start :]

    def data_power(self) -> float:
        data = self.data
        return float(np.mean(np.abs(data) ** 2)) if data.size else 0.0


# --- constellations --------------------------------------------------------

_PAM4 = np.array([-3.0, 3.0, -1.0, 1.0])  # index b0 + 2*b1; b0b1 00:-3 01:-1 11:+1 10:+3


@lru_cache(maxsize=None)
def constellation(modulation: Modulation) -> np.ndarray:
    """Points indexed by the integer whose bit ``i`` is the ``i``-th mapped bit."""
    if modulation is Modulation.BPSK:
        pts = np.array([-1.0, 1.0], dtype=complex)
    elif modulation is Modulation.QPSK:
        idx = np.arange(4)
        pts = ((2 * (idx & 1) - 1) + 1j * (2 * ((idx >> 1) & 1) - 1)) / np.sqrt(2)
    else:
        idx = np.arange(16)
        pts = (_PAM4[idx & 3] + 1j * _PAM4[(idx >> 2) & 3]) / np.sqrt(10)
    pts = pts.astype(complex)
    pts.flags.writeable = False
    return pts


def map_symbols(bits, modulation: Modulation) -> np.ndarray:
    """Gray-map groups of bits (first bit of a group is the I-axis LSB) to unit-energy points."""
    nb = modulation.bits_per_subcarrier
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % nb:
        raise ValueError(f"bit count {bits.size} is not a multiple of {nb}")
    groups = bits.reshape(-1, nb)
    index = groups @ (1 << np.arange(nb))
    return constellation(modulation)[index]


# --- pilots and training sequences ----------------------------------------

PILOT_BASE = np.array([1.0, 1.0, 1.0, -1.0])
# Pilot polarity offset: L-SIG, VHT-SIG-A (2) and VHT-SIG-B precede the data.
PILOT_POLARITY_OFFSET = 4


@lru_cache(maxsize=None)
def pilot_polarity() -> np.ndarray:
    """127-entry polarity sequence: scrambler output (all-ones seed), 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * coding.lfsr_sequence(0x7F)


def pilot_values(n_sym: int, first_symbol: int = 0) -> np.ndarray:
    """(n_sym, 4) pilot values with VHT per-symbol rotation of the base pattern."""
    n = np.arange(first_symbol, first_symbol + n_sym)
    m = np.arange(4)
    base = PILOT_BASE[(m[None, :] + n[:, None]) % 4]
    pol = pilot_polarity()[(n + PILOT_POLARITY_OFFSET) % 127]
    return base * pol[:, None]


_LTF_52 = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1,
     0,
     1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1],
    dtype=float,
)  # tones -26..26

_STF_TONES = {
    -24: 1 + 1j, -20: -1 - 1j, -16: 1 + 1j, -12: -1 - 1j, -8: -1 - 1j, -4: 1 + 1j,
    4: -1 - 1j, 8: -1 - 1j, 12: 1 + 1j, 16: 1 + 1j, 20: 1 + 1j, 24: 1 + 1j,
}


def _grid(values_by_tone: dict[int, complex]) -> np.ndarray:
    grid = np.zeros(N_FFT, dtype=complex)
    for k, v in values_by_tone.items():
        grid[k % N_FFT] = v
    return grid


@lru_cache(maxsize=None)
def l_stf_tones() -> np.ndarray:
    return _grid({k: np.sqrt(13 / 6) * v for k, v in _STF_TONES.items()})


@lru_cache(maxsize=None)
def l_ltf_tones() -> np.ndarray:
    return _grid(dict(zip(range(-26, 27), _LTF_52)))


@lru_cache(maxsize=None)
def vht_ltf_tones() -> np.ndarray:
    """20 MHz VHT-LTF: the legacy LTF extended to tones +-27, +-28."""
    tones = dict(zip(range(-26, 27), _LTF_52))
    tones.update({-28: 1.0, -27: 1.0, 27: -1.0, 28: -1.0})
    return _grid(tones)


# --- OFDM ------------------------------------------------------------------

def idft(grid: np.ndarray) -> np.ndarray:
    return np.fft.ifft(grid, axis=-1) * np.sqrt(grid.shape[-1])


def dft(samples: np.ndarray) -> np.ndarray:
    return np.fft.fft(samples, axis=-1) / np.sqrt(samples.shape[-1])


def _tone_scale(grid: np.ndarray) -> float:
    # unit average time-domain power for a symbol with this tone loading
    return float(np.sqrt(grid.shape[-1] / np.sum(np.abs(grid) ** 2)))


# Expected sum |X|^2 for a data symbol: 52 unit-energy data tones + 4 pilots.
DATA_TONE_SCALE = float(np.sqrt(N_FFT / 56))
STF_SCALE = _tone_scale(l_stf_tones())
L_LTF_SCALE = _tone_scale(l_ltf_tones())
VHT_LTF_SCALE = _tone_scale(vht_ltf_tones())


def ofdm_modulate(
    data_symbols,
    plan: TonePlan = TONE_PLAN,
    profile: UpclockProfile | None = None,
    pilots: np.ndarray | None = None,
    cp: bool = True,
    scale: float = DATA_TONE_SCALE,
) -> np.ndarray:
    """Load tones, inverse-DFT and prepend a cyclic prefix, one symbol per row.

    ``pilots`` defaults to the VHT pilot sequence starting at data symbol 0.
    The profile only fixes the CP length (a quarter of the IDFT size).
    """
    n_data = len(plan.data_tone_indices)
    data_symbols = np.asarray(data_symbols, dtype=complex)
    if data_symbols.size % n_data:
        raise ValueError(f"{data_symbols.size} symbols is not a multiple of {n_data} data tones")
    n_sym = data_symbols.size // n_data
    if pilots is None:
        pilots = pilot_values(n_sym)
    n_fft = plan.idft_size
    grid = np.zeros((n_sym, n_fft), dtype=complex)
    grid[:, plan.data_bins] = data_symbols.reshape(n_sym, n_data)
    grid[:, plan.pilot_bins] = pilots
    body = idft(grid) * scale
    if cp:
        n_cp = profile.cp_samples if profile is not None else n_fft // 4
        body = np.concatenate([body[:, n_fft - n_cp :], body], axis=1)
    return body.reshape(-1)


def build_preamble(profile: UpclockProfile, cfg: PpduConfig | None = None) -> np.ndarray:
    """L-STF, L-LTF and one VHT-LTF, each scaled to unit average power.

    With genie signaling the SIG fields are not transmitted.
    """
    stf_sym = idft(l_stf_tones()) * STF_SCALE
    stf = np.tile(stf_sym, 3)[:STF_LEN]
    ltf_sym = idft(l_ltf_tones()) * L_LTF_SCALE
    ltf = np.concatenate([ltf_sym[-2 * N_CP :], ltf_sym, ltf_sym])
    vht_sym = idft(vht_ltf_tones()) * VHT_LTF_SCALE
    vht = np.concatenate([vht_sym[-N_CP:], vht_sym])
    out = np.concatenate([stf, ltf, vht])
    assert out.size == PREAMBLE_LEN and ltf.size == LTF_LEN
    return out


# --- PPDU assembly ---------------------------------------------------------

def psdu_to_bits(psdu) -> np.ndarray:
    """Bytes to bits, least significant bit first."""
    return np.unpackbits(np.frombuffer(bytes(psdu), dtype=np.uint8), bitorder="little")


def bits_to_psdu(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def data_field_bits(psdu, cfg: PpduConfig) -> np.ndarray:
    """SERVICE + PSDU + tail + pad, scrambled, with the tail forced back to zero."""
    geom = ppdu_geometry(cfg)
    payload = psdu_to_bits(psdu)
    if payload.size != 8 * cfg.psdu_length:
        raise ValueError(f"PSDU has {payload.size // 8} bytes, config expects {cfg.psdu_length}")
    bits = np.zeros(geom.n_data_bits, dtype=np.uint8)
    bits[SERVICE_BITS : SERVICE_BITS + payload.size] = payload
    scrambled = coding.scramble(bits, cfg.scrambler_init)
    tail = SERVICE_BITS + payload.size
    scrambled[tail : tail + TAIL_BITS] = 0
    return scrambled


def encode_data_symbols(psdu, cfg: PpduConfig) -> np.ndarray:
    """Constellation points of the data field, in tone order, before OFDM."""
    coded = coding.bcc_encode(data_field_bits(psdu, cfg), cfg.mcs.code_rate)
    inter = coding.interleave(coded, cfg.mcs.n_cbps, cfg.mcs.bits_per_subcarrier)
    return map_symbols(inter, cfg.mcs.modulation)


def assemble_ppdu(psdu, cfg: PpduConfig) -> Waveform:
    symbols = encode_data_symbols(psdu, cfg)
    data = ofdm_modulate(symbols, TONE_PLAN, cfg.profile)
    samples = np.concatenate([build_preamble(cfg.profile, cfg), data])
    samples /= np.sqrt(np.mean(np.abs(data) ** 2))
    return Waveform(samples, cfg.profile.sample_rate, PREAMBLE_LEN, PREAMBLE_LEN)


def data_symbol_count(wave: Waveform) -> int:
    return (len(wave) - wave.data_start) // SYMBOL_LEN


# --- waveform dump ---------------------------------------------------------

def write_waveform(path, wave: Waveform, **meta) -> Path:
    """Write interleaved little-endian float32 I/Q plus a ``.hdr`` sidecar."""
    path = Path(path)
    iq = np.empty(2 * len(wave), dtype="<f4")
    iq[0::2] = wave.samples.real
    iq[1::2] = wave.samples.imag
    path.write_bytes(iq.tobytes())
    header = {"sample_rate": repr(float(wave.sample_rate)), "n_samples": len(wave),
              "preamble_end": wave.preamble_end, "data_start": wave.data_start}
    header.update(meta)
    path.with_suffix(path.suffix + ".hdr").write_text("".join(f"{k} = {v}\n" for k, v in header.items()))
    return path


def read_waveform(path) -> tuple[Waveform, dict[str, str]]:
    path = Path(path)
    header = {}
    for line in path.with_suffix(path.suffix + ".hdr").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
    iq = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    wave = Waveform(iq[0::2] + 1j * iq[1::2], float(header["sample_rate"]),
                    int(header.get("preamble_end", 0)), int(header.get("data_start", 0)))
    return wave, header
