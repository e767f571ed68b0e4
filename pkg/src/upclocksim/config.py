"""INI-style run configuration with sections [ppdu], [impairments], [rx], [sweep].

Every key is declared once in ``SCHEMA``; the CLI derives one override flag
per key from the same table (``pa_obo_db`` -> ``--pa-obo-db``).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .harness import StopRule, SweepSpec
from .impairments import (
    CfoMode,
    CfoSpec,
    ChannelConfig,
    ImpairmentModel,
    PhaseNoiseModel,
    PsdAnchor,
    RappPaModel,
)
from .phy import SUPPORTED_FACTORS, SUPPORTED_MCS, ConfigError
from .rx import CfoCorrection, NoiseVarSource, RxConfig, Timing


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(",", " ").split())


def _snr_grid(text: str) -> tuple[float, ...]:
    """Either a list ``0, 5, 10`` or a range ``start:stop:step`` (stop inclusive)."""
    text = str(text).strip()
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("snr grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(t) for t in text.replace(",", " ").split())


def _int_auto(text: str) -> int:
    return int(str(text), 0)


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    parse: Callable[[str], Any]
    default: str
    help: str


SCHEMA: tuple[Key, ...] = (
    Key("ppdu", "psdu_length", int, "4096", "PSDU length in bytes"),
    Key("ppdu", "carrier_freq", float, "73.44e9", "carrier frequency in Hz"),
    Key("ppdu", "scrambler_init", _int_auto, "93", "nonzero 7-bit scrambler seed"),
    Key("ppdu", "genie_signaling", _bool, "true", "receiver gets MCS/length out of band"),
    Key("impairments", "name", str, "full", "label written to the CSV impairments column"),
    Key("impairments", "include_ideal", _bool, "false", "also run an all-off 'ideal' profile on paired seeds"),
    Key("impairments", "pa", _bool, "true", "enable the Rapp PA"),
    Key("impairments", "pa_gain", float, "1.0", "small-signal gain (linear)"),
    Key("impairments", "pa_sat_amplitude", float, "1.0", "saturated output amplitude"),
    Key("impairments", "pa_smoothness", float, "0.81", "Rapp smoothness p"),
    Key("impairments", "pa_ampm_alpha", float, "0.0", "AM-PM alpha (0 disables AM-PM)"),
    Key("impairments", "pa_ampm_beta", float, "1.0", "AM-PM beta"),
    Key("impairments", "pa_ampm_q1", float, "2.0", "AM-PM q1"),
    Key("impairments", "pa_ampm_q2", float, "2.0", "AM-PM q2"),
    Key("impairments", "pa_obo_db", float, "8.0", "output backoff in dB"),
    Key("impairments", "cfo", _bool, "true", "enable carrier frequency offset"),
    Key("impairments", "cfo_mode", CfoMode, "fixed", "fixed | uniform_worst_case"),
    Key("impairments", "cfo_ppm_total", float, "40.0", "combined TX+RX oscillator error in ppm"),
    Key("impairments", "cfo_fixed_offset", float, "2.9376e6", "offset in Hz for fixed mode"),
    Key("impairments", "phase_noise", _bool, "true", "enable oscillator phase noise"),
    Key("impairments", "pn_pole_freq", float, "1e6", "PSD pole frequency in Hz"),
    Key("impairments", "pn_zero_freq", float, "100e6", "PSD zero frequency in Hz"),
    Key("impairments", "pn_psd0_dbc", float, "-93.0", "PSD anchor level in dBc/Hz"),
    Key("impairments", "pn_anchor", PsdAnchor, "dc", "dc: level at f=0 | floor: level beyond the zero"),
    Key("impairments", "pn_both_sides", _bool, "false", "independent PN at TX and RX"),
    Key("impairments", "channel", str, "awgn_only", "awgn_only | tdl"),
    Key("impairments", "channel_rms_delay_spread", float, "10e-9", "TDL RMS delay spread in s"),
    Key("impairments", "channel_k_factor_db", float, "3.0", "TDL LOS K-factor in dB"),
    Key("rx", "cfo_correction", CfoCorrection, "autocorrelation", "off | autocorrelation | genie"),
    Key("rx", "pilot_cpe_tracking", _bool, "true", "per-symbol common phase correction from pilots"),
    Key("rx", "timing", Timing, "genie", "genie | estimated"),
    Key("rx", "equalizer", str, "zero_forcing", "zero_forcing"),
    Key("rx", "noise_var_source", NoiseVarSource, "genie", "genie | estimated"),
    Key("sweep", "snr_grid", _snr_grid, "0:30:2.5", "list or start:stop:step in dB"),
    Key("sweep", "mcs_list", _int_list, "0, 1, 4", "MCS indices"),
    Key("sweep", "factors", _int_list, "4, 8, 16", "upclock factors"),
    Key("sweep", "min_trials", int, "200", "stop rule: minimum trials per point"),
    Key("sweep", "max_trials", int, "5000", "stop rule: maximum trials per point"),
    Key("sweep", "target_errors", int, "100", "stop rule: stop after this many packet errors"),
    Key("sweep", "master_seed", _int_auto, "20240101", "64-bit master seed"),
    Key("sweep", "workers", int, "1", "worker processes"),
)

KEYS = {k.name: k for k in SCHEMA}
SECTIONS = ("ppdu", "impairments", "rx", "sweep")
BUNDLED = ("paper.cfg",)


def bundled_config(name: str) -> Path | None:
    if Path(name).name in BUNDLED:
        ref = resources.files("upclocksim") / "configs" / Path(name).name
        return Path(str(ref))
    return None


def read_config(path=None, overrides: dict[str, str] | None = None) -> dict[str, Any]:
    """Parse a config file plus ``key -> text`` overrides into typed values.

    Unknown sections or keys raise ConfigError naming the offender.
    """
    raw = {k.name: k.default for k in SCHEMA}
    if path is not None:
        p = Path(path)
        if not p.exists():
            p = bundled_config(str(path)) or p
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {p}: {exc.message.splitlines()[0]}") from None
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for name, value in parser.items(section):
                key = KEYS.get(name)
                if key is None or key.section != section:
                    raise ConfigError(f"unknown key '{name}' in [{section}]")
                raw[name] = value
    for name, value in (overrides or {}).items():
        if name not in KEYS:
            raise ConfigError(f"unknown key '{name}'")
        raw[name] = value
    typed = {}
    for name, text in raw.items():
        try:
            typed[name] = KEYS[name].parse(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for '{name}': {text!r} ({exc})") from None
    _check(typed)
    return typed


def _check(v: dict[str, Any]) -> None:
    for m in v["mcs_list"]:
        if m not in SUPPORTED_MCS:
            raise ConfigError(f"mcs_list: unsupported MCS {m}")
    for f in v["factors"]:
        if f not in SUPPORTED_FACTORS:
            raise ConfigError(f"factors: unsupported upclock factor {f}")
    if v["channel"] not in ("awgn_only", "tdl"):
        raise ConfigError(f"channel: unknown channel kind {v['channel']!r}")
    if v["workers"] < 1:
        raise ConfigError("workers must be at least 1")
    if not v["genie_signaling"]:
        raise ConfigError("genie_signaling: only genie signaling is implemented")


def impairment_model(v: dict[str, Any]) -> ImpairmentModel:
    pa = None
    if v["pa"]:
        pa = RappPaModel(v["pa_gain"], v["pa_sat_amplitude"], v["pa_smoothness"], v["pa_ampm_alpha"],
                         v["pa_ampm_beta"], v["pa_ampm_q1"], v["pa_ampm_q2"], v["pa_obo_db"])
    cfo = CfoSpec(v["cfo_mode"], v["cfo_ppm_total"], v["cfo_fixed_offset"]) if v["cfo"] else None
    if cfo is not None:
        cfo.validate(v["carrier_freq"])
    pn = None
    if v["phase_noise"]:
        pn = PhaseNoiseModel(v["pn_pole_freq"], v["pn_zero_freq"], v["pn_psd0_dbc"], v["pn_anchor"])
    channel = ChannelConfig(v["channel"], v["channel_rms_delay_spread"], v["channel_k_factor_db"])
    return ImpairmentModel(v["name"], pa, cfo, pn, v["pn_both_sides"], channel)


def rx_config(v: dict[str, Any]) -> RxConfig:
    return RxConfig(v["cfo_correction"], v["pilot_cpe_tracking"], v["timing"], v["equalizer"], v["noise_var_source"])


def sweep_spec(v: dict[str, Any]) -> SweepSpec:
    imp = impairment_model(v)
    profiles = [imp]
    if v["include_ideal"]:
        if imp.name == "ideal":
            raise ConfigError("name: 'ideal' is reserved when include_ideal is set")
        profiles.append(ImpairmentModel("ideal", channel=imp.channel))
    return SweepSpec(
        snr_grid=v["snr_grid"],
        mcs_list=v["mcs_list"],
        factors=v["factors"],
        impairments=tuple(profiles),
        stop=StopRule(v["min_trials"], v["max_trials"], v["target_errors"]),
        master_seed=v["master_seed"],
        psdu_length=v["psdu_length"],
        carrier_freq=v["carrier_freq"],
        scrambler_init=v["scrambler_init"],
        rx=rx_config(v),
    )
