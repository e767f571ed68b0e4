"""Fast built-in invariant checks behind ``upclocksim validate``."""

from __future__ import annotations

import math

import numpy as np

from . import coding
from .harness import run_trial, wilson_interval
from .impairments import (
    ImpairmentModel,
    PhaseNoiseModel,
    RappPaModel,
    apply_impairments,
    apply_pa,
    phase_noise_psd,
    rapp_amam,
)
from .phy import (
    SUPPORTED_FACTORS,
    SUPPORTED_MCS,
    BaseStandard,
    cfo_bound,
    cfo_resolvable,
    make_config,
    make_upclock_profile,
    mcs_params,
    ppdu_geometry,
)
from .rx import RxConfig
from .tx import assemble_ppdu


def _profiles():
    profile_ok = True
    for base in BaseStandard:
        for f in SUPPORTED_FACTORS:
            p = make_upclock_profile(base, f)
            profile_ok &= p.sample_rate == p.idft_size * p.subcarrier_spacing
            profile_ok &= math.isclose(p.idft_period * p.subcarrier_spacing, 1.0, rel_tol=1e-15)
            profile_ok &= p.cp_period == p.idft_period / 4
    return profile_ok


def _mcs():
    return [mcs_params(m).n_dbps for m in SUPPORTED_MCS] == [26, 52, 156]


def _geometry():
    ok = True
    for m in SUPPORTED_MCS:
        for length in (1, 100, 4096):
            cfg = make_config(m, 8, length)
            g = ppdu_geometry(cfg)
            ok &= g.n_sym * cfg.mcs.n_dbps >= 22 + 8 * length
            ok &= (g.n_pad_bits == 0) == (g.n_sym * cfg.mcs.n_dbps == 22 + 8 * length)
    return ok


def _cfo_threshold():
    bound = cfo_bound(73.44e9, 40)
    verdicts = {f: cfo_resolvable(make_upclock_profile("AC", f), 73.44e9, 40) for f in (4, 8, 16)}
    return verdicts == {4: False, 8: True, 16: True} and math.isclose(bound, 2.9376e6)


def _scrambler():
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, 1000, dtype=np.uint8)
    return all(np.array_equal(coding.scramble(coding.scramble(bits, s), s), bits) for s in range(128))


def _interleaver():
    ok = True
    for m in SUPPORTED_MCS:
        p = mcs_params(m)
        perm = coding.interleaver_permutation(p.n_cbps, p.bits_per_subcarrier)
        ok &= np.array_equal(np.sort(perm), np.arange(p.n_cbps))
    return ok


def _loopback():
    ok = True
    for m in SUPPORTED_MCS:
        for f in (4, 8, 16):
            cfg = make_config(m, f, 300)
            record, _ = run_trial(cfg, ImpairmentModel.ideal(), RxConfig(), seed=7 + m + f)
            ok &= not record.packet_error and record.bit_errors == 0
    return ok


def _identity_chain():
    cfg = make_config(4, 8, 200)
    wave = assemble_ppdu(bytes(range(200)), cfg)
    out, _ = apply_impairments(wave, ImpairmentModel.ideal(), cfg.profile, cfg.carrier_freq, math.inf,
                               np.random.default_rng(0))
    return np.array_equal(out.samples, wave.samples)


def _pa_backoff():
    cfg = make_config(4, 8, 2000)
    wave = assemble_ppdu(np.random.default_rng(3).integers(0, 256, 2000, dtype=np.uint8).tobytes(), cfg)
    model = RappPaModel()
    out = apply_pa(wave, model)
    measured = 10 * np.log10(np.mean(np.abs(out.samples) ** 2) / model.sat_amplitude**2)
    bounded = np.all(np.abs(out.samples) <= model.sat_amplitude + 1e-12)
    return abs(measured + model.obo) <= 0.1 and bounded and rapp_amam(0.0, model) == 0


def _pn_psd():
    m = PhaseNoiseModel()
    return math.isclose(float(phase_noise_psd(m, 0.0)), -93.0) and abs(float(phase_noise_psd(m, 1e12)) + 133) < 1e-6


def _wilson():
    lo, hi = wilson_interval(0, 100)
    return lo == 0 and 0.036 < hi < 0.038


CHECKS = {
    "profile invariants": _profiles,
    "MCS table": _mcs,
    "PPDU geometry": _geometry,
    "CFO resolvability (x4 fails, x8/x16 pass)": _cfo_threshold,
    "scrambler involution": _scrambler,
    "interleaver bijection": _interleaver,
    "loopback identity (all MCS x factor)": _loopback,
    "impairment chain identity when disabled": _identity_chain,
    "PA output backoff": _pa_backoff,
    "phase-noise PSD anchors": _pn_psd,
    "Wilson interval": _wilson,
}


def run_checks(echo=print) -> bool:
    all_ok = True
    for name, fn in CHECKS.items():
        try:
            ok = bool(fn())
        except Exception as exc:  # report, keep going
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        echo(f"{'PASS' if ok else 'FAIL'}  {name}")
        all_ok &= ok
    return all_ok
