"""Packet-error-rate simulation of 802.11ac VHT PPDUs upclocked to mmWave carriers."""

__version__ = "0.1.0"

from .coding import BACKEND
from .harness import (
    PerCurve,
    PerPoint,
    StopRule,
    SweepSpec,
    derive_trial_seed,
    emit_csv,
    read_csv,
    run_sweep,
    run_trial,
    threshold_snr,
    wilson_interval,
)
from .impairments import (
    CfoMode,
    CfoSpec,
    ChannelConfig,
    ImpairmentModel,
    PhaseNoiseModel,
    RappPaModel,
    apply_impairments,
)
from .phy import (
    BaseStandard,
    ConfigError,
    PpduConfig,
    cfo_bound,
    cfo_threshold_factor,
    make_config,
    make_upclock_profile,
    mcs_params,
    ppdu_geometry,
    stf_cfo_range,
)
from .rx import RxConfig, recover_psdu
from .tx import Waveform, assemble_ppdu

__all__ = [
    "BACKEND",
    "BaseStandard",
    "CfoMode",
    "CfoSpec",
    "ChannelConfig",
    "ConfigError",
    "ImpairmentModel",
    "PerCurve",
    "PerPoint",
    "PhaseNoiseModel",
    "PpduConfig",
    "RappPaModel",
    "RxConfig",
    "StopRule",
    "SweepSpec",
    "Waveform",
    "apply_impairments",
    "assemble_ppdu",
    "cfo_bound",
    "cfo_threshold_factor",
    "derive_trial_seed",
    "emit_csv",
    "make_config",
    "make_upclock_profile",
    "mcs_params",
    "ppdu_geometry",
    "read_csv",
    "recover_psdu",
    "run_sweep",
    "run_trial",
    "stf_cfo_range",
    "threshold_snr",
    "wilson_interval",
]
