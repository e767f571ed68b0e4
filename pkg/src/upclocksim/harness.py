"""Monte-Carlo PER engine: trial seeding, stop rules, sweeps and CSV output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .impairments import ImpairmentModel, apply_impairments
from .phy import ConfigError, PpduConfig, make_config
from .rx import GenieInfo, RxConfig, recover_psdu
from .tx import assemble_ppdu

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
_MASK64 = (1 << 64) - 1


def derive_trial_seed(master_seed: int, config_hash: int, trial_index: int) -> int:
    """64-bit seed from a keyed hash of the three inputs; independent of execution order."""
    key = struct.pack("<QQQ", master_seed & _MASK64, config_hash & _MASK64, trial_index & _MASK64)
    return int.from_bytes(hashlib.blake2b(key, digest_size=8, person=b"upclocksim-seed").digest(), "little")


def _jsonable(obj):
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enum
        return obj.value
    if hasattr(obj, "numerator"):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    raise TypeError(type(obj))


def config_hash(*parts) -> int:
    """Stable 64-bit hash of dataclasses / plain values."""
    payload = json.dumps(
        [asdict(p) if hasattr(p, "__dataclass_fields__") else p for p in parts],
        sort_keys=True,
        default=_jsonable,
    )
    return int.from_bytes(hashlib.blake2b(payload.encode(), digest_size=8).digest(), "little")


# --- single trial ----------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    derived_seed: int
    cfo: float
    channel_seed: int
    packet_error: bool
    bit_errors: int
    evm_db: float
    reason: str = ""


def run_trial(
    cfg: PpduConfig,
    imp: ImpairmentModel,
    rx: RxConfig,
    seed: int,
    snr_db: float = math.inf,
    trial_index: int = 0,
    keep_symbols: bool = False,
):
    """One packet through TX, impairments and RX. Returns (TrialRecord, RxResult)."""
    root = np.random.default_rng(seed)
    psdu_rng, imp_rng = root.spawn(2)
    psdu = psdu_rng.integers(0, 256, cfg.psdu_length, dtype=np.uint8).tobytes()
    try:
        wave = assemble_ppdu(psdu, cfg)
        received, trace = apply_impairments(wave, imp, cfg.profile, cfg.carrier_freq, snr_db, imp_rng)
        genie = GenieInfo(start=0, cfo=trace.cfo, noise_var=trace.noise_var)
        result = recover_psdu(received, cfg, rx, psdu, genie, keep_symbols=keep_symbols)
    except (ValueError, ArithmeticError) as exc:
        log.debug("trial %d failed: %s", trial_index, exc)
        record = TrialRecord(trial_index, seed, math.nan, 0, True, 8 * cfg.psdu_length, math.nan, f"error: {exc}")
        return record, None
    record = TrialRecord(
        trial_index=trial_index,
        derived_seed=seed,
        cfo=trace.cfo,
        channel_seed=trace.channel.realization_seed if trace.channel is not None else 0,
        packet_error=result.packet_error,
        bit_errors=result.bit_errors,
        evm_db=result.evm_db,
        reason=result.reason,
    )
    return record, result


# --- statistics ------------------------------------------------------------


def wilson_interval(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """95% Wilson score interval; no trials gives the uninformative (0, 1)."""
    if not 0 <= errors <= max(trials, 0):
        raise ValueError(f"errors={errors} outside [0, trials={trials}]")
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    # clamp so that ci_low <= p <= ci_high survives rounding at p in {0, 1}
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass(frozen=True)
class PerPoint:
    snr_db: float
    trials: int
    errors: int

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")

    @property
    def per(self) -> float:
        return self.errors / self.trials if self.trials else math.nan

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials)

    @property
    def ci_low(self) -> float:
        return self.ci[0]

    @property
    def ci_high(self) -> float:
        return self.ci[1]


@dataclass
class PerCurve:
    mcs: int
    factor: int
    impairments: str
    points: list[PerPoint] = field(default_factory=list)

    @property
    def key(self) -> tuple[int, int, str]:
        return self.mcs, self.factor, self.impairments

    def snr(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    def values(self, which: str = "per") -> np.ndarray:
        return np.array([getattr(p, which) for p in self.points])


def threshold_snr(curve: PerCurve, target_per: float, which: str = "per") -> float | None:
    """Smallest SNR where the curve reaches ``target_per``, log-linear in PER.

    ``which`` selects ``per``, ``ci_low`` or ``ci_high``. A zero PER is floored
    at half an error over the point's trial count before taking the log.
    """
    if not 0 < target_per < 1:
        raise ValueError("target_per must lie in (0, 1)")
    pts = sorted(curve.points, key=lambda p: p.snr_db)
    if not pts:
        return None
    vals = [getattr(p, which) for p in pts]
    for i, (pt, v) in enumerate(zip(pts, vals)):
        if v <= target_per:
            if i == 0:
                return pt.snr_db
            prev, pv = pts[i - 1], vals[i - 1]
            lo = math.log10(pv)
            hi = math.log10(max(v, 0.5 / pt.trials))
            frac = (lo - math.log10(target_per)) / (lo - hi) if lo != hi else 1.0
            return prev.snr_db + frac * (pt.snr_db - prev.snr_db)
    return None


# --- sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class StopRule:
    min_trials: int = 200
    max_trials: int = 5000
    target_errors: int = 100

    def __post_init__(self):
        if not 1 <= self.min_trials <= self.max_trials:
            raise ConfigError("stop rule requires 1 <= min_trials <= max_trials")
        if self.target_errors < 1:
            raise ConfigError("target_errors must be at least 1")

    def done(self, trials: int, errors: int) -> bool:
        if trials >= self.max_trials:
            return True
        return trials >= self.min_trials and errors >= self.target_errors


@dataclass(frozen=True)
class SweepSpec:
    snr_grid: tuple[float, ...]
    mcs_list: tuple[int, ...] = (0, 1, 4)
    factors: tuple[int, ...] = (4, 8, 16)
    impairments: tuple[ImpairmentModel, ...] = (ImpairmentModel.full(),)
    stop: StopRule = StopRule()
    master_seed: int = 0
    psdu_length: int = 4096
    carrier_freq: float = 73.44e9
    scrambler_init: int = 0b1011101
    rx: RxConfig = RxConfig()

    def __post_init__(self):
        grid = tuple(float(s) for s in self.snr_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("snr_grid must be non-empty and strictly increasing")
        object.__setattr__(self, "snr_grid", grid)
        names = [imp.name for imp in self.impairments]
        if len(set(names)) != len(names):
            raise ConfigError("impairment profile names must be unique")


def point_hash(spec: SweepSpec, mcs: int, factor: int, snr_db: float) -> int:
    """Hash of everything that fixes a point, except the impairment profile.

    Leaving the profile out pairs ideal and impaired trials on the same seeds.
    """
    return config_hash(
        {"mcs": mcs, "factor": factor, "snr_db": snr_db, "psdu_length": spec.psdu_length,
         "carrier_freq": spec.carrier_freq, "scrambler_init": spec.scrambler_init},
        spec.rx,
    )


def _run_batch(args) -> list[tuple[int, bool]]:
    cfg, imp, rx, snr_db, seeds, first_index = args
    out = []
    for i, seed in enumerate(seeds):
        record, _ = run_trial(cfg, imp, rx, seed, snr_db, first_index + i)
        out.append((first_index + i, record.packet_error))
    return out


def run_point(spec, cfg, imp, snr_db, executor=None, batch: int = 16, workers: int = 1) -> PerPoint:
    """Run trials in index order until the stop rule fires.

    Trials are computed in batches (possibly in parallel); results are consumed
    strictly in index order and anything past the stopping index is discarded,
    so the outcome does not depend on the worker count.
    """
    h = point_hash(spec, cfg.mcs.index, cfg.profile.factor, snr_db)
    trials = errors = 0
    next_index = 0
    chunk = batch * max(workers, 1)
    while not spec.stop.done(trials, errors):
        n = min(chunk, spec.stop.max_trials - next_index)
        idx = range(next_index, next_index + n)
        seeds = [derive_trial_seed(spec.master_seed, h, i) for i in idx]
        jobs = [
            (cfg, imp, spec.rx, snr_db, seeds[k : k + batch], next_index + k) for k in range(0, n, batch)
        ]
        results = executor.map(_run_batch, jobs) if executor is not None else map(_run_batch, jobs)
        for _, err in sorted(r for res in results for r in res):
            trials += 1
            errors += int(err)
            if spec.stop.done(trials, errors):
                break
        next_index += n
    return PerPoint(snr_db, trials, errors)


def run_sweep(spec: SweepSpec, workers: int = 1, progress=None) -> list[PerCurve]:
    curves = []
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for imp in spec.impairments:
            for mcs in spec.mcs_list:
                for factor in spec.factors:
                    cfg = make_config(mcs, factor, spec.psdu_length, carrier_freq=spec.carrier_freq,
                                      scrambler_init=spec.scrambler_init)
                    if imp.cfo is not None:
                        imp.cfo.validate(cfg.carrier_freq)
                    curve = PerCurve(mcs, factor, imp.name)
                    for snr in spec.snr_grid:
                        point = run_point(spec, cfg, imp, snr, executor, workers=workers)
                        curve.points.append(point)
                        log.info("%s mcs=%d x%d snr=%.2f: %d/%d", imp.name, mcs, factor, snr, point.errors, point.trials)
                        if progress is not None:
                            progress(curve, point)
                    curves.append(curve)
    finally:
        if executor is not None:
            executor.shutdown()
    return curves


def merge_points(parts) -> PerPoint:
    """Sum per-worker partial counts for one SNR point; order-independent."""
    parts = list(parts)
    snrs = {p.snr_db for p in parts}
    if len(snrs) != 1:
        raise ValueError("cannot merge counts from different SNR points")
    return PerPoint(snrs.pop(), sum(p.trials for p in parts), sum(p.errors for p in parts))


# --- CSV -------------------------------------------------------------------

CSV_HEADER = ["mcs", "factor", "impairments", "snr_db", "trials", "errors", "per", "ci_low", "ci_high"]


def fmt6(x: float) -> str:
    """Six significant digits, positional notation."""
    return np.format_float_positional(float(x), precision=6, unique=False, fractional=False, trim="-")


def emit_csv(curves, path) -> Path:
    path = Path(path)
    rows = []
    for c in curves:
        for p in c.points:
            lo, hi = p.ci
            rows.append(((c.mcs, c.factor, p.snr_db, c.impairments),
                         [str(c.mcs), str(c.factor), c.impairments, fmt6(p.snr_db), str(p.trials),
                          str(p.errors), fmt6(p.per), fmt6(lo), fmt6(hi)]))
    rows.sort(key=lambda r: r[0])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(r[1] for r in rows)
    return path


def read_csv(path) -> list[PerCurve]:
    curves: dict[tuple, PerCurve] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            key = (int(row["mcs"]), int(row["factor"]), row["impairments"])
            curve = curves.setdefault(key, PerCurve(*key))
            curve.points.append(PerPoint(float(row["snr_db"]), int(row["trials"]), int(row["errors"])))
    return list(curves.values())


def write_manifest(path, spec_hash: int, master_seed: int, extra: dict | None = None) -> Path:
    from . import __version__

    lines = {"tool": "upclocksim", "version": __version__, "config_hash": f"{spec_hash:016x}",
             "master_seed": master_seed}
    lines.update(extra or {})
    path = Path(path)
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return path

