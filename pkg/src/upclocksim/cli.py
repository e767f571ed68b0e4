"""Command-line entry point: ``upclocksim {sweep,trial,constellation,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import SCHEMA, impairment_model, read_config, rx_config, sweep_spec
from .harness import config_hash, derive_trial_seed, emit_csv, run_sweep, run_trial, write_manifest
from .impairments import ImpairmentModel
from .phy import ConfigError, make_config
from .rx import write_constellation


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (a bundled name such as paper.cfg also works)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    group = p.add_argument_group("config overrides")
    for key in SCHEMA:
        group.add_argument(_flag(key.name), dest=f"ov_{key.name}", metavar=key.name.upper(),
                           help=f"[{key.section}] {key.help} (default {key.default})")


def _single_point(p: argparse.ArgumentParser, snr_default=None) -> None:
    p.add_argument("--mcs", type=int, default=4, help="MCS index (0, 1 or 4)")
    p.add_argument("--factor", type=int, default=8, help="upclock factor (4, 8 or 16)")
    p.add_argument("--snr", type=float, default=snr_default, required=snr_default is None, help="SNR in dB")
    p.add_argument("--seed", type=int, default=None, help="trial seed (default: derived from master_seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upclocksim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("sweep", help="run a PER-vs-SNR sweep and write CSV")
    _add_common(p)
    p.add_argument("--out", default="results.csv", help="results CSV path")
    p.add_argument("--manifest", default=None, help="run manifest path (default: <out>.manifest.txt)")

    p = sub.add_parser("trial", help="run one packet and print the stage log")
    _add_common(p)
    _single_point(p, snr_default=30.0)

    p = sub.add_parser("constellation", help="dump equalized data symbols for one packet")
    _add_common(p)
    _single_point(p, snr_default=20.0)
    p.add_argument("--ideal", action="store_true", help="disable all impairments")
    p.add_argument("--out", default=None, help="dump path (default: constellation_mcsM_xF_snrS.txt)")

    p = sub.add_parser("validate", help="run the built-in invariant checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict[str, str]:
    return {k.name: getattr(args, f"ov_{k.name}") for k in SCHEMA if getattr(args, f"ov_{k.name}", None) is not None}


def _one_packet(args, values, imp: ImpairmentModel, keep_symbols: bool):
    cfg = make_config(args.mcs, args.factor, values["psdu_length"], carrier_freq=values["carrier_freq"],
                      scrambler_init=values["scrambler_init"])
    if imp.cfo is not None:
        imp.cfo.validate(cfg.carrier_freq)
    seed = args.seed
    if seed is None:
        seed = derive_trial_seed(values["master_seed"], config_hash(args.mcs, args.factor, args.snr), 0)
    return run_trial(cfg, imp, rx_config(values), seed, args.snr, keep_symbols=keep_symbols)


def _cmd_sweep(args, values) -> int:
    spec = sweep_spec(values)
    out = Path(args.out)
    curves = run_sweep(spec, workers=values["workers"])
    emit_csv(curves, out)
    manifest = Path(args.manifest) if args.manifest else out.with_name(out.name + ".manifest.txt")
    write_manifest(manifest, config_hash(spec), spec.master_seed, {"config": args.config or "(defaults)"})
    print(f"wrote {out} ({sum(len(c.points) for c in curves)} points) and {manifest}")
    return 0


def _cmd_trial(args, values) -> int:
    record, result = _one_packet(args, values, impairment_model(values), keep_symbols=False)
    if result is not None:
        for line in result.stages:
            print(f"  {line}")
    print(f"seed={record.derived_seed} cfo={record.cfo:.1f} Hz packet_error={record.packet_error} "
          f"bit_errors={record.bit_errors} evm={record.evm_db:.2f} dB {record.reason}".rstrip())
    return 0


def _cmd_constellation(args, values) -> int:
    imp = impairment_model(values)
    if args.ideal:
        imp = replace(ImpairmentModel.ideal(), channel=imp.channel)
    record, result = _one_packet(args, values, imp, keep_symbols=True)
    if result is None or result.equalized_symbols is None:
        raise ConfigError(f"packet could not be processed: {record.reason}")
    out = args.out or f"constellation_mcs{args.mcs}_x{args.factor}_snr{args.snr:g}{'_ideal' if args.ideal else ''}.txt"
    write_constellation(out, result.equalized_symbols)
    print(f"wrote {out}: evm={result.evm_db:.2f} dB packet_error={result.packet_error}")
    return 0


def _cmd_validate(args) -> int:
    from .checks import run_checks

    return 0 if run_checks() else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        values = read_config(args.config, _overrides(args))
        handler = {"sweep": _cmd_sweep, "trial": _cmd_trial, "constellation": _cmd_constellation}[args.command]
        return handler(args, values)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"upclocksim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
