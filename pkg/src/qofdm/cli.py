"""
Command-line entry point.

Subcommands::

    qofdm sweep        [--config FILE] [--set KEY=VALUE ...] [--bits B,..] [--snr S,..]
                       [--seed N] [--jobs N] [--out DIR] [--allow-degenerate]
    qofdm single       [--config FILE] [--set ...] --bits B --snr S [--seed N]
    qofdm power        [--bits-min 1] [--bits-max 8] [--fs 1.8e6] [--c 496e-15] [--out FILE]
    qofdm dump-config  [--config FILE] [--set ...]

Exit status is 0 on success, 1 on a runtime failure or degenerate sweep
point, 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from .config import HARDWARE, RunConfig
from .errors import ConfigurationError, DegeneratePointError, QofdmError
from .harness import (
    DEFAULT_C,
    DEFAULT_FS,
    measure_ber,
    point_rng,
    power_curve,
    power_csv,
    run_sweep,
    write_ber_csv,
    write_meta,
    write_power_csv,
)
from .quantizer import MAX_BITS

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_set(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _load_config(args, extra: dict | None = None) -> RunConfig:
    overrides = _parse_set(getattr(args, "set", None))
    overrides.update(extra or {})
    if args.config is None:
        return cfgmod.loads("", overrides)
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return cfgmod.load(path, overrides)


def _depth_list(text: str) -> list:
    return [d if d == HARDWARE else int(d) for d in _split_list(text)]


def _snr_list(text: str) -> list:
    return [None if s == "noiseless" else float(s) for s in _split_list(text)]


def _sweep_overrides(args) -> dict:
    extra = {}
    try:
        if args.bits is not None:
            extra["sweep.bit_depths"] = _depth_list(args.bits)
        if args.snr is not None:
            extra["sweep.snr_points_db"] = _snr_list(args.snr)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        extra["sweep.master_seed"] = args.seed
    if getattr(args, "out", None):
        extra["output.directory"] = args.out
    return extra


def cmd_sweep(args) -> int:
    cfg = _load_config(args, _sweep_overrides(args))
    records = run_sweep(cfg, jobs=args.jobs)
    out_dir = cfg.output.resolved_directory()
    csv_path = write_ber_csv(records, out_dir / f"{cfg.output.basename}_ber.csv")
    write_meta(csv_path, cfg, records, {"overrides": _parse_set(args.set)})
    print(f"wrote {len(records)} rows to {csv_path}")
    degenerate = [r for r in records if r.degenerate]
    for r in degenerate:
        print(
            f"degenerate point: bits={r.bits} snr={r.requested_snr_db} "
            f"sync_failures={r.sync_failures}",
            file=sys.stderr,
        )
    if degenerate and not args.allow_degenerate:
        return EXIT_RUNTIME
    return EXIT_OK


def format_report(record) -> str:
    lo, hi = record.confidence_interval()
    snr = "noiseless" if record.requested_snr_db is None else f"{record.requested_snr_db:g} dB"
    return "\n".join(
        [
            f"bits             {record.bits}",
            f"requested SNR    {snr}",
            f"measured SNR     {record.measured_snr_db:.4f} dB",
            f"BER              {record.ber:.6e}",
            f"BER 95% CI       [{max(lo, 0.0):.6e}, {hi:.6e}]",
            f"errored bits     {record.errored_bits} / {record.bit_count}",
            f"sync failures    {record.sync_failures}",
            f"EVM rms          {record.evm_rms:.6f}",
        ]
    )


def cmd_single(args) -> int:
    if args.bits is None or args.snr is None:
        raise UsageError("single needs --bits and --snr")
    cfg = _load_config(args, _sweep_overrides(args))
    if len(cfg.sweep.bit_depths) != 1 or len(cfg.sweep.snr_points_db) != 1:
        raise UsageError("single takes exactly one --bits and one --snr value")
    bits, snr = cfg.sweep.bit_depths[0], cfg.sweep.snr_points_db[0]
    record = measure_ber(cfg, bits, snr, point_rng(cfg.sweep.master_seed, bits, 0))
    print(format_report(record))
    return EXIT_OK


def cmd_power(args) -> int:
    if not 1 <= args.bits_min <= args.bits_max <= MAX_BITS:
        raise UsageError(
            f"need 1 <= bits-min <= bits-max <= {MAX_BITS}, got {args.bits_min}..{args.bits_max}"
        )
    if not (args.fs > 0 and args.c > 0):
        raise UsageError("--fs and --c must be > 0")
    records = power_curve(range(args.bits_min, args.bits_max + 1), args.fs, args.c)
    if args.out in (None, "-"):
        sys.stdout.write(power_csv(records))
    else:
        path = write_power_csv(records, args.out)
        print(f"wrote {len(records)} rows to {path}")
    return EXIT_OK


def cmd_dump_config(args) -> int:
    sys.stdout.write(cfgmod.dumps(_load_config(args)))
    return EXIT_OK


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="override one configuration key"
    )


def _add_point_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bits", help="bit depths, comma separated; 'hardware' skips the ADC stage")
    p.add_argument("--snr", help="SNR points in dB, comma separated; 'noiseless' disables AWGN")
    p.add_argument("--seed", type=int, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qofdm", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="BER over every configured (bits, SNR) point")
    _add_config_options(p)
    _add_point_options(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--allow-degenerate", action="store_true", help="exit 0 even with degenerate points")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("single", help="one BER point with a readable report")
    _add_config_options(p)
    _add_point_options(p)
    p.set_defaults(func=cmd_single)

    p = sub.add_parser("power", help="ADC power c * fs * 2**bits as CSV")
    p.add_argument("--bits-min", type=int, default=1)
    p.add_argument("--bits-max", type=int, default=8)
    p.add_argument("--fs", type=float, default=DEFAULT_FS, help="sample rate in Hz")
    p.add_argument("--c", type=float, default=DEFAULT_C, help="energy per conversion step in J")
    p.add_argument("--out", help="CSV path; stdout when omitted")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("dump-config", help="print the effective configuration")
    _add_config_options(p)
    p.set_defaults(func=cmd_dump_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"qofdm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegeneratePointError, QofdmError) as exc:
        print(f"qofdm {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
