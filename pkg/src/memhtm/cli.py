"""Command-line entry points.

Exit codes: 0 on success, 2 for configuration problems, 3 for data
problems. Reports go to stdout as JSON unless ``--out`` is given.
"""
from __future__ import annotations

import argparse
import json
import sys

from .validation import ConfigError, DataError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, action="append", dest="seeds",
                   help="seed to run (repeatable, overrides config)")
    p.add_argument("--model", choices=["sw", "hw"],
                   help="ideal software model or device-backed model")
    p.add_argument("--data", help="CSV series to ingest instead of the "
                   "synthetic stand-in")
    p.add_argument("--out", help="write the JSON report here")


def _overrides(args) -> dict:
    ov: dict = {}
    if args.seeds:
        ov["seeds"] = args.seeds
    if args.model:
        ov["model"] = args.model
    if args.data:
        ov["data"] = {"path": args.data}
    return ov


def _emit(report: dict, args) -> None:
    from .harness import write_report
    if args.out:
        write_report(report, args.out)
        print(f"wrote {args.out}")
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()


def _cmd_predict(args) -> int:
    from .harness import load_config, run_prediction, write_curves_csv
    cfg = load_config(args.config, _overrides(args))
    report = run_prediction(cfg)
    _emit(report, args)
    if args.curves:
        write_curves_csv(report, args.curves)
        print(f"wrote {args.curves}")
    return 0


def _cmd_fault_sweep(args) -> int:
    from .harness import load_config, run_fault_sweep, write_sweep_csv
    ov = _overrides(args)
    ov.setdefault("model", "hw")
    cfg = load_config(args.config, ov)
    report = run_fault_sweep(cfg)
    _emit(report, args)
    if args.table:
        write_sweep_csv(report, args.table)
        print(f"wrote {args.table}")
    return 0


def _cmd_lifespan(args) -> int:
    from .harness import lifespan_rounds, SECONDS_PER_YEAR
    rounds = lifespan_rounds(args.endurance, args.columns, args.winners)
    years = rounds * (args.round_ms / 1e3) / SECONDS_PER_YEAR
    print(json.dumps({"endurance": args.endurance, "columns": args.columns,
                      "winners": args.winners, "rounds": rounds,
                      "round_ms": args.round_ms, "years": years,
                      "years_display": f"{years:.1f}"}, indent=2))
    return 0


def _cmd_latency(args) -> int:
    from .ssr import latency_sweep
    rows = latency_sweep(args.columns)
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_device_fit(args) -> int:
    from .memristor import fit_rate_constants
    p = fit_rate_constants(args.pulses)
    print(json.dumps({"target_pulses": args.pulses, "k_on": p.k_on,
                      "k_off": p.k_off, "train_voltage": p.train_voltage,
                      "deadband_on": p.v_on, "deadband_off": p.v_off},
                     indent=2))
    return 0


def _cmd_encode(args) -> int:
    from .encoding import ScalarEncoder
    enc = ScalarEncoder.for_range(args.lo, args.hi, args.buckets,
                                  args.width, args.active_bits, seed=args.enc_seed)
    sdr = enc.encode(args.value)
    print(json.dumps({"value": args.value,
                      "bucket": enc.bucket_index(args.value),
                      "active": sdr.active.tolist()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="memhtm",
        description="Dual-fidelity simulator of a memristive sequence "
                    "prediction system")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="stream a series, report MAPE")
    _add_common(p)
    p.add_argument("--curves", help="also write cumulative-error CSV here")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("fault-sweep", help="MAPE versus stuck-device fraction")
    _add_common(p)
    p.add_argument("--table", help="also write the sweep CSV here")
    p.set_defaults(fn=_cmd_fault_sweep)

    p = sub.add_parser("lifespan", help="endurance-sharing projection")
    p.add_argument("--endurance", type=float, default=1e9)
    p.add_argument("--columns", type=int, default=961)
    p.add_argument("--winners", type=int, default=40)
    p.add_argument("--round-ms", type=float, default=10.0, dest="round_ms")
    p.set_defaults(fn=_cmd_lifespan)

    p = sub.add_parser("latency", help="pipelined latency versus region size")
    p.add_argument("--columns", type=int, nargs="+",
                   default=[256, 961, 2025, 4096])
    p.set_defaults(fn=_cmd_latency)

    p = sub.add_parser("device-fit", help="calibrate the device rate constant")
    p.add_argument("--pulses", type=int, default=51)
    p.set_defaults(fn=_cmd_device_fit)

    p = sub.add_parser("encode", help="encode one scalar, print active bits")
    p.add_argument("value", type=float)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=100.0)
    p.add_argument("--buckets", type=int, default=140)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--active-bits", type=int, default=21, dest="active_bits")
    p.add_argument("--enc-seed", type=int, default=0, dest="enc_seed")
    p.set_defaults(fn=_cmd_encode)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
