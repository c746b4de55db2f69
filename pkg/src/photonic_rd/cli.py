"""Command-line entry point: ``photonic-rd {simulate,sweep,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ExperimentConfig, default_config, dump_config, load_config
from .errors import ConfigError
from .experiments import (
    HARDWARE_REFERENCE,
    SweepReport,
    TrialRecord,
    emit_report,
    error_grid_csv,
    report_from_records,
    run_single_trial,
    run_sweep,
    spectra_csv,
    trial_stem,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4

OUT_ENV = "PHOTONIC_RD_OUT"

log = logging.getLogger("photonic_rd")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    """Accepts ``1,5,16`` and ranges such as ``1-20``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or ranges, got {text!r}") from None
    return out


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    trial, sweep = cfg.trial, cfg.sweep
    if args.amplitudes:
        sweep = replace(sweep, amplitudes=tuple(args.amplitudes))
        trial = trial.with_amplitude(args.amplitudes[0])
    if args.positions:
        sweep = replace(sweep, positions=tuple(args.positions))
        trial = trial.with_position(args.positions[0])
    if args.seed is not None:
        if not 1 <= args.seed <= 0x7FFF:
            raise ConfigError("seed must lie in [1, 32767]", "--seed")
        trial = replace(trial, prbs=replace(trial.prbs, seed=args.seed),
                        noise=replace(trial.noise, seed=args.seed))
    if getattr(args, "threads", None):
        sweep = replace(sweep, threads=args.threads)
    trial.validate()
    for p in sweep.positions:
        trial.with_position(p).validate()
    return ExperimentConfig(trial, sweep)


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "rd_out")


def _manifest(args: argparse.Namespace, cfg: ExperimentConfig, out: Path) -> dict:
    return {
        "config_path": str(args.config) if args.config else "<built-in default.config>",
        "resolved_config": cfg.to_dict(),
        "out_dir": str(out),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    try:
        record = run_single_trial(cfg.trial)
    except (ConfigError, OSError):
        raise
    except Exception as exc:  # noqa: BLE001
        print(f"error: trial failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_text(out / "trial.json", json.dumps(record.to_json(), indent=2) + "\n")
    _write_text(out / "spectra.csv", spectra_csv(record))
    _write_text(out / "resolved.config", dump_config(cfg))
    _write_text(out / "manifest.json", json.dumps(_manifest(args, cfg, out), indent=2) + "\n")
    print(f"amplitude {record.amplitude_ratio:g} v_pi, position {record.position}: "
          f"reconstruction error {record.error:.6g}")
    print(f"support: {record.support}")
    print(f"wrote {out}")
    return EXIT_OK


def _print_sweep(report: SweepReport) -> None:
    print("amplitude/v_pi  mean_error")
    for amp, mean in zip(report.amplitudes, report.mean_errors):
        print(f"{amp:>13.4g}  {mean:.6g}")
    print(f"max reduction: {100 * report.max_reduction:.1f}% "
          f"(hardware reference: up to {100 * HARDWARE_REFERENCE['max_error_reduction']:.0f}%)")
    if report.failures:
        print(f"{len(report.failures)} trial(s) failed; see sweep.json")


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    report = run_sweep(cfg.trial, cfg.sweep.amplitudes, cfg.sweep.positions, cfg.sweep.threads)
    report.config = cfg.to_dict()
    emit_report(report, out)
    _write_text(out / "resolved.config", dump_config(cfg))
    _write_text(out / "manifest.json", json.dumps(_manifest(args, cfg, out), indent=2) + "\n")
    _print_sweep(report)
    print(f"wrote {out}")
    if report.failures and len(report.failures) == len(report.records):
        return EXIT_SOLVER
    return EXIT_OK


def _load_records(records_dir: Path) -> list[TrialRecord]:
    files = sorted(records_dir.glob("*.json"))
    if (records_dir / "records").is_dir():
        files += sorted((records_dir / "records").glob("*.json"))
    records = []
    for path in files:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            log.warning("skipping corrupt record %s: %s", path, exc)
            continue
        if not isinstance(data, dict) or "config_fingerprint" not in data:
            continue  # manifests and sweep summaries share the directory
        try:
            records.append(TrialRecord.from_json(data))
        except (KeyError, TypeError, ValueError) as exc:
            log.warning("skipping %s: %s", path, exc)
    return records


def cmd_report(args: argparse.Namespace) -> int:
    records_dir = Path(args.records_dir)
    if not records_dir.is_dir():
        print(f"error: {records_dir} is not a directory", file=sys.stderr)
        return EXIT_IO
    records = _load_records(records_dir)
    if not records:
        print(f"error: no usable trial records in {records_dir}", file=sys.stderr)
        return EXIT_IO
    report = report_from_records(records)
    out = Path(args.out) if args.out else records_dir
    _write_text(out / "errors.csv", error_grid_csv(report))
    for rec in records:
        if rec.status == "ok":
            _write_text(out / "spectra" / f"{trial_stem(rec)}.csv", spectra_csv(rec))
    _print_sweep(report)
    print(f"{len(records)} records -> {out / 'errors.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photonic-rd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML experiment file (default: built-in default.config)")
        p.add_argument("--out", help=f"output directory (env {OUT_ENV}, else ./rd_out)")
        p.add_argument("--amplitudes", type=_float_list, help="PRBS amplitude ratios v_code/v_pi, comma-separated")
        p.add_argument("--positions", type=_int_list, help="intra-chip positions, e.g. 1-20 or 16")
        p.add_argument("--seed", type=int, help="PRBS-15 and noise seed")
        p.add_argument("--threads", type=int, default=None, help="concurrent trials")

    sim = sub.add_parser("simulate", help="run one trial (first amplitude/position given)")
    common(sim)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run the amplitude x position sweep")
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="rebuild CSV tables from stored trial records")
    rep.add_argument("records_dir")
    rep.add_argument("--out", help="output directory (default: records_dir)")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
