"""Command-line entry point: ``sidebandtwin <subcommand> ...``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .campaign import (PRESETS, execute, json_text, list_presets, preset_path,
                       run_campaign, table_text)
from .config import load_config
from .counting import CountRecord, simulate_counts
from .errors import ConfigError, NumericalError, ValidationError
from .inference import (METHODS, estimate_from_record, estimate_occupancy,
                        fit_lorentzian_doublet, fit_mechanical_spectrum,
                        fit_power_law)

EXIT_OK, EXIT_ANALYSIS, EXIT_CONFIG = 0, 1, 2
SWEEPS = {"detuning": "detuning_sweep", "power": "power_sweep",
          "duty-cycle": "duty_cycle_sweep", "pump-probe": "pump_probe_sweep"}

log = logging.getLogger("sidebandtwin")


def read_columns(path) -> np.ndarray:
    """Numeric table with 2 or 3 columns; comma or whitespace separated.

    Blank lines, ``#`` comments and a single non-numeric header line are skipped.
    """
    rows = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in line.replace(",", " ").split()]
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            if rows:
                raise ConfigError(f"non-numeric value in {line!r}", line=n) from None
            continue
    if not rows:
        raise ConfigError(f"{path}: no numeric rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise ConfigError(f"{path}: need 2 or 3 columns on every row")
    return np.array(rows)


def _emit(args, text: str, name: str):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        print(out / name)
    else:
        sys.stdout.write(text)


def _mapping_text(fmt: str, mapping: dict) -> str:
    if fmt == "json":
        return json_text(mapping)
    flat = {k: v for k, v in mapping.items() if not isinstance(v, (dict, list))}
    return table_text(list(flat), [list(flat.values())])


def _need_config(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return load_config(args.config, args.seed)


# --- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _need_config(args)
    record = simulate_counts(cfg.plan, stream=args.stream)
    text = record.to_json() if args.format == "json" else record.to_csv()
    _emit(args, text, f"counts.{args.format}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    dark = args.dark_rate
    if dark is None:
        dark = _need_config(args).plan.detector.dark_rate if args.config else 0.0
    kw = {"method": args.method, "n_resamples": args.resamples,
          "seed": 0 if args.seed is None else args.seed}
    if args.counts:
        est = estimate_from_record(CountRecord.load(args.counts), dark, args.confidence, **kw)
    elif args.blue and args.red:
        est = estimate_occupancy(tuple(args.blue), tuple(args.red), dark, args.confidence, **kw)
    else:
        raise ConfigError("give --counts FILE or both --blue and --red")
    _emit(args, _mapping_text(args.format, {**est.to_dict(), "dark_rate_hz": dark}),
          f"occupancy.{args.format}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_columns(args.input)
    if args.kind == "doublet":
        report = fit_lorentzian_doublet(data).to_dict()
    elif args.kind == "mechanical":
        report = fit_mechanical_spectrum(data).to_dict()
    else:
        sig = data[:, 2] if data.shape[1] == 3 else None
        report = fit_power_law(data[:, 0], data[:, 1], sig).to_dict()
    if args.format == "csv" and "parameters" in report:
        rows = [(k, v, report["uncertainties"][k]) for k, v in report["parameters"].items()]
        rows += [(k, d["value"], d["uncertainty"]) for k, d in report["derived"].items()]
        text = table_text(("parameter", "value", "uncertainty"), rows)
    else:
        text = _mapping_text(args.format, report)
    _emit(args, text, f"{args.kind}_fit.{args.format}")
    return EXIT_OK


def _finish(result) -> int:
    print(result.out / "manifest.json")
    for entry in result.manifest["analyses"]:
        status = entry["status"]
        detail = entry.get("error") or json.dumps(entry.get("summary"), default=str)
        print(f"{entry['analysis']}: {status} {detail}")
    return result.status


def cmd_sweep(args) -> int:
    cfg = _need_config(args)
    cfg.analyses = [SWEEPS[args.kind]]
    return _finish(execute(cfg, args.out or Path("runs") / cfg.name))


def cmd_preset(args) -> int:
    if args.action == "list":
        catalog = list_presets()
        if args.format == "json":
            sys.stdout.write(json_text(catalog))
        else:
            for name, desc in catalog.items():
                print(f"{name:10s} {desc}")
        return EXIT_OK
    if not args.name:
        raise ConfigError("preset run needs a preset name")
    return _finish(run_campaign(preset_path(args.name), args.out or Path("runs") / args.name,
                                args.seed))


def cmd_report(args) -> int:
    from .plotting import render_directory

    status = EXIT_OK
    if args.preset or args.config:
        path = preset_path(args.preset) if args.preset else args.config
        cfg = load_config(path, args.seed)
        result = execute(cfg, args.out or args.run_dir or Path("runs") / cfg.name)
        status = _finish(result)
        run_dir = result.out
    else:
        run_dir = Path(args.run_dir or args.out or ".")
        if not (run_dir / "manifest.json").is_file():
            raise ConfigError(f"{run_dir} has no manifest.json; give --config or --preset")
    manifest_path = Path(run_dir) / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    figures = {}
    for png in render_directory(run_dir):
        figures[png.name] = {"sha256": hashlib.sha256(png.read_bytes()).hexdigest()}
        print(png)
    manifest["figures"] = figures
    manifest_path.write_text(json_text(manifest))
    return status


# --- parser ---------------------------------------------------------------------

def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="campaign configuration file")
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"),
                        default=argparse.SUPPRESS if suppress else "csv",
                        help="format of single-table outputs (default csv)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sidebandtwin",
                                 description="Pulsed sideband-thermometry simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    _global_flags(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw one count record")
    p.add_argument("--stream", type=int, default=0, help="independent stream index")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="occupancy from counts")
    p.add_argument("--counts", help="count record (.csv or .json)")
    p.add_argument("--blue", nargs=2, type=float, metavar=("COUNTS", "EXPOSURE_S"))
    p.add_argument("--red", nargs=2, type=float, metavar=("COUNTS", "EXPOSURE_S"))
    p.add_argument("--dark-rate", type=float, help="dark count rate in Hz")
    p.add_argument("--method", choices=METHODS, default="profile-likelihood")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--resamples", type=int, default=2000)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", parents=[common], help="fit a spectrum or power law")
    p.add_argument("kind", choices=("doublet", "mechanical", "power"))
    p.add_argument("input", help="2 or 3 column table: x, y[, uncertainty]")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", parents=[common], help="run one sweep from a config")
    p.add_argument("kind", choices=sorted(SWEEPS))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", parents=[common], help="list or run shipped presets")
    p.add_argument("action", choices=("list", "run"))
    p.add_argument("name", nargs="?", choices=PRESETS)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("report", parents=[common],
                       help="run a campaign (optional) and render PNG figures")
    p.add_argument("run_dir", nargs="?", help="existing campaign output directory")
    p.add_argument("--preset", choices=PRESETS)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
