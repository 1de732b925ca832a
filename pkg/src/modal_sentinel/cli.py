"""Command-line interface: simulate | ingest | fit | baseline | score | report.

Exit codes: 0 success, 2 validation, 3 I/O or file format, 4 numerical,
5 mode matching.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import re
import shutil
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .config import PipelineConfig, load_config
from .damage import load_baseline, save_baseline
from .dmd import continuous_spectrum, load_model, save_model, write_spectrum_csv
from .errors import MatchingError, NumericalError, SnapshotFormatError, ValidationError
from .features import FEATURE_KINDS
from .snapshots import cumulative_energy, load_csv, write_csv, write_energy_csv

log = logging.getLogger("modal_sentinel")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL, EXIT_MATCHING = 0, 2, 3, 4, 5
THREADS_ENV = "MODAL_SENTINEL_THREADS"


class _Context:
    def __init__(self, args):
        self.args = args
        self.config_path = Path(args.config) if args.config else None
        self.config = load_config(self.config_path) if self.config_path else PipelineConfig()
        self.out = Path(args.out)

    def config_relative(self, value: str | None) -> Path | None:
        """Config-file paths resolve against the config file's directory."""
        if value is None:
            return None
        path = Path(value)
        if not path.is_absolute() and self.config_path is not None:
            path = self.config_path.parent / path
        return path

    def pick(self, flag: str | None, config_value: str | None, default: Path) -> Path:
        if flag is not None:
            return Path(flag)
        return self.config_relative(config_value) or default

    def ensure_out(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def cmd_simulate(ctx: _Context) -> None:
    snap, _, provenance = pipeline.simulate_snapshots(ctx.config)
    out = ctx.ensure_out()
    write_csv(snap, out / "snapshots.csv")
    _dump(out / "provenance.json", provenance)
    log.info("wrote %d x %d snapshots to %s", snap.n_channels, snap.n_samples, out / "snapshots.csv")


def cmd_ingest(ctx: _Context) -> None:
    frames = ctx.args.frames if ctx.args.frames is not None else \
        ctx.config_relative(ctx.config.ingest.frames_dir)
    snap, provenance = pipeline.ingest_frames(ctx.config, frames)
    out = ctx.ensure_out()
    write_csv(snap, out / "snapshots.csv")
    _dump(out / "provenance.json", provenance)
    log.info("ingested %d frames (%d channels) into %s", snap.n_samples, snap.n_channels, out)


def cmd_fit(ctx: _Context) -> None:
    path = ctx.pick(ctx.args.snapshots, ctx.config.paths.snapshots, ctx.out / "snapshots.csv")
    snap = load_csv(path)
    result = pipeline.fit_model(ctx.config, snap)
    out = ctx.ensure_out()
    extra = {
        "rmse": result.rmse,
        "train_samples": result.train_samples,
        "full_singular_values": [float(s) for s in result.singular_values],
        "config": pipeline.config_echo(ctx.config, result.model),
    }
    save_model(result.model, out / "model.json", extra)
    write_spectrum_csv(continuous_spectrum(result.model), out / "spectrum.csv")
    write_energy_csv(result.energy, result.singular_values, out / "energy.csv")
    with open(out / "reconstruction.csv", "w", encoding="utf-8") as fh:
        for row in result.reconstruction:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    _dump(out / "rmse.json", result.rmse)
    log.info("rank %d model; rmse train %.3g, predict %.3g, full %.3g", result.model.rank,
             result.rmse["train"], result.rmse["predict"], result.rmse["full"])


def cmd_baseline(ctx: _Context) -> None:
    path = ctx.pick(ctx.args.model, ctx.config.paths.model, ctx.out / "model.json")
    model = load_model(path)
    baseline = pipeline.build_baseline(ctx.config, model)
    out = ctx.ensure_out()
    save_baseline(baseline, out)
    shutil.copyfile(path, out / "healthy_model.json")
    log.info("baseline with %d modes written to %s", len(baseline.mode_indices), out)


def cmd_score(ctx: _Context) -> None:
    model_path = ctx.pick(ctx.args.model, ctx.config.paths.model, ctx.out / "model.json")
    base_dir = ctx.pick(ctx.args.baseline, ctx.config.paths.baseline, ctx.out / "baseline")
    doc = _read_json(model_path)
    current = load_model(model_path)
    healthy = load_model(base_dir / "healthy_model.json")
    baseline = load_baseline(base_dir)
    report = pipeline.score_model(ctx.config, current, healthy, baseline, doc.get("rmse"))
    out = ctx.ensure_out()
    (out / "report.json").write_text(pipeline.report_json(report, ctx.config.name), encoding="utf-8")
    energy = None
    if doc.get("full_singular_values"):
        energy = cumulative_energy(np.asarray(doc["full_singular_values"])).fractions
    pipeline.write_report_plots(out, report, current, healthy, energy)
    summary = ", ".join(f"Q_{k}={s.Q:.4g}" for k, s in report.kinds.items())
    log.info("%s: %s", ctx.config.name, summary)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{path}: invalid JSON ({exc})") from None


def _natural_key(name: str):
    return [int(t) if t.isdigit() else t.lower() for t in re.split(r"(\d+)", name)]


def _row_order(name: str):
    return (not name.lower().startswith("healthy"), _natural_key(name))


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def render_summary(reports: list[dict]) -> str:
    present = {k for doc in reports for k in doc["kinds"]}
    kinds = [k for k in FEATURE_KINDS if k in present]
    header = ["state", *[f"Q {k}" for k in kinds], "avg distance", "area (top 5)", "RMSE predict"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for doc in sorted(reports, key=lambda d: _row_order(d["name"])):
        cells = [doc["name"], *[_fmt(doc["kinds"].get(k, {}).get("Q")) for k in kinds],
                 _fmt(doc["eigen_metrics"]["avg_distance"]),
                 _fmt(doc["eigen_metrics"]["enclosed_area_top5"]),
                 _fmt(doc.get("rmse", {}).get("predict"))]
        lines.append("| " + " | ".join(cells) + " |")
    return "# Damage summary\n\n" + "\n".join(lines) + "\n"


def cmd_report(ctx: _Context) -> None:
    run_dir = Path(ctx.args.run_dir) if ctx.args.run_dir else ctx.out
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    paths = sorted(run_dir.rglob("report.json"))
    if not paths:
        raise FileNotFoundError(f"{run_dir}: no report.json files found")
    reports = []
    for path in paths:
        doc = _read_json(path)
        doc.setdefault("name", path.parent.name)
        reports.append(doc)
    text = render_summary(reports)
    target = Path(ctx.args.out) if ctx.args.out_given else run_dir
    target.mkdir(parents=True, exist_ok=True)
    (target / "summary.md").write_text(text, encoding="utf-8")
    if not ctx.args.quiet:
        sys.stdout.write(text)


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "baseline": cmd_baseline,
    "score": cmd_score,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="pipeline configuration JSON")
    common.add_argument("--out", metavar="DIR", default=None, help="output directory (default: .)")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    parser = argparse.ArgumentParser(prog="modal-sentinel",
                                     description="DMD-based vibration damage assessment")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="synthesize cantilever snapshots")
    p = sub.add_parser("ingest", parents=[common], help="stack PGM frames into snapshots")
    p.add_argument("--frames", metavar="DIR", help="frame directory (overrides ingest.frames_dir)")
    p = sub.add_parser("fit", parents=[common], help="fit a DMD model on the train split")
    p.add_argument("--snapshots", metavar="PATH", help="snapshot CSV (default: OUT/snapshots.csv)")
    p = sub.add_parser("baseline", parents=[common], help="build the healthy reference")
    p.add_argument("--model", metavar="PATH", help="healthy model JSON (default: OUT/model.json)")
    p = sub.add_parser("score", parents=[common], help="score a model against a baseline")
    p.add_argument("--model", metavar="PATH", help="current model JSON (default: OUT/model.json)")
    p.add_argument("--baseline", metavar="DIR", help="baseline directory (default: OUT/baseline)")
    p = sub.add_parser("report", parents=[common], help="summarize report.json files")
    p.add_argument("run_dir", nargs="?", help="directory searched for report.json (default: OUT)")
    return parser


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "."
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        with _thread_limit():
            COMMANDS[args.command](_Context(args))
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except (SnapshotFormatError, OSError) as exc:
        return _fail(EXIT_IO, exc)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except MatchingError as exc:
        return _fail(EXIT_MATCHING, exc)
    return EXIT_OK


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(f"modal-sentinel: error: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
