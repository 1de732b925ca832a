"""Library-level workflow steps shared by the command line and the tests."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .beam import ModalBasis, simulate
from .config import PipelineConfig
from .damage import BaselineReference, DamageReport, healthy_baseline, score
from .dmd import DmdModel, fit_snapshots, reconstruct, rmse
from .errors import ValidationError
from .features import baseline_modes, match_modes, mode_profile
from .snapshots import (EnergyCurve, SnapshotMatrix, cumulative_energy, delay_embed,
                        load_frame_sequence, split_train_test)

DOMINANCE_METRIC = "|b_k| * ||phi_k||_2, one eigenvalue per conjugate pair (Im >= 0)"
DAMPING_NOTE = ("synthetic damping coefficient is a stand-in chosen so that zeta_1 is about 0.01; "
                "reference damping values are unknown")


@dataclass(frozen=True, eq=False)
class FitResult:
    model: DmdModel
    train_samples: int
    reconstruction: np.ndarray
    rmse: dict[str, float | None]
    energy: EnergyCurve
    singular_values: np.ndarray


def simulate_snapshots(cfg: PipelineConfig) -> tuple[SnapshotMatrix, ModalBasis, dict]:
    """Synthesize the configured beam state; returns (snapshots, basis, provenance)."""
    sim = cfg.simulation
    snap, basis = simulate(cfg.beam, cfg.damage, mode_count=sim.mode_count,
                           grid_points=sim.grid_points, dt=sim.dt, samples=sim.samples,
                           tip_displacement=sim.tip_displacement, sensitivity=sim.sensitivity,
                           quadrature_points=sim.quadrature_points)
    if sim.noise_level > 0:
        rng = np.random.default_rng(cfg.seed)
        peak = float(np.max(np.abs(snap.data)))
        snap = snap.with_data(snap.data + sim.noise_level * peak * rng.standard_normal(snap.data.shape))
    provenance = {
        "name": cfg.name,
        "natural_frequencies_rad_s": [float(w) for w in basis.natural_frequencies],
        "natural_frequencies_hz": [float(w / (2 * math.pi)) for w in basis.natural_frequencies],
        "damped_frequencies_hz": [float(w / (2 * math.pi)) for w in basis.damped_frequencies],
        "damping_ratios": [float(z) for z in basis.damping_ratios],
        "growth_rates": [float(-r) for r in basis.decay_rates],
        "damping_coefficient": cfg.beam.damping_coefficient,
        "damping_note": DAMPING_NOTE,
        "config": cfg.to_dict(),
    }
    return snap, basis, provenance


def ingest_frames(cfg: PipelineConfig, frames_dir=None) -> tuple[SnapshotMatrix, dict]:
    ing = cfg.ingest
    directory = frames_dir if frames_dir is not None else ing.frames_dir
    if directory is None:
        raise ValidationError("ingest.frames_dir: no frame directory given")
    snap = load_frame_sequence(directory, 1.0 / ing.fps, roi=ing.roi,
                               mean_subtract=ing.mean_subtract, pixel_pitch=ing.pixel_pitch)
    provenance = {"name": cfg.name, "frames": snap.n_samples, "channels": snap.n_channels,
                  "config": cfg.to_dict()}
    return snap, provenance


def effective_rank(cfg: PipelineConfig, snap: SnapshotMatrix, train_samples: int) -> tuple[int, int]:
    """(embedding dimension, rank) after capping the rank by the train matrix size."""
    p = cfg.resolved_embedding(snap.source)
    if p > train_samples - 1:
        raise ValidationError(f"dmd.embedding_dimension {p} too large for {train_samples} train samples")
    columns = train_samples - p  # (train_samples - p + 1) Hankel columns, one lost to the shift
    rank = min(cfg.resolved_rank(snap.source), snap.n_channels * p, columns)
    return p, rank


def fit_model(cfg: PipelineConfig, snap: SnapshotMatrix) -> FitResult:
    """Fit on the train split and reconstruct the full record."""
    train, _ = split_train_test(snap, cfg.dmd.train_fraction)
    p, rank = effective_rank(cfg, snap, train.n_samples)
    model = fit_snapshots(train, rank, p)
    full = reconstruct(model, snap.n_samples)
    n = train.n_samples
    errors = {
        "train": rmse(snap.data[:, :n], full[:, :n]),
        "predict": rmse(snap.data[:, n:], full[:, n:]),
        "full": rmse(snap.data, full),
    }
    s = np.linalg.svd(delay_embed(train, p)[:, :-1], compute_uv=False)
    return FitResult(model, n, full, errors, cumulative_energy(s), s)


def dominant_count(cfg: PipelineConfig, model: DmdModel) -> int:
    reps = int(np.sum(model.eigenvalues.imag >= -1e-12))
    return min(cfg.dmd.dominant_count, reps)


def build_baseline(cfg: PipelineConfig, healthy: DmdModel) -> BaselineReference:
    indices = baseline_modes(healthy, dominant_count(cfg, healthy))
    return healthy_baseline(healthy, indices, cfg.features.kinds, cfg.features.scaling,
                            cfg.features.regularization)


def config_echo(cfg: PipelineConfig, model: DmdModel | None = None) -> dict:
    echo = cfg.to_dict()
    resolved = {"dominance_metric": DOMINANCE_METRIC, "damping_note": DAMPING_NOTE}
    if model is not None:
        resolved.update(rank=model.rank, requested_rank=model.requested_rank,
                        embedding_dimension=model.embedding_dimension)
    echo["resolved"] = resolved
    return echo


def score_model(cfg: PipelineConfig, current: DmdModel, healthy: DmdModel,
                baseline: BaselineReference, rmse_triple: dict | None = None) -> DamageReport:
    count = len(baseline.mode_indices) or dominant_count(cfg, healthy)
    match = match_modes(current, healthy, count, cfg.features.max_frequency_gap,
                        cfg.features.min_similarity, cfg.features.candidate_pool)
    return score(current, baseline, match, rmse_triple, config_echo(cfg, current))


def report_json(report: DamageReport, name: str) -> str:
    doc = report.to_dict()
    doc["name"] = name
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report_plots(directory, report: DamageReport, current: DmdModel, healthy: DmdModel,
                       energy_fractions=None) -> list[Path]:
    directory = Path(directory)
    written = []
    match = report.matching
    if match is not None and match.pairs:
        x = current.grid if current.grid is not None else np.arange(current.spatial_modes.shape[0])
        hp = [mode_profile(healthy, b) for _, b in match.pairs]
        cp = [mode_profile(current, c) for c, _ in match.pairs]
        labels = [f"{p.frequency_hz:.2f} Hz" for p in hp]
        svg = plots.mode_overlay_plot(x, [p.values for p in hp], [p.values for p in cp], labels)
        written.append(_write(directory / "modes.svg", svg))
    svg = plots.eigenvalue_plot([(healthy.eigenvalues, "healthy"), (current.eigenvalues, "current")])
    written.append(_write(directory / "eigenvalues.svg", svg))
    kinds = list(report.kinds)
    svg = plots.bar_plot(kinds, [("Q", [report.kinds[k].Q for k in kinds])],
                         "Damage index per feature kind", "Q")
    written.append(_write(directory / "damage_index.svg", svg))
    if energy_fractions is None:
        energy_fractions = cumulative_energy(current.singular_values).fractions
    written.append(_write(directory / "energy.svg", plots.energy_plot(energy_fractions)))
    return written


def _write(path: Path, svg: str) -> Path:
    plots.write_svg(path, svg)
    return path


@dataclass(frozen=True, eq=False)
class StateRun:
    name: str
    snapshots: SnapshotMatrix
    fit: FitResult
    report: DamageReport


def run_states(healthy_cfg: PipelineConfig, configs) -> dict[str, StateRun]:
    """Simulate, fit and score each config against the healthy reference in-process."""
    snap_h = simulate_snapshots(healthy_cfg)[0]
    fit_h = fit_model(healthy_cfg, snap_h)
    baseline = build_baseline(healthy_cfg, fit_h.model)
    runs = {}
    for cfg in configs:
        if dataclasses.replace(cfg, name=healthy_cfg.name) == healthy_cfg:
            snap, fitted = snap_h, fit_h
        else:
            snap = simulate_snapshots(cfg)[0]
            fitted = fit_model(cfg, snap)
        report = score_model(cfg, fitted.model, fit_h.model, baseline, fitted.rmse)
        runs[cfg.name] = StateRun(cfg.name, snap, fitted, report)
    return runs
