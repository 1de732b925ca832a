"""Healthy baseline matrices and Mahalanobis-type damage indices."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dmd import DmdModel, avg_distance_origin, dominant_area
from .errors import DegenerateBaselineError, NumericalError, SnapshotFormatError, ValidationError
from .features import FEATURE_KINDS, FeatureSet, ModeMatch, mode_profile, assemble_features

DEFAULT_REGULARIZATION_FACTOR = 1e-8


@dataclass(frozen=True, eq=False)
class BaselineReference:
    """Per-kind reference matrices built from healthy features.

    ``mode_indices`` are the healthy-model mode indices behind the feature
    columns, in column order.
    """

    matrices: dict[str, np.ndarray]
    features: dict[str, FeatureSet]
    variances: dict[str, np.ndarray]
    scaling: float
    regularization: dict[str, float]
    mode_indices: tuple[int, ...] = ()
    fingerprint: dict = field(default_factory=dict)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for k in FEATURE_KINDS if k in self.matrices)


@dataclass(frozen=True, eq=False)
class KindScore:
    Q: float
    Qk: np.ndarray
    deviations: np.ndarray
    deviation_max_location: float | None


@dataclass(frozen=True, eq=False)
class DamageReport:
    kinds: dict[str, KindScore]
    avg_distance: float
    enclosed_area_top5: float | None
    rmse: dict[str, float | None]
    config: dict = field(default_factory=dict)
    matching: ModeMatch | None = None

    def to_dict(self) -> dict:
        doc = {
            "kinds": {
                kind: {
                    "Q": float(s.Q),
                    "Qk": [float(q) for q in s.Qk],
                    "deviation_max_location": s.deviation_max_location,
                }
                for kind, s in self.kinds.items()
            },
            "eigen_metrics": {
                "avg_distance": self.avg_distance,
                "enclosed_area_top5": self.enclosed_area_top5,
            },
            "rmse": {k: self.rmse.get(k) for k in ("train", "predict", "full")},
            "config": self.config,
        }
        if self.matching is not None:
            doc["matching"] = {
                "pairs": [list(p) for p in self.matching.pairs],
                "frequency_gaps": list(self.matching.frequency_gaps),
                "similarities": list(self.matching.similarities),
            }
        return doc


def _variance_is_zero(x: np.ndarray, var: float) -> bool:
    return var <= 1e-28 * max(float(np.mean(x * x)), 1e-300)


def reference_matrix(features: FeatureSet, scaling: float = 1.0,
                     regularization: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """P = (C/M) sum_k x_k x_k^T / var(x_k) + eps I for one feature kind.

    Returns (P, variances, eps). ``regularization=None`` uses
    eps = 1e-8 trace(P) / n'.
    """
    X = np.asarray(features.matrix, dtype=float)
    n, m = X.shape
    if m < 1:
        raise ValidationError("baseline needs at least one mode")
    if not (scaling > 0):
        raise ValidationError(f"scaling constant must be positive, got {scaling}")
    variances = X.var(axis=0)
    P = np.zeros((n, n))
    for k in range(m):
        x = X[:, k]
        if _variance_is_zero(x, variances[k]):
            raise DegenerateBaselineError(features.kind, k + 1)
        # outer(x, x) is exactly symmetric; keep P bit-symmetric
        P += np.outer(x, x) / variances[k]
    P *= scaling / m
    eps = DEFAULT_REGULARIZATION_FACTOR * np.trace(P) / n if regularization is None else float(regularization)
    if not (eps > 0):
        raise ValidationError(f"regularization must be positive, got {eps}")
    P[np.diag_indices(n)] += eps
    return P, variances, float(eps)


def build_baseline(features: Mapping[str, FeatureSet], scaling: float = 1.0,
                   regularization: float | None = None, mode_indices=(),
                   fingerprint: dict | None = None) -> BaselineReference:
    matrices, variances, eps = {}, {}, {}
    for kind in FEATURE_KINDS:
        if kind not in features:
            continue
        matrices[kind], variances[kind], eps[kind] = reference_matrix(
            features[kind], scaling, regularization)
    if not matrices:
        raise ValidationError("no feature sets given")
    return BaselineReference(matrices, dict(features), variances, float(scaling), eps,
                             tuple(int(i) for i in mode_indices), dict(fingerprint or {}))


def healthy_baseline(model: DmdModel, mode_indices, kinds=FEATURE_KINDS, scaling: float = 1.0,
                     regularization: float | None = None) -> BaselineReference:
    """Baseline from the given healthy-model modes."""
    profiles = [mode_profile(model, i) for i in mode_indices]
    feats = {kind: assemble_features(profiles, kind, model.grid) for kind in kinds}
    fingerprint = {
        "rank": model.rank,
        "dt": model.dt,
        "dominant_frequencies": [p.frequency_hz for p in profiles],
        "grid_points": int(model.spatial_modes.shape[0]),
    }
    return build_baseline(feats, scaling, regularization, mode_indices, fingerprint)


def mode_damage_index(deviation, P) -> float:
    """Q_k = d^T (2P)^{-1} d via a Cholesky solve."""
    d = np.asarray(deviation, dtype=float).ravel()
    P = np.asarray(P, dtype=float)
    if P.shape != (d.size, d.size):
        raise ValidationError(f"deviation length {d.size} does not match P of shape {P.shape}")
    if not np.any(d):
        return 0.0
    try:
        factor = cho_factor(2.0 * P)
    except LinAlgError:
        raise NumericalError(
            "reference matrix is not positive definite; increase the regularization") from None
    return float(d @ cho_solve(factor, d))


def global_damage_index(mode_indices) -> float:
    q = np.asarray(mode_indices, dtype=float).ravel()
    if q.size == 0:
        raise ValidationError("no per-mode indices to average")
    return float(np.mean(q))


def score(current: DmdModel, baseline: BaselineReference, match: ModeMatch,
          rmse: Mapping[str, float | None] | None = None, config: dict | None = None) -> DamageReport:
    """Damage indices of ``current`` against ``baseline`` for every stored kind."""
    if not match.pairs:
        raise ValidationError("no matched modes to score")
    expected = baseline.fingerprint.get("grid_points")
    if expected is not None and current.spatial_modes.shape[0] != expected:
        raise ValidationError(
            f"current model has {current.spatial_modes.shape[0]} grid points, baseline {expected}")
    columns = list(baseline.mode_indices) or [b for _, b in match.pairs]
    try:
        current_indices = [match.current_for(b) for b in columns]
    except KeyError as exc:
        raise ValidationError(f"baseline mode {exc.args[0]} has no matched current mode") from None
    profiles = [mode_profile(current, i) for i in current_indices]

    kinds = {}
    for kind in baseline.kinds:
        healthy = baseline.features[kind]
        cur = assemble_features(profiles, kind, current.grid)
        if cur.matrix.shape != healthy.matrix.shape:
            raise ValidationError(f"{kind}: feature shape {cur.matrix.shape} differs from "
                                  f"baseline {healthy.matrix.shape}")
        dev = cur.matrix - healthy.matrix
        qk = np.array([mode_damage_index(dev[:, j], baseline.matrices[kind])
                       for j in range(dev.shape[1])])
        location = None
        if np.any(dev):
            row = int(np.unravel_index(np.argmax(np.abs(dev)), dev.shape)[0])
            location = float(healthy.grid[row]) if healthy.grid is not None else float(row + 1)
        kinds[kind] = KindScore(global_damage_index(qk), qk, dev, location)

    return DamageReport(
        kinds=kinds,
        avg_distance=avg_distance_origin(current.eigenvalues),
        enclosed_area_top5=dominant_area(current, 5),
        rmse=dict(rmse or {}),
        config=dict(config or {}),
        matching=match,
    )


# -- persistence -------------------------------------------------------------

def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(path: Path) -> np.ndarray:
    try:
        rows = [[float(v) for v in line.split(",")]
                for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from None


def save_baseline(baseline: BaselineReference, directory) -> None:
    """Baseline metadata JSON plus one CSV per reference matrix and feature matrix."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "kinds": list(baseline.kinds),
        "scaling": baseline.scaling,
        "regularization": baseline.regularization,
        "mode_indices": list(baseline.mode_indices),
        "fingerprint": baseline.fingerprint,
        "variances": {k: [float(v) for v in baseline.variances[k]] for k in baseline.kinds},
        "frequencies": {k: [float(f) for f in baseline.features[k].frequencies] for k in baseline.kinds},
        "grid": None,
    }
    first = baseline.features[baseline.kinds[0]]
    if first.grid is not None:
        doc["grid"] = [float(v) for v in first.grid]
    for kind in baseline.kinds:
        _write_matrix(directory / f"P_{kind}.csv", baseline.matrices[kind])
        _write_matrix(directory / f"features_{kind}.csv", baseline.features[kind].matrix)
    (directory / "baseline.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_baseline(directory) -> BaselineReference:
    directory = Path(directory)
    meta_path = directory / "baseline.json"
    try:
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{meta_path}: invalid JSON ({exc})") from None
    grid = None if doc.get("grid") is None else np.asarray(doc["grid"], dtype=float)
    matrices, features, variances = {}, {}, {}
    for kind in doc["kinds"]:
        matrices[kind] = _read_matrix(directory / f"P_{kind}.csv")
        feat = _read_matrix(directory / f"features_{kind}.csv")
        features[kind] = FeatureSet(kind, feat, tuple(doc["frequencies"][kind]), grid)
        variances[kind] = np.asarray(doc["variances"][kind], dtype=float)
    return BaselineReference(matrices, features, variances, float(doc["scaling"]),
                             {k: float(v) for k, v in doc["regularization"].items()},
                             tuple(doc["mode_indices"]), doc.get("fingerprint", {}))


def baseline_equal(a: BaselineReference, b: BaselineReference) -> bool:
    """Bit-level equality of reference matrices and features."""
    if a.kinds != b.kinds:
        return False
    return all(np.array_equal(a.matrices[k], b.matrices[k]) and
               np.array_equal(a.features[k].matrix, b.features[k].matrix) for k in a.kinds)
