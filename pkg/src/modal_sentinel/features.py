"""Real mode-shape profiles, derivative features and baseline/current mode pairing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dmd import DmdModel, select_dominant
from .errors import MatchingError, ValidationError

FEATURE_KINDS = ("MS", "MSS", "MSC", "MSCS")


@dataclass(frozen=True, eq=False)
class ModeShapeProfile:
    values: np.ndarray
    spacing: float = 1.0
    frequency_hz: float = math.nan


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Feature matrix (interior points x modes) of one kind."""

    kind: str
    matrix: np.ndarray
    frequencies: tuple[float, ...]
    grid: np.ndarray | None = None

    @property
    def mode_count(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ModeMatch:
    """Baseline-to-current pairing, in ascending baseline frequency order.

    ``pairs`` holds (current index, baseline index) into the models' modes.
    """

    pairs: tuple[tuple[int, int], ...]
    frequency_gaps: tuple[float, ...]
    similarities: tuple[float, ...]

    def current_for(self, baseline_index: int) -> int:
        for cur, base in self.pairs:
            if base == baseline_index:
                return cur
        raise KeyError(baseline_index)


def realify_normalize(column, spacing: float = 1.0, frequency_hz: float = math.nan) -> ModeShapeProfile:
    """Rotate out the phase of the largest entry, keep the real part, scale to
    unit norm and make the largest-magnitude entry positive."""
    v = np.asarray(column, dtype=complex).ravel()
    peak = int(np.argmax(np.abs(v)))
    if v.size == 0 or v[peak] == 0:
        raise ValidationError("cannot normalize a zero mode")
    real = np.real(v * np.exp(-1j * np.angle(v[peak])))
    norm = np.linalg.norm(real)
    if norm == 0:
        raise ValidationError("mode has no real component after phase rotation")
    real = real / norm
    if real[np.argmax(np.abs(real))] < 0:
        real = -real
    return ModeShapeProfile(real, float(spacing), float(frequency_hz))


def _values(profile) -> np.ndarray:
    v = np.asarray(profile.values if isinstance(profile, ModeShapeProfile) else profile, dtype=float)
    if v.ndim != 1 or v.size < 3:
        raise ValidationError("derivative features need at least 3 points")
    return v


def _check_spacing(h: float):
    if not (h > 0):
        raise ValidationError(f"grid spacing must be positive, got {h}")


def slope(profile, h: float) -> np.ndarray:
    """Central first difference at interior points."""
    v = _values(profile)
    _check_spacing(h)
    return (v[2:] - v[:-2]) / (2.0 * h)


def curvature(profile, h: float) -> np.ndarray:
    """Central second difference at interior points."""
    v = _values(profile)
    _check_spacing(h)
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)


def curvature_square(profile, h: float) -> np.ndarray:
    return curvature(profile, h) ** 2


def feature_vector(profile: ModeShapeProfile, kind: str) -> np.ndarray:
    h = profile.spacing
    if kind == "MS":
        return _values(profile)[1:-1].copy()
    if kind == "MSS":
        return slope(profile, h)
    if kind == "MSC":
        return curvature(profile, h)
    if kind == "MSCS":
        return curvature_square(profile, h)
    raise ValidationError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")


def assemble_features(profiles: Sequence[ModeShapeProfile], kind: str, grid=None) -> FeatureSet:
    """Stack one feature column per profile; rows are interior grid points."""
    if not profiles:
        raise ValidationError("no profiles given")
    n = len(profiles[0].values)
    h = profiles[0].spacing
    for p in profiles[1:]:
        if len(p.values) != n or not math.isclose(p.spacing, h, rel_tol=1e-12):
            raise ValidationError("all profiles must share length and spacing")
    matrix = np.column_stack([feature_vector(p, kind) for p in profiles])
    interior = None if grid is None else np.asarray(grid, dtype=float)[1:-1]
    return FeatureSet(kind, matrix, tuple(p.frequency_hz for p in profiles), interior)


def grid_spacing(grid) -> float:
    """Uniform spacing of ``grid`` (1.0 when there is no grid, i.e. pixel pitch units)."""
    if grid is None:
        return 1.0
    steps = np.diff(np.asarray(grid, dtype=float))
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * max(abs(h), 1e-300):
        raise ValidationError("feature extraction needs a uniformly spaced grid")
    return h


def mode_profile(model: DmdModel, index: int) -> ModeShapeProfile:
    """Realified spatial profile of mode ``index`` (delay-0 rows only)."""
    freq = abs(float(model.frequencies_hz[index]))
    return realify_normalize(model.spatial_modes[:, index], grid_spacing(model.grid), freq)


def model_features(model: DmdModel, indices: Sequence[int], kinds=FEATURE_KINDS) -> dict[str, FeatureSet]:
    profiles = [mode_profile(model, i) for i in indices]
    return {kind: assemble_features(profiles, kind, model.grid) for kind in kinds}


def _gap(f_current: float, f_base: float) -> float:
    if f_base > 0:
        return abs(f_current - f_base) / f_base
    return 0.0 if f_current == f_base else math.inf


def baseline_modes(model: DmdModel, count: int) -> list[int]:
    """The ``count`` dominant modes of a model, in ascending frequency."""
    indices = select_dominant(model, count)
    freqs = np.abs(model.frequencies_hz)
    return sorted(indices, key=lambda i: (freqs[i], i))


def match_modes(current: DmdModel, baseline: DmdModel, count: int,
                max_frequency_gap: float = 0.2, min_similarity: float = 0.6,
                candidate_pool: int | None = None) -> ModeMatch:
    """Greedy pairing of baseline dominant modes with current modes.

    Baseline modes are visited in ascending frequency; each takes the unused
    current candidate with the smallest relative frequency gap, which must
    satisfy both thresholds. Candidates are the ``candidate_pool`` most
    dominant current modes (default ``2 * count``, capped by availability).
    """
    if current.spatial_modes.shape[0] != baseline.spatial_modes.shape[0]:
        raise ValidationError("current and baseline models have different spatial grids")
    base_idx = baseline_modes(baseline, count)
    n_reps = sum(1 for lam in current.eigenvalues if lam.imag >= -1e-12)
    pool = min(n_reps, 2 * count if candidate_pool is None else candidate_pool)
    if pool < count:
        raise MatchingError(f"current model has only {pool} candidate modes for {count} baseline modes")
    cand_idx = select_dominant(current, pool)

    f_base = np.abs(baseline.frequencies_hz)
    f_cur = np.abs(current.frequencies_hz)
    cur_profiles = {i: mode_profile(current, i).values for i in cand_idx}

    pairs, gaps, sims = [], [], []
    used: set[int] = set()
    for b in base_idx:
        free = [c for c in cand_idx if c not in used]
        if not free:
            raise MatchingError(f"baseline mode {b} ({f_base[b]:.4g} Hz): no unused candidates")
        best = min(free, key=lambda c: (_gap(f_cur[c], f_base[b]), c))
        gap = _gap(f_cur[best], f_base[b])
        sim = float(np.dot(cur_profiles[best], mode_profile(baseline, b).values) ** 2)
        if gap > max_frequency_gap or sim < min_similarity:
            raise MatchingError(
                f"baseline mode {b} ({f_base[b]:.4g} Hz) unmatched; best candidate "
                f"{best} ({f_cur[best]:.4g} Hz) rejected with gap {gap:.3g} and "
                f"similarity {sim:.3g}")
        used.add(best)
        pairs.append((best, b))
        gaps.append(gap)
        sims.append(sim)
    return ModeMatch(tuple(pairs), tuple(gaps), tuple(sims))


def write_feature_csv(features: FeatureSet, path) -> None:
    """First column grid coordinate (or interior index), one column per mode."""
    rows = features.matrix.shape[0]
    coords = features.grid if features.grid is not None else np.arange(1, rows + 1, dtype=float)
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write("x," + ",".join(repr(float(f)) for f in features.frequencies) + "\n")
        for i in range(rows):
            fh.write(",".join(repr(float(v)) for v in (coords[i], *features.matrix[i])) + "\n")
