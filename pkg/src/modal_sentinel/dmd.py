"""Exact DMD on snapshot pairs, spectrum utilities and eigenvalue geometry."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import NumericalError, SnapshotFormatError, ValidationError
from .snapshots import SnapshotMatrix, delay_embed

# Singular values below this fraction of sigma_1 are dropped before inverting.
RANK_FLOOR = 1e-12
# Eigenvalues with Im >= -CONJUGATE_TOL represent their conjugate pair.
CONJUGATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DmdModel:
    """Identified linear dynamics x_{k+1} = A x_k in modal form.

    ``modes`` live in the (possibly delay-embedded) state space. With
    embedding dimension p the rows are ordered channel-major, so the
    undelayed spatial profile is ``modes[0::p]`` (see :attr:`spatial_modes`).
    """

    rank: int
    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray | None
    dt: float
    singular_values: np.ndarray
    requested_rank: int
    amplitudes_rank_deficient: bool = False
    embedding_dimension: int = 1
    grid: np.ndarray | None = None

    @property
    def n_channels(self) -> int:
        return self.modes.shape[0] // self.embedding_dimension

    @property
    def spatial_modes(self) -> np.ndarray:
        return self.modes[0::self.embedding_dimension]

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.angle(self.eigenvalues) / (2.0 * math.pi * self.dt)

    def permuted(self, order) -> "DmdModel":
        """Same model with mode/eigenvalue/amplitude columns reordered."""
        order = np.asarray(order)
        amps = None if self.amplitudes is None else self.amplitudes[order]
        return replace(self, modes=self.modes[:, order], eigenvalues=self.eigenvalues[order],
                       amplitudes=amps)


@dataclass(frozen=True)
class SpectrumPoint:
    eigenvalue: complex
    frequency_hz: float
    growth_rate: float
    amplitude: float


def fit(X, Xp, rank: int, dt: float = 1.0, x1=None) -> DmdModel:
    """Rank-``rank`` exact DMD of the snapshot pairs (X, Xp).

    Amplitudes are fitted to ``x1`` (default: the first column of X).
    """
    X = np.asarray(X)
    Xp = np.asarray(Xp)
    if X.ndim != 2 or X.shape != Xp.shape:
        raise ValidationError(f"X and X' must be 2-D with equal shapes, got {X.shape} and {Xp.shape}")
    if rank < 1:
        raise ValidationError(f"rank must be >= 1, got {rank}")
    if rank > min(X.shape):
        raise ValidationError(f"rank {rank} exceeds min(n, m-1) = {min(X.shape)}")
    if not (dt > 0):
        raise ValidationError(f"dt must be positive, got {dt}")
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0.0:
        raise NumericalError("snapshot matrix is identically zero")
    r = min(rank, int(np.count_nonzero(s / s[0] >= RANK_FLOOR)))
    U_r, s_r, V_r = U[:, :r], s[:r], Vh[:r].conj().T

    XpV = (Xp @ V_r) / s_r          # Xp V_r Sigma_r^{-1}
    atilde = U_r.conj().T @ XpV
    eigenvalues, W = np.linalg.eig(atilde)
    modes = XpV @ W

    model = DmdModel(rank=r, modes=modes, eigenvalues=eigenvalues, amplitudes=None,
                     dt=float(dt), singular_values=s_r.copy(), requested_rank=rank)
    return with_amplitudes(model, X[:, 0] if x1 is None else x1)


def fit_snapshots(snap: SnapshotMatrix, rank: int, embedding_dimension: int = 1) -> DmdModel:
    """Delay-embed ``snap`` and fit DMD to consecutive columns."""
    data = delay_embed(snap, embedding_dimension)
    model = fit(data[:, :-1], data[:, 1:], rank, dt=snap.dt)
    return replace(model, embedding_dimension=embedding_dimension, grid=snap.grid)


def _solve_amplitudes(modes: np.ndarray, x1) -> tuple[np.ndarray, bool]:
    x1 = np.asarray(x1)
    if x1.shape != (modes.shape[0],):
        raise ValidationError(f"x1 must have length {modes.shape[0]}, got shape {x1.shape}")
    b, _, rank, _ = np.linalg.lstsq(modes, x1.astype(complex), rcond=None)
    return b, bool(rank < modes.shape[1])


def amplitudes(model: DmdModel, x1) -> np.ndarray:
    """Least-squares (minimum-norm if rank deficient) solution of Phi b = x1."""
    return _solve_amplitudes(model.modes, x1)[0]


def with_amplitudes(model: DmdModel, x1) -> DmdModel:
    b, deficient = _solve_amplitudes(model.modes, x1)
    return replace(model, amplitudes=b, amplitudes_rank_deficient=deficient)


def _require_amplitudes(model: DmdModel) -> np.ndarray:
    if model.amplitudes is None:
        raise ValidationError("model has no amplitudes; call with_amplitudes first")
    return model.amplitudes


def evolve(model: DmdModel, steps) -> np.ndarray:
    """Columns x_k = Re(Phi Lambda^(k-1) b) for the 1-based sample indices ``steps``."""
    b = _require_amplitudes(model)
    k = np.asarray(list(steps) if not isinstance(steps, np.ndarray) else steps, dtype=np.int64)
    if k.ndim != 1 or np.any(k < 1):
        raise ValidationError("steps must be 1-based sample indices")
    powers = np.power(model.eigenvalues[:, None], k[None, :] - 1)
    return np.real(model.modes @ (b[:, None] * powers))


def reconstruct(model: DmdModel, n_samples: int, spatial: bool = True) -> np.ndarray:
    """Evolve samples 1..n_samples; keep only undelayed spatial rows if ``spatial``."""
    out = evolve(model, np.arange(1, n_samples + 1))
    return out[0::model.embedding_dimension] if spatial else out


def rmse(actual, predicted) -> float:
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape:
        raise ValidationError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    if actual.size == 0:
        raise ValidationError("rmse of empty arrays")
    return float(np.sqrt(np.mean((actual - predicted) ** 2)))


def continuous_spectrum(model: DmdModel) -> list[SpectrumPoint]:
    """Frequency [Hz] and growth rate [1/s] of each eigenvalue via the log map.

    A zero eigenvalue has growth rate ``-inf``.
    """
    b = _require_amplitudes(model)
    points = []
    for lam, amp in zip(model.eigenvalues, b):
        mag = abs(lam)
        growth = math.log(mag) / model.dt if mag > 0 else -math.inf
        freq = math.atan2(lam.imag, lam.real) / (2.0 * math.pi * model.dt)
        points.append(SpectrumPoint(complex(lam), freq, growth, float(abs(amp))))
    return points


def mode_energy(model: DmdModel) -> np.ndarray:
    """Dominance score |b_k| * ||Phi_k||."""
    b = _require_amplitudes(model)
    return np.abs(b) * np.linalg.norm(model.modes, axis=0)


def select_dominant(model: DmdModel, count: int) -> list[int]:
    """Indices of the ``count`` most energetic modes, one per conjugate pair.

    Ordered by |b_k| ||Phi_k|| descending, then |lambda| descending, then index.
    """
    score = mode_energy(model)
    reps = [i for i, lam in enumerate(model.eigenvalues) if lam.imag >= -CONJUGATE_TOL]
    if count < 1 or count > len(reps):
        raise ValidationError(
            f"requested {count} dominant modes but only {len(reps)} conjugate-pair "
            "representatives are available")
    reps.sort(key=lambda i: (-score[i], -abs(model.eigenvalues[i]), i))
    return reps[:count]


def avg_distance_origin(eigenvalues) -> float:
    """Mean |lambda| over the nonzero eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    if lam.size == 0:
        raise ValidationError("no eigenvalues given")
    mags = np.abs(lam)
    mags = mags[mags > 0]
    if mags.size == 0:
        raise ValidationError("all eigenvalues are zero")
    return float(np.mean(mags))


def enclosed_area(points) -> float:
    """Shoelace area of the polygon through ``points`` ordered by angle about their centroid."""
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise ValidationError(f"need at least 3 points, got {z.size}")
    centred = z - z.mean()
    scale = float(np.max(np.abs(centred)))
    if scale == 0.0:
        return 0.0
    u = centred / scale
    cross = u.real[:, None] * u.imag[None, :] - u.imag[:, None] * u.real[None, :]
    if np.max(np.abs(cross)) <= 1e-12:
        return 0.0  # collinear
    order = np.lexsort((np.abs(centred), np.angle(centred)))
    x, y = z.real[order], z.imag[order]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def dominant_area(model: DmdModel, count: int = 5) -> float | None:
    """Enclosed area of the ``count`` dominant eigenvalues (None if fewer than 3 exist)."""
    reps = sum(1 for lam in model.eigenvalues if lam.imag >= -CONJUGATE_TOL)
    count = min(count, reps)
    if count < 3:
        return None
    return enclosed_area(model.eigenvalues[select_dominant(model, count)])


# -- export ------------------------------------------------------------------

def _pairs(values) -> list[list[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex).ravel()]


def model_to_dict(model: DmdModel) -> dict:
    return {
        "rank": model.rank,
        "requested_rank": model.requested_rank,
        "dt": model.dt,
        "embedding_dimension": model.embedding_dimension,
        "eigenvalues": _pairs(model.eigenvalues),
        "amplitudes": None if model.amplitudes is None else _pairs(model.amplitudes),
        "amplitudes_rank_deficient": model.amplitudes_rank_deficient,
        "modes": [_pairs(row) for row in model.modes],
        "singular_values": [float(v) for v in model.singular_values],
        "grid": None if model.grid is None else [float(v) for v in model.grid],
    }


def _complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def model_from_dict(doc: dict) -> DmdModel:
    try:
        return DmdModel(
            rank=int(doc["rank"]),
            modes=_complex(doc["modes"]).reshape(len(doc["modes"]), int(doc["rank"])),
            eigenvalues=_complex(doc["eigenvalues"]),
            amplitudes=None if doc.get("amplitudes") is None else _complex(doc["amplitudes"]),
            dt=float(doc["dt"]),
            singular_values=np.asarray(doc["singular_values"], dtype=float),
            requested_rank=int(doc.get("requested_rank", doc["rank"])),
            amplitudes_rank_deficient=bool(doc.get("amplitudes_rank_deficient", False)),
            embedding_dimension=int(doc.get("embedding_dimension", 1)),
            grid=None if doc.get("grid") is None else np.asarray(doc["grid"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"malformed model document: {exc}") from None


def save_model(model: DmdModel, path, extra: dict | None = None) -> None:
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> DmdModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc)


def write_spectrum_csv(points: list[SpectrumPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue_re", "eigenvalue_im", "frequency_hz",
                         "growth_rate", "amplitude"])
        for i, p in enumerate(points):
            writer.writerow([i, repr(p.eigenvalue.real), repr(p.eigenvalue.imag),
                             repr(p.frequency_hz), repr(p.growth_rate), repr(p.amplitude)])
