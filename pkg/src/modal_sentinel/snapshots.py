"""Snapshot matrices: CSV and PGM-frame ingestion, delay embedding, splitting
and singular-value energy curves."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError, ValidationError

SOURCES = ("simulation", "csv", "frames")


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """Real measurements, one spatial channel per row and one time sample per column."""

    data: np.ndarray
    dt: float
    grid: np.ndarray | None = None
    source: str = "csv"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValidationError(f"snapshot data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 2:
            raise ValidationError("snapshot matrix needs at least two time samples")
        if not np.all(np.isfinite(data)):
            raise ValidationError("snapshot data contains non-finite values")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.source not in SOURCES:
            raise ValidationError(f"source must be one of {SOURCES}, got {self.source!r}")
        grid = self.grid
        if grid is not None:
            grid = np.asarray(grid, dtype=float)
            if grid.shape != (data.shape[0],):
                raise ValidationError(
                    f"grid has {grid.size} points but data has {data.shape[0]} channels")
            if np.any(np.diff(grid) <= 0):
                raise ValidationError("grid must be strictly increasing")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "grid", grid)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_samples)

    def with_data(self, data: np.ndarray) -> "SnapshotMatrix":
        return SnapshotMatrix(data, self.dt, self.grid, self.source)


# -- CSV ---------------------------------------------------------------------

def _default_meta_path(data_path: Path) -> Path:
    return data_path.with_suffix(".json")


def write_csv(snap: SnapshotMatrix, data_path, meta_path=None) -> None:
    """Write the canonical CSV (17 significant digits) plus sidecar JSON metadata."""
    data_path = Path(data_path)
    meta_path = Path(meta_path) if meta_path is not None else _default_meta_path(data_path)
    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        for row in snap.data:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")
    meta = {
        "dt": snap.dt,
        "grid": None if snap.grid is None else [float(v) for v in snap.grid],
        "source": snap.source,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_csv(data_path, meta_path=None) -> SnapshotMatrix:
    """Parse a snapshot CSV (no header, one channel per row) and its metadata."""
    data_path = Path(data_path)
    meta_path = Path(meta_path) if meta_path is not None else _default_meta_path(data_path)
    rows: list[list[float]] = []
    with open(data_path, encoding="utf-8", newline="") as fh:
        for i, record in enumerate(csv.reader(fh), start=1):
            if not record:
                continue
            if rows and len(record) != len(rows[0]):
                raise SnapshotFormatError(
                    f"{data_path}: ragged row {i}: expected {len(rows[0])} values, "
                    f"found {len(record)}")
            values = []
            for j, cell in enumerate(record, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise SnapshotFormatError(
                        f"{data_path}: row {i}, column {j}: non-numeric cell {cell!r}") from None
            rows.append(values)
    if not rows:
        raise SnapshotFormatError(f"{data_path}: no data rows")

    with open(meta_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"{meta_path}: invalid JSON ({exc})") from None
    if "dt" not in meta or meta["dt"] is None:
        raise SnapshotFormatError(f"{meta_path}: missing 'dt'")
    try:
        return SnapshotMatrix(np.array(rows), float(meta["dt"]), meta.get("grid"),
                              meta.get("source") or "csv")
    except (ValidationError, TypeError) as exc:
        raise SnapshotFormatError(f"{data_path}: {exc}") from None


# -- PGM frames --------------------------------------------------------------

def _pgm_tokens(buf: bytes, count: int, pos: int):
    tokens = []
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SnapshotFormatError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit grayscale PGM (P5) image as a (height, width) uint8 array."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise SnapshotFormatError(f"{path}: not a binary PGM (magic {buf[:2]!r})")
    try:
        (w, h, maxval), pos = _pgm_tokens(buf, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise SnapshotFormatError(f"{path}: malformed PGM header") from None
    if maxval > 255 or maxval < 1:
        raise SnapshotFormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace before the raster
    raster = buf[pos:pos + width * height]
    if len(raster) != width * height:
        raise SnapshotFormatError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def write_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValidationError("PGM image must be 2-D")
    img = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def load_frame_sequence(directory, dt: float, roi=None, mean_subtract: bool = False,
                        pixel_pitch: float | None = None) -> SnapshotMatrix:
    """Stack PGM frames (lexicographic order) into a snapshot matrix.

    ``roi`` is ``(row, col, height, width)`` in pixels; each frame's ROI is
    flattened row-major into one column. A grid is attached only when the ROI
    is a single row or column and ``pixel_pitch`` is given.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise SnapshotFormatError(f"{directory}: no .pgm frames")
    first = read_pgm(files[0])
    if roi is None:
        roi = (0, 0, first.shape[0], first.shape[1])
    r0, c0, rh, rw = (int(v) for v in roi)
    if r0 < 0 or c0 < 0 or rh < 1 or rw < 1 or r0 + rh > first.shape[0] or c0 + rw > first.shape[1]:
        raise ValidationError(f"ROI {tuple(roi)} outside frame of shape {first.shape}")

    columns = []
    for path in files:
        frame = first if path == files[0] else read_pgm(path)
        if frame.shape != first.shape:
            raise SnapshotFormatError(
                f"{path.name}: frame shape {frame.shape} differs from {first.shape}")
        columns.append(frame[r0:r0 + rh, c0:c0 + rw].reshape(-1))
    data = np.stack(columns, axis=1).astype(float)
    if mean_subtract:
        data = data - data.mean(axis=1, keepdims=True)
    grid = None
    if pixel_pitch is not None and (rh == 1 or rw == 1):
        grid = pixel_pitch * np.arange(data.shape[0])
    return SnapshotMatrix(data, dt, grid, "frames")


def intensity_mapping(data: np.ndarray, low: float = 0.0, high: float = 255.0):
    """Affine (scale, offset) mapping the data range onto [low, high]."""
    lo, hi = float(np.min(data)), float(np.max(data))
    if hi == lo:
        return 1.0, 0.5 * (low + high) - lo
    scale = (high - low) / (hi - lo)
    return scale, low - lo * scale


def render_frames(snap: SnapshotMatrix, directory, scale: float, offset: float,
                  shape=None, prefix: str = "frame") -> list[Path]:
    """Write each column as an 8-bit PGM with intensity ``offset + scale * value``.

    ``shape`` defaults to a single-row image of width ``n_channels``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shape = (1, snap.n_channels) if shape is None else tuple(shape)
    if shape[0] * shape[1] != snap.n_channels:
        raise ValidationError(f"frame shape {shape} does not hold {snap.n_channels} channels")
    width = len(str(snap.n_samples - 1))
    paths = []
    for j in range(snap.n_samples):
        path = directory / f"{prefix}_{j:0{width}d}.pgm"
        write_pgm(path, (offset + scale * snap.data[:, j]).reshape(shape))
        paths.append(path)
    return paths


# -- delay embedding, splitting, energy --------------------------------------

def build_hankel(series, p: int) -> np.ndarray:
    """Hankel matrix with ``p`` rows per channel and N - p + 1 columns.

    A 1-D series gives H[i, j] = x[i + j]. A 2-D input (channels x samples)
    gives per-channel blocks stacked vertically in channel order.
    """
    x = np.asarray(series)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2:
        raise ValidationError("series must be 1-D or 2-D (channels x samples)")
    n, length = x.shape
    if not (1 <= p <= length - 1):
        raise ValidationError(f"embedding dimension must be in [1, {length - 1}], got {p}")
    windows = np.lib.stride_tricks.sliding_window_view(x, p, axis=1)  # (n, q, p)
    blocks = np.swapaxes(windows, 1, 2).reshape(n * p, length - p + 1)
    return np.ascontiguousarray(blocks)


def delay_embed(snap: SnapshotMatrix, p: int) -> np.ndarray:
    return snap.data.copy() if p == 1 else build_hankel(snap.data, p)


def split_train_test(snap: SnapshotMatrix, fraction: float):
    """Contiguous split: the first floor(fraction * m) columns train, the rest test."""
    if not (0.0 < fraction < 1.0):
        raise ValidationError(f"train fraction must lie in (0, 1), got {fraction}")
    m = snap.n_samples
    n_train = math.floor(fraction * m + 1e-9)
    if n_train < 2:
        raise ValidationError(f"train split has {n_train} columns; need at least 2")
    if m - n_train < 2:
        raise ValidationError(f"train split leaves {m - n_train} test columns; need at least 2")
    train = SnapshotMatrix(snap.data[:, :n_train], snap.dt, snap.grid, snap.source)
    test = SnapshotMatrix(snap.data[:, n_train:], snap.dt, snap.grid, snap.source)
    return train, test


@dataclass(frozen=True, eq=False)
class EnergyCurve:
    fractions: np.ndarray

    def rank_for(self, threshold: float) -> int:
        """Smallest rank whose cumulative energy reaches ``threshold``."""
        if not (0.0 < threshold <= 1.0):
            raise ValidationError(f"energy threshold must lie in (0, 1], got {threshold}")
        return int(np.searchsorted(self.fractions, threshold - 1e-15) + 1)


def cumulative_energy(singular_values) -> EnergyCurve:
    """Cumulative fraction of squared singular values."""
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValidationError("singular values must be a non-empty 1-D sequence")
    if np.any(s < 0):
        raise ValidationError("singular values must be non-negative")
    if np.any(np.diff(s) > 0):
        raise ValidationError("singular values must be sorted in non-increasing order")
    if not np.any(s > 0):
        raise ValidationError("all singular values are zero")
    acc = np.cumsum(s**2)
    return EnergyCurve(acc / acc[-1])


def write_energy_csv(curve: EnergyCurve, singular_values, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("rank,singular_value,cumulative_energy\n")
        for i, (s, c) in enumerate(zip(singular_values, curve.fractions), start=1):
            fh.write(f"{i},{format(float(s), '.17g')},{format(float(c), '.17g')}\n")
