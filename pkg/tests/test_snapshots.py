import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from modal_sentinel.errors import SnapshotFormatError, ValidationError
from modal_sentinel.snapshots import (
    SnapshotMatrix, build_hankel, cumulative_energy, delay_embed, intensity_mapping, load_csv,
    load_frame_sequence, read_pgm, render_frames, split_train_test, write_csv, write_energy_csv,
    write_pgm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def _write_meta(path, **meta):
    path.write_text(json.dumps(meta))


class TestSnapshotMatrix:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.zeros(5), 0.1)
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.zeros((3, 1)), 0.1)
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.array([[0.0, np.nan]]), 0.1)
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.zeros((2, 3)), 0.0)
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.zeros((2, 3)), 0.1, grid=[0.0, 0.0])
        with pytest.raises(ValidationError):
            SnapshotMatrix(np.zeros((2, 3)), 0.1, source="camera")

    def test_times(self):
        snap = SnapshotMatrix(np.zeros((2, 4)), 0.5)
        np.testing.assert_array_equal(snap.times, [0.0, 0.5, 1.0, 1.5])


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path, rng):
        snap = SnapshotMatrix(rng.standard_normal((4, 9)) * 1e-3, 1e-3, np.linspace(0, 1, 4),
                              "simulation")
        write_csv(snap, tmp_path / "s.csv")
        back = load_csv(tmp_path / "s.csv")
        assert np.array_equal(back.data, snap.data)
        assert np.array_equal(back.grid, snap.grid)
        assert back.dt == snap.dt and back.source == "simulation"
        meta = json.loads((tmp_path / "s.json").read_text())
        assert set(meta) == {"dt", "grid", "source"}

    def test_no_header_one_channel_per_row(self, tmp_path):
        snap = SnapshotMatrix(np.arange(6.0).reshape(2, 3), 0.1)
        write_csv(snap, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines == ["0,1,2", "3,4,5"]

    def test_ragged_row(self, tmp_path):
        (tmp_path / "s.csv").write_text("1,2,3\n4,5\n")
        _write_meta(tmp_path / "s.json", dt=0.1, grid=None, source="csv")
        with pytest.raises(SnapshotFormatError, match="ragged row 2"):
            load_csv(tmp_path / "s.csv")

    def test_non_numeric_cell(self, tmp_path):
        (tmp_path / "s.csv").write_text("1,2,3\n4,x,6\n")
        _write_meta(tmp_path / "s.json", dt=0.1, grid=None, source="csv")
        with pytest.raises(SnapshotFormatError, match="row 2, column 2"):
            load_csv(tmp_path / "s.csv")

    def test_missing_dt(self, tmp_path):
        (tmp_path / "s.csv").write_text("1,2,3\n")
        _write_meta(tmp_path / "s.json", grid=None, source="csv")
        with pytest.raises(SnapshotFormatError, match="dt"):
            load_csv(tmp_path / "s.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv")

    def test_empty_file(self, tmp_path):
        (tmp_path / "s.csv").write_text("")
        _write_meta(tmp_path / "s.json", dt=0.1)
        with pytest.raises(SnapshotFormatError):
            load_csv(tmp_path / "s.csv")


class TestHankel:
    def test_scalar_example(self):
        H = build_hankel(np.arange(5.0), 3)
        np.testing.assert_array_equal(H, [[0, 1, 2], [1, 2, 3], [2, 3, 4]])

    @settings(max_examples=50, deadline=None)
    @given(series=arrays(float, st.integers(2, 40), elements=finite), data=st.data())
    def test_dimensions_and_antidiagonals(self, series, data):
        p = data.draw(st.integers(1, len(series) - 1))
        H = build_hankel(series, p)
        assert H.shape == (p, len(series) - p + 1)
        for i in range(p):
            for j in range(H.shape[1]):
                assert H[i, j] == series[i + j]

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 5), length=st.integers(3, 20), data=st.data())
    def test_channel_major_blocks(self, n, length, data):
        p = data.draw(st.integers(1, length - 1))
        x = np.arange(n * length, dtype=float).reshape(n, length)
        H = build_hankel(x, p)
        assert H.shape == (n * p, length - p + 1)
        for c in range(n):
            np.testing.assert_array_equal(H[c * p:(c + 1) * p], build_hankel(x[c], p))
        # undelayed rows are the original channels
        np.testing.assert_array_equal(H[0::p], x[:, :length - p + 1])

    def test_invalid_p(self):
        with pytest.raises(ValidationError):
            build_hankel(np.arange(5.0), 0)
        with pytest.raises(ValidationError):
            build_hankel(np.arange(5.0), 5)

    def test_delay_embed_p1_is_copy(self):
        snap = SnapshotMatrix(np.ones((2, 4)), 1.0)
        out = delay_embed(snap, 1)
        out[0, 0] = 5.0
        assert snap.data[0, 0] == 1.0


class TestSplit:
    def test_sixty_forty(self, healthy):
        snap, _ = healthy
        train, test = split_train_test(snap, 0.6)
        assert train.n_samples == 1620 and test.n_samples == 1080
        assert np.array_equal(np.hstack([train.data, test.data]), snap.data)

    @pytest.mark.parametrize("fraction,m", [(0.0, 10), (1.0, 10), (0.1, 10), (0.9, 10)])
    def test_degenerate_splits_rejected(self, fraction, m):
        with pytest.raises(ValidationError):
            split_train_test(SnapshotMatrix(np.zeros((1, m)), 1.0), fraction)


class TestEnergy:
    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.integers(1, 30), elements=st.floats(1e-6, 1e6)))
    def test_terminates_at_one_and_monotone(self, s):
        s = np.sort(s)[::-1]
        curve = cumulative_energy(s)
        assert curve.fractions[-1] == 1.0
        assert np.all(np.diff(curve.fractions) >= 0)

    def test_squared_values(self):
        curve = cumulative_energy([4.0, 3.0])
        np.testing.assert_allclose(curve.fractions, [16 / 25, 1.0])
        assert curve.rank_for(0.6) == 1
        assert curve.rank_for(0.7) == 2
        assert curve.rank_for(1.0) == 2

    def test_invalid(self):
        for bad in ([], [1.0, 2.0], [-1.0], [0.0, 0.0]):
            with pytest.raises(ValidationError):
                cumulative_energy(bad)

    def test_csv(self, tmp_path):
        s = np.array([2.0, 1.0])
        write_energy_csv(cumulative_energy(s), s, tmp_path / "e.csv")
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert lines[0] == "rank,singular_value,cumulative_energy"
        assert lines[-1].endswith(",1")


class TestFrames:
    def test_pgm_round_trip(self, tmp_path, rng):
        img = rng.integers(0, 256, (7, 5)).astype(np.uint8)
        write_pgm(tmp_path / "a.pgm", img)
        assert np.array_equal(read_pgm(tmp_path / "a.pgm"), img)

    def test_pgm_header_comments(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P5\n# comment\n2 1\n255\n\x01\x02")
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), [[1, 2]])

    @pytest.mark.parametrize("payload", [b"P2\n2 1\n255\n12", b"P5\n2 1\n255\n\x01",
                                         b"P5\n2 x\n255\n\x01\x02", b"P5\n2 1\n65535\n\x01\x02"])
    def test_malformed_pgm(self, tmp_path, payload):
        (tmp_path / "a.pgm").write_bytes(payload)
        with pytest.raises(SnapshotFormatError):
            read_pgm(tmp_path / "a.pgm")

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_frame_sequence(tmp_path / "none", 1e-3)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(SnapshotFormatError):
            load_frame_sequence(tmp_path, 1e-3)

    def test_inconsistent_frame_shapes(self, tmp_path):
        write_pgm(tmp_path / "f0.pgm", np.zeros((2, 2)))
        write_pgm(tmp_path / "f1.pgm", np.zeros((2, 3)))
        with pytest.raises(SnapshotFormatError):
            load_frame_sequence(tmp_path, 1e-3)

    def test_roi_and_layout(self, tmp_path):
        for j in range(3):
            write_pgm(tmp_path / f"f{j}.pgm", np.arange(12).reshape(3, 4) + 10 * j)
        snap = load_frame_sequence(tmp_path, 0.01, roi=(1, 1, 2, 2))
        np.testing.assert_array_equal(snap.data[:, 0], [5, 6, 9, 10])
        np.testing.assert_array_equal(snap.data[0], [5, 15, 25])
        assert snap.source == "frames" and snap.dt == 0.01
        with pytest.raises(ValidationError):
            load_frame_sequence(tmp_path, 0.01, roi=(2, 2, 2, 4))

    def test_line_roi_gets_grid(self, tmp_path):
        for j in range(2):
            write_pgm(tmp_path / f"f{j}.pgm", np.full((1, 4), j))
        snap = load_frame_sequence(tmp_path, 0.01, pixel_pitch=0.5)
        np.testing.assert_array_equal(snap.grid, [0.0, 0.5, 1.0, 1.5])

    def test_mean_subtract(self, tmp_path):
        for j in range(4):
            write_pgm(tmp_path / f"f{j}.pgm", np.full((1, 3), 10 * j))
        snap = load_frame_sequence(tmp_path, 0.01, mean_subtract=True)
        np.testing.assert_allclose(snap.data.mean(axis=1), 0.0, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(data=arrays(float, st.tuples(st.integers(1, 6), st.integers(2, 12)),
                       elements=st.floats(-1.0, 1.0)))
    def test_frames_match_csv_within_quantization(self, data, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("frames")
        snap = SnapshotMatrix(data, 1e-3)
        write_csv(snap, tmp / "s.csv")
        from_csv = load_csv(tmp / "s.csv")
        scale, offset = intensity_mapping(snap.data)
        render_frames(snap, tmp / "frames", scale, offset)
        frames = load_frame_sequence(tmp / "frames", 1e-3)
        recovered = (frames.data - offset) / scale
        assert np.max(np.abs(recovered - from_csv.data)) <= 0.5 / scale + 1e-12

    def test_render_shape_mismatch(self, tmp_path):
        snap = SnapshotMatrix(np.zeros((3, 2)), 1.0)
        with pytest.raises(ValidationError):
            render_frames(snap, tmp_path, 1.0, 0.0, shape=(2, 2))
