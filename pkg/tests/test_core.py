import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import blindunmix as bu


class TestSpectralScene:
    def test_shape_properties(self):
        scene = bu.SpectralScene(np.ones((3, 5)))
        assert scene.band_count == 3
        assert scene.pixel_count == 5

    def test_rejects_non_finite(self):
        data = np.ones((2, 2))
        data[0, 1] = np.nan
        with pytest.raises(bu.InvalidInput):
            bu.SpectralScene(data)

    def test_rejects_empty_and_1d(self):
        with pytest.raises(bu.DimensionError):
            bu.SpectralScene(np.ones((0, 3)))
        with pytest.raises(bu.DimensionError):
            bu.SpectralScene(np.ones(4))

    def test_immutable_and_copied(self):
        data = np.ones((2, 2))
        scene = bu.SpectralScene(data)
        data[0, 0] = 7.0
        assert scene.data[0, 0] == 1.0
        with pytest.raises(ValueError):
            scene.data[0, 0] = 3.0


class TestRestrictColumns:
    def test_full_restriction_is_identity(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 3)))
        cand = bu.restrict_columns(scene, [0, 1, 2])
        np.testing.assert_array_equal(cand.columns, scene.data)

    def test_single_column(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 3)))
        cand = bu.restrict_columns(scene, [1])
        np.testing.assert_array_equal(cand.columns[:, 0], scene.data[:, 1])
        assert cand.size == 1

    def test_duplicate_index(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 3)))
        with pytest.raises(bu.DuplicateIndex):
            bu.restrict_columns(scene, [0, 0])

    def test_out_of_range(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 3)))
        with pytest.raises(bu.InvalidIndex):
            bu.restrict_columns(scene, [3])
        with pytest.raises(bu.InvalidIndex):
            bu.restrict_columns(scene, [-1])

    def test_no_aliasing(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 3)))
        cand = bu.restrict_columns(scene, [0, 2])
        copied = np.array(cand.columns)
        copied[0, 0] = 99.0
        assert scene.data[0, 0] != 99.0

    def test_order_preserved(self, rng):
        scene = bu.SpectralScene(rng.uniform(0, 1, (4, 5)))
        cand = bu.restrict_columns(scene, [3, 0])
        np.testing.assert_array_equal(cand.columns[:, 0], scene.data[:, 3])
        np.testing.assert_array_equal(cand.columns[:, 1], scene.data[:, 0])


class TestAbundanceEstimate:
    def test_certify_measures_violation(self):
        x = np.array([[0.6, 1.0], [0.4, 0.0]])
        est = bu.AbundanceEstimate.certify(x)
        assert est.feasibility_tolerance == 0.0

    def test_certify_tolerates_small_negatives(self):
        x = np.array([[1.0 + 1e-9], [-1e-9]])
        est = bu.AbundanceEstimate.certify(x)
        assert est.feasibility_tolerance <= 2e-9

    def test_rejects_violation_beyond_tolerance(self):
        x = np.array([[0.5], [0.1]])
        with pytest.raises(bu.InvalidInput):
            bu.AbundanceEstimate(x=x, feasibility_tolerance=0.01)


class TestSceneGroundTruth:
    def test_valid_truth(self, rng):
        spectra = rng.uniform(0, 1, (5, 2))
        abundances = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.7]])
        truth = bu.SceneGroundTruth(spectra, abundances, [0, 1], 0.0)
        assert truth.endmember_count == 2

    def test_rejects_bad_column_sums(self, rng):
        spectra = rng.uniform(0, 1, (5, 2))
        abundances = np.array([[0.6, 0.0], [0.0, 1.0]])
        with pytest.raises(bu.InvalidInput):
            bu.SceneGroundTruth(spectra, abundances, [0, 1], 0.0)


class TestMatrixIO:
    def test_binary_round_trip(self, tmp_path):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        path = tmp_path / "m.hsm"
        bu.write_matrix(path, m)
        np.testing.assert_array_equal(bu.read_matrix(path), m)

    def test_csv_round_trip(self, tmp_path):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        path = tmp_path / "m.csv"
        bu.write_matrix(path, m)
        np.testing.assert_array_equal(bu.read_matrix(path), m)

    def test_csv_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# header\n1.0,2.0\n\n3.5,4.5\n")
        np.testing.assert_array_equal(
            bu.read_matrix(path), [[1.0, 2.0], [3.5, 4.5]]
        )

    def test_csv_ragged_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(bu.FormatError):
            bu.read_matrix(path)

    def test_csv_non_numeric(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,spam\n")
        with pytest.raises(bu.FormatError):
            bu.read_matrix(path)

    def test_binary_truncated_payload(self, tmp_path):
        path = tmp_path / "m.hsm"
        bu.write_matrix(path, np.ones((2, 2)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(bu.FormatError):
            bu.read_matrix(path)

    def test_binary_bad_magic(self, tmp_path):
        path = tmp_path / "m.hsm"
        bu.write_matrix(path, np.ones((2, 2)))
        blob = path.read_bytes()
        path.write_bytes(b"XXXX" + blob[4:])
        with pytest.raises(bu.FormatError):
            bu.read_matrix(path)

    def test_binary_trailing_bytes(self, tmp_path):
        path = tmp_path / "m.hsm"
        bu.write_matrix(path, np.ones((2, 2)))
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(bu.FormatError):
            bu.read_matrix(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(bu.FormatError):
            bu.read_matrix(tmp_path / "nope.hsm")

    def test_column_major_on_disk(self, tmp_path):
        # payload is column-major: first column precedes the second
        m = np.array([[1.0, 3.0], [2.0, 4.0]])
        path = tmp_path / "m.hsm"
        bu.write_matrix(path, m)
        payload = np.frombuffer(path.read_bytes()[20:], dtype="<f8")
        np.testing.assert_array_equal(payload, [1.0, 2.0, 3.0, 4.0])

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(1, 6), st.integers(1, 6)),
            elements=st.floats(
                allow_nan=False, allow_infinity=False, width=64,
                min_value=-1e12, max_value=1e12,
            ),
        )
    )
    def test_binary_round_trip_exact(self, matrix):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "m.hsm"
            bu.write_matrix(path, matrix)
            back = bu.read_matrix(path)
        np.testing.assert_array_equal(back, matrix)
