"""Tests for blob synthesis and CSV round-tripping."""

import numpy as np
import pytest

from dpscale import BlobSpec, TrainConfig, gd_train, gen_blobs, load_csv, write_csv
from dpscale.data import CsvParseError


class TestBlobSpec:
    def test_defaults_valid(self):
        spec = BlobSpec(n_classes=3, dim=4, n_samples=100, separation=2.0)
        assert spec.split == 0.8

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_classes=1, dim=4, n_samples=100, separation=2.0),
            dict(n_classes=3, dim=4, n_samples=2, separation=2.0),
            dict(n_classes=3, dim=4, n_samples=100, separation=0.0),
            dict(n_classes=3, dim=4, n_samples=100, separation=2.0, split=1.0),
            dict(n_classes=3, dim=4, n_samples=100, separation=2.0, anisotropy=0.5),
        ],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ValueError):
            BlobSpec(**kwargs)


class TestGenBlobs:
    def test_split_sizes(self):
        spec = BlobSpec(n_classes=3, dim=4, n_samples=1000, separation=2.0, split=0.8)
        train, test = gen_blobs(spec)
        assert train.n_samples == 800
        assert test.n_samples == 200

    def test_deterministic_per_seed(self):
        spec = BlobSpec(n_classes=3, dim=4, n_samples=200, separation=2.0, seed=42)
        a_train, a_test = gen_blobs(spec)
        b_train, b_test = gen_blobs(spec)
        assert np.array_equal(a_train.features, b_train.features)
        assert np.array_equal(a_train.labels, b_train.labels)
        assert np.array_equal(a_test.features, b_test.features)

    def test_different_seeds_differ(self):
        base = dict(n_classes=3, dim=4, n_samples=200, separation=2.0)
        a, _ = gen_blobs(BlobSpec(seed=0, **base))
        b, _ = gen_blobs(BlobSpec(seed=1, **base))
        assert not np.array_equal(a.features, b.features)

    def test_center_separation(self):
        # With tiny noise every class mean sits near its center; check the
        # pairwise gaps respect the requested separation.
        spec = BlobSpec(n_classes=5, dim=8, n_samples=2000, separation=6.0, noise_scale=0.01)
        train, _ = gen_blobs(spec)
        means = np.array(
            [train.features[train.labels == k].mean(axis=0) for k in range(5)]
        )
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(means[i] - means[j]) >= 6.0 - 0.1

    def test_easy_blobs_reach_full_train_accuracy(self):
        spec = BlobSpec(n_classes=3, dim=8, n_samples=300, separation=10.0, noise_scale=0.1)
        train, _ = gen_blobs(spec)
        result = gd_train(train, TrainConfig(eta=0.5, T=200))
        assert result.train_accuracy == 1.0

    def test_anisotropic_noise_has_spread_spectrum(self):
        spec = BlobSpec(
            n_classes=2, dim=16, n_samples=4000, separation=3.0, anisotropy=30.0
        )
        train, _ = gen_blobs(spec)
        centered = train.features - np.array(
            [train.features[train.labels == k].mean(axis=0) for k in range(2)]
        )[train.labels]
        eigs = np.linalg.eigvalsh(np.cov(centered.T))
        assert eigs.max() / eigs.min() > 100.0  # variance ratio ~ anisotropy^2


class TestCsvRoundTrip:
    def test_write_then_load_identical(self, tmp_path):
        spec = BlobSpec(n_classes=3, dim=5, n_samples=50, separation=2.0)
        train, _ = gen_blobs(spec)
        path = tmp_path / "data.csv"
        write_csv(path, train)
        loaded = load_csv(path)
        assert np.array_equal(loaded.features, train.features)
        assert np.array_equal(loaded.labels, train.labels)
        assert loaded.n_classes == train.n_classes

    def test_two_row_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("0,1.5,-2.25\n1,0.125,3.0\n")
        data = load_csv(path)
        assert data.n_samples == 2
        assert data.n_classes == 2
        np.testing.assert_array_equal(data.features, [[1.5, -2.25], [0.125, 3.0]])

    def test_max_label_sets_class_count(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("0,1.0\n4,2.0\n")
        assert load_csv(path).n_classes == 5

    def test_nan_cell_names_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0,2.0\n1,NaN,3.0\n")
        with pytest.raises(CsvParseError) as exc:
            load_csv(path)
        assert exc.value.row == 2
        assert exc.value.col == 2

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,hello\n")
        with pytest.raises(CsvParseError):
            load_csv(path)

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,1.0\n")
        with pytest.raises(CsvParseError) as exc:
            load_csv(path)
        assert exc.value.col == 1

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError):
            load_csv(path)

    def test_header_skipped_when_flagged(self, tmp_path):
        path = tmp_path / "headed.csv"
        path.write_text("label,f0\n0,1.0\n1,2.0\n")
        data = load_csv(path, header=True)
        assert data.n_samples == 2
