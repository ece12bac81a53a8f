"""Dataset ingestion: CIFAR-10 binary format, raw-tensor containers, blobs."""

import numpy as np
import pytest

from pilot.data import (
    CIFAR_RECORD,
    DataError,
    blob_bayes_accuracy,
    load_cifar10,
    load_raw_tensor,
    raw_tensor_dataset,
    save_raw_tensor,
    synth_blobs,
)
from pilot.nets import ClassifierSpec
from pilot.train import TrainConfig, train


def write_cifar_batch(path, n_records, label_fn=lambda i: i % 10, pixel=7):
    recs = np.zeros((n_records, CIFAR_RECORD), dtype=np.uint8)
    recs[:, 0] = [label_fn(i) for i in range(n_records)]
    recs[:, 1:] = pixel
    path.write_bytes(recs.tobytes())


@pytest.fixture
def cifar_dir(tmp_path):
    for i in range(1, 6):
        write_cifar_batch(tmp_path / f"data_batch_{i}.bin", 10_000)
    write_cifar_batch(tmp_path / "test_batch.bin", 10_000)
    return tmp_path


class TestCifarLoader:
    def test_standard_batches_give_expected_split(self, cifar_dir):
        ds = load_cifar10(cifar_dir)
        assert ds.x_train.shape == (50_000, 3, 32, 32)
        assert ds.x_test.shape == (10_000, 3, 32, 32)
        assert ds.num_classes == 10
        assert ds.image_shape == (3, 32, 32)

    def test_labels_in_range_and_pixels_unit_scaled(self, cifar_dir):
        ds = load_cifar10(cifar_dir)
        assert ds.y_train.min() >= 0 and ds.y_train.max() <= 9
        assert ds.x_train.min() >= 0.0 and ds.x_train.max() <= 1.0
        np.testing.assert_allclose(ds.x_train, 7 / 255.0)

    def test_truncated_file_reports_offset(self, tmp_path):
        for i in range(1, 6):
            write_cifar_batch(tmp_path / f"data_batch_{i}.bin", 4)
        write_cifar_batch(tmp_path / "test_batch.bin", 4)
        full = (tmp_path / "data_batch_3.bin").read_bytes()
        (tmp_path / "data_batch_3.bin").write_bytes(full[:-100])
        with pytest.raises(DataError, match=r"byte 9219"):
            load_cifar10(tmp_path)

    def test_label_out_of_range_rejected(self, tmp_path):
        for i in range(1, 6):
            write_cifar_batch(tmp_path / f"data_batch_{i}.bin", 4)
        write_cifar_batch(tmp_path / "test_batch.bin", 4, label_fn=lambda i: 11 if i == 2 else 0)
        with pytest.raises(DataError, match="label 11 > 9 in record 2"):
            load_cifar10(tmp_path)

    def test_missing_batch_file(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            load_cifar10(tmp_path)

    def test_fuzzed_truncations_always_rejected_with_offset(self, tmp_path):
        for i in range(1, 6):
            write_cifar_batch(tmp_path / f"data_batch_{i}.bin", 3)
        write_cifar_batch(tmp_path / "test_batch.bin", 3)
        target = tmp_path / "data_batch_2.bin"
        full = target.read_bytes()
        rng = np.random.default_rng(99)
        for _ in range(20):
            cut = int(rng.integers(1, len(full)))
            if cut % CIFAR_RECORD == 0:
                cut += 1
            target.write_bytes(full[:cut])
            with pytest.raises(DataError, match="byte"):
                load_cifar10(tmp_path)
        target.write_bytes(full)
        load_cifar10(tmp_path)      # restored file parses again


class TestRawTensor:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.random((12, 2, 4, 4))
        labels = rng.integers(0, 3, 12)
        path = tmp_path / "split.ptc"
        save_raw_tensor(path, images, labels)
        back_images, back_labels = load_raw_tensor(path)
        np.testing.assert_array_equal(back_images, images)
        np.testing.assert_array_equal(back_labels, labels)

    def test_uint8_images_scaled(self, tmp_path):
        images = np.full((3, 1, 2, 2), 51, dtype=np.uint8)
        save_raw_tensor(tmp_path / "u8.ptc", images, np.zeros(3, dtype=np.int64))
        back, _ = load_raw_tensor(tmp_path / "u8.ptc")
        np.testing.assert_allclose(back, 0.2)

    def test_count_mismatch_rejected(self, tmp_path):
        with pytest.raises(DataError, match="count"):
            save_raw_tensor(tmp_path / "bad.ptc", np.zeros((4, 1, 2, 2)), np.zeros(3))

    def test_missing_tensor_name(self, tmp_path):
        from pilot.checkpoint import save_tensors
        path = tmp_path / "not_dataset.ptc"
        save_tensors(path, {"images": np.zeros((2, 1, 2, 2))})
        with pytest.raises(DataError, match="labels"):
            load_raw_tensor(path)

    def test_single_example_file_trains_without_crash(self, tmp_path):
        rng = np.random.default_rng(1)
        for name in ("train.ptc", "test.ptc"):
            save_raw_tensor(tmp_path / name, rng.random((1, 1, 4, 4)), np.array([0]))
        ds = raw_tensor_dataset(tmp_path / "train.ptc", tmp_path / "test.ptc", num_classes=2)
        spec = ClassifierSpec(kind="mlp", input_shape=ds.input_shape, num_classes=2, hidden=(4,))
        cfg = TrainConfig(method="vanilla", epochs=1, batch_size=4, seed=0)
        bundle, log = train(spec, cfg, ds)
        assert len(log.rows) == 1


class TestSynthBlobs:
    def test_deterministic_under_seed(self):
        a = synth_blobs(3, 50, 5, 2.0, seed=9)
        b = synth_blobs(3, 50, 5, 2.0, seed=9)
        np.testing.assert_array_equal(a.x_train, b.x_train)
        np.testing.assert_array_equal(a.y_train, b.y_train)

    def test_shapes_and_classes(self):
        ds = synth_blobs(4, 25, 6, 3.0, seed=0, n_test_per_class=10)
        assert ds.x_train.shape == (100, 6)
        assert ds.x_test.shape == (40, 6)
        assert set(np.unique(ds.y_train)) == {0, 1, 2, 3}
        assert ds.image_shape is None

    def test_label_noise_flips_fraction(self):
        clean = synth_blobs(3, 2000, 4, 3.0, seed=5, label_noise=0.0)
        noisy = synth_blobs(3, 2000, 4, 3.0, seed=5, label_noise=0.1)
        flipped = (clean.y_train != noisy.y_train).mean()
        assert abs(flipped - 0.1) < 0.02

    def test_bayes_accuracy_zero_separation(self):
        assert abs(blob_bayes_accuracy(2, 0.0) - 0.5) < 1e-12
        assert abs(blob_bayes_accuracy(4, 0.0, n_mc=100_000) - 0.25) < 0.01

    def test_bayes_accuracy_wide_separation(self):
        assert blob_bayes_accuracy(2, 10.0) > 0.999

    def test_dim_must_fit_classes(self):
        with pytest.raises(ValueError, match="dim"):
            synth_blobs(5, 10, 3, 1.0, seed=0)
