"""Spot checks on the published full-scale reference fixtures."""

from pilot.references import REFERENCE_RESULTS, reference_for


class TestReferenceFixtures:
    def test_headline_cnn_cifar10_values(self):
        pilot = reference_for("cnn", "cifar10", "pilot_a_aug")
        assert pilot == {"accuracy": 0.701, "nll": 0.87, "ece": 0.012}
        vanilla = reference_for("cnn", "cifar10", "vanilla")
        assert vanilla["nll"] == 3.54
        assert vanilla["ece"] == 0.308

    def test_unknown_combination_is_none(self):
        assert reference_for("mlp", "blobs", "vanilla") is None
        assert reference_for("rnn", "cifar10", "vanilla") is None

    def test_every_entry_well_formed(self):
        for (arch, dataset, label), metrics in REFERENCE_RESULTS.items():
            assert arch in ("cnn", "mlp")
            assert dataset in ("cifar10", "svhn")
            assert set(metrics) == {"accuracy", "nll", "ece"}
            assert 0.0 < metrics["accuracy"] < 1.0
            assert metrics["nll"] > 0.0
            assert 0.0 <= metrics["ece"] < 1.0

    def test_both_datasets_present_per_label(self):
        labels = {(arch, label) for arch, _, label in REFERENCE_RESULTS}
        for arch, label in labels:
            assert ("%s" % arch, "cifar10", label) in REFERENCE_RESULTS
            assert ("%s" % arch, "svhn", label) in REFERENCE_RESULTS
