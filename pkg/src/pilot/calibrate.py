"""Test-time evaluation: accuracy, NLL, ECE, reliability bins, entropy
histograms, Monte Carlo prediction, and uniform-weight ensembling.

Confidence is the max probability of a prediction row. Reliability bins are
M equal-width right-closed intervals over [0, 1]; empty bins carry count 0
and drop out of the expected calibration error through the count weight.
Natural logarithm throughout.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_tensors
from .masks import sample_mask
from .nets import dropout_mask_apply
from . import autodiff as ad

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class EvalConfig:
    n_bins: int = 10
    entropy_bins: int = 20
    mode: str = "plain"         # "plain" | "pilot_mc" | "mc_dropout"
    mc_samples: int = 10
    seed: int = 0
    model_id: str = ""

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("need at least one confidence bin")
        if self.mode not in ("plain", "pilot_mc", "mc_dropout"):
            raise ValueError(f"unknown eval mode {self.mode!r}")


@dataclass
class BinStats:
    lo: float
    hi: float
    count: int
    acc: float
    conf: float


@dataclass
class CalibrationReport:
    model: str
    n: int
    num_classes: int
    accuracy: float
    nll: float
    ece: float
    bins: list = field(default_factory=list)
    entropy_edges: list = field(default_factory=list)
    entropy_counts: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json(self, path) -> None:
        payload = dataclasses.asdict(self)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "CalibrationReport":
        with open(path) as fh:
            payload = json.load(fh)
        payload["bins"] = [BinStats(**b) for b in payload["bins"]]
        return cls(**payload)

    def bins_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("bin_lo,bin_hi,count,acc,conf\n")
            for b in self.bins:
                fh.write(f"{b.lo},{b.hi},{b.count},{b.acc},{b.conf}\n")

    def entropy_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("edge_lo,edge_hi,count\n")
            for lo, hi, c in zip(self.entropy_edges[:-1], self.entropy_edges[1:], self.entropy_counts):
                fh.write(f"{lo},{hi},{c}\n")


def _check_preds(preds: np.ndarray, labels: np.ndarray | None = None):
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2:
        raise ValueError("prediction matrix must be (N, C)")
    if labels is not None:
        labels = np.asarray(labels)
        if len(labels) != len(preds):
            raise ValueError("labels do not match prediction rows")
        if labels.min() < 0 or labels.max() >= preds.shape[1]:
            raise ValueError("label out of range")
    return preds, labels


def confidence(preds: np.ndarray):
    """(confidence, predicted class) per row."""
    preds, _ = _check_preds(preds)
    return preds.max(axis=1), preds.argmax(axis=1)


def accuracy(preds: np.ndarray, labels) -> float:
    preds, labels = _check_preds(preds, labels)
    return float((preds.argmax(axis=1) == labels).mean())


def _bin_index(conf: np.ndarray, n_bins: int) -> np.ndarray:
    # right-closed intervals ((m/M, (m+1)/M]); confidence 0 lands in bin 0
    return np.clip(np.ceil(conf * n_bins).astype(int) - 1, 0, n_bins - 1)


def bin_reliability(preds: np.ndarray, labels, n_bins: int = 10) -> list:
    """Per-bin count, accuracy and mean confidence over M equal-width bins."""
    preds, labels = _check_preds(preds, labels)
    conf, pred = confidence(preds)
    correct = (pred == labels).astype(np.float64)
    idx = _bin_index(conf, n_bins)
    bins = []
    for m in range(n_bins):
        members = idx == m
        count = int(members.sum())
        bins.append(BinStats(
            lo=m / n_bins,
            hi=(m + 1) / n_bins,
            count=count,
            acc=float(correct[members].mean()) if count else 0.0,
            conf=float(conf[members].mean()) if count else 0.0,
        ))
    return bins


def ece(preds: np.ndarray, labels, n_bins: int = 10) -> float:
    """Count-weighted mean absolute gap between per-bin accuracy and confidence."""
    preds, labels = _check_preds(preds, labels)
    n = len(preds)
    total = 0.0
    for b in bin_reliability(preds, labels, n_bins):
        if b.count:
            total += (b.count / n) * abs(b.acc - b.conf)
    return float(total)


def nll(preds: np.ndarray, labels) -> float:
    """Mean per-datapoint negative log-likelihood, probabilities floored."""
    preds, labels = _check_preds(preds, labels)
    picked = np.clip(preds[np.arange(len(preds)), labels], PROB_FLOOR, None)
    return float(-np.log(picked).mean())


def entropy(preds: np.ndarray) -> np.ndarray:
    """Per-row Shannon entropy in nats; 0 log 0 taken as 0."""
    preds, _ = _check_preds(preds)
    p = np.clip(preds, PROB_FLOOR, None)
    return -(preds * np.log(p)).sum(axis=1)


def entropy_histogram(preds: np.ndarray, n_bins: int = 20):
    """Histogram of prediction entropies over [0, ln C]."""
    preds, _ = _check_preds(preds)
    h = entropy(preds)
    hi = np.log(preds.shape[1])
    counts, edges = np.histogram(h, bins=n_bins, range=(0.0, hi))
    return edges, counts


def ensemble_predict(members) -> np.ndarray:
    """Uniform-weight elementwise mean of member prediction matrices."""
    members = [np.asarray(m, dtype=np.float64) for m in members]
    if not members:
        raise ValueError("ensemble needs at least one member")
    shape = members[0].shape
    for m in members:
        if m.shape != shape:
            raise ValueError("ensemble members disagree on shape")
    mean = np.mean(members, axis=0)
    return mean / mean.sum(axis=1, keepdims=True)


def mc_predict(bundle, x, n_samples: int, mode: str, rng) -> np.ndarray:
    """Average class probabilities over stochastic forward passes.

    ``pilot_mc`` draws a fresh mask and imputation per sample and runs the
    spliced pass; ``mc_dropout`` runs train-mode dropout at test time.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    cfg = bundle.train_config
    clf = bundle.classifier
    if mode == "pilot_mc":
        if bundle.dgm is None:
            raise ValueError("pilot_mc needs a trained DGM in the bundle")
        with ad.no_grad():
            _, record = clf.forward_record(x)
        a_flat = record.flatten()
        acc = np.zeros((len(x), clf.spec.num_classes))
        for _ in range(n_samples):
            mask = sample_mask(cfg.mask_mode, cfg.mask_rate, clf.layout, len(x), rng)
            imputed = bundle.dgm.impute(a_flat, mask, rng)
            with ad.no_grad():
                logits, _ = clf.forward_spliced(record, mask, imputed)
                acc += ad.softmax(logits, axis=1).data
        return acc / n_samples
    if mode == "mc_dropout":
        acc = np.zeros((len(x), clf.spec.num_classes))
        with ad.no_grad():
            for _ in range(n_samples):
                logits = clf.forward(x, train=True, dropout_rate=cfg.dropout_rate, rng=rng)
                acc += ad.softmax(logits, axis=1).data
        return acc / n_samples
    raise ValueError(f"unknown mc mode {mode!r}")


def predictions_for(bundle, x, cfg: EvalConfig) -> np.ndarray:
    if cfg.mode == "plain":
        return bundle.predict(x)
    rng = np.random.default_rng(cfg.seed)
    return mc_predict(bundle, x, cfg.mc_samples, cfg.mode, rng)


def evaluate(bundle, x, labels, cfg: EvalConfig = EvalConfig()) -> CalibrationReport:
    """Full calibration report for one model on one test set."""
    if len(x) == 0:
        raise ValueError("empty test set")
    preds = predictions_for(bundle, x, cfg)
    return report_from_predictions(preds, labels, cfg, model=cfg.model_id or bundle.label)


def report_from_predictions(preds, labels, cfg: EvalConfig = EvalConfig(),
                            model: str = "", meta: dict | None = None) -> CalibrationReport:
    preds, labels = _check_preds(preds, np.asarray(labels))
    edges, counts = entropy_histogram(preds, cfg.entropy_bins)
    return CalibrationReport(
        model=model or cfg.model_id,
        n=len(preds),
        num_classes=preds.shape[1],
        accuracy=accuracy(preds, labels),
        nll=nll(preds, labels),
        ece=ece(preds, labels, cfg.n_bins),
        bins=bin_reliability(preds, labels, cfg.n_bins),
        entropy_edges=[float(e) for e in edges],
        entropy_counts=[int(c) for c in counts],
        meta=meta or {},
    )


def save_predictions(path, preds: np.ndarray, labels, meta: dict | None = None) -> None:
    """Store a prediction matrix in the tensor-container format."""
    save_tensors(path, {"predictions": np.asarray(preds, dtype=np.float64),
                        "labels": np.asarray(labels, dtype=np.int64)}, meta)
