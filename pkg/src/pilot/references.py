"""Published full-scale reference results used for the compare command's
reference columns. These are fixture constants for context only; they come
from 100-250-epoch runs on full CIFAR-10/SVHN and are not reproduction
targets at desk scale."""

from __future__ import annotations

# (arch, dataset, model label) -> dict(accuracy, nll, ece)
REFERENCE_RESULTS = {
    # -- CNN models --------------------------------------------------------
    ("cnn", "cifar10", "vanilla"):          {"accuracy": 0.630, "nll": 3.54, "ece": 0.308},
    ("cnn", "svhn", "vanilla"):             {"accuracy": 0.846, "nll": 1.69, "ece": 0.122},
    ("cnn", "cifar10", "pilot_a_aug"):      {"accuracy": 0.701, "nll": 0.87, "ece": 0.012},
    ("cnn", "svhn", "pilot_a_aug"):         {"accuracy": 0.881, "nll": 0.44, "ece": 0.033},
    ("cnn", "cifar10", "pilot_a_drop"):     {"accuracy": 0.454, "nll": 1.59, "ece": 0.096},
    ("cnn", "svhn", "pilot_a_drop"):        {"accuracy": 0.200, "nll": 2.29, "ece": 0.092},
    ("cnn", "cifar10", "pilot_x_aug"):      {"accuracy": 0.648, "nll": 1.49, "ece": 0.210},
    ("cnn", "svhn", "pilot_x_aug"):         {"accuracy": 0.861, "nll": 0.64, "ece": 0.066},
    ("cnn", "cifar10", "pilot_x_drop"):     {"accuracy": 0.625, "nll": 1.15, "ece": 0.116},
    ("cnn", "svhn", "pilot_x_drop"):        {"accuracy": 0.844, "nll": 0.55, "ece": 0.019},
    ("cnn", "cifar10", "add_a_aug"):        {"accuracy": 0.641, "nll": 4.80, "ece": 0.199},
    ("cnn", "svhn", "add_a_aug"):           {"accuracy": 0.858, "nll": 1.05, "ece": 0.065},
    ("cnn", "cifar10", "add_a_drop"):       {"accuracy": 0.630, "nll": 2.05, "ece": 0.249},
    ("cnn", "svhn", "add_a_drop"):          {"accuracy": 0.850, "nll": 0.89, "ece": 0.081},
    ("cnn", "cifar10", "add_x_drop"):       {"accuracy": 0.609, "nll": 1.44, "ece": 0.184},
    ("cnn", "svhn", "add_x_drop"):          {"accuracy": 0.844, "nll": 0.56, "ece": 0.033},
    ("cnn", "cifar10", "sub_a_drop"):       {"accuracy": 0.403, "nll": 1.43, "ece": 0.490},
    ("cnn", "svhn", "sub_a_drop"):          {"accuracy": 0.748, "nll": 1.52, "ece": 0.155},
    ("cnn", "cifar10", "sub_x_drop"):       {"accuracy": 0.521, "nll": 1.97, "ece": 0.199},
    ("cnn", "svhn", "sub_x_drop"):          {"accuracy": 0.742, "nll": 0.88, "ece": 0.032},
    ("cnn", "cifar10", "dropout"):          {"accuracy": 0.629, "nll": 3.57, "ece": 0.308},
    ("cnn", "svhn", "dropout"):             {"accuracy": 0.850, "nll": 1.68, "ece": 0.121},
    ("cnn", "cifar10", "l2"):               {"accuracy": 0.629, "nll": 3.59, "ece": 0.308},
    ("cnn", "svhn", "l2"):                  {"accuracy": 0.847, "nll": 1.69, "ece": 0.123},
    ("cnn", "cifar10", "batch_norm"):       {"accuracy": 0.631, "nll": 4.60, "ece": 0.230},
    ("cnn", "svhn", "batch_norm"):          {"accuracy": 0.846, "nll": 2.12, "ece": 0.054},
    ("cnn", "cifar10", "data_aug"):         {"accuracy": 0.646, "nll": 1.027, "ece": 0.016},
    ("cnn", "svhn", "data_aug"):            {"accuracy": 0.750, "nll": 0.77, "ece": 0.009},
    ("cnn", "cifar10", "pilot_mc_a_aug"):   {"accuracy": 0.700, "nll": 0.94, "ece": 0.089},
    ("cnn", "svhn", "pilot_mc_a_aug"):      {"accuracy": 0.877, "nll": 0.53, "ece": 0.120},
    ("cnn", "cifar10", "pilot_mc_a_drop"):  {"accuracy": 0.453, "nll": 1.57, "ece": 0.065},
    ("cnn", "svhn", "pilot_mc_a_drop"):     {"accuracy": 0.196, "nll": 2.25, "ece": 0.087},
    ("cnn", "cifar10", "add_mc_a_aug"):     {"accuracy": 0.576, "nll": 1.67, "ece": 0.063},
    ("cnn", "svhn", "add_mc_a_aug"):        {"accuracy": 0.860, "nll": 0.56, "ece": 0.017},
    ("cnn", "cifar10", "add_mc_a_drop"):    {"accuracy": 0.636, "nll": 1.73, "ece": 0.199},
    ("cnn", "svhn", "add_mc_a_drop"):       {"accuracy": 0.854, "nll": 0.73, "ece": 0.0528},
    ("cnn", "cifar10", "mc_dropout"):       {"accuracy": 0.579, "nll": 1.69, "ece": 0.065},
    ("cnn", "svhn", "mc_dropout"):          {"accuracy": 0.795, "nll": 0.93, "ece": 0.067},
    ("cnn", "cifar10", "ensemble"):         {"accuracy": 0.683, "nll": 0.96, "ece": 0.025},
    ("cnn", "svhn", "ensemble"):            {"accuracy": 0.870, "nll": 0.51, "ece": 0.060},
    # -- MLP models (2 hidden layers, 1024 units) ---------------------------
    ("mlp", "cifar10", "vanilla"):          {"accuracy": 0.581, "nll": 4.78, "ece": 0.470},
    ("mlp", "svhn", "vanilla"):             {"accuracy": 0.848, "nll": 2.17, "ece": 0.127},
    ("mlp", "cifar10", "pilot_a_aug"):      {"accuracy": 0.601, "nll": 1.22, "ece": 0.056},
    ("mlp", "svhn", "pilot_a_aug"):         {"accuracy": 0.858, "nll": 0.53, "ece": 0.014},
    ("mlp", "cifar10", "pilot_a_drop"):     {"accuracy": 0.517, "nll": 1.36, "ece": 0.110},
    ("mlp", "svhn", "pilot_a_drop"):        {"accuracy": 0.794, "nll": 0.79, "ece": 0.029},
    ("mlp", "cifar10", "pilot_x_aug"):      {"accuracy": 0.565, "nll": 2.42, "ece": 0.288},
    ("mlp", "svhn", "pilot_x_aug"):         {"accuracy": 0.851, "nll": 1.16, "ece": 0.057},
    ("mlp", "cifar10", "pilot_x_drop"):     {"accuracy": 0.570, "nll": 2.14, "ece": 0.284},
    ("mlp", "svhn", "pilot_x_drop"):        {"accuracy": 0.837, "nll": 0.72, "ece": 0.057},
    ("mlp", "cifar10", "add_a_aug"):        {"accuracy": 0.578, "nll": 2.76, "ece": 0.301},
    ("mlp", "svhn", "add_a_aug"):           {"accuracy": 0.843, "nll": 0.78, "ece": 0.077},
    ("mlp", "cifar10", "add_a_drop"):       {"accuracy": 0.578, "nll": 4.26, "ece": 0.345},
    ("mlp", "svhn", "add_a_drop"):          {"accuracy": 0.849, "nll": 1.48, "ece": 0.114},
    ("mlp", "cifar10", "add_x_drop"):       {"accuracy": 0.547, "nll": 2.99, "ece": 0.307},
    ("mlp", "svhn", "add_x_drop"):          {"accuracy": 0.841, "nll": 0.75, "ece": 0.067},
    ("mlp", "cifar10", "sub_a_drop"):       {"accuracy": 0.462, "nll": 4.23, "ece": 0.403},
    ("mlp", "svhn", "sub_a_drop"):          {"accuracy": 0.737, "nll": 1.92, "ece": 0.143},
    ("mlp", "cifar10", "sub_x_drop"):       {"accuracy": 0.499, "nll": 2.22, "ece": 0.279},
    ("mlp", "svhn", "sub_x_drop"):          {"accuracy": 0.765, "nll": 0.80, "ece": 0.029},
    ("mlp", "cifar10", "dropout"):          {"accuracy": 0.570, "nll": 4.88, "ece": 0.480},
    ("mlp", "svhn", "dropout"):             {"accuracy": 0.837, "nll": 1.27, "ece": 0.116},
    ("mlp", "cifar10", "l2"):               {"accuracy": 0.574, "nll": 4.74, "ece": 0.479},
    ("mlp", "svhn", "l2"):                  {"accuracy": 0.847, "nll": 2.12, "ece": 0.127},
    ("mlp", "cifar10", "batch_norm"):       {"accuracy": 0.579, "nll": 4.55, "ece": 0.570},
    ("mlp", "svhn", "batch_norm"):          {"accuracy": 0.848, "nll": 2.04, "ece": 0.162},
    ("mlp", "cifar10", "data_aug"):         {"accuracy": 0.566, "nll": 1.36, "ece": 0.231},
    ("mlp", "svhn", "data_aug"):            {"accuracy": 0.731, "nll": 0.91, "ece": 0.055},
    ("mlp", "cifar10", "pilot_mc_a_aug"):   {"accuracy": 0.598, "nll": 1.24, "ece": 0.036},
    ("mlp", "svhn", "pilot_mc_a_aug"):      {"accuracy": 0.855, "nll": 0.56, "ece": 0.042},
    ("mlp", "cifar10", "pilot_mc_a_drop"):  {"accuracy": 0.519, "nll": 1.37, "ece": 0.066},
    ("mlp", "svhn", "pilot_mc_a_drop"):     {"accuracy": 0.761, "nll": 0.84, "ece": 0.107},
    ("mlp", "cifar10", "add_mc_a_aug"):     {"accuracy": 0.576, "nll": 2.65, "ece": 0.296},
    ("mlp", "svhn", "add_mc_a_aug"):        {"accuracy": 0.839, "nll": 0.73, "ece": 0.056},
    ("mlp", "cifar10", "add_mc_a_drop"):    {"accuracy": 0.583, "nll": 3.70, "ece": 0.335},
    ("mlp", "svhn", "add_mc_a_drop"):       {"accuracy": 0.847, "nll": 1.12, "ece": 0.087},
    ("mlp", "cifar10", "mc_dropout"):       {"accuracy": 0.509, "nll": 2.19, "ece": 0.085},
    ("mlp", "svhn", "mc_dropout"):          {"accuracy": 0.784, "nll": 1.07, "ece": 0.080},
    ("mlp", "cifar10", "ensemble"):         {"accuracy": 0.518, "nll": 1.58, "ece": 0.027},
    ("mlp", "svhn", "ensemble"):            {"accuracy": 0.850, "nll": 1.68, "ece": 0.155},
}


def reference_for(arch: str, dataset: str, label: str):
    """Reference metrics for (architecture, dataset, model label), or None."""
    return REFERENCE_RESULTS.get((arch, dataset, label))
