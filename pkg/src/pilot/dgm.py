"""Generative model over classifier activations with arbitrary conditioning.

An encoder q(z | a, b) sees the full record; a conditional prior
p(z | a_(1-b), b) sees only unmasked values (masked positions zero-filled,
the mask concatenated as extra input features); a Gaussian decoder with
fixed variance scores the masked positions. The per-example evidence lower
bound combines masked reconstruction, the analytic KL between encoder and
prior, and a Normal-Gamma hyperprior penalty on the prior's outputs.

Activations are standardised per position (running moments, frozen after a
warmup fraction of training) before entering the model and de-standardised
on imputation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import NumericsError, Tensor
from .masks import Mask


@dataclass(frozen=True)
class HyperpriorConfig:
    sigma_mu: float = 10.0
    sigma_sigma: float = 1.0
    form: str = "squared_mean"      # or "literal_linear"

    def __post_init__(self):
        if self.sigma_mu <= 0 or self.sigma_sigma <= 0:
            raise ValueError("hyperprior scales must be positive")
        if self.form not in ("squared_mean", "literal_linear"):
            raise ValueError(f"unknown hyperprior form {self.form!r}")


@dataclass(frozen=True)
class DGMConfig:
    latent_dim: int = 64
    hidden: tuple = (256, 256)
    decoder_variance: float = 0.1
    hyperprior: HyperpriorConfig = HyperpriorConfig()
    n_z: int = 1
    standardize: bool = True
    standardize_warmup: float = 0.25    # fraction of training steps
    impute_sample: bool = False         # sample the likelihood instead of its mean

    def __post_init__(self):
        if self.decoder_variance <= 0:
            raise ValueError("decoder variance must be positive")
        if self.n_z < 1:
            raise ValueError("n_z must be at least 1")


class DiagonalGaussian:
    """Mean / log-variance pair; variance strictly positive by construction."""

    def __init__(self, mean: Tensor, logvar: Tensor):
        self.mean = mean
        self.logvar = logvar

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def sigma(self) -> Tensor:
        return ad.exp(self.logvar * 0.5)

    def variance(self) -> Tensor:
        return ad.exp(self.logvar)


def reparam_sample(g: DiagonalGaussian, eps: np.ndarray) -> Tensor:
    """Differentiable sample z = mean + sigma * eps."""
    eps = np.asarray(eps)
    if eps.shape != tuple(g.mean.shape):
        raise ValueError(f"eps shape {eps.shape} does not match {tuple(g.mean.shape)}")
    return g.mean + g.sigma() * Tensor(eps)


def kl_diag(q: DiagonalGaussian, p: DiagonalGaussian) -> Tensor:
    """Analytic KL(q || p) between diagonal Gaussians, summed per example."""
    if tuple(q.mean.shape) != tuple(p.mean.shape):
        raise ValueError("kl_diag: dimension mismatch")
    term = p.logvar - q.logvar + (q.variance() + ad.square(q.mean - p.mean)) / p.variance() - 1.0
    return term.sum(axis=1) * 0.5


def gaussian_loglik_masked(target: np.ndarray, mean: Tensor, mask_values: np.ndarray,
                           variance: float) -> Tensor:
    """Sum of log N(target | mean, variance) over masked positions, per example."""
    t = Tensor(np.asarray(target))
    resid = ad.square(t - mean) / variance + float(np.log(2.0 * np.pi * variance))
    return (Tensor(mask_values) * resid).sum(axis=1) * (-0.5)


def hyperprior_penalty(prior: DiagonalGaussian, cfg: HyperpriorConfig) -> Tensor:
    """Non-negative penalty subtracted from the ELBO, per example.

    Default form follows the stated Normal-Gamma densities
    (sum mu^2/(2 sigma_mu^2) - sigma_sigma * sum(log sigma - sigma));
    ``literal_linear`` uses the mean term linear in mu instead.
    """
    log_sigma = prior.logvar * 0.5
    sigma = ad.exp(log_sigma)
    if cfg.form == "squared_mean":
        mean_term = ad.square(prior.mean).sum(axis=1) / (2.0 * cfg.sigma_mu ** 2)
    else:
        mean_term = prior.mean.sum(axis=1) / (2.0 * cfg.sigma_mu ** 2)
    gamma_term = (sigma - log_sigma).sum(axis=1) * cfg.sigma_sigma
    return mean_term + gamma_term


class RunningStandardizer:
    """Per-position running mean/variance, frozen after a warmup period."""

    def __init__(self, dim: int, enabled: bool = True, eps: float = 1e-8):
        self.dim = dim
        self.enabled = enabled
        self.eps = eps
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self.frozen = False

    def update(self, batch: np.ndarray) -> None:
        if not self.enabled or self.frozen:
            return
        batch = np.asarray(batch)
        n = batch.shape[0]
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta ** 2 * (self.count * n / total)
        self.count = total

    def freeze(self) -> None:
        self.frozen = True

    def _std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.sqrt(self.m2 / self.count + self.eps)

    def transform(self, a: np.ndarray) -> np.ndarray:
        if not self.enabled or self.count < 2:
            return np.asarray(a, dtype=np.float64)
        return (a - self.mean) / self._std()

    def untransform(self, values: np.ndarray) -> np.ndarray:
        if not self.enabled or self.count < 2:
            return values
        return values * self._std() + self.mean

    def state_arrays(self) -> dict:
        return {
            "std.mean": self.mean,
            "std.m2": self.m2,
            "std.state": np.array([self.count, float(self.frozen), float(self.enabled)]),
        }

    def load_state(self, arrays: dict) -> None:
        self.mean = arrays["std.mean"]
        self.m2 = arrays["std.m2"]
        self.count, frozen, enabled = arrays["std.state"]
        self.frozen = bool(frozen)
        self.enabled = bool(enabled)


class _DenseStack:
    """Plain relu MLP; final layer linear with damped init for stable heads."""

    def __init__(self, dims, rng, prefix: str):
        self.prefix = prefix
        self.weights = []
        self.biases = []
        for i in range(len(dims) - 1):
            fan_in = dims[i]
            scale = np.sqrt(2.0 / fan_in) if i < len(dims) - 2 else 0.1 * np.sqrt(1.0 / fan_in)
            self.weights.append(Tensor(rng.normal(0.0, scale, size=(dims[i], dims[i + 1])), requires_grad=True))
            self.biases.append(Tensor(np.zeros(dims[i + 1]), requires_grad=True))

    def __call__(self, h: Tensor) -> Tensor:
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.matmul(h, w) + b
            if i < len(self.weights) - 1:
                h = ad.relu(h)
        return h

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def state_arrays(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{self.prefix}.{i}.W"] = w.data
            out[f"{self.prefix}.{i}.b"] = b.data
        return out

    def load_state(self, arrays):
        for i in range(len(self.weights)):
            self.weights[i].data = arrays[f"{self.prefix}.{i}.W"]
            self.biases[i].data = arrays[f"{self.prefix}.{i}.b"]


class ActivationDGM:
    """Encoder / conditional prior / fixed-variance Gaussian decoder."""

    def __init__(self, record_dim: int, config: DGMConfig, rng):
        self.record_dim = record_dim
        self.config = config
        dz = config.latent_dim
        hidden = list(config.hidden)
        self.encoder = _DenseStack([2 * record_dim, *hidden, 2 * dz], rng, "enc")
        self.prior_net = _DenseStack([2 * record_dim, *hidden, 2 * dz], rng, "pri")
        self.decoder = _DenseStack([2 * record_dim + dz, *hidden, record_dim], rng, "dec")
        self.standardizer = RunningStandardizer(record_dim, enabled=config.standardize)

    # -- parameter groups ----------------------------------------------------

    def phi_parameters(self):
        """Variational-posterior (encoder) parameters."""
        return self.encoder.parameters()

    def theta_parameters(self):
        """Generative (prior network + decoder) parameters."""
        return self.prior_net.parameters() + self.decoder.parameters()

    def parameters(self):
        return self.phi_parameters() + self.theta_parameters()

    # -- distribution heads ----------------------------------------------------

    def _split(self, out: Tensor) -> DiagonalGaussian:
        dz = self.config.latent_dim
        return DiagonalGaussian(ad.narrow(out, 1, 0, dz), ad.narrow(out, 1, dz, dz))

    def encode(self, a_std: np.ndarray, mask: Mask) -> DiagonalGaussian:
        """q(z | a, b): conditioned on the full record."""
        x = np.concatenate([np.asarray(a_std), mask.values], axis=1)
        return self._split(self.encoder(Tensor(x)))

    def prior(self, a_std: np.ndarray, mask: Mask) -> DiagonalGaussian:
        """p(z | a_(1-b), b): masked positions zero-filled before input."""
        observed = np.asarray(a_std) * (1.0 - mask.values)
        x = np.concatenate([observed, mask.values], axis=1)
        return self._split(self.prior_net(Tensor(x)))

    def decode_mean(self, a_std: np.ndarray, mask: Mask, z: Tensor) -> Tensor:
        observed = Tensor(np.asarray(a_std) * (1.0 - mask.values))
        x = ad.concat([observed, Tensor(mask.values), z], axis=1)
        return self.decoder(x)

    # -- objectives --------------------------------------------------------------

    def lambda_elbo(self, a_flat: np.ndarray, mask: Mask, rng=None, eps=None):
        """Per-example ELBO for the masked record, averaged over the batch.

        Returns ``(scalar Tensor, diagnostics)`` where diagnostics expose the
        reconstruction, KL, and penalty terms as floats. ``eps`` pins the
        reparameterisation noise (one (batch, dz) array per z sample) for
        deterministic gradient checks.
        """
        a_flat = np.asarray(a_flat)
        a_std = self.standardizer.transform(a_flat)
        q = self.encode(a_std, mask)
        p = self.prior(a_std, mask)
        n, dz = a_flat.shape[0], self.config.latent_dim
        n_z = self.config.n_z
        if eps is None:
            if rng is None:
                raise ValueError("lambda_elbo needs an rng or pinned eps")
            eps = [rng.standard_normal((n, dz)) for _ in range(n_z)]
        elif isinstance(eps, np.ndarray):
            eps = [eps]
        recon = None
        for e in eps:
            z = reparam_sample(q, e)
            mean = self.decode_mean(a_std, mask, z)
            ll = gaussian_loglik_masked(a_std, mean, mask.values, self.config.decoder_variance)
            recon = ll if recon is None else recon + ll
        recon = recon * (1.0 / len(eps))
        kl = kl_diag(q, p)
        penalty = hyperprior_penalty(p, self.config.hyperprior)
        lam = (recon - kl - penalty).mean()
        diag = {
            "recon": float(recon.data.mean()),
            "kl": float(kl.data.mean()),
            "penalty": float(penalty.data.mean()),
            "lambda": float(lam.data),
        }
        for name in ("recon", "kl", "penalty"):
            if not np.isfinite(diag[name]):
                raise NumericsError(name, "elbo term")
        return lam, diag

    def impute(self, a_flat: np.ndarray, mask: Mask, rng, sample: bool | None = None) -> np.ndarray:
        """Generate values for the masked positions via the conditional prior.

        Never consults the encoder. Returns a (batch, total) array whose
        entries are meaningful only where the mask is 1 (decoder mean by
        default; ``sample=True`` adds decoder-variance noise; ``None``
        follows ``config.impute_sample``).
        """
        if sample is None:
            sample = self.config.impute_sample
        a_flat = np.asarray(a_flat)
        with ad.no_grad():
            a_std = self.standardizer.transform(a_flat)
            p = self.prior(a_std, mask)
            e = rng.standard_normal(p.mean.shape)
            z = reparam_sample(p, e)
            mean = self.decode_mean(a_std, mask, z).data
        if sample:
            mean = mean + rng.standard_normal(mean.shape) * np.sqrt(self.config.decoder_variance)
        return self.standardizer.untransform(mean)

    # -- persistence -----------------------------------------------------------------

    def state_arrays(self) -> dict:
        out = {}
        out.update(self.encoder.state_arrays())
        out.update(self.prior_net.state_arrays())
        out.update(self.decoder.state_arrays())
        out.update(self.standardizer.state_arrays())
        return out

    def load_state(self, arrays: dict) -> None:
        self.encoder.load_state(arrays)
        self.prior_net.load_state(arrays)
        self.decoder.load_state(arrays)
        self.standardizer.load_state(arrays)
