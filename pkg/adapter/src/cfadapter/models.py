"""Conditional VAE and constrained conditional GAN for counterfactual calls.

Both models implement x* = f(x, pa, pa*): encode the observation with its
parents, then decode with the counterfactual parents. The VAE's stochastic
posterior draw is seeded per request, so identical requests give identical
answers (a seed-indexed function distribution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import Parent


class ParentCodec:
    """Parents -> conditioning vector: one-hot for discrete, value plus a
    unit-circle embedding for continuous (hue-like parents wrap)."""

    def __init__(self, parents: list[Parent]):
        self.parents = parents
        self.dim = sum(p.cardinality if p.kind == "discrete" else 3
                       for p in parents)

    def encode(self, values: np.ndarray) -> torch.Tensor:
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        cols = []
        for k, p in enumerate(self.parents):
            col = values[:, k]
            if p.kind == "discrete":
                onehot = np.zeros((len(col), p.cardinality), dtype=np.float32)
                onehot[np.arange(len(col)), col.astype(np.int64)] = 1.0
                cols.append(onehot)
            else:
                unit = (col - p.lower) / (p.upper - p.lower)
                cols.append(np.stack([
                    unit, np.sin(2 * np.pi * unit), np.cos(2 * np.pi * unit)
                ], axis=1).astype(np.float32))
        return torch.from_numpy(np.concatenate(cols, axis=1))


@dataclass
class VaeSpec:
    latent: int = 16
    beta: float = 1.0
    likelihood: str = "bernoulli"   # or "normal"
    variance: float = 0.1           # for the normal likelihood
    width: int = 32                 # base conv channels
    dense: int = 128

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.latent < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.likelihood not in ("bernoulli", "normal"):
            raise ValueError(f"unknown likelihood {self.likelihood!r}")


@dataclass
class GanSpec:
    width: int = 32
    dense: int = 128
    composition_weight: float = 10.0

    def __post_init__(self):
        if self.composition_weight < 0:
            raise ValueError("composition weight must be >= 0")


class _ImageEncoder(nn.Module):
    def __init__(self, shape, width, dense):
        super().__init__()
        h, w, c = shape
        self.net = nn.Sequential(
            nn.Conv2d(c, width, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(width, width * 2, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Flatten(),
            nn.Linear(width * 2 * (h // 4) * (w // 4), dense), nn.LeakyReLU(0.2),
        )

    def forward(self, x):
        return self.net(x)


class _ImageDecoder(nn.Module):
    def __init__(self, shape, in_dim, width, dense):
        super().__init__()
        h, w, c = shape
        self.h4, self.w4 = h // 4, w // 4
        self.width = width
        self.fc = nn.Sequential(
            nn.Linear(in_dim, dense), nn.LeakyReLU(0.2),
            nn.Linear(dense, width * 2 * self.h4 * self.w4), nn.LeakyReLU(0.2),
        )
        self.conv = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(width * 2, width * 2, 3, 1, 1), nn.LeakyReLU(0.2),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(width * 2, width, 3, 1, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(width, c, 3, 1, 1),
        )

    def forward(self, code):
        x = self.fc(code)
        x = x.view(-1, self.width * 2, self.h4, self.w4)
        return self.conv(x)  # logits


class ConditionalVAE(nn.Module):
    def __init__(self, shape, cond_dim: int, spec: VaeSpec):
        super().__init__()
        self.shape = tuple(shape)
        self.spec = spec
        self.encoder = _ImageEncoder(shape, spec.width, spec.dense)
        self.post = nn.Sequential(
            nn.Linear(spec.dense + cond_dim, spec.dense), nn.LeakyReLU(0.2))
        self.mu_head = nn.Linear(spec.dense, spec.latent)
        self.sigma_head = nn.Linear(spec.dense, spec.latent)
        self.decoder = _ImageDecoder(shape, spec.latent + cond_dim,
                                     spec.width, spec.dense)

    def posterior(self, x, cond):
        hidden = self.post(torch.cat([self.encoder(x), cond], dim=1))
        mu = self.mu_head(hidden)
        sigma = nn.functional.softplus(self.sigma_head(hidden)) + 1e-6
        return mu, sigma

    def decode(self, z, cond):
        return self.decoder(torch.cat([z, cond], dim=1))

    def elbo(self, x, cond):
        mu, sigma = self.posterior(x, cond)
        eps = torch.randn_like(mu)
        z = mu + sigma * eps  # re-parametrisation trick
        logits = self.decode(z, cond)
        if self.spec.likelihood == "bernoulli":
            recon = -nn.functional.binary_cross_entropy_with_logits(
                logits, x, reduction="none").flatten(1).sum(dim=1)
        else:
            mean = torch.sigmoid(logits)
            recon = -(((x - mean) ** 2) / (2 * self.spec.variance)
                      + 0.5 * math.log(2 * math.pi * self.spec.variance)
                      ).flatten(1).sum(dim=1)
        kl = 0.5 * (mu ** 2 + sigma ** 2 - 2 * torch.log(sigma) - 1).sum(dim=1)
        elbo = recon - self.spec.beta * kl
        return elbo.mean(), recon.mean(), kl.mean()

    @torch.no_grad()
    def counterfactual(self, x, cond, cond_star, seed: int):
        mu, sigma = self.posterior(x, cond)
        gen = torch.Generator().manual_seed(seed & ((1 << 63) - 1))
        eps = torch.randn(mu.shape, generator=gen)
        z = mu + sigma * eps  # x* ~ p(x | z, pa*), z ~ q(z | x, pa)
        mean = torch.sigmoid(self.decode(z, cond_star))
        return mean.clamp(0.0, 1.0)


class ConditionalGenerator(nn.Module):
    """GAN generator f(x, pa, pa*)."""

    def __init__(self, shape, cond_dim: int, spec: GanSpec):
        super().__init__()
        self.shape = tuple(shape)
        self.spec = spec
        self.encoder = _ImageEncoder(shape, spec.width, spec.dense)
        self.decoder = _ImageDecoder(shape, spec.dense + 2 * cond_dim,
                                     spec.width, spec.dense)

    def forward(self, x, cond, cond_star):
        code = torch.cat([self.encoder(x), cond, cond_star], dim=1)
        return torch.sigmoid(self.decoder(code))

    @torch.no_grad()
    def counterfactual(self, x, cond, cond_star, seed: int):
        # delta-distributed noise posterior: the seed selects nothing
        return self.forward(x, cond, cond_star).clamp(0.0, 1.0)


class Critic(nn.Module):
    """D(x, pa): parents broadcast as extra input channels."""

    def __init__(self, shape, cond_dim: int, spec: GanSpec):
        super().__init__()
        h, w, c = shape
        self.net = nn.Sequential(
            nn.Conv2d(c + cond_dim, spec.width, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(spec.width, spec.width * 2, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Flatten(),
            nn.Linear(spec.width * 2 * (h // 4) * (w // 4), spec.dense),
            nn.LeakyReLU(0.2),
            nn.Linear(spec.dense, 1),
        )

    def forward(self, x, cond):
        b, _, h, w = x.shape
        maps = cond[:, :, None, None].expand(b, cond.shape[1], h, w)
        return self.net(torch.cat([x, maps], dim=1)).squeeze(1)
