"""Training loops and artifact IO."""

from __future__ import annotations

import dataclasses

import numpy as np
import torch

from . import data
from .models import (ConditionalGenerator, ConditionalVAE, Critic, GanSpec,
                     ParentCodec, VaeSpec)
from .resample import resample_indices


def _to_torch_pixels(pixels: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(pixels).permute(0, 3, 1, 2).contiguous()


def _smooth(xs, k=50):
    xs = np.asarray(xs, dtype=np.float64)
    if len(xs) < 2 * k:
        return xs
    kernel = np.ones(k) / k
    return np.convolve(xs, kernel, mode="valid")


def train_vae(dataset_path, spec: VaeSpec, steps: int, seed: int, out_path,
              batch_size: int = 128, lr: float = 1e-3,
              log_every: int = 200) -> dict:
    ds = data.load(dataset_path)
    codec = ParentCodec(ds.parents)
    torch.manual_seed(seed)
    model = ConditionalVAE(ds.shape, codec.dim, spec)
    optim = torch.optim.Adam(model.parameters(), lr=lr)
    pixels = _to_torch_pixels(ds.pixels)
    cond_all = codec.encode(ds.values)
    rng = np.random.default_rng(seed)

    history = []
    model.train()
    for step in range(steps):
        batch = rng.integers(0, len(ds), batch_size)
        x = pixels[batch]
        cond = cond_all[batch]
        elbo, recon, kl = model.elbo(x, cond)
        loss = -elbo
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite VAE loss at step {step}")
        optim.zero_grad()
        loss.backward()
        optim.step()
        history.append(float(elbo.detach()))
        if log_every and step % log_every == 0:
            print(f"step {step:5d}  elbo {history[-1]:10.1f}  "
                  f"recon {float(recon.detach()):10.1f}  kl {float(kl.detach()):7.1f}")

    smoothed = _smooth(history)
    result = {
        "history": history,
        "elbo_start": float(smoothed[0]),
        "elbo_end": float(smoothed[-1]),
    }
    artifact = {
        "kind": "vae",
        "spec": dataclasses.asdict(spec),
        "state": model.state_dict(),
        "parents": data.parents_to_wire(ds.parents),
        "shape": list(ds.shape),
        "seed": seed,
        "steps": steps,
        "elbo": [result["elbo_start"], result["elbo_end"]],
    }
    torch.save(artifact, out_path)
    return result


def train_gan(dataset_path, spec: GanSpec, steps: int, seed: int, out_path,
              batch_size: int = 128, g_lr: float = 1e-3, d_lr: float = 2e-4,
              log_every: int = 200) -> dict:
    ds = data.load(dataset_path)
    codec = ParentCodec(ds.parents)
    torch.manual_seed(seed)
    gen = ConditionalGenerator(ds.shape, codec.dim, spec)
    critic = Critic(ds.shape, codec.dim, spec)
    g_optim = torch.optim.Adam(gen.parameters(), lr=g_lr, betas=(0.5, 0.9))
    d_optim = torch.optim.Adam(critic.parameters(), lr=d_lr, betas=(0.5, 0.9))
    bce = torch.nn.functional.binary_cross_entropy_with_logits

    pixels = _to_torch_pixels(ds.pixels)
    cond_all = codec.encode(ds.values)
    rng = np.random.default_rng(seed)
    # target distribution: simulated intervention (independent marginals)
    do_idx = resample_indices(ds, len(ds), rng)

    def marginal_star(batch_idx):
        # pa*_k ~ P(pa_k) per parent, independently
        star = np.empty((len(batch_idx), len(ds.parents)))
        for k in range(len(ds.parents)):
            star[:, k] = ds.values[rng.integers(0, len(ds), len(batch_idx)), k]
        return codec.encode(star)

    history = {"d": [], "g": [], "comp": []}
    for step in range(steps):
        # critic: interventional samples are real; counterfactuals of source
        # samples are fake, critiqued at their original parents
        real_rows = do_idx[rng.integers(0, len(do_idx), batch_size)]
        src_rows = rng.integers(0, len(ds), batch_size)
        x_real = pixels[real_rows]
        c_real = cond_all[real_rows]
        x_src = pixels[src_rows]
        c_src = cond_all[src_rows]
        c_star = marginal_star(src_rows)
        with torch.no_grad():
            fake = gen(x_src, c_src, c_star)
        d_loss = bce(critic(x_real, c_real), torch.ones(batch_size)) \
            + bce(critic(fake, c_src), torch.zeros(batch_size))
        d_optim.zero_grad()
        d_loss.backward()
        d_optim.step()

        # generator: fool the critic + composition penalty (l2 on the null
        # transformation)
        src_rows = rng.integers(0, len(ds), batch_size)
        x_src = pixels[src_rows]
        c_src = cond_all[src_rows]
        c_star = marginal_star(src_rows)
        fake = gen(x_src, c_src, c_star)
        g_adv = bce(critic(fake, c_src), torch.ones(batch_size))
        null = gen(x_src, c_src, c_src)
        comp = ((null - x_src) ** 2).mean()
        g_loss = g_adv + spec.composition_weight * comp
        if not (torch.isfinite(d_loss) and torch.isfinite(g_loss)):
            raise RuntimeError(f"non-finite GAN loss at step {step}")
        g_optim.zero_grad()
        g_loss.backward()
        g_optim.step()

        history["d"].append(float(d_loss.detach()))
        history["g"].append(float(g_adv.detach()))
        history["comp"].append(float(comp.detach()))
        if log_every and step % log_every == 0:
            print(f"step {step:5d}  d {float(d_loss):6.3f}  "
                  f"g {float(g_adv):6.3f}  comp {float(comp):8.5f}")

    artifact = {
        "kind": "gan",
        "spec": dataclasses.asdict(spec),
        "state": gen.state_dict(),
        "parents": data.parents_to_wire(ds.parents),
        "shape": list(ds.shape),
        "seed": seed,
        "steps": steps,
    }
    torch.save(artifact, out_path)
    return history


def load_artifact(path):
    """Returns (model, parents, shape); model has .counterfactual(...)."""
    doc = torch.load(path, map_location="cpu", weights_only=False)
    parents = []
    for p in doc["parents"]:
        if p["kind"] == "discrete":
            parents.append(data.Parent(p["name"], "discrete",
                                       cardinality=p["cardinality"]))
        else:
            parents.append(data.Parent(p["name"], "continuous",
                                       lower=p["lower"], upper=p["upper"]))
    codec = ParentCodec(parents)
    shape = tuple(doc["shape"])
    if doc["kind"] == "vae":
        model = ConditionalVAE(shape, codec.dim, VaeSpec(**doc["spec"]))
    elif doc["kind"] == "gan":
        model = ConditionalGenerator(shape, codec.dim, GanSpec(**doc["spec"]))
    else:
        raise ValueError(f"unknown artifact kind {doc['kind']!r}")
    model.load_state_dict(doc["state"])
    model.eval()
    return model, parents, shape


def null_intervention_l1(model, ds: data.Dataset, n: int, seed: int = 0) -> float:
    """Mean l1 (percentage points) of f(x, pa, pa) vs x over n samples."""
    codec = ParentCodec(ds.parents)
    rows = np.random.default_rng(seed).integers(0, len(ds), n)
    x = _to_torch_pixels(ds.pixels[rows])
    cond = codec.encode(ds.values[rows])
    with torch.no_grad():
        out = model.counterfactual(x, cond, cond, seed=1234)
    return 100.0 * float((out - x).abs().mean())
