"""Pseudo-oracles: learned parent-retrieval functions.

Discrete parents get a multinomial logistic regression trained by mini-batch
gradient descent; continuous parents get closed-form ridge regression.
Linear models are deliberate: they keep the oracles cheap, auditable and
deterministic, and model rankings are robust to this choice. The feature map
adds a circular hue embedding so a linear readout can actually see colour.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import ContractError, Observation
from .rng import Stream, mix64
from .synthdata import LabeledDataset

BRIGHT_THRESHOLD = 0.1
HUE_HARMONICS = 16


class OracleError(RuntimeError):
    pass


# --- feature map -------------------------------------------------------------


def feature_length(height: int, width: int, channels: int) -> int:
    """HWC raw pixels + C channel means + C block means (4x4 blocks) + hue.

    The hue embedding is the first HUE_HARMONICS sine/cosine pairs of the
    mean hue angle over bright pixels (a single pair cannot carry the
    wrap-around of a sawtooth target through a linear readout).
    """
    blocks = math.ceil(height / 4) * math.ceil(width / 4)
    return height * width * channels + channels + channels * blocks + 2 * HUE_HARMONICS


def featurize_batch(pixels: np.ndarray) -> np.ndarray:
    """Deterministic features for a (n, H, W, C) float32 pixel block."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 3:
        pixels = pixels[None]
    n, h, w, c = pixels.shape
    x = pixels.astype(np.float64)

    flat = x.reshape(n, h * w * c)
    channel_means = x.mean(axis=(1, 2))

    bh, bw = math.ceil(h / 4), math.ceil(w / 4)
    blocks = np.zeros((n, bh, bw, c), dtype=np.float64)
    for bi in range(bh):
        for bj in range(bw):
            patch = x[:, 4 * bi:4 * (bi + 1), 4 * bj:4 * (bj + 1), :]
            blocks[:, bi, bj, :] = patch.mean(axis=(1, 2))
    block_means = blocks.reshape(n, bh * bw * c)

    harmonics = np.zeros((n, 2 * HUE_HARMONICS))
    if c == 3:
        r, g, b = x[..., 0], x[..., 1], x[..., 2]
        value = np.max(x, axis=3)
        bright = (value > BRIGHT_THRESHOLD).astype(np.float64)
        u = ((2.0 * r - g - b) * bright).sum(axis=(1, 2))
        v = (np.sqrt(3.0) * (g - b) * bright).sum(axis=(1, 2))
        mag = np.sqrt(u * u + v * v)
        ok = mag > 1e-9
        safe = np.maximum(mag, 1e-300)
        hue_cos = np.where(ok, u / safe, 0.0)
        hue_sin = np.where(ok, v / safe, 0.0)
        # cos/sin of k*theta by the multiple-angle recurrence (no trig calls)
        ck_prev, sk_prev = np.ones(n), np.zeros(n)
        ck, sk = hue_cos, hue_sin
        for k in range(HUE_HARMONICS):
            harmonics[:, 2 * k] = np.where(ok, ck, 0.0)
            harmonics[:, 2 * k + 1] = np.where(ok, sk, 0.0)
            ck_next = 2.0 * hue_cos * ck - ck_prev
            sk_next = 2.0 * hue_cos * sk - sk_prev
            ck_prev, sk_prev = ck, sk
            ck, sk = ck_next, sk_next

    return np.concatenate([flat, channel_means, block_means, harmonics], axis=1)


def featurize(x: Observation) -> np.ndarray:
    return featurize_batch(x.pixels[None])[0]


# --- oracle containers ---------------------------------------------------------


@dataclass
class PseudoOracle:
    """Linear parent-retrieval function over the feature map."""

    parent: int
    kind: str                      # "classifier" | "regressor"
    weights: np.ndarray            # (classes, features) or (features,)
    bias: np.ndarray               # (classes,) or scalar array
    shape: tuple[int, int, int]
    domain: tuple[float, float] | None  # clamp range for regressors
    provenance: dict

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not np.all(np.isfinite(self.bias)):
            raise OracleError("non-finite oracle weights")

    def predict_batch(self, pixels: np.ndarray) -> np.ndarray:
        feats = featurize_batch(pixels)
        if self.kind == "classifier":
            scores = feats @ self.weights.T + self.bias
            return np.argmax(scores, axis=1)
        pred = feats @ self.weights + float(self.bias)
        lo, hi = self.domain
        return np.clip(pred, lo, hi)

    def predict(self, x: Observation):
        out = self.predict_batch(x.pixels[None])[0]
        return int(out) if self.kind == "classifier" else float(out)


@dataclass(frozen=True)
class OracleQuality:
    parent: int
    kind: str
    value: float      # accuracy in percent, or MAE in percentage points
    n_samples: int
    seed: int


# --- training --------------------------------------------------------------------


_SPLIT_SALT = 0x5157BADF00D5EED


def split_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 90/10 fit/holdout split by sample-index hash."""
    residues = np.array([mix64(i ^ _SPLIT_SALT) % 10 for i in range(n)])
    idx = np.arange(n)
    return idx[residues != 0], idx[residues == 0]


def ce_loss_and_grad(weights: np.ndarray, bias: np.ndarray, feats: np.ndarray,
                     labels: np.ndarray, l2: float):
    """Cross-entropy with L2 penalty on weights; returns (loss, dW, db)."""
    scores = feats @ weights.T + bias
    scores -= scores.max(axis=1, keepdims=True)
    exp = np.exp(scores)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = feats.shape[0]
    nll = -np.log(np.maximum(probs[np.arange(n), labels], 1e-300)).mean()
    loss = nll + 0.5 * l2 * float((weights ** 2).sum())
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    grad_w = delta.T @ feats / n + l2 * weights
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


def train_classifier(dataset: LabeledDataset, k: int, epochs: int = 12,
                     learning_rate: float = 0.5, l2: float = 1e-5,
                     seed: int = 0, batch_size: int = 256) -> PseudoOracle:
    """Multinomial logistic regression by mini-batch gradient descent."""
    parent = dataset.space.parents[k]
    if parent.kind != "discrete":
        raise ContractError(f"parent {parent.name!r} is not discrete")
    labels = dataset.column(k).astype(np.int64)
    if len(dataset) == 0 or len(np.unique(labels)) < 2:
        raise OracleError("need a non-empty dataset with >= 2 classes present")
    fit_idx, _ = split_indices(len(dataset))
    feats = featurize_batch(dataset.pixels[fit_idx])
    labels = labels[fit_idx]
    n, d = feats.shape
    classes = parent.cardinality

    weights = np.zeros((classes, d))
    bias = np.zeros(classes)
    shuffle = Stream(seed, "classifier-shuffle")
    epoch_losses = []
    for epoch in range(epochs):
        order = _permutation(shuffle.child(epoch), n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            loss, grad_w, grad_b = ce_loss_and_grad(
                weights, bias, feats[batch], labels[batch], l2)
            if not np.isfinite(loss):
                raise OracleError(f"non-finite training loss at epoch {epoch}")
            weights -= learning_rate * grad_w
            bias -= learning_rate * grad_b
        epoch_loss, _, _ = ce_loss_and_grad(weights, bias, feats, labels, l2)
        epoch_losses.append(float(epoch_loss))
    provenance = {
        "dataset": {"scm": dataset.provenance.scm, "seed": dataset.provenance.seed},
        "epochs": epochs, "learning_rate": learning_rate, "l2": l2, "seed": seed,
        "batch_size": batch_size, "epoch_losses": epoch_losses,
    }
    return PseudoOracle(k, "classifier", weights, bias, dataset.shape, None, provenance)


def train_regressor(dataset: LabeledDataset, k: int, l2: float = 1e-3) -> PseudoOracle:
    """Ridge regression in closed form (normal equations, bias unpenalized)."""
    parent = dataset.space.parents[k]
    if parent.kind != "continuous":
        raise ContractError(f"parent {parent.name!r} is not continuous")
    fit_idx, _ = split_indices(len(dataset))
    feats = featurize_batch(dataset.pixels[fit_idx])
    y = dataset.column(k)[fit_idx]
    n, d = feats.shape
    aug = np.concatenate([feats, np.ones((n, 1))], axis=1)
    gram = aug.T @ aug
    penalty = l2 * np.eye(d + 1)
    penalty[d, d] = 0.0
    rhs = aug.T @ y
    try:
        solution = np.linalg.solve(gram + n * penalty, rhs)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"singular ridge system after regularization: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise OracleError("singular ridge system (non-finite solution)")
    provenance = {
        "dataset": {"scm": dataset.provenance.scm, "seed": dataset.provenance.seed},
        "l2": l2,
    }
    return PseudoOracle(k, "regressor", solution[:d], np.asarray(solution[d]),
                        dataset.shape, (parent.lower, parent.upper), provenance)


def oracle_quality(oracle, dataset: LabeledDataset, seed: int = 0) -> OracleQuality:
    """Accuracy (%) for classifiers, MAE in percentage points for regressors."""
    k = oracle.parent
    if k >= len(dataset.space):
        raise ContractError("dataset does not include the oracle's parent")
    truth = dataset.column(k)
    pred = oracle.predict_batch(dataset.pixels)
    if oracle.kind == "classifier":
        value = 100.0 * float(np.mean(pred == truth.astype(np.int64)))
    else:
        value = 100.0 * float(np.mean(np.abs(pred - truth)))
    return OracleQuality(k, oracle.kind, value, len(dataset), seed)


def _permutation(stream: Stream, n: int) -> np.ndarray:
    """Fisher-Yates with counter-based draws (deterministic)."""
    out = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = stream.randint(i, i + 1)
        out[i], out[j] = out[j], out[i]
    return out


# --- persistence -------------------------------------------------------------------


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _decode(text: str, shape) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(text), dtype="<f8")
    return arr.reshape(shape).copy()


def save_oracle(oracle: PseudoOracle, path) -> None:
    doc = {
        "parent": oracle.parent,
        "kind": oracle.kind,
        "shape": list(oracle.shape),
        "domain": list(oracle.domain) if oracle.domain else None,
        "weights": _encode(oracle.weights),
        "weights_shape": list(np.shape(oracle.weights)),
        "bias": _encode(np.atleast_1d(oracle.bias)),
        "feature_map": {
            "version": 1,
            "bright_threshold": BRIGHT_THRESHOLD,
            "length": feature_length(*oracle.shape),
        },
        "provenance": oracle.provenance,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=1)


def load_oracle(path) -> PseudoOracle:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    expected = feature_length(*doc["shape"])
    if doc["feature_map"]["length"] != expected:
        raise OracleError("oracle feature map does not match this code version")
    weights = _decode(doc["weights"], doc["weights_shape"])
    bias = _decode(doc["bias"], (-1,))
    if doc["kind"] == "regressor":
        bias = np.asarray(bias[0])
    return PseudoOracle(doc["parent"], doc["kind"], weights, bias,
                        tuple(doc["shape"]),
                        tuple(doc["domain"]) if doc["domain"] else None,
                        doc["provenance"])
