"""Learned similarity space: affine projection + L2 normalization, trained
with triplet loss and in-batch hard-negative mining.

Gradients are derived by hand. For a triplet with unit outputs
y = g / ||g||, g = W x + b, and active loss L = y_a.y_n - y_a.y_p + m:

    dL/dy_a = y_n - y_p      dL/dy_p = -y_a      dL/dy_n = y_a

and through the normalization, for any output y with pre-activation g:

    dL/dg = (dL/dy - (y . dL/dy) y) / ||g||

then dL/dW accumulates outer(dL/dg, x) and dL/db accumulates dL/dg.
The mined-negative selection is treated as constant under differentiation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, InternalError

DEFAULT_OUTPUT_DIM = 512


@dataclass
class TrainingConfig:
    margin: float = 0.3
    num_pairs: int = 10000
    learning_rate: float = 0.01
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.margin < 1.0:
            raise DataError(f"margin must be in (0, 1), got {self.margin}")
        if self.num_pairs < 0:
            raise DataError("num_pairs must be non-negative")
        if self.learning_rate <= 0.0:
            raise DataError("learning_rate must be positive")
        if self.batch_size < 1:
            raise DataError("batch_size must be at least 1")


@dataclass
class SiameseModel:
    W: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    input_dim: int
    output_dim: int
    seed: int
    loss_history: list[float] = field(default_factory=list)
    config: dict | None = None


def _init_weights(rng: np.random.Generator, input_dim: int, output_dim: int):
    limit = np.sqrt(6.0 / (input_dim + output_dim))
    W = rng.uniform(-limit, limit, size=(output_dim, input_dim))
    b = np.zeros(output_dim, dtype=np.float64)
    return W, b


def init_model(
    input_dim: int, output_dim: int = DEFAULT_OUTPUT_DIM, seed: int = 0
) -> SiameseModel:
    rng = np.random.default_rng(seed)
    W, b = _init_weights(rng, input_dim, output_dim)
    return SiameseModel(
        W=W, b=b, input_dim=input_dim, output_dim=output_dim, seed=seed
    )


def forward(model: SiameseModel, x: np.ndarray) -> np.ndarray:
    """L2-normalized affine projection of a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DataError(
            f"input has shape {x.shape}, model expects ({model.input_dim},)"
        )
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite input to forward")
    g = model.W @ x + model.b
    norm = np.linalg.norm(g)
    if norm == 0.0:
        raise DataError("degenerate pre-normalization output")
    return g / norm


def forward_many(model: SiameseModel, X: np.ndarray) -> np.ndarray:
    """Row-wise forward; X has shape (n, input_dim)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DataError(
            f"input has shape {X.shape}, model expects (n, {model.input_dim})"
        )
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite input to forward")
    G = X @ model.W.T + model.b
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("degenerate pre-normalization output")
    return G / norms


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine similarity undefined for zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, margin: float) -> float:
    return max(cosine_sim(a, n) - cosine_sim(a, p) + margin, 0.0)


def mine_hard_negative(
    model: SiameseModel,
    anchor: np.ndarray,
    candidates: Sequence[tuple[np.ndarray, str]],
    anchor_label: str,
) -> np.ndarray:
    """The differently-labeled candidate closest to the anchor in the
    transformed space; ties broken by lowest index."""
    anchor_out = forward(model, anchor)
    best_idx = None
    best_sim = -np.inf
    for i, (vec, label) in enumerate(candidates):
        if label == anchor_label:
            continue
        sim = float(np.dot(anchor_out, forward(model, vec)))
        if sim > best_sim:
            best_idx, best_sim = i, sim
    if best_idx is None:
        raise DataError("no negative candidate to mine")
    return candidates[best_idx][0]


def loss_and_gradients(
    model: SiameseModel,
    anchor_x: np.ndarray,
    positive_x: np.ndarray,
    negative_x: np.ndarray,
    margin: float,
):
    """Triplet loss and its analytic gradients w.r.t. W and b."""
    xs = [np.asarray(v, dtype=np.float64) for v in (anchor_x, positive_x, negative_x)]
    gs = [model.W @ x + model.b for x in xs]
    norms = [np.linalg.norm(g) for g in gs]
    if any(n == 0.0 for n in norms):
        raise DataError("degenerate pre-normalization output")
    ys = [g / n for g, n in zip(gs, norms)]
    y_a, y_p, y_n = ys
    loss = float(np.dot(y_a, y_n) - np.dot(y_a, y_p) + margin)
    dW = np.zeros_like(model.W)
    db = np.zeros_like(model.b)
    if loss <= 0.0:
        return 0.0, dW, db
    grad_ys = [y_n - y_p, -y_a, y_a]
    for x, g_norm, y, grad_y in zip(xs, norms, ys, grad_ys):
        grad_g = (grad_y - np.dot(y, grad_y) * y) / g_norm
        dW += np.outer(grad_g, x)
        db += grad_g
    return loss, dW, db


def sample_pairs(
    rng: np.random.Generator, labels: Sequence[str], num_pairs: int
) -> list[tuple[int, int]]:
    """Anchor-positive index pairs: class uniform, then members uniform."""
    classes = sorted(set(labels))
    by_class: dict[str, list[int]] = {c: [] for c in classes}
    for i, label in enumerate(labels):
        by_class[label].append(i)
    pairs = []
    for _ in range(num_pairs):
        members = by_class[classes[rng.integers(len(classes))]]
        a = int(rng.integers(len(members)))
        p = int(rng.integers(len(members) - 1))
        if p >= a:
            p += 1
        pairs.append((members[a], members[p]))
    return pairs


def train(
    vectors: np.ndarray,
    labels: Sequence[str],
    config: TrainingConfig | None = None,
    output_dim: int = DEFAULT_OUTPUT_DIM,
) -> SiameseModel:
    """One pass of plain SGD over num_pairs anchor-positive pairs with
    in-batch hard-negative mining. Deterministic given the seed."""
    if config is None:
        config = TrainingConfig()
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("training vectors must form a 2-d array")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training vector")
    if len(labels) != X.shape[0]:
        raise DataError("labels and vectors disagree in length")
    label_arr = np.asarray(labels, dtype=object)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("training requires at least 2 classes")
    for c in classes:
        if int(np.sum(label_arr == c)) < 2:
            raise DataError(f"class {c!r} has fewer than 2 examples")

    rng = np.random.default_rng(config.seed)
    W, b = _init_weights(rng, X.shape[1], output_dim)
    model = SiameseModel(
        W=W,
        b=b,
        input_dim=X.shape[1],
        output_dim=output_dim,
        seed=config.seed,
        config={
            "margin": config.margin,
            "num_pairs": config.num_pairs,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "seed": config.seed,
        },
    )
    pairs = sample_pairs(rng, labels, config.num_pairs)

    for start in range(0, len(pairs), config.batch_size):
        batch = pairs[start : start + config.batch_size]
        n_pairs = len(batch)
        # Flattened batch order [A0, P0, A1, P1, ...]; mining candidate
        # indices and their tie-breaking follow this order.
        idx = np.empty(2 * n_pairs, dtype=np.int64)
        idx[0::2] = [a for a, _ in batch]
        idx[1::2] = [p for _, p in batch]
        Xb = X[idx]
        G = Xb @ model.W.T + model.b
        norms = np.linalg.norm(G, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise InternalError(
                f"degenerate pre-normalization output in batch {start // config.batch_size}"
            )
        Y = G / norms
        anchors = Y[0::2]
        sims = anchors @ Y.T
        batch_labels = label_arr[idx]
        neg_mask = batch_labels[None, :] != batch_labels[0::2][:, None]
        has_neg = neg_mask.any(axis=1)
        if not np.any(has_neg):
            # Single-class batch: no triplets to form.
            model.loss_history.append(0.0)
            continue
        masked = np.where(neg_mask, sims, -np.inf)
        n_idx = np.argmax(masked, axis=1)
        rows = np.arange(n_pairs)
        s_an = masked[rows, n_idx]
        s_ap = sims[rows, 2 * rows + 1]
        losses = np.maximum(s_an - s_ap + config.margin, 0.0)
        count = int(np.sum(has_neg))
        batch_loss = float(np.sum(losses[has_neg]) / count)
        if not np.isfinite(batch_loss):
            raise InternalError(
                f"non-finite loss in batch {start // config.batch_size}"
            )
        model.loss_history.append(batch_loss)

        active = np.nonzero(has_neg & (losses > 0.0))[0]
        if active.size == 0:
            continue
        a_pos = 2 * active
        p_pos = 2 * active + 1
        npos = n_idx[active]
        grad_Y = np.zeros_like(Y)
        np.add.at(grad_Y, a_pos, Y[npos] - Y[p_pos])
        np.add.at(grad_Y, p_pos, -Y[a_pos])
        np.add.at(grad_Y, npos, Y[a_pos])
        grad_G = (grad_Y - np.sum(grad_Y * Y, axis=1, keepdims=True) * Y) / norms
        dW = grad_G.T @ Xb / count
        db = grad_G.sum(axis=0) / count
        model.W -= config.learning_rate * dW
        model.b -= config.learning_rate * db

    if not (np.all(np.isfinite(model.W)) and np.all(np.isfinite(model.b))):
        raise InternalError("non-finite weights after training")
    return model


def save_model(model: SiameseModel, path: str | Path) -> None:
    payload = {
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "seed": model.seed,
        "W": [[float(v) for v in row] for row in model.W],
        "b": [float(v) for v in model.b],
        "config": model.config,
        "loss_history": model.loss_history,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_model(path: str | Path) -> SiameseModel:
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    with handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed model file: {exc}") from None
    try:
        W = np.asarray(payload["W"], dtype=np.float64)
        b = np.asarray(payload["b"], dtype=np.float64)
        input_dim = int(payload["input_dim"])
        output_dim = int(payload["output_dim"])
        seed = int(payload.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad model file: {exc}") from None
    if W.shape != (output_dim, input_dim) or b.shape != (output_dim,):
        raise DataError(f"{path}: weight shapes disagree with declared dims")
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise DataError(f"{path}: non-finite weights")
    return SiameseModel(
        W=W,
        b=b,
        input_dim=input_dim,
        output_dim=output_dim,
        seed=seed,
        loss_history=list(payload.get("loss_history", [])),
        config=payload.get("config"),
    )
