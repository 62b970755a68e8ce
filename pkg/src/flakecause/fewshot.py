"""Support-set construction and max-similarity few-shot classification."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .siamese import SiameseModel, forward, forward_many


@dataclass(frozen=True)
class SupportCategory:
    ids: tuple[str, ...]
    vectors: np.ndarray  # (n_exemplars, output_dim), unit rows


@dataclass(frozen=True)
class SupportSet:
    output_dim: int
    categories: dict[str, SupportCategory]

    def __post_init__(self) -> None:
        if not self.categories:
            raise DataError("support set has no categories")
        for name, cat in self.categories.items():
            if len(cat.ids) == 0:
                raise DataError(f"support category {name!r} is empty")
            if cat.vectors.shape != (len(cat.ids), self.output_dim):
                raise DataError(f"support category {name!r} has bad vector shape")
            norms = np.linalg.norm(cat.vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise DataError(f"support category {name!r} has non-unit vectors")


@dataclass(frozen=True)
class Prediction:
    test_id: str
    ranking: tuple[tuple[str, float], ...]  # descending score, ties by name

    @property
    def top(self) -> str:
        return self.ranking[0][0]

    def score(self, category: str) -> float:
        for name, value in self.ranking:
            if name == category:
                return value
        raise DataError(f"category {category!r} not in prediction")


def select_support(
    ids: Sequence[str],
    vectors: np.ndarray,
    labels: Sequence[str],
    model: SiameseModel,
    k: int = 5,
) -> SupportSet:
    """Top-k most centred members per category: ranked by mean cosine
    similarity to all other members of the category in transformed space."""
    if k < 1:
        raise DataError("support size k must be at least 1")
    if not (len(ids) == len(vectors) == len(labels)):
        raise DataError("ids, vectors, and labels disagree in length")
    if len(ids) == 0:
        raise DataError("cannot build a support set from no examples")
    transformed = forward_many(model, np.asarray(vectors, dtype=np.float64))
    label_arr = np.asarray(labels, dtype=object)
    categories: dict[str, SupportCategory] = {}
    for name in sorted(set(labels)):
        member_idx = np.nonzero(label_arr == name)[0]
        Y = transformed[member_idx]
        n = len(member_idx)
        if n == 1:
            centrality = np.zeros(1)
        else:
            sims = Y @ Y.T
            # Mean over classmates, excluding self-similarity.
            centrality = (sims.sum(axis=1) - sims.diagonal()) / (n - 1)
        order = np.argsort(-centrality, kind="stable")[: min(k, n)]
        chosen = member_idx[order]
        categories[name] = SupportCategory(
            ids=tuple(ids[i] for i in chosen),
            vectors=transformed[chosen].copy(),
        )
    return SupportSet(output_dim=model.output_dim, categories=categories)


def classify(
    query: np.ndarray,
    model: SiameseModel,
    support: SupportSet,
    test_id: str = "",
    aggregate: str = "max",
) -> Prediction:
    """Score each category against the transformed query and rank."""
    if aggregate not in ("max", "mean"):
        raise DataError(f"unknown aggregation {aggregate!r}")
    if support.output_dim != model.output_dim:
        raise DataError("support set and model disagree on output dim")
    y = forward(model, np.asarray(query, dtype=np.float64))
    scores = {}
    for name, cat in support.categories.items():
        sims = cat.vectors @ y
        scores[name] = float(sims.max() if aggregate == "max" else sims.mean())
    ranking = tuple(
        (name, scores[name])
        for name in sorted(scores, key=lambda c: (-scores[c], c))
    )
    return Prediction(test_id=test_id, ranking=ranking)


def save_support(support: SupportSet, path: str | Path) -> None:
    payload = {
        "output_dim": support.output_dim,
        "categories": {
            name: {
                "ids": list(cat.ids),
                "vectors": [[float(v) for v in row] for row in cat.vectors],
            }
            for name, cat in support.categories.items()
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_support(path: str | Path) -> SupportSet:
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read support set {path}: {exc}") from exc
    with handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed support file: {exc}") from None
    try:
        output_dim = int(payload["output_dim"])
        categories = {
            name: SupportCategory(
                ids=tuple(entry["ids"]),
                vectors=np.asarray(entry["vectors"], dtype=np.float64),
            )
            for name, entry in payload["categories"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad support file: {exc}") from None
    return SupportSet(output_dim=output_dim, categories=categories)
