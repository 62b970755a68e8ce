"""Vector representations for tests: native vocabulary counts plus imported stores."""
from __future__ import annotations

import enum
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .corpus import FlakyTest
from .errors import DataError
from .javatok import TokenKind, tokenize
from .porter import stem


class Backend(enum.Enum):
    VOCAB = "vocab"
    SMELLS = "smells"
    CODEBERT = "codebert"

    @classmethod
    def from_name(cls, name: str) -> "Backend":
        for member in cls:
            if member.value == name:
                return member
        raise DataError(f"unknown embedding backend: {name!r}")


SMELLS_DIM = 21
CODEBERT_DIM = 768

# Splits an identifier into alphabetic runs, breaking camelCase humps.
# "HTTPServer" -> HTTP, Server; "assertEquals" -> assert, Equals.
_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+")


def split_identifier(word: str) -> list[str]:
    """Split on snake_case, digits, and camelCase boundaries."""
    return _CAMEL_RE.findall(word)


def extract_stems(code: str, stemming: bool = True) -> list[str]:
    """Lowercased (optionally stemmed) sub-words of identifiers and keywords."""
    stems: list[str] = []
    for token in tokenize(code):
        if token.kind not in (TokenKind.IDENTIFIER, TokenKind.KEYWORD):
            continue
        for part in split_identifier(token.text):
            word = part.lower()
            stems.append(stem(word) if stemming else word)
    return stems


@dataclass(frozen=True)
class VocabModel:
    """Stem-to-index mapping built on training data only."""

    index: Mapping[str, int]
    stemming: bool = True

    @property
    def dim(self) -> int:
        return len(self.index)


@dataclass(frozen=True)
class EmbeddingVector:
    test_id: str
    backend: Backend
    values: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _validate_values(backend: Backend, values: np.ndarray, where: str) -> None:
    if values.ndim != 1:
        raise DataError(f"{where}: vector must be one-dimensional")
    if not np.all(np.isfinite(values)):
        raise DataError(f"{where}: non-finite value in vector")
    if backend is Backend.CODEBERT and values.shape[0] != CODEBERT_DIM:
        raise DataError(
            f"{where}: codebert vector has dim {values.shape[0]}, expected {CODEBERT_DIM}"
        )
    if backend is Backend.SMELLS:
        if values.shape[0] != SMELLS_DIM:
            raise DataError(
                f"{where}: smells vector has dim {values.shape[0]}, expected {SMELLS_DIM}"
            )
        if not np.all((values == 0.0) | (values == 1.0)):
            raise DataError(f"{where}: non-binary smell vector")


def build_vocab(train_tests: Sequence[FlakyTest], stemming: bool = True) -> VocabModel:
    """Distinct stems of the training tests, densely indexed in sorted order."""
    if not train_tests:
        raise DataError("cannot build vocabulary from an empty training set")
    seen: set[str] = set()
    for test in train_tests:
        seen.update(extract_stems(test.code, stemming=stemming))
    index = {word: i for i, word in enumerate(sorted(seen))}
    return VocabModel(index=index, stemming=stemming)


def save_vocab(model: VocabModel, path: str | Path) -> None:
    payload = {"stemming": model.stemming, "index": dict(model.index)}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_vocab(path: str | Path) -> VocabModel:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read vocabulary {path}: {exc}") from exc
    index = payload.get("index")
    if not isinstance(index, dict) or not index:
        raise DataError(f"{path}: missing or empty index")
    positions = sorted(index.values())
    if positions != list(range(len(index))):
        raise DataError(f"{path}: vocabulary indices are not dense")
    return VocabModel(index=dict(index), stemming=bool(payload.get("stemming", True)))


def vocab_vector(code: str, model: VocabModel) -> np.ndarray:
    """Per-stem occurrence counts; out-of-vocabulary stems are ignored."""
    counts = Counter(extract_stems(code, stemming=model.stemming))
    values = np.zeros(model.dim, dtype=np.float64)
    for word, count in counts.items():
        pos = model.index.get(word)
        if pos is not None:
            values[pos] = float(count)
    return values


def vocab_embed(test: FlakyTest, model: VocabModel) -> EmbeddingVector:
    return EmbeddingVector(
        test_id=test.id, backend=Backend.VOCAB, values=vocab_vector(test.code, model)
    )


class EmbeddingStore:
    """Immutable id -> vector mapping with a single backend and dimension."""

    def __init__(self, backend: Backend, vectors: Iterable[EmbeddingVector]):
        self.backend = backend
        self._vectors: dict[str, EmbeddingVector] = {}
        dim: int | None = None
        for vec in vectors:
            if vec.backend is not backend:
                raise DataError(
                    f"vector {vec.test_id!r} has backend {vec.backend.value}, "
                    f"store expects {backend.value}"
                )
            if vec.test_id in self._vectors:
                raise DataError(f"duplicate embedding id: {vec.test_id!r}")
            if dim is None:
                dim = vec.dim
            elif vec.dim != dim:
                raise DataError(
                    f"vector {vec.test_id!r} has dim {vec.dim}, store has dim {dim}"
                )
            _validate_values(backend, vec.values, f"embedding {vec.test_id!r}")
            self._vectors[vec.test_id] = vec
        self.dim = 0 if dim is None else dim

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, test_id: str) -> bool:
        return test_id in self._vectors

    def ids(self) -> list[str]:
        return list(self._vectors)

    def get(self, test_id: str) -> EmbeddingVector:
        try:
            return self._vectors[test_id]
        except KeyError:
            raise DataError(f"not embedded: {test_id!r}") from None

    def values(self, test_id: str) -> np.ndarray:
        return self.get(test_id).values

    def __iter__(self) -> Iterator[EmbeddingVector]:
        return iter(self._vectors.values())


def import_store(
    path: str | Path, backend: Backend, expected_dim: int | None = None
) -> EmbeddingStore:
    """Read an embedding JSONL file into a store, validating as we go."""
    vectors: list[EmbeddingVector] = []
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read embeddings {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON: {exc}") from None
            if not isinstance(row, dict):
                raise DataError(f"{where}: row must be an object")
            for key in ("id", "backend", "vector"):
                if key not in row:
                    raise DataError(f"{where}: missing field {key!r}")
            if not isinstance(row["id"], str) or not row["id"]:
                raise DataError(f"{where}: id must be a non-empty string")
            if row["backend"] != backend.value:
                raise DataError(
                    f"{where}: row backend {row['backend']!r} does not match "
                    f"requested backend {backend.value!r}"
                )
            raw = row["vector"]
            if not isinstance(raw, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
            ):
                raise DataError(f"{where}: vector must be a list of numbers")
            values = np.asarray(raw, dtype=np.float64)
            _validate_values(backend, values, where)
            vectors.append(
                EmbeddingVector(test_id=row["id"], backend=backend, values=values)
            )
    store = EmbeddingStore(backend, vectors)
    if expected_dim is not None and len(store) > 0 and store.dim != expected_dim:
        raise DataError(f"{path}: store dim {store.dim}, expected {expected_dim}")
    return store


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store as embedding JSONL, rows sorted by id for reproducibility."""
    with open(path, "w", encoding="utf-8") as handle:
        for test_id in sorted(store.ids()):
            vec = store.get(test_id)
            row = {
                "id": vec.test_id,
                "backend": vec.backend.value,
                "vector": [float(v) for v in vec.values],
            }
            handle.write(json.dumps(row) + "\n")
