"""Labeled flaky-test corpus: loading, validation, cleaning, and selection.

The on-disk format is JSONL, one test per line, UTF-8, with the exact field
names of :class:`FlakyTest`. Comments are stripped from ``code`` at load time
so every downstream stage sees comment-free Java source.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError


class Category(Enum):
    """Flakiness root-cause categories (closed set)."""

    ASYNC_WAITS = "AsyncWaits"
    UNORDERED_COLLECTIONS = "UnorderedCollections"
    CONCURRENCY = "Concurrency"
    TIME = "Time"
    TEST_ORDER_DEPENDENCY = "TestOrderDependency"
    NETWORK = "Network"
    RANDOMNESS = "Randomness"
    TEST_CASE_TIMEOUT = "TestCaseTimeout"
    RESOURCE_LEAK = "ResourceLeak"
    PLATFORM_DEPENDENCY = "PlatformDependency"
    TOO_RESTRICTIVE_RANGE = "TooRestrictiveRange"
    IO = "IO"

    @classmethod
    def from_label(cls, label: str) -> "Category":
        try:
            return cls(label)
        except ValueError:
            raise DataError(f"unknown category {label!r}") from None


class Origin(Enum):
    LUO = "luo"
    TSE22 = "tse22"
    NEW = "new"


@dataclass(frozen=True)
class FlakyTest:
    """One labeled flaky test, with provenance and augmentation lineage."""

    id: str
    project_url: str
    test_name: str
    file_path: str
    code: str
    category: Category
    origin: Origin
    augmented_from: str | None = None

    @property
    def is_augmented(self) -> bool:
        return self.augmented_from is not None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "project_url": self.project_url,
            "test_name": self.test_name,
            "file_path": self.file_path,
            "code": self.code,
            "category": self.category.value,
            "origin": self.origin.value,
            "augmented_from": self.augmented_from,
        }


@dataclass(frozen=True)
class CorpusStats:
    """Per-category original/augmented counts."""

    original: dict[Category, int]
    augmented: dict[Category, int]

    @property
    def total(self) -> int:
        return sum(self.original.values()) + sum(self.augmented.values())


def strip_comments(code: str) -> str:
    """Remove // and /* */ comments, leaving string/char literals intact.

    Purely lexical; tolerates unterminated block comments (stripped to end of
    input). Never inserts characters, so output length <= input length.
    """
    out: list[str] = []
    i = 0
    n = len(code)
    while i < n:
        ch = code[i]
        nxt = code[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            i += 2
            while i < n and code[i] != "\n":
                i += 1
        elif ch == "/" and nxt == "*":
            i += 2
            while i + 1 < n and not (code[i] == "*" and code[i + 1] == "/"):
                i += 1
            i = i + 2 if i + 1 < n else n
        elif ch == '"' or ch == "'":
            quote = ch
            out.append(ch)
            i += 1
            while i < n:
                out.append(code[i])
                if code[i] == "\\" and i + 1 < n:
                    out.append(code[i + 1])
                    i += 2
                    continue
                if code[i] == quote or code[i] == "\n":
                    i += 1
                    break
                i += 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _parse_record(obj: dict, lineno: int) -> FlakyTest:
    required = ("id", "project_url", "test_name", "file_path", "code", "category", "origin")
    for field in required:
        if field not in obj:
            raise DataError(f"line {lineno}: missing field {field!r}")
    code = strip_comments(obj["code"])
    if not code.strip():
        raise DataError(f"line {lineno}: test {obj['id']!r} has empty code after comment stripping")
    try:
        origin = Origin(obj["origin"])
    except ValueError:
        raise DataError(f"line {lineno}: unknown origin {obj['origin']!r}") from None
    try:
        category = Category.from_label(obj["category"])
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from None
    return FlakyTest(
        id=str(obj["id"]),
        project_url=str(obj["project_url"]),
        test_name=str(obj["test_name"]),
        file_path=str(obj["file_path"]),
        code=code,
        category=category,
        origin=origin,
        augmented_from=obj.get("augmented_from") or None,
    )


def load_corpus(path: str | Path) -> list[FlakyTest]:
    """Load a corpus JSONL file, validating records and lineage.

    Raises DataError naming the offending line for malformed JSON, unknown
    labels, duplicate ids, or broken augmentation lineage.
    """
    path = Path(path)
    tests: list[FlakyTest] = []
    seen: dict[str, FlakyTest] = {}
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc})") from None
            if not isinstance(obj, dict):
                raise DataError(f"line {lineno}: record is not an object")
            test = _parse_record(obj, lineno)
            if test.id in seen:
                raise DataError(f"line {lineno}: duplicate id {test.id!r}")
            seen[test.id] = test
            tests.append(test)
    for test in tests:
        if test.augmented_from is None:
            continue
        parent = seen.get(test.augmented_from)
        if parent is None:
            raise DataError(f"test {test.id!r}: augmented_from {test.augmented_from!r} not in corpus")
        if parent.augmented_from is not None:
            raise DataError(f"test {test.id!r}: lineage deeper than 1 (parent {parent.id!r} is augmented)")
    return tests


def save_corpus(tests: Iterable[FlakyTest], path: str | Path) -> None:
    """Write tests as JSONL; inverse of load_corpus for valid corpora."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for test in tests:
            fh.write(json.dumps(test.to_record(), ensure_ascii=False) + "\n")


def corpus_stats(tests: Sequence[FlakyTest]) -> CorpusStats:
    original: dict[Category, int] = {}
    augmented: dict[Category, int] = {}
    for test in tests:
        bucket = augmented if test.is_augmented else original
        bucket[test.category] = bucket.get(test.category, 0) + 1
    return CorpusStats(original=original, augmented=augmented)


def filter_categories(
    tests: Sequence[FlakyTest],
    min_count: int = 30,
    excluded: frozenset[Category] | set[Category] = frozenset(),
) -> tuple[list[FlakyTest], set[Category]]:
    """Keep categories with >= min_count original tests, minus exclusions.

    Counts consider only non-augmented tests, so oversampling cannot promote
    a category past the representativeness threshold.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: dict[Category, int] = {}
    for test in tests:
        if not test.is_augmented:
            counts[test.category] = counts.get(test.category, 0) + 1
    kept_categories = {
        cat for cat, n in counts.items() if n >= min_count and cat not in excluded
    }
    if len(kept_categories) < 2:
        raise DataError(
            f"insufficient classes: {len(kept_categories)} categories have >= {min_count} original tests"
        )
    kept = [t for t in tests if t.category in kept_categories]
    return kept, kept_categories


def relabel(test: FlakyTest, **changes) -> FlakyTest:
    """Return a copy with the given fields replaced."""
    return replace(test, **changes)
