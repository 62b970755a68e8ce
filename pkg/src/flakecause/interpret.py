"""Ablation-based attribution: which statement carries the category signal.

A test is re-embedded once per statement with that statement deleted; each
variant's similarity score for the test's (correct) category is compared to
the original's. The statement whose removal causes the largest drop is the
most influential one. Aggregating the types of those statements per category
yields a prevalence table.
"""
from __future__ import annotations

import json
import subprocess
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import FlakyTest, save_corpus
from .embed import Backend, CODEBERT_DIM, VocabModel, import_store, vocab_vector
from .errors import DataError
from .fewshot import SupportSet, classify
from .javatok import StatementType, classify_statement, segment_statements
from .siamese import SiameseModel

EmbedFn = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class StatementAttribution:
    """Per-statement similarity drops for one correctly categorized test.

    ``drops[i]`` is original score minus the score with statement i removed;
    None marks a variant that could not be embedded. ``most_influential`` is
    the argmax over the non-missing drops, ties resolved to the lowest index.
    """

    test_id: str
    category: str
    statements: tuple[str, ...]
    drops: tuple[float | None, ...]
    most_influential: int

    def __post_init__(self):
        if len(self.drops) != len(self.statements):
            raise DataError(
                f"attribution for {self.test_id!r}: {len(self.drops)} drops "
                f"for {len(self.statements)} statements"
            )
        if not 0 <= self.most_influential < len(self.statements):
            raise DataError(
                f"attribution for {self.test_id!r}: index {self.most_influential} "
                "out of range"
            )
        if self.drops[self.most_influential] is None:
            raise DataError(
                f"attribution for {self.test_id!r}: most influential statement "
                "has no recorded drop"
            )


@dataclass(frozen=True)
class PrevalenceRow:
    category: str
    n: int
    percent: Mapping[str, float]

    def __post_init__(self):
        for label, value in self.percent.items():
            if not 0.0 <= value <= 100.0:
                raise DataError(f"{self.category}/{label}: percentage {value} out of range")


@dataclass(frozen=True)
class PrevalenceTable:
    rows: tuple[PrevalenceRow, ...]

    def row(self, category: str) -> PrevalenceRow:
        for row in self.rows:
            if row.category == category:
                return row
        raise DataError(f"no prevalence row for category {category!r}")


def ablate(test: FlakyTest) -> list[FlakyTest]:
    """One variant per statement, with that statement's span deleted.

    The deletion removes exactly the statement's character span; braces that
    belong to other statements stay in place. Variant ids are deterministic.
    """
    statements = segment_statements(test.code)
    if len(statements) < 2:
        raise DataError(f"test {test.id!r}: nothing to ablate")
    variants = []
    for i, stmt in enumerate(statements):
        start, end = stmt.span
        variants.append(
            replace(
                test,
                id=f"{test.id}__ablate{i}",
                code=test.code[:start] + test.code[end:],
                augmented_from=test.id,
            )
        )
    return variants


def attribute(
    test: FlakyTest,
    correct_category: str,
    model: SiameseModel,
    support: SupportSet,
    embed_fn: EmbedFn,
) -> StatementAttribution:
    """Score drop per ablated statement; assumes the test is a true positive."""
    base = classify(embed_fn(test.code), model, support, test_id=test.id)
    if base.top != correct_category:
        raise DataError(
            f"test {test.id!r} is predicted {base.top!r}, not "
            f"{correct_category!r}; attribute only true positives"
        )
    base_score = base.score(correct_category)

    statements = segment_statements(test.code)
    drops: list[float | None] = []
    for variant in ablate(test):
        try:
            score = classify(embed_fn(variant.code), model, support).score(
                correct_category
            )
        except DataError:
            drops.append(None)
            continue
        drops.append(base_score - score)

    best: int | None = None
    for i, drop in enumerate(drops):
        if drop is None:
            continue
        if best is None or drop > drops[best]:
            best = i
    if best is None:
        raise DataError(f"test {test.id!r}: no ablation variant could be embedded")
    return StatementAttribution(
        test_id=test.id,
        category=correct_category,
        statements=tuple(s.text for s in statements),
        drops=tuple(drops),
        most_influential=best,
    )


def prevalence(
    attributions: Sequence[StatementAttribution],
    tag_fn: Callable[[str], set[StatementType]] = classify_statement,
) -> PrevalenceTable:
    """Share of most-influential statements carrying each statement type.

    Statements can carry several tags, so a row's percentages need not sum
    to 100.
    """
    if not attributions:
        raise DataError("prevalence needs at least one attribution")
    by_category: dict[str, list[StatementAttribution]] = defaultdict(list)
    for att in attributions:
        by_category[att.category].append(att)

    rows = []
    for category in sorted(by_category):
        group = by_category[category]
        tag_sets = [tag_fn(att.statements[att.most_influential]) for att in group]
        percent = {
            stype.value: 100.0 * sum(1 for tags in tag_sets if stype in tags) / len(group)
            for stype in StatementType
        }
        rows.append(PrevalenceRow(category=category, n=len(group), percent=percent))
    return PrevalenceTable(rows=tuple(rows))


def vocab_embed_fn(model: VocabModel) -> EmbedFn:
    """Embed raw code through the vocabulary backend."""
    return lambda code: vocab_vector(code, model)


def exporter_embed_fn(
    tests: Sequence[FlakyTest],
    exporter_cmd: Sequence[str],
    workdir: str | Path,
    expected_dim: int = CODEBERT_DIM,
) -> EmbedFn:
    """Batch-embed originals plus all ablation variants via the exporter.

    Writes a variants corpus JSONL, runs the exporter subprocess once with
    --input/--output, imports the embedding JSONL it produced, and returns a
    code -> vector lookup. Variants the exporter could not embed are simply
    absent; attribute() records their drops as missing.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows: list[FlakyTest] = []
    for test in tests:
        rows.append(test)
        rows.extend(ablate(test))
    corpus_path = workdir / "variants_corpus.jsonl"
    output_path = workdir / "variants_embeddings.jsonl"
    save_corpus(rows, corpus_path)

    command = [*exporter_cmd, "--input", str(corpus_path), "--output", str(output_path)]
    result = subprocess.run(command, capture_output=True, text=True)
    if result.returncode != 0:
        tail = result.stderr.strip().splitlines()[-1] if result.stderr.strip() else ""
        raise DataError(f"exporter exited with {result.returncode}: {tail}")

    store = import_store(output_path, Backend.CODEBERT, expected_dim=expected_dim)
    by_code: dict[str, np.ndarray] = {}
    for row in rows:
        if row.id in store:
            by_code[row.code] = store.get(row.id).values

    def embed(code: str) -> np.ndarray:
        if code not in by_code:
            raise DataError("not embedded: variant code missing from exporter output")
        return by_code[code]

    return embed


def annotated_source(test: FlakyTest, attribution: StatementAttribution) -> str:
    """The test's code with the most influential statement's lines marked."""
    statements = segment_statements(test.code)
    if len(statements) != len(attribution.statements):
        raise DataError(
            f"test {test.id!r}: code segments into {len(statements)} statements, "
            f"attribution has {len(attribution.statements)}"
        )
    start, end = statements[attribution.most_influential].span
    drop = attribution.drops[attribution.most_influential]
    lines = [
        f"test: {test.id}",
        f"category: {attribution.category}",
        f"most influential statement: #{attribution.most_influential} "
        f"(similarity drop {drop:+.4f})",
        "",
    ]
    offset = 0
    for line in test.code.splitlines(keepends=True):
        line_start, line_end = offset, offset + len(line)
        marker = ">> " if line_start < end and line_end > start else "   "
        lines.append(marker + line.rstrip("\n"))
        offset = line_end
    return "\n".join(lines) + "\n"


def attribution_report(attributions: Sequence[StatementAttribution]) -> dict:
    """JSON-ready report: ordered statements with drops, winner flagged."""
    return {
        "attributions": [
            {
                "test_id": att.test_id,
                "category": att.category,
                "most_influential": att.most_influential,
                "statements": [
                    {
                        "index": i,
                        "text": text,
                        "drop": att.drops[i],
                        "most_influential": i == att.most_influential,
                    }
                    for i, text in enumerate(att.statements)
                ],
            }
            for att in attributions
        ]
    }


def save_attributions(
    attributions: Sequence[StatementAttribution], path: str | Path
) -> None:
    Path(path).write_text(
        json.dumps(attribution_report(attributions), indent=2, sort_keys=True) + "\n"
    )


def render_prevalence(table: PrevalenceTable) -> str:
    """Fixed-width text table, one row per category, one column per type."""
    types = [stype.value for stype in StatementType]
    name_width = max([len("category"), *(len(r.category) for r in table.rows)])
    header = f"{'category':<{name_width}}  {'N':>4}"
    for label in types:
        header += f"  {label:>{max(len(label), 6)}}"
    lines = [header]
    for row in table.rows:
        line = f"{row.category:<{name_width}}  {row.n:>4}"
        for label in types:
            width = max(len(label), 6)
            line += f"  {row.percent[label]:>{width}.1f}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def to_dict(table: PrevalenceTable) -> dict:
    return {
        row.category: {"n": row.n, "percent": dict(row.percent)}
        for row in table.rows
    }


__all__ = [
    "StatementAttribution",
    "PrevalenceRow",
    "PrevalenceTable",
    "ablate",
    "attribute",
    "prevalence",
    "vocab_embed_fn",
    "exporter_embed_fn",
    "annotated_source",
    "attribution_report",
    "save_attributions",
    "render_prevalence",
    "to_dict",
]
