"""Convert test-corpus JSONL into fixed-width code embeddings.

Each input row needs at least ``{"id", "code"}``. The code is collapsed to
single-space separation, encoded as one segment wrapped in the encoder's
start/end markers (the natural-language slot stays empty), truncated to the
token budget, and summarized by the final hidden state of the first
position. Output rows use the embedding JSONL format
``{"id", "backend": "codebert", "vector": [...]}`` in input order; the
first row additionally records the model identifier. Rows that cannot be
embedded and truncation warnings go to a ``.errors.jsonl`` sidecar, so
every input id appears exactly once as either a vector or an error record.

Inference runs in eval mode with gradients disabled and, by default, a
single compute thread, so repeated runs produce byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

BACKEND_NAME = "codebert"
DEFAULT_MODEL = "microsoft/codebert-base"
DEFAULT_MAX_TOKENS = 512


class DataError(Exception):
    """Bad inputs: missing files, malformed rows, out-of-range options."""


class InternalError(Exception):
    """Encoder failures: weights unavailable, inconsistent output widths."""


@dataclass(frozen=True)
class ExportRequest:
    input_path: Path
    output_path: Path
    model: str = DEFAULT_MODEL
    max_tokens: int = DEFAULT_MAX_TOKENS
    threads: int = 1


@dataclass(frozen=True)
class ExportReport:
    exported: int
    dim: int | None
    errors: int
    truncated: int
    output_path: Path
    errors_path: Path


def errors_path_for(output_path: Path) -> Path:
    return Path(f"{output_path}.errors.jsonl")


def collapse_whitespace(code: str) -> str:
    """Line breaks, tabs, and space runs become single spaces."""
    return " ".join(code.split())


def read_corpus_rows(path: str | Path) -> list[tuple[str, str]]:
    """Read (id, code) pairs from corpus JSONL, preserving file order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such input file: {path}")
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
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
            test_id = row.get("id")
            if not isinstance(test_id, str) or not test_id:
                raise DataError(f"{where}: id must be a non-empty string")
            if test_id in seen:
                raise DataError(f"{where}: duplicate id {test_id!r}")
            seen.add(test_id)
            code = row.get("code")
            if not isinstance(code, str):
                raise DataError(f"{where}: code must be a string")
            rows.append((test_id, code))
    return rows


class Encoder:
    """Pretrained encoder wrapper producing one vector per code string."""

    def __init__(self, model_id: str, threads: int = 1):
        if threads < 1:
            raise DataError("threads must be >= 1")
        import torch
        from transformers import AutoModel, AutoTokenizer
        from transformers.utils import logging as hf_logging

        hf_logging.set_verbosity_error()
        hf_logging.disable_progress_bar()
        torch.set_num_threads(threads)
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise InternalError(f"cannot load encoder {model_id!r}: {exc}") from None
        self.model.eval()

    @property
    def position_limit(self) -> int:
        # Start/end markers consume two of the encoder's positions.
        return int(self.model.config.max_position_embeddings) - 2

    def embed(self, code: str, max_tokens: int) -> tuple[list[float], int, bool]:
        """Return (vector, tokens before truncation, truncated?)."""
        total = len(self.tokenizer(code)["input_ids"])
        encoded = self.tokenizer(
            code, truncation=True, max_length=max_tokens, return_tensors="pt"
        )
        with self._torch.inference_mode():
            output = self.model(**encoded)
        hidden = output.last_hidden_state[0, 0]
        return [float(v) for v in hidden.tolist()], total, total > max_tokens


def export(request: ExportRequest) -> ExportReport:
    """Embed every input row, writing vectors and an errors sidecar."""
    rows = read_corpus_rows(request.input_path)
    encoder = Encoder(request.model, threads=request.threads)
    limit = encoder.position_limit
    if not 2 <= request.max_tokens <= limit:
        raise DataError(
            f"max tokens must be in [2, {limit}], got {request.max_tokens}"
        )

    out_rows: list[dict] = []
    side_rows: list[dict] = []
    truncated_count = 0
    dim: int | None = None
    for test_id, code in rows:
        text = collapse_whitespace(code)
        if not text:
            side_rows.append(
                {"id": test_id, "kind": "error", "message": "empty code"}
            )
            continue
        vector, total, truncated = encoder.embed(text, request.max_tokens)
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise InternalError(
                f"encoder width changed mid-run: {len(vector)} != {dim}"
            )
        row: dict = {"id": test_id, "backend": BACKEND_NAME, "vector": vector}
        if not out_rows:
            row["model"] = request.model
        out_rows.append(row)
        if truncated:
            truncated_count += 1
            side_rows.append(
                {
                    "id": test_id,
                    "kind": "warning",
                    "message": f"truncated to {request.max_tokens} tokens (was {total})",
                }
            )

    errors_path = errors_path_for(request.output_path)
    with Path(request.output_path).open("w", encoding="utf-8") as handle:
        for row in out_rows:
            handle.write(json.dumps(row) + "\n")
    with errors_path.open("w", encoding="utf-8") as handle:
        for row in side_rows:
            handle.write(json.dumps(row) + "\n")

    return ExportReport(
        exported=len(out_rows),
        dim=dim,
        errors=sum(1 for r in side_rows if r["kind"] == "error"),
        truncated=truncated_count,
        output_path=Path(request.output_path),
        errors_path=errors_path,
    )
