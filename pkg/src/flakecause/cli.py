"""Command-line surface tying the pipeline together.

Exit codes: 0 ok, 1 usage, 2 data error, 3 internal invariant violation.
All artifacts are files; no network access.
"""
from __future__ import annotations

import argparse
import functools
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentationConfig, augment_corpus
from .config import RunConfig, apply_overrides, load_config
from .corpus import Category, corpus_stats, filter_categories, load_corpus, save_corpus
from .embed import (
    Backend,
    EmbeddingStore,
    build_vocab,
    import_store,
    load_vocab,
    save_store,
    save_vocab,
    vocab_embed,
    vocab_vector,
)
from .errors import DataError, InternalError
from .evalharness import (
    CLASSIFIER_NAMES,
    SWEEP_MARGINS,
    SWEEP_PAIR_COUNTS,
    render_text,
    run_experiment,
    save_report,
    stratified_group_kfold,
    sweep,
    sweep_csv,
    transformed_csv,
)
from .fewshot import classify, load_support, save_support, select_support
from .javatok import classify_statement, load_statement_patterns
from .interpret import (
    annotated_source,
    attribute,
    exporter_embed_fn,
    prevalence,
    render_prevalence,
    save_attributions,
    to_dict as prevalence_to_dict,
    vocab_embed_fn,
)
from .siamese import TrainingConfig, load_model, save_model, train


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common_training_flags(parser):
    parser.add_argument("--margin", type=float, default=None)
    parser.add_argument("--pairs", type=int, default=None, dest="num_pairs")
    parser.add_argument("--lr", type=float, default=None, dest="learning_rate")
    parser.add_argument("--batch", type=int, default=None, dest="batch_size")
    parser.add_argument("--output-dim", type=int, default=None, dest="output_dim")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flakecause", description=__doc__)
    parser.add_argument("--config", default=None, help="TOML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", parents=[], help="inspect or validate a corpus")
    p.add_argument("action", choices=("stats", "validate"))
    p.add_argument("path")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("augment", help="add mutated copies of original tests")
    p.add_argument("path")
    p.add_argument("--output", required=True)
    p.add_argument("--copies", type=int, default=None, dest="copies_per_test")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--targets",
        default=None,
        help="per-category totals, e.g. 'Time=100,AsyncWaits=120'",
    )
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("embed", help="build or import an embedding store")
    embed_sub = p.add_subparsers(dest="embed_command", required=True)

    pv = embed_sub.add_parser("vocab", help="vocabulary-count embeddings")
    pv.add_argument("path")
    pv.add_argument("--output", required=True)
    pv.add_argument("--vocab-out", default=None)
    pv.add_argument(
        "--train-fold",
        type=int,
        default=None,
        help="build the vocabulary from all folds except this one",
    )
    pv.add_argument("--folds", type=int, default=None, dest="k_folds")
    pv.add_argument("--seed", type=int, default=None)
    pv.set_defaults(func=cmd_embed_vocab)

    pi = embed_sub.add_parser("import", help="validate an external embedding file")
    pi.add_argument("path")
    pi.add_argument("--backend", required=True, choices=("codebert", "smells"))
    pi.add_argument("--output", default=None)
    pi.set_defaults(func=cmd_embed_import)

    p = sub.add_parser("train", help="train the similarity model")
    p.add_argument("path")
    p.add_argument("--output", required=True)
    p.add_argument("--backend", default="vocab", choices=("vocab", "codebert", "smells"))
    p.add_argument("--embeddings", default=None, help="store file for imported backends")
    p.add_argument("--vocab-out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--support-out", default=None)
    p.add_argument("--k", type=int, default=None, dest="support_k")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="rank categories for each test")
    p.add_argument("path")
    p.add_argument("--model", required=True)
    p.add_argument("--support", required=True)
    p.add_argument("--vocab", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--backend", default="vocab", choices=("vocab", "codebert", "smells"))
    p.add_argument("--output", default=None)
    p.add_argument("--aggregate", default=None, choices=("max", "mean"))
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="cross-validated experiment grid")
    p.add_argument("path")
    p.add_argument("--backends", default="vocab")
    p.add_argument("--classifiers", default=",".join(CLASSIFIER_NAMES))
    p.add_argument("--folds", type=int, default=None, dest="k_folds")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--min-count", type=int, default=None, dest="min_count")
    p.add_argument(
        "--embeddings",
        action="append",
        default=None,
        metavar="BACKEND=PATH",
        help="store file per imported backend; repeatable",
    )
    p.add_argument("--output", default=None, help="JSON report path")
    p.add_argument("--text", default=None, help="text report path")
    p.add_argument(
        "--emit-transformed-csv",
        default=None,
        dest="transformed_out",
        help="dump post-projection vectors (first backend, full corpus)",
    )
    p.add_argument("--jobs", type=int, default=None)
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="margin x pair-count grid for the fsl cell")
    p.add_argument("path")
    p.add_argument("--backend", default="vocab", choices=("vocab", "codebert", "smells"))
    p.add_argument("--embeddings", default=None)
    p.add_argument("--margins", default=None, help="comma-separated margins")
    p.add_argument("--pairs", default=None, help="comma-separated pair counts")
    p.add_argument("--min-count", type=int, default=None, dest="min_count")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explain", help="statement-level attribution for true positives")
    p.add_argument("path")
    p.add_argument("--model", required=True)
    p.add_argument("--support", required=True)
    p.add_argument("--embedder", required=True, choices=("vocab", "handshake"))
    p.add_argument("--vocab", default=None)
    p.add_argument("--exporter-cmd", default=None, help="command line for the exporter")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_explain)

    return parser


# ---------------------------------------------------------------------------
# Subcommands. Each returns a process exit code.


def cmd_corpus(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    if not tests:
        raise DataError(f"{args.path}: empty corpus")
    if args.action == "validate":
        print(f"ok: {len(tests)} tests")
        return 0
    stats = corpus_stats(tests)
    categories = sorted(
        set(stats.original) | set(stats.augmented), key=lambda c: c.value
    )
    width = max([len("category"), *(len(c.value) for c in categories)])
    print(f"{'category':<{width}}  {'original':>8}  {'augmented':>9}")
    for category in categories:
        print(
            f"{category.value:<{width}}  {stats.original.get(category, 0):>8}"
            f"  {stats.augmented.get(category, 0):>9}"
        )
    print(f"{'total':<{width}}  {stats.total:>8}")
    return 0


def _parse_targets(spec: str) -> dict[Category, int]:
    targets = {}
    for part in spec.split(","):
        name, _, count = part.partition("=")
        try:
            category = Category(name.strip())
        except ValueError as exc:
            raise DataError(f"unknown category in --targets: {name.strip()!r}") from exc
        try:
            targets[category] = int(count)
        except ValueError as exc:
            raise DataError(f"bad target count for {name.strip()!r}: {count!r}") from exc
    return targets


def cmd_augment(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    aug_config = AugmentationConfig(
        copies_per_test=config.copies_per_test, seed=config.seed
    )
    targets = _parse_targets(args.targets) if args.targets else None
    result = augment_corpus(tests, aug_config, targets=targets)
    save_corpus(result, args.output)
    print(f"wrote {len(result)} tests ({len(result) - len(tests)} augmented)")
    return 0


def cmd_embed_vocab(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    train_tests = tests
    if args.train_fold is not None:
        assignment = stratified_group_kfold(tests, k=config.k_folds, seed=config.seed)
        train_tests = [t for t in tests if assignment[t.id] != args.train_fold]
        if not train_tests:
            raise DataError(f"fold {args.train_fold} leaves no training tests")
    vocab = build_vocab(train_tests)
    store = EmbeddingStore(Backend.VOCAB, [vocab_embed(t, vocab) for t in tests])
    save_store(store, args.output)
    if args.vocab_out:
        save_vocab(vocab, args.vocab_out)
    print(f"embedded {len(store)} tests (vocabulary size {vocab.dim})")
    return 0


def cmd_embed_import(args, config: RunConfig) -> int:
    backend = Backend.from_name(args.backend)
    store = import_store(args.path, backend)
    if args.output:
        save_store(store, args.output)
    print(f"imported {len(store)} vectors (dim {store.dim})")
    return 0


def _corpus_features(tests, backend: Backend, store_path: str | None):
    """Feature matrix for a whole corpus, outside any fold protocol."""
    if backend is Backend.VOCAB:
        vocab = build_vocab(tests)
        X = np.stack([vocab_embed(t, vocab).values for t in tests])
        return X, vocab
    if not store_path:
        raise DataError(f"backend {backend.value!r} needs --embeddings")
    store = import_store(store_path, backend)
    return np.stack([store.values(t.id) for t in tests]), None


def cmd_train(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    backend = Backend.from_name(args.backend)
    X, vocab = _corpus_features(tests, backend, args.embeddings)
    t_config = TrainingConfig(
        margin=config.margin,
        num_pairs=config.num_pairs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    labels = [t.category.value for t in tests]
    model = train(X, labels, t_config, output_dim=config.output_dim)
    save_model(model, args.output)
    if vocab is not None and args.vocab_out:
        save_vocab(vocab, args.vocab_out)
    if args.support_out:
        support = select_support(
            [t.id for t in tests], X, labels, model, k=config.support_k
        )
        save_support(support, args.support_out)
    last = model.loss_history[-1] if model.loss_history else float("nan")
    print(
        f"trained on {len(tests)} tests: margin {t_config.margin}, "
        f"pairs {t_config.num_pairs}, lr {t_config.learning_rate}, "
        f"final batch loss {last:.4f}"
    )
    return 0


def cmd_classify(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    model = load_model(args.model)
    support = load_support(args.support)
    backend = Backend.from_name(args.backend)
    if backend is Backend.VOCAB:
        if not args.vocab:
            raise DataError("vocab backend needs --vocab")
        vocab = load_vocab(args.vocab)
        rows = [vocab_vector(t.code, vocab) for t in tests]
    else:
        if not args.embeddings:
            raise DataError(f"backend {backend.value!r} needs --embeddings")
        store = import_store(args.embeddings, backend)
        rows = [store.values(t.id) for t in tests]

    out_lines = []
    for test, x in zip(tests, rows):
        pred = classify(x, model, support, test_id=test.id, aggregate=config.aggregate)
        out_lines.append(
            json.dumps(
                {
                    "id": test.id,
                    "top": pred.top,
                    "ranking": [[c, float(s)] for c, s in pred.ranking],
                },
                sort_keys=True,
            )
        )
    payload = "\n".join(out_lines) + "\n"
    if args.output:
        Path(args.output).write_text(payload)
    else:
        sys.stdout.write(payload)
    return 0


def _parse_store_args(pairs: list[str] | None):
    stores = {}
    for item in pairs or ():
        name, sep, path = item.partition("=")
        if not sep:
            raise DataError(f"--embeddings expects BACKEND=PATH, got {item!r}")
        backend = Backend.from_name(name.strip())
        stores[backend] = import_store(path.strip(), backend)
    return stores


def _filtered(tests, config: RunConfig):
    kept, kept_categories = filter_categories(tests, min_count=config.min_count)
    dropped = sorted(
        {t.category.value for t in tests} - {c.value for c in kept_categories}
    )
    if dropped:
        print(
            f"note: excluded categories below min_count {config.min_count}: "
            + ", ".join(dropped),
            file=sys.stderr,
        )
    return kept


def cmd_evaluate(args, config: RunConfig) -> int:
    tests = _filtered(load_corpus(args.path), config)
    backends = [Backend.from_name(b.strip()) for b in args.backends.split(",") if b.strip()]
    classifiers = [c.strip() for c in args.classifiers.split(",") if c.strip()]
    stores = _parse_store_args(args.embeddings)
    report = run_experiment(tests, backends, classifiers, config.experiment(), stores)
    if args.output:
        save_report(report, args.output, args.text)
    elif args.text:
        Path(args.text).write_text(render_text(report))
    sys.stdout.write(render_text(report))

    if args.transformed_out:
        backend = sorted(backends, key=lambda b: b.value)[0]
        X, _ = _corpus_features(
            tests, backend, _store_path_for(args.embeddings, backend)
        )
        t_config = TrainingConfig(
            margin=config.margin,
            num_pairs=config.num_pairs,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            seed=config.seed,
        )
        model = train(
            X, [t.category.value for t in tests], t_config, output_dim=config.output_dim
        )
        Path(args.transformed_out).write_text(transformed_csv(model, tests, X))
    return 0


def _store_path_for(pairs: list[str] | None, backend: Backend) -> str | None:
    for item in pairs or ():
        name, sep, path = item.partition("=")
        if sep and Backend.from_name(name.strip()) is backend:
            return path.strip()
    return None


def cmd_sweep(args, config: RunConfig) -> int:
    tests = _filtered(load_corpus(args.path), config)
    backend = Backend.from_name(args.backend)
    stores = {}
    if backend is not Backend.VOCAB:
        if not args.embeddings:
            raise DataError(f"backend {backend.value!r} needs --embeddings")
        stores[backend] = import_store(args.embeddings, backend)
    margins = (
        tuple(float(m) for m in args.margins.split(",")) if args.margins else SWEEP_MARGINS
    )
    pair_counts = (
        tuple(int(p) for p in args.pairs.split(",")) if args.pairs else SWEEP_PAIR_COUNTS
    )
    rows = sweep(
        tests,
        backend,
        config.experiment(),
        stores,
        margins=margins,
        pair_counts=pair_counts,
    )
    text = sweep_csv(rows)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_explain(args, config: RunConfig) -> int:
    tests = load_corpus(args.path)
    model = load_model(args.model)
    support = load_support(args.support)
    out_dir = Path(args.output_dir)
    (out_dir / "annotated").mkdir(parents=True, exist_ok=True)

    tag_fn = classify_statement
    if args.config:
        patterns = load_statement_patterns(args.config)
        tag_fn = functools.partial(classify_statement, patterns=patterns)

    if args.embedder == "vocab":
        if not args.vocab:
            raise DataError("vocab embedder needs --vocab")
        embed_fn = vocab_embed_fn(load_vocab(args.vocab))
    else:
        if not args.exporter_cmd:
            raise DataError("handshake embedder needs --exporter-cmd")
        embed_fn = exporter_embed_fn(
            tests, shlex.split(args.exporter_cmd), out_dir / "handshake"
        )

    attributions = []
    skipped = []
    for test in tests:
        try:
            att = attribute(test, test.category.value, model, support, embed_fn)
        except DataError as exc:
            skipped.append(f"{test.id}: {exc}")
            continue
        attributions.append(att)
        name = test.id.replace("/", "_") + ".txt"
        (out_dir / "annotated" / name).write_text(annotated_source(test, att))

    for line in skipped:
        print(f"skipped {line}", file=sys.stderr)
    if not attributions:
        raise DataError("no test could be attributed")

    save_attributions(attributions, out_dir / "attributions.json")
    table = prevalence(attributions, tag_fn=tag_fn)
    (out_dir / "prevalence.txt").write_text(render_prevalence(table))
    (out_dir / "prevalence.json").write_text(
        json.dumps(prevalence_to_dict(table), indent=2, sort_keys=True) + "\n"
    )
    sys.stdout.write(render_prevalence(table))
    print(f"attributed {len(attributions)} tests, skipped {len(skipped)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), args)
        return args.func(args, config)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
