"""Run configuration: TOML file values overridden by command-line flags."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import DataError
from .evalharness import ExperimentConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class RunConfig:
    """Every tunable in one place; defaults are the pinned training recipe.

    All randomness derives from ``seed``. The ``[statement_types]`` TOML
    section is not represented here; javatok consumes it directly.
    """

    seed: int = 0
    k_folds: int = 4
    min_count: int = 30
    margin: float = 0.3
    num_pairs: int = 10000
    learning_rate: float = 0.01
    batch_size: int = 64
    output_dim: int = 512
    support_k: int = 5
    aggregate: str = "max"
    knn_k: int = 5
    dt_max_depth: int | None = None
    dt_min_leaf: int = 1
    n_trees: int = 200
    svm_epochs: int = 200
    svm_lr: float = 0.01
    svm_reg: float = 1e-3
    copies_per_test: int = 2
    jobs: int = 1

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            k_folds=self.k_folds,
            seed=self.seed,
            support_k=self.support_k,
            fsl_aggregate=self.aggregate,
            fsl_output_dim=self.output_dim,
            margin=self.margin,
            num_pairs=self.num_pairs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            knn_k=self.knn_k,
            dt_max_depth=self.dt_max_depth,
            dt_min_leaf=self.dt_min_leaf,
            n_trees=self.n_trees,
            svm_epochs=self.svm_epochs,
            svm_lr=self.svm_lr,
            svm_reg=self.svm_reg,
            jobs=self.jobs,
        )


_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def load_config(path: str | Path | None) -> RunConfig:
    """RunConfig from a TOML file's [run] table; no file means defaults."""
    if path is None:
        return RunConfig()
    try:
        with Path(path).open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"config {path} is not valid TOML: {exc}") from exc
    run = data.get("run", {})
    if not isinstance(run, dict):
        raise DataError(f"config {path}: [run] must be a table")
    unknown = sorted(set(run) - set(_FIELDS))
    if unknown:
        raise DataError(f"config {path}: unknown run option(s): {', '.join(unknown)}")
    return RunConfig(**run)


def apply_overrides(config: RunConfig, args) -> RunConfig:
    """Copy `config` with every non-None matching attribute of `args` applied."""
    values = {f.name: getattr(config, f.name) for f in fields(RunConfig)}
    for name in values:
        candidate = getattr(args, name, None)
        if candidate is not None:
            values[name] = candidate
    return RunConfig(**values)
