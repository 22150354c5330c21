"""Experiment configuration: paths, similarity, and hyperparameter grids.

Configs live in JSON files whose keys mirror the dataclass fields below.
Grid defaults follow the experimental protocol this package implements:
candidate pools of 1000 documents, sun sizes 2..14 (fixed at 1 for the
standard pseudo-relevance estimator), moon sizes 2..6, sun/moon weights and
retained fractions swept from 0.1 to 1.0 in steps of 0.1.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

RERANK_SCOPES = ("full_corpus", "pool")


class ConfigError(ValueError):
    """The experiment configuration is invalid or incomplete."""


def _tenths(start: int = 1, stop: int = 10) -> list[float]:
    return [round(0.1 * i, 1) for i in range(start, stop + 1)]


@dataclass
class SamplingConfig:
    """Random bottom-window sampling for moon construction."""

    window: int
    trials: int
    seed: int = 0

    def validate(self) -> None:
        if self.window < 1:
            raise ConfigError("sampling window must be >= 1")
        if self.trials < 2:
            raise ConfigError("sampling needs at least 2 trials")


@dataclass
class ExperimentConfig:
    queries_path: str = ""
    corpus_path: str = ""
    qrels_path: str = ""
    output_dir: str = "out"
    answers_path: str | None = None
    matrix_format: str = "binary"
    similarity: str = "inner_product"
    alpha_grid: list[float] = field(default_factory=_tenths)
    beta_grid: list[float] = field(default_factory=_tenths)
    k_plus_grid: list[int] = field(default_factory=lambda: list(range(2, 15)))
    k_minus_grid: list[int] = field(default_factory=lambda: list(range(2, 7)))
    fraction_grid: list[float] = field(default_factory=_tenths)
    pool_size_grid: list[int] = field(default_factory=lambda: [1000])
    rerank_scope: str = "full_corpus"
    rerank_depth: int = 1000
    ndcg_k: int = 10
    binary_threshold: int = 2
    alpha_level: float = 0.05
    sampling: SamplingConfig | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {unknown}")
        if "sampling" in raw and raw["sampling"] is not None:
            raw["sampling"] = SamplingConfig(**raw["sampling"])
        return cls(**raw)

    def to_file(self, path: str | Path) -> None:
        payload = dataclasses.asdict(self)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

    def validate(self) -> None:
        for name in ("alpha_grid", "beta_grid", "k_plus_grid", "k_minus_grid",
                     "fraction_grid", "pool_size_grid"):
            grid = getattr(self, name)
            if not grid:
                raise ConfigError(f"{name} must not be empty")
            deduped = list(dict.fromkeys(grid))
            if len(deduped) != len(grid):
                warnings.warn(f"{name} has duplicate values, deduplicating", stacklevel=2)
                setattr(self, name, deduped)
        if any(not 0 < f <= 1 for f in self.fraction_grid):
            raise ConfigError("retained fractions must lie in (0, 1]")
        if any(a <= 0 for a in self.alpha_grid):
            raise ConfigError("alpha values must be positive")
        if any(b < 0 for b in self.beta_grid):
            raise ConfigError("beta values must be non-negative")
        if any(k < 1 for k in self.k_plus_grid + self.k_minus_grid + self.pool_size_grid):
            raise ConfigError("k_plus, k_minus and pool sizes must be positive")
        if self.similarity not in ("inner_product", "cosine"):
            raise ConfigError(f"unknown similarity {self.similarity!r}")
        if self.rerank_scope not in RERANK_SCOPES:
            raise ConfigError(f"rerank_scope must be one of {RERANK_SCOPES}")
        if self.rerank_depth < 1:
            raise ConfigError("rerank_depth must be >= 1")
        if self.matrix_format not in ("binary", "jsonl"):
            raise ConfigError(f"unknown matrix format {self.matrix_format!r}")
        if not 0 < self.alpha_level < 1:
            raise ConfigError("alpha_level must lie in (0, 1)")
        if self.sampling is not None:
            self.sampling.validate()

    def validate_paths(self) -> None:
        for name in ("queries_path", "corpus_path", "qrels_path"):
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"{name} is required")
            if not Path(value).exists():
                raise ConfigError(f"{name}: no such file {value!r}")
        if self.answers_path is not None and not Path(self.answers_path).exists():
            raise ConfigError(f"answers_path: no such file {self.answers_path!r}")
