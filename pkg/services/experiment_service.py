"""
Experiment service: graph-construction ablation, temperature sweep and
training-fraction sweep, each repeated over seeded runs
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from core.config import settings
from core.errors import ConfigError
from core.schemas import GraphMode, Metrics, TrainConfig
from services.text_pipeline import Corpus, Document
from services.training_service import evaluate_model, train_model
from utils.seeding import run_seeds

logger = logging.getLogger(__name__)

DEFAULT_TAUS = (0.01, 0.1, 0.2, 0.5, 1.0)
DEFAULT_FRACTIONS = (0.025, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_REG_LAMBDA = 0.1

METRIC_COLUMNS = ("accuracy", "micro_f1", "macro_f1")

TrainFn = Callable[..., Any]


@dataclass
class ExperimentResult:
    """Per-run records and the aggregated mean/std table"""
    name: str
    runs: pd.DataFrame
    table: pd.DataFrame

    @property
    def failed(self) -> int:
        return int((self.runs["status"] != "ok").sum())

    @property
    def exit_code(self) -> int:
        return 0 if self.failed == 0 else 1


def ablation_variants(base: TrainConfig) -> List[Tuple[str, TrainConfig]]:
    """WordCooc, Disjoint (T=1), Complete (T=0), Ours (lambda=0), Ours+reg (lambda>0)"""
    reg_lambda = base.lam if base.lam > 0 else DEFAULT_REG_LAMBDA
    return [
        ("WordCooc", base.model_copy(update={"mode": GraphMode.WORDCOOC, "lam": 0.0})),
        ("Disjoint", base.model_copy(update={"mode": GraphMode.DISJOINT, "lam": 0.0})),
        ("Complete", base.model_copy(update={"mode": GraphMode.COMPLETE, "lam": 0.0})),
        ("Ours", base.model_copy(update={"mode": GraphMode.OURS, "lam": 0.0})),
        ("Ours+reg", base.model_copy(update={"mode": GraphMode.OURS, "lam": reg_lambda})),
    ]


def require_test_split(corpus: Corpus) -> List[Document]:
    docs = corpus.by_split("test")
    if not docs:
        raise ConfigError("experiments need documents tagged with the test split")
    return docs


def subsample_training(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Keep a seeded fraction of the training split; validation and test stay whole"""
    train = corpus.by_split("train")
    has_val = bool(corpus.by_split("val"))
    minimum = 1 if has_val else 2
    keep = min(len(train), max(int(np.floor(fraction * len(train) + 0.5)), minimum))
    chosen = set(np.random.default_rng(seed).permutation(len(train))[:keep].tolist())
    kept_train = [doc for i, doc in enumerate(train) if i in chosen]
    others = [doc for doc in corpus.documents if doc.split != "train"]
    return Corpus(documents=kept_train + others, label_names=corpus.label_names)


class ExperimentService:
    """Runs grids of training cells; a failing cell is recorded, never fatal"""

    def __init__(
        self,
        runs: Optional[int] = None,
        embeddings_path: Optional[Union[str, Path]] = None,
        train_fn: Optional[TrainFn] = None,
        show_progress: bool = False,
    ):
        self.runs = runs if runs is not None else settings.ABLATION_RUNS
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        self.embeddings_path = embeddings_path
        self.train_fn = train_fn or train_model
        self.show_progress = show_progress

    def run_cell(self, config: TrainConfig, corpus: Corpus) -> Metrics:
        checkpoint, _ = self.train_fn(
            config, corpus, embeddings_path=self.embeddings_path, show_progress=self.show_progress
        )
        return evaluate_model(checkpoint, require_test_split(corpus))

    def run_grid(
        self,
        name: str,
        cells: Sequence[Tuple[Dict[str, Any], TrainConfig, Callable[[int], Corpus]]],
    ) -> ExperimentResult:
        """Train every (row key, config, corpus-for-seed) cell over all seeds"""
        records = []
        for key, config, corpus_for in cells:
            for run, seed in enumerate(run_seeds(config.seed, self.runs)):
                cell = config.model_copy(update={"seed": seed})
                label = ", ".join(f"{k}={v}" for k, v in key.items())
                logger.info(f"[{name}] {label} run {run + 1}/{self.runs} seed={seed}")
                record = {**key, "run": run, "seed": seed, "status": "ok"}
                try:
                    metrics = self.run_cell(cell, corpus_for(seed))
                    record.update({column: getattr(metrics, column) for column in METRIC_COLUMNS})
                except Exception as e:
                    logger.error(f"[{name}] {label} seed={seed} failed: {str(e)}", exc_info=True)
                    record.update({column: np.nan for column in METRIC_COLUMNS})
                    record["status"] = "failed"
                records.append(record)
        runs = pd.DataFrame(records)
        key_columns = list(cells[0][0].keys()) if cells else []
        return ExperimentResult(name=name, runs=runs, table=summarize_runs(runs, key_columns))

    def run_ablation(self, corpus: Corpus, base: TrainConfig) -> ExperimentResult:
        require_test_split(corpus)
        cells = [
            (
                {"variant": variant, "mode": config.mode.value, "threshold": config.hyper_params().effective_threshold, "lambda": config.lam},
                config,
                lambda seed: corpus,
            )
            for variant, config in ablation_variants(base)
        ]
        return self.run_grid("ablate", cells)

    def run_temperature_sweep(
        self, corpus: Corpus, config: TrainConfig, taus: Sequence[float] = DEFAULT_TAUS
    ) -> ExperimentResult:
        taus = [float(t) for t in taus]
        if not taus:
            raise ConfigError("temperature list is empty")
        bad = [t for t in taus if not t > 0]
        if bad:
            raise ConfigError(f"temperatures must be > 0, got {bad}")
        require_test_split(corpus)
        cells = [({"tau": tau}, config.model_copy(update={"tau": tau}), lambda seed: corpus) for tau in taus]
        return self.run_grid("sweep-temperature", cells)

    def run_fraction_sweep(
        self, corpus: Corpus, config: TrainConfig, fractions: Sequence[float] = DEFAULT_FRACTIONS
    ) -> ExperimentResult:
        fractions = sorted(float(f) for f in fractions)
        if not fractions:
            raise ConfigError("fraction list is empty")
        bad = [f for f in fractions if not 0.0 < f <= 1.0]
        if bad:
            raise ConfigError(f"fractions must lie in (0, 1], got {bad}")
        require_test_split(corpus)

        def corpus_for(fraction: float) -> Callable[[int], Corpus]:
            return lambda seed: subsample_training(corpus, fraction, seed)

        cells = [({"fraction": f}, config, corpus_for(f)) for f in fractions]
        return self.run_grid("fraction-sweep", cells)


def summarize_runs(runs: pd.DataFrame, key_columns: List[str]) -> pd.DataFrame:
    """Mean and sample std per row key; rows keep their first-seen order"""
    rows = []
    for key, group in runs.groupby(key_columns, sort=False):
        key = key if isinstance(key, tuple) else (key,)
        ok = group[group["status"] == "ok"]
        row: Dict[str, Any] = dict(zip(key_columns, key))
        row["runs"] = len(group)
        row["failed"] = len(group) - len(ok)
        for column in METRIC_COLUMNS:
            values = ok[column].astype(float)
            row[f"{column}_mean"] = float(values.mean()) if len(values) else np.nan
            row[f"{column}_std"] = float(values.std(ddof=1)) if len(values) > 1 else (0.0 if len(values) else np.nan)
        row["status"] = "ok" if row["failed"] == 0 else ("failed" if ok.empty else "partial")
        rows.append(row)
    return pd.DataFrame(rows)


def run_ablation(corpus: Corpus, base: TrainConfig, runs: Optional[int] = None) -> ExperimentResult:
    return ExperimentService(runs=runs).run_ablation(corpus, base)


def run_temperature_sweep(
    corpus: Corpus, config: TrainConfig, taus: Sequence[float] = DEFAULT_TAUS, runs: Optional[int] = None
) -> ExperimentResult:
    return ExperimentService(runs=runs).run_temperature_sweep(corpus, config, taus)


def run_fraction_sweep(
    corpus: Corpus, config: TrainConfig, fractions: Sequence[float] = DEFAULT_FRACTIONS, runs: Optional[int] = None
) -> ExperimentResult:
    return ExperimentService(runs=runs).run_fraction_sweep(corpus, config, fractions)
