"""
Hyperparameter sweeps.

Every (point, seed) pair is a full train, build, decode and evaluate run held in memory.
Trained models and datastores are cached per worker process, keyed by the part of the configuration
they depend on, so points that only change decoding reuse them.
DEQ is measured against the base configuration with perturbation turned off, evaluated once per seed.
"""

import csv
import functools
import io
import json
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from scipy.stats import spearmanr

from knnmt.config import (
    CorpusPaths,
    DatastoreParams,
    ModelParams,
    RunConfig,
    SweepSpec,
    apply_overrides,
    sweep_configs,
)
from knnmt.errors import ConfigError
from knnmt.metrics import bleu_at_n, check_oracle_bound, deq, dp, ref_bleu
from knnmt.perturb import PerturbKind
from knnmt.runs import (
    Artifacts,
    build_artifacts,
    bundle_from_lists,
    decode_test_set,
    train_model,
)
from knnmt.toymodel import TableModel

logger = logging.getLogger(__name__)

PERCENT = 100.0
METRIC_COLUMNS = ("dp", "bleu_at_1", "bleu_at_n", "ref_bleu", "deq")


@dataclass(frozen=True)
class PointScores:
    """Scores of one run, in [0, 1]."""

    dp: float
    bleu_at_1: float
    bleu_at_n: float
    ref_bleu: float


@dataclass(frozen=True)
class SweepRow:
    point_index: int
    point: dict[str, Any]
    seed: int
    scores: PointScores
    deq: float | None

    def as_dict(self) -> dict[str, Any]:
        return {
            **self.point,
            "seed": self.seed,
            "dp": self.scores.dp * PERCENT,
            "bleu_at_1": self.scores.bleu_at_1 * PERCENT,
            "bleu_at_n": self.scores.bleu_at_n * PERCENT,
            "ref_bleu": self.scores.ref_bleu * PERCENT,
            "deq": self.deq,
        }


@functools.lru_cache(maxsize=8)
def _model(corpus: CorpusPaths, params: ModelParams) -> TableModel:
    return train_model(corpus, params)


@functools.lru_cache(maxsize=8)
def _artifacts(
    corpus: CorpusPaths, params: ModelParams, datastore: DatastoreParams, k: int
) -> Artifacts:
    return build_artifacts(corpus, datastore, _model(corpus, params), k)


def evaluate_config(config_json: str) -> PointScores:
    config = RunConfig.model_validate_json(config_json)
    artifacts = _artifacts(config.corpus, config.model, config.datastore, config.decode.k)
    pairs, candidates = decode_test_set(config, artifacts)
    bundle = bundle_from_lists(pairs, candidates, artifacts.model)
    n = bundle.n_best
    return PointScores(
        dp=dp(bundle) if n > 1 else 0.0,
        bleu_at_1=bleu_at_n(bundle, 1),
        bleu_at_n=bleu_at_n(bundle, n),
        ref_bleu=ref_bleu(bundle),
    )


def base_config(config: RunConfig) -> RunConfig:
    return apply_overrides(
        config.document(), {"decode.perturb.kind": PerturbKind.NONE.value}, RunConfig
    )


def run_sweep(
    spec: SweepSpec, max_points: int, workers: int = 1, tolerance: float = 1e-9
) -> list[SweepRow]:
    """Every run, base runs included, must keep BLEU@N at or above BLEU@1 within `tolerance`."""
    limit = spec.max_points or max_points
    if spec.n_runs() > limit:
        raise ConfigError(
            f"sweep has {spec.n_runs()} runs, more than the limit of {limit}", "max_points"
        )

    runs = list(sweep_configs(spec))
    bases = {seed: base_config(config) for _, _, seed, config in runs}
    documents = [config.model_dump_json() for _, _, _, config in runs]
    base_documents = [bases[seed].model_dump_json() for seed in spec.seeds]
    logger.info(
        "Sweeping %d points x %d seeds over %s", len(spec.points()), len(spec.seeds), list(spec.axes)
    )

    jobs = documents + base_documents
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate_config, jobs))
    else:
        results = []
        for i, job in enumerate(jobs, start=1):
            results.append(evaluate_config(job))
            logger.info("Finished run %d of %d", i, len(jobs))

    point_scores = results[: len(documents)]
    base_scores = dict(zip(spec.seeds, results[len(documents) :]))
    for seed, base in base_scores.items():
        check_oracle_bound(
            base.bleu_at_1,
            base.bleu_at_n,
            bases[seed].decode.beam_size,
            tolerance,
            where=f"the unperturbed run with seed {seed}",
        )
    rows = []
    for (index, point, seed, config), scores in zip(runs, point_scores):
        check_oracle_bound(
            scores.bleu_at_1,
            scores.bleu_at_n,
            config.decode.beam_size,
            tolerance,
            where=f"point {index} {point} with seed {seed}",
        )
        base = base_scores[seed]
        rows.append(
            SweepRow(
                point_index=index,
                point=point,
                seed=seed,
                scores=scores,
                deq=deq(scores.dp, base.dp, scores.ref_bleu, base.ref_bleu),
            )
        )
    return sorted(rows, key=lambda row: (row.point_index, row.seed))


def format_csv(spec: SweepSpec, rows: Sequence[SweepRow]) -> str:
    """Undefined DEQ values are left empty."""
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=[*spec.axes, "seed", *METRIC_COLUMNS], lineterminator="\n"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {
                key: json.dumps(value) if isinstance(value, list | dict) else value
                for key, value in row.as_dict().items()
                if value is not None
            }
        )
    return buffer.getvalue()


def trend(rows: Sequence[SweepRow], axis: str, metric: str = "dp") -> float:
    """Spearman correlation between a numeric axis and a metric, averaged over seeds."""
    by_seed: dict[int, list[SweepRow]] = {}
    for row in rows:
        by_seed.setdefault(row.seed, []).append(row)
    rhos = []
    for seed_rows in by_seed.values():
        xs = [float(row.point[axis]) for row in seed_rows]
        ys = [getattr(row.scores, metric) for row in seed_rows]
        rho = spearmanr(xs, ys).statistic
        rhos.append(0.0 if math.isnan(rho) else float(rho))
    return sum(rhos) / len(rhos)


def plot(path: Path, rows: Sequence[SweepRow]) -> None:
    """Scatter of DP against BLEU@N, one point per run."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams.update({"svg.hashsalt": "knnmt", "font.family": "DejaVu Sans"})
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
    for seed in sorted({row.seed for row in rows}):
        seed_rows = [row for row in rows if row.seed == seed]
        ax.scatter(
            [row.scores.bleu_at_n * PERCENT for row in seed_rows],
            [row.scores.dp * PERCENT for row in seed_rows],
            label=f"seed {seed}",
            s=18,
        )
    ax.set_xlabel("BLEU@N")
    ax.set_ylabel("DP")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
