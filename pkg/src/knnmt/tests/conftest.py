from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pytest
from numpy.typing import ArrayLike

from knnmt.config import RunConfig, apply_overrides
from knnmt.datastore import Datastore, build_datastore
from knnmt.decode import StreamKey
from knnmt.rng import stream
from knnmt.runs import write_generated_corpus
from knnmt.scoring import TokenDistribution
from knnmt.toymodel import (
    CorpusSpec,
    SentencePair,
    TableModel,
    generate_corpus,
    split_sides,
    train_counts,
)


@dataclass
class TableSource:
    """
    Hand-written next-token distributions keyed by the prefix after bos;
    every other prefix gets `default`.
    """

    table: dict[tuple[int, ...], Sequence[float]]
    default: Sequence[float]

    @property
    def vocab_size(self) -> int:
        return len(self.default)

    def next_distribution(
        self, source: Sequence[int], prefix: Sequence[int], key: StreamKey
    ) -> TokenDistribution:
        probs = self.table.get(tuple(prefix[1:]), self.default)
        return TokenDistribution(probs=np.asarray(probs, dtype=np.float64))


@dataclass
class RandomSource:
    """
    Arbitrary but fixed distributions over `tokens`, one per prefix.
    Other ids, bos and padding included, have probability zero.
    """

    size: int
    tokens: tuple[int, ...]
    seed: int = 0

    @property
    def vocab_size(self) -> int:
        return self.size

    def next_distribution(
        self, source: Sequence[int], prefix: Sequence[int], key: StreamKey
    ) -> TokenDistribution:
        probs = np.zeros(self.size)
        probs[list(self.tokens)] = stream(self.seed, *prefix).dirichlet(
            np.ones(len(self.tokens))
        )
        return TokenDistribution(probs=probs)


@pytest.fixture
def make_datastore() -> Callable[..., Datastore]:
    def wrapped(
        keys: ArrayLike, tokens: Sequence[int], vocab_size: int | None = None
    ) -> Datastore:
        vectors = np.asarray(keys, dtype=np.float64)
        return build_datastore(
            zip(vectors, tokens),
            vectors.shape[1],
            vocab_size if vocab_size is not None else max(tokens) + 1,
        )

    return wrapped


@pytest.fixture
def two_blobs(make_datastore: Callable[..., Datastore]) -> Datastore:
    """50 keys around the origin (indices 0-49), then 50 keys around (100, ..., 100)."""
    rng = stream(7)
    blob_a = rng.normal(0.0, 0.1, size=(50, 4))
    blob_b = rng.normal(100.0, 0.1, size=(50, 4))
    return make_datastore(np.vstack([blob_a, blob_b]), [5] * 50 + [7] * 50, vocab_size=10)


@pytest.fixture
def make_random_datastore(make_datastore: Callable[..., Datastore]) -> Callable[..., Datastore]:
    def wrapped(n: int = 300, dim: int = 8, vocab_size: int = 20, seed: int = 0) -> Datastore:
        rng = stream(seed)
        return make_datastore(
            rng.standard_normal((n, dim)),
            rng.integers(vocab_size, size=n).tolist(),
            vocab_size=vocab_size,
        )

    return wrapped


@pytest.fixture
def make_table_source() -> Callable[..., TableSource]:
    def wrapped(
        table: dict[tuple[int, ...], Sequence[float]], default: Sequence[float]
    ) -> TableSource:
        return TableSource(table=table, default=default)

    return wrapped


@pytest.fixture
def make_random_source() -> Callable[..., RandomSource]:
    def wrapped(size: int = 5, tokens: tuple[int, ...] = (2, 3, 4), seed: int = 0) -> RandomSource:
        return RandomSource(size=size, tokens=tokens, seed=seed)

    return wrapped


@pytest.fixture
def corpus_spec() -> CorpusSpec:
    return CorpusSpec(seed=0, n_train=120, n_valid=10, n_test=6)


@pytest.fixture
def training_pairs(corpus_spec: CorpusSpec) -> list[SentencePair]:
    return generate_corpus(corpus_spec).train


@pytest.fixture
def make_model(training_pairs: list[SentencePair]) -> Callable[..., TableModel]:
    def wrapped(
        pairs: Sequence[SentencePair] | None = None,
        alpha: float = 0.1,
        embed_dim: int = 16,
        seed: int = 0,
        n_buckets: int = 16,
    ) -> TableModel:
        sources, targets = split_sides(training_pairs if pairs is None else pairs)
        return train_counts(
            sources, targets, alpha=alpha, embed_dim=embed_dim, seed=seed, n_buckets=n_buckets
        )

    return wrapped


@pytest.fixture
def corpus_dir(tmp_path: Path, corpus_spec: CorpusSpec) -> Path:
    out = tmp_path / "corpus"
    write_generated_corpus(corpus_spec, out)
    return out


RUN_DOCUMENT: dict[str, Any] = {
    "corpus": {"dir": "corpus"},
    "model": {"seed": 0, "embed_dim": 16},
    "datastore": {"kmeans_seed": 0},
    "decode": {"seed": 0, "beam_size": 4, "dbs_groups": 2, "k": 8, "max_len": 12},
    "output": {"dir": "run"},
}


@pytest.fixture
def make_run_config(tmp_path: Path, corpus_dir: Path) -> Callable[..., RunConfig]:
    """A small run over the generated corpus; `overrides` map dotted keys to values."""

    def wrapped(overrides: dict[str, Any] | None = None) -> RunConfig:
        config = apply_overrides(RUN_DOCUMENT, overrides or {}, RunConfig)
        return config.resolved(tmp_path)

    return wrapped


RUN_TOML = """\
[corpus]
dir = "corpus"

[model]
seed = 0
embed_dim = 16

[datastore]
kmeans_seed = 0

[decode]
seed = 0
beam_size = 4
dbs_groups = 2
k = 8
max_len = 12

[output]
dir = "run"
"""


@pytest.fixture
def run_toml(tmp_path: Path, corpus_dir: Path) -> Path:
    """The same run as `make_run_config`, as a configuration file."""
    path = tmp_path / "run.toml"
    path.write_text(RUN_TOML, encoding="utf-8")
    return path
