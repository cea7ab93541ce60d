"""
The per-step pipeline: toy model, perturbation, neighbour search, scoring, interpolation.

Decoders only see the `DistributionSource` protocol, so they can be exercised against hand-made
distributions as well as the full pipeline.
"""

import logging
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Protocol, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from knnmt.datastore import Searcher
from knnmt.perturb import (
    ZERO_NOISE,
    DistanceStats,
    NoiseParams,
    PerturbConfig,
    PerturbKind,
    adaptive_params,
    noised_query,
    randomized_select,
    resolve_static,
)
from knnmt.rng import Purpose, step_stream
from knnmt.scoring import ScoreConfig, TokenDistribution, interpolate, score_neighbors
from knnmt.toymodel import StepOutput, TableModel, step

logger = logging.getLogger(__name__)


class DecoderKind(StrEnum):
    BEAM = "beam"
    DBS = "dbs"
    NUCLEUS = "nucleus"


class DecodeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    decoder: DecoderKind = DecoderKind.BEAM
    beam_size: int = Field(
        default=20, ge=1, description="Number of candidates N per source sentence."
    )
    dbs_groups: int = Field(default=20, ge=1)
    diversity_strength: float = Field(default=0.5, ge=0)
    nucleus_p: float = Field(default=0.9, gt=0, le=1)
    k: int = Field(default=16, ge=1, description="Neighbours per query.")
    score: ScoreConfig = ScoreConfig()
    perturb: PerturbConfig = PerturbConfig()
    max_len: int = Field(default=32, ge=1, description="Generated tokens, eos included.")
    seed: int = Field(ge=0)
    length_penalty: float = Field(
        default=0.0,
        ge=0,
        description="Rank by logprob / length ** length_penalty; 0 ranks by logprob.",
    )

    @model_validator(mode="after")
    def check_groups(self) -> Self:
        if self.decoder == DecoderKind.DBS and self.dbs_groups > self.beam_size:
            raise ValueError(
                f"dbs_groups ({self.dbs_groups}) must not exceed beam_size ({self.beam_size})"
            )
        return self

    @property
    def perturb_seed(self) -> int:
        return self.seed if self.perturb.seed is None else self.perturb.seed


@dataclass(frozen=True)
class StreamKey:
    """Position of a step in a decode run; keys every random draw made for it."""

    sentence: int = 0
    group: int = 0
    beam: int = 0
    step: int = 0

    def rng(self, seed: int, purpose: Purpose) -> np.random.Generator:
        return step_stream(seed, self.sentence, self.group, self.beam, self.step, purpose)


class DistributionSource(Protocol):
    @property
    def vocab_size(self) -> int: ...

    def next_distribution(
        self, source: Sequence[int], prefix: Sequence[int], key: StreamKey
    ) -> TokenDistribution: ...


@dataclass
class KnnPipeline:
    """
    Next-token distributions of the toy model, optionally mixed with kNN retrieval.

    Without a searcher the pipeline is the bare toy model.
    Steps that involve no randomness are memoised per source and last two prefix tokens,
    which is all the toy model conditions on.
    """

    model: TableModel
    searcher: Searcher | None = None
    k: int = 16
    score: ScoreConfig = field(default_factory=ScoreConfig)
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    seed: int = 0
    static_noise: NoiseParams = ZERO_NOISE
    fallbacks: int = 0
    _steps: dict[tuple, StepOutput] = field(default_factory=dict, repr=False)
    _distributions: dict[tuple, TokenDistribution] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def create(
        cls,
        model: TableModel,
        searcher: Searcher | None,
        config: DecodeConfig,
        stats: DistanceStats | None = None,
    ) -> "KnnPipeline":
        static = ZERO_NOISE
        if config.perturb.kind == PerturbKind.STATIC_NOISE:
            static = resolve_static(config.perturb, stats)
            logger.info("Static noise parameters: m=%f s=%f", static.m, static.s)
        return cls(
            model=model,
            searcher=searcher,
            k=config.k,
            score=config.score,
            perturb=config.perturb,
            seed=config.perturb_seed,
            static_noise=static,
        )

    @property
    def vocab_size(self) -> int:
        return len(self.model.vocab_tgt)

    @property
    def deterministic(self) -> bool:
        return self.searcher is None or self.perturb.kind == PerturbKind.NONE

    def _step(self, context: tuple, source: Sequence[int], prefix: Sequence[int]) -> StepOutput:
        cached = self._steps.get(context)
        if cached is None:
            cached = step(self.model, source, prefix)
            self._steps[context] = cached
        return cached

    def next_distribution(
        self, source: Sequence[int], prefix: Sequence[int], key: StreamKey
    ) -> TokenDistribution:
        context = (tuple(source), tuple(prefix[-2:]))
        result = self._distributions.get(context) if self.deterministic else None
        if result is None:
            result = self._compose(context, source, prefix, key)
            if self.deterministic:
                self._distributions[context] = result
        if result.fallback:
            with self._lock:
                self.fallbacks += 1
        return result

    def _compose(
        self,
        context: tuple,
        source: Sequence[int],
        prefix: Sequence[int],
        key: StreamKey,
    ) -> TokenDistribution:
        out = self._step(context, source, prefix)
        if self.searcher is None:
            return out.p_mt

        query = out.hidden
        kind = self.perturb.kind
        rng = None if kind == PerturbKind.NONE else key.rng(self.seed, Purpose.PERTURB)
        if kind == PerturbKind.ADAPTIVE_NOISE:
            params = adaptive_params(
                self.searcher.search(query, self.k),
                self.perturb.adaptive_h_m,
                self.perturb.adaptive_h_s,
            )
            query = noised_query(query, params, rng)
        elif kind == PerturbKind.STATIC_NOISE:
            query = noised_query(query, self.static_noise, rng)

        neighbors = self.searcher.search(query, self.perturb.expanded_k(self.k))
        if kind == PerturbKind.RANDOMIZE:
            neighbors = randomized_select(neighbors, self.k, rng)

        p_knn = score_neighbors(neighbors, self.score, self.vocab_size)
        return interpolate(p_knn, out.p_mt, self.score.lambda_)
