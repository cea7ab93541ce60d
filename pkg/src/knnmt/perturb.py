"""
Search-space perturbations.

Noise is added to the query before search. Its norm is `|a|` with `a ~ N(m, s^2)` and its direction is uniform.
Distances are squared L2 throughout, so `m` and `s` derived from distance statistics are in squared units
while the noise itself is added in vector space.
`|a|` follows a folded normal: its mean exceeds `m` when `s` is large relative to `m`, and it is not capped.

Randomised search retrieves `floor(h * k)` neighbours and keeps a uniform sample of `k` of them, without replacement.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import StrEnum
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from knnmt.datastore import Datastore, NeighborSet, search_exact
from knnmt.errors import InvalidInputError

logger = logging.getLogger(__name__)


class PerturbKind(StrEnum):
    NONE = "none"
    STATIC_NOISE = "static_noise"
    ADAPTIVE_NOISE = "adaptive_noise"
    RANDOMIZE = "randomize"


class PerturbConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PerturbKind = PerturbKind.NONE
    h_m: float = Field(
        default=0.0,
        description="""
        Static noise: mean of the noise norm.
        With `static_relative`, a multiplier of the validation mean distance instead.
        """,
    )
    h_s: float = Field(
        default=0.0,
        ge=0,
        description="""
        Static noise: standard deviation of the noise norm.
        With `static_relative`, a multiplier of the validation distance standard deviation instead.
        """,
    )
    static_relative: bool = False
    adaptive_h_m: float = Field(
        default=0.0, description="Adaptive noise: multiplier of the per-query maximum distance."
    )
    adaptive_h_s: float = Field(
        default=0.0,
        ge=0,
        description="Adaptive noise: multiplier of the per-query distance standard deviation.",
    )
    h: float = Field(
        default=2.0,
        description="Randomised search: retrieve floor(h * k) neighbours and keep k.",
    )
    seed: int | None = Field(
        default=None,
        ge=0,
        description="Seed of the perturbation streams; the decode seed when unset.",
    )

    @model_validator(mode="after")
    def check_randomize(self) -> Self:
        if self.kind == PerturbKind.RANDOMIZE and not self.h > 1:
            raise ValueError(f"randomize requires h > 1, got {self.h}")
        return self

    def expanded_k(self, k: int) -> int:
        if self.kind == PerturbKind.RANDOMIZE:
            return max(k, math.floor(self.h * k))
        return k


@dataclass(frozen=True)
class NoiseParams:
    m: float
    s: float

    def __post_init__(self) -> None:
        if not self.s >= 0:
            raise InvalidInputError(f"noise std must be non-negative, got {self.s}")


ZERO_NOISE = NoiseParams(m=0.0, s=0.0)


@dataclass(frozen=True)
class DistanceStats:
    """
    Neighbour-distance statistics over a set of queries.
    `mean` and `std` pool every (query, neighbour) distance;
    `d_max` and `d_std` average the per-query maximum and standard deviation.
    All standard deviations are population (divide by n) estimates.
    """

    mean: float
    std: float
    d_max: float
    d_std: float
    n_queries: int = 0


def sample_noise(dim: int, params: NoiseParams, rng: np.random.Generator) -> NDArray:
    """
    Draw `a ~ N(m, s^2)` and then a Gaussian direction, in that order, and scale the direction to norm `|a|`.
    """
    if dim < 1:
        raise InvalidInputError(f"dim must be positive, got {dim}")
    a = rng.normal(params.m, params.s)
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    if norm == 0 or a == 0:
        return np.zeros(dim, dtype=np.float64)
    return direction * (abs(a) / norm)


def noised_query(
    query: ArrayLike, params: NoiseParams, rng: np.random.Generator
) -> NDArray[np.float64]:
    q = np.asarray(query, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("query has non-finite components")
    return q + sample_noise(len(q), params, rng)


def adaptive_params(pre_search: NeighborSet, h_m: float, h_s: float) -> NoiseParams:
    if len(pre_search) == 0:
        raise InvalidInputError("adaptive noise needs a non-empty pre-search")
    return NoiseParams(
        m=h_m * float(pre_search.distances.max()),
        s=h_s * float(np.std(pre_search.distances)),
    )


def estimate_distance_stats(
    ds: Datastore, queries: Iterable[ArrayLike], k: int
) -> DistanceStats:
    if len(ds) == 0:
        raise InvalidInputError("cannot estimate distance statistics on an empty datastore")
    samples: list[NDArray[np.float64]] = []
    maxima: list[float] = []
    stds: list[float] = []
    for query in queries:
        ns = search_exact(ds, query, k)
        samples.append(ns.distances)
        maxima.append(float(ns.distances.max()))
        stds.append(float(np.std(ns.distances)))
    if not samples:
        raise InvalidInputError("no queries given")
    pooled = np.concatenate(samples)
    stats = DistanceStats(
        mean=float(pooled.mean()),
        std=float(pooled.std()),
        d_max=float(np.mean(maxima)),
        d_std=float(np.mean(stds)),
        n_queries=len(samples),
    )
    logger.debug("Distance statistics over %d queries: %s", len(samples), stats)
    return stats


def resolve_static(config: PerturbConfig, stats: DistanceStats | None) -> NoiseParams:
    """
    Absolute static-noise parameters; relative multipliers are resolved against validation statistics.
    """
    if not config.static_relative:
        return NoiseParams(m=config.h_m, s=config.h_s)
    if stats is None:
        raise InvalidInputError(
            "relative static noise needs distance statistics from the validation set"
        )
    return NoiseParams(m=config.h_m * stats.mean, s=config.h_s * stats.std)


def randomized_select(
    candidates: NeighborSet, k: int, rng: np.random.Generator
) -> NeighborSet:
    """
    A uniform sample of `min(k, len(candidates))` neighbours, kept in (distance, key_index) order.
    """
    if k < 1:
        raise InvalidInputError(f"k must be positive, got {k}")
    if len(candidates) <= k:
        return candidates
    chosen = np.sort(rng.choice(len(candidates), size=k, replace=False))
    return candidates.take(chosen)


def folded_normal_mean(m: float, s: float) -> float:
    """Expected noise norm `E|a|` for `a ~ N(m, s^2)`."""
    if s == 0:
        return abs(m)
    return s * math.sqrt(2 / math.pi) * math.exp(-(m**2) / (2 * s**2)) + m * math.erf(
        m / (s * math.sqrt(2))
    )
