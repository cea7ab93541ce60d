"""
Next-token distributions from retrieved neighbours, and their interpolation with the base model.

`knn_distribution` sums the softmax weight of every neighbour carrying a token;
`uniquify_distribution` keeps only the closest neighbour per token (max instead of sum), then normalises.
Both subtract the minimum distance before exponentiating, which leaves the normalised result unchanged.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from knnmt.datastore import NeighborSet
from knnmt.errors import InvalidInputError

logger = logging.getLogger(__name__)


class ScoreConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    temperature: float = Field(
        default=10.0,
        gt=0,
        description="Softmax temperature over negative squared distances.",
    )
    lambda_: float = Field(
        default=0.5,
        ge=0,
        le=1,
        alias="lambda",
        description="Weight of the kNN distribution in the interpolation.",
    )
    uniquify: bool = Field(
        default=False,
        description="Keep only the closest neighbour per token before normalising.",
    )


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """
    Dense distribution over the target vocabulary.
    All-zero `probs` is the empty sentinel returned for an empty neighbour set.
    `fallback` marks the result of interpolating with that sentinel, i.e. p_MT passed through.
    """

    probs: NDArray[np.float64]
    fallback: bool = False

    @classmethod
    def empty(cls, vocab_size: int) -> "TokenDistribution":
        return cls(probs=np.zeros(vocab_size, dtype=np.float64))

    @classmethod
    def from_probs(cls, probs: ArrayLike) -> "TokenDistribution":
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInputError("probabilities must be a finite non-negative vector")
        return cls(probs=p)

    @property
    def is_empty(self) -> bool:
        return not self.probs.any()

    @property
    def vocab_size(self) -> int:
        return len(self.probs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs) and self.fallback == other.fallback

    __hash__ = None  # type: ignore[assignment]


def _weights(ns: NeighborSet, temperature: float, vocab_size: int) -> NDArray:
    if temperature <= 0:
        raise InvalidInputError(f"temperature must be positive, got {temperature}")
    if len(ns) and int(ns.tokens.max()) >= vocab_size:
        raise InvalidInputError(
            f"neighbour token {int(ns.tokens.max())} outside vocabulary of size {vocab_size}"
        )
    return np.exp(-(ns.distances - ns.distances.min()) / temperature)


def _normalized(mass: NDArray[np.float64]) -> TokenDistribution:
    return TokenDistribution(probs=mass / mass.sum())


def knn_distribution(
    ns: NeighborSet, temperature: float, vocab_size: int
) -> TokenDistribution:
    if len(ns) == 0:
        return TokenDistribution.empty(vocab_size)
    weights = _weights(ns, temperature, vocab_size)
    mass = np.bincount(ns.tokens, weights=weights, minlength=vocab_size)
    return _normalized(mass.astype(np.float64))


def uniquify_distribution(
    ns: NeighborSet, temperature: float, vocab_size: int
) -> TokenDistribution:
    if len(ns) == 0:
        return TokenDistribution.empty(vocab_size)
    weights = _weights(ns, temperature, vocab_size)
    mass = np.zeros(vocab_size, dtype=np.float64)
    np.maximum.at(mass, ns.tokens, weights)
    return _normalized(mass)


def score_neighbors(
    ns: NeighborSet, config: ScoreConfig, vocab_size: int
) -> TokenDistribution:
    if config.uniquify:
        return uniquify_distribution(ns, config.temperature, vocab_size)
    return knn_distribution(ns, config.temperature, vocab_size)


def interpolate(
    p_knn: TokenDistribution, p_mt: TokenDistribution, lambda_: float
) -> TokenDistribution:
    """
    `lambda * p_knn + (1 - lambda) * p_mt`.
    An empty `p_knn` yields `p_mt` unchanged, flagged as a fallback.
    """
    if not 0 <= lambda_ <= 1:
        raise InvalidInputError(f"lambda must be in [0, 1], got {lambda_}")
    if p_knn.vocab_size != p_mt.vocab_size:
        raise InvalidInputError(
            f"vocabulary size mismatch: {p_knn.vocab_size} vs {p_mt.vocab_size}"
        )
    if p_knn.is_empty:
        logger.debug("No neighbours retrieved, falling back to the base model")
        return TokenDistribution(probs=p_mt.probs, fallback=True)
    if lambda_ == 0:
        return TokenDistribution(probs=p_mt.probs)
    if lambda_ == 1:
        return TokenDistribution(probs=p_knn.probs)
    return TokenDistribution(probs=lambda_ * p_knn.probs + (1 - lambda_) * p_mt.probs)
