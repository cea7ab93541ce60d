import math

import numpy as np
import pytest

from knnmt.datastore import Neighbor, NeighborSet
from knnmt.errors import InvalidInputError
from knnmt.rng import stream
from knnmt.scoring import (
    ScoreConfig,
    TokenDistribution,
    interpolate,
    knn_distribution,
    score_neighbors,
    uniquify_distribution,
)

TAU = 10.0


def neighbors(*pairs: tuple[float, int]) -> NeighborSet:
    """`(distance, token)` pairs, key indices in argument order."""
    return NeighborSet.from_neighbors(
        Neighbor(distance=d, key_index=i, token=t) for i, (d, t) in enumerate(pairs)
    )


def random_neighbors(seed: int, size: int = 12, vocab_size: int = 6) -> NeighborSet:
    rng = stream(seed)
    return neighbors(
        *zip(rng.uniform(0, 50, size).tolist(), rng.integers(vocab_size, size=size).tolist())
    )


def test_single_neighbor() -> None:
    p = knn_distribution(neighbors((4.0, 3)), TAU, 5)

    assert p.probs.tolist() == [0.0, 0.0, 0.0, 1.0, 0.0]


def test_weights_follow_distances() -> None:
    p = knn_distribution(neighbors((0.0, 1), (TAU * math.log(2), 2)), TAU, 3)

    assert p.probs == pytest.approx([0.0, 2 / 3, 1 / 3], abs=1e-12)


def test_duplicate_tokens_sum() -> None:
    p = knn_distribution(neighbors((0.0, 1), (0.0, 1), (0.0, 2)), TAU, 3)

    assert p.probs == pytest.approx([0.0, 2 / 3, 1 / 3], abs=1e-12)


def test_uniquify_collapses_duplicates() -> None:
    p = uniquify_distribution(neighbors((0.0, 1), (0.0, 1), (0.0, 2)), TAU, 3)

    assert p.probs == pytest.approx([0.0, 0.5, 0.5], abs=1e-12)


def test_uniquify_single_surviving_token() -> None:
    p = uniquify_distribution(neighbors((0.0, 1), (TAU * math.log(2), 1)), TAU, 3)

    assert p.probs.tolist() == [0.0, 1.0, 0.0]


def test_uniquify_equals_vanilla_on_distinct_tokens() -> None:
    ns = neighbors((1.0, 0), (2.5, 3), (7.0, 1))

    assert uniquify_distribution(ns, TAU, 4).probs == pytest.approx(
        knn_distribution(ns, TAU, 4).probs, abs=1e-12
    )


@pytest.mark.parametrize("seed", range(5))
def test_uniquify_equals_vanilla_on_closest_neighbor_per_token(seed: int) -> None:
    ns = random_neighbors(seed)
    closest: dict[int, Neighbor] = {}
    for n in ns:
        closest.setdefault(n.token, n)

    deduplicated = NeighborSet.from_neighbors(closest.values())

    assert uniquify_distribution(ns, TAU, 6).probs == pytest.approx(
        knn_distribution(deduplicated, TAU, 6).probs, abs=1e-12
    )


@pytest.mark.parametrize("temperature", [0.01, 1.0, 10.0, 100.0, 1000.0])
@pytest.mark.parametrize("uniquify", [False, True])
def test_distributions_are_normalised(temperature: float, uniquify: bool) -> None:
    config = ScoreConfig(temperature=temperature, uniquify=uniquify)
    for seed in range(5):
        p = score_neighbors(random_neighbors(seed), config, 6)
        assert np.all(np.isfinite(p.probs))
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_shift_invariance() -> None:
    ns = random_neighbors(0)
    shifted = NeighborSet(
        distances=ns.distances + 123.0, key_indices=ns.key_indices, tokens=ns.tokens
    )

    assert knn_distribution(shifted, TAU, 6).probs == pytest.approx(
        knn_distribution(ns, TAU, 6).probs, abs=1e-9
    )


def test_empty_neighbor_set_gives_sentinel() -> None:
    p = knn_distribution(NeighborSet.empty(), TAU, 4)

    assert p.is_empty
    assert p.vocab_size == 4


def test_rejects_token_outside_vocabulary() -> None:
    with pytest.raises(InvalidInputError):
        knn_distribution(neighbors((0.0, 5)), TAU, 4)


P_MT = TokenDistribution.from_probs([0.0, 0.2, 0.8])
P_KNN = TokenDistribution.from_probs([0.0, 1.0, 0.0])


def test_interpolate() -> None:
    p = interpolate(P_KNN, P_MT, 0.5)

    assert p.probs == pytest.approx([0.0, 0.6, 0.4], abs=1e-12)
    assert not p.fallback


def test_interpolate_endpoints() -> None:
    assert interpolate(P_KNN, P_MT, 0.0) == P_MT
    assert interpolate(P_KNN, P_MT, 1.0) == P_KNN


def test_interpolate_is_affine() -> None:
    p_knn = knn_distribution(random_neighbors(1, vocab_size=3), TAU, 3)
    ends = interpolate(p_knn, P_MT, 0.0).probs + interpolate(p_knn, P_MT, 1.0).probs

    assert interpolate(p_knn, P_MT, 0.5).probs == pytest.approx(ends / 2, abs=1e-12)


def test_interpolate_falls_back_on_empty_neighbors() -> None:
    p = interpolate(TokenDistribution.empty(3), P_MT, 0.7)

    assert p.probs.tolist() == P_MT.probs.tolist()
    assert p.fallback


def test_interpolate_rejects_vocabulary_mismatch() -> None:
    with pytest.raises(InvalidInputError):
        interpolate(TokenDistribution.from_probs([0.5, 0.5]), P_MT, 0.5)


def test_score_config_accepts_lambda_key() -> None:
    config = ScoreConfig.model_validate({"lambda": 0.25, "temperature": 5})

    assert config.lambda_ == 0.25
    assert config.model_dump(by_alias=True)["lambda"] == 0.25
