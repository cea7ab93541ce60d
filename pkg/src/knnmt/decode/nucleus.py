import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from knnmt.decode.candidates import CandidateList, Hypothesis
from knnmt.decode.pipeline import DecodeConfig, DistributionSource, StreamKey
from knnmt.errors import InvalidInputError
from knnmt.rng import Purpose
from knnmt.toymodel import BOS, EOS

logger = logging.getLogger(__name__)


def nucleus(probs: NDArray[np.float64], p: float) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """
    The smallest most-probable prefix of tokens with total mass at least `p`, ties by token id,
    and its renormalised probabilities.
    """
    if not 0 < p <= 1:
        raise InvalidInputError(f"nucleus p must be in (0, 1], got {p}")
    order = np.lexsort((np.arange(len(probs)), -probs))
    cumulative = np.cumsum(probs[order])
    cutoff = min(int(np.searchsorted(cumulative, p, side="left")), len(probs) - 1)
    kept = order[: cutoff + 1]
    mass = probs[kept]
    return kept, mass / mass.sum()


def sample_trajectory(
    distributions: DistributionSource,
    source: Sequence[int],
    p: float,
    max_len: int,
    seed: int,
    sentence: int,
    trajectory: int,
) -> Hypothesis:
    tokens = [BOS]
    logprob = 0.0
    for t in range(max_len):
        key = StreamKey(sentence, 0, trajectory, t)
        probs = distributions.next_distribution(source, tokens, key).probs
        kept, renormalised = nucleus(probs, p)
        token = int(kept[key.rng(seed, Purpose.SAMPLE).choice(len(kept), p=renormalised)])
        tokens.append(token)
        # Scored under the composed distribution, not the truncated one.
        with np.errstate(divide="ignore"):
            logprob += float(np.log(probs)[token])
        if token == EOS:
            break
    return Hypothesis(tuple(tokens), logprob, finished=True)


def nucleus_sample(
    distributions: DistributionSource,
    config: DecodeConfig,
    source: Sequence[int],
    sentence: int = 0,
) -> CandidateList:
    """N independent trajectories in trajectory order; duplicates are kept."""
    hypotheses = tuple(
        sample_trajectory(
            distributions,
            source,
            config.nucleus_p,
            config.max_len,
            config.seed,
            sentence,
            trajectory,
        )
        for trajectory in range(config.beam_size)
    )
    return CandidateList(source=tuple(source), hypotheses=hypotheses)
