import logging
import math
from collections.abc import Sequence

import numpy as np

from knnmt.decode.pipeline import DistributionSource, StreamKey
from knnmt.errors import InvalidInputError
from knnmt.toymodel import BOS, EOS

logger = logging.getLogger(__name__)


def forced_decode(
    distributions: DistributionSource,
    source: Sequence[int],
    target: Sequence[int],
    sentence: int = 0,
) -> float:
    """
    Log-likelihood of `target` (bos ... eos) given `source`.
    Returns minus infinity if any target token has probability zero.
    """
    if len(target) < 2 or target[0] != BOS or target[-1] != EOS:
        raise InvalidInputError("forced target must start with bos and end with eos")
    total = 0.0
    for t in range(1, len(target)):
        probs = distributions.next_distribution(
            source, target[:t], StreamKey(sentence, 0, 0, t - 1)
        ).probs
        if probs[target[t]] == 0:
            logger.warning(
                "Sentence %d: target token %d at position %d has probability zero",
                sentence,
                target[t],
                t,
            )
            return -math.inf
        total += float(np.log(probs)[target[t]])
    return total
