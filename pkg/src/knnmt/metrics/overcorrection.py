import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

from knnmt.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Madll:
    value: float
    excluded: int = 0


def madll_details(logliks_a: Sequence[float], logliks_b: Sequence[float]) -> Madll:
    """
    Mean absolute difference between the forced-decoding log-likelihoods of two references.
    Pairs where either side is minus infinity are left out and counted.
    """
    if len(logliks_a) != len(logliks_b):
        raise InvalidInputError(
            f"log-likelihood lists differ in length: {len(logliks_a)} vs {len(logliks_b)}"
        )
    differences = []
    excluded = []
    for i, (a, b) in enumerate(zip(logliks_a, logliks_b)):
        if math.isfinite(a) and math.isfinite(b):
            differences.append(abs(a - b))
        else:
            excluded.append(i)
    if excluded:
        logger.warning(
            "Excluded %d sentences with zero-probability references from MADLL: %s",
            len(excluded),
            excluded[:10],
        )
    if not differences:
        raise InvalidInputError("no sentence has finite log-likelihoods for both references")
    return Madll(value=math.fsum(differences) / len(differences), excluded=len(excluded))


def madll(logliks_a: Sequence[float], logliks_b: Sequence[float]) -> float:
    return madll_details(logliks_a, logliks_b).value
