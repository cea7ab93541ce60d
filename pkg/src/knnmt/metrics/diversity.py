from collections import Counter
from collections.abc import Sequence

from knnmt.errors import InvalidInputError
from knnmt.metrics.bleu import corpus_bleu
from knnmt.metrics.oracle import EvalBundle


def dp(bundle: EvalBundle) -> float:
    """
    BLEU-based discrepancy between rank slices: the mean over ordered pairs of distinct ranks
    `(i, j)` of `1 - corpus_bleu(H_i, H_j)`, where `H_i` holds every source's rank-i hypothesis.
    """
    n = bundle.n_best
    if n < 2:
        raise InvalidInputError(f"DP needs at least 2 candidates per source, got {n}")
    slices = [bundle.rank_slice(r) for r in range(n)]
    total = sum(
        1 - corpus_bleu(slices[i], slices[j]) for i in range(n) for j in range(n) if i != j
    )
    return total / (n * (n - 1))


def deq(
    dp_sys: float, dp_base: float, refbleu_sys: float, refbleu_base: float
) -> float | None:
    """Diversity gained per unit of RefBLEU lost; `None` when RefBLEU did not change."""
    if refbleu_base == refbleu_sys:
        return None
    return -(dp_base - dp_sys) / (refbleu_base - refbleu_sys)


def distinct_ngram_ratio(candidates: Sequence[Sequence[Sequence[str]]], n: int) -> float:
    """Distinct n-grams over total n-grams, pooled over every candidate of every source."""
    if n not in (1, 2, 3, 4):
        raise InvalidInputError(f"n must be between 1 and 4, got {n}")
    counts: Counter[tuple[str, ...]] = Counter()
    for hyps in candidates:
        for hyp in hyps:
            counts.update(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
    total = counts.total()
    if total == 0:
        raise InvalidInputError(f"no candidate has {n} or more tokens")
    return len(counts) / total
