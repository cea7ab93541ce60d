"""
BLEU over pre-tokenised sentences, computed with sacrebleu.

Tokens are joined with spaces and scored with the `none` tokenizer, so sacrebleu splits them back unchanged.
Sentence-level BLEU uses add-k smoothing (k = 1, orders above one only) with effective order;
corpus-level BLEU is not smoothed. A hypothesis with no matching unigram scores 0.
Scores are fractions in [0, 1].
"""

from collections.abc import Sequence
from functools import cache

from sacrebleu.metrics.bleu import BLEU, BLEUScore

from knnmt.errors import InvalidInputError

Tokens = Sequence[str]

PERCENT = 100.0


@cache
def sentence_metric(max_n: int, add_k: float) -> BLEU:
    return BLEU(
        tokenize="none",
        smooth_method="add-k",
        smooth_value=add_k,
        max_ngram_order=max_n,
        effective_order=True,
    )


@cache
def corpus_metric(max_n: int) -> BLEU:
    return BLEU(tokenize="none", smooth_method="none", max_ngram_order=max_n)


def _line(tokens: Tokens) -> str:
    return " ".join(tokens)


def _fraction(score: BLEUScore) -> float:
    # exp(log(100)) can land an ulp above 100.
    return min(score.score / PERCENT, 1.0)


def _check_order(max_n: int) -> None:
    if max_n < 1:
        raise InvalidInputError(f"max_n must be positive, got {max_n}")


def sentence_bleu(
    hyp: Tokens,
    ref: Tokens,
    max_n: int = 4,
    add_k: float = 1.0,
    extra_refs: Sequence[Tokens] = (),
) -> float:
    _check_order(max_n)
    metric = sentence_metric(max_n, add_k)
    return _fraction(metric.sentence_score(_line(hyp), [_line(r) for r in (ref, *extra_refs)]))


def corpus_bleu(
    hyps: Sequence[Tokens],
    refs: Sequence[Tokens],
    max_n: int = 4,
    extra_refs: Sequence[Sequence[Tokens]] = (),
) -> float:
    """`extra_refs` holds further reference streams, each aligned with `refs`."""
    _check_order(max_n)
    if not hyps:
        raise InvalidInputError("corpus BLEU needs at least one segment")
    streams = [refs, *extra_refs]
    if any(len(stream) != len(hyps) for stream in streams):
        raise InvalidInputError(
            f"{len(hyps)} hypotheses but reference streams of lengths {[len(s) for s in streams]}"
        )
    score = corpus_metric(max_n).corpus_score(
        [_line(h) for h in hyps], [[_line(r) for r in stream] for stream in streams]
    )
    return _fraction(score)
