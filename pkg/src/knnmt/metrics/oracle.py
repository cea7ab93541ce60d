import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from knnmt.errors import InvalidInputError
from knnmt.metrics.bleu import corpus_bleu, sentence_bleu

logger = logging.getLogger(__name__)

Sentence = tuple[str, ...]


@dataclass(frozen=True)
class EvalBundle:
    """
    One system's output on a test set: N-best candidates per source, in rank order,
    with one reference per source.
    """

    sources: tuple[Sentence, ...]
    references: tuple[Sentence, ...]
    candidates: tuple[tuple[Sentence, ...], ...]

    def __post_init__(self) -> None:
        if not len(self.sources) == len(self.references) == len(self.candidates):
            raise InvalidInputError(
                f"misaligned bundle: {len(self.sources)} sources, "
                f"{len(self.references)} references, {len(self.candidates)} candidate lists"
            )
        if not self.sources:
            raise InvalidInputError("empty bundle")

    @classmethod
    def build(
        cls,
        sources: Sequence[Sequence[str]],
        references: Sequence[Sequence[str]],
        candidates: Sequence[Sequence[Sequence[str]]],
    ) -> "EvalBundle":
        return cls(
            sources=tuple(tuple(s) for s in sources),
            references=tuple(tuple(r) for r in references),
            candidates=tuple(tuple(tuple(h) for h in hyps) for hyps in candidates),
        )

    def __len__(self) -> int:
        return len(self.sources)

    @property
    def n_best(self) -> int:
        """Candidates per source; the bundle must be rectangular."""
        sizes = {len(hyps) for hyps in self.candidates}
        if len(sizes) != 1:
            raise InvalidInputError(f"ragged candidate lists with sizes {sorted(sizes)}")
        return sizes.pop()

    def rank_slice(self, rank: int) -> list[Sentence]:
        """Rank-`rank` hypothesis of every source, 0-based."""
        return [hyps[rank] for hyps in self.candidates]


def _check_available(bundle: EvalBundle, n_select: int) -> None:
    if n_select < 1:
        raise InvalidInputError(f"n_select must be positive, got {n_select}")
    short = [i for i, hyps in enumerate(bundle.candidates) if len(hyps) < n_select]
    if short:
        raise InvalidInputError(
            f"fewer than {n_select} candidates for sources {short[:10]}"
            + (f" and {len(short) - 10} more" if len(short) > 10 else "")
        )


def _best(scored: list[tuple[float, int]]) -> int:
    # Highest score, then lowest rank.
    return min(scored, key=lambda item: (-item[0], item[1]))[1]


def _median(scored: list[tuple[float, int]]) -> int:
    ordered = sorted(scored)
    middle = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[middle][1]
    return _best([ordered[middle - 1], ordered[middle]])


def _select(
    bundle: EvalBundle,
    n_select: int,
    choose: Callable[[list[tuple[float, int]]], int],
) -> list[Sentence]:
    _check_available(bundle, n_select)
    picks = []
    for hyps, ref in zip(bundle.candidates, bundle.references):
        scored = [(sentence_bleu(hyp, ref), rank) for rank, hyp in enumerate(hyps[:n_select])]
        picks.append(hyps[choose(scored)])
    return picks


def oracle_picks(bundle: EvalBundle, n_select: int) -> list[Sentence]:
    return _select(bundle, n_select, _best)


def bleu_at_n(bundle: EvalBundle, n_select: int) -> float:
    """Corpus BLEU of the best candidate (by sentence BLEU) among the first `n_select` per source."""
    return corpus_bleu(oracle_picks(bundle, n_select), bundle.references)


def med_bleu_at_n(bundle: EvalBundle, n_select: int) -> float:
    """
    Corpus BLEU of the median candidate by sentence BLEU.
    For even `n_select` the better of the two middle candidates is taken.
    """
    return corpus_bleu(_select(bundle, n_select, _median), bundle.references)


def merge(a: EvalBundle, b: EvalBundle) -> EvalBundle:
    """Per-source concatenation: A's candidates, then B's."""
    if a.sources != b.sources or a.references != b.references:
        mismatched = [
            i
            for i, (sa, sb, ra, rb) in enumerate(
                zip(a.sources, b.sources, a.references, b.references)
            )
            if sa != sb or ra != rb
        ]
        raise InvalidInputError(
            f"bundles differ in sources or references (ids {mismatched[:10]}, "
            f"sizes {len(a)} and {len(b)})"
        )
    return EvalBundle(
        sources=a.sources,
        references=a.references,
        candidates=tuple(x + y for x, y in zip(a.candidates, b.candidates)),
    )


def merged_bleu(a: EvalBundle, b: EvalBundle) -> float:
    merged = merge(a, b)
    return bleu_at_n(merged, min(len(hyps) for hyps in merged.candidates))


def ref_bleu(bundle: EvalBundle) -> float:
    """Mean over ranks of the corpus BLEU of that rank's hypotheses."""
    n = bundle.n_best
    return sum(corpus_bleu(bundle.rank_slice(r), bundle.references) for r in range(n)) / n
