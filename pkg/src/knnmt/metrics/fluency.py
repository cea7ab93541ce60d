"""
Fluency of candidate sets.

A `FluencyScorer` assigns a pseudo-log-likelihood to a sentence. No language model ships here:
scores come either from `ConstantRateScorer` or from an external scores file,
one JSON record `{"id", "rank", "score"}` per candidate.
"""

import json
import logging
import statistics
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Protocol

from knnmt.errors import FormatError, InvalidInputError
from knnmt.metrics.oracle import EvalBundle

logger = logging.getLogger(__name__)


class Stat(StrEnum):
    MAX = "max"
    MIN = "min"
    MEAN = "mean"

    def __call__(self, values: Sequence[float]) -> float:
        match self:
            case Stat.MAX:
                return max(values)
            case Stat.MIN:
                return min(values)
            case Stat.MEAN:
                return statistics.fmean(values)


class FluencyScorer(Protocol):
    def score(self, tokens: Sequence[str]) -> float: ...


@dataclass(frozen=True)
class ConstantRateScorer:
    """Every token contributes `rate`."""

    rate: float = -1.0

    def score(self, tokens: Sequence[str]) -> float:
        return self.rate * len(tokens)


@dataclass(frozen=True)
class ScoreTable:
    scores: dict[tuple[str, ...], float]

    @classmethod
    def from_records(
        cls, records: Sequence[dict], bundle: EvalBundle
    ) -> "ScoreTable":
        """Bind `(id, rank)` records to the sentences they score; ranks are 1-based."""
        scores: dict[tuple[str, ...], float] = {}
        for line_number, record in enumerate(records, start=1):
            try:
                sentence = bundle.candidates[int(record["id"])][int(record["rank"]) - 1]
                value = float(record["score"])
            except (KeyError, IndexError, TypeError, ValueError) as e:
                raise FormatError(f"invalid score record: {e!r}", line_number)
            if scores.setdefault(sentence, value) != value:
                logger.warning(
                    "Conflicting scores for %r, keeping %f", " ".join(sentence), scores[sentence]
                )
        return cls(scores=scores)

    @classmethod
    def read(cls, path: Path, bundle: EvalBundle) -> "ScoreTable":
        records = []
        for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except ValueError as e:
                raise FormatError(f"invalid JSON: {e}", line_number)
        return cls.from_records(records, bundle)

    def score(self, tokens: Sequence[str]) -> float:
        try:
            return self.scores[tuple(tokens)]
        except KeyError:
            raise InvalidInputError(f"no fluency score for {' '.join(tokens)!r}")


def spll(bundle: EvalBundle, scorer: FluencyScorer, stat: Stat) -> float:
    """
    Mean over sources of `stat` over the candidates' length-normalised scores.
    Empty candidates are skipped.
    """
    per_source = []
    skipped = 0
    for hyps in bundle.candidates:
        values = [scorer.score(hyp) / len(hyp) for hyp in hyps if len(hyp)]
        skipped += len(hyps) - len(values)
        if values:
            per_source.append(stat(values))
    if skipped:
        logger.warning("Skipped %d empty candidates in SPLL", skipped)
    if not per_source:
        raise InvalidInputError("every candidate is empty")
    return statistics.fmean(per_source)
