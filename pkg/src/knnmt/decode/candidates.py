"""
N-best lists and their JSON-lines files.

A candidates file starts with a header record holding the resolved run configuration,
followed by one record per source sentence:

    {"header": {"config": {...}, "version": "..."}}
    {"id": 0, "source": [...], "hyps": [{"tokens": [...], "logprob": -1.5, "rank": 1}, ...]}

Tokens are surface strings without bos and eos.
"""

import json
import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

from dataclass_wizard import JSONWizard
from dataclass_wizard.errors import JSONWizardError

from knnmt.errors import FormatError
from knnmt.toymodel import BOS, EOS, PAD, Vocab

logger = logging.getLogger(__name__)

DISTRIBUTION_NAME = "knn-diversified-decoding"


def package_version() -> str:
    try:
        return version(DISTRIBUTION_NAME)
    except PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    finished: bool = True
    padded: bool = False

    @property
    def body(self) -> tuple[int, ...]:
        """Tokens without bos, eos and padding."""
        return tuple(t for t in self.tokens if t not in (PAD, BOS, EOS))

    def score(self, length_penalty: float = 0.0) -> float:
        if length_penalty == 0:
            return self.logprob
        return self.logprob / max(len(self.tokens) - 1, 1) ** length_penalty


@dataclass(frozen=True)
class CandidateList:
    source: tuple[int, ...]
    hypotheses: tuple[Hypothesis, ...]

    def __len__(self) -> int:
        return len(self.hypotheses)

    @property
    def padded(self) -> bool:
        return any(h.padded for h in self.hypotheses)


def rank_sorted(
    hypotheses: Iterable[Hypothesis], length_penalty: float = 0.0
) -> list[Hypothesis]:
    """Best score first, ties by token sequence."""
    return sorted(hypotheses, key=lambda h: (-h.score(length_penalty), h.tokens))


def pad_to(hypotheses: Sequence[Hypothesis], n: int) -> list[Hypothesis]:
    """Duplicate the last entry, flagged as padding, until there are `n`."""
    padded = list(hypotheses)
    if not padded or len(padded) >= n:
        return padded
    last = padded[-1]
    filler = Hypothesis(last.tokens, last.logprob, last.finished, padded=True)
    logger.warning("Padding candidate list from %d to %d entries", len(padded), n)
    return padded + [filler] * (n - len(padded))


@dataclass
class HypothesisRecord(JSONWizard):
    tokens: list[str]
    logprob: float
    rank: int


@dataclass
class CandidateRecord(JSONWizard):
    id: int
    source: list[str]
    hyps: list[HypothesisRecord] = field(default_factory=list)

    @property
    def hypotheses(self) -> list[list[str]]:
        return [h.tokens for h in sorted(self.hyps, key=lambda h: h.rank)]


@dataclass
class CandidatesFile:
    header: dict[str, Any]
    records: list[CandidateRecord]

    @property
    def config(self) -> dict[str, Any]:
        return self.header.get("config", {})

    def ids(self) -> list[int]:
        return [record.id for record in self.records]


def to_records(
    candidates: Sequence[CandidateList],
    sources: Sequence[Sequence[str]],
    vocab_tgt: Vocab,
) -> Iterator[CandidateRecord]:
    """`sources` are the surface sentences, so out-of-vocabulary words survive."""
    for index, (candidate_list, source) in enumerate(zip(candidates, sources, strict=True)):
        yield CandidateRecord(
            id=index,
            source=list(source),
            hyps=[
                HypothesisRecord(
                    tokens=vocab_tgt.decode(h.body), logprob=h.logprob, rank=rank
                )
                for rank, h in enumerate(candidate_list.hypotheses, start=1)
            ],
        )


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def format_candidates(
    records: Iterable[CandidateRecord], config: dict[str, Any]
) -> str:
    lines = [_dumps({"header": {"config": config, "version": package_version()}})]
    lines.extend(_dumps(record.to_dict()) for record in records)
    return "\n".join(lines) + "\n"


def write_candidates(
    path: Path, records: Iterable[CandidateRecord], config: dict[str, Any]
) -> None:
    path.write_text(format_candidates(records, config), encoding="utf-8")


def parse_candidates(text: str) -> CandidatesFile:
    header: dict[str, Any] = {}
    records: list[CandidateRecord] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if line_number == 1 and "header" in obj:
                header = obj["header"]
                continue
            records.append(CandidateRecord.from_dict(obj))
        except (ValueError, TypeError, KeyError, AttributeError, JSONWizardError) as e:
            raise FormatError(f"invalid candidate record: {e}", line_number)
    return CandidatesFile(header=header, records=records)


def read_candidates(path: Path) -> CandidatesFile:
    return parse_candidates(path.read_text(encoding="utf-8"))


def format_logliks(logliks: Sequence[float]) -> str:
    """Forced-decoding scores; `null` stands for minus infinity."""
    return "".join(
        _dumps({"id": i, "loglik": None if math.isinf(ll) else ll}) + "\n"
        for i, ll in enumerate(logliks)
    )


def parse_logliks(text: str) -> list[float]:
    logliks: list[tuple[int, float]] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            value = obj["loglik"]
            logliks.append((int(obj["id"]), -math.inf if value is None else float(value)))
        except (ValueError, TypeError, KeyError) as e:
            raise FormatError(f"invalid log-likelihood record: {e}", line_number)
    return [ll for _, ll in sorted(logliks)]
