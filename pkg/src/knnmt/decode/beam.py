"""
Beam search and diverse beam search.

Both run the same grouped search. Plain beam search is a single group of size N. Diverse beam search
splits the N slots over G groups that expand one after another within each time step; a group's
candidate score for token v is its log-probability minus `diversity_strength` times the number of
times earlier groups selected v at that step. Stored log-probabilities never include the penalty.

Finished hypotheses are set aside and stop occupying slots, so a group keeps expanding
`size - finished` hypotheses until it has `size` finished ones or runs out of length.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from knnmt.decode.candidates import CandidateList, Hypothesis, pad_to, rank_sorted
from knnmt.decode.pipeline import DecodeConfig, DistributionSource, StreamKey
from knnmt.errors import InvalidInputError
from knnmt.toymodel import BOS, EOS

logger = logging.getLogger(__name__)


def group_sizes(n: int, groups: int) -> list[int]:
    """`n // groups` slots per group, one extra for each of the first `n % groups` groups."""
    if not 1 <= groups <= n:
        raise InvalidInputError(f"need 1 <= groups <= beam size, got {groups} groups for {n}")
    base, extra = divmod(n, groups)
    return [base + (1 if g < extra else 0) for g in range(groups)]


@dataclass
class _Group:
    size: int
    active: list[Hypothesis] = field(
        default_factory=lambda: [Hypothesis((BOS,), 0.0, finished=False)]
    )
    finished: list[Hypothesis] = field(default_factory=list)

    @property
    def slots(self) -> int:
        return self.size - len(self.finished)

    @property
    def done(self) -> bool:
        return self.slots <= 0 or not self.active


def _log_probs(
    distributions: DistributionSource,
    source: Sequence[int],
    group: _Group,
    group_index: int,
    sentence: int,
    t: int,
) -> np.ndarray:
    rows = [
        distributions.next_distribution(
            source, hyp.tokens, StreamKey(sentence, group_index, beam, t)
        ).probs
        for beam, hyp in enumerate(group.active)
    ]
    with np.errstate(divide="ignore"):
        return np.log(np.stack(rows))


def _expand(
    group: _Group,
    log_probs: np.ndarray,
    penalty: np.ndarray | None,
    max_len: int,
) -> list[int]:
    """Advance `group` by one token; returns the tokens it selected."""
    n_active, vocab_size = log_probs.shape
    totals = np.array([hyp.logprob for hyp in group.active])[:, None] + log_probs
    scores = totals if penalty is None else totals - penalty[None, :]

    parents = np.repeat(np.arange(n_active), vocab_size)
    tokens = np.tile(np.arange(vocab_size), n_active)
    flat = scores.ravel()
    finite = np.isfinite(flat)
    parents, tokens, flat = parents[finite], tokens[finite], flat[finite]
    order = np.lexsort((parents, tokens, -flat))[: group.slots]

    active: list[Hypothesis] = []
    selected: list[int] = []
    for i in order:
        parent, token = int(parents[i]), int(tokens[i])
        prefix = group.active[parent].tokens + (token,)
        hyp = Hypothesis(
            prefix,
            float(totals[parent, token]),
            finished=token == EOS or len(prefix) - 1 >= max_len,
        )
        (group.finished if hyp.finished else active).append(hyp)
        selected.append(token)
    group.active = active
    return selected


def grouped_search(
    distributions: DistributionSource,
    source: Sequence[int],
    sizes: Sequence[int],
    diversity_strength: float,
    max_len: int,
    sentence: int = 0,
    length_penalty: float = 0.0,
) -> CandidateList:
    groups = [_Group(size) for size in sizes]
    for t in range(max_len):
        if all(group.done for group in groups):
            break
        selections = np.zeros(distributions.vocab_size)
        for g, group in enumerate(groups):
            if group.done:
                continue
            log_probs = _log_probs(distributions, source, group, g, sentence, t)
            penalty = diversity_strength * selections if g and diversity_strength else None
            for token in _expand(group, log_probs, penalty, max_len):
                selections[token] += 1

    hypotheses: list[Hypothesis] = []
    for group in groups:
        hypotheses.extend(pad_to(rank_sorted(group.finished, length_penalty), group.size))
    return CandidateList(source=tuple(source), hypotheses=tuple(hypotheses))


def beam_search(
    distributions: DistributionSource,
    config: DecodeConfig,
    source: Sequence[int],
    sentence: int = 0,
) -> CandidateList:
    return grouped_search(
        distributions,
        source,
        [config.beam_size],
        0.0,
        config.max_len,
        sentence,
        config.length_penalty,
    )


def diverse_beam_search(
    distributions: DistributionSource,
    config: DecodeConfig,
    source: Sequence[int],
    sentence: int = 0,
) -> CandidateList:
    """Candidates come out group by group, each group in rank order."""
    return grouped_search(
        distributions,
        source,
        group_sizes(config.beam_size, config.dbs_groups),
        config.diversity_strength,
        config.max_len,
        sentence,
        config.length_penalty,
    )
