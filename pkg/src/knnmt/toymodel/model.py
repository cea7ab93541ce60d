"""
A count-based stand-in for a neural translation model.

p_MT is an add-alpha smoothed table indexed by a hash bucket of the source bag and the last two target tokens.
The hidden state is a fixed random projection of the mean source embedding concatenated with the mean
embedding of the last two prefix tokens. Contexts that agree on both collide exactly, so retrieved
neighbours carry duplicate tokens the way a real datastore does.
"""

import hashlib
import json
import logging
from collections import Counter, defaultdict
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from dataclass_wizard import JSONWizard
from dataclass_wizard.errors import JSONWizardError
from numpy.typing import NDArray

from knnmt.errors import FormatError, InvalidInputError
from knnmt.rng import stream
from knnmt.scoring import TokenDistribution
from knnmt.toymodel.vocab import BOS, EOS, PAD, Vocab

logger = logging.getLogger(__name__)

PROJECTION_STREAM = 2**32 - 1

Context = tuple[int, int, int]


def token_embedding(token: int, dim: int, seed: int) -> NDArray[np.float64]:
    """Unit vector drawn from the Philox stream keyed by `(seed, token)`."""
    if dim < 1:
        raise InvalidInputError(f"dim must be positive, got {dim}")
    vector = stream(seed, token).standard_normal(dim)
    return vector / np.linalg.norm(vector)


def source_bucket(source: Sequence[int], n_buckets: int) -> int:
    digest = hashlib.blake2b(
        b",".join(str(t).encode() for t in sorted(source)), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % n_buckets


@dataclass(frozen=True)
class StepOutput:
    p_mt: TokenDistribution
    hidden: NDArray[np.float32]


@dataclass(frozen=True)
class TableModel:
    vocab_src: Vocab
    vocab_tgt: Vocab
    counts: dict[Context, dict[int, int]] = field(repr=False)
    embed_dim: int
    embed_seed: int
    alpha: float = 0.1
    n_buckets: int = 16

    @cached_property
    def source_embeddings(self) -> NDArray[np.float64]:
        return np.stack(
            [
                token_embedding(i, self.embed_dim, self.embed_seed)
                for i in range(len(self.vocab_src))
            ]
        )

    @cached_property
    def target_embeddings(self) -> NDArray[np.float64]:
        return np.stack(
            [
                token_embedding(i, self.embed_dim, self.embed_seed + 1)
                for i in range(len(self.vocab_tgt))
            ]
        )

    @cached_property
    def projection(self) -> NDArray[np.float64]:
        return stream(self.embed_seed, PROJECTION_STREAM).standard_normal(
            (self.embed_dim, 2 * self.embed_dim)
        )

    def context(self, source: Sequence[int], prefix: Sequence[int]) -> Context:
        prev2 = prefix[-2] if len(prefix) >= 2 else PAD
        return (source_bucket(source, self.n_buckets), prev2, prefix[-1])

    def to_json(self) -> str:
        return ModelFile.from_model(self).to_json(indent=None)

    @classmethod
    def from_json(cls, text: str) -> "TableModel":
        try:
            record = ModelFile.from_dict(json.loads(text))
        except (ValueError, TypeError, KeyError, JSONWizardError) as e:
            raise FormatError(f"invalid model file: {e}")
        return record.to_model()


def _check_input(source: Sequence[int], prefix: Sequence[int]) -> None:
    if not source:
        raise InvalidInputError("empty source sentence")
    if not prefix or prefix[0] != BOS:
        raise InvalidInputError("target prefix must start with bos")


def hidden_state(
    model: TableModel, source: Sequence[int], prefix: Sequence[int]
) -> NDArray[np.float32]:
    _check_input(source, prefix)
    src = model.source_embeddings[list(source)].mean(axis=0)
    tgt = model.target_embeddings[list(prefix[-2:])].mean(axis=0)
    # Rounded to 32 bits here so that query and stored key are bit-identical.
    return (model.projection @ np.concatenate([src, tgt])).astype(np.float32)


def p_mt(model: TableModel, source: Sequence[int], prefix: Sequence[int]) -> TokenDistribution:
    _check_input(source, prefix)
    probs = np.full(len(model.vocab_tgt), model.alpha, dtype=np.float64)
    row = model.counts.get(model.context(source, prefix))
    if row:
        np.add.at(probs, list(row.keys()), list(row.values()))
    return TokenDistribution(probs=probs / probs.sum())


def step(model: TableModel, source: Sequence[int], prefix: Sequence[int]) -> StepOutput:
    return StepOutput(
        p_mt=p_mt(model, source, prefix),
        hidden=hidden_state(model, source, prefix),
    )


def frame_target(target_ids: Sequence[int]) -> list[int]:
    return [BOS, *target_ids, EOS]


def train_counts(
    sources: Sequence[Sequence[str]],
    targets: Sequence[Sequence[str]],
    alpha: float = 0.1,
    embed_dim: int = 32,
    seed: int = 0,
    n_buckets: int = 16,
) -> TableModel:
    if len(sources) != len(targets):
        raise InvalidInputError(
            f"corpus sides differ in length: {len(sources)} sources, {len(targets)} targets"
        )
    if not sources:
        raise InvalidInputError("empty training corpus")
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    if embed_dim < 1 or n_buckets < 1:
        raise InvalidInputError("embed_dim and n_buckets must be positive")

    vocab_src = Vocab.build(sources)
    vocab_tgt = Vocab.build(targets)
    model = TableModel(
        vocab_src=vocab_src,
        vocab_tgt=vocab_tgt,
        counts={},
        embed_dim=embed_dim,
        embed_seed=seed,
        alpha=alpha,
        n_buckets=n_buckets,
    )
    counts: defaultdict[Context, Counter[int]] = defaultdict(Counter)
    for source, target in zip(sources, targets):
        src = vocab_src.encode(source)
        tgt = frame_target(vocab_tgt.encode(target))
        for i in range(1, len(tgt)):
            counts[model.context(src, tgt[:i])][tgt[i]] += 1

    frozen = {ctx: dict(sorted(row.items())) for ctx, row in sorted(counts.items())}
    logger.debug(
        "Trained table model: %d contexts, %d source / %d target types",
        len(frozen),
        len(vocab_src),
        len(vocab_tgt),
    )
    return TableModel(
        vocab_src=vocab_src,
        vocab_tgt=vocab_tgt,
        counts=frozen,
        embed_dim=embed_dim,
        embed_seed=seed,
        alpha=alpha,
        n_buckets=n_buckets,
    )


def teacher_forced_contexts(
    model: TableModel,
    sources: Sequence[Sequence[str]],
    targets: Sequence[Sequence[str]],
) -> Iterator[tuple[NDArray[np.float32], int]]:
    """
    `(hidden state, next token)` for every target position of every pair, eos included.
    """
    if len(sources) != len(targets):
        raise InvalidInputError("corpus sides differ in length")
    for source, target in zip(sources, targets):
        src = model.vocab_src.encode(source)
        tgt = frame_target(model.vocab_tgt.encode(target))
        for i in range(1, len(tgt)):
            yield hidden_state(model, src, tgt[:i]), tgt[i]


@dataclass
class CountRow(JSONWizard):
    class _(JSONWizard.Meta):
        key_transform_with_dump = "SNAKE"

    bucket: int
    prev2: int
    prev1: int
    tokens: list[int]
    counts: list[int]


@dataclass
class ModelFile(JSONWizard):
    """On-disk form of a `TableModel`: rows are sorted, so equal models serialise to equal bytes."""

    class _(JSONWizard.Meta):
        key_transform_with_dump = "SNAKE"

    source_tokens: list[str]
    target_tokens: list[str]
    embed_dim: int
    embed_seed: int
    alpha: float
    n_buckets: int
    rows: list[CountRow]

    @classmethod
    def from_model(cls, model: TableModel) -> "ModelFile":
        return cls(
            source_tokens=list(model.vocab_src.tokens),
            target_tokens=list(model.vocab_tgt.tokens),
            embed_dim=model.embed_dim,
            embed_seed=model.embed_seed,
            alpha=model.alpha,
            n_buckets=model.n_buckets,
            rows=[
                CountRow(
                    bucket=bucket,
                    prev2=prev2,
                    prev1=prev1,
                    tokens=list(row.keys()),
                    counts=list(row.values()),
                )
                for (bucket, prev2, prev1), row in sorted(model.counts.items())
            ],
        )

    def to_model(self) -> TableModel:
        return TableModel(
            vocab_src=Vocab(tokens=tuple(self.source_tokens)),
            vocab_tgt=Vocab(tokens=tuple(self.target_tokens)),
            counts={
                (r.bucket, r.prev2, r.prev1): dict(zip(r.tokens, r.counts))
                for r in self.rows
            },
            embed_dim=self.embed_dim,
            embed_seed=self.embed_seed,
            alpha=self.alpha,
            n_buckets=self.n_buckets,
        )
