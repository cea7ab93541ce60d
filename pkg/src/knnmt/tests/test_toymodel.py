from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from knnmt.datastore import build_datastore, search_exact
from knnmt.errors import FormatError, InvalidInputError
from knnmt.toymodel import (
    BOS,
    EOS,
    UNK,
    CorpusSpec,
    SentencePair,
    TableModel,
    Vocab,
    frame_target,
    generate_corpus,
    hidden_state,
    parse_corpus,
    read_corpus,
    split_sides,
    step,
    teacher_forced_contexts,
    token_embedding,
    train_counts,
    write_corpus,
)
from knnmt.toymodel.model import source_bucket

PAIR: SentencePair = (("der", "hund", "schlaeft"), ("the", "dog", "sleeps"))


def test_vocab() -> None:
    vocab = Vocab.build([("b", "a"), ("c", "a")])

    assert vocab.tokens == ("<pad>", "<s>", "</s>", "<unk>", "a", "b", "c")
    assert vocab.encode(["a", "zzz"]) == [4, UNK]
    assert vocab.decode([BOS, 4, 6, EOS]) == ["a", "c"]
    assert vocab.decode([BOS, 4], strip=False) == ["<s>", "a"]


def test_vocab_rejects_duplicates() -> None:
    with pytest.raises(InvalidInputError):
        Vocab(tokens=("<pad>", "<s>", "</s>", "<unk>", "a", "a"))


def test_token_embedding() -> None:
    first = token_embedding(5, 32, seed=3)

    assert np.array_equal(first, token_embedding(5, 32, seed=3))
    assert np.linalg.norm(first) == pytest.approx(1.0, abs=1e-6)


def test_token_embeddings_are_nearly_orthogonal() -> None:
    vectors = np.stack([token_embedding(i, 32, seed=0) for i in range(100)])
    cosines = vectors @ vectors.T

    off_diagonal = np.abs(cosines[~np.eye(100, dtype=bool)])
    assert off_diagonal.mean() < 0.2


def test_sources_spread_over_buckets() -> None:
    buckets = {source_bucket([i, i + 1], 16) for i in range(10)}

    assert len(buckets) > 1
    assert all(0 <= b < 16 for b in buckets)
    assert source_bucket([4, 9, 2], 16) == source_bucket([2, 4, 9], 16)


def test_hidden_state(make_model: Callable[..., TableModel]) -> None:
    model = make_model()
    source = model.vocab_src.encode(("der", "hund"))

    first = hidden_state(model, source, [BOS, 5])

    assert first.shape == (16,)
    assert first.dtype == np.float32
    assert np.array_equal(first, hidden_state(model, source, [BOS, 5]))
    assert np.linalg.norm(first - hidden_state(model, source, [BOS, 6])) > 0


@pytest.mark.parametrize("source,prefix", [([], [BOS]), ([5], []), ([5], [EOS, 4])])
def test_hidden_state_rejects_bad_input(
    make_model: Callable[..., TableModel], source: list[int], prefix: list[int]
) -> None:
    with pytest.raises(InvalidInputError):
        hidden_state(make_model(), source, prefix)


def test_train_is_deterministic(make_model: Callable[..., TableModel]) -> None:
    assert make_model() == make_model()
    assert make_model().to_json() == make_model().to_json()


def test_train_rejects_misaligned_corpus() -> None:
    with pytest.raises(InvalidInputError):
        train_counts([("a",)], [])


def test_memorised_pair(make_model: Callable[..., TableModel]) -> None:
    model = make_model([PAIR], alpha=0.01)
    source = model.vocab_src.encode(PAIR[0])
    target = frame_target(model.vocab_tgt.encode(PAIR[1]))

    for i in range(1, len(target)):
        out = step(model, source, target[:i])
        assert out.p_mt.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert int(np.argmax(out.p_mt.probs)) == target[i]


def test_repeated_pair_scales_counts(make_model: Callable[..., TableModel]) -> None:
    once = make_model([PAIR], alpha=0.1)
    ten_times = make_model([PAIR] * 10, alpha=0.1)
    source = once.vocab_src.encode(PAIR[0])
    vocab_size = len(once.vocab_tgt)
    the = once.vocab_tgt.ids["the"]

    p_once = step(once, source, [BOS]).p_mt.probs[the]
    p_ten = step(ten_times, source, [BOS]).p_mt.probs[the]

    assert p_once == pytest.approx((1 + 0.1) / (1 + 0.1 * vocab_size))
    assert p_ten == pytest.approx((10 + 0.1) / (10 + 0.1 * vocab_size))


def test_unseen_context_is_uniform(make_model: Callable[..., TableModel]) -> None:
    model = make_model([PAIR])
    source = model.vocab_src.encode(PAIR[0])

    probs = step(model, source, [BOS, EOS, EOS]).p_mt.probs

    assert probs == pytest.approx(np.full(len(model.vocab_tgt), 1 / len(model.vocab_tgt)))


def test_model_json(make_model: Callable[..., TableModel]) -> None:
    model = make_model()

    assert TableModel.from_json(model.to_json()) == model
    with pytest.raises(FormatError):
        TableModel.from_json('{"source_tokens": []}')
    with pytest.raises(FormatError):
        TableModel.from_json("not json")


def test_datastore_has_one_entry_per_target_token(make_model: Callable[..., TableModel]) -> None:
    pairs = [
        (("a", "b"), ("w", "x", "y", "z")),
        (("c",), ("v", "w", "x", "y", "z")),
    ]
    model = make_model(pairs)
    sources, targets = split_sides(pairs)

    ds = build_datastore(
        teacher_forced_contexts(model, sources, targets), model.embed_dim, len(model.vocab_tgt)
    )

    assert len(ds) == 11
    assert ds.values[4] == EOS


def test_training_contexts_retrieve_themselves(
    make_model: Callable[..., TableModel], training_pairs: list[SentencePair]
) -> None:
    model = make_model()
    sources, targets = split_sides(training_pairs)
    ds = build_datastore(
        teacher_forced_contexts(model, sources, targets), model.embed_dim, len(model.vocab_tgt)
    )

    for source, target in training_pairs[:10]:
        src = model.vocab_src.encode(source)
        tgt = frame_target(model.vocab_tgt.encode(target))
        for i in range(1, len(tgt)):
            assert search_exact(ds, hidden_state(model, src, tgt[:i]), 1).distances[0] == 0.0


def test_generate_corpus(corpus_spec: CorpusSpec) -> None:
    corpus = generate_corpus(corpus_spec)

    assert generate_corpus(corpus_spec) == corpus
    assert [len(corpus.train), len(corpus.valid), len(corpus.test)] == [120, 10, 6]
    assert [src for src, _ in corpus.test_ref_b] == [src for src, _ in corpus.test]
    assert all(a != b for (_, a), (_, b) in zip(corpus.test, corpus.test_ref_b))
    assert generate_corpus(CorpusSpec(seed=1, n_train=120)).train != corpus.train


def test_corpus_files(tmp_path: Path, corpus_spec: CorpusSpec) -> None:
    pairs = generate_corpus(corpus_spec).train
    path = tmp_path / "train.tsv"

    write_corpus(path, pairs)

    assert read_corpus(path) == pairs
    assert path.read_text(encoding="utf-8").splitlines()[0].count("\t") == 1


def test_parse_corpus_reports_line() -> None:
    with pytest.raises(FormatError, match=r"at offset 2"):
        parse_corpus("a b\tc d\nno tab here\n")
    with pytest.raises(FormatError, match="empty sentence"):
        parse_corpus("a b\t \n")


def test_read_corpus_rejects_invalid_utf8(tmp_path: Path) -> None:
    path = tmp_path / "bad.tsv"
    path.write_bytes(b"a\t\xff\n")

    with pytest.raises(FormatError):
        read_corpus(path)
