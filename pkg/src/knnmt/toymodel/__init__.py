from knnmt.toymodel.corpus import (
    CorpusSpec,
    GeneratedCorpus,
    SentencePair,
    generate_corpus,
    parse_corpus,
    read_corpus,
    split_sides,
    write_corpus,
)
from knnmt.toymodel.model import (
    StepOutput,
    TableModel,
    frame_target,
    hidden_state,
    step,
    teacher_forced_contexts,
    token_embedding,
    train_counts,
)
from knnmt.toymodel.vocab import BOS, EOS, PAD, UNK, Vocab

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "UNK",
    "CorpusSpec",
    "GeneratedCorpus",
    "SentencePair",
    "StepOutput",
    "TableModel",
    "Vocab",
    "frame_target",
    "generate_corpus",
    "hidden_state",
    "parse_corpus",
    "read_corpus",
    "split_sides",
    "step",
    "teacher_forced_contexts",
    "token_embedding",
    "train_counts",
    "write_corpus",
]
