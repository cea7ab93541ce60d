"""
Synthetic parallel corpus.

Sentences are drawn from a handful of templates whose slots are filled with concepts from a small lexicon.
Every concept has one source form and two to four target synonyms, so a source sentence admits several
valid translations. Test sentences come with a second reference that picks a different synonym for every
slot that has one.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from knnmt.errors import FormatError
from knnmt.rng import stream

logger = logging.getLogger(__name__)

Sentence = tuple[str, ...]
SentencePair = tuple[Sentence, Sentence]

SPLITS = ("train", "valid", "test")
SECOND_REFERENCE = "test.ref_b"

LEXICON: dict[str, tuple[tuple[str, tuple[str, ...]], ...]] = {
    "subj": (
        ("hund", ("dog", "hound", "pup")),
        ("katze", ("cat", "kitty")),
        ("mann", ("man", "guy", "fellow")),
        ("frau", ("woman", "lady")),
        ("kind", ("child", "kid", "youngster")),
        ("lehrer", ("teacher", "instructor", "tutor")),
        ("arzt", ("doctor", "physician", "medic")),
        ("vogel", ("bird", "songbird")),
    ),
    "obj": (
        ("buch", ("book", "volume", "novel")),
        ("brief", ("letter", "note", "message")),
        ("auto", ("car", "automobile", "vehicle")),
        ("haus", ("house", "home", "dwelling")),
        ("apfel", ("apple", "fruit")),
        ("tisch", ("table", "desk")),
        ("geschenk", ("gift", "present")),
        ("lied", ("song", "tune", "melody")),
    ),
    "verb": (
        ("liest", ("reads", "studies", "peruses")),
        ("sieht", ("sees", "notices", "spots", "observes")),
        ("kauft", ("buys", "purchases", "acquires")),
        ("findet", ("finds", "discovers", "locates")),
        ("bringt", ("brings", "carries", "delivers")),
        ("malt", ("paints", "draws", "sketches")),
        ("mag", ("likes", "enjoys", "loves")),
    ),
    "adj": (
        ("gross", ("big", "large", "huge")),
        ("klein", ("small", "little", "tiny")),
        ("alt", ("old", "aged", "ancient")),
        ("neu", ("new", "fresh", "recent")),
        ("schoen", ("beautiful", "pretty", "lovely")),
        ("rot", ("red", "crimson")),
        ("schnell", ("fast", "quick", "rapid")),
        ("ruhig", ("quiet", "calm", "silent")),
    ),
    "place": (
        ("park", ("park", "garden")),
        ("stadt", ("city", "town")),
        ("schule", ("school", "academy")),
        ("markt", ("market", "bazaar", "marketplace")),
        ("strand", ("beach", "shore", "coast")),
    ),
    "time": (
        ("heute", ("today", "this day")),
        ("morgen", ("tomorrow", "the next day")),
        ("gestern", ("yesterday", "the day before")),
        ("oft", ("often", "frequently", "regularly")),
        ("manchmal", ("sometimes", "occasionally", "at times")),
    ),
}


@dataclass(frozen=True)
class Template:
    """
    `{i}` placeholders refer to `slots[i]`; the source side uses the concept's source form,
    the target side one of its synonyms.
    """

    slots: tuple[str, ...]
    source: str
    target: str


TEMPLATES = (
    Template(
        ("adj", "subj", "verb", "obj"),
        "der {0} {1} {2} das {3}",
        "the {0} {1} {2} the {3}",
    ),
    Template(
        ("time", "verb", "subj", "obj", "place"),
        "{0} {1} der {2} ein {3} im {4}",
        "the {2} {1} a {3} in the {4} {0}",
    ),
    Template(
        ("subj", "verb", "time", "adj", "obj"),
        "der {0} {1} {2} das {3} {4}",
        "the {0} {1} the {3} {4} {2}",
    ),
    Template(("subj", "adj"), "der {0} ist {1}", "the {0} is {1}"),
    Template(
        ("obj", "place", "adj"),
        "das {0} im {1} ist {2}",
        "the {0} in the {1} is {2}",
    ),
    Template(
        ("subj", "verb", "obj", "time", "place"),
        "der {0} {1} das {2} {3} im {4}",
        "the {0} {1} the {2} in the {4} {3}",
    ),
)


class CorpusSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(ge=0)
    n_train: int = Field(default=500, ge=1)
    n_valid: int = Field(default=50, ge=1)
    n_test: int = Field(default=100, ge=1)

    def size(self, split: str) -> int:
        return {"train": self.n_train, "valid": self.n_valid, "test": self.n_test}[split]


@dataclass(frozen=True)
class GeneratedCorpus:
    train: list[SentencePair]
    valid: list[SentencePair]
    test: list[SentencePair]
    # Same sources as `test`, paraphrased targets.
    test_ref_b: list[SentencePair]

    def files(self) -> dict[str, list[SentencePair]]:
        return {
            "train": self.train,
            "valid": self.valid,
            "test": self.test,
            SECOND_REFERENCE: self.test_ref_b,
        }


def _fill(pattern: str, words: Sequence[str]) -> Sentence:
    return tuple(pattern.format(*words).split())


def _sentence(
    rng: np.random.Generator, paraphrase: bool
) -> tuple[SentencePair, SentencePair | None]:
    template = TEMPLATES[rng.integers(len(TEMPLATES))]
    source_words: list[str] = []
    target_words: list[str] = []
    other_words: list[str] = []
    for slot in template.slots:
        concepts = LEXICON[slot]
        form, synonyms = concepts[rng.integers(len(concepts))]
        choice = int(rng.integers(len(synonyms)))
        source_words.append(form)
        target_words.append(synonyms[choice])
        if paraphrase:
            # Any synonym but the one chosen for the first reference.
            shift = 1 + int(rng.integers(len(synonyms) - 1)) if len(synonyms) > 1 else 0
            other_words.append(synonyms[(choice + shift) % len(synonyms)])

    source = _fill(template.source, source_words)
    pair = (source, _fill(template.target, target_words))
    if not paraphrase:
        return pair, None
    return pair, (source, _fill(template.target, other_words))


def generate_corpus(spec: CorpusSpec) -> GeneratedCorpus:
    splits: dict[str, list[SentencePair]] = {}
    second: list[SentencePair] = []
    for split_index, split in enumerate(SPLITS):
        rng = stream(spec.seed, split_index)
        pairs = []
        for _ in range(spec.size(split)):
            pair, paraphrase = _sentence(rng, paraphrase=split == "test")
            pairs.append(pair)
            if paraphrase is not None:
                second.append(paraphrase)
        splits[split] = pairs
    logger.debug(
        "Generated corpus with seed %d: %s",
        spec.seed,
        {split: len(pairs) for split, pairs in splits.items()},
    )
    return GeneratedCorpus(test_ref_b=second, **splits)


def format_corpus(pairs: Iterable[SentencePair]) -> str:
    return "".join(f"{' '.join(src)}\t{' '.join(tgt)}\n" for src, tgt in pairs)


def write_corpus(path: Path, pairs: Iterable[SentencePair]) -> None:
    path.write_text(format_corpus(pairs), encoding="utf-8")


def parse_corpus(text: str) -> list[SentencePair]:
    pairs: list[SentencePair] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(
                f"expected 2 tab-separated fields, found {len(fields)}", line_number
            )
        source, target = (tuple(field.split()) for field in fields)
        if not source or not target:
            raise FormatError("empty sentence", line_number)
        pairs.append((source, target))
    return pairs


def read_corpus(path: Path) -> list[SentencePair]:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path} is not valid UTF-8: {e.reason}", e.start)
    return parse_corpus(text)


def split_sides(pairs: Sequence[SentencePair]) -> tuple[list[Sentence], list[Sentence]]:
    return [src for src, _ in pairs], [tgt for _, tgt in pairs]
