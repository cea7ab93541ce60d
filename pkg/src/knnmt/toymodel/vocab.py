from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from knnmt.errors import InvalidInputError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    ids: dict[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.tokens[: len(RESERVED)] != RESERVED:
            raise InvalidInputError(f"vocabulary must start with {RESERVED}")
        ids = {token: i for i, token in enumerate(self.tokens)}
        if len(ids) != len(self.tokens):
            raise InvalidInputError("vocabulary has duplicate tokens")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        """Reserved tokens first, then every other token in sorted order."""
        seen = {token for sentence in sentences for token in sentence}
        return cls(tokens=RESERVED + tuple(sorted(seen - set(RESERVED))))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.ids

    def encode(self, words: Iterable[str]) -> list[int]:
        return [self.ids.get(word, UNK) for word in words]

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        """With `strip`, drop bos, eos and padding."""
        return [
            self.tokens[i] for i in ids if not (strip and i in (PAD, BOS, EOS))
        ]
