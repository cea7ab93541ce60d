import logging
import time
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from knnmt.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Datastore:
    """
    Cached translation contexts: one (key, value) pair per target token of the training data.
    Keys are stored as 32-bit floats, values as token ids.
    The store is never mutated after construction.
    """

    dim: int
    vocab_size: int
    keys: NDArray[np.float32]
    values: NDArray[np.int64]

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Datastore):
            return NotImplemented
        # Compare bit patterns: `==` on floats would equate 0.0 and -0.0.
        return (
            self.dim == other.dim
            and self.vocab_size == other.vocab_size
            and self.keys.shape == other.keys.shape
            and np.array_equal(self.keys.view(np.uint32), other.keys.view(np.uint32))
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Neighbor:
    distance: float
    key_index: int
    token: int


@dataclass(frozen=True, eq=False)
class NeighborSet:
    """
    Retrieved neighbours of one query, sorted by (distance, key_index).
    Distances are squared L2.
    """

    distances: NDArray[np.float64]
    key_indices: NDArray[np.int64]
    tokens: NDArray[np.int64]

    @classmethod
    def empty(cls) -> "NeighborSet":
        return cls(
            distances=np.empty(0, dtype=np.float64),
            key_indices=np.empty(0, dtype=np.int64),
            tokens=np.empty(0, dtype=np.int64),
        )

    @classmethod
    def from_neighbors(cls, neighbors: Iterable[Neighbor]) -> "NeighborSet":
        ordered = sorted(neighbors, key=lambda n: (n.distance, n.key_index))
        if len({n.key_index for n in ordered}) != len(ordered):
            raise InvalidInputError("duplicate key_index in neighbour set")
        return cls(
            distances=np.array([n.distance for n in ordered], dtype=np.float64),
            key_indices=np.array([n.key_index for n in ordered], dtype=np.int64),
            tokens=np.array([n.token for n in ordered], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.key_indices)

    def __iter__(self) -> Iterator[Neighbor]:
        for d, i, t in zip(self.distances, self.key_indices, self.tokens):
            yield Neighbor(distance=float(d), key_index=int(i), token=int(t))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NeighborSet):
            return NotImplemented
        return (
            np.array_equal(self.distances, other.distances)
            and np.array_equal(self.key_indices, other.key_indices)
            and np.array_equal(self.tokens, other.tokens)
        )

    __hash__ = None  # type: ignore[assignment]

    def take(self, positions: NDArray[np.intp]) -> "NeighborSet":
        """Subset by position; positions must be ascending to keep the sort order."""
        return NeighborSet(
            distances=self.distances[positions],
            key_indices=self.key_indices[positions],
            tokens=self.tokens[positions],
        )


class Searcher(Protocol):
    datastore: Datastore

    def search(self, query: ArrayLike, k: int) -> NeighborSet: ...


def as_query(query: ArrayLike, dim: int) -> NDArray[np.float64]:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != dim:
        raise InvalidInputError(f"query has shape {q.shape}, expected ({dim},)")
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("query has non-finite components")
    return q


def squared_l2(a: ArrayLike, b: ArrayLike) -> float:
    """
    Squared Euclidean distance, accumulated in 64 bits.
    Never square-rooted: every distance in this package, and every noise magnitude derived from one, is in squared units.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("non-finite component")
    diff = x - y
    return float(np.sum(diff * diff))


def build_datastore(
    pairs: Iterable[tuple[ArrayLike, int]],
    dim: int,
    vocab_size: int,
) -> Datastore:
    if dim < 1:
        raise InvalidInputError(f"dim must be positive, got {dim}")
    if vocab_size < 1:
        raise InvalidInputError(f"vocab_size must be positive, got {vocab_size}")

    start = time.time()
    keys: list[NDArray[np.float32]] = []
    values: list[int] = []
    for index, (vector, token) in enumerate(pairs):
        key = np.asarray(vector, dtype=np.float32)
        if key.shape != (dim,):
            raise InvalidInputError(
                f"pair {index}: key has shape {key.shape}, expected ({dim},)"
            )
        if not np.all(np.isfinite(key)):
            raise InvalidInputError(f"pair {index}: key has non-finite components")
        if not 0 <= token < vocab_size:
            raise InvalidInputError(
                f"pair {index}: token {token} outside vocabulary of size {vocab_size}"
            )
        keys.append(key)
        values.append(int(token))

    ds = Datastore(
        dim=dim,
        vocab_size=vocab_size,
        keys=np.stack(keys) if keys else np.empty((0, dim), dtype=np.float32),
        values=np.array(values, dtype=np.int64),
    )
    ds.keys.flags.writeable = False
    ds.values.flags.writeable = False
    logger.debug(
        "Built datastore of %d keys (dim %d) in %f s", len(ds), dim, time.time() - start
    )
    return ds


def _nearest(
    ds: Datastore,
    q: NDArray[np.float64],
    k: int,
    candidates: NDArray[np.int64] | None = None,
) -> NeighborSet:
    keys = ds.keys if candidates is None else ds.keys[candidates]
    if len(keys) == 0:
        return NeighborSet.empty()
    diff = keys.astype(np.float64) - q
    distances = np.sum(diff * diff, axis=1)
    positions = np.arange(len(keys))
    if k < len(keys):
        # Keep everything tied with the k-th distance so the tie-break below sees all of them.
        kth = np.partition(distances, k - 1)[k - 1]
        positions = np.flatnonzero(distances <= kth)
    indices = positions if candidates is None else candidates[positions]
    order = np.lexsort((indices, distances[positions]))[:k]
    chosen = indices[order].astype(np.int64)
    return NeighborSet(
        distances=distances[positions][order],
        key_indices=chosen,
        tokens=ds.values[chosen],
    )


def search_exact(ds: Datastore, query: ArrayLike, k: int) -> NeighborSet:
    """
    The `min(k, len(ds))` keys closest to `query`, ties broken by ascending key index.
    """
    if k < 1:
        raise InvalidInputError(f"k must be positive, got {k}")
    return _nearest(ds, as_query(query, ds.dim), k)


def search_subset(
    ds: Datastore, query: ArrayLike, k: int, candidates: Sequence[int]
) -> NeighborSet:
    """Exact search restricted to the given key indices."""
    if k < 1:
        raise InvalidInputError(f"k must be positive, got {k}")
    subset = np.unique(np.asarray(candidates, dtype=np.int64))
    return _nearest(ds, as_query(query, ds.dim), k, subset)


@dataclass(frozen=True)
class ExactSearcher:
    datastore: Datastore

    def search(self, query: ArrayLike, k: int) -> NeighborSet:
        return search_exact(self.datastore, query, k)


def recall(approximate: NeighborSet, exact: NeighborSet) -> float:
    """Fraction of the exact neighbours' key indices that the approximate search recovered."""
    if len(exact) == 0:
        return 1.0
    found = np.intersect1d(approximate.key_indices, exact.key_indices)
    return len(found) / len(exact)
