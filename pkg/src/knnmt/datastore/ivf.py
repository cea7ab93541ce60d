import logging
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from knnmt.datastore.store import (
    Datastore,
    NeighborSet,
    as_query,
    search_subset,
)
from knnmt.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IvfIndex:
    """
    Inverted-file index over a datastore: k-means centroids and one posting list per cluster.
    Posting lists are derived from `assignments` and hold key indices in ascending order.
    """

    centroids: NDArray[np.float64]
    assignments: NDArray[np.int64]
    posting_lists: tuple[NDArray[np.int64], ...] = field(init=False)

    def __post_init__(self) -> None:
        lists = tuple(
            np.flatnonzero(self.assignments == c).astype(np.int64)
            for c in range(self.n_clusters)
        )
        object.__setattr__(self, "posting_lists", lists)

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IvfIndex):
            return NotImplemented
        return np.array_equal(self.centroids, other.centroids) and np.array_equal(
            self.assignments, other.assignments
        )

    __hash__ = None  # type: ignore[assignment]


def _sq_distances(points: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray:
    diff = points - x
    return np.sum(diff * diff, axis=1)


def _assign(keys: NDArray[np.float64], centroids: NDArray[np.float64]) -> NDArray:
    distances = np.stack([_sq_distances(keys, c) for c in centroids], axis=1)
    # `argmin` returns the first minimum, i.e. the lowest cluster id on ties.
    return np.argmin(distances, axis=1).astype(np.int64)


def _farthest_point_init(
    keys: NDArray[np.float64], n_clusters: int, seed: int
) -> NDArray[np.float64]:
    first = seed % len(keys)
    chosen = [first]
    closest = _sq_distances(keys, keys[first])
    for _ in range(1, n_clusters):
        # `argmax` returns the lowest index on ties.
        nxt = int(np.argmax(closest))
        chosen.append(nxt)
        closest = np.minimum(closest, _sq_distances(keys, keys[nxt]))
    return keys[chosen].copy()


def build_ivf(
    ds: Datastore, n_clusters: int, max_iters: int = 25, seed: int = 0
) -> IvfIndex:
    """
    Lloyd's k-means with a deterministic farthest-point initialisation.

    The first centroid is the key at `seed mod len(ds)`; every further centroid is the key farthest from those already chosen.
    An emptied cluster keeps its previous centroid.
    """
    if not 1 <= n_clusters <= len(ds):
        raise InvalidInputError(
            f"n_clusters must be in [1, {len(ds)}], got {n_clusters}"
        )
    if max_iters < 0:
        raise InvalidInputError(f"max_iters must be non-negative, got {max_iters}")

    start = time.time()
    keys = ds.keys.astype(np.float64)
    centroids = _farthest_point_init(keys, n_clusters, seed)
    assignments = _assign(keys, centroids)
    for iteration in range(max_iters):
        for c in range(n_clusters):
            members = assignments == c
            if members.any():
                centroids[c] = keys[members].mean(axis=0)
        updated = _assign(keys, centroids)
        if np.array_equal(updated, assignments):
            logger.debug("k-means converged after %d iterations", iteration + 1)
            break
        assignments = updated
    else:
        logger.debug("k-means stopped at max_iters=%d", max_iters)

    # Assignments must match the final centroids exactly.
    assignments = _assign(keys, centroids)
    index = IvfIndex(centroids=centroids, assignments=assignments)
    logger.debug(
        "Built IVF index with %d clusters over %d keys in %f s",
        n_clusters,
        len(ds),
        time.time() - start,
    )
    return index


def probe_order(index: IvfIndex, query: NDArray[np.float64]) -> NDArray[np.int64]:
    """Cluster ids sorted by centroid distance, ties to the lowest id."""
    distances = _sq_distances(index.centroids, query)
    return np.lexsort((np.arange(index.n_clusters), distances)).astype(np.int64)


def search_ivf(
    ds: Datastore, index: IvfIndex, query: ArrayLike, k: int, n_probe: int
) -> NeighborSet:
    """
    Exact search over the posting lists of the `n_probe` clusters nearest to the query.
    """
    if not 1 <= n_probe <= index.n_clusters:
        raise InvalidInputError(
            f"n_probe must be in [1, {index.n_clusters}], got {n_probe}"
        )
    if len(index.assignments) != len(ds):
        raise InvalidInputError(
            f"index covers {len(index.assignments)} keys, datastore has {len(ds)}"
        )
    q = as_query(query, ds.dim)
    probed = probe_order(index, q)[:n_probe]
    candidates = np.concatenate([index.posting_lists[c] for c in probed])
    if len(candidates) == 0:
        return NeighborSet.empty()
    return search_subset(ds, q, k, candidates)


@dataclass(frozen=True)
class IvfSearcher:
    datastore: Datastore
    index: IvfIndex
    n_probe: int

    def search(self, query: ArrayLike, k: int) -> NeighborSet:
        return search_ivf(self.datastore, self.index, query, k, self.n_probe)
