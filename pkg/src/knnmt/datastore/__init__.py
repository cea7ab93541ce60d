from knnmt.datastore.codec import load, load_index, save, save_index
from knnmt.datastore.ivf import IvfIndex, IvfSearcher, build_ivf, search_ivf
from knnmt.datastore.store import (
    Datastore,
    ExactSearcher,
    Neighbor,
    NeighborSet,
    Searcher,
    build_datastore,
    recall,
    search_exact,
    squared_l2,
)

__all__ = [
    "Datastore",
    "ExactSearcher",
    "IvfIndex",
    "IvfSearcher",
    "Neighbor",
    "NeighborSet",
    "Searcher",
    "build_datastore",
    "build_ivf",
    "load",
    "load_index",
    "recall",
    "save",
    "save_index",
    "search_exact",
    "search_ivf",
    "squared_l2",
]
