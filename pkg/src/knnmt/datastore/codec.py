"""
Binary file formats for datastores and IVF indexes.

Datastore ("KNND"):
    magic, u32 version, u32 dim, u32 vocab_size, u64 count,
    count*dim little-endian f32 keys, count little-endian u32 values.

IVF index ("KNNI"):
    magic, u32 version, u32 n_clusters, u32 dim, u64 count,
    n_clusters*dim little-endian f64 centroids, count little-endian u32 assignments.

Centroids are stored at full precision so loaded assignments stay consistent with them.
"""

import struct

import numpy as np

from knnmt.datastore.ivf import IvfIndex
from knnmt.datastore.store import Datastore
from knnmt.errors import FormatError

DATASTORE_MAGIC = b"KNND"
INDEX_MAGIC = b"KNNI"
VERSION = 1

_HEADER = struct.Struct("<4sIIIQ")


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    if len(data) < _HEADER.size:
        raise FormatError(
            f"truncated header: {len(data)} of {_HEADER.size} bytes", offset=len(data)
        )
    found, version, a, b, count = _HEADER.unpack_from(data, 0)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    return a, b, count


def _read_array(
    data: bytes, offset: int, dtype: str, count: int, what: str
) -> tuple[np.ndarray, int]:
    size = np.dtype(dtype).itemsize * count
    if len(data) < offset + size:
        raise FormatError(
            f"truncated {what}: need {size} bytes, have {len(data) - offset}",
            offset=len(data),
        )
    array = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return array, offset + size


def _check_trailing(data: bytes, offset: int) -> None:
    if len(data) != offset:
        raise FormatError(f"{len(data) - offset} trailing bytes", offset=offset)


def save(ds: Datastore) -> bytes:
    header = _HEADER.pack(DATASTORE_MAGIC, VERSION, ds.dim, ds.vocab_size, len(ds))
    keys = np.ascontiguousarray(ds.keys, dtype="<f4").tobytes()
    values = np.ascontiguousarray(ds.values, dtype="<u4").tobytes()
    return header + keys + values


def load(data: bytes) -> Datastore:
    dim, vocab_size, count = _read_header(data, DATASTORE_MAGIC)
    if dim < 1:
        raise FormatError(f"invalid dim {dim}", offset=8)
    offset = _HEADER.size
    keys, offset = _read_array(data, offset, "<f4", count * dim, "keys")
    values_start = offset
    values, offset = _read_array(data, offset, "<u4", count, "values")
    _check_trailing(data, offset)

    if count and int(values.max()) >= vocab_size:
        bad = int(np.argmax(values >= vocab_size))
        raise FormatError(
            f"value {int(values[bad])} outside vocabulary of size {vocab_size}",
            offset=values_start + 4 * bad,
        )
    if not np.all(np.isfinite(keys)):
        bad = int(np.argmax(~np.isfinite(keys)))
        raise FormatError("non-finite key component", offset=_HEADER.size + 4 * bad)

    ds = Datastore(
        dim=dim,
        vocab_size=vocab_size,
        keys=keys.astype(np.float32).reshape(count, dim),
        values=values.astype(np.int64),
    )
    ds.keys.flags.writeable = False
    ds.values.flags.writeable = False
    return ds


def save_index(index: IvfIndex) -> bytes:
    n_clusters, dim = index.centroids.shape
    header = _HEADER.pack(
        INDEX_MAGIC, VERSION, n_clusters, dim, len(index.assignments)
    )
    centroids = np.ascontiguousarray(index.centroids, dtype="<f8").tobytes()
    assignments = np.ascontiguousarray(index.assignments, dtype="<u4").tobytes()
    return header + centroids + assignments


def load_index(data: bytes, ds: Datastore | None = None) -> IvfIndex:
    """
    Decode an index; when `ds` is given, check that the index was built for it.
    """
    n_clusters, dim, count = _read_header(data, INDEX_MAGIC)
    if n_clusters < 1:
        raise FormatError(f"invalid n_clusters {n_clusters}", offset=8)
    offset = _HEADER.size
    centroids, offset = _read_array(
        data, offset, "<f8", n_clusters * dim, "centroids"
    )
    assignments_start = offset
    assignments, offset = _read_array(data, offset, "<u4", count, "assignments")
    _check_trailing(data, offset)

    if count and int(assignments.max()) >= n_clusters:
        bad = int(np.argmax(assignments >= n_clusters))
        raise FormatError(
            f"assignment {int(assignments[bad])} to unknown cluster",
            offset=assignments_start + 4 * bad,
        )
    if ds is not None and (ds.dim != dim or len(ds) != count):
        raise FormatError(
            f"index for {count} keys of dim {dim} does not match datastore "
            f"of {len(ds)} keys of dim {ds.dim}",
            offset=8,
        )
    return IvfIndex(
        centroids=centroids.astype(np.float64).reshape(n_clusters, dim),
        assignments=assignments.astype(np.int64),
    )
