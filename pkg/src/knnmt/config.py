"""
Run configuration.

A run is described by a TOML document validated against `RunConfig`; unknown keys are rejected.
Values are taken, in increasing precedence, from the model defaults, the configuration file and
`--set key.path=value` overrides. Override values are parsed as JSON and fall back to plain strings.
"""

import itertools
import json
import logging
import math
import tomllib
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from knnmt.decode import DecodeConfig
from knnmt.errors import ConfigError

logger = logging.getLogger(__name__)


class CorpusPaths(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dir: Path = Field(description="Directory written by `gen_corpus`.")

    @property
    def train(self) -> Path:
        return self.dir / "train.tsv"

    @property
    def valid(self) -> Path:
        return self.dir / "valid.tsv"

    @property
    def test(self) -> Path:
        return self.dir / "test.tsv"

    @property
    def test_ref_b(self) -> Path:
        return self.dir / "test.ref_b.tsv"


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.1, gt=0, description="Add-alpha smoothing of the count table.")
    embed_dim: int = Field(default=32, ge=1)
    n_buckets: int = Field(default=16, ge=1)
    seed: int = Field(ge=0, description="Seeds the embeddings and the projection.")


class DatastoreParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_clusters: int | None = Field(
        default=None,
        ge=1,
        description="Build an inverted-file index with this many k-means clusters; exact search when unset.",
    )
    n_probe: int = Field(default=8, ge=1)
    kmeans_iters: int = Field(default=25, ge=1)
    kmeans_seed: int = Field(ge=0, description="Picks the first k-means centroid.")


class OutputPaths(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dir: Path

    @property
    def model(self) -> Path:
        return self.dir / "model.json"

    @property
    def datastore(self) -> Path:
        return self.dir / "datastore.knnd"

    @property
    def index(self) -> Path:
        return self.dir / "datastore.knni"

    @property
    def distance_stats(self) -> Path:
        return self.dir / "distance_stats.json"

    @property
    def candidates(self) -> Path:
        return self.dir / "candidates.jsonl"

    @property
    def report(self) -> Path:
        return self.dir / "report.json"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    corpus: CorpusPaths
    model: ModelParams
    datastore: DatastoreParams
    decode: DecodeConfig
    output: OutputPaths

    def resolved(self, base: Path) -> "RunConfig":
        """Relative paths are taken relative to `base`."""
        return self.model_copy(
            update={
                "corpus": CorpusPaths(dir=base / self.corpus.dir),
                "output": OutputPaths(dir=base / self.output.dir),
            }
        )

    def document(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


class AxisRange(BaseModel):
    """Inclusive arithmetic range, e.g. `{start = 1.5, stop = 2.5, step = 0.1}`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self) -> list[float]:
        count = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        return [round(self.start + i * self.step, 10) for i in range(max(count, 0))]


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    base: RunConfig
    axes: dict[str, list[Any] | AxisRange] = Field(
        default_factory=dict,
        description="Dotted paths into the run configuration mapped to the values to try.",
    )
    seeds: list[int] = Field(
        default=[0],
        min_length=1,
        description="Replicate decode seeds; every point runs once per seed.",
    )
    max_points: int | None = Field(
        default=None, ge=1, description="Overrides the `SWEEP_MAX_POINTS` setting."
    )

    @model_validator(mode="after")
    def check_axes(self) -> "SweepSpec":
        for path, values in self.axes.items():
            if not self.axis_values(path):
                raise ValueError(f"axis {path} has no values")
            for value in self.axis_values(path):
                apply_overrides(self.base.document(), {path: value}, RunConfig)
        return self

    def axis_values(self, path: str) -> list[Any]:
        values = self.axes[path]
        return values.values() if isinstance(values, AxisRange) else list(values)

    def points(self) -> list[dict[str, Any]]:
        """Cartesian product of the axes, first axis varying slowest."""
        paths = list(self.axes)
        return [
            dict(zip(paths, combination))
            for combination in itertools.product(*(self.axis_values(p) for p in paths))
        ]

    def n_runs(self) -> int:
        return math.prod(len(self.axis_values(p)) for p in self.axes) * len(self.seeds)


def set_path(document: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = document
    for key in parents:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set a key below a {type(child).__name__}", dotted)
        node = child
    node[leaf] = value


def parse_override(assignment: str) -> tuple[str, Any]:
    path, sep, raw = assignment.partition("=")
    if not sep or not path:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    try:
        return path.strip(), json.loads(raw)
    except ValueError:
        return path.strip(), raw


def _key_path(error: dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"])


def validate[M: BaseModel](model: type[M], document: dict[str, Any]) -> M:
    try:
        return model.model_validate(document)
    except ValidationError as e:
        errors = e.errors()
        if len(errors) == 1:
            raise ConfigError(errors[0]["msg"], _key_path(errors[0]) or None)
        raise ConfigError(
            "; ".join(f"{_key_path(err) or '<root>'}: {err['msg']}" for err in errors)
        )


def apply_overrides[M: BaseModel](
    document: dict[str, Any], overrides: dict[str, Any], model: type[M]
) -> M:
    updated = json.loads(json.dumps(document))
    for path, value in overrides.items():
        set_path(updated, path, value)
    return validate(model, updated)


def read_document(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    try:
        with path.open("rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path} is not valid TOML: {e}")


def load_document(path: Path | None, assignments: Iterable[str] = ()) -> dict[str, Any]:
    document = read_document(path) if path is not None else {}
    for assignment in assignments:
        set_path(document, *parse_override(assignment))
    return document


def load_run_config(
    path: Path | None, assignments: Iterable[str] = (), base: Path | None = None
) -> RunConfig:
    config = validate(RunConfig, load_document(path, assignments))
    return config.resolved(base) if base is not None else config


def load_sweep_spec(
    path: Path | None, assignments: Iterable[str] = (), base: Path | None = None
) -> SweepSpec:
    spec = validate(SweepSpec, load_document(path, assignments))
    if base is None:
        return spec
    return spec.model_copy(update={"base": spec.base.resolved(base)})


def sweep_configs(spec: SweepSpec) -> Iterator[tuple[int, dict[str, Any], int, RunConfig]]:
    """`(point index, point, seed, config)` in point-major order."""
    document = spec.base.document()
    for index, point in enumerate(spec.points()):
        for seed in spec.seeds:
            yield index, point, seed, apply_overrides(
                document, {**point, "decode.seed": seed}, RunConfig
            )
