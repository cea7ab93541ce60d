"""
The steps of an experiment, composed from the library.

Each step reads the artefacts of the previous ones from the output directory of a `RunConfig`
and writes its own next to them. The in-memory variants are shared with the sweep.
"""

import json
import logging
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

from knnmt.config import CorpusPaths, DatastoreParams, ModelParams, RunConfig
from knnmt.datastore import (
    Datastore,
    ExactSearcher,
    IvfIndex,
    IvfSearcher,
    Searcher,
    build_datastore,
    build_ivf,
    load,
    load_index,
    save,
    save_index,
)
from knnmt.decode import (
    CandidateList,
    DecodeConfig,
    KnnPipeline,
    decode_corpus,
    forced_decode_corpus,
    to_records,
    write_candidates,
)
from knnmt.decode.candidates import CandidatesFile, format_logliks
from knnmt.errors import ConfigError, FormatError, InvalidInputError, MissingArtifactError
from knnmt.metrics import (
    BaseSystem,
    EvalBundle,
    FluencyScorer,
    MetricReport,
    build_report,
    system_scores,
)
from knnmt.perturb import DistanceStats, PerturbKind, estimate_distance_stats
from knnmt.toymodel import (
    CorpusSpec,
    SentencePair,
    TableModel,
    frame_target,
    generate_corpus,
    read_corpus,
    split_sides,
    teacher_forced_contexts,
    train_counts,
    write_corpus,
)

logger = logging.getLogger(__name__)


def require(path: Path, step: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, step)
    return path


def write_generated_corpus(spec: CorpusSpec, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, pairs in generate_corpus(spec).files().items():
        path = out / f"{name}.tsv"
        write_corpus(path, pairs)
        written.append(path)
    return written


def train_model(corpus: CorpusPaths, params: ModelParams) -> TableModel:
    sources, targets = split_sides(read_corpus(require(corpus.train, "gen_corpus")))
    return train_counts(
        sources,
        targets,
        alpha=params.alpha,
        embed_dim=params.embed_dim,
        seed=params.seed,
        n_buckets=params.n_buckets,
    )


def train(config: RunConfig) -> TableModel:
    model = train_model(config.corpus, config.model)
    config.output.dir.mkdir(parents=True, exist_ok=True)
    config.output.model.write_text(model.to_json(), encoding="utf-8")
    logger.info("Wrote model to %s", config.output.model)
    return model


def load_model(config: RunConfig) -> TableModel:
    return TableModel.from_json(
        require(config.output.model, "train").read_text(encoding="utf-8")
    )


@dataclass(frozen=True)
class Artifacts:
    model: TableModel
    datastore: Datastore
    index: IvfIndex | None = None
    stats: DistanceStats | None = None
    stats_k: int | None = None

    def searcher(self, n_probe: int) -> Searcher:
        if self.index is None:
            return ExactSearcher(self.datastore)
        return IvfSearcher(self.datastore, self.index, n_probe)


def _check_vocabulary(model: TableModel, pairs: Sequence[SentencePair]) -> None:
    unknown = sorted({t for _, target in pairs for t in target if t not in model.vocab_tgt})
    if unknown:
        raise ConfigError(
            f"training targets contain {len(unknown)} tokens unknown to the model, "
            f"e.g. {unknown[:5]}; retrain on this corpus",
            "corpus.dir",
        )


def validation_stats(
    corpus: CorpusPaths, model: TableModel, ds: Datastore, k: int
) -> DistanceStats:
    sources, targets = split_sides(read_corpus(require(corpus.valid, "gen_corpus")))
    queries = (hidden for hidden, _ in teacher_forced_contexts(model, sources, targets))
    return estimate_distance_stats(ds, queries, k)


def build_artifacts(
    corpus: CorpusPaths, params: DatastoreParams, model: TableModel, k: int
) -> Artifacts:
    """`k` is the neighbour count the validation distance statistics are taken for."""
    pairs = read_corpus(require(corpus.train, "gen_corpus"))
    _check_vocabulary(model, pairs)
    sources, targets = split_sides(pairs)

    start = time.time()
    ds = build_datastore(
        teacher_forced_contexts(model, sources, targets),
        model.embed_dim,
        len(model.vocab_tgt),
    )
    index = None
    if params.n_clusters is not None:
        index = build_ivf(
            ds, min(params.n_clusters, len(ds)), params.kmeans_iters, params.kmeans_seed
        )
    stats = validation_stats(corpus, model, ds, k)
    logger.info(
        "Built datastore of %d entries%s in %.2f s",
        len(ds),
        "" if index is None else f" with {index.n_clusters} clusters",
        time.time() - start,
    )
    return Artifacts(model=model, datastore=ds, index=index, stats=stats, stats_k=k)


def build(config: RunConfig) -> Artifacts:
    artifacts = build_artifacts(
        config.corpus, config.datastore, load_model(config), config.decode.k
    )
    out = config.output
    out.dir.mkdir(parents=True, exist_ok=True)
    out.datastore.write_bytes(save(artifacts.datastore))
    if artifacts.index is not None:
        out.index.write_bytes(save_index(artifacts.index))
    elif out.index.exists():
        out.index.unlink()
    out.distance_stats.write_text(
        json.dumps({"k": artifacts.stats_k, **asdict(artifacts.stats)}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return artifacts


def load_artifacts(config: RunConfig) -> Artifacts:
    model = load_model(config)
    ds = load(require(config.output.datastore, "build").read_bytes())
    index = None
    if config.datastore.n_clusters is not None:
        index = load_index(require(config.output.index, "build").read_bytes(), ds)
    stats, stats_k = None, None
    if config.output.distance_stats.exists():
        try:
            document = json.loads(config.output.distance_stats.read_text(encoding="utf-8"))
            stats_k = int(document.pop("k"))
            stats = DistanceStats(**document)
        except (ValueError, TypeError, KeyError) as e:
            raise FormatError(f"invalid distance statistics in {config.output.distance_stats}: {e}")
    if model.embed_dim != ds.dim or len(model.vocab_tgt) != ds.vocab_size:
        raise ConfigError(
            "datastore does not match the trained model; run `manage build` again", "output.dir"
        )
    return Artifacts(model=model, datastore=ds, index=index, stats=stats, stats_k=stats_k)


def make_pipeline(
    config: RunConfig, artifacts: Artifacts, decode_config: DecodeConfig | None = None
) -> KnnPipeline:
    decode_config = decode_config or config.decode
    stats = None
    perturb = decode_config.perturb
    if perturb.kind == PerturbKind.STATIC_NOISE and perturb.static_relative:
        stats = artifacts.stats
        if stats is None or artifacts.stats_k != decode_config.k:
            logger.info("Estimating validation distance statistics for k=%d", decode_config.k)
            stats = validation_stats(
                config.corpus, artifacts.model, artifacts.datastore, decode_config.k
            )
    return KnnPipeline.create(
        artifacts.model,
        artifacts.searcher(config.datastore.n_probe),
        decode_config,
        stats,
    )


def read_test_set(config: RunConfig) -> list[SentencePair]:
    return read_corpus(require(config.corpus.test, "gen_corpus"))


def decode_test_set(
    config: RunConfig, artifacts: Artifacts, workers: int = 1
) -> tuple[list[SentencePair], list[CandidateList]]:
    pairs = read_test_set(config)
    model = artifacts.model
    sources = [model.vocab_src.encode(src) for src, _ in pairs]
    return pairs, decode_corpus(make_pipeline(config, artifacts), config.decode, sources, workers)


def write_decoded(
    config: RunConfig,
    artifacts: Artifacts,
    path: Path,
    pairs: Sequence[SentencePair],
    candidates: Sequence[CandidateList],
) -> None:
    records = to_records(candidates, [src for src, _ in pairs], artifacts.model.vocab_tgt)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_candidates(path, records, config.document())
    logger.info("Wrote %d candidate lists to %s", len(candidates), path)


def forced_logliks(config: RunConfig, artifacts: Artifacts, refs: Path) -> list[float]:
    pairs = read_corpus(require(refs, "gen_corpus"))
    model = artifacts.model
    return forced_decode_corpus(
        make_pipeline(config, artifacts),
        [model.vocab_src.encode(src) for src, _ in pairs],
        [frame_target(model.vocab_tgt.encode(tgt)) for _, tgt in pairs],
    )


def write_logliks(path: Path, logliks: Sequence[float]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_logliks(logliks), encoding="utf-8")


def bundle_from_candidates(
    candidates: CandidatesFile, references: Sequence[SentencePair]
) -> EvalBundle:
    """Align a candidates file with its references by id, listing every offending id."""
    ids = candidates.ids()
    if ids != list(range(len(references))):
        missing = sorted(set(range(len(references))) - set(ids))
        extra = sorted(set(ids) - set(range(len(references))))
        raise InvalidInputError(
            f"candidate ids do not match the {len(references)} references: "
            f"missing {missing[:10]}, unexpected {extra[:10]}"
        )
    mismatched = [
        record.id
        for record, (src, _) in zip(candidates.records, references)
        if tuple(record.source) != tuple(src)
    ]
    if mismatched:
        raise InvalidInputError(f"sources differ from the reference file at ids {mismatched[:10]}")
    return EvalBundle.build(
        sources=[src for src, _ in references],
        references=[tgt for _, tgt in references],
        candidates=[record.hypotheses for record in candidates.records],
    )


def bundle_from_lists(
    pairs: Sequence[SentencePair], candidates: Sequence[CandidateList], model: TableModel
) -> EvalBundle:
    return EvalBundle.build(
        sources=[src for src, _ in pairs],
        references=[tgt for _, tgt in pairs],
        candidates=[
            [model.vocab_tgt.decode(h.body) for h in c.hypotheses] for c in candidates
        ],
    )


def evaluate(
    bundle: EvalBundle,
    other: EvalBundle | None = None,
    base: EvalBundle | BaseSystem | None = None,
    logliks: tuple[Sequence[float], Sequence[float]] | None = None,
    scorer: FluencyScorer | None = None,
) -> MetricReport:
    if isinstance(base, EvalBundle):
        base = system_scores(base)
    return build_report(bundle, other=other, base=base, logliks=logliks, scorer=scorer)
