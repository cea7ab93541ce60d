import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

from knnmt.decode.beam import beam_search, diverse_beam_search, group_sizes
from knnmt.decode.candidates import (
    CandidateList,
    CandidateRecord,
    CandidatesFile,
    Hypothesis,
    read_candidates,
    to_records,
    write_candidates,
)
from knnmt.decode.forced import forced_decode
from knnmt.decode.nucleus import nucleus, nucleus_sample
from knnmt.decode.pipeline import (
    DecodeConfig,
    DecoderKind,
    DistributionSource,
    KnnPipeline,
    StreamKey,
)

logger = logging.getLogger(__name__)

DECODERS = {
    DecoderKind.BEAM: beam_search,
    DecoderKind.DBS: diverse_beam_search,
    DecoderKind.NUCLEUS: nucleus_sample,
}


def decode(
    distributions: DistributionSource,
    config: DecodeConfig,
    source: Sequence[int],
    sentence: int = 0,
) -> CandidateList:
    return DECODERS[config.decoder](distributions, config, source, sentence)


def decode_corpus(
    distributions: DistributionSource,
    config: DecodeConfig,
    sources: Sequence[Sequence[int]],
    workers: int = 1,
) -> list[CandidateList]:
    """
    Decode every sentence. Results are in input order and do not depend on `workers`:
    every random draw is keyed by the sentence index.
    """

    def run(indexed: tuple[int, Sequence[int]]) -> CandidateList:
        sentence, source = indexed
        return decode(distributions, config, source, sentence)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, enumerate(sources)))
    else:
        results = [run(item) for item in enumerate(sources)]

    padded = sum(1 for candidates in results if candidates.padded)
    fallbacks = getattr(distributions, "fallbacks", 0)
    logger.info(
        "Decoded %d sentences with %s (N=%d); %d padded lists, %d base-model fallbacks",
        len(results),
        config.decoder,
        config.beam_size,
        padded,
        fallbacks,
    )
    return results


def forced_decode_corpus(
    distributions: DistributionSource,
    sources: Sequence[Sequence[int]],
    targets: Sequence[Sequence[int]],
) -> list[float]:
    return [
        forced_decode(distributions, source, target, sentence)
        for sentence, (source, target) in enumerate(zip(sources, targets, strict=True))
    ]


__all__ = [
    "CandidateList",
    "CandidateRecord",
    "CandidatesFile",
    "DecodeConfig",
    "DecoderKind",
    "DistributionSource",
    "Hypothesis",
    "KnnPipeline",
    "StreamKey",
    "beam_search",
    "decode",
    "decode_corpus",
    "diverse_beam_search",
    "forced_decode",
    "forced_decode_corpus",
    "group_sizes",
    "nucleus",
    "nucleus_sample",
    "read_candidates",
    "to_records",
    "write_candidates",
]
