from knnmt.metrics.bleu import corpus_bleu, sentence_bleu
from knnmt.metrics.diversity import deq, distinct_ngram_ratio, dp
from knnmt.metrics.fluency import ConstantRateScorer, FluencyScorer, ScoreTable, Stat, spll
from knnmt.metrics.oracle import (
    EvalBundle,
    bleu_at_n,
    med_bleu_at_n,
    merge,
    merged_bleu,
    oracle_picks,
    ref_bleu,
)
from knnmt.metrics.overcorrection import Madll, madll, madll_details
from knnmt.metrics.report import (
    BaseSystem,
    MetricReport,
    build_report,
    check_oracle_bound,
    check_report,
    system_scores,
)

__all__ = [
    "BaseSystem",
    "ConstantRateScorer",
    "EvalBundle",
    "FluencyScorer",
    "Madll",
    "MetricReport",
    "ScoreTable",
    "Stat",
    "bleu_at_n",
    "build_report",
    "check_oracle_bound",
    "check_report",
    "corpus_bleu",
    "deq",
    "distinct_ngram_ratio",
    "dp",
    "madll",
    "madll_details",
    "med_bleu_at_n",
    "merge",
    "merged_bleu",
    "oracle_picks",
    "ref_bleu",
    "sentence_bleu",
    "spll",
    "system_scores",
]
