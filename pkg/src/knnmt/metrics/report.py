import logging
from collections.abc import Sequence
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict

from knnmt.errors import InvariantViolation
from knnmt.metrics.diversity import deq, distinct_ngram_ratio, dp
from knnmt.metrics.fluency import FluencyScorer, Stat, spll
from knnmt.metrics.oracle import EvalBundle, bleu_at_n, med_bleu_at_n, merged_bleu, ref_bleu
from knnmt.metrics.overcorrection import madll_details

logger = logging.getLogger(__name__)

PERCENT = 100.0


class MetricReport(BaseModel):
    """
    One system's scores. BLEU-family values and DP are percentages;
    `deq` is `None` when undefined and `merged_bleu`, `madll` and the SPLL columns when not computed.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int
    n_sentences: int
    dp: float | None
    bleu_at_1: float
    bleu_at_n: float
    med_bleu_at_n: float
    ref_bleu: float
    merged_bleu: float | None = None
    deq: float | None = None
    distinct: dict[int, float]
    madll: float | None = None
    madll_excluded: int = 0
    spll_max: float | None = None
    spll_min: float | None = None
    spll_mean: float | None = None


@dataclass(frozen=True)
class BaseSystem:
    """DP and RefBLEU of the system DEQ is measured against, both in [0, 1]."""

    dp: float
    ref_bleu: float


def system_scores(bundle: EvalBundle) -> BaseSystem:
    return BaseSystem(dp=dp(bundle) if bundle.n_best > 1 else 0.0, ref_bleu=ref_bleu(bundle))


def build_report(
    bundle: EvalBundle,
    other: EvalBundle | None = None,
    base: BaseSystem | None = None,
    logliks: tuple[Sequence[float], Sequence[float]] | None = None,
    scorer: FluencyScorer | None = None,
) -> MetricReport:
    n = bundle.n_best
    diversity = dp(bundle) if n > 1 else None
    refbleu = ref_bleu(bundle)
    madll = madll_details(*logliks) if logliks is not None else None
    spll_values = (
        {stat: spll(bundle, scorer, stat) for stat in Stat} if scorer is not None else {}
    )
    return MetricReport(
        n=n,
        n_sentences=len(bundle),
        dp=None if diversity is None else diversity * PERCENT,
        bleu_at_1=bleu_at_n(bundle, 1) * PERCENT,
        bleu_at_n=bleu_at_n(bundle, n) * PERCENT,
        med_bleu_at_n=med_bleu_at_n(bundle, n) * PERCENT,
        ref_bleu=refbleu * PERCENT,
        merged_bleu=None if other is None else merged_bleu(bundle, other) * PERCENT,
        deq=(
            deq(diversity or 0.0, base.dp, refbleu, base.ref_bleu)
            if base is not None
            else None
        ),
        distinct={
            order: distinct_ngram_ratio(bundle.candidates, order)
            for order in (1, 2, 3, 4)
            if any(len(h) >= order for hyps in bundle.candidates for h in hyps)
        },
        madll=None if madll is None else madll.value,
        madll_excluded=0 if madll is None else madll.excluded,
        spll_max=spll_values.get(Stat.MAX),
        spll_min=spll_values.get(Stat.MIN),
        spll_mean=spll_values.get(Stat.MEAN),
    )


def check_oracle_bound(
    bleu_at_1: float, bleu_at_n: float, n: int, tolerance: float, where: str = "report"
) -> None:
    """Oracle selection over more candidates never scores below the top candidate alone."""
    if bleu_at_n < bleu_at_1 - tolerance:
        raise InvariantViolation(
            f"BLEU@{n} ({bleu_at_n}) is below BLEU@1 ({bleu_at_1}) in {where}"
        )


def check_report(report: MetricReport, tolerance: float) -> None:
    check_oracle_bound(report.bleu_at_1, report.bleu_at_n, report.n, tolerance * PERCENT)
