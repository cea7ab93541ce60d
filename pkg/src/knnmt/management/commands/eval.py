from argparse import ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings

from knnmt.decode import read_candidates
from knnmt.decode.candidates import parse_logliks
from knnmt.management.base import KnnMtCommand
from knnmt.metrics import ConstantRateScorer, EvalBundle, FluencyScorer, ScoreTable, check_report
from knnmt.runs import bundle_from_candidates, evaluate
from knnmt.toymodel import SentencePair, read_corpus


class Command(KnnMtCommand):
    help = "Score candidate lists against references and write a metric report"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("candidates", type=Path, help="Candidates file written by `decode`.")
        parser.add_argument(
            "--refs",
            type=Path,
            required=True,
            help="Reference corpus the candidates were decoded from.",
        )
        parser.add_argument(
            "--other",
            type=Path,
            help="Candidates of a second system; adds MergedBLEU.",
        )
        parser.add_argument(
            "--base",
            type=Path,
            help="Candidates of the unperturbed system; adds DEQ.",
        )
        parser.add_argument(
            "--logliks",
            type=Path,
            nargs=2,
            metavar=("FIRST", "SECOND"),
            help="Forced-decoding log-likelihoods of two references of the same sources; adds MADLL.",
        )
        fluency = parser.add_mutually_exclusive_group()
        fluency.add_argument(
            "--scores",
            type=Path,
            help="JSON lines of `{id, rank, score}` language-model log-likelihoods; adds SPLL.",
        )
        fluency.add_argument(
            "--constant-rate",
            type=float,
            help="Score every token with this log-likelihood instead of reading `--scores`.",
        )
        parser.add_argument(
            "--out",
            type=Path,
            help="Write the report here instead of standard output.",
        )

    def _bundle(self, path: Path, references: list[SentencePair]) -> EvalBundle:
        return bundle_from_candidates(read_candidates(path), references)

    def handle(self, *args: Any, **options: Any) -> None:
        references = read_corpus(options["refs"])
        bundle = self._bundle(options["candidates"], references)

        other = self._bundle(options["other"], references) if options["other"] else None
        base = self._bundle(options["base"], references) if options["base"] else None

        logliks = None
        if options["logliks"]:
            first, second = (
                parse_logliks(path.read_text(encoding="utf-8")) for path in options["logliks"]
            )
            logliks = (first, second)

        scorer: FluencyScorer | None = None
        if options["scores"]:
            scorer = ScoreTable.read(options["scores"], bundle)
        elif options["constant_rate"] is not None:
            scorer = ConstantRateScorer(options["constant_rate"])

        report = evaluate(bundle, other=other, base=base, logliks=logliks, scorer=scorer)
        check_report(report, settings.NUMERIC_TOLERANCE)

        document = report.model_dump_json(indent=2) + "\n"
        if options["out"]:
            options["out"].parent.mkdir(parents=True, exist_ok=True)
            options["out"].write_text(document, encoding="utf-8")
            self.stdout.write(self.style.SUCCESS(f"Wrote report: {options['out']}"))
        else:
            self.stdout.write(document, ending="")
