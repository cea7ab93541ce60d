from argparse import ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings

from knnmt.config import validate
from knnmt.management.base import KnnMtCommand
from knnmt.runs import write_generated_corpus
from knnmt.toymodel import CorpusSpec


class Command(KnnMtCommand):
    help = "Generate the synthetic parallel corpus: train, valid and test splits plus a second test reference"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--seed", type=int, required=True)
        parser.add_argument("--n-train", type=int, default=500)
        parser.add_argument("--n-valid", type=int, default=50)
        parser.add_argument("--n-test", type=int, default=100)
        parser.add_argument(
            "--out",
            type=Path,
            help="Output directory. Defaults to `corpus` under `DATA_DIR`.",
        )

    def handle(self, *args: Any, **options: Any) -> None:
        spec = validate(
            CorpusSpec,
            {
                "seed": options["seed"],
                "n_train": options["n_train"],
                "n_valid": options["n_valid"],
                "n_test": options["n_test"],
            },
        )
        out = options["out"] or Path(settings.DATA_DIR) / "corpus"
        for path in write_generated_corpus(spec, out):
            self.stdout.write(f"Wrote {path}")
