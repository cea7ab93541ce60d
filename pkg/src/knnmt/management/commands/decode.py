from argparse import ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings

from knnmt.management.base import RunCommand
from knnmt.runs import (
    decode_test_set,
    forced_logliks,
    load_artifacts,
    write_decoded,
    write_logliks,
)


class Command(RunCommand):
    help = "Decode the test split into N-best candidate lists, or score references by forced decoding"

    def add_arguments(self, parser: ArgumentParser) -> None:
        super().add_arguments(parser)
        parser.add_argument(
            "--out",
            type=Path,
            help="Output file. Defaults to `candidates.jsonl` in the output directory, "
            "or `logliks.<refs>.jsonl` with `--forced-refs`.",
        )
        parser.add_argument(
            "--forced-refs",
            type=Path,
            help="Write forced-decoding log-likelihoods of these references instead of decoding.",
        )
        parser.add_argument(
            "--workers",
            type=int,
            default=settings.DECODE_WORKERS,
            help="Threads decoding sentences in parallel.",
        )

    def handle(self, *args: Any, **options: Any) -> None:
        config = self.run_config(options)
        artifacts = load_artifacts(config)

        refs: Path | None = options["forced_refs"]
        if refs is not None:
            out = options["out"] or config.output.dir / f"logliks.{refs.stem}.jsonl"
            logliks = forced_logliks(config, artifacts, refs)
            write_logliks(out, logliks)
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(logliks)} log-likelihoods: {out}"))
            return

        out = options["out"] or config.output.candidates
        pairs, candidates = decode_test_set(config, artifacts, options["workers"])
        write_decoded(config, artifacts, out, pairs, candidates)
        self.stdout.write(
            self.style.SUCCESS(f"Wrote {len(candidates)} candidate lists: {out}")
        )
