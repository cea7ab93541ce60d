from typing import Any

from knnmt.management.base import RunCommand
from knnmt.runs import build


class Command(RunCommand):
    help = "Build the datastore, the optional inverted-file index and validation distance statistics"

    def handle(self, *args: Any, **options: Any) -> None:
        config = self.run_config(options)
        artifacts = build(config)
        self.stdout.write(
            self.style.SUCCESS(
                f"Built datastore with {len(artifacts.datastore)} entries: {config.output.datastore}"
            )
        )
        if artifacts.index is not None:
            self.stdout.write(
                f"Index with {artifacts.index.n_clusters} clusters: {config.output.index}"
            )
