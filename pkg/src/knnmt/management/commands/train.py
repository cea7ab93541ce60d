from typing import Any

from knnmt.management.base import RunCommand
from knnmt.runs import train


class Command(RunCommand):
    help = "Train the count-based toy model on the training split"

    def handle(self, *args: Any, **options: Any) -> None:
        config = self.run_config(options)
        model = train(config)
        self.stdout.write(
            self.style.SUCCESS(
                f"Trained model with {len(model.counts)} contexts, "
                f"{len(model.vocab_src)} source and {len(model.vocab_tgt)} target types: "
                f"{config.output.model}"
            )
        )
