from argparse import ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings

from knnmt.config import load_sweep_spec
from knnmt.management.base import KnnMtCommand
from knnmt.sweep import format_csv, plot, run_sweep, trend


class Command(KnnMtCommand):
    help = "Run a grid of configurations and tabulate diversity against quality"

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--spec", type=Path, required=True, help="Sweep specification (TOML).")
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="Override a value of the sweep specification, e.g. `base.decode.k=8`.",
        )
        parser.add_argument(
            "--out",
            type=Path,
            help="Write the CSV here instead of standard output.",
        )
        parser.add_argument("--plot", type=Path, help="Also draw DP against BLEU@N as SVG.")
        parser.add_argument(
            "--trend",
            metavar="AXIS",
            help="Report the rank correlation between this numeric axis and DP.",
        )
        parser.add_argument(
            "--workers",
            type=int,
            default=settings.SWEEP_WORKERS,
            help="Processes running sweep points in parallel.",
        )

    def handle(self, *args: Any, **options: Any) -> None:
        spec = load_sweep_spec(
            options["spec"], options["overrides"], base=Path(settings.DATA_DIR)
        )
        rows = run_sweep(
            spec, settings.SWEEP_MAX_POINTS, options["workers"], settings.NUMERIC_TOLERANCE
        )

        table = format_csv(spec, rows)
        if options["out"]:
            options["out"].parent.mkdir(parents=True, exist_ok=True)
            options["out"].write_text(table, encoding="utf-8")
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(rows)} rows: {options['out']}"))
        else:
            self.stdout.write(table, ending="")

        if options["plot"]:
            options["plot"].parent.mkdir(parents=True, exist_ok=True)
            plot(options["plot"], rows)
            self.stdout.write(f"Plotted {options['plot']}")

        if options["trend"]:
            axis = options["trend"]
            if axis not in spec.axes:
                self.stderr.write(f"No axis {axis!r} in the sweep; skipping the trend")
            else:
                self.stdout.write(f"Spearman rho between {axis} and DP: {trend(rows, axis):.3f}")
