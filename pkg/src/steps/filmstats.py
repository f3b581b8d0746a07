"""`fit filmstats`: per-layer magnitude quantiles of a saved ψ."""

import csv
import logging
from pathlib import Path

from src.backbones.film import QUANTILE_NAMES, film_magnitude_stats, load_film

from .common import RunStep

logger = logging.getLogger(__name__)


def stats_columns() -> list[str]:
    columns = ["layer", "width"]
    for prefix in ("gamma", "beta"):
        columns.extend(f"{prefix}_{name}" for name in QUANTILE_NAMES)
    return columns


class FilmstatsStep(RunStep):
    """Writes filmstats.csv: one row per FiLM layer, box-plot quantiles of
    |γ − 1| and |β|."""

    @property
    def name(self) -> str:
        return "filmstats"

    @property
    def description(self) -> str:
        return "Summarize FiLM parameter magnitudes per layer."

    def __init__(self, config: dict | None = None) -> None:
        super().__init__(config)
        self.params_path: Path | None = None

    def validate(self) -> bool:
        if self.params_path is None or not self.params_path.exists():
            logger.error(f"FiLM parameter blob not found: {self.params_path}")
            return False
        return True

    def run(self) -> int:
        if not self.validate():
            return 1
        psi = load_film(self.params_path)
        rows = film_magnitude_stats(psi)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        output = self.out_dir / "filmstats.csv"
        with open(output, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=stats_columns(), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        self.write_run_files(0, {"params": str(self.params_path), "widths": list(psi.widths)})
        logger.info(f"Wrote {len(rows)} layer rows to {output}")
        return 0
