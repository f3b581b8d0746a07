"""`fit paramcount`: shared/updateable parameter table."""

import json
import logging

from src.backbones.spec import RESNET50_BACKBONE_PARAMS
from src.core.interfaces import PipelineStep
from src.heads.accounting import REFERENCE_VARIANT, parameter_table

logger = logging.getLogger(__name__)


class ParamcountStep(PipelineStep):
    """Print counts for one variant next to the full fine-tuning reference."""

    @property
    def name(self) -> str:
        return "paramcount"

    @property
    def description(self) -> str:
        return "Count shared and updateable parameters and the relative update size."

    def __init__(self, config: dict | None = None) -> None:
        super().__init__(config)
        self.variant = "lda"
        self.num_classes = 10
        self.dim = 2048
        self.psi_count = 11_648
        self.backbone_params = RESNET50_BACKBONE_PARAMS
        self.as_json = False

    def validate(self) -> bool:
        for name in ("num_classes", "dim", "psi_count", "backbone_params"):
            if getattr(self, name) <= 0:
                logger.error(f"{name} must be positive, got {getattr(self, name)}")
                return False
        return True

    def rows(self) -> list[dict]:
        variants = tuple(dict.fromkeys((self.variant, REFERENCE_VARIANT)))
        table = parameter_table(
            self.num_classes, self.dim, self.psi_count, self.backbone_params, variants
        )
        return [row.to_record() for row in table]

    def run(self) -> int:
        if not self.validate():
            return 1
        rows = self.rows()
        if self.as_json:
            print(json.dumps(rows, indent=2))
            return 0
        print(f"C = {self.num_classes}, d_b = {self.dim}, |psi| = {self.psi_count:,}")
        print(f"{'variant':<11} {'shared':>12} {'updateable':>14} {'rmus':>9}")
        for row in rows:
            print(
                f"{row['variant']:<11} {row['shared']:>12,} {row['updateable']:>14,} "
                f"{row['rmus']:>9.4f}"
            )
        return 0
