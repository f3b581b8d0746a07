"""`fit synth`: write the synthetic channel-distortion benchmark."""

import logging

from src.backbones.film import save_film
from src.backbones.spec import BackboneSpec, save_backbone_spec
from src.data.dataset import save_csv
from src.data.synth import SynthSpec, generate_synth

from .common import RunStep

logger = logging.getLogger(__name__)


class SynthStep(RunStep):
    """Writes train.csv, test.csv, the oracle FiLM blob and a matching
    identity-with-film backbone spec."""

    @property
    def name(self) -> str:
        return "synth"

    @property
    def description(self) -> str:
        return "Generate a synthetic dataset with a per-channel affine distortion."

    def run(self) -> int:
        spec = self.section(SynthSpec, "synth")
        result = generate_synth(spec)
        backbone = BackboneSpec(kind="identity-with-film", input_dim=spec.latent_dim)

        save_csv(result.train, self.out_dir / "train.csv")
        save_csv(result.test, self.out_dir / "test.csv")
        save_film(result.oracle_film, self.out_dir / "oracle_film.bin")
        save_backbone_spec(backbone, self.out_dir / "backbone.json")
        self.write_run_files(spec.seed, {"backbone": backbone.to_dict()})

        logger.info(f"Synthetic data written to {self.out_dir}")
        return 0
