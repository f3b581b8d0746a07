"""`fit eval`: score saved FiLM parameters on a held-out set."""

import logging
from pathlib import Path

from src.backbones.film import FilmParams, load_film
from src.data.dataset import load_csv
from src.episodic.evaluation import evaluate, evaluate_model
from src.episodic.trainer import TrainConfig, embed
from src.heads.naive_bayes import load_cache
from src.heads.statistics import CovarianceWeights, load_covariance_weights

from .common import RunStep, write_json

logger = logging.getLogger(__name__)


class EvalStep(RunStep):
    """Evaluate a saved cache, or rebuild the head from a support set.

    With `run.cache_path` the stored cache is scored directly; otherwise the
    head is configured from `data` under the saved ψ and e (identity ψ and
    initial e when no blob is given).
    """

    @property
    def name(self) -> str:
        return "eval"

    @property
    def description(self) -> str:
        return "Evaluate FiLM parameters and a Naive Bayes head on held-out data."

    def validate(self) -> bool:
        if not super().validate():
            return False
        if self.path_option("test") is None:
            logger.error("eval needs a held-out set (--test)")
            return False
        if self.options.cache_path is None and self.path_option("data") is None:
            logger.error("eval needs a support set (--data) or a saved cache (--cache)")
            return False
        if self.options.variant == "linear":
            logger.error("eval scores Naive Bayes heads; the linear report comes from finetune")
            return False
        for value in (self.options.film_path, self.options.weights_path, self.options.cache_path):
            if value is not None and not Path(value).exists():
                logger.error(f"Input not found: {value}")
                return False
        return True

    def run(self) -> int:
        if not self.validate():
            return 1

        test = load_csv(self.path_option("test"))
        spec = self.backbone_spec(test.dim)
        backbone = spec.build()
        options = self.options
        if options.film_path is not None:
            psi = load_film(options.film_path)
        else:
            psi = FilmParams.identity(backbone.film_widths())

        if options.cache_path is not None:
            cache = load_cache(options.cache_path)
            report = evaluate(cache, embed(backbone, test.features, psi), test.labels)
        else:
            if options.weights_path is not None:
                weights = load_covariance_weights(options.weights_path)
            else:
                weights = CovarianceWeights.initial()
            use_prior = self.section(TrainConfig, "train").use_prior
            support = load_csv(self.path_option("data"))
            report = evaluate_model(
                support, test, backbone, psi, weights, options.variant, use_prior=use_prior
            )

        with self.tracker() as tracker:
            tracker.log_params(self.config)
            tracker.log_metrics({"test_accuracy": report.accuracy})
        write_json(report.to_record(), self.out_dir / "report.json")
        self.write_run_files(0, {"backbone": spec.to_dict()})
        logger.info(f"Accuracy {report.accuracy:.4f}, macro {report.macro_accuracy:.4f}")
        return 0
