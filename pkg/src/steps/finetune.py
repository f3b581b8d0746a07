"""`fit finetune`: episodic FiLM fine-tuning on one downstream dataset.

Outputs: film.bin (ψ), weights.bin (e), cache.bin (head configured from all
of D), trace.jsonl, timings.jsonl and, when a held-out set is available,
report.json next to baseline_report.json (identity ψ, initial e). The
linear variant writes linear_head.bin instead of weights.bin/cache.bin.
"""

import logging

from src.backbones.film import FilmParams, save_film
from src.backbones.spec import save_backbone_spec
from src.episodic.evaluation import evaluate, evaluate_linear
from src.episodic.linear_baseline import finetune_linear
from src.episodic.sampling import limit_shots
from src.episodic.trainer import EpisodicTrainer, TrainConfig, embed, fit_head
from src.heads.linear import save_linear_head
from src.heads.naive_bayes import save_cache
from src.heads.statistics import CovarianceWeights, save_covariance_weights
from src.utils.manifest_io import write_manifest

from .common import RunStep, write_json

logger = logging.getLogger(__name__)


class FinetuneStep(RunStep):
    """Fine-tune ψ (and e) on `data`, or on generated synthetic data."""

    @property
    def name(self) -> str:
        return "finetune"

    @property
    def description(self) -> str:
        return "Episodic fine-tuning of FiLM parameters with a Naive Bayes head."

    def run(self) -> int:
        if not self.validate():
            return 1

        train_config = self.section(TrainConfig, "train")
        options = self.options
        train, test, _ = self.load_datasets()
        if options.shots is not None:
            train = limit_shots(train, options.shots)
        spec = self.backbone_spec(train.dim)
        backbone = spec.build()
        save_backbone_spec(spec, self.out_dir / "backbone.json")

        with self.tracker() as tracker:
            tracker.log_params(self.config)
            if options.variant == "linear":
                report = self._run_linear(train, test, backbone, train_config, tracker)
            else:
                report = self._run_naive_bayes(train, test, backbone, train_config, tracker)
            if report is not None:
                tracker.log_metrics({"test_accuracy": report["accuracy"]})

        self.write_run_files(train_config.seed, {"backbone": spec.to_dict()})
        logger.info(f"Fine-tuning outputs written to {self.out_dir}")
        return 0

    def _run_naive_bayes(self, train, test, backbone, train_config, tracker) -> dict | None:
        variant = self.options.variant
        result = EpisodicTrainer(backbone, variant, train_config, tracker).train(train)
        classes = train.classes_present()

        def head_for(psi, weights):
            return fit_head(
                train,
                backbone,
                psi,
                weights,
                variant,
                classes,
                use_prior=train_config.use_prior,
                compact_lda=self.options.compact_lda,
            )

        cache = head_for(result.psi, result.weights)
        save_film(result.psi, self.out_dir / "film.bin")
        save_covariance_weights(result.weights, self.out_dir / "weights.bin")
        save_cache(cache, self.out_dir / "cache.bin")
        write_manifest(result.trace, self.out_dir / "trace.jsonl")
        write_manifest(result.timings, self.out_dir / "timings.jsonl")
        tracker.log_artifact(self.out_dir / "film.bin")
        logger.info(f"Split mode: {result.split_mode}, e = {result.weights.as_tuple()}")

        if test is None:
            return None
        report = evaluate(cache, embed(backbone, test.features, result.psi), test.labels)
        identity = FilmParams.identity(backbone.film_widths())
        baseline_cache = head_for(identity, CovarianceWeights.initial())
        baseline = evaluate(baseline_cache, embed(backbone, test.features, identity), test.labels)
        write_json(report.to_record(), self.out_dir / "report.json")
        write_json(baseline.to_record(), self.out_dir / "baseline_report.json")
        logger.info(
            f"Test accuracy {report.accuracy:.4f} (no adaptation: {baseline.accuracy:.4f})"
        )
        return report.to_record()

    def _run_linear(self, train, test, backbone, train_config, tracker) -> dict | None:
        result = finetune_linear(train, backbone, train_config, self.options.train_film, tracker)
        save_film(result.psi, self.out_dir / "film.bin")
        save_linear_head(result.head, self.out_dir / "linear_head.bin")
        write_manifest(result.trace, self.out_dir / "trace.jsonl")

        if test is None:
            return None
        report = evaluate_linear(result.head, test, backbone, result.psi)
        write_json(report.to_record(), self.out_dir / "report.json")
        logger.info(f"Linear head test accuracy {report.accuracy:.4f}")
        return report.to_record()
