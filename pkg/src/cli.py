#!/usr/bin/env python3
"""fit - FiLM Transfer experiments from the command line.

Usage:
    fit synth --out-dir runs/synth --num-classes 10 --distortion-scale 5
    fit finetune --data runs/synth/train.csv --test runs/synth/test.csv --variant lda --shots 5
    fit eval --data train.csv --test test.csv --film runs/ft/film.bin --weights runs/ft/weights.bin
    fit fedsim --config configs/fedsim.yaml --ladder --seeds 3
    fit fedsim --ledger-only --psi-count 11648 --rounds 60 --clients-per-round 5
    fit paramcount lda 10 2048 11648
    fit filmstats runs/ft/film.bin --out-dir runs/ft

Every flag that changes a computation mirrors a config key (`--learning-rate`
is `train.learning_rate` for finetune); flags override the --config file.
Library errors are printed to stderr as one JSON object and exit with 1.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from src.backbones.spec import read_backbone_record
from src.core.errors import FitError
from src.core.interfaces import PipelineStep
from src.episodic.trainer import SPLIT_MODES
from src.fed.config import ALGORITHMS
from src.heads.accounting import ACCOUNTING_VARIANTS
from src.steps import STEPS, FilmstatsStep, ParamcountStep
from src.steps.common import VARIANTS
from src.utils.config import TOP_LEVEL_KEYS, apply_overrides, load_config
from src.utils.log_setup import setup_logging

logger = logging.getLogger(__name__)

# Positional/flag destinations that are not config keys.
_NON_CONFIG = {"command", "config", "backbone_path", "params", "as_json", "reference_params"}


def positive_int(value: str) -> int:
    number = int(value)
    if number <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return number


def _toggle(parser: argparse.ArgumentParser, flag: str, dest: str, help: str) -> None:
    parser.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction, help=help)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML/JSON/TOML config or a run manifest.json")
    common.add_argument("--out-dir", dest="out_dir", type=str, help="Output directory")
    common.add_argument(
        "--log-level", dest="log_level", type=str, help="Log level (default: $FIT_LOG or INFO)"
    )
    common.add_argument("--seed", dest="seed", type=int, help="Seed for every seeded section")
    _toggle(common, "--mlflow", "tracking.mlflow", "Log params/metrics/artifacts to MLflow")
    common.add_argument("--experiment-name", dest="tracking.experiment", type=str)
    return common


def _data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", dest="data", type=str, help="Training CSV (default: synthetic)")
    parser.add_argument("--test", dest="test", type=str, help="Held-out CSV")
    parser.add_argument(
        "--backbone", dest="backbone_path", type=str, help="Backbone spec JSON (see `fit synth`)"
    )


def _synth_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthetic data")
    group.add_argument("--num-classes", dest="synth.num_classes", type=int)
    group.add_argument("--latent-dim", dest="synth.latent_dim", type=int)
    group.add_argument("--separation", dest="synth.separation", type=float)
    group.add_argument("--class-std", dest="synth.class_std", type=float)
    group.add_argument("--distortion-scale", dest="synth.distortion_scale", type=float)
    group.add_argument("--train-shots", dest="synth.train_shots", type=int)
    group.add_argument("--test-shots", dest="synth.test_shots", type=int)


def _train_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--variant", dest="run.variant", choices=VARIANTS)
    group.add_argument("--shots", dest="run.shots", type=int, help="Keep N examples per class")
    group.add_argument("--learning-rate", dest="train.learning_rate", type=float)
    group.add_argument("--iterations", dest="train.iterations", type=int)
    group.add_argument("--support-set-size", dest="train.support_set_size", type=int)
    group.add_argument("--split-mode", dest="train.split_mode", choices=SPLIT_MODES)
    group.add_argument("--no-split-threshold", dest="train.no_split_threshold", type=int)
    group.add_argument("--pre-shuffle-seed", dest="train.pre_shuffle_seed", type=int)
    _toggle(group, "--stop-gradient", "train.stop_gradient", "Detach support embeddings")
    _toggle(group, "--train-weights", "train.train_weights", "Learn covariance weights e")
    _toggle(group, "--use-prior", "train.use_prior", "Add log priors to ProtoNets logits")
    _toggle(group, "--compact-lda", "run.compact_lda", "Store LDA in its compact form")
    _toggle(group, "--train-film", "run.train_film", "Linear variant: also train FiLM")
    _toggle(group, "--progress", "train.show_progress", "Show a progress bar")


def _fed_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("federated")
    group.add_argument("--num-clients", dest="fed.num_clients", type=int)
    group.add_argument("--classes-per-client", dest="fed.classes_per_client", type=int)
    group.add_argument("--shots-per-class", dest="fed.shots_per_class", type=int)
    group.add_argument("--rounds", dest="fed.rounds", type=int)
    group.add_argument("--clients-per-round", dest="fed.clients_per_round", type=int)
    group.add_argument("--local-steps", dest="fed.local_steps", type=int)
    group.add_argument("--learning-rate", dest="fed.learning_rate", type=float)
    group.add_argument("--lr-decay", dest="fed.lr_decay", type=float)
    group.add_argument("--decay-every", dest="fed.decay_every", type=int)
    group.add_argument("--algorithm", dest="fed.algorithm", choices=ALGORITHMS)
    group.add_argument("--mu", dest="fed.mu", type=float, help="FedProx proximal weight")
    group.add_argument("--n-jobs", dest="fed.n_jobs", type=int, help="Clients trained in parallel")
    group.add_argument("--support-set-size", dest="fed.support_set_size", type=int)
    group.add_argument("--split-mode", dest="fed.split_mode", choices=SPLIT_MODES)
    group.add_argument("--eval-every", dest="fed.eval_every", type=int)
    group.add_argument("--upper-bound-steps", dest="fed.upper_bound_steps", type=int)
    group.add_argument(
        "--lower-bound-steps",
        dest="fed.lower_bound_steps",
        type=int,
        help="Per-client steps of the lower bound (default: expected participant steps)",
    )
    _toggle(group, "--share-examples", "fed.share_examples", "Clients may hold the same example")
    _toggle(group, "--weighted-prototypes", "fed.weighted_prototypes", "Count-weighted averaging")
    _toggle(group, "--progress", "fed.show_progress", "Show a progress bar")
    _toggle(group, "--ladder", "run.ladder", "Also run the upper and lower bounds")
    group.add_argument("--seeds", dest="run.num_seeds", type=int, help="Repeat over N seeds")

    ledger = parser.add_argument_group("communication ledger")
    _toggle(ledger, "--ledger-only", "run.ledger_only", "Only account for communication")
    ledger.add_argument("--psi-count", dest="run.psi_count", type=int)
    ledger.add_argument("--reference-classes", dest="run.reference_classes", type=int)
    ledger.add_argument("--embedding-dim", dest="run.embedding_dim", type=int)
    ledger.add_argument("--backbone-params", dest="run.backbone_params", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fit", description="FiLM Transfer experiments")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    synth = subparsers.add_parser("synth", parents=[common], help="Generate synthetic data")
    _synth_args(synth)

    finetune = subparsers.add_parser("finetune", parents=[common], help="Episodic fine-tuning")
    _data_args(finetune)
    _synth_args(finetune)
    _train_args(finetune)

    evaluate = subparsers.add_parser("eval", parents=[common], help="Evaluate saved parameters")
    _data_args(evaluate)
    evaluate.add_argument("--variant", dest="run.variant", choices=VARIANTS[:-1])
    evaluate.add_argument("--film", dest="run.film_path", type=str, help="FiLM blob")
    evaluate.add_argument("--weights", dest="run.weights_path", type=str, help="Weights blob")
    evaluate.add_argument("--cache", dest="run.cache_path", type=str, help="Classifier cache blob")
    _toggle(evaluate, "--use-prior", "train.use_prior", "Add log priors to ProtoNets logits")

    fedsim = subparsers.add_parser("fedsim", parents=[common], help="Federated simulation")
    _data_args(fedsim)
    _synth_args(fedsim)
    _fed_args(fedsim)

    paramcount = subparsers.add_parser(
        "paramcount", parents=[common], help="Shared/updateable parameter counts"
    )
    paramcount.add_argument("variant", choices=ACCOUNTING_VARIANTS)
    paramcount.add_argument("num_classes", type=positive_int, help="C")
    paramcount.add_argument("dim", type=positive_int, help="Embedding dimension d_b")
    paramcount.add_argument("psi_count", type=positive_int, help="FiLM parameter count")
    paramcount.add_argument("--backbone-params", dest="reference_params", type=positive_int)
    paramcount.add_argument("--json", dest="as_json", action="store_true")

    filmstats = subparsers.add_parser(
        "filmstats", parents=[common], help="Per-layer FiLM magnitude quantiles"
    )
    filmstats.add_argument("params", type=str, help="FiLM blob written by finetune or fedsim")
    return parser


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Flag values keyed by their config path; unset flags are None and skipped."""
    overrides = {}
    for key, value in vars(args).items():
        if key in _NON_CONFIG:
            continue
        if "." in key or key in TOP_LEVEL_KEYS:
            overrides[key] = value
    return overrides


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    config = load_config(args.config) if args.config else {}
    if getattr(args, "backbone_path", None):
        config = {**config, "backbone": read_backbone_record(args.backbone_path)}
    return apply_overrides(config, collect_overrides(args))


def make_step(args: argparse.Namespace, config: dict[str, Any]) -> PipelineStep:
    if args.command == "paramcount":
        step = ParamcountStep(config)
        step.variant = args.variant
        step.num_classes = args.num_classes
        step.dim = args.dim
        step.psi_count = args.psi_count
        if args.reference_params is not None:
            step.backbone_params = args.reference_params
        step.as_json = args.as_json
        return step
    if args.command == "filmstats":
        step = FilmstatsStep(config)
        step.params_path = Path(args.params)
        return step
    return STEPS[args.command](config)


def report_error(error: Exception) -> None:
    if isinstance(error, FitError):
        record = error.to_record()
    else:
        record = {"error": "IoError", "message": str(error)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve(args)
    except (FitError, OSError) as e:
        report_error(e)
        return 1
    try:
        setup_logging(config.get("log_level"))
    except ValueError as e:
        parser.error(str(e))

    try:
        step = make_step(args, config)
        logger.info(f"Running {step.name}: {step.description}")
        return step.run()
    except (FitError, OSError) as e:
        report_error(e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
