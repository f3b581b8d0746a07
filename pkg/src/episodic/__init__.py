# Episodic module
from src.episodic.evaluation import (
    EvaluationReport,
    evaluate,
    evaluate_linear,
    evaluate_model,
)
from src.episodic.linear_baseline import LinearResult, finetune_linear
from src.episodic.sampling import (
    MAX_QUERY_TOTAL,
    MIN_WAY,
    Task,
    full_task,
    limit_shots,
    sample_task,
    split_dataset,
)
from src.episodic.trainer import (
    EpisodicTrainer,
    FinetuneResult,
    Prediction,
    TrainConfig,
    embed,
    episode_loss,
    finetune,
    fit_head,
    predict,
    single_shot,
)

__all__ = [
    "EpisodicTrainer",
    "EvaluationReport",
    "FinetuneResult",
    "LinearResult",
    "MAX_QUERY_TOTAL",
    "MIN_WAY",
    "Prediction",
    "Task",
    "TrainConfig",
    "embed",
    "episode_loss",
    "evaluate",
    "evaluate_linear",
    "evaluate_model",
    "finetune",
    "finetune_linear",
    "fit_head",
    "full_task",
    "limit_shots",
    "predict",
    "sample_task",
    "single_shot",
    "split_dataset",
]
