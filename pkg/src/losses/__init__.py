"""Training objectives for the generators and the continual learner."""

from src.losses.cl_losses import (
    cl_total_loss,
    layer_similarity_term,
    memory_replay_loss,
    network_similarity_loss,
    pairwise_distances,
)
from src.losses.generator_losses import (
    adversarial_generator_loss,
    class_balance_loss,
    cooperative_diversity_loss,
    distillation_loss,
    generator_total_loss,
    mean_prediction,
    per_sample_l1,
)
from src.losses.report import LOSS_KEYS, LossReport, TrainingLog, read_training_log

__all__ = [
    "LOSS_KEYS",
    "LossReport",
    "TrainingLog",
    "adversarial_generator_loss",
    "class_balance_loss",
    "cl_total_loss",
    "cooperative_diversity_loss",
    "distillation_loss",
    "generator_total_loss",
    "layer_similarity_term",
    "mean_prediction",
    "memory_replay_loss",
    "network_similarity_loss",
    "pairwise_distances",
    "per_sample_l1",
    "read_training_log",
]
