"""Datasets, class-disjoint task streams and raw-data fractions."""

from src.data.datasets import DatasetError, RawDataset, default_latent_dim, load_dataset, make_synthetic
from src.data.tasks import Split, TaskSpec, TaskStream, sample_fraction, split_into_tasks

__all__ = [
    "DatasetError",
    "RawDataset",
    "Split",
    "TaskSpec",
    "TaskStream",
    "default_latent_dim",
    "load_dataset",
    "make_synthetic",
    "sample_fraction",
    "split_into_tasks",
]
