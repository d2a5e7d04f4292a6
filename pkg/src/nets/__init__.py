"""Generators, classifier trunks and the multi-head continual model."""

from src.nets.checkpoint import load_classifier, load_generators, save_classifier, save_generators
from src.nets.classifier import (
    TRUNKS,
    MultiHeadClassifier,
    build_classifier,
    feature_taps,
    frozen_copy,
)
from src.nets.generator import ArchitectureError, GeneratorNet, GeneratorPair, generator_forward

__all__ = [
    "TRUNKS",
    "ArchitectureError",
    "GeneratorNet",
    "GeneratorPair",
    "MultiHeadClassifier",
    "build_classifier",
    "feature_taps",
    "frozen_copy",
    "generator_forward",
    "load_classifier",
    "load_generators",
    "save_classifier",
    "save_generators",
]
