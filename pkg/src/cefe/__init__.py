"""Pseudo-data generation, SCE-trained fluency classification and evaluation
metrics for Chinese essay fluency evaluation."""

__version__ = "0.1.0"

from .errors import CefeError, ValidationError
from .types import Essay, FluencyLabel, Sentence, load_dataset, save_dataset, segment_sentences

__all__ = [
    "CefeError",
    "ValidationError",
    "Essay",
    "FluencyLabel",
    "Sentence",
    "load_dataset",
    "save_dataset",
    "segment_sentences",
]
