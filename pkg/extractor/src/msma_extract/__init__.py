"""Model-side exporter for the msma stack format."""

from .extract import extract
from .generate import generate_with_intervention, load_intervention_spec
from .job import ExtractionJob, load_model
from .tiny import build_tiny_decoder

__all__ = [
    "ExtractionJob",
    "build_tiny_decoder",
    "extract",
    "generate_with_intervention",
    "load_intervention_spec",
    "load_model",
]
