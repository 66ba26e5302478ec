"""Binary dump format, stack IO, and the synthetic generator."""

from .format import read_tensor, write_tensor
from .stack import LayerStack, make_manifest, read_stack, write_stack
from .synthetic import SyntheticSpec, attention_for_span, default_span_profile, generate_synthetic

__all__ = [
    "LayerStack",
    "SyntheticSpec",
    "attention_for_span",
    "default_span_profile",
    "generate_synthetic",
    "make_manifest",
    "read_stack",
    "read_tensor",
    "write_stack",
    "write_tensor",
]
