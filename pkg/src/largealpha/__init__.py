"""Empirical entropy over large alphabets, quantized Markov-model
compression and incompressibility-threshold experiments."""

from .entropy_core import (
    ContextTable,
    Distribution,
    MarkovModel,
    Sequence,
    count_contexts,
    empirical_entropy,
    empirical_markov_model,
    entropy_profile,
    kl_divergence,
    self_information,
    zeroth_order_entropy,
)

__all__ = [
    "ContextTable",
    "Distribution",
    "MarkovModel",
    "Sequence",
    "count_contexts",
    "empirical_entropy",
    "empirical_markov_model",
    "entropy_profile",
    "kl_divergence",
    "self_information",
    "zeroth_order_entropy",
]

__version__ = "0.1.0"
