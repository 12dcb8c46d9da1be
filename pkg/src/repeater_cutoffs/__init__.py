"""Rates, fidelities and secret-key rates of repeater chains with link cutoffs."""
from .model import (
    ChainParams,
    ChainPerformance,
    CutoffPolicy,
    Deterministic,
    DeterministicE2E,
    Probabilistic,
    fidelity_from_werner,
    lambda_from_tau,
    skf,
    skr,
)

__version__ = "0.1.0"

__all__ = [
    "ChainParams",
    "ChainPerformance",
    "CutoffPolicy",
    "Deterministic",
    "DeterministicE2E",
    "Probabilistic",
    "fidelity_from_werner",
    "lambda_from_tau",
    "skf",
    "skr",
    "__version__",
]
