"""Lag-aware doubly robust off-policy evaluation and learning."""

import io

from ._dolce import (
    DolceError,
    InvalidConfig,
    InvalidInput,
    config_hash,
    ess,
    estimate,
    generate,
    identity_suite,
    ope_sweep_csv,
    opl_sweep_csv,
    softmin_weights,
    true_value,
)

__all__ = [
    "DolceError",
    "InvalidConfig",
    "InvalidInput",
    "config_hash",
    "ess",
    "estimate",
    "generate",
    "identity_suite",
    "ope_sweep",
    "opl_sweep",
    "softmin_weights",
    "true_value",
]


def _frame(text):
    import pandas as pd

    return pd.read_csv(io.StringIO(text))


def ope_sweep(overrides=(), jobs=1):
    """OPE sweep results as a pandas DataFrame."""
    return _frame(ope_sweep_csv(list(overrides), jobs))


def opl_sweep(overrides=(), jobs=1):
    """OPL sweep results as a pandas DataFrame."""
    return _frame(opl_sweep_csv(list(overrides), jobs))
