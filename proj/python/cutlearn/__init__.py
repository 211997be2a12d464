"""Heterogeneous treatment effects for censored survival and competing-risk outcomes."""

import json

from ._core import ConfigError, __version__, bench, evaluate, normalize_config, simulate, true_hte
from ._core import fit as _fit

__all__ = ["ConfigError", "__version__", "bench", "evaluate", "fit", "normalize_config", "simulate", "true_hte"]


def fit(config, x, a, time, status):
    """Fit the configured learners. `config` is a dict or a JSON string."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return _fit(config, x, a, time, status)
