"""Bayesian three-part demand model (access, use, quantity) with a Gibbs sampler."""

import json

from . import _core
from ._core import (
    Chain,
    Error,
    IoError,
    NumericalError,
    ValidationError,
    effective_sample_size,
    normal_cdf,
    normal_quantile,
    risk_index,
    sample_truncated_normal,
    split_varieties,
    tax_per_gram,
    thc_weight,
)

__all__ = [
    "Chain",
    "Error",
    "IoError",
    "NumericalError",
    "ValidationError",
    "diagnose",
    "effective_sample_size",
    "fit",
    "normal_cdf",
    "normal_quantile",
    "predict",
    "risk_index",
    "sample_truncated_normal",
    "simulate",
    "split_varieties",
    "tax_per_gram",
    "thc_weight",
]


def simulate(spec, seed=None):
    """Draw synthetic data. Returns (csv text, column spec dict, truth dict)."""
    text, columns, truth = _core.simulate(json.dumps(spec), seed)
    return text, json.loads(columns), json.loads(truth)


def fit(csv_text, columns, iterations=6000, burn_in=1000, thin=5, seed=1):
    """Run one chain on CSV text described by a column spec dict."""
    return _core.fit(csv_text, json.dumps(columns), iterations, burn_in, thin, seed)


def diagnose(chain):
    return json.loads(_core.diagnose(chain))


def predict(chain, x_access, x_use, x_quantity, legalized=False, simulations=200, seed=1):
    return json.loads(
        _core.predict(chain, x_access, x_use, x_quantity, legalized, simulations, seed)
    )
