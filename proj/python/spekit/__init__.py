"""Python bindings for the spekit C++ core."""

import json as _json

from ._spekit import (
    ConfigError,
    Error,
    FitError,
    FormatError,
    G2Params,
    InvalidInput,
    IoError,
    ModelError,
    ThreeLevelRates,
    classify_polarization,
    commands,
    fit_g2,
    fit_polarization,
    fit_saturation,
    g2_exact,
    g2_histogram,
    g2_params_from_rates,
    quantum_efficiency,
    rates_at_power,
    relaxation_rates,
    simulate,
    split_hbt,
    steady_state,
)
from ._spekit import run as _run


def run(command, config=None, out_dir="spekit_out"):
    """Run a pipeline command. `config` is a dict (or JSON text); returns the report dict."""
    text = config if isinstance(config, str) else _json.dumps(config or {})
    return _json.loads(_run(command, text, str(out_dir)))


__all__ = [name for name in dir() if not name.startswith("_")]
