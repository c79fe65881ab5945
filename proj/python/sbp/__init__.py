"""Sparse linear branch prediction toolkit."""

import json

from . import _core
from ._core import (
    ConfigError,
    HintError,
    SparseModel,
    Trace,
    TraceError,
    cli,
    correlated_layout,
    fit,
    gen_correlated,
    gen_loop,
    quantize_value,
    read_trace,
    run_online,
    storage_bits,
    train,
    write_trace,
)

__all__ = [
    "ConfigError",
    "HintError",
    "SparseModel",
    "Trace",
    "TraceError",
    "cli",
    "correlated_layout",
    "fit",
    "gen_correlated",
    "gen_loop",
    "quantize_value",
    "read_trace",
    "run_online",
    "run_phase",
    "simulate",
    "storage_bits",
    "train",
    "write_trace",
]


def simulate(trace, baseline="tage-lite", gh=512, lh=512, hints=None):
    """Phase report dict with "baseline" and, when hints are given, "coupled"."""
    return json.loads(_core.simulate(trace, baseline, gh, lh, hints))


def run_phase(trace, budget_kb=2.0, policy="relative", q="3.4", gh=512, lh=512, baseline="tage-lite",
              min_occurrences=10000, hint_dir=None):
    """Full offline pipeline for one trace; returns the phase report dict."""
    return json.loads(_core.run_phase(trace, budget_kb, policy, q, gh, lh, baseline, min_occurrences, hint_dir))
