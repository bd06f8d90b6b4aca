"""Python bindings for the cjscore engine."""

import json as _json

from ._core import (  # noqa: F401
    AuthError,
    BackendUnavailable,
    BTEstimate,
    DegenerateSpread,
    DisconnectedGraph,
    Error,
    IngestError,
    InvalidArgument,
    OutOfScale,
    ParseFailure,
    SeparationError,
    StoreError,
    TieResponse,
    build_cj_prompt,
    classify_cj_response,
    fit_bradley_terry,
    mann_whitney_u,
    nearest_scale_value,
    normalize_minmax,
    normalize_rank,
    parse_score_response,
    predict_prob,
    qwk,
    random_k_pairs,
    round_robin_pairs,
    spearman_rho,
    store_summary,
    stratified_sample,
    transform_to_scale,
    wilcoxon_signed_rank,
)
from ._core import _run_simulation_json

__version__ = "0.1.0"


def run_simulation(n=30, lambda_spec="linspace:-2:2", rounds=5, seed=1, mode="sample",
                   scale=(0, 1, 2, 3), pseudo_count=0.1, workers=1):
    """Simulated judge end to end; returns the recovery report as a dict."""
    return _json.loads(_run_simulation_json(n, lambda_spec, rounds, seed, mode, list(scale), pseudo_count, workers))

