"""Samplers: blocked/naive Gibbs with pseudo-marginal updates, PMMH reference."""

from .adapt import ProposalAdapter, adapt_proposal
from .conjugate import draw_eta_conjugate, eta_posterior_params
from .gibbs import (
    AdaptConfig,
    ChainOutput,
    GibbsConfig,
    UnitEvaluator,
    mh_log_accept,
    run_gibbs,
    update_common_block,
    update_unit_block,
)
from .reference import run_pmmh_reference

__all__ = [
    "AdaptConfig",
    "ChainOutput",
    "GibbsConfig",
    "ProposalAdapter",
    "UnitEvaluator",
    "adapt_proposal",
    "draw_eta_conjugate",
    "eta_posterior_params",
    "mh_log_accept",
    "run_gibbs",
    "run_pmmh_reference",
    "update_common_block",
    "update_unit_block",
]
