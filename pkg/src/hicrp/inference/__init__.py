"""Posterior inference for SICRP and HICRP models."""

from .coag import (enumerate_proposals, exact_log_marg_coag, log_f_coag,
                   log_marg_coag_estimate, log_q_closed_form, propose_coag_aux,
                   record_from_sequence)
from .data import DataSummary
from .hicrp import HICRPSampler, pm_mh_hicrp
from .mcmc import TRACE_COLUMNS, ChainTrace, MCMCConfig, read_traces, write_traces
from .sicrp import SICRPSampler, log_post_sicrp, mh_sicrp

__all__ = [
    "ChainTrace", "DataSummary", "HICRPSampler", "MCMCConfig", "SICRPSampler",
    "TRACE_COLUMNS", "enumerate_proposals", "exact_log_marg_coag", "log_f_coag",
    "log_marg_coag_estimate", "log_post_sicrp", "log_q_closed_form", "mh_sicrp",
    "pm_mh_hicrp", "propose_coag_aux", "read_traces", "record_from_sequence",
    "write_traces",
]
