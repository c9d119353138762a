"""Pseudo-marginal posterior sampling for a two-level HICRP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._validation import DomainError, check_positive_int
from .coag import exact_log_marg_coag, log_marg_coag_estimate
from .data import DataSummary
from .mcmc import (Adapter, MCMCConfig, Recorder, expit, jittered, log_std_normal, logit,
                   mh_accept, run_chains)
from .sicrp import InitializationError, _as_summary, _SamplerBase, log_eppf_summary, log_gamma_density


@dataclass
class HicrpState:
    """Sampler state on the unconstrained scale plus the retained likelihood estimate."""

    u: np.ndarray
    t: float
    log_marg_estimate: float

    @property
    def params(self):
        return decode(self.u)


def decode(u):
    """Map ``(logit alpha, logit zeta, log vartheta, logit kappa)`` to model parameters.

    ``beta = zeta * alpha``, ``theta = vartheta * kappa`` and
    ``m = ceil(vartheta * (1 - kappa))``.
    """
    alpha, zeta, vartheta, kappa = expit(u[0]), expit(u[1]), math.exp(u[2]), expit(u[3])
    m = max(1, math.ceil(vartheta * (1.0 - kappa) - 1e-12))
    return {"alpha": alpha, "beta": zeta * alpha, "theta": vartheta * kappa, "m": m,
            "zeta": zeta, "vartheta": vartheta, "kappa": kappa}


def encode(alpha, zeta, vartheta, kappa):
    return np.array([logit(alpha), logit(zeta), math.log(vartheta), logit(kappa)])


def _valid(p):
    return (0.0 < p["beta"] < p["alpha"] < 1.0 and p["theta"] > 0
            and p["vartheta"] > 0 and 0.0 < p["kappa"] < 1.0)


def log_target_fixed(p, data: DataSummary):
    """Fine-level EPPF term of the target, with ``t`` integrated out."""
    return log_eppf_summary(data, p["alpha"], p["theta"] + p["m"])


def _marginal(p, data, S, rng, exact):
    if exact:
        return exact_log_marg_coag(data.coarse_counts, p["alpha"], p["beta"], p["theta"],
                                   p["m"])
    return log_marg_coag_estimate(data, p["alpha"], p["beta"], p["theta"], p["m"], S, rng)


def init_hicrp(data: DataSummary):
    return encode(0.5, 0.5, max(1.0, data.k_coarse / 10.0), 0.5)


def _hicrp_chain(data, config, S, exact, chain, rng):
    adapter = Adapter(4, config, target=0.25)
    u = jittered(init_hicrp(data), rng, config.init_jitter)
    p = decode(u)
    while not _valid(p):
        u = jittered(init_hicrp(data), rng, config.init_jitter)
        p = decode(u)
    est = _marginal(p, data, S, rng, exact)
    if not math.isfinite(est):
        raise InitializationError(f"coagulation likelihood estimate is {est} at {p}")
    rec = Recorder(config)
    accepts = 0
    lp = log_target_fixed(p, data) + est + log_std_normal(u)
    for it in range(config.burn_in + config.n_iter):
        prop = adapter.propose(u, rng)
        q = decode(prop)
        accept_prob = 0.0
        if _valid(q):
            lp_fixed = log_target_fixed(q, data) + log_std_normal(prop)
            if lp_fixed > -math.inf:
                est_prop = _marginal(q, data, S, rng, exact)
                accepted, accept_prob = mh_accept(lp_fixed + est_prop - lp, rng)
                if accepted:
                    u, p, est = prop, q, est_prop
                    lp = lp_fixed + est_prop
                    if it >= config.burn_in:
                        accepts += 1
        adapter.update(it, u, accept_prob)
        t = float(rng.gamma(p["theta"] + p["m"]))
        if rec.wants(it):
            rec.record(it, t=t, log_post=lp + log_gamma_density(t, p["theta"] + p["m"]),
                       log_marg_estimate=est, **p)
    return rec.trace(chain, accepts, adapter.step)


def pm_mh_hicrp(data: DataSummary, config: MCMCConfig = None, S=100, random_state=None,
                exact_marginal=False):
    """Pseudo-marginal MH for ``(alpha, beta, theta, m)`` of a two-level HICRP.

    The intractable coagulation likelihood is replaced by an unbiased
    importance-sampling estimate with ``S`` proposals.  The estimate attached
    to the current state is kept until a proposal is accepted.  With
    ``exact_marginal=True`` the exact marginal is used instead, which is only
    feasible for a handful of coarse labels.  The MH step targets the
    posterior with ``t`` integrated out; ``t`` is then drawn exactly from
    ``Gamma(theta + m, 1)`` for the trace.
    """
    config = config or MCMCConfig()
    S = check_positive_int(S, "S")
    if not isinstance(data, DataSummary) or data.coarse_groups is None:
        raise DomainError("pm_mh_hicrp expects paired data")
    return run_chains(lambda c, rng: _hicrp_chain(data, config, S, exact_marginal, c, rng),
                      config, random_state)


class HICRPSampler(_SamplerBase):
    """Pseudo-marginal posterior sampler for a two-level HICRP.

    ``fit(X, y)`` takes the fine interaction set ``X`` and the slot-aligned
    coarse set ``y`` (or a paired :class:`DataSummary` as ``X``).

    Parameters
    ----------
    S : int
        Importance samples per likelihood estimate.
    exact_marginal : bool
        Use the exact coagulation marginal (tiny data only).
    n_iter, burn_in, thin, n_chains, step_size, adapt, init_jitter, n_jobs, random_state
        As for :class:`SICRPSampler`.
    """

    _param_names = ("alpha", "beta", "theta", "m")

    def __init__(self, n_iter=2000, burn_in=2000, thin=1, n_chains=4, S=100,
                 step_size=0.1, adapt=True, init_jitter=0.5, exact_marginal=False,
                 n_jobs=1, random_state=None):
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_chains = n_chains
        self.S = S
        self.step_size = step_size
        self.adapt = adapt
        self.init_jitter = init_jitter
        self.exact_marginal = exact_marginal
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y=None):
        self.data_ = _as_summary(X, y)
        if self.data_.coarse_groups is None:
            raise DomainError("HICRPSampler needs coarse data: pass fit(fine, coarse)")
        self.traces_ = pm_mh_hicrp(self.data_, self._config(), self.S, self.random_state,
                                   self.exact_marginal)
        self._finish()
        return self
