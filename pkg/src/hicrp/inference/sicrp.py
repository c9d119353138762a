"""Posterior sampling for the single-level SICRP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from sklearn.base import BaseEstimator

from .._validation import DomainError
from ..interaction import InteractionSet
from ..models import NuMeasure
from .data import DataSummary
from .mcmc import (Adapter, MCMCConfig, Recorder, expit, jittered, log_std_normal, logit,
                   mh_accept, run_chains)


def log_gamma_density(t, shape):
    if t <= 0 or shape <= 0:
        return -math.inf
    return (shape - 1.0) * math.log(t) - t - math.lgamma(shape)


def log_eppf_summary(data: DataSummary, alpha, theta):
    """Log EPPF of the fine block sizes under ``CRP(alpha, theta)`` (``theta > 0``)."""
    k, n = data.k, data.ell_bar
    block = float(np.dot(data.size_mult, gammaln(data.size_values - alpha))) \
        - k * math.lgamma(1.0 - alpha)
    num = (k - 1) * math.log(alpha) + math.lgamma(theta / alpha + k) \
        - math.lgamma(theta / alpha + 1.0)
    den = math.lgamma(theta + n) - math.lgamma(theta + 1.0)
    return num - den + block


def log_prior_alpha(alpha):
    """Logit-normal(0, 1) density."""
    u = logit(alpha)
    return -0.5 * u * u - 0.5 * math.log(2 * math.pi) - math.log(alpha * (1 - alpha))


def log_prior_theta(theta):
    """Log-normal(0, 1) density."""
    u = math.log(theta)
    return -0.5 * u * u - 0.5 * math.log(2 * math.pi) - u


@dataclass
class SicrpState:
    """Current ``(t, alpha, theta)``; ``nu`` is tied to the data by ``nu_q t^q = n_q``."""

    t: float
    alpha: float
    theta: float

    def nu(self, data: DataSummary) -> NuMeasure:
        return NuMeasure({q: c / self.t ** q for q, c in data.length_counts.items()})


def log_post_sicrp(state: SicrpState, data: DataSummary) -> float:
    """Unnormalized log posterior of a :class:`SicrpState` given the data.

    Combines ``Gamma(t | theta, 1)``, the EPPF of the fine block sizes, a
    logit-normal prior on ``alpha`` and a log-normal prior on ``theta``.
    Terms that are constant once ``nu_q t^q = n_q`` is imposed are dropped.
    """
    t, alpha, theta = state.t, state.alpha, state.theta
    if not (0.0 < alpha < 1.0) or theta <= 0 or t <= 0:
        return -math.inf
    return (log_gamma_density(t, theta) + log_eppf_summary(data, alpha, theta)
            + log_prior_alpha(alpha) + log_prior_theta(theta))


def _target_u(u, data):
    """Log target of ``(logit alpha, log theta)`` with ``t`` integrated out.

    The ``Gamma(t | theta, 1)`` factor integrates to one, so the marginal
    target is the EPPF times the standard normal priors on this scale.
    """
    alpha, theta = expit(u[0]), math.exp(u[1])
    if not 0.0 < alpha < 1.0:
        return -math.inf
    return log_eppf_summary(data, alpha, theta) + log_std_normal(u)


class InitializationError(DomainError):
    """The chain's starting point has a non-finite log target."""


def init_sicrp(data: DataSummary):
    return np.array([0.0, math.log(max(1.0, data.k / 10.0))])


def _sicrp_chain(data, config, chain, rng):
    adapter = Adapter(2, config, target=0.3)
    u = jittered(init_sicrp(data), rng, config.init_jitter)
    rec = Recorder(config)
    lp = _target_u(u, data)
    if not math.isfinite(lp):
        raise InitializationError(
            f"log posterior is {lp} at alpha={expit(u[0])}, theta={math.exp(u[1])}")
    accepts = 0
    for it in range(config.burn_in + config.n_iter):
        prop = adapter.propose(u, rng)
        lp_prop = _target_u(prop, data)
        accepted, accept_prob = mh_accept(lp_prop - lp, rng)
        if accepted:
            u, lp = prop, lp_prop
            if it >= config.burn_in:
                accepts += 1
        adapter.update(it, u, accept_prob)
        alpha, theta = expit(u[0]), math.exp(u[1])
        t = float(rng.gamma(theta))
        if rec.wants(it):
            rec.record(it, alpha=alpha, theta=theta, t=t,
                       log_post=log_post_sicrp(SicrpState(t, alpha, theta), data))
    return rec.trace(chain, accepts, adapter.step)


def mh_sicrp(data: DataSummary, config: MCMCConfig = None, random_state=None):
    """Random-walk MH for ``(alpha, theta)`` with an exact Gibbs update of ``t``.

    Moves are made on ``(logit alpha, log theta)``, where both priors are
    standard normal, so no Jacobian term is needed in the acceptance ratio.
    The MH step targets the posterior with ``t`` integrated out, and ``t`` is
    then drawn from its full conditional ``Gamma(theta, 1)``.  This keeps the
    joint posterior while letting ``theta`` move without being tied to ``t``.

    Returns
    -------
    list of ChainTrace
    """
    config = config or MCMCConfig()
    if not isinstance(data, DataSummary):
        raise DomainError("mh_sicrp expects a DataSummary")
    return run_chains(lambda c, rng: _sicrp_chain(data, config, c, rng), config, random_state)


def _as_summary(X, y=None):
    if isinstance(X, DataSummary):
        return X
    if isinstance(X, tuple) and len(X) == 2:
        X, y = X
    if isinstance(X, InteractionSet):
        if len(X) == 0:
            raise DomainError("cannot fit to an empty interaction set")
        return DataSummary.from_interactions(X, y)
    raise DomainError(f"cannot fit to {type(X).__name__}")


class _SamplerBase(BaseEstimator):
    _param_names = ()

    def _config(self):
        return MCMCConfig(n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin,
                          n_chains=self.n_chains, step_size=self.step_size,
                          adapt=self.adapt, init_jitter=self.init_jitter, n_jobs=self.n_jobs)

    def _finish(self):
        from ..diagnostics import r_hat
        from .mcmc import pooled, stacked

        self.posterior_ = {p: pooled(self.traces_, p) for p in self._param_names}
        self.r_hat_ = {p: r_hat(stacked(self.traces_, p)) for p in self._param_names}
        self.accept_rates_ = [tr.accept_rate for tr in self.traces_]

    def summary(self, level=0.95):
        """Posterior mean and central credible interval of each parameter."""
        lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
        return {p: {"mean": float(np.mean(x)), "lower": float(np.quantile(x, lo)),
                    "upper": float(np.quantile(x, hi)), "r_hat": self.r_hat_[p]}
                for p, x in self.posterior_.items()}

    def write_trace(self, path):
        from .mcmc import write_traces

        write_traces(self.traces_, path)


class SICRPSampler(_SamplerBase):
    """Posterior sampler for ``(alpha, theta)`` of a SICRP.

    Parameters
    ----------
    n_iter : int
        Retained iterations per chain (after burn-in).
    burn_in : int
        Warm-up iterations; proposal scales adapt here and are then frozen.
    thin : int
        Keep every ``thin``-th retained iteration.
    n_chains : int
        Independent chains, each with its own spawned random stream.
    step_size : float
        Initial random-walk scale on the unconstrained coordinates.
    adapt : bool
        Tune the scale during burn-in.
    init_jitter : float
        Standard deviation of the Gaussian jitter added to the default start.
    n_jobs : int
        joblib workers.  Results do not depend on this.
    random_state : int, SeedSequence or Generator
    """

    _param_names = ("alpha", "theta")

    def __init__(self, n_iter=2000, burn_in=2000, thin=1, n_chains=4, step_size=0.1,
                 adapt=True, init_jitter=0.5, n_jobs=1, random_state=None):
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_chains = n_chains
        self.step_size = step_size
        self.adapt = adapt
        self.init_jitter = init_jitter
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y=None):
        """Sample the posterior given an interaction set or a :class:`DataSummary`."""
        self.data_ = _as_summary(X)
        self.traces_ = mh_sicrp(self.data_, self._config(), self.random_state)
        self._finish()
        return self
