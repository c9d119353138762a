"""Shared Metropolis-Hastings machinery: traces, step-size adaptation, chain running."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._validation import DomainError, check_positive_int, spawn_rngs

TRACE_COLUMNS = ("chain", "iteration", "alpha", "beta", "theta", "m", "zeta", "vartheta",
                 "kappa", "t", "log_post", "log_marg_estimate")
VALUE_COLUMNS = TRACE_COLUMNS[2:]


@dataclass
class MCMCConfig:
    """Run-length and tuning settings shared by both samplers.

    ``n_iter`` counts the retained (post burn-in) iterations, so each chain
    records ``ceil(n_iter / thin)`` rows after ``burn_in`` warm-up steps.
    """

    n_iter: int = 2000
    burn_in: int = 2000
    thin: int = 1
    n_chains: int = 4
    step_size: float = 0.1
    adapt: bool = True
    init_jitter: float = 0.5
    n_jobs: int = 1

    def __post_init__(self):
        check_positive_int(self.n_iter, "n_iter")
        check_positive_int(self.burn_in, "burn_in", minimum=0)
        check_positive_int(self.thin, "thin")
        check_positive_int(self.n_chains, "n_chains")
        if not self.step_size > 0:
            raise DomainError(f"step_size must be positive, got {self.step_size}")
        if self.init_jitter < 0:
            raise DomainError("init_jitter must be nonnegative")


@dataclass
class ChainTrace:
    """Recorded draws of one chain."""

    chain: int
    iteration: np.ndarray
    values: dict
    accept_rate: float
    step_size: float
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def __len__(self):
        return int(self.iteration.size)


class Recorder:
    """Collects thinned post burn-in rows into preallocated arrays."""

    def __init__(self, config: MCMCConfig):
        self.config = config
        self.n_rows = -(-config.n_iter // config.thin)
        self.iteration = np.zeros(self.n_rows, dtype=np.int64)
        self.values = {c: np.full(self.n_rows, np.nan) for c in VALUE_COLUMNS}
        self.row = 0

    def wants(self, it):
        b = self.config.burn_in
        return it >= b and (it - b) % self.config.thin == 0

    def record(self, it, **vals):
        self.iteration[self.row] = it
        for key, v in vals.items():
            self.values[key][self.row] = v
        self.row += 1

    def trace(self, chain, accepts, step):
        return ChainTrace(chain, self.iteration, self.values,
                          accepts / max(1, self.config.n_iter), step)


class Adapter:
    """Random-walk proposal scale tuned during burn-in and frozen afterwards.

    The log step size follows a Robbins-Monro recursion towards ``target``.
    Halfway through burn-in the proposal shape is reset to the empirical
    covariance of the burn-in draws so far.
    """

    def __init__(self, dim, config: MCMCConfig, target):
        self.dim = dim
        self.config = config
        self.target = target
        self.log_step = math.log(config.step_size)
        self.chol = np.eye(dim)
        self.history = np.zeros((max(config.burn_in, 1), dim))

    @property
    def step(self):
        return math.exp(self.log_step)

    def propose(self, u, rng):
        return u + self.step * (self.chol @ rng.standard_normal(self.dim))

    def update(self, it, u, accept_prob):
        cfg = self.config
        if not cfg.adapt or it >= cfg.burn_in:
            return
        self.history[it] = u
        self.log_step += (accept_prob - self.target) / (it + 1) ** 0.6
        half = cfg.burn_in // 2
        if it + 1 == half and half >= 10 * self.dim:
            draws = self.history[half // 2:half]
            cov = np.cov(draws, rowvar=False).reshape(self.dim, self.dim)
            scale = np.sqrt(np.mean(np.diag(cov)))
            if scale > 0 and np.all(np.isfinite(cov)):
                cov = cov / scale ** 2 + 1e-6 * np.eye(self.dim)
                self.chol = np.linalg.cholesky(cov)
                self.log_step = math.log(2.38 * scale / math.sqrt(self.dim))


def mh_accept(log_ratio, rng):
    """Metropolis accept/reject in log space.

    Returns ``(accepted, acceptance probability)``; a ``nan`` ratio rejects.
    """
    if not log_ratio == log_ratio:
        return False, 0.0
    prob = math.exp(min(0.0, log_ratio))
    return bool(rng.random() < prob), prob


def jittered(u0, rng, jitter):
    u0 = np.asarray(u0, dtype=np.float64)
    return u0 + jitter * rng.standard_normal(u0.size) if jitter else u0.copy()


def logit(p):
    return math.log(p) - math.log1p(-p)


def expit(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def log_std_normal(u):
    u = np.asarray(u)
    return float(-0.5 * np.sum(u * u) - 0.5 * u.size * math.log(2 * math.pi))


def run_chains(chain_fn, config: MCMCConfig, random_state):
    """Run ``chain_fn(chain_index, rng)`` for every chain.

    Each chain owns a PCG64 stream spawned from ``random_state``, so the
    output does not depend on ``n_jobs``.
    """
    rngs = spawn_rngs(random_state, config.n_chains)
    if config.n_jobs == 1 or config.n_chains == 1:
        return [chain_fn(i, rng) for i, rng in enumerate(rngs)]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=config.n_jobs)(
        delayed(chain_fn)(i, rng) for i, rng in enumerate(rngs))


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or not math.isfinite(x):
        return "" if x is None or math.isnan(x) else ("inf" if x > 0 else "-inf")
    return repr(float(x))


def write_traces(traces, path):
    """Write chains as CSV with fixed columns; missing values are empty fields."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for tr in traces:
            for r in range(len(tr)):
                row = [str(tr.chain), str(int(tr.iteration[r]))]
                for c in VALUE_COLUMNS:
                    v = tr.values[c][r]
                    row.append(str(int(v)) if c == "m" and math.isfinite(v) else _fmt(v))
                fh.write(",".join(row) + "\n")


def read_traces(path):
    """Read a trace CSV back into :class:`ChainTrace` objects."""
    import csv

    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DomainError(f"trace file lacks columns {sorted(missing)}")
        for rec in reader:
            rows.setdefault(int(rec["chain"]), []).append(rec)
    out = []
    for chain in sorted(rows):
        recs = rows[chain]
        values = {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in recs])
                  for c in VALUE_COLUMNS}
        it = np.array([int(r["iteration"]) for r in recs], dtype=np.int64)
        out.append(ChainTrace(chain, it, values, float("nan"), float("nan")))
    return out


def pooled(traces, name):
    return np.concatenate([tr.values[name] for tr in traces])


def stacked(traces, name):
    """``(n_chains, n_draws)`` array of one parameter."""
    return np.vstack([tr.values[name] for tr in traces])
