"""Convergence diagnostics, degree statistics and posterior predictive checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import DataError, DomainError, check_positive_int, check_rng
from .interaction import InteractionSet, ParentMap, parent_map
from .models import HicrpParams, NuMeasure, sample_hicrp, sample_sicrp


# ---------------------------------------------------------------------------
# convergence


def _rank_normalize(x):
    ranks = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((ranks - 0.375) / (x.size + 0.25))


def _split(x):
    n = x.shape[1] // 2
    return np.vstack([x[:, :n], x[:, x.shape[1] - n:]])


def _basic_rhat(x):
    m, n = x.shape
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return math.sqrt(var_plus / w)


def r_hat(chains) -> float:
    """Rank-normalized split R-hat: the larger of its bulk and folded versions.

    Parameters
    ----------
    chains : array of shape (n_chains, n_draws)

    Returns ``1.0`` with a warning when every draw is identical, and ``nan``
    when there are fewer than four draws per chain.
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DomainError("r_hat expects a (chains, draws) array")
    if x.shape[1] < 4 or not np.all(np.isfinite(x)):
        return float("nan")
    if np.ptp(x) == 0:
        warnings.warn("all draws are identical; R-hat set to 1.0", RuntimeWarning)
        return 1.0
    s = _split(x)
    within = s.var(axis=1, ddof=1)
    if np.any(within == 0):
        # a stuck split chain: fall back to the raw split statistic
        return float("inf") if np.ptp(s.mean(axis=1)) > 0 else 1.0
    bulk = _basic_rhat(_rank_normalize(s))
    folded = np.abs(s - np.median(s))
    tail = _basic_rhat(_rank_normalize(folded)) if np.ptp(folded) > 0 else 1.0
    return float(max(bulk, tail))


def rmse(estimates, truth) -> float:
    est = np.asarray(estimates, dtype=np.float64)
    return float(np.sqrt(np.mean((est - truth) ** 2)))


# ---------------------------------------------------------------------------
# degree statistics


def degrees(iset: InteractionSet) -> np.ndarray:
    """Degree of every label that occurs, counting repeated slots."""
    return np.array(sorted(iset.label_counts().values()), dtype=np.int64)


def _proportions(values) -> dict:
    vals, counts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    total = counts.sum()
    return {int(v): float(c / total) for v, c in zip(vals, counts)}


def degree_distribution(iset: InteractionSet) -> dict:
    """Proportion of labels with each degree (slot count, with multiplicity)."""
    if len(iset) == 0:
        raise DataError("degree distribution of an empty interaction set")
    return _proportions(degrees(iset))


def ks_statistic(obs: dict, pred: dict) -> float:
    """Sup-norm distance between the CDFs of two distributions on the integers."""
    if not obs or not pred:
        raise DataError("KS distance needs two nonempty distributions")
    support = sorted(set(obs) | set(pred))
    f_obs = np.cumsum([obs.get(x, 0.0) for x in support])
    f_pred = np.cumsum([pred.get(x, 0.0) for x in support])
    return float(np.max(np.abs(f_obs - f_pred)))


def children_distribution(pm: ParentMap) -> dict:
    """Proportion of coarse labels with each number of fine children."""
    counts = list(pm.children_counts().values())
    if not counts:
        raise DataError("parent map is empty")
    return _proportions(counts)


def log2_edges(max_value, n_bins=None):
    """Base-2 logarithmic bin edges ``1, 2, 4, ...`` covering ``[1, max_value]``.

    Bin ``j`` is ``[edges[j], edges[j + 1])``.  With ``n_bins`` the edges are
    spaced evenly in ``log2`` instead of at powers of two.
    """
    top = math.log2(max(1, max_value)) + 1e-9
    if n_bins is None:
        return 2.0 ** np.arange(int(math.floor(top)) + 2)
    n_bins = check_positive_int(n_bins, "n_bins")
    return 2.0 ** np.linspace(0.0, max(top, 1.0), n_bins + 1)


def avg_parent_degree(fine: InteractionSet, coarse: InteractionSet, pm: ParentMap = None,
                      bins=None):
    """Mean degree of the parents of fine labels, binned by fine degree.

    Parameters
    ----------
    bins : int or array, optional
        Number of logarithmic bins, or explicit edges.  Defaults to powers of two.

    Returns
    -------
    list of ``(lower_edge, upper_edge, mean_parent_degree)`` for nonempty bins.
    """
    pm = parent_map(fine, coarse) if pm is None else pm
    fdeg = fine.label_counts()
    cdeg = coarse.label_counts()
    f = np.array([fdeg[x] for x in pm.mapping], dtype=np.float64)
    c = np.array([cdeg[pm.mapping[x]] for x in pm.mapping], dtype=np.float64)
    if bins is None or np.isscalar(bins):
        edges = log2_edges(f.max() if f.size else 1, bins)
    else:
        edges = np.asarray(bins, dtype=np.float64)
    idx = np.searchsorted(edges, f, side="right") - 1
    out = []
    for j in range(len(edges) - 1):
        sel = idx == j
        if sel.any():
            out.append((float(edges[j]), float(edges[j + 1]), float(c[sel].mean())))
    return out


# ---------------------------------------------------------------------------
# posterior predictive checks


@dataclass
class PredictiveSummary:
    """Summary statistics of one (observed or replicated) data set."""

    degree: dict
    n_labels: int
    n_interactions: int
    n_coarse_labels: int | None = None
    coarse_degree: dict | None = None
    children: dict | None = None
    parent_degree: list | None = None

    @classmethod
    def of(cls, fine: InteractionSet, coarse: InteractionSet = None, bins=None):
        """Summaries of a data set; an empty set gives zero counts and empty maps."""
        if len(fine) == 0:
            return cls({}, 0, 0, 0 if coarse is not None else None,
                       {} if coarse is not None else None,
                       {} if coarse is not None else None,
                       [] if coarse is not None else None)
        out = cls(degree_distribution(fine), fine.n_labels, len(fine))
        if coarse is not None:
            pm = parent_map(fine, coarse)
            out.n_coarse_labels = coarse.n_labels
            out.coarse_degree = degree_distribution(coarse)
            out.children = children_distribution(pm)
            out.parent_degree = avg_parent_degree(fine, coarse, pm, bins)
        return out


@dataclass
class Band:
    """Pointwise equal-tailed predictive band of one statistic on a grid."""

    name: str
    grid: np.ndarray
    observed: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray

    @property
    def coverage(self):
        """Fraction of grid points where the observation lies inside the band."""
        ok = np.isfinite(self.observed) & np.isfinite(self.lower)
        if not ok.any():
            return float("nan")
        inside = (self.observed[ok] >= self.lower[ok]) & (self.observed[ok] <= self.upper[ok])
        return float(inside.mean())

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("grid,observed,lower,median,upper\n")
            for row in zip(self.grid, self.observed, self.lower, self.median, self.upper):
                fh.write(",".join("" if not np.isfinite(v) else repr(float(v))
                                  for v in row) + "\n")


def band(name, grid, observed, replicates, level=0.95) -> Band:
    reps = np.asarray(replicates, dtype=np.float64).reshape(len(replicates), -1)
    lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = np.nanquantile(reps, [lo, 0.5, hi], axis=0)
    return Band(name, np.atleast_1d(np.asarray(grid, dtype=np.float64)),
                np.atleast_1d(np.asarray(observed, dtype=np.float64)), q[0], q[1], q[2])


def ccdf(dist: dict, grid) -> np.ndarray:
    """``P(X >= g)`` for a proportion map, on each grid value."""
    if not dist:
        return np.zeros(len(grid))
    keys = np.array(sorted(dist))
    tail = np.cumsum([dist[k] for k in keys][::-1])[::-1]
    idx = np.searchsorted(keys, np.asarray(grid), side="left")
    return np.where(idx < keys.size, tail[np.minimum(idx, keys.size - 1)], 0.0)


def _draw_rows(traces, n_draws, rng):
    rows = [(tr, r) for tr in traces for r in range(len(tr))]
    if not rows:
        raise DomainError("traces hold no draws")
    pick = np.sort(rng.choice(len(rows), size=n_draws, replace=len(rows) < n_draws))
    return [{k: float(v[r]) for k, v in tr.values.items()} for tr, r in
            (rows[i] for i in pick)]


def simulate_replicate(draw: dict, nu: NuMeasure, hierarchical: bool, rng):
    """One predictive data set from a posterior draw.

    The length measure is fixed so that ``nu_q t^q`` equals the observed
    count ``n_q``, which conditions on the posterior value of ``t``.
    """
    if hierarchical:
        params = HicrpParams((draw["beta"], draw["alpha"]), draw["theta"],
                             (0, int(draw["m"])), nu, expected_counts=True)
        out = sample_hicrp(params, rng)
        return out.levels[1], out.levels[0]
    return sample_sicrp(draw["alpha"], draw["theta"], nu, rng, expected_counts=True).iset, None


def posterior_predictive(traces, fine: InteractionSet, coarse: InteractionSet = None,
                         n_draws=100, reps_per_draw=1, level=0.95, random_state=None):
    """Replicate the data from posterior draws and band the summary statistics.

    Parameters
    ----------
    traces : list of ChainTrace
        Posterior draws; the model is hierarchical when ``coarse`` is given.
    n_draws : int
        Posterior draws used, chosen uniformly from the pooled traces.
    reps_per_draw : int
        Replicated data sets per draw.

    Returns
    -------
    summaries : list of PredictiveSummary
        One per replicate.
    bands : dict of Band
        Pointwise bands for the degree CCDF, the label and interaction counts,
        and for hierarchical data the coarse degree CCDF, coarse label count
        and children CCDF.  ``bands["ks"]`` holds the KS distances of the
        replicated degree distributions from the observed one.
    """
    n_draws = check_positive_int(n_draws, "n_draws")
    reps_per_draw = check_positive_int(reps_per_draw, "reps_per_draw")
    rng = check_rng(random_state)
    hier = coarse is not None
    nu = NuMeasure(fine.length_counts())
    obs = PredictiveSummary.of(fine, coarse)
    summaries = []
    for draw in _draw_rows(traces, n_draws, rng):
        for _ in range(reps_per_draw):
            f_rep, c_rep = simulate_replicate(draw, nu, hier, rng)
            summaries.append(PredictiveSummary.of(f_rep, c_rep if hier else None))
    return summaries, summary_bands(obs, summaries, level)


def summary_bands(obs: PredictiveSummary, summaries, level=0.95) -> dict:
    """Pointwise bands of replicated summaries against the observed summary."""
    grid = log2_edges(4 * max(obs.degree))
    bands = {
        "degree_ccdf": band("degree_ccdf", grid, ccdf(obs.degree, grid),
                            [ccdf(s.degree, grid) for s in summaries], level),
        "n_labels": band("n_labels", [0], [obs.n_labels],
                         [[s.n_labels] for s in summaries], level),
        "n_interactions": band("n_interactions", [0], [obs.n_interactions],
                               [[s.n_interactions] for s in summaries], level),
    }
    ks = [ks_statistic(obs.degree, s.degree) if s.degree else 1.0 for s in summaries]
    bands["ks"] = band("ks", [0], [0.0], [[x] for x in ks], level)
    if obs.coarse_degree is not None:
        cgrid = log2_edges(4 * max(obs.coarse_degree))
        kgrid = log2_edges(4 * max(obs.children))
        bands["coarse_degree_ccdf"] = band(
            "coarse_degree_ccdf", cgrid, ccdf(obs.coarse_degree, cgrid),
            [ccdf(s.coarse_degree, cgrid) for s in summaries], level)
        bands["n_coarse_labels"] = band("n_coarse_labels", [0], [obs.n_coarse_labels],
                                        [[s.n_coarse_labels] for s in summaries], level)
        bands["children_ccdf"] = band("children_ccdf", kgrid, ccdf(obs.children, kgrid),
                                      [ccdf(s.children, kgrid) for s in summaries], level)
    return bands


def write_bands(bands: dict, directory):
    """One CSV per statistic plus ``index.json`` listing them."""
    import json
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, b in bands.items():
        fname = f"{name}.csv"
        b.write_csv(directory / fname)
        index[name] = {"file": fname, "coverage": b.coverage}
    with open(directory / "index.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return index
