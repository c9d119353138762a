"""PDGM m-fragmentation and m-coagulation of partitions and interaction sets.

The two operators are dual: fragmenting a ``CRP_n(beta, theta)`` partition
yields ``CRP_n(alpha, theta + m)``, and coagulating a ``CRP_n(alpha, theta + m)``
partition yields ``CRP_n(beta, theta)``.  Besides the samplers this module has
exact enumeration oracles for both laws on small ground sets, used to verify
that duality to machine precision.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import DomainError, GuardError, check_rng
from .interaction import InteractionSet, inter, part_comp
from .partition import (
    Partition,
    crp_labels,
    log_eppf_sizes,
    log_rising,
    restricted_growth_strings,
)

FRAG_MAX_N = 8
COAG_MAX_K = 7
ORACLE_MAX_M = 4


@dataclass(frozen=True)
class PdgmParams:
    """``(beta, alpha, theta, m)`` with ``0 <= beta <= alpha < 1``, ``theta >= -alpha``."""

    beta: float
    alpha: float
    theta: float
    m: int

    def __post_init__(self):
        beta, alpha, theta = float(self.beta), float(self.alpha), float(self.theta)
        m = self.m
        if not (0.0 <= beta <= alpha < 1.0):
            raise DomainError(f"need 0 <= beta <= alpha < 1, got beta={beta}, alpha={alpha}")
        if not theta >= -alpha:
            raise DomainError(f"need theta >= -alpha, got theta={theta}")
        if int(m) != m or m < 0:
            raise DomainError(f"m must be a nonnegative integer, got {m!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "m", int(m))

    def require_dual_range(self):
        if self.m > 0 and self.theta < -self.beta:
            raise DomainError(f"need theta >= -beta when m > 0, got theta={self.theta}")


@dataclass
class CoagAux:
    """Latent record of one coagulation (or one proposal of it).

    ``m_labels`` and ``tail_partition`` index fine blocks in canonical order
    (0-based); ``z_flags`` and ``n_counts`` follow the coarse blocks in
    canonical order.
    """

    c_partition: Partition | None
    m_labels: tuple
    tail_partition: Partition | None
    z_flags: tuple
    n_counts: tuple | None = None
    extra: dict = field(default_factory=dict)

    @property
    def k_m(self):
        return 0 if self.c_partition is None else self.c_partition.k

    def to_json(self):
        return json.dumps({
            "C": [] if self.c_partition is None else [list(b) for b in self.c_partition.blocks],
            "M": list(self.m_labels),
            "tail": [] if self.tail_partition is None
            else [list(b) for b in self.tail_partition.blocks],
            "Z": list(self.z_flags),
            "N": None if self.n_counts is None else list(self.n_counts),
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(Partition(d["C"]) if d["C"] else None, tuple(d["M"]),
                   Partition(d["tail"]) if d["tail"] else None, tuple(d["Z"]),
                   None if d["N"] is None else tuple(d["N"]))


def _sample_j_counts(sizes, beta, theta, m, rng):
    """Sequential draws of J_1..J_m; returns counts N_0..N_k."""
    k = len(sizes)
    n = int(sum(sizes))
    counts = np.zeros(k + 1, dtype=np.int64)
    w = np.empty(k + 1)
    w[0] = theta + k * beta
    w[1:] = np.asarray(sizes, dtype=np.float64) - beta
    for ell in range(m):
        probs = w / (n + theta + ell)
        j = int(rng.choice(k + 1, p=probs / probs.sum()))
        counts[j] += 1
        w[j] += 1.0
    return counts


def frag_m(pi: Partition, p: PdgmParams, random_state=None) -> Partition:
    """(beta -> alpha, theta)-PDGM m-fragmentation of ``pi``.

    Block ``A_j`` is shattered by a fresh ``CRP_{|A_j|}(alpha, N_j - beta)`` run
    over its elements in increasing order; exchangeability makes the order
    immaterial.
    """
    p.require_dual_range()
    rng = check_rng(random_state)
    counts = _sample_j_counts(pi.sizes, p.beta, p.theta, p.m, rng)
    new_blocks = []
    for j, block in enumerate(pi.blocks):
        sub = crp_labels(p.alpha, counts[j + 1] - p.beta, len(block), rng)
        groups = {}
        for elem, lab in zip(block, sub):
            groups.setdefault(int(lab), []).append(elem)
        new_blocks.extend(groups.values())
    return Partition(new_blocks, pi.n)


def _coarse_from_labels(pi, m_labels, tail_labels):
    """Coarse blocks and their Z flags from M labels and tail CRP labels."""
    groups = {}
    for i, lab in enumerate(m_labels):
        if lab > 0:
            groups.setdefault(("M", lab), []).append(i)
    b0 = [i for i, lab in enumerate(m_labels) if lab == 0]
    for r, i in enumerate(b0):
        groups.setdefault(("T", int(tail_labels[r])), []).append(i)
    blocks, flags = [], []
    for key, members in groups.items():
        blocks.append([e for i in members for e in pi.blocks[i]])
        flags.append(1 if key[0] == "M" else 0)
    order = sorted(range(len(blocks)), key=lambda b: min(blocks[b]))
    return Partition([blocks[b] for b in order], pi.n), tuple(flags[b] for b in order)


def coag_m(pi: Partition, p: PdgmParams, random_state=None):
    """(alpha -> beta, theta)-PDGM m-coagulation of ``pi``.

    Returns the coarse partition and the :class:`CoagAux` record of the latent
    draws.  Label-zero blocks are coagulated by a
    ``CRP(beta/alpha, (theta + K_m beta)/alpha)`` applied to their ranks in
    canonical order.
    """
    if p.alpha <= 0.0:
        raise DomainError("coagulation needs alpha > 0")
    p.require_dual_range()
    if p.theta < -p.beta:
        raise DomainError(f"coagulation needs theta >= -beta, got {p.theta}")
    rng = check_rng(random_state)
    k = pi.k
    if p.m > 0:
        c_lab = crp_labels(p.beta, p.theta, p.m, rng)
        c_part = Partition.from_labels(c_lab.tolist())
        k_m = c_part.k
        shapes = np.array([(p.theta + k_m * p.beta) / p.alpha]
                          + [(s - p.beta) / p.alpha for s in c_part.sizes])
        g = rng.gamma(shapes)
        s = g / g.sum()
        m_labels = rng.choice(k_m + 1, size=k, p=s)
    else:
        c_part = None
        k_m = 0
        m_labels = np.zeros(k, dtype=np.int64)
    a0 = (p.theta + k_m * p.beta) / p.alpha
    b0 = int(np.sum(m_labels == 0))
    tail = crp_labels(p.beta / p.alpha, a0, b0, rng)
    coarse, flags = _coarse_from_labels(pi, m_labels.tolist(), tail)
    aux = CoagAux(c_part, tuple(int(x) for x in m_labels),
                  Partition.from_labels(tail.tolist()) if b0 else None, flags)
    return coarse, aux


# ---------------------------------------------------------------------------
# exact oracles


def _check_oracle_guard(n_or_k, limit, m, what):
    if n_or_k > limit:
        raise GuardError(f"{what}={n_or_k} exceeds enumeration guard {limit}")
    if m > ORACLE_MAX_M:
        raise GuardError(f"m={m} exceeds enumeration guard {ORACLE_MAX_M}")


def j_sequence_law(sizes, beta, theta, m):
    """Exact law of the count vector ``(N_0, N_1, ..., N_k)`` of J_1..J_m."""
    k = len(sizes)
    n = sum(sizes)
    out = {}

    def rec(ell, counts, logp):
        if ell == m:
            key = tuple(counts)
            out[key] = out.get(key, 0.0) + math.exp(logp)
            return
        den = n + theta + ell
        for j in range(k + 1):
            w = theta + k * beta + counts[0] if j == 0 else sizes[j - 1] + counts[j] - beta
            if w <= 0:
                continue
            counts[j] += 1
            rec(ell + 1, counts, logp + math.log(w / den))
            counts[j] -= 1

    rec(0, [0] * (k + 1), 0.0)
    return out


def _subpartition_law(size, alpha, theta):
    """(restricted growth string, probability) pairs for CRP_size(alpha, theta)."""
    out = []
    for rgs in restricted_growth_strings(size):
        sizes = np.bincount(rgs)
        lp = log_eppf_sizes(sizes, alpha, theta)
        if lp > -math.inf:
            out.append((rgs, math.exp(lp)))
    return out


def exact_frag_distribution(pi: Partition, p: PdgmParams) -> dict:
    """Exact law of :func:`frag_m` applied to ``pi`` (``n <= 8``, ``m <= 4``)."""
    _check_oracle_guard(pi.n, FRAG_MAX_N, p.m, "n")
    p.require_dual_range()
    out = {}
    cache = {}
    for counts, pj in j_sequence_law(pi.sizes, p.beta, p.theta, p.m).items():
        per_block = []
        for j, block in enumerate(pi.blocks):
            key = (len(block), counts[j + 1])
            if key not in cache:
                cache[key] = _subpartition_law(len(block), p.alpha, counts[j + 1] - p.beta)
            per_block.append(cache[key])
        for combo in itertools.product(*per_block):
            prob = pj
            blocks = []
            for block, (rgs, pr) in zip(pi.blocks, combo):
                prob *= pr
                groups = {}
                for elem, lab in zip(block, rgs):
                    groups.setdefault(lab, []).append(elem)
                blocks.extend(groups.values())
            key = Partition(blocks, pi.n)
            out[key] = out.get(key, 0.0) + prob
    return out


def log_dircat(a, counts):
    """Log Dirichlet-categorical probability of one labelled assignment."""
    total_a = float(sum(a))
    total_n = int(sum(counts))
    lp = -log_rising(total_a, total_n) if total_a > 0 else 0.0
    for aj, nj in zip(a, counts):
        lp += log_rising(aj, nj)
    return lp


def exact_coag_distribution(pi: Partition, p: PdgmParams) -> dict:
    """Exact law of the coarse partition from :func:`coag_m` (``k <= 7``, ``m <= 4``).

    Sums over the partition ``C`` of ``[m]``, every label assignment ``M`` (through
    its Dirichlet-categorical marginal) and every tail partition of the
    label-zero blocks.
    """
    _check_oracle_guard(pi.k, COAG_MAX_K, p.m, "k")
    if p.alpha <= 0.0:
        raise DomainError("coagulation needs alpha > 0")
    p.require_dual_range()
    k = pi.k
    out = {}
    tail_cache = {}
    c_choices = ([((), 0.0)] if p.m == 0 else
                 [(rgs, log_eppf_sizes(np.bincount(rgs), p.beta, p.theta))
                  for rgs in restricted_growth_strings(p.m)])
    for c_rgs, lp_c in c_choices:
        if lp_c == -math.inf:
            continue
        c_sizes = np.bincount(c_rgs) if p.m else np.zeros(0, dtype=np.int64)
        k_m = len(c_sizes)
        a0 = (p.theta + k_m * p.beta) / p.alpha
        a = [a0] + [(s - p.beta) / p.alpha for s in c_sizes]
        for m_lab in itertools.product(range(k_m + 1), repeat=k):
            counts = np.bincount(m_lab, minlength=k_m + 1)
            lp_m = 0.0 if k_m == 0 else log_dircat(a, counts)
            if lp_m == -math.inf:
                continue
            b0 = int(counts[0])
            key = (b0, a0)
            if key not in tail_cache:
                tail_cache[key] = _subpartition_law(b0, p.beta / p.alpha, a0) if b0 else [((), 1.0)]
            base = math.exp(lp_c + lp_m)
            for tail_rgs, pt in tail_cache[key]:
                coarse, _ = _coarse_from_labels(pi, list(m_lab), tail_rgs)
                out[coarse] = out.get(coarse, 0.0) + base * pt
    return out


def crp_law(n, alpha, theta):
    """Exact ``CRP_n(alpha, theta)`` law as a dict over partitions."""
    out = {}
    for rgs in restricted_growth_strings(n):
        lp = log_eppf_sizes(np.bincount(rgs), alpha, theta)
        if lp > -math.inf:
            out[Partition.from_labels(rgs)] = math.exp(lp)
    return out


def mix(prior: dict, kernel) -> dict:
    """``sum_x prior[x] * kernel(x)`` for dict-valued kernels."""
    out = {}
    for x, px in prior.items():
        for y, py in kernel(x).items():
            out[y] = out.get(y, 0.0) + px * py
    return out


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def duality_report(n, p: PdgmParams) -> dict:
    """TV distances checking both directions of the frag/coag duality exactly."""
    fine_law = crp_law(n, p.alpha, p.theta + p.m)
    coarse_law = crp_law(n, p.beta, p.theta)
    frag_mix = mix(coarse_law, lambda x: exact_frag_distribution(x, p))
    coag_mix = mix(fine_law, lambda x: exact_coag_distribution(x, p))
    return {
        "n": n, "alpha": p.alpha, "beta": p.beta, "theta": p.theta, "m": p.m,
        "tv_frag": total_variation(frag_mix, fine_law),
        "tv_coag": total_variation(coag_mix, coarse_law),
        "frag_mass": sum(frag_mix.values()),
        "coag_mass": sum(coag_mix.values()),
    }


# ---------------------------------------------------------------------------
# interaction-set lifts


def _restore_order(blocks_iset, order):
    """Undo the PART ordering so the result is slot-aligned with the input."""
    out = [None] * len(order)
    for pos, idx in enumerate(order):
        out[idx] = blocks_iset.interactions[pos]
    return InteractionSet(out, blocks_iset.labels)


def ifrag_m(iset: InteractionSet, p: PdgmParams, random_state=None, labels="derived"):
    """Fragment the labels of an interaction set via its partition.

    With ``labels="derived"`` a shattered label ``a`` becomes ``a.1, a.2, ...``;
    ``labels="uniform"`` draws fresh Uniform(0, 1) labels.  The output is
    slot-aligned with the input.
    """
    rng = check_rng(random_state)
    pi, comp, order = part_comp(iset, rng)
    fine = frag_m(pi, p, rng)
    if labels == "uniform":
        new_labels = None
    else:
        slots = iset.slot_labels(order)
        parents = [int(slots[b[0] - 1]) for b in fine.blocks]
        seen = {}
        for par in parents:
            seen[par] = seen.get(par, 0) + 1
        rank = {}
        new_labels = []
        for par in parents:
            base = iset.labels[par]
            if seen[par] == 1:
                new_labels.append(base)
            else:
                rank[par] = rank.get(par, 0) + 1
                new_labels.append(f"{base}.{rank[par]}")
    out = inter(fine, comp, new_labels, rng)
    return _restore_order(out, order)


def icoag_m(iset: InteractionSet, p: PdgmParams, random_state=None, labels="constituent"):
    """Coagulate the labels of an interaction set via its partition.

    A merged label takes the display label of its constituent whose block has
    the least element (``labels="constituent"``) or a fresh Uniform(0, 1)
    label (``labels="uniform"``).  Returns the slot-aligned coarse set and the
    :class:`CoagAux` record.
    """
    rng = check_rng(random_state)
    pi, comp, order = part_comp(iset, rng)
    coarse, aux = coag_m(pi, p, rng)
    if labels == "uniform":
        new_labels = None
    else:
        slots = iset.slot_labels(order)
        new_labels = [iset.labels[int(slots[b[0] - 1])] for b in coarse.blocks]
    out = inter(coarse, comp, new_labels, rng)
    return _restore_order(out, order), aux


# ---------------------------------------------------------------------------
# estimator-style wrappers


class _PdgmTransformer(TransformerMixin, BaseEstimator):
    def __init__(self, alpha=0.5, beta=0.25, theta=1.0, m=0, random_state=None):
        self.alpha = alpha
        self.beta = beta
        self.theta = theta
        self.m = m
        self.random_state = random_state

    def fit(self, X=None, y=None):
        self.params_ = PdgmParams(self.beta, self.alpha, self.theta, self.m)
        self.params_.require_dual_range()
        self.rng_ = check_rng(self.random_state)
        return self

    def _params(self):
        if not hasattr(self, "params_"):
            self.fit()
        return self.params_


class PDGMFragmentation(_PdgmTransformer):
    """Transformer applying the (beta -> alpha, theta)-PDGM m-fragmentation.

    ``transform`` accepts a :class:`Partition` or an :class:`InteractionSet`.
    """

    def transform(self, X):
        p = self._params()
        if isinstance(X, InteractionSet):
            return ifrag_m(X, p, self.rng_)
        return frag_m(X, p, self.rng_)


class PDGMCoagulation(_PdgmTransformer):
    """Transformer applying the (alpha -> beta, theta)-PDGM m-coagulation.

    The latent record of the most recent call is kept in ``aux_``.
    """

    def transform(self, X):
        p = self._params()
        if isinstance(X, InteractionSet):
            out, self.aux_ = icoag_m(X, p, self.rng_)
        else:
            out, self.aux_ = coag_m(X, p, self.rng_)
        return out
