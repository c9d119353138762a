"""Likelihood of a coarse grouping given the fine blocks under a PDGM coagulation.

The observed coarse labels group the fine blocks.  The latent variables of
the coagulation are the partition ``C`` of ``[m]``, the label ``M`` of every
fine block and the tail partition of the label-zero blocks, bundled in a
:class:`~hicrp.fragcoag.CoagAux`.  The marginal likelihood sums the joint
density ``f`` over every latent record consistent with the observed grouping.
It is estimated by importance sampling with a sequential proposal over the
coarse blocks, and computed exactly for small inputs by a dynamic program.

The proposal draws ``J_1, ..., J_m`` one at a time.  Coarse block ``i`` is
chosen with weight ``|A'_i| - beta + N_i`` and the empty choice ``0`` with
weight ``theta + k' beta + N_0``, where ``N`` counts earlier draws.  Draws of
``0`` are in addition seated by a ``CRP(beta, theta + k' beta)`` so that each
proposal corresponds to exactly one latent record.
"""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np
from scipy.special import gammaln, logsumexp

from .._validation import DomainError, GuardError, check_positive_int, check_rng
from ..fragcoag import CoagAux
from ..partition import Partition, log_eppf_sizes, log_rising, restricted_growth_strings
from .data import DataSummary

EXACT_MAX_K_COARSE = 12
ENUMERATION_MAX_K_COARSE = 6
ENUMERATION_MAX_M = 6


def check_coag_params(alpha, beta, theta, m):
    alpha, beta, theta = float(alpha), float(beta), float(theta)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < beta < alpha:
        raise DomainError(f"beta must lie in (0, alpha), got beta={beta}, alpha={alpha}")
    m = int(m)
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    if m > 0 and theta < -beta:
        raise DomainError(f"need theta >= -beta, got {theta}")
    if m == 0 and theta <= -beta:
        raise DomainError(f"need theta > -beta, got {theta}")
    return alpha, beta, theta, m


def _require_pair(data):
    if not isinstance(data, DataSummary) or data.coarse_groups is None:
        raise DomainError("the coagulation likelihood needs paired fine/coarse data")
    return data


# ---------------------------------------------------------------------------
# joint density of one latent record


def log_f_coag(aux: CoagAux, data: DataSummary, alpha, beta, theta, m) -> float:
    """Log joint density ``f`` of a latent record.

    Raises
    ------
    DomainError
        If the record is malformed or, for paired data, does not reproduce
        the observed coarse grouping.
    """
    alpha, beta, theta, m = check_coag_params(alpha, beta, theta, m)
    k = data.k
    m_labels = np.asarray(aux.m_labels, dtype=np.int64)
    if m_labels.size != k:
        raise DomainError(f"record labels {m_labels.size} fine blocks, data has {k}")
    c_sizes = np.array(aux.c_partition.sizes if aux.c_partition is not None else (),
                       dtype=np.int64)
    if int(c_sizes.sum()) != m:
        raise DomainError(f"C partitions {int(c_sizes.sum())} elements, expected m={m}")
    K = c_sizes.size
    if m_labels.min() < 0 or m_labels.max() > K:
        raise DomainError("M labels out of range")
    zero = np.flatnonzero(m_labels == 0)
    tail_sizes = np.array(aux.tail_partition.sizes if aux.tail_partition is not None
                          else (), dtype=np.int64)
    if int(tail_sizes.sum()) != zero.size:
        raise DomainError("tail partition must cover the label-zero blocks")

    if data.coarse_groups is not None and not _consistent(aux, data):
        raise DomainError("latent record does not reproduce the observed coarse blocks")

    lp = log_eppf_sizes(c_sizes, beta, theta) if m else 0.0
    a0 = (theta + K * beta) / alpha
    counts = np.bincount(m_labels, minlength=K + 1)
    if K:
        lp -= log_rising((theta + m) / alpha, k)
        lp += log_rising(a0, int(counts[0]))
        for j in range(K):
            lp += log_rising((c_sizes[j] - beta) / alpha, int(counts[j + 1]))
    if zero.size:
        lp += log_eppf_sizes(tail_sizes, beta / alpha, a0)
    return float(lp)


def _consistent(aux, data):
    groups = {}
    m_labels = aux.m_labels
    for i, lab in enumerate(m_labels):
        if lab > 0:
            groups.setdefault(("M", lab), []).append(i)
    zero = [i for i, lab in enumerate(m_labels) if lab == 0]
    if zero:
        owner = aux.tail_partition.block_index()
        for r, i in enumerate(zero):
            groups.setdefault(("T", int(owner[r])), []).append(i)
    implied = {frozenset(g) for g in groups.values()}
    observed = {frozenset(g.tolist()) for g in data.coarse_groups}
    return implied == observed


# ---------------------------------------------------------------------------
# proposal


def log_q_closed_form(data: DataSummary, beta, theta, n_counts, n0, zero_table_sizes=None):
    """Closed-form log probability of one proposed draw sequence.

    Parameters
    ----------
    n_counts : sequence of int
        Number of draws of each coarse block.
    n0 : int
        Number of empty draws.
    zero_table_sizes : sequence of int, optional
        Table sizes of the seating of the empty draws.  When given, the seating
        probability is included, giving the probability of the full record.
    """
    data = _require_pair(data)
    A = data.coarse_slot_sizes
    kp = A.size
    n_counts = np.asarray(n_counts, dtype=np.int64)
    m = int(n_counts.sum()) + int(n0)
    lq = -log_rising(theta + data.ell_bar, m)
    for a, c in zip(A, n_counts):
        lq += log_rising(a - beta, int(c))
    lq += log_rising(theta + kp * beta, int(n0))
    if zero_table_sizes is not None and n0:
        lq += log_eppf_sizes(zero_table_sizes, beta, theta + kp * beta)
    return float(lq)


def propose_coag_aux(data: DataSummary, alpha, beta, theta, m, random_state=None):
    """Draw one latent record from the sequential proposal.

    Returns
    -------
    aux : CoagAux
        ``aux.extra`` holds the draw sequence ``J`` (0 = empty, ``i`` = coarse
        block ``i - 1``), the zero-table label of each empty draw, the
        step-by-step log probability ``log_q_sequential`` and the closed form
        ``log_q_counts`` that ignores the seating of empty draws.
    log_q : float
        Log proposal probability of the record.
    """
    alpha, beta, theta, m = check_coag_params(alpha, beta, theta, m)
    data = _require_pair(data)
    rng = check_rng(random_state)
    A = data.coarse_slot_sizes.astype(np.float64)
    kp = A.size
    theta_z = theta + kp * beta
    counts = np.zeros(kp, dtype=np.int64)
    j_seq, tables, table_sizes = [], [], []
    lq = 0.0
    n0 = 0
    for ell in range(m):
        w = np.concatenate([[theta_z + n0], A - beta + counts])
        total = theta + data.ell_bar + ell
        j = int(rng.choice(kp + 1, p=w / w.sum()))
        lq += math.log(w[j] / total)
        j_seq.append(j)
        if j:
            counts[j - 1] += 1
            tables.append(-1)
            continue
        seat = np.array(table_sizes + [0], dtype=np.float64)
        sw = np.where(seat > 0, seat - beta, theta_z + len(table_sizes) * beta)
        c = int(rng.choice(sw.size, p=sw / sw.sum()))
        lq += math.log(sw[c] / (theta_z + n0))
        if c == len(table_sizes):
            table_sizes.append(1)
        else:
            table_sizes[c] += 1
        tables.append(c)
        n0 += 1
    aux = _record_from_sequence(data, j_seq, tables)
    aux.extra.update(
        J=tuple(j_seq), zero_tables=tuple(tables), log_q_sequential=lq,
        log_q_counts=log_q_closed_form(data, beta, theta, counts, n0))
    return aux, log_q_closed_form(data, beta, theta, counts, n0, table_sizes)


def _record_from_sequence(data, j_seq, tables):
    """Latent record of an extended draw sequence."""
    kp = data.coarse_counts.size
    keys = [("c", j) if j else ("z", t) for j, t in zip(j_seq, tables)]
    c_part = Partition.from_labels(keys) if keys else None
    n_counts = np.bincount([j for j in j_seq if j], minlength=kp + 1)[1:]
    z_flags = tuple(int(c > 0) for c in n_counts)
    c_index = {}
    if c_part is not None:
        for b, block in enumerate(c_part.blocks, start=1):
            c_index[keys[block[0] - 1]] = b
    m_labels = np.zeros(data.k, dtype=np.int64)
    tail_labels = []
    for g, members in enumerate(data.coarse_groups):
        if z_flags[g]:
            m_labels[members] = c_index[("c", g + 1)]
    owner = np.empty(data.k, dtype=np.int64)
    for g, members in enumerate(data.coarse_groups):
        owner[members] = g
    for i in range(data.k):
        if m_labels[i] == 0:
            tail_labels.append(int(owner[i]))
    tail = Partition.from_labels(tail_labels) if tail_labels else None
    return CoagAux(c_part, tuple(int(x) for x in m_labels), tail, z_flags,
                   tuple(int(c) for c in n_counts), {})


def enumerate_proposals(data: DataSummary, beta, theta, m):
    """Every extended draw sequence with its log proposal probability.

    Yields ``(j_seq, zero_tables, log_q)``.  The probabilities sum to one.
    Guarded to ``k' <= 6`` and ``m <= 6``.
    """
    data = _require_pair(data)
    kp = data.coarse_counts.size
    if kp > ENUMERATION_MAX_K_COARSE or m > ENUMERATION_MAX_M:
        raise GuardError(f"enumeration limited to k' <= {ENUMERATION_MAX_K_COARSE}, "
                         f"m <= {ENUMERATION_MAX_M}")
    for j_seq in itertools.product(range(kp + 1), repeat=m):
        n_counts = np.bincount([j for j in j_seq if j], minlength=kp + 1)[1:]
        n0 = sum(1 for j in j_seq if j == 0)
        for rgs in restricted_growth_strings(n0):
            it = iter(rgs)
            tables = tuple(next(it) if j == 0 else -1 for j in j_seq)
            sizes = np.bincount(rgs) if n0 else ()
            yield j_seq, tables, log_q_closed_form(data, beta, theta, n_counts, n0, sizes)


def record_from_sequence(data: DataSummary, j_seq, zero_tables):
    """Public wrapper building the latent record of an extended draw sequence."""
    return _record_from_sequence(_require_pair(data), list(j_seq), list(zero_tables))


# ---------------------------------------------------------------------------
# vectorized importance sampling


def _propose_batch(A, beta, theta, ell_bar, m, S, rng):
    """``S`` proposals at once.  Returns draw counts, zero-table sizes and log q."""
    kp = A.size
    static_w = A - beta
    static_cdf = np.cumsum(static_w)
    static_total = static_cdf[-1]
    theta_z = theta + kp * beta
    counts = np.zeros((S, kp), dtype=np.int64)
    history = np.zeros((S, max(m, 1)), dtype=np.int64)
    n_nz = np.zeros(S, dtype=np.int64)
    table_of = np.zeros((S, max(m, 1)), dtype=np.int64)
    table_sizes = np.zeros((S, max(m, 1)), dtype=np.int64)
    k0 = np.zeros(S, dtype=np.int64)
    n0 = np.zeros(S, dtype=np.int64)
    lq = np.full(S, -log_rising(theta + ell_bar, m))
    rows = np.arange(S)
    for ell in range(m):
        u = rng.random(S) * (static_total + theta_z + ell)
        u_seat = rng.random(S)
        u_keep = rng.random(S)
        is_static = u < static_total
        is_copy = ~is_static & (u < static_total + n_nz)
        is_zero = ~(is_static | is_copy)
        j = np.zeros(S, dtype=np.int64)
        idx = np.searchsorted(static_cdf, u[is_static], side="right")
        j[is_static] = np.minimum(idx, kp - 1)
        r_copy = rows[is_copy]
        pos = np.minimum((u[is_copy] - static_total).astype(np.int64), n_nz[is_copy] - 1)
        j[is_copy] = history[r_copy, pos]

        nz = rows[~is_zero]
        jn = j[~is_zero]
        lq[nz] += np.log(static_w[jn] + counts[nz, jn])
        counts[nz, jn] += 1
        history[nz, n_nz[nz]] = jn
        n_nz[nz] += 1

        # seat empty draws: a uniform earlier empty draw proposes its table,
        # kept with probability (size - beta) / size, otherwise a new table
        z = rows[is_zero]
        if z.size:
            nz0 = n0[z]
            pick = u_seat[z] * (theta_z + nz0)
            use_old = pick < nz0
            table = np.empty(z.size, dtype=np.int64)
            zo = z[use_old]
            old = table_of[zo, pick[use_old].astype(np.int64)]
            size_old = table_sizes[zo, old]
            keep = u_keep[zo] * size_old < size_old - beta
            table_old = np.where(keep, old, k0[zo])
            table[use_old] = table_old
            table[~use_old] = k0[z[~use_old]]
            new = table == k0[z]
            sizes_now = table_sizes[z, table]
            lq[z] += np.where(new, np.log(theta_z + k0[z] * beta),
                              np.log(np.maximum(sizes_now - beta, 1e-300)))
            table_sizes[z, table] += 1
            k0[z] += new
            table_of[z, nz0] = table
            n0[z] += 1
    return counts, table_sizes, k0, lq


def _log_f_batch(counts, table_sizes, k0, b, alpha, beta, theta, m):
    """Log joint density of each proposed record."""
    S, kp = counts.shape
    k = int(b.sum())
    labelled = counts > 0
    z = labelled.sum(axis=1)
    K = z + k0
    # C ~ CRP_m(beta, theta)
    block_term = (np.where(labelled, gammaln(np.maximum(counts - beta, 1e-300)), 0.0).sum(1)
                  + np.where(table_sizes > 0,
                             gammaln(np.maximum(table_sizes - beta, 1e-300)), 0.0).sum(1)
                  - K * math.lgamma(1.0 - beta))
    lp = (np.log(beta) * (K - 1) + gammaln(theta / beta + K) - math.lgamma(theta / beta + 1)
          - log_rising(theta + 1.0, m - 1) + block_term) if theta + beta > 0 else \
        _log_rising_vec(theta + beta, K - 1, beta) - log_rising(theta + 1.0, m - 1) + block_term
    # M | C: Dirichlet-categorical
    a0 = (theta + K * beta) / alpha
    b_z = np.where(labelled, b, 0).sum(1)
    b0 = k - b_z
    a_lab = (np.maximum(counts, 1) - beta) / alpha
    lp += (-log_rising((theta + m) / alpha, k)
           + gammaln(a0 + b0) - gammaln(a0)
           + np.where(labelled, gammaln(a_lab + b) - gammaln(a_lab), 0.0).sum(1))
    # tail CRP(beta / alpha, a0) over the unlabelled coarse blocks
    r = beta / alpha
    T = kp - z
    g_all = gammaln(b - r) - math.lgamma(1.0 - r)
    g_tail = np.where(labelled, 0.0, g_all).sum(1)
    tail = (np.log(r) * (T - 1) + gammaln(a0 / r + T) - gammaln(a0 / r + 1)
            - (gammaln(a0 + b0) - gammaln(a0 + 1)) + g_tail)
    lp += np.where(T > 0, tail, 0.0)
    return lp


def _log_rising_vec(x, n, step):
    out = np.zeros(n.shape)
    for i, ni in enumerate(n):
        out[i] = log_rising(x, int(ni), step)
    return out


def log_marg_coag_estimate(data: DataSummary, alpha, beta, theta, m, S=100,
                           random_state=None, return_weights=False):
    """Importance-sampling estimate of the log marginal likelihood of the coarse grouping.

    The estimate of the likelihood itself (not its log) is unbiased.

    Parameters
    ----------
    S : int
        Number of proposals.
    return_weights : bool
        Also return the ``S`` log importance weights.
    """
    alpha, beta, theta, m = check_coag_params(alpha, beta, theta, m)
    data = _require_pair(data)
    S = check_positive_int(S, "S")
    b = data.coarse_counts.astype(np.float64)
    if m == 0:
        lw = np.full(1, log_eppf_sizes(b, beta / alpha, theta / alpha))
        est = float(lw[0])
        return (est, np.repeat(lw, S)) if return_weights else est
    rng = check_rng(random_state)
    A = data.coarse_slot_sizes.astype(np.float64)
    counts, table_sizes, k0, lq = _propose_batch(A, beta, theta, data.ell_bar, m, S, rng)
    lf = _log_f_batch(counts, table_sizes, k0, b, alpha, beta, theta, m)
    with np.errstate(invalid="ignore"):
        lw = np.where(np.isneginf(lf), -np.inf, lf - lq)
    if np.all(np.isneginf(lw)):
        warnings.warn("every importance weight is zero; the likelihood estimate is 0",
                      RuntimeWarning)
        return (-math.inf, lw) if return_weights else -math.inf
    est = float(logsumexp(lw) - math.log(S))
    return (est, lw) if return_weights else est


# ---------------------------------------------------------------------------
# exact marginal


def _log_gen_stirling(m, beta):
    """``log G(r, K)``: partitions of ``[r]`` into ``K`` blocks weighted by ``prod (1-beta)_{n-1}``."""
    G = np.full((m + 1, m + 1), -np.inf)
    G[0, 0] = 0.0
    for r in range(m):
        for K in range(1, r + 2):
            stay = G[r, K] + math.log(r - K * beta) if K <= r and r - K * beta > 0 else -np.inf
            G[r + 1, K] = np.logaddexp(stay, G[r, K - 1])
    return G


def exact_log_marg_coag(coarse_counts, alpha, beta, theta, m) -> float:
    """Exact log marginal likelihood of a grouping with child counts ``coarse_counts``.

    Sums over which coarse blocks carry a label, the sizes of their ``C``
    blocks and the number of empty ``C`` blocks.  Cost is exponential in the
    number of coarse blocks (guarded to 12).
    """
    alpha, beta, theta, m = check_coag_params(alpha, beta, theta, m)
    b = np.asarray(coarse_counts, dtype=np.int64)
    kp = b.size
    if kp > EXACT_MAX_K_COARSE:
        raise GuardError(f"exact marginal limited to {EXACT_MAX_K_COARSE} coarse blocks")
    k = int(b.sum())
    r_tail = beta / alpha
    if m == 0:
        return log_eppf_sizes(b.astype(float), r_tail, theta / alpha)
    c = np.arange(1, m + 1)
    log_c_weight = np.array([log_rising(1 - beta, int(x) - 1) - math.lgamma(x + 1) for x in c])
    log_G = _log_gen_stirling(m, beta)
    log_total_a = (theta + m) / alpha
    terms = []
    for z in range(0, min(kp, m) + 1):
        for Z in itertools.combinations(range(kp), z):
            # H(s): sum over C-block sizes of the labelled blocks with total s
            H = np.full(m + 1, -np.inf)
            H[0] = 0.0
            for i in Z:
                a = (c - beta) / alpha
                g = log_c_weight + gammaln(a + b[i]) - gammaln(a)
                new = np.full(m + 1, -np.inf)
                for s in range(m + 1):
                    if H[s] == -np.inf:
                        continue
                    top = m - s
                    new[s + 1:s + 1 + top] = np.logaddexp(new[s + 1:s + 1 + top],
                                                          H[s] + g[:top])
                H = new
            rest = [i for i in range(kp) if i not in Z]
            b_rest = b[rest].astype(float)
            b0 = int(b_rest.sum())
            for s in range(z, m + 1):
                if H[s] == -np.inf:
                    continue
                r = m - s
                for k0 in (range(1, r + 1) if r else (0,)):
                    K = z + k0
                    a0 = (theta + K * beta) / alpha
                    w = (math.lgamma(m + 1) - math.lgamma(r + 1) + log_G[r, k0] + H[s]
                         + log_rising(theta + beta, K - 1, beta) - log_rising(theta + 1, m - 1)
                         - log_rising(log_total_a, k) + log_rising(a0, b0))
                    if rest:
                        w += log_eppf_sizes(b_rest, r_tail, a0)
                    terms.append(w)
    return float(logsumexp(terms))
