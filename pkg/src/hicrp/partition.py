"""Set partitions of [n] and the two-parameter Chinese restaurant process.

Partitions are stored in canonical form: every block is a sorted tuple of
1-based indices and blocks are listed in order of least element.  All
probability arithmetic is done in log space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from ._validation import DomainError, GuardError, check_crp_params, check_rng

MAX_ENUMERATION_N = 12


@dataclass(frozen=True)
class CrpParams:
    """Validated ``(alpha, theta)`` pair of a CRP."""

    alpha: float
    theta: float

    def __post_init__(self):
        alpha, theta = check_crp_params(self.alpha, self.theta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class Partition:
    """A set partition of ``{1, ..., n}`` in canonical block order."""

    blocks: tuple
    n: int

    def __init__(self, blocks, n=None):
        canon = tuple(sorted((tuple(sorted(int(i) for i in b)) for b in blocks),
                             key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in canon):
            raise DomainError("partition blocks must be nonempty")
        size = sum(len(b) for b in canon)
        if n is None:
            n = size
        elements = sorted(i for b in canon for i in b)
        if elements != list(range(1, n + 1)):
            raise DomainError(f"blocks do not form a partition of [1..{n}]")
        object.__setattr__(self, "blocks", canon)
        object.__setattr__(self, "n", int(n))

    @classmethod
    def from_labels(cls, labels):
        """Partition whose blocks group equal entries of ``labels``."""
        groups = {}
        for i, lab in enumerate(labels, start=1):
            groups.setdefault(lab, []).append(i)
        return cls(groups.values(), len(labels))

    @property
    def sizes(self):
        return tuple(len(b) for b in self.blocks)

    @property
    def k(self):
        return len(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def block_index(self):
        """Array mapping element ``i`` (0-based position ``i - 1``) to its block number."""
        out = np.empty(self.n, dtype=np.int64)
        for j, b in enumerate(self.blocks):
            out[np.asarray(b) - 1] = j
        return out

    def to_json(self):
        return json.dumps([list(b) for b in self.blocks])

    @classmethod
    def from_json(cls, text):
        return cls(json.loads(text))

    def __repr__(self):
        inner = ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return f"Partition({{{inner}}})"


def samp(sequence: Sequence) -> Partition:
    """Partition of positions induced by equality of the entries of ``sequence``."""
    if len(sequence) == 0:
        raise DomainError("samp needs a nonempty sequence")
    return Partition.from_labels(list(sequence))


def log_rising(x, n, step=1.0):
    """``log(x (x + step) ... (x + (n - 1) step))``; ``-inf`` when a factor vanishes."""
    if n <= 0:
        return 0.0
    if step > 0 and x > 0:
        if n <= 64:
            # a compensated sum of logs avoids lgamma cancellation for short products
            return math.fsum(math.log(x + i * step) for i in range(n))
        return n * math.log(step) + math.lgamma(x / step + n) - math.lgamma(x / step)
    if step == 0:
        if x > 0:
            return n * math.log(x)
        if x == 0:
            return -math.inf
    total = 0.0
    for i in range(n):
        term = x + i * step
        if term == 0:
            return -math.inf
        if term < 0:
            raise DomainError(f"negative factor {term} in rising product")
        total += math.log(term)
    return total


def log_eppf_sizes(sizes, alpha, theta):
    """Log EPPF of ``CRP_n(alpha, theta)`` evaluated at a vector of block sizes."""
    sizes = np.asarray(sizes, dtype=np.float64)
    k = sizes.size
    n = int(sizes.sum())
    if k == 0:
        return 0.0
    if alpha == 1.0:
        if np.any(sizes > 1):
            return -math.inf
        block_terms = 0.0
    else:
        block_terms = float(np.sum(gammaln(sizes - alpha))) - k * math.lgamma(1.0 - alpha)
    num = log_rising(theta + alpha, k - 1, alpha)
    den = log_rising(theta + 1.0, n - 1, 1.0)
    return num - den + block_terms


def log_eppf(pi: Partition, params) -> float:
    """Log probability of ``pi`` under ``CRP_n(alpha, theta)``.

    ``params`` may be a :class:`CrpParams` or an ``(alpha, theta)`` pair.
    Returns ``-inf`` for partitions outside the support (for example more than
    one block when ``theta == -alpha``).
    """
    alpha, theta = _unpack(params)
    return log_eppf_sizes(pi.sizes, alpha, theta)


def _unpack(params):
    if isinstance(params, CrpParams):
        return params.alpha, params.theta
    return check_crp_params(*params)


def crp_labels(alpha, theta, n, rng):
    """Table assignments (0-based, order of first appearance) of ``n`` CRP customers.

    Existing tables are chosen by picking a uniformly random earlier customer
    and accepting its table with probability ``(size - alpha) / size``, which
    selects table ``j`` with probability proportional to ``size_j - alpha``.
    """
    labels = np.zeros(n, dtype=np.int64)
    if n == 0:
        return labels
    if alpha == 1.0:
        return np.arange(n, dtype=np.int64)
    counts = [1]
    k = 1
    u_new = rng.random(n)
    u_pick = rng.random(n)
    for i in range(1, n):
        if u_new[i] * (i + theta) < theta + k * alpha:
            labels[i] = k
            counts.append(1)
            k += 1
            continue
        v = u_pick[i]
        while True:
            j = labels[int(v * i)]
            c = counts[j]
            if alpha == 0.0 or rng.random() * c < c - alpha:
                break
            v = rng.random()
        labels[i] = j
        counts[j] += 1
    return labels


def crp_sample(params, n: int, random_state=None) -> Partition:
    """Draw a partition of ``[n]`` from ``CRP_n(alpha, theta)``."""
    alpha, theta = _unpack(params)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = check_rng(random_state)
    return Partition.from_labels(crp_labels(alpha, theta, n, rng).tolist())


def restrict(pi: Partition, subset: Sequence[int]) -> Partition:
    """Partition of ``subset`` induced by ``pi``, re-indexed to ``[len(subset)]``."""
    subset = sorted(int(i) for i in subset)
    if not subset:
        raise DomainError("restriction subset must be nonempty")
    if subset[0] < 1 or subset[-1] > pi.n or len(set(subset)) != len(subset):
        raise DomainError(f"subset must hold distinct indices in [1..{pi.n}]")
    owner = pi.block_index()
    return Partition.from_labels([owner[i - 1] for i in subset])


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """Every partition of ``[n]`` exactly once, via restricted growth strings."""
    if n > MAX_ENUMERATION_N:
        raise GuardError(f"refusing to enumerate partitions of n={n} > {MAX_ENUMERATION_N}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    for rgs in restricted_growth_strings(n):
        yield Partition.from_labels(rgs)


def restricted_growth_strings(n):
    """Restricted growth strings of length ``n`` (first entry 0)."""
    a = [0] * n

    def rec(i, mx):
        if i == n:
            yield tuple(a)
            return
        for v in range(mx + 2):
            a[i] = v
            yield from rec(i + 1, max(mx, v))

    if n == 0:
        yield ()
        return
    yield from rec(1, 0)
