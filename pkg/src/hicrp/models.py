"""Generative samplers: Hollywood model, ICRP, SICRP and the hierarchical HICRP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._validation import DomainError, check_crp_params, check_rng
from .fragcoag import PdgmParams, icoag_m
from .interaction import InteractionSet, ParentMap, parent_map
from .partition import crp_labels


@dataclass(frozen=True)
class NuMeasure:
    """Finite measure ``q -> nu_q`` on the positive integers."""

    weights: dict

    def __post_init__(self):
        w = {int(q): float(v) for q, v in dict(self.weights).items()}
        if any(q < 1 for q in w):
            raise DomainError("nu is supported on positive integers")
        if any(v < 0 or not math.isfinite(v) for v in w.values()):
            raise DomainError("nu weights must be finite and nonnegative")
        w = {q: v for q, v in sorted(w.items()) if v > 0}
        if not w:
            raise DomainError("nu needs at least one positive weight")
        object.__setattr__(self, "weights", w)

    @classmethod
    def parse(cls, text):
        """Parse ``"1:500,2:7000"`` style tables."""
        pairs = (item.split(":") for item in text.replace(" ", "").split(",") if item)
        return cls({int(q): float(v) for q, v in pairs})

    @property
    def support(self):
        return np.array(list(self.weights), dtype=np.int64)

    @property
    def values(self):
        return np.array(list(self.weights.values()), dtype=np.float64)

    def log_terms(self, t):
        """``log(nu_q t^q)`` for every ``q`` in the support."""
        if t <= 0:
            return np.full(len(self.weights), -np.inf)
        return np.log(self.values) + self.support * math.log(t)

    def scaled(self, c):
        return NuMeasure({q: c * v for q, v in self.weights.items()})


def phi_nu(nu: NuMeasure, t: float) -> float:
    """Generating function ``sum_q nu_q t^q``."""
    if t < 0:
        raise DomainError(f"phi_nu needs t >= 0, got {t}")
    if t == 0:
        return 0.0
    return float(np.exp(logsumexp(nu.log_terms(t))))


def _cut(labels, lengths):
    out = []
    pos = 0
    for length in lengths:
        out.append(tuple(int(x) for x in labels[pos:pos + length]))
        pos += length
    return out


def _crp_interactions(alpha, theta, lengths, rng):
    total = int(np.sum(lengths))
    labels = crp_labels(alpha, theta, total, rng)
    k = int(labels.max()) + 1 if total else 0
    return InteractionSet(_cut(labels, lengths), tuple(range(k)))


def _check_pmf(p):
    p = {int(q): float(v) for q, v in dict(p).items() if v > 0}
    if not p or any(q < 1 for q in p):
        raise DomainError("length law must put mass on positive integers")
    if abs(sum(p.values()) - 1.0) > 1e-12:
        raise DomainError(f"length law sums to {sum(p.values())!r}, not 1")
    return p


def sample_hollywood(alpha, theta, p, n, random_state=None) -> InteractionSet:
    """``HM_n(alpha, theta; p)``: one CRP sequence cut into ``n`` i.i.d.-length pieces."""
    alpha, theta = check_crp_params(alpha, theta)
    p = _check_pmf(p)
    rng = check_rng(random_state)
    qs = np.array(list(p), dtype=np.int64)
    lengths = rng.choice(qs, size=n, p=np.array(list(p.values())))
    return _crp_interactions(alpha, theta, lengths, rng)


def sample_icrp(alpha, theta, p, n_sampler, random_state=None) -> InteractionSet:
    """``ICRP_N(alpha, theta; p)`` with ``N = n_sampler(rng)``."""
    rng = check_rng(random_state)
    n = int(n_sampler(rng))
    if n == 0:
        return InteractionSet.empty()
    return sample_hollywood(alpha, theta, p, n, rng)


@dataclass
class SicrpDraw:
    iset: InteractionSet
    t: float
    n: int
    lengths: np.ndarray
    nu: NuMeasure


def sample_sicrp(alpha, theta, nu: NuMeasure, random_state=None, t=None,
                 expected_counts=False) -> SicrpDraw:
    """Draw from ``SICRP(alpha, theta; nu)`` together with its latent variables.

    Parameters
    ----------
    nu : NuMeasure
        The length measure.  With ``expected_counts=True`` the entries are read
        as ``nu_q t^q``, the expected number of interactions of length ``q``
        given the drawn ``t``; the implied ``nu_q`` is never formed.
    t : float, optional
        Condition on the gamma variable instead of drawing ``t ~ Gamma(theta, 1)``.
    """
    alpha, theta = check_crp_params(alpha, theta)
    if theta <= 0:
        raise DomainError(f"SICRP needs theta > 0, got {theta}")
    rng = check_rng(random_state)
    if t is None:
        t = float(rng.gamma(theta))
    # nu_q t^q overflows for long interactions, so stay in log space
    log_terms = np.log(nu.values) if expected_counts else nu.log_terms(t)
    total = logsumexp(log_terms)
    n = int(rng.poisson(math.exp(total))) if np.isfinite(total) else 0
    if n == 0:
        return SicrpDraw(InteractionSet.empty(), t, 0, np.zeros(0, dtype=np.int64), nu)
    probs = np.exp(log_terms - total)
    lengths = rng.choice(nu.support, size=n, p=probs / probs.sum())
    return SicrpDraw(_crp_interactions(alpha, theta, lengths, rng), t, n, lengths, nu)


@dataclass(frozen=True)
class HicrpParams:
    """Parameters of a ``d``-level HICRP, coarsest level first.

    ``alphas`` and ``ms`` are nondecreasing with ``ms[0] == 0``; level ``i`` is
    marginally ``ICRP(alphas[i], theta + ms[i])``.
    """

    alphas: tuple
    theta: float
    ms: tuple
    nu: NuMeasure
    expected_counts: bool = False

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        ms = tuple(int(m) for m in self.ms)
        if not alphas or len(alphas) != len(ms):
            raise DomainError("alphas and ms must be nonempty and of equal length")
        if any(not 0.0 <= a < 1.0 for a in alphas) or list(alphas) != sorted(alphas):
            raise DomainError(f"alphas must be nondecreasing in [0, 1), got {alphas}")
        if ms[0] != 0 or list(ms) != sorted(ms) or any(m != mm for m, mm in zip(ms, self.ms)):
            raise DomainError(f"ms must be nondecreasing integers starting at 0, got {self.ms}")
        if not self.theta > -alphas[0]:
            raise DomainError(f"need theta > -alpha_1, got {self.theta}")
        if len(alphas) > 1 and alphas[-1] <= 0:
            raise DomainError("coagulation between levels needs alpha > 0")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "ms", ms)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def depth(self):
        return len(self.alphas)


@dataclass
class HicrpDraw:
    levels: list
    parent_maps: list
    auxes: list
    finest: SicrpDraw = field(repr=False)


def sample_hicrp(params: HicrpParams, random_state=None) -> HicrpDraw:
    """Sample all levels of a HICRP, coarsest level first.

    The finest level is drawn from ``SICRP(alpha_d, theta + m_d; nu)`` and each
    coarser level is the ``(alpha_{i+1} -> alpha_i, theta + m_i)``-PDGM
    coagulation of the next finer one with ``m_{i+1} - m_i`` steps.
    ``parent_maps[i]`` maps labels of level ``i + 1`` to level ``i``.
    """
    rng = check_rng(random_state)
    d = params.depth
    top = sample_sicrp(params.alphas[-1], params.theta + params.ms[-1], params.nu, rng,
                       expected_counts=params.expected_counts)
    levels = [top.iset]
    maps, auxes = [], []
    for i in range(d - 2, -1, -1):
        finer = levels[0]
        p = PdgmParams(params.alphas[i], params.alphas[i + 1], params.theta + params.ms[i],
                       params.ms[i + 1] - params.ms[i])
        if len(finer) == 0:
            coarser, aux = InteractionSet.empty(), None
            pm = ParentMap({}, (), ())
        else:
            coarser, aux = icoag_m(finer, p, rng)
            pm = parent_map(finer, coarser)
        levels.insert(0, coarser)
        maps.insert(0, pm)
        auxes.insert(0, aux)
    return HicrpDraw(levels, maps, auxes, top)
