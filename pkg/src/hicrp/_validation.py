"""Input validation helpers shared by the estimators and samplers."""

from __future__ import annotations

import numbers

import numpy as np


class DomainError(ValueError):
    """Raised when parameters or inputs fall outside a model's allowable range."""


class GuardError(ValueError):
    """Raised when an exhaustive enumeration would exceed its size guard."""


class DataError(ValueError):
    """Raised for malformed or inconsistent data."""


def check_rng(random_state=None):
    """Turn ``random_state`` into a :class:`numpy.random.Generator`.

    All sampling in this package uses the PCG64 bit generator; an ``int`` or
    :class:`numpy.random.SeedSequence` seeds a fresh PCG64 stream, a
    ``Generator`` is passed through unchanged.
    """
    if random_state is None:
        return np.random.default_rng()
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.Generator(np.random.PCG64(random_state))
    raise TypeError(f"cannot build a random Generator from {random_state!r}")


def spawn_rngs(random_state, n):
    """Independent child generators derived from one seed."""
    if isinstance(random_state, np.random.Generator):
        seeds = random_state.bit_generator.seed_seq.spawn(n)
    elif isinstance(random_state, np.random.SeedSequence):
        seeds = random_state.spawn(n)
    else:
        seeds = np.random.SeedSequence(random_state).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in seeds]


def check_crp_params(alpha, theta):
    alpha = float(alpha)
    theta = float(theta)
    if not (np.isfinite(alpha) and np.isfinite(theta)):
        raise DomainError(f"CRP parameters must be finite, got ({alpha}, {theta})")
    if 0.0 <= alpha < 1.0:
        if theta < -alpha:
            raise DomainError(f"need theta >= -alpha, got alpha={alpha}, theta={theta}")
    elif alpha == 1.0:
        if theta <= -1.0:
            raise DomainError(f"need theta > -1 when alpha == 1, got theta={theta}")
    else:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha, theta


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
