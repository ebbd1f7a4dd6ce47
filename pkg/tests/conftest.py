"""Shared test helpers: random distribution pairs and a mutual-information
reference implementation, used to cross-check the f_p functional."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, settings

from membound.measures import DiscreteDistribution

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def random_distribution(
    rng: np.random.Generator,
    max_atoms: int = 6,
    lo: float = 0.0,
    hi: float = 1.0,
) -> DiscreteDistribution:
    """A random finite distribution with locations in [lo, hi]."""
    count = int(rng.integers(1, max_atoms + 1))
    locations = lo + (hi - lo) * rng.random(count)
    weights = rng.random(count) + 1e-3
    weights /= weights.sum()
    return DiscreteDistribution(tuple(zip(locations.tolist(), weights.tolist())))


def random_pair_shared_support(
    rng: np.random.Generator, max_atoms: int = 6
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """Two random distributions over one location set, so KL is finite
    in both directions."""
    count = int(rng.integers(2, max_atoms + 1))
    locations = rng.random(count)
    pair = []
    for _ in range(2):
        weights = rng.random(count) + 1e-3
        weights /= weights.sum()
        pair.append(DiscreteDistribution(tuple(zip(locations.tolist(), weights.tolist()))))
    return pair[0], pair[1]


def direct_f_p(p: float, mu_K: DiscreteDistribution, mu_N: DiscreteDistribution) -> float:
    """I(X; X_hat)/p computed straight from the joint law of
    X ~ Bern(p), X_hat | X=1 ~ mu_K, X_hat | X=0 ~ mu_N."""
    mass_K = dict(mu_K.atoms)
    mass_N = dict(mu_N.atoms)
    locations = sorted(set(mass_K) | set(mass_N))
    information = 0.0
    for loc in locations:
        pk = mass_K.get(loc, 0.0)
        pn = mass_N.get(loc, 0.0)
        marginal = p * pk + (1.0 - p) * pn
        for weight, conditional in ((p, pk), (1.0 - p, pn)):
            joint = weight * conditional
            if joint > 0.0:
                information += joint * math.log2(conditional / marginal)
    return information / p
