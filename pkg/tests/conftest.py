"""Shared fixtures: curve parameters and cached simulation scenarios."""

import pytest

from atomkp.emsim import SimConfig, make_scenario
from atomkp.gfp import p256
from atomkp.scalar import Scalar


@pytest.fixture(scope="session")
def params():
    return p256()


@pytest.fixture(scope="session")
def build_scenario(params):
    """Factory for (cached) canned scenarios at analysis-friendly scale.

    Scenario rendering is deterministic, so one build can serve every
    test; callers must never mutate the returned trace.
    """
    cache = {}

    def _build(name="S1", key="11111", seed=3, scale=100,
               n_five=26, n_one=5):
        tag = (name, key, seed, scale, n_five, n_one)
        if tag not in cache:
            cfg = SimConfig(scale=scale, rng_seed=seed)
            cache[tag] = make_scenario(name, Scalar.from_string(key),
                                       params, cfg,
                                       n_five=n_five, n_one=n_one)
        return cache[tag]

    return _build
