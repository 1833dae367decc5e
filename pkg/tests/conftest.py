import functools

import pytest
from hypothesis import HealthCheck, settings

from levyholder import exponent as ex
from levyholder import indices as ix
from levyholder import spectral as sp

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def golden_pair(alpha, beta):
    """Shared (psi, mu, SpectralPair) so expensive shell evaluations are reused across tests."""
    psi = ex.isotropic_stable(alpha)
    mu = sp.riesz_like(beta)
    return psi, mu, ix.SpectralPair(psi, mu)


@functools.lru_cache(maxsize=None)
def golden_indices(alpha, beta):
    psi, mu, pair = golden_pair(alpha, beta)
    h = ix.fractal_index(psi, mu, "H", check_dalang=False, pair=pair)
    l = ix.fractal_index(psi, mu, "L", check_dalang=False, pair=pair)
    return h, l


@pytest.fixture
def stable_riesz():
    return golden_pair
