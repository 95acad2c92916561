import pytest
from hypothesis import HealthCheck, settings

from transitlab.acceptance import ValidationContext
from transitlab.potentials import ModelSpec

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

MODELS = [ModelSpec(3, 0.0), ModelSpec(4, 0.0), ModelSpec(3, 1.0), ModelSpec(4, -1.0)]


@pytest.fixture(scope="session")
def ctx():
    """One validation context per session so expensive draws and tables are shared."""
    return ValidationContext()


@pytest.fixture(params=MODELS, ids=lambda m: m.key())
def model(request):
    return request.param
