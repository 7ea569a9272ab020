import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture
def fast_spec():
    from varexp import QuadratureSpec
    return QuadratureSpec(rel_tol=1e-6)
