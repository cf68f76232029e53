import pytest

from dualprox.repro import ReproContext


@pytest.fixture(scope="session")
def ctx():
    """Shared reproduction context so the market traces are computed once."""
    return ReproContext()
