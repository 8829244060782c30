import pytest

from cloudmr.store import BlockStore


@pytest.fixture
def store():
    return BlockStore(3)


@pytest.fixture
def big_store():
    return BlockStore(5)
