import pytest

from dpfingerprint.crypto_rand import SecretKey
from dpfingerprint.synthetic import random_database

MIXED_SIZES = [3, 5, 4, 4, 3, 2, 3, 3]


@pytest.fixture
def key():
    return SecretKey(b"test-owner-secret-0123456789abcdef")


@pytest.fixture
def other_key():
    return SecretKey(b"another-owner-secret-fedcba987654")


@pytest.fixture(scope="session")
def small_db():
    return random_database(MIXED_SIZES, 2000, rng_seed=11)
