from __future__ import annotations

import pytest

from qksched.model import default_model


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def crypto_params(model):
    return model.crypto


@pytest.fixture(scope="session")
def queue_params(model):
    return model.queue
