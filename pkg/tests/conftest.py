import pytest
from hypothesis import HealthCheck, settings

import helpers

settings.register_profile(
    "codec",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("codec")


@pytest.fixture(scope="session")
def drift_seq():
    return helpers.drift_sequence()


@pytest.fixture(scope="session")
def blob_seq():
    return helpers.blob_sequence()


@pytest.fixture(scope="session")
def fixture_sequences(drift_seq, blob_seq):
    return {"drift": drift_seq, "blob": blob_seq}


@pytest.fixture(scope="session")
def natural_frames(drift_seq, blob_seq):
    return [drift_seq[0], blob_seq[0], drift_seq[12], blob_seq[12]]
