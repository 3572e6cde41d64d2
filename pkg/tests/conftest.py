import numpy as np
import pytest

from qosrec.data import QosMatrix, ServiceRecord, UserRecord


@pytest.fixture
def small_matrix():
    """12 x 15 matrix with ~30% missing cells, deterministic."""
    rng = np.random.default_rng(11)
    vals = rng.uniform(0.1, 5.0, size=(12, 15))
    vals[rng.random((12, 15)) < 0.3] = -1.0
    return QosMatrix(values=vals, kind="response_time")


@pytest.fixture
def user_record():
    return UserRecord(
        user_id=0,
        ip_address="12.108.127.138",
        country="United States",
        ip_number="208437130",
        autonomous_system="AS7018 AT&T Services, Inc.",
        latitude=38.0,
        longitude=-97.0,
    )


@pytest.fixture
def service_record():
    return ServiceRecord(
        service_id=0,
        wsdl_address="http://example.com/calc?wsdl",
        provider="example.com",
        ip_address="93.184.216.34",
        country="United States",
        ip_number="1572395554",
        autonomous_system="AS15133 Edgecast Inc.",
        latitude=34.05,
        longitude=-118.24,
    )
