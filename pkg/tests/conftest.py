import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from codec import CrcSpec  # noqa: E402
from construction import CodeSpec, construct_dega  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long Monte Carlo reproduction tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def toy_code():
    """N=8, info {3,5,6,7}, no CRC"""
    return CodeSpec(n=3, K=4, info_set=(3, 5, 6, 7))


@pytest.fixture(scope="session")
def crc_code():
    """P(64, 24+8) built by DE/GA at 3 dB"""
    return construct_dega(6, 32, 3.0, info_bits=24, crc=CrcSpec.crc8())


@pytest.fixture(scope="session")
def segmented_code():
    """P(64, 24+2x8): two CRC-protected segments"""
    return construct_dega(6, 40, 3.0, info_bits=24, crc=CrcSpec.crc8(), segments=2)


def noisy_llrs(spec, rng, ebno_db, info=None):
    """Encode random (or given) data and return (info, u, channel LLRs)"""
    from codec import frame_to_u, polar_transform

    if info is None:
        info = rng.integers(0, 2, size=spec.K, dtype=np.uint8)
    frame = frame_to_u(info, spec)
    sigma2 = 1.0 / (2.0 * spec.rate * 10.0 ** (ebno_db / 10.0))
    s = 1.0 - 2.0 * polar_transform(frame.u_vector).astype(float)
    y = s + np.sqrt(sigma2) * rng.standard_normal(spec.N)
    return info, frame.u_vector, 2.0 * y / sigma2
