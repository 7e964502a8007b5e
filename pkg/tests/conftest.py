import os
import sys

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("macsk", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("macsk")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_report_header(config):
    from macsk import gf2

    return f"macsk GF(2) backend: {gf2.BACKEND}"
