import os
import sys

import numpy as np
import pytest

# Add the repository root to Python path
repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, repo_root)

from src import ndarray as nd  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def seq3():
    """sequential [10;10;10]"""
    return nd.sequential((10, 10, 10))

