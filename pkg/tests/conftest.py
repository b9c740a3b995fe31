"""
Shared pytest fixtures.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bdris.services.analysis_service import AnalysisService  # noqa: E402
from bdris.services.channel_service import ChannelService  # noqa: E402
from bdris.services.estimate_service import EstimateService  # noqa: E402
from bdris.services.impair_service import ImpairService  # noqa: E402
from bdris.services.network_service import NetworkService  # noqa: E402
from bdris.services.optimize_service import OptimizeService  # noqa: E402
from bdris.services.topology_service import TopologyService  # noqa: E402
from bdris.utils.helpers import crandn, make_rng  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(20240917)


@pytest.fixture
def network() -> NetworkService:
    return NetworkService()


@pytest.fixture
def topology() -> TopologyService:
    return TopologyService()


@pytest.fixture
def channels() -> ChannelService:
    return ChannelService()


@pytest.fixture
def optimizer() -> OptimizeService:
    return OptimizeService()


@pytest.fixture
def estimator() -> EstimateService:
    return EstimateService()


@pytest.fixture
def impair() -> ImpairService:
    return ImpairService()


@pytest.fixture
def analysis() -> AnalysisService:
    return AnalysisService()


@pytest.fixture
def siso_pair(rng):
    """Random SISO channels (h_RI as a row, h_IT as a column) with M=8."""
    return crandn(rng, 1, 8), crandn(rng, 8, 1)
