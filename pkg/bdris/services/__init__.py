"""
Services package for the BD-RIS toolkit.

This package contains all service classes of the toolkit.
"""

from bdris.services.network_service import NetworkService, get_network_service
from bdris.services.topology_service import TopologyService, get_topology_service
from bdris.services.channel_service import ChannelService, get_channel_service
from bdris.services.optimize_service import OptimizeService, get_optimize_service
from bdris.services.estimate_service import EstimateService, get_estimate_service
from bdris.services.impair_service import ImpairService, get_impair_service
from bdris.services.analysis_service import AnalysisService, get_analysis_service
from bdris.services.experiment_service import ExperimentService, get_experiment_service, load_config
from bdris.services.export_service import ExportService, get_export_service
from bdris.services.selftest_service import SelftestService, get_selftest_service

__all__ = [
    "NetworkService",
    "get_network_service",
    "TopologyService",
    "get_topology_service",
    "ChannelService",
    "get_channel_service",
    "OptimizeService",
    "get_optimize_service",
    "EstimateService",
    "get_estimate_service",
    "ImpairService",
    "get_impair_service",
    "AnalysisService",
    "get_analysis_service",
    "ExperimentService",
    "get_experiment_service",
    "load_config",
    "ExportService",
    "get_export_service",
    "SelftestService",
    "get_selftest_service",
]
