"""
BD-RIS toolkit.

Modeling, optimization and simulation of beyond-diagonal reconfigurable
intelligent surfaces: multiport network algebra, circuit topologies,
physics-consistent channels, beamforming solvers, channel estimation,
hardware impairments, closed-form analysis and a Monte-Carlo runner.
"""

from bdris.config import __version__, settings

__all__ = ["__version__", "settings"]
