"""
Built-in invariant suite.

Fast checks of the properties the toolkit relies on, runnable from the
command line without a test framework installed.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from bdris.errors import BDRISError
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.results import VaractorCircuit
from bdris.models.topology import ComponentValues, Family
from bdris.services.analysis_service import get_analysis_service
from bdris.services.estimate_service import get_estimate_service
from bdris.services.impair_service import get_impair_service
from bdris.services.network_service import get_network_service
from bdris.services.optimize_service import get_optimize_service
from bdris.services.topology_service import get_topology_service
from bdris.utils.helpers import crandn, make_rng, relative_residual

logger = logging.getLogger(__name__)

Check = Callable[[np.random.Generator], Tuple[bool, str]]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one invariant check."""

    name: str
    passed: bool
    detail: str


class SelftestService:
    """Service running the invariant suite."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.network = get_network_service()
        self.topology = get_topology_service()
        self.optimizer = get_optimize_service()
        self.estimator = get_estimate_service()
        self.impair = get_impair_service()
        self.analysis = get_analysis_service()

    def checks(self) -> List[Tuple[str, Check]]:
        return [
            ("network round trip", self._round_trip),
            ("circuit complexity", self._complexity),
            ("optimality certificates", self._certificates),
            ("pattern gram identity", self._gram),
            ("varactor circle", self._varactor),
            ("lossless half-wave lines", self._half_wave),
            ("analysis anchors", self._anchors),
        ]

    def run(self, only: Optional[str] = None) -> List[CheckResult]:
        """
        Run every check (or those whose name contains ``only``).

        A check that raises counts as failed with the error as detail.
        """
        results = []
        for index, (name, check) in enumerate(self.checks()):
            if only and only not in name:
                continue
            try:
                passed, detail = check(make_rng(self.seed, index))
            except BDRISError as e:
                passed, detail = False, f"{type(e).__name__}: {e}"
            results.append(CheckResult(name, passed, detail))
            logger.debug(f"Selftest '{name}': {'PASS' if passed else 'FAIL'} ({detail})")
        return results

    def _round_trip(self, rng: np.random.Generator) -> Tuple[bool, str]:
        worst = 0.0
        for _ in range(20):
            z = NetworkMatrix(crandn(rng, 6, 6) * 50 + 50 * np.eye(6), NetworkKind.IMPEDANCE)
            s = self.network.convert(z, NetworkKind.SCATTERING)
            y = self.network.convert(s, NetworkKind.ADMITTANCE)
            back = self.network.convert(y, NetworkKind.IMPEDANCE)
            worst = max(worst, relative_residual(back.values - z.values, z.values))
        return worst < 1e-10, f"max relative error {worst:.2e}"

    def _complexity(self, rng: np.random.Generator) -> Tuple[bool, str]:
        m = 8
        expected = {
            Family.SINGLE: m,
            Family.FULLY: m * (m + 1) // 2,
            Family.TREE_TRIDIAGONAL: 2 * m - 1,
            Family.TREE_ARROWHEAD: 2 * m - 1,
        }
        wrong = []
        for family, count in expected.items():
            got = self.topology.circuit_complexity(self.topology.build_topology(family, m)).components
            if got != count:
                wrong.append(f"{family.value}={got}")
        group = self.topology.circuit_complexity(self.topology.build_topology(Family.GROUP, m, group_size=4)).components
        if group != m * 5 // 2:
            wrong.append(f"group={group}")
        return not wrong, ", ".join(wrong) or f"M={m} counts exact"

    def _certificates(self, rng: np.random.Generator) -> Tuple[bool, str]:
        worst = 0.0
        for _ in range(20):
            a, b = crandn(rng, 8), crandn(rng, 8)
            for name in ("unitary", "tree"):
                result = self.optimizer.get_siso_solver(name)(a, b)
                theta = self.optimizer.scattering_of(result).theta
                worst = max(worst, abs(1 - self.optimizer.optimality_ratio(a, theta, b)))
        return worst < 1e-8, f"max bound gap {worst:.2e}"

    def _gram(self, rng: np.random.Generator) -> Tuple[bool, str]:
        worst = 0.0
        for m, m_bar in ((4, 4), (4, 2), (4, 1), (6, 3)):
            patterns = self.estimator.group_patterns(m, m_bar)
            trace = float(np.real(np.trace(np.linalg.inv(self.estimator.gram(patterns)))))
            worst = max(worst, abs(trace - m_bar))
        return worst < 1e-10, f"max trace error {worst:.2e}"

    def _varactor(self, rng: np.random.Generator) -> Tuple[bool, str]:
        v = VaractorCircuit(l1=6e-9, l2=0.7e-9, r=1.0)
        f = 2.4e9
        centre, radius = self.impair.varactor_circle(v, f)
        samples = self.impair.varactor_admittance(v, np.linspace(*v.c_range, 50), f)
        worst = float(np.max(np.abs(np.abs(samples - centre) - radius)) / radius)
        return worst < 1e-10, f"max relative distance error {worst:.2e}"

    def _half_wave(self, rng: np.random.Generator) -> Tuple[bool, str]:
        t = self.topology.build_topology(Family.FULLY, 4)
        components = ComponentValues(
            ground=1j * rng.standard_normal(4) / 50,
            inter={e: 1j * rng.standard_normal() / 50 for e in t.active_edges},
        )
        wavelength = 0.125
        y = self.impair.lossy_line_admittance(t, components, wavelength / 2, 0.0, 2 * math.pi / wavelength)
        worst = float(np.max(np.abs(y.values.real)) / np.max(np.abs(y.values)))
        return worst < 1e-12, f"max relative real part {worst:.2e}"

    def _anchors(self, rng: np.random.Generator) -> Tuple[bool, str]:
        failures = []
        if self.analysis.scaling_laws(1).ratio != 1:
            failures.append("scaling ratio at M=1")
        if abs(self.analysis.group_gain_ratio(16, 1).value - 1) > 1e-12:
            failures.append("group ratio at M̄=1")
        if abs(self.analysis.group_gain_ratio(16, 16).value - self.analysis.scaling_laws(16).ratio) > 1e-12:
            failures.append("group ratio at M̄=M")
        if abs(self.analysis.mc_gain(NetworkMatrix(50 * np.eye(4), NetworkKind.IMPEDANCE)).value - 1) > 1e-12:
            failures.append("coupling gain without coupling")
        return not failures, ", ".join(failures) or "all anchors hold"


# Singleton instance
_selftest_service: Optional[SelftestService] = None


def get_selftest_service() -> SelftestService:
    """
    Get the singleton SelftestService instance.

    Returns:
        SelftestService instance
    """
    global _selftest_service
    if _selftest_service is None:
        _selftest_service = SelftestService()
    return _selftest_service
