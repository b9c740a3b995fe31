"""
Experiment runner service.

This module executes declarative Monte-Carlo experiments: every sweep
point runs ``trials`` independent trials, each on its own random stream
derived from (seed, trial index), aggregates mean and standard error with
compensated summation, and attaches the matching closed-form value where
one exists.
"""

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
import scipy
from pydantic import ValidationError

from bdris.config import __version__, settings
from bdris.errors import InvalidInputError, NumericalError
from bdris.models.channel import ChannelDims, FadingKind, FadingSpec
from bdris.models.experiment import ExperimentConfig, ExperimentKind, ExperimentResult
from bdris.models.network import NetworkMatrix
from bdris.models.topology import Family
from bdris.services.analysis_service import get_analysis_service
from bdris.services.channel_service import get_channel_service, linear_array_positions
from bdris.services.estimate_service import get_estimate_service
from bdris.services.impair_service import get_impair_service
from bdris.services.network_service import get_network_service
from bdris.services.optimize_service import get_optimize_service, siso_gain
from bdris.services.topology_service import get_topology_service
from bdris.utils.helpers import make_rng, mean_stderr

logger = logging.getLogger(__name__)

# Entropy suffix of the offline codebook training stream; trial streams use (seed, t)
TRAINING_STREAM = (1, 1)

# Fixed parameters each kind falls back to when ``params`` omits them
DEFAULT_PARAMS: Dict[ExperimentKind, Dict[str, float]] = {
    ExperimentKind.SCALING: {"m": 16},
    ExperimentKind.GROUP: {"m": 16, "groupSize": 4},
    ExperimentKind.ESTIMATION: {"m": 4, "groupSize": 4, "n": 4, "sigma2": 1.0, "pilotPower": 1.0},
    ExperimentKind.CODEBOOK: {"m": 16, "bits": 1, "trainSize": 100, "sweeps": 10},
    ExperimentKind.MISO: {"m": 16, "n": 4, "power": 1.0},
    ExperimentKind.LOSSY: {"m": 8, "alpha": 0.0, "length": 0.1, "wavelength": 0.125},
    ExperimentKind.COUPLING: {"m": 8, "spacing": 0.25, "wavelength": 1.0, "radius": 0.005, "length": 0.5},
}

# Kinds whose outcome does not depend on the random stream
DETERMINISTIC = {ExperimentKind.COUPLING}

TrialOutcome = Dict[str, float]
ProgressCallback = Callable[[int, Dict[str, Any]], None]


class ConfigError(InvalidInputError):
    """Exception raised when an experiment configuration is missing or invalid."""
    pass


class SolverError(NumericalError):
    """Exception raised when a solver fails during a trial."""

    def __init__(self, message: str, trial_index: int):
        super().__init__(f"Trial {trial_index}: {message}")
        self.trial_index = trial_index


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment configuration from JSON.

    Raises:
        ConfigError: If the file is missing, unreadable or fails validation
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Experiment configuration not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        return ExperimentConfig.model_validate(doc)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}")
    except ValidationError as e:
        raise ConfigError(f"{path} failed validation: {e}")


class ExperimentService:
    """
    Service running Monte-Carlo experiments.

    Attributes:
        threads: Worker count of the trial pool
    """

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads or settings.threads
        self.channels = get_channel_service()
        self.optimizer = get_optimize_service()
        self.estimator = get_estimate_service()
        self.impair = get_impair_service()
        self.analysis = get_analysis_service()
        self.topology = get_topology_service()
        self.network = get_network_service()

    def run_experiment(
        self,
        cfg: ExperimentConfig,
        progress: Optional[ProgressCallback] = None,
    ) -> ExperimentResult:
        """
        Run every sweep point of an experiment.

        Trial ``t`` draws from ``make_rng(cfg.seed, t)`` at every sweep
        point, so points are compared on common random numbers and the
        result does not depend on the worker count.

        Args:
            cfg: Validated experiment configuration
            progress: Called with (point index, row) after each sweep point

        Returns:
            ExperimentResult with one row per sweep value

        Raises:
            ConfigError: If a parameter is invalid for the experiment kind
            SolverError: If a solver fails; carries the trial index
        """
        started = time.perf_counter()
        solvers = cfg.solver_names
        rows: List[Dict[str, Any]] = []
        logger.info(
            f"Running '{cfg.name}' ({cfg.kind.value}): {len(cfg.sweep.values)} points x {cfg.trials} trials, "
            f"{self.threads} threads"
        )

        for index, value in enumerate(cfg.sweep.values):
            params = {**DEFAULT_PARAMS[cfg.kind], **cfg.params, cfg.sweep.axis: value}
            try:
                trial = self._trial_function(cfg, params, solvers)
                theory = self._theory(cfg, params, solvers)
            except InvalidInputError as e:
                raise ConfigError(f"Sweep point {cfg.sweep.axis}={value}: {e}")

            trials = 1 if cfg.kind in DETERMINISTIC else cfg.trials
            outcomes = self._run_trials(trial, cfg.seed, trials)

            row: Dict[str, Any] = {"sweep_value": value}
            for name in solvers:
                mean, stderr = mean_stderr([o[name] for o in outcomes])
                row[f"{name}_mean"] = mean
                row[f"{name}_stderr"] = stderr
                row[f"{name}_theory"] = theory.get(name)
            rows.append(row)
            logger.debug(f"Point {cfg.sweep.axis}={value}: {row}")
            if progress is not None:
                progress(index, row)

        wall_time = time.perf_counter() - started
        metadata = {
            "name": cfg.name,
            "kind": cfg.kind.value,
            "seed": cfg.seed,
            "trials": cfg.trials,
            "threads": self.threads,
            "versions": {"bdris": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
            "generated_at": datetime.now().isoformat(),
            "wall_time_s": wall_time,
        }
        logger.info(f"Experiment '{cfg.name}' finished in {wall_time:.2f}s")
        return ExperimentResult(rows=rows, metadata=metadata)

    def _run_trials(self, trial: Callable[[np.random.Generator], TrialOutcome], seed: int, trials: int) -> List[TrialOutcome]:
        def run(index: int) -> TrialOutcome:
            try:
                return trial(make_rng(seed, index))
            except NumericalError as e:
                raise SolverError(str(e), index) from e

        if self.threads == 1 or trials == 1:
            return [run(t) for t in range(trials)]
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            return list(executor.map(run, range(trials)))

    # ------------------------------------------------------------------
    # Trials per experiment kind
    # ------------------------------------------------------------------

    def _trial_function(
        self, cfg: ExperimentConfig, params: Dict[str, float], solvers: List[str]
    ) -> Callable[[np.random.Generator], TrialOutcome]:
        kind = cfg.kind
        fading = cfg.fading
        m = _int_param(params, "m")

        if kind == ExperimentKind.SCALING:
            dims = ChannelDims(1, 1, m)

            def scaling(rng: np.random.Generator) -> TrialOutcome:
                ch = self.channels.sample_channels(fading, dims, rng)
                return {name: self.optimizer.get_siso_solver(name)(ch.h_ri, ch.h_it).objective for name in solvers}

            return scaling

        if kind == ExperimentKind.GROUP:
            group_size = _int_param(params, "groupSize")
            inner = "tree" if group_size > 1 else "dris"
            dims = ChannelDims(1, 1, m)
            self.topology.build_topology(Family.GROUP, m, group_size=group_size)

            def group(rng: np.random.Generator) -> TrialOutcome:
                ch = self.channels.sample_channels(fading, dims, rng)
                return {"group": self.optimizer.groupwise_solve(ch, group_size, solver=inner).objective}

            return group

        if kind == ExperimentKind.ESTIMATION:
            patterns = self.estimator.group_patterns(m, _int_param(params, "groupSize"))
            dims = ChannelDims(_int_param(params, "n"), 1, m)
            sigma2, pilot = params["sigma2"], params["pilotPower"]

            def estimation(rng: np.random.Generator) -> TrialOutcome:
                ch = self.channels.sample_channels(fading, dims, rng)
                return {"ls": self.estimator.estimation_trial(ch, patterns, sigma2, pilot, rng)}

            return estimation

        if kind == ExperimentKind.CODEBOOK:
            t = self.topology.build_topology(Family.FULLY, m)
            dims = ChannelDims(1, 1, m)
            train_rng = make_rng(cfg.seed, *TRAINING_STREAM)
            training = [self.channels.sample_channels(fading, dims, train_rng) for _ in range(_int_param(params, "trainSize"))]
            codebook = self.impair.learn_codebook(training, t, _int_param(params, "bits"), seed=cfg.seed)
            sweeps = _int_param(params, "sweeps")
            logger.debug(f"Learned {codebook.bits}-bit codebook {codebook.values}")

            def discrete(rng: np.random.Generator) -> TrialOutcome:
                ch = self.channels.sample_channels(fading, dims, rng)
                out: TrialOutcome = {}
                if "discrete" in solvers:
                    out["discrete"] = self.impair.discrete_optimize(ch, t, codebook, sweeps).objective
                if "continuous" in solvers:
                    out["continuous"] = self.optimizer.admittance_align_ls(t, ch.h_ri, ch.h_it).objective
                return out

            return discrete

        if kind == ExperimentKind.MISO:
            dims = ChannelDims(1, _int_param(params, "n"), m)
            power = params["power"]

            def miso(rng: np.random.Generator) -> TrialOutcome:
                ch = self.channels.sample_channels(fading, dims, rng)
                return {name: self.optimizer.miso_alternate(ch, power, solver=name)[1].objective for name in solvers}

            return miso

        if kind == ExperimentKind.LOSSY:
            return self._lossy_trial(fading, params, solvers)

        return self._coupling_trial(params, solvers)

    def _lossy_trial(self, fading: FadingSpec, params: Dict[str, float], solvers: List[str]) -> Callable[[np.random.Generator], TrialOutcome]:
        m = _int_param(params, "m")
        t = self.topology.build_topology(Family.TREE_TRIDIAGONAL, m)
        dims = ChannelDims(1, 1, m)
        alpha, length = params["alpha"], params["length"]
        beta = 2 * math.pi / params["wavelength"]

        def lossy(rng: np.random.Generator) -> TrialOutcome:
            ch = self.channels.sample_channels(fading, dims, rng)
            design = self.optimizer.admittance_align_ls(t, ch.h_ri, ch.h_it)
            out: TrialOutcome = {}
            if "lossless" in solvers:
                out["lossless"] = design.objective
            if "lossy" in solvers:
                components = self.topology.components_from_admittance(t, design.control)
                y = self.impair.lossy_line_admittance(t, components, length, alpha, beta)
                out["lossy"] = siso_gain(ch.h_ri.ravel(), self.network.scattering(y), ch.h_it.ravel())
            return out

        return lossy

    def _coupling_trial(self, params: Dict[str, float], solvers: List[str]) -> Callable[[np.random.Generator], TrialOutcome]:
        m = _int_param(params, "m")
        wavelength = params["wavelength"]
        spacing = params["spacing"] * wavelength
        matrices: Dict[str, NetworkMatrix] = {}
        if "isotropic" in solvers:
            matrices["isotropic"] = self.channels.isotropic_coupling(m, spacing, wavelength)
        if "dipole" in solvers:
            positions = linear_array_positions(m, spacing)
            matrices["dipole"] = self.channels.dipole_coupling(
                positions, params["radius"] * wavelength, params["length"] * wavelength, wavelength
            )
        gains = {name: self.analysis.mc_gain(z).value for name, z in matrices.items()}

        def coupling(rng: np.random.Generator) -> TrialOutcome:
            return dict(gains)

        return coupling

    # ------------------------------------------------------------------
    # Closed-form companions
    # ------------------------------------------------------------------

    def _theory(self, cfg: ExperimentConfig, params: Dict[str, float], solvers: List[str]) -> Dict[str, float]:
        kind = cfg.kind
        fading = cfg.fading

        if kind == ExperimentKind.ESTIMATION:
            patterns = self.estimator.group_patterns(_int_param(params, "m"), _int_param(params, "groupSize"))
            return {"ls": self.estimator.theoretical_mse(patterns, _int_param(params, "n"), params["sigma2"], params["pilotPower"])}

        if fading.kind != FadingKind.RAYLEIGH or fading.direct_link:
            return {}
        # Average gains scale with the product of both link pathlosses
        scale = (fading.distances.ri * fading.distances.it) ** (-fading.pathloss_exponent)
        m = _int_param(params, "m")

        if kind == ExperimentKind.SCALING:
            laws = self.analysis.scaling_laws(m)
            closed = {"dris": laws.dris, "unitary": laws.bdris, "tree": laws.bdris, "penalty": laws.bdris}
            return {name: scale * closed[name] for name in solvers if name in closed}
        if kind == ExperimentKind.GROUP:
            return {"group": scale * self.analysis.group_gain(m, _int_param(params, "groupSize"))}
        if kind == ExperimentKind.LOSSY and "lossless" in solvers:
            return {"lossless": scale * self.analysis.scaling_laws(m).bdris}
        return {}


def _int_param(params: Dict[str, float], name: str) -> int:
    value = params.get(name)
    if value is None or float(value) != int(value) or int(value) < 1:
        raise InvalidInputError(f"Parameter '{name}' must be a positive integer, got {value}")
    return int(value)


# Singleton instance
_experiment_service: Optional[ExperimentService] = None


def get_experiment_service() -> ExperimentService:
    """
    Get the singleton ExperimentService instance.

    Returns:
        ExperimentService instance
    """
    global _experiment_service
    if _experiment_service is None:
        _experiment_service = ExperimentService()
    return _experiment_service
