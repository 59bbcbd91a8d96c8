# modules/sensing.py
"""
Single-pixel acquisition: project each pattern onto the scene and integrate to
one detector reading, optionally perturbed by seeded Gaussian noise.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from modules.errors import DimensionError, NumericError, ParameterError, SceneError
from modules.fourier_engine import (
    FrequencyPlan,
    PatternSpec,
    _check_weights,
    phase_quad,
    weight_lattice_pattern,
)
from modules.fovea_geometry import CellLayout, WeightVector, cell_average

logger = logging.getLogger(__name__)

PROJECTIONS = ('pixel', 'cell')


@dataclass(frozen=True, eq=False)
class Scene:
    image: np.ndarray
    id: str = 'scene'

    def __post_init__(self):
        image = np.ascontiguousarray(self.image, dtype=float)
        if image.ndim != 2:
            raise DimensionError(f"scene must be a 2D (Y, X) array, got shape {image.shape}")
        if not np.isfinite(image).all():
            raise NumericError(f"scene '{self.id}' contains non-finite values")
        if (image < 0).any():
            raise SceneError(f"scene '{self.id}' contains negative intensities")
        image.flags.writeable = False
        object.__setattr__(self, 'image', image)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.image.shape


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian noise; sigma is relative to the mean noiseless DC reading"""
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ParameterError(f"noise sigma must be a finite value >= 0, got {self.sigma}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"noise seed must be a non-negative integer, got {self.seed}")

    @property
    def is_noiseless(self) -> bool:
        return self.sigma == 0


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    plan: FrequencyPlan
    readings: np.ndarray
    noise: NoiseConfig = NoiseConfig()
    projection: str = 'pixel'

    def __post_init__(self):
        readings = np.ascontiguousarray(self.readings, dtype=float)
        readings.flags.writeable = False
        object.__setattr__(self, 'readings', readings)

    @property
    def n_readings(self) -> int:
        return int(self.readings.size)

    def reading(self, freq_index: int, phase_index: int) -> float:
        return float(self.readings[freq_index, phase_index])

    def as_mapping(self) -> Dict[Tuple[Any, int], float]:
        """(frequency, phase index) -> reading"""
        return {(self.plan.freq(i), j): float(self.readings[i, j])
                for i in range(self.plan.n_freq) for j in range(4)}

    def to_frame(self) -> pd.DataFrame:
        """Long form: one row per (frequency, phase)"""
        rows: List[Dict[str, Any]] = []
        for i in range(self.plan.n_freq):
            f = self.plan.freq(i)
            for j in range(4):
                row: Dict[str, Any] = {'k': f} if self.plan.ndim == 1 else {'k': f[0], 'k_v': f[1]}
                row['phase'] = j
                row['reading'] = float(self.readings[i, j])
                rows.append(row)
        return pd.DataFrame(rows)


def _as_scene(scene: Union[Scene, np.ndarray]) -> Scene:
    return scene if isinstance(scene, Scene) else Scene(np.asarray(scene))


def measure(scene: Union[Scene, np.ndarray], pattern: np.ndarray) -> float:
    """Bucket-detector reading: sum over all pixels of pattern·scene (pairwise order)"""
    image = _as_scene(scene).image
    pattern = np.asarray(pattern, dtype=float)
    if pattern.shape != image.shape:
        raise DimensionError(f"pattern shape {pattern.shape} does not match scene {image.shape}")
    return float(np.sum(pattern * image))


def resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ParameterError(f"threads must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def noise_draw(seed: int, freq_index: int, phase_index: int) -> float:
    """Standard normal draw keyed by (seed, frequency slot, phase slot)"""
    bit_gen = np.random.Philox(key=seed, counter=[freq_index, phase_index, 0, 0])
    return float(np.random.Generator(bit_gen).standard_normal())


def run_acquisition(scene: Union[Scene, np.ndarray], layout: CellLayout, weights: WeightVector,
                    plan: FrequencyPlan, spec: PatternSpec = PatternSpec(),
                    noise: Optional[NoiseConfig] = None, projection: str = 'pixel',
                    threads: int = 1) -> MeasurementSet:
    """
    Four readings per planned frequency.

    projection='pixel' projects every foveated pattern over the full pixel grid;
    projection='cell' folds the scene onto cell means once and projects the
    plain lattice pattern, which gives the same readings.
    """
    scene = _as_scene(scene)
    noise = noise or NoiseConfig()
    if projection not in PROJECTIONS:
        raise ParameterError(f"projection must be one of {PROJECTIONS}, got {projection!r}")
    if scene.shape != layout.grid.shape:
        raise DimensionError(f"scene shape {scene.shape} does not match grid {layout.grid.shape} (Y, X)")
    if plan.lattice_shape != layout.lattice.shape:
        raise DimensionError(f"plan lattice {plan.lattice_shape} does not match layout {layout.lattice.shape}")
    _check_weights(layout, weights)

    lattice = layout.lattice
    readings = np.full((plan.n_freq, 4), np.nan)
    means = cell_average(scene.image, layout).ravel() if projection == 'cell' else None

    def _acquire_chunk(indices: range) -> None:
        for i in indices:
            quad = phase_quad(lattice, plan.freq(i), spec)
            for j in range(4):
                if means is not None:
                    readings[i, j] = float(np.sum(quad[j].ravel() * means))
                else:
                    readings[i, j] = measure(scene, weight_lattice_pattern(quad[j], layout, weights))
        logger.debug("acquired frequencies %d..%d", indices.start, indices.stop - 1)

    n_workers = min(resolve_threads(threads), max(1, plan.n_freq))
    chunk = max(1, math.ceil(plan.n_freq / (n_workers * 4)))
    chunks = [range(s, min(s + chunk, plan.n_freq)) for s in range(0, plan.n_freq, chunk)]
    if n_workers == 1:
        for c in chunks:
            _acquire_chunk(c)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            # list() re-raises worker exceptions here
            list(pool.map(_acquire_chunk, chunks))

    if not noise.is_noiseless:
        dc_level = float(np.mean(readings[0]))
        scale = noise.sigma * dc_level
        for i in range(plan.n_freq):
            for j in range(4):
                readings[i, j] += scale * noise_draw(noise.seed, i, j)
        logger.info("added Gaussian noise: sigma=%g x DC level %.6g", noise.sigma, dc_level)

    if not np.isfinite(readings).all():
        raise NumericError("non-finite detector readings")
    logger.info("acquisition (%s projection): %d readings for %d frequencies", projection, readings.size,
                plan.n_freq)
    return MeasurementSet(plan=plan, readings=readings, noise=noise, projection=projection)


def lattice_readings(scene: Union[Scene, np.ndarray], layout: CellLayout, plan: FrequencyPlan,
                     spec: PatternSpec = PatternSpec()) -> np.ndarray:
    """Σ_cells P_FSI·ō for every planned frequency and phase (uniform-sampling reference)"""
    means = cell_average(_as_scene(scene).image, layout).ravel()
    out = np.empty((plan.n_freq, 4))
    for i in range(plan.n_freq):
        quad = phase_quad(layout.lattice, plan.freq(i), spec)
        out[i] = quad.reshape(4, -1) @ means
    return out
