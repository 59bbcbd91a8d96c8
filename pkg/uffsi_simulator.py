# uffsi_simulator.py
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from modules.errors import DimensionError, ParameterError
from modules.fourier_engine import (
    FrequencyPlan,
    PatternSpec,
    Spectrum,
    assemble_spectrum,
    conjugate_representatives,
    make_frequency_plan,
    plan_for_count,
    reconstruct,
)
from modules.fovea_geometry import (
    CellLayout,
    CircularParams,
    PixelGrid,
    RectParams,
    RotRectParams,
    WeightVector,
    build_circular_layout,
    build_identity_layout,
    build_rect_layout,
    build_rotrect_layout,
    cell_average,
    compute_weights,
    expand_to_pixels,
)
from modules.quality_metrics import RoiMask, normalize_for_display, score_image, smooth_nroi
from modules.sampling_math import (
    budget_for_reference_ratio,
    budget_spread,
    frequencies_for_budget,
    lr_downsample_factor,
    redundancy_reduction,
)
from modules.sensing import MeasurementSet, NoiseConfig, Scene, run_acquisition

logger = logging.getLogger(__name__)

LayoutParams = Union[CircularParams, RectParams, RotRectParams, None]

BUDGET_SPREAD_LIMIT = 0.005


def build_layout(params: LayoutParams, grid: PixelGrid) -> CellLayout:
    """Dispatch on the parameter type; None builds the identity layout"""
    if params is None:
        return build_identity_layout(grid)
    if isinstance(params, CircularParams):
        return build_circular_layout(params, grid)
    if isinstance(params, RotRectParams):
        return build_rotrect_layout(params, grid)
    if isinstance(params, RectParams):
        return build_rect_layout(params, grid)
    raise ParameterError(f"unknown layout parameters {type(params).__name__}")


def plan_for_sampling(layout: CellLayout, ratio: Optional[float] = None, budget: Optional[int] = None,
                      reference_ratio: Optional[float] = None) -> FrequencyPlan:
    """Plan from exactly one of a sampling ratio, a measurement budget or an HR reference ratio"""
    given = [v for v in (ratio, budget, reference_ratio) if v is not None]
    if len(given) != 1:
        raise ParameterError("give exactly one of ratio, budget, reference_ratio")
    if ratio is not None:
        return make_frequency_plan(layout, ratio)
    if reference_ratio is not None:
        budget = budget_for_reference_ratio(reference_ratio, layout.grid.M)
    n_freq = frequencies_for_budget(budget)
    full = conjugate_representatives(layout).shape[0]
    if n_freq > full:
        logger.warning("budget %d exceeds full sampling (%d measurements); clamped", budget, 4 * full)
        n_freq = full
    return plan_for_count(layout, n_freq)


def box_downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Mean over factor×factor blocks; trailing rows/columns that do not fill a block are dropped"""
    Y, X = image.shape
    Yl, Xl = Y // factor, X // factor
    if Yl < 1 or Xl < 1:
        raise ParameterError(f"downsample factor {factor} leaves no pixels of a {X}x{Y} image")
    return image[:Yl * factor, :Xl * factor].reshape(Yl, factor, Xl, factor).mean(axis=(1, 3))


def box_upsample(image: np.ndarray, factor: int, shape: tuple) -> np.ndarray:
    """Pixel replication back to shape, edge-padding the dropped rows/columns"""
    up = np.repeat(np.repeat(image, factor, axis=0), factor, axis=1)
    pad = ((0, shape[0] - up.shape[0]), (0, shape[1] - up.shape[1]))
    return np.pad(up, pad, mode='edge')


@dataclass(eq=False)
class SimulationResult:
    layout: CellLayout
    weights: WeightVector
    plan: FrequencyPlan
    measurements: MeasurementSet
    spectrum: Spectrum
    reconstruction: np.ndarray
    cell_oracle: np.ndarray
    display: np.ndarray
    metrics: Dict[str, float] = field(default_factory=dict)

    def metrics_frame(self, **extra) -> pd.DataFrame:
        rows = {**self.metrics, **extra}
        return pd.DataFrame({'metric': list(rows), 'value': list(rows.values())})


@dataclass
class ArmRecord:
    arm: str
    size: int
    n_lattice: int
    Sr: float
    n_measurements: int
    roi_psnr_db: float
    roi_ssim: float
    global_psnr_db: float
    redundancy: float
    clamped: bool = False


@dataclass(eq=False)
class ComparisonReport:
    arms: List[ArmRecord]
    provenance: Dict[str, Any]
    warnings: List[str] = field(default_factory=list)
    reconstructions: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def arm(self, name: str) -> ArmRecord:
        for record in self.arms:
            if record.arm == name:
                return record
        raise KeyError(name)

    @property
    def budgets(self) -> Dict[str, int]:
        return {r.arm: r.n_measurements for r in self.arms}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.arms])


class UffsiSimulator:
    def __init__(self, spec: PatternSpec = PatternSpec(), noise: Optional[NoiseConfig] = None,
                 projection: str = 'pixel', threads: int = 1, display_sigma: float = 1.0):
        self.spec = spec
        self.noise = noise or NoiseConfig()
        self.projection = projection
        self.threads = threads
        self.display_sigma = display_sigma
        self.arms = self._initialize_arms()

    def _initialize_arms(self) -> List[str]:
        """The three arms of a matched-budget comparison: foveated, uniform HR, uniform LR"""
        return ['uffsi', 'fsi_hr', 'fsi_lr']

    def simulate(self, scene: Scene, layout: CellLayout, plan: FrequencyPlan,
                 roi: Optional[RoiMask] = None) -> SimulationResult:
        """Acquire, assemble and reconstruct one layout; metrics against the scene on roi"""
        weights = compute_weights(layout)
        measurements = run_acquisition(scene, layout, weights, plan, self.spec, self.noise,
                                       projection=self.projection, threads=self.threads)
        spectrum = assemble_spectrum(measurements, plan, self.spec)
        recon = reconstruct(spectrum, layout)
        oracle = expand_to_pixels(cell_average(scene.image, layout), layout)

        roi = roi or RoiMask.from_layout(layout)
        metrics = score_image(recon, scene.image, roi)
        metrics['oracle_max_abs_error'] = float(np.max(np.abs(recon - oracle)))
        metrics['n_cells'] = layout.N
        metrics['n_measurements'] = plan.n_measurements
        metrics['sampling_ratio'] = plan.Sr
        metrics['redundancy_reduction'] = redundancy_reduction(layout.grid.M, layout.N)

        display = normalize_for_display(recon)
        if layout.structure != 'identity':
            display = smooth_nroi(display, layout, self.display_sigma)
        return SimulationResult(layout, weights, plan, measurements, spectrum, recon, oracle, display, metrics)

    def _arm_plan(self, arm: str, layout: CellLayout, n_freq: Optional[int], ratio: Optional[float],
                  warnings: List[str]):
        full = conjugate_representatives(layout).shape[0]
        if ratio is not None:
            return make_frequency_plan(layout, ratio), False
        if n_freq > full:
            message = (f"budget {4 * n_freq} exceeds full sampling of arm '{arm}' "
                       f"({4 * full} measurements); clamped")
            logger.warning(message)
            warnings.append(message)
            return plan_for_count(layout, full), True
        return plan_for_count(layout, n_freq), False

    def _record(self, arm: str, layout: CellLayout, plan: FrequencyPlan, recon: np.ndarray, scene: Scene,
                roi: RoiMask, clamped: bool, M: int) -> ArmRecord:
        scores = score_image(recon, scene.image, roi)
        return ArmRecord(
            arm=arm,
            size=layout.N,
            n_lattice=layout.n_lattice,
            Sr=plan.Sr,
            n_measurements=plan.n_measurements,
            roi_psnr_db=scores['roi_psnr_db'],
            roi_ssim=scores['roi_ssim'],
            global_psnr_db=scores['global_psnr_db'],
            redundancy=redundancy_reduction(M, layout.N),
            clamped=clamped,
        )

    def compare(self, scene: Scene, layout: CellLayout, budget: Optional[int] = None,
                roi: Optional[RoiMask] = None, reference_ratio: Optional[float] = None,
                arm_ratios: Optional[Dict[str, float]] = None, lr_factor: int = 0,
                provenance: Optional[Dict[str, Any]] = None) -> ComparisonReport:
        """
        UFFSI vs uniform HR FSI vs uniform LR FSI.

        Budgets: arm_ratios gives each arm its own sampling ratio; otherwise every
        arm gets budget // 4 frequencies, where reference_ratio sets the budget to
        that of an HR run at that ratio.
        """
        grid = layout.grid
        if scene.shape != grid.shape:
            raise DimensionError(f"scene shape {scene.shape} does not match grid {grid.shape}")
        M = grid.M
        warnings: List[str] = []

        if arm_ratios is None:
            if reference_ratio is not None:
                budget = budget_for_reference_ratio(reference_ratio, M)
            if budget is None:
                raise ParameterError("comparison needs a budget, a reference_ratio or per-arm ratios")
            n_freq = frequencies_for_budget(budget)
            ratios: Dict[str, Optional[float]] = {arm: None for arm in self.arms}
            if reference_ratio is not None:
                ratios['fsi_hr'] = reference_ratio
        else:
            n_freq = None
            ratios = {arm: arm_ratios[arm] for arm in self.arms}

        roi = roi or RoiMask.from_layout(layout)
        records: List[ArmRecord] = []
        recons: Dict[str, np.ndarray] = {}

        # 1. UFFSI on the foveated layout
        plan, clamped = self._arm_plan('uffsi', layout, n_freq, ratios['uffsi'], warnings)
        result = self.simulate(scene, layout, plan, roi)
        recons['uffsi'] = result.reconstruction
        records.append(self._record('uffsi', layout, plan, result.reconstruction, scene, roi, clamped, M))
        logger.info("arm uffsi: N=%d, %d measurements", layout.N, plan.n_measurements)

        # 2. Uniform HR FSI on the full grid
        hr_layout = build_identity_layout(grid)
        plan, clamped = self._arm_plan('fsi_hr', hr_layout, n_freq, ratios['fsi_hr'], warnings)
        result = self.simulate(scene, hr_layout, plan, roi)
        recons['fsi_hr'] = result.reconstruction
        records.append(self._record('fsi_hr', hr_layout, plan, result.reconstruction, scene, roi, clamped, M))
        logger.info("arm fsi_hr: M=%d, %d measurements", M, plan.n_measurements)

        # 3. Uniform FSI at reduced resolution, replicated back to the grid for scoring
        f = lr_downsample_factor(M, layout.N, lr_factor)
        lr_image = box_downsample(scene.image, f)
        lr_grid = PixelGrid(lr_image.shape[1], lr_image.shape[0])
        lr_layout = build_identity_layout(lr_grid)
        lr_scene = Scene(lr_image, id=f"{scene.id}-lr{f}")
        plan, clamped = self._arm_plan('fsi_lr', lr_layout, n_freq, ratios['fsi_lr'], warnings)
        lr_result = self.simulate(lr_scene, lr_layout, plan, RoiMask.full(lr_grid))
        recon_up = box_upsample(lr_result.reconstruction, f, grid.shape)
        recons['fsi_lr'] = recon_up
        record = self._record('fsi_lr', lr_layout, plan, recon_up, scene, roi, clamped, M)
        records.append(record)
        logger.info("arm fsi_lr: %dx%d (factor %d), %d measurements", lr_grid.X, lr_grid.Y, f, plan.n_measurements)

        report = ComparisonReport(arms=records, provenance=dict(provenance or {}), warnings=warnings,
                                  reconstructions=recons)
        spread = budget_spread(report.budgets)
        if spread > BUDGET_SPREAD_LIMIT:
            message = f"arm budgets differ by {spread:.2%} (limit {BUDGET_SPREAD_LIMIT:.1%}): {report.budgets}"
            logger.warning(message)
            warnings.append(message)
        report.provenance.setdefault('roi', roi.note)
        report.provenance.setdefault('lr_factor', f)
        return report


def run_comparison(scene: Scene, roi: Optional[RoiMask], budget: Optional[int], layout_params: LayoutParams,
                   spec: PatternSpec = PatternSpec(), noise: Optional[NoiseConfig] = None, **options) -> ComparisonReport:
    """Build the foveated layout for the scene's grid and run the three-arm comparison"""
    grid = PixelGrid(scene.shape[1], scene.shape[0])
    layout = build_layout(layout_params, grid)
    simulator = UffsiSimulator(spec=spec, noise=noise,
                               projection=options.pop('projection', 'pixel'),
                               threads=options.pop('threads', 1),
                               display_sigma=options.pop('display_sigma', 1.0))
    return simulator.compare(scene, layout, budget=budget, roi=roi, **options)
