# commands/cmd_simulate.py
import logging
from pathlib import Path
from typing import Optional

from config_loader import RunConfig
from modules.io_formats import (
    CSV_FLOAT_FORMAT,
    write_gray,
    write_measurements_bin,
    write_measurements_csv,
    write_plan_csv,
    write_reconstruction,
    write_spectrum,
)
from modules.quality_metrics import RoiMask
from modules.report_components import layout_summary_lines, metrics_lines
from scene_loader import SceneLoader
from uffsi_simulator import SimulationResult, UffsiSimulator, build_layout, plan_for_sampling

logger = logging.getLogger(__name__)


def main(cfg: RunConfig, scene_path: Optional[str] = None) -> SimulationResult:
    """Acquire and reconstruct one scene (the test chart when no scene is given)"""
    scene = SceneLoader().load_or_chart(scene_path, cfg.grid, cfg.chart)
    layout = build_layout(cfg.structure_params, cfg.grid)
    plan = plan_for_sampling(layout, cfg.sampling.ratio, cfg.sampling.budget, cfg.sampling.reference_ratio)
    roi = RoiMask.from_box(cfg.grid, cfg.compare.roi_box) if cfg.compare.roi_box else None

    simulator = UffsiSimulator(spec=cfg.pattern, noise=cfg.noise, projection=cfg.projection,
                               threads=cfg.threads, display_sigma=cfg.display_sigma)
    result = simulator.simulate(scene, layout, plan, roi)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_reconstruction(out / 'reconstruction.pgm', result.reconstruction)
    write_gray(out / 'reconstruction_display.pgm', result.display)
    if cfg.write_png:
        write_reconstruction(out / 'reconstruction.png', result.reconstruction)
        write_gray(out / 'reconstruction_display.png', result.display)
    write_plan_csv(out / 'plan.csv', plan)
    write_measurements_csv(out / 'measurements.csv', result.measurements)
    write_measurements_bin(out / 'measurements.bin', result.measurements)
    write_spectrum(out / 'spectrum.bin', result.spectrum)

    frame = result.metrics_frame(seed=cfg.seed, config_sha256=cfg.config_hash, scene=scene.id)
    frame.to_csv(out / 'metrics.csv', index=False, float_format=CSV_FLOAT_FORMAT)

    print('\n'.join(layout_summary_lines(layout) + [''] + metrics_lines(result.metrics)))
    logger.info("simulation artifacts written to %s", out)
    return result
