# commands/cmd_patterns.py
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from config_loader import RunConfig
from modules.fourier_engine import frequencies_from_arg, synthesize_uffsi_pattern
from modules.fovea_geometry import compute_weights
from modules.io_formats import pattern_filename, write_gray, write_plan_csv
from uffsi_simulator import build_layout, plan_for_sampling

logger = logging.getLogger(__name__)


def main(cfg: RunConfig, k_list: Optional[Sequence[str]] = None) -> List[Path]:
    """
    Export the four phase-shifted foveated patterns of each requested frequency as 8-bit PGM.
    Without --k, the first four frequencies of the configured plan are exported.
    """
    layout = build_layout(cfg.structure_params, cfg.grid)
    weights = compute_weights(layout)
    plan = plan_for_sampling(layout, cfg.sampling.ratio, cfg.sampling.budget, cfg.sampling.reference_ratio)
    if k_list:
        freqs = frequencies_from_arg(k_list, layout.lattice)
    else:
        freqs = [plan.freq(i) for i in range(min(4, plan.n_freq))]

    out = Path(cfg.output_dir) / 'patterns'
    out.mkdir(parents=True, exist_ok=True)
    write_plan_csv(Path(cfg.output_dir) / 'plan.csv', plan)

    written = []
    for freq in freqs:
        for j, phase in enumerate(cfg.pattern.phases):
            pattern = synthesize_uffsi_pattern(layout, weights, freq, phase, cfg.pattern)
            written.append(write_gray(out / pattern_filename(freq, j), pattern))
    logger.info("wrote %d pattern images to %s", len(written), out)
    print(f"wrote {len(written)} patterns for {len(freqs)} frequencies to {out}")
    return written
