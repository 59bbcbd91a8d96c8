# commands/cmd_layout.py
import logging
from pathlib import Path
from typing import Any, Dict

from config_loader import RunConfig
from modules.fovea_geometry import compute_weights
from modules.io_formats import write_cell_map, write_layout
from modules.report_components import layout_summary_lines
from modules.visualizations import create_cell_map_figure, write_figure
from uffsi_simulator import build_layout

logger = logging.getLogger(__name__)


def main(cfg: RunConfig) -> Dict[str, Any]:
    """Build the configured layout; write layout.bin, cellmap.pgm, cellmap.html and a summary"""
    layout = build_layout(cfg.structure_params, cfg.grid)
    weights = compute_weights(layout)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_layout(out / 'layout.bin', layout, weights)
    write_cell_map(out / 'cellmap.pgm', layout)
    write_figure(create_cell_map_figure(layout), out / 'cellmap.html', div_id='cellmap')

    lines = layout_summary_lines(layout)
    (out / 'layout_summary.txt').write_text('\n'.join(lines) + '\n', encoding='utf-8')
    print('\n'.join(lines))
    return layout.summary()
