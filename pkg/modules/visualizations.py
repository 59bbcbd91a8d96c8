import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from modules.fovea_geometry import CellLayout
from modules.io_formats import cell_map_image

logger = logging.getLogger(__name__)


def create_cell_map_figure(layout: CellLayout) -> go.Figure:
    """
    Cell map of a layout: fovea pixels white, each periphery cell one gray tone.
    Hovering shows the cell index of a pixel.
    """
    tones = cell_map_image(layout)
    cells = layout.pixel_to_cell.reshape(layout.grid.shape)
    summary = layout.summary()

    fig = go.Figure()
    fig.add_trace(go.Heatmap(
        z=tones,
        customdata=cells,
        colorscale='Greys',
        reversescale=True,
        showscale=False,
        hovertemplate='x=%{x}, y=%{y}<br>cell %{customdata}<extra></extra>',
    ))
    fig.update_layout(
        title=f"{layout.structure} layout: N={summary['N']:,} cells on {layout.grid.X}×{layout.grid.Y}",
        yaxis=dict(autorange='reversed', scaleanchor='x'),
        paper_bgcolor='rgba(0,0,0,0)',
        plot_bgcolor='rgba(0,0,0,0)',
        margin=dict(l=40, r=40, t=50, b=20),
    )
    return fig


def create_comparison_figure(scene: np.ndarray, reconstructions: Dict[str, np.ndarray],
                             titles: Dict[str, str]) -> go.Figure:
    """Scene next to each arm's reconstruction, shared gray scale [0, 1]"""
    panels = [('scene', scene)] + list(reconstructions.items())
    fig = make_subplots(rows=1, cols=len(panels),
                        subplot_titles=[titles.get(name, name) for name, _ in panels])
    for col, (name, img) in enumerate(panels, start=1):
        fig.add_trace(go.Heatmap(
            z=np.clip(img, 0.0, 1.0),
            zmin=0.0,
            zmax=1.0,
            colorscale='Greys',
            reversescale=True,
            showscale=False,
            name=name,
        ), row=1, col=col)
        fig.update_yaxes(autorange='reversed', row=1, col=col)
    fig.update_layout(
        height=360,
        width=320 * len(panels),
        paper_bgcolor='rgba(0,0,0,0)',
        plot_bgcolor='rgba(0,0,0,0)',
        margin=dict(l=20, r=20, t=50, b=20),
    )
    return fig


def write_figure(fig: go.Figure, path: Union[str, Path], div_id: str) -> Path:
    """Standalone HTML; a fixed div id keeps reruns byte-identical"""
    path = Path(path)
    fig.write_html(str(path), include_plotlyjs='cdn', full_html=True, div_id=div_id)
    logger.info("wrote figure %s", path)
    return path
