# modules/report_components.py
"""Plain-text summaries printed by the commands"""
from typing import Any, Dict, List

from modules.fovea_geometry import CellLayout
from utils import format_count, format_db, format_percentage, format_redundancy


def layout_summary_lines(layout: CellLayout) -> List[str]:
    """Counts per kind and the redundancy figure"""
    s = layout.summary()
    lines = [
        f"structure        : {s['structure']}",
        f"grid             : {s['X']} x {s['Y']} (M = {format_count(s['M'])})",
        f"cells            : N = {format_count(s['N'])} (lattice {format_count(s['N_lattice'])} points)",
        f"fovea cells      : N_c = {format_count(s['fovea_cells'])}",
        f"periphery cells  : {format_count(s['periphery_cells'])}",
    ]
    if s['empty_cells']:
        lines.append(f"empty cells      : {format_count(s['empty_cells'])}")
    if 'cell_bound' in s:
        lines.append(f"ring/sector bound: N <= N_c + P*Q = {format_count(s['cell_bound'])} (P = {s['P']})")
    if 'U' in s:
        lines.append(f"layer counts     : U = {s['U']}, V = {s['V']}")
    lines.append(f"redundancy       : {format_percentage(s['redundancy_reduction'])} "
                 f"({format_redundancy(s['redundancy_reduction'])})")
    return lines


def metrics_lines(metrics: Dict[str, Any]) -> List[str]:
    lines = []
    for key, value in metrics.items():
        if key.endswith('_db'):
            text = format_db(value)
        elif isinstance(value, float):
            text = f"{value:.6g}"
        else:
            text = str(value)
        lines.append(f"{key:<22}: {text}")
    return lines


def comparison_lines(report) -> List[str]:
    """Per-arm table plus provenance and warnings"""
    header = f"{'arm':<8} {'N/M':>9} {'Sr':>8} {'meas.':>7} {'ROI PSNR':>10} {'ROI SSIM':>9} {'PSNR':>10} {'redund.':>8}"
    lines = [header, '-' * len(header)]
    for r in report.arms:
        lines.append(
            f"{r.arm:<8} {r.size:>9,} {r.Sr:>8.4f} {r.n_measurements:>7,} {format_db(r.roi_psnr_db):>10} "
            f"{r.roi_ssim:>9.4f} {format_db(r.global_psnr_db):>10} {format_redundancy(r.redundancy):>8}"
            + ("  (clamped)" if r.clamped else ""))
    for key, value in report.provenance.items():
        lines.append(f"{key}: {value}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return lines
