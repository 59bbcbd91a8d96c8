# commands/cmd_chart.py
from pathlib import Path

from config_loader import RunConfig
from modules.io_formats import write_gray
from modules.test_chart import make_test_chart


def main(cfg: RunConfig) -> Path:
    """Write the synthetic test chart for the configured grid as chart.pgm"""
    chart = make_test_chart(cfg.grid.X, cfg.grid.Y, cfg.chart.roi_box, cfg.chart.periods, cfg.chart.digits)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_gray(out / 'chart.pgm', chart.image)
    if cfg.write_png:
        write_gray(out / 'chart.png', chart.image)
    print(f"wrote {path} ({chart.id})")
    return path
