# conftest.py
# Shared fixtures. Living at the repository root puts the root on sys.path,
# so tests import app modules the same way app.py does.
import numpy as np
import pytest

from modules.fovea_geometry import (
    CircularParams,
    PixelGrid,
    RectParams,
    RotRectParams,
    build_circular_layout,
    build_identity_layout,
    build_rect_layout,
    build_rotrect_layout,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def grid32():
    return PixelGrid(32, 32)


def layout_zoo(grid: PixelGrid):
    """One layout per structure, sized for the grid"""
    cx, cy = (grid.X + 1) // 2, (grid.Y + 1) // 2
    rect = RectParams(center=(cx, cy), m0=max(1, grid.X // 8), n0=max(1, grid.Y // 8), alpha1=1.5, alpha2=1.4)
    return {
        'circular': build_circular_layout(
            CircularParams(center=(cx + 0.5, cy + 0.5), r0=max(1.0, grid.X / 8), epsilon=1.4, Q=8), grid),
        'rect': build_rect_layout(rect, grid),
        'rotrect': build_rotrect_layout(RotRectParams(rect=rect, theta=0.3), grid),
        'identity': build_identity_layout(grid),
    }


@pytest.fixture
def zoo32(grid32):
    return layout_zoo(grid32)


@pytest.fixture
def zoo16():
    return layout_zoo(PixelGrid(16, 16))


@pytest.fixture
def random_layout(rng):
    """Factory for a random circular, rect or rotrect layout on an X×Y grid"""
    def build(X: int, Y: int):
        grid = PixelGrid(X, Y)
        kind = int(rng.integers(0, 3))
        if kind == 0:
            params = CircularParams(center=(float(rng.uniform(1, X)), float(rng.uniform(1, Y))),
                                    r0=float(rng.uniform(1, 6)), epsilon=float(rng.uniform(1.1, 2.5)),
                                    Q=int(rng.integers(1, 17)))
            return build_circular_layout(params, grid)
        rect = RectParams(center=(int(rng.integers(1, X + 1)), int(rng.integers(1, Y + 1))),
                          m0=int(rng.integers(1, 6)), n0=int(rng.integers(1, 6)),
                          alpha1=float(rng.uniform(1.1, 2.5)), alpha2=float(rng.uniform(1.1, 2.5)))
        if kind == 1:
            return build_rect_layout(rect, grid)
        return build_rotrect_layout(RotRectParams(rect=rect, theta=float(rng.uniform(0, 1.2))), grid)
    return build
