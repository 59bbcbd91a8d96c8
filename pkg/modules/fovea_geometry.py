# modules/fovea_geometry.py
"""
Foveated cell layouts over an X×Y pixel grid.

Three structures are built here, plus the identity layout used for uniform FSI:

1. circular  - singleton fovea pixels inside r0, log-polar rings × sectors outside
2. rect      - per-axis layer centers, linear inside the ROI box, exponential outside
3. rotrect   - the rect rule applied in a frame rotated by theta about the ROI center

Coordinate convention (used everywhere in the package):
- pixel centers sit at integer coordinates x = 1..X, y = 1..Y
- images are numpy arrays of shape (Y, X); pixel index m = (y-1)*X + (x-1)
- the y axis points down, so "counterclockwise" angles are measured as
  atan2(y_c - y, x - x_c), i.e. counterclockwise as seen on screen
"""
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from modules.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)


class CellKind(IntEnum):
    FOVEA = 0
    PERIPHERY = 1


@dataclass(frozen=True)
class PixelGrid:
    X: int
    Y: int

    def __post_init__(self):
        if int(self.X) != self.X or int(self.Y) != self.Y or self.X < 1 or self.Y < 1:
            raise ParameterError(f"grid must be at least 1×1 integer pixels, got {self.X}×{self.Y}")

    @property
    def M(self) -> int:
        return self.X * self.Y

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.Y, self.X)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates (x, y) in raster order, 1-based"""
        ys, xs = np.divmod(np.arange(self.M, dtype=np.int64), self.X)
        return (xs + 1).astype(float), (ys + 1).astype(float)

    def corners(self) -> List[Tuple[float, float]]:
        return [(1.0, 1.0), (float(self.X), 1.0), (1.0, float(self.Y)), (float(self.X), float(self.Y))]

    def contains(self, x: float, y: float) -> bool:
        return 1 <= x <= self.X and 1 <= y <= self.Y


@dataclass(frozen=True)
class CircularParams:
    center: Tuple[float, float]
    r0: float
    epsilon: float
    Q: int

    def __post_init__(self):
        if self.r0 < 1:
            raise ParameterError(f"r0 must be >= 1 pixel, got {self.r0}")
        if not self.epsilon > 1:
            raise ParameterError(f"epsilon must be > 1, got {self.epsilon}")
        if int(self.Q) != self.Q or self.Q < 1:
            raise ParameterError(f"Q must be a positive integer, got {self.Q}")


@dataclass(frozen=True)
class RectParams:
    center: Tuple[int, int]
    m0: int
    n0: int
    alpha1: float = 2.0
    alpha2: float = 2.0
    # Optional fixed odd cell counts per axis; growth factors are then derived
    cells_x: Optional[int] = None
    cells_y: Optional[int] = None

    def __post_init__(self):
        xc, yc = self.center
        if float(xc) != int(xc) or float(yc) != int(yc):
            raise ParameterError(f"rect center must be a pixel coordinate, got {self.center}")
        if int(self.m0) != self.m0 or int(self.n0) != self.n0 or self.m0 < 1 or self.n0 < 1:
            raise ParameterError(f"m0 and n0 must be integers >= 1, got m0={self.m0}, n0={self.n0}")
        if not self.alpha1 > 1 or not self.alpha2 > 1:
            raise ParameterError(f"alpha1 and alpha2 must be > 1, got {self.alpha1}, {self.alpha2}")
        for name, cells in (("cells_x", self.cells_x), ("cells_y", self.cells_y)):
            if cells is not None and (int(cells) != cells or cells < 1 or cells % 2 == 0):
                raise ParameterError(f"{name} must be a positive odd integer, got {cells}")


@dataclass(frozen=True)
class RotRectParams:
    rect: RectParams
    theta: float

    def __post_init__(self):
        if not (0.0 <= self.theta < math.pi / 2):
            raise ParameterError(f"theta must lie in [0, pi/2), got {self.theta}")


@dataclass(frozen=True, eq=False)
class CircularMeta:
    P: int
    ring_outer_radii: np.ndarray
    ring_center_radii: np.ndarray
    log_coords: np.ndarray
    sector_angles: np.ndarray
    fovea_cell_count: int
    max_corner_distance: float
    cell_bound: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'P': self.P,
            'ring_outer_radii': self.ring_outer_radii.tolist(),
            'ring_center_radii': self.ring_center_radii.tolist(),
            'log_coords': self.log_coords.tolist(),
            'sector_angles': self.sector_angles.tolist(),
            'fovea_cell_count': self.fovea_cell_count,
            'max_corner_distance': self.max_corner_distance,
            'cell_bound': self.cell_bound,
        }


@dataclass(frozen=True, eq=False)
class RectMeta:
    U: int
    V: int
    x_centers: np.ndarray
    y_centers: np.ndarray
    radii_x: np.ndarray
    radii_y: np.ndarray
    alpha1: float
    alpha2: float
    theta: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'U': self.U,
            'V': self.V,
            'U_prime': int(self.x_centers.size),
            'V_prime': int(self.y_centers.size),
            'x_centers': self.x_centers.tolist(),
            'y_centers': self.y_centers.tolist(),
            'radii_x': self.radii_x.tolist(),
            'radii_y': self.radii_y.tolist(),
            'alpha1': self.alpha1,
            'alpha2': self.alpha2,
            'theta': self.theta,
        }


@dataclass(frozen=True)
class Lattice1D:
    length: int

    ndim = 1

    @property
    def size(self) -> int:
        return self.length

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.length,)

    def descriptor(self) -> Dict[str, Any]:
        return {'kind': '1d', 'length': self.length}


@dataclass(frozen=True, eq=False)
class Lattice2D:
    """U′×V′ transform lattice; cell n sits at (u, v) = (n % U, n // U)"""
    U: int
    V: int
    empty: Optional[np.ndarray] = None

    ndim = 2

    def __post_init__(self):
        if self.empty is None:
            object.__setattr__(self, 'empty', np.zeros((self.V, self.U), dtype=bool))

    @property
    def size(self) -> int:
        return self.U * self.V

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.V, self.U)

    def descriptor(self) -> Dict[str, Any]:
        return {'kind': '2d', 'U': self.U, 'V': self.V, 'empty_cells': int(self.empty.sum())}

    def __eq__(self, other) -> bool:
        return (isinstance(other, Lattice2D) and self.U == other.U and self.V == other.V
                and np.array_equal(self.empty, other.empty))


Lattice = Union[Lattice1D, Lattice2D]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CellLayout:
    grid: PixelGrid
    pixel_to_cell: np.ndarray
    cell_kind: np.ndarray
    lattice: Lattice
    structure: str
    structure_meta: Optional[Union[CircularMeta, RectMeta]] = None
    cell_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p2c = np.asarray(self.pixel_to_cell, dtype=np.int64)
        if p2c.shape != (self.grid.M,):
            raise DimensionError(f"pixel_to_cell must have {self.grid.M} entries, got {p2c.shape}")
        if p2c.size and (p2c.min() < 0 or p2c.max() >= self.lattice.size):
            raise DimensionError("pixel_to_cell references cells outside the lattice")
        counts = np.bincount(p2c, minlength=self.lattice.size)
        object.__setattr__(self, 'pixel_to_cell', _frozen(p2c))
        object.__setattr__(self, 'cell_kind', _frozen(np.asarray(self.cell_kind, dtype=np.uint8)))
        object.__setattr__(self, 'cell_counts', _frozen(counts))

    @property
    def n_lattice(self) -> int:
        """Lattice point count, empty cells included"""
        return self.lattice.size

    @property
    def N(self) -> int:
        """Non-empty cell count (the N used for redundancy figures)"""
        return int(np.count_nonzero(self.cell_counts))

    @property
    def nonempty(self) -> np.ndarray:
        return self.cell_counts > 0

    @property
    def fovea_cell_count(self) -> int:
        return int(np.count_nonzero((self.cell_kind == CellKind.FOVEA) & self.nonempty))

    def fovea_pixel_mask(self) -> np.ndarray:
        """Boolean (Y, X) mask of pixels whose cell is tagged FOVEA"""
        is_fovea = self.cell_kind == CellKind.FOVEA
        return is_fovea[self.pixel_to_cell].reshape(self.grid.shape)

    def summary(self) -> Dict[str, Any]:
        """Counts per kind plus the redundancy figure"""
        nonempty = self.nonempty
        kinds = self.cell_kind
        info = {
            'structure': self.structure,
            'X': self.grid.X,
            'Y': self.grid.Y,
            'M': self.grid.M,
            'N': self.N,
            'N_lattice': self.n_lattice,
            'fovea_cells': self.fovea_cell_count,
            'periphery_cells': int(np.count_nonzero((kinds == CellKind.PERIPHERY) & nonempty)),
            'empty_cells': int(self.n_lattice - self.N),
            'redundancy_reduction': (self.grid.M - self.N) / self.grid.M,
            'lattice': self.lattice.descriptor(),
        }
        if isinstance(self.structure_meta, CircularMeta):
            info['P'] = self.structure_meta.P
            info['cell_bound'] = self.structure_meta.cell_bound
        elif isinstance(self.structure_meta, RectMeta):
            info['U'] = self.structure_meta.U
            info['V'] = self.structure_meta.V
        return info


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    counts: np.ndarray

    def as_fractions(self) -> List[Fraction]:
        """Exact weights 1/|cell n| (0 for empty cells)"""
        return [Fraction(1, int(c)) if c > 0 else Fraction(0) for c in self.counts]


# =============================================================================
# Circular structure (log-polar)
# =============================================================================


def _smallest_power_covering(r0: float, epsilon: float, reach: float) -> int:
    """Smallest integer P >= 0 with r0 * epsilon**P >= reach"""
    if r0 >= reach:
        return 0
    P = max(1, int(math.ceil(math.log(reach / r0) / math.log(epsilon))))
    while r0 * epsilon ** P < reach:
        P += 1
    while P > 1 and r0 * epsilon ** (P - 1) >= reach:
        P -= 1
    return P


def build_circular_layout(params: CircularParams, grid: PixelGrid) -> CellLayout:
    """Fovea disc of singleton pixels plus P exponential rings of Q sectors"""
    xc, yc = params.center
    if not grid.contains(xc, yc):
        raise ParameterError(f"fovea center {params.center} lies outside the {grid.X}×{grid.Y} grid")

    xs, ys = grid.coordinates()
    r = np.hypot(xs - xc, ys - yc)
    r_max = max(math.hypot(cx - xc, cy - yc) for cx, cy in grid.corners())
    P = _smallest_power_covering(params.r0, params.epsilon, r_max)

    # radii[p] = r0 * eps^p; ring p holds r in (radii[p-1], radii[p]], index 0 is the fovea
    radii = np.array([params.r0 * params.epsilon ** p for p in range(P + 1)])
    ring = np.searchsorted(radii, r, side='left')
    fovea = ring == 0

    omega = np.mod(np.arctan2(yc - ys, xs - xc), 2 * math.pi)
    sector = np.minimum(np.floor(omega * params.Q / (2 * math.pi)).astype(np.int64), params.Q - 1)

    fovea_idx = np.flatnonzero(fovea)
    n_fovea = fovea_idx.size
    pixel_to_cell = np.empty(grid.M, dtype=np.int64)
    pixel_to_cell[fovea_idx] = np.arange(n_fovea)

    # Occupied ring/sector cells only; cells outside the FOV never receive pixels
    periph = ~fovea
    keys = (ring[periph] - 1) * params.Q + sector[periph]
    occupied, inverse = np.unique(keys, return_inverse=True)
    pixel_to_cell[periph] = n_fovea + inverse

    n_cells = n_fovea + occupied.size
    cell_kind = np.full(n_cells, CellKind.PERIPHERY, dtype=np.uint8)
    cell_kind[:n_fovea] = CellKind.FOVEA

    p_idx = np.arange(1, P + 1)
    r_c1 = params.r0 * (1 + params.epsilon) / 2
    ring_centers = r_c1 * params.epsilon ** (p_idx - 1.0)
    meta = CircularMeta(
        P=P,
        ring_outer_radii=_frozen(radii[1:].copy()),
        ring_center_radii=_frozen(ring_centers),
        log_coords=_frozen(np.log(ring_centers) / math.log(params.epsilon)),
        sector_angles=_frozen(np.arange(1, params.Q + 1) * 2 * math.pi / params.Q),
        fovea_cell_count=int(n_fovea),
        max_corner_distance=float(r_max),
        cell_bound=int(n_fovea + P * params.Q),
    )
    layout = CellLayout(grid, pixel_to_cell, cell_kind, Lattice1D(int(n_cells)), 'circular', meta)
    logger.info("circular layout: N=%d (N_c=%d, P=%d, Q=%d) on %dx%d", layout.N, n_fovea, P, params.Q,
                grid.X, grid.Y)
    return layout


# =============================================================================
# Rectangular structures (log-rectilinear, optionally rotated)
# =============================================================================


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5)


def _layer_radius(k: np.ndarray, half: int, alpha: float) -> np.ndarray:
    """R(k) = k inside the ROI half-width, half * alpha^(k - half) beyond it"""
    k = np.asarray(k, dtype=float)
    return np.where(k <= half, k, half * alpha ** (k - half))


def _covering_layers(half: int, alpha: float, extent: float) -> int:
    """Smallest K >= 0 whose outermost radius R(K) reaches extent"""
    if extent <= half:
        return int(math.ceil(extent))
    K = half + max(1, int(math.ceil(math.log(extent / half) / math.log(alpha))))
    while _layer_radius(K, half, alpha) < extent:
        K += 1
    while K - 1 > half and _layer_radius(K - 1, half, alpha) >= extent:
        K -= 1
    return K


def _axis_centers(center: int, half: int, alpha: float, cells: Optional[int],
                  lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray, int, float]:
    """
    Layer centers along one axis.
    Returns (distinct centers ascending, radii R(1..K), nominal odd count U, effective alpha).
    """
    extent = max(center - lo, hi - center)
    if cells is None:
        K = _covering_layers(half, alpha, extent)
    else:
        K = (cells - 1) // 2
        if K > half:
            if extent <= half:
                raise ParameterError(
                    f"{cells} cells exceed what an extent of {extent:g} pixels can hold with half-width {half}")
            alpha = (extent / half) ** (1.0 / (K - half))

    radii = _layer_radius(np.arange(1, K + 1), half, alpha)
    left = _spread_offsets(center - _round_half_up(center - radii), center - math.floor(lo + 1e-9))
    right = _spread_offsets(_round_half_up(center + radii) - center, math.ceil(hi - 1e-9) - center)
    centers = np.concatenate([center - left[::-1], [float(center)], center + right])
    return centers, radii, 2 * K + 1, float(alpha)


def _spread_offsets(offsets: np.ndarray, reach: int) -> np.ndarray:
    """
    Rounded layer offsets made strictly increasing, then cut at the grid edge.
    A layer that rounds onto (or inside) its predecessor moves one pixel further
    out, so a coarser growth ratio never yields more distinct layers.
    """
    if reach <= 0 or offsets.size == 0:
        return np.zeros(0)
    steps = np.arange(1, offsets.size + 1)
    # c_k = max(c_{k-1} + 1, o_k) with c_0 = 0, i.e. c_k - k is a running max
    spread = np.maximum.accumulate(np.maximum(offsets - steps, 0)) + steps
    inside = spread < reach
    if inside.all():
        return spread.astype(float)
    return np.append(spread[inside], reach).astype(float)


def _axis_boundaries(centers: np.ndarray, center: int, half: int) -> np.ndarray:
    """
    Cell boundaries between consecutive centers: midpoints, except next to an ROI
    center where the boundary hugs it (±0.5) so ROI cells stay one pixel wide.
    """
    in_roi = np.abs(centers - center) <= half
    bounds = (centers[:-1] + centers[1:]) / 2.0
    for i in range(bounds.size):
        if in_roi[i] and not in_roi[i + 1] and centers[i] >= center:
            bounds[i] = centers[i] + 0.5
        elif in_roi[i + 1] and not in_roi[i] and centers[i + 1] <= center:
            bounds[i] = centers[i + 1] - 0.5
    return bounds


def _build_rect_frame(params: RectParams, grid: PixelGrid, theta: float, structure: str) -> CellLayout:
    xc, yc = (int(c) for c in params.center)
    if not grid.contains(xc, yc):
        raise ParameterError(f"ROI center {params.center} lies outside the {grid.X}×{grid.Y} grid")

    # 1. Pixel coordinates in the working frame (rotation about the ROI center)
    xs, ys = grid.coordinates()
    if theta == 0.0:
        xw, yw = xs, ys
    else:
        c, s = math.cos(theta), math.sin(theta)
        dx, dy = xs - xc, ys - yc
        xw = xc + (c * dx - s * dy)
        yw = yc + (s * dx + c * dy)

    # 2. Layer centers per axis, covering the working-frame bounding box
    x_centers, radii_x, U, alpha1 = _axis_centers(xc, params.m0, params.alpha1, params.cells_x,
                                                  float(xw.min()), float(xw.max()))
    y_centers, radii_y, V, alpha2 = _axis_centers(yc, params.n0, params.alpha2, params.cells_y,
                                                  float(yw.min()), float(yw.max()))

    # 3. Per-axis nearest-center assignment, ties to the lower index
    u_idx = np.searchsorted(_axis_boundaries(x_centers, xc, params.m0), xw, side='left')
    v_idx = np.searchsorted(_axis_boundaries(y_centers, yc, params.n0), yw, side='left')
    U_p, V_p = x_centers.size, y_centers.size
    pixel_to_cell = v_idx * U_p + u_idx

    counts = np.bincount(pixel_to_cell, minlength=U_p * V_p)
    empty = (counts == 0).reshape(V_p, U_p)

    roi_u = np.abs(x_centers - xc) <= params.m0
    roi_v = np.abs(y_centers - yc) <= params.n0
    is_fovea = np.logical_and.outer(roi_v, roi_u).ravel()
    cell_kind = np.where(is_fovea, CellKind.FOVEA, CellKind.PERIPHERY).astype(np.uint8)

    meta = RectMeta(U=U, V=V, x_centers=_frozen(x_centers), y_centers=_frozen(y_centers),
                    radii_x=_frozen(radii_x), radii_y=_frozen(radii_y),
                    alpha1=alpha1, alpha2=alpha2, theta=theta)
    layout = CellLayout(grid, pixel_to_cell, cell_kind, Lattice2D(U_p, V_p, _frozen(empty)), structure, meta)
    logger.info("%s layout: U'=%d V'=%d N=%d (empty %d) on %dx%d", structure, U_p, V_p, layout.N,
                int(empty.sum()), grid.X, grid.Y)
    return layout


def build_rect_layout(params: RectParams, grid: PixelGrid) -> CellLayout:
    """Log-rectilinear layout: HR box of half-size m0×n0, exponential layers outside"""
    return _build_rect_frame(params, grid, 0.0, 'rect')


def build_rotrect_layout(params: RotRectParams, grid: PixelGrid) -> CellLayout:
    """Log-rectilinear layout in a frame rotated counterclockwise by theta about the ROI center"""
    return _build_rect_frame(params.rect, grid, float(params.theta), 'rotrect')


def build_identity_layout(grid: PixelGrid) -> CellLayout:
    """Every pixel its own cell on an X×Y lattice (uniform HR FSI)"""
    pixel_to_cell = np.arange(grid.M, dtype=np.int64)
    cell_kind = np.full(grid.M, CellKind.FOVEA, dtype=np.uint8)
    empty = np.zeros(grid.shape, dtype=bool)
    return CellLayout(grid, pixel_to_cell, cell_kind, Lattice2D(grid.X, grid.Y, _frozen(empty)), 'identity')


# =============================================================================
# Weights and cell/pixel transfers
# =============================================================================


def compute_weights(layout: CellLayout) -> WeightVector:
    """Non-uniform weight distribution: w(n) = 1/|cell n|, 0 for empty cells"""
    counts = layout.cell_counts
    w = np.zeros(counts.size, dtype=float)
    nonempty = counts > 0
    w[nonempty] = 1.0 / counts[nonempty]
    return WeightVector(w=_frozen(w), counts=counts)


def _check_scene(scene: np.ndarray, layout: CellLayout) -> np.ndarray:
    scene = np.asarray(getattr(scene, 'image', scene))
    if scene.shape != layout.grid.shape:
        raise DimensionError(f"scene shape {scene.shape} does not match grid {layout.grid.shape} (Y, X)")
    return scene


def cell_sums(scene: np.ndarray, layout: CellLayout) -> np.ndarray:
    """Per-cell pixel sums, flat over the lattice"""
    scene = _check_scene(scene, layout)
    return np.bincount(layout.pixel_to_cell, weights=scene.ravel().astype(float), minlength=layout.n_lattice)


def cell_average(scene: np.ndarray, layout: CellLayout) -> np.ndarray:
    """Mean of each cell's pixels as a lattice image; empty cells get 0"""
    sums = cell_sums(scene, layout)
    counts = layout.cell_counts
    means = np.zeros(layout.n_lattice, dtype=float)
    nonempty = counts > 0
    means[nonempty] = sums[nonempty] / counts[nonempty]
    return means.reshape(layout.lattice.shape)


def expand_to_pixels(lattice_img: np.ndarray, layout: CellLayout) -> np.ndarray:
    """Each pixel takes its cell's value (the T· mapping from N cells to M pixels)"""
    lattice_img = np.asarray(lattice_img)
    if lattice_img.shape != layout.lattice.shape:
        raise DimensionError(f"lattice image shape {lattice_img.shape} does not match lattice {layout.lattice.shape}")
    return lattice_img.ravel()[layout.pixel_to_cell].reshape(layout.grid.shape)
