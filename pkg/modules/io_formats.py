# modules/io_formats.py
"""
On-disk formats.

Binary containers share one header layout, little-endian throughout:
    magic (4 bytes) | version u16 | payload...
Layout  (UFLY): X, Y, N, n_lattice (u32) | lattice kind u8 | U, V (u32)
                | pixel_to_cell '<u4'[M] | weights '<f8'[n_lattice]
                | cell_kind u8[n_lattice] | meta length u32 | meta JSON
Readings (UFMS): ndim u8 | n_freq u32 | sigma f64 | seed u64
                | freqs '<i8'[n_freq, ndim] | readings '<f8'[n_freq, 4]
Spectrum (UFSP): ndim u8 | shape u32[ndim] | coeffs '<f8'[2·size] (re, im interleaved)
                | measured mask u8[size]
"""
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from modules.errors import FormatError
from modules.fourier_engine import PHASES, FrequencyPlan, Frequency, Spectrum
from modules.fovea_geometry import (
    CellKind,
    CellLayout,
    CircularMeta,
    Lattice1D,
    Lattice2D,
    PixelGrid,
    RectMeta,
    WeightVector,
    compute_weights,
)
from modules.quality_metrics import normalize_for_display
from modules.sensing import MeasurementSet, NoiseConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
LAYOUT_MAGIC = b'UFLY'
READINGS_MAGIC = b'UFMS'
SPECTRUM_MAGIC = b'UFSP'
CSV_FLOAT_FORMAT = '%.17g'

PathLike = Union[str, Path]


def _write_header(fh: BinaryIO, magic: bytes) -> None:
    fh.write(magic)
    fh.write(struct.pack('<H', FORMAT_VERSION))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated container while reading {what}")
    return data


def _read_header(fh: BinaryIO, magic: bytes) -> None:
    found = fh.read(4)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}")
    (version,) = struct.unpack('<H', _read_exact(fh, 2, 'version'))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported container version {version}")


def _read_array(fh: BinaryIO, dtype: str, count: int, what: str) -> np.ndarray:
    itemsize = np.dtype(dtype).itemsize
    return np.frombuffer(_read_exact(fh, itemsize * count, what), dtype=dtype).copy()


# =============================================================================
# Layout container
# =============================================================================


def _meta_to_dict(layout: CellLayout) -> Dict[str, Any]:
    meta = layout.structure_meta
    return {
        'structure': layout.structure,
        'meta_type': type(meta).__name__ if meta is not None else None,
        'meta': meta.to_dict() if meta is not None else None,
    }


def _meta_from_dict(info: Dict[str, Any]):
    kind, data = info.get('meta_type'), info.get('meta')
    if kind == 'CircularMeta':
        return CircularMeta(
            P=int(data['P']),
            ring_outer_radii=np.array(data['ring_outer_radii'], dtype=float),
            ring_center_radii=np.array(data['ring_center_radii'], dtype=float),
            log_coords=np.array(data['log_coords'], dtype=float),
            sector_angles=np.array(data['sector_angles'], dtype=float),
            fovea_cell_count=int(data['fovea_cell_count']),
            max_corner_distance=float(data['max_corner_distance']),
            cell_bound=int(data['cell_bound']),
        )
    if kind == 'RectMeta':
        return RectMeta(
            U=int(data['U']), V=int(data['V']),
            x_centers=np.array(data['x_centers'], dtype=float),
            y_centers=np.array(data['y_centers'], dtype=float),
            radii_x=np.array(data['radii_x'], dtype=float),
            radii_y=np.array(data['radii_y'], dtype=float),
            alpha1=float(data['alpha1']), alpha2=float(data['alpha2']), theta=float(data['theta']),
        )
    return None


def write_layout(path: PathLike, layout: CellLayout, weights: WeightVector) -> Path:
    path = Path(path)
    lattice = layout.lattice
    if isinstance(lattice, Lattice1D):
        kind, U, V = 1, lattice.length, 1
    else:
        kind, U, V = 2, lattice.U, lattice.V
    meta = json.dumps(_meta_to_dict(layout), sort_keys=True).encode('utf-8')

    with open(path, 'wb') as fh:
        _write_header(fh, LAYOUT_MAGIC)
        fh.write(struct.pack('<IIII', layout.grid.X, layout.grid.Y, layout.N, layout.n_lattice))
        fh.write(struct.pack('<BII', kind, U, V))
        fh.write(layout.pixel_to_cell.astype('<u4').tobytes())
        fh.write(weights.w.astype('<f8').tobytes())
        fh.write(layout.cell_kind.astype('u1').tobytes())
        fh.write(struct.pack('<I', len(meta)))
        fh.write(meta)
    logger.info("wrote layout container %s", path)
    return path


def load_layout(path: PathLike) -> Tuple[CellLayout, WeightVector]:
    """Read a layout container back; weights are checked against the cell counts"""
    with open(path, 'rb') as fh:
        _read_header(fh, LAYOUT_MAGIC)
        X, Y, N, n_lattice = struct.unpack('<IIII', _read_exact(fh, 16, 'grid header'))
        kind, U, V = struct.unpack('<BII', _read_exact(fh, 9, 'lattice descriptor'))
        grid = PixelGrid(X, Y)
        pixel_to_cell = _read_array(fh, '<u4', grid.M, 'pixel_to_cell').astype(np.int64)
        w = _read_array(fh, '<f8', n_lattice, 'weights')
        cell_kind = _read_array(fh, 'u1', n_lattice, 'cell kinds')
        (meta_len,) = struct.unpack('<I', _read_exact(fh, 4, 'meta length'))
        try:
            info = json.loads(_read_exact(fh, meta_len, 'meta').decode('utf-8'))
        except ValueError as e:
            raise FormatError(f"layout meta is not valid JSON: {e}")

    if kind == 1:
        if U != n_lattice:
            raise FormatError(f"1D lattice length {U} does not match {n_lattice} cells")
        lattice = Lattice1D(U)
    elif kind == 2:
        if U * V != n_lattice:
            raise FormatError(f"2D lattice {U}x{V} does not match {n_lattice} cells")
        counts = np.bincount(pixel_to_cell, minlength=n_lattice)
        lattice = Lattice2D(U, V, (counts == 0).reshape(V, U))
    else:
        raise FormatError(f"unknown lattice kind {kind}")

    layout = CellLayout(grid, pixel_to_cell, cell_kind, lattice, info.get('structure', 'unknown'),
                        _meta_from_dict(info))
    if layout.N != N:
        raise FormatError(f"header says N={N}, pixel map gives {layout.N}")
    weights = compute_weights(layout)
    if not np.array_equal(weights.w, w):
        raise FormatError("stored weights disagree with the pixel map")
    return layout, weights


# =============================================================================
# Images
# =============================================================================


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and quantize to 0..255 (round half to even)"""
    img = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    return np.rint(img * 255.0).astype(np.uint8)


def write_gray(path: PathLike, img: np.ndarray) -> Path:
    """8-bit grayscale image; the format follows the extension (.pgm or .png)"""
    path = Path(path)
    Image.fromarray(to_uint8(img)).save(path)
    return path


def write_reconstruction(path: PathLike, img: np.ndarray) -> Path:
    """Reconstruction as an 8-bit image, min-max stretched for display (a flat image writes as black)"""
    return write_gray(path, normalize_for_display(img))


def cell_map_image(layout: CellLayout) -> np.ndarray:
    """Gray-coded cell map: fovea pixels white, periphery cells in scattered mid tones"""
    n = layout.pixel_to_cell
    tones = (40 + (n * 2654435761) % 181) / 255.0
    fovea = (layout.cell_kind == CellKind.FOVEA)[n]
    return np.where(fovea, 1.0, tones).reshape(layout.grid.shape)


def write_cell_map(path: PathLike, layout: CellLayout) -> Path:
    return write_gray(path, cell_map_image(layout))


def pattern_filename(freq: Frequency, phase_index: int) -> str:
    degrees = int(round(math.degrees(PHASES[phase_index])))
    if isinstance(freq, tuple):
        return f"pattern_ku{freq[0]}_kv{freq[1]}_phi{degrees:03d}.pgm"
    return f"pattern_k{freq}_phi{degrees:03d}.pgm"


# =============================================================================
# Frequency plans, readings and spectra
# =============================================================================


def write_plan_csv(path: PathLike, plan: FrequencyPlan) -> Path:
    path = Path(path)
    plan.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def write_measurements_csv(path: PathLike, measurements: MeasurementSet) -> Path:
    path = Path(path)
    measurements.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def read_measurements_csv(path: PathLike, plan: FrequencyPlan, noise: NoiseConfig = NoiseConfig()) -> MeasurementSet:
    """Rebuild a MeasurementSet from its CSV, checking frequencies against the plan"""
    df = pd.read_csv(path, float_precision='round_trip')
    expected = ['k', 'phase', 'reading'] if plan.ndim == 1 else ['k', 'k_v', 'phase', 'reading']
    if list(df.columns) != expected:
        raise FormatError(f"measurement CSV columns {list(df.columns)} != {expected}")
    if len(df) != plan.n_measurements:
        raise FormatError(f"measurement CSV has {len(df)} rows, plan needs {plan.n_measurements}")
    freq_cols = ['k'] if plan.ndim == 1 else ['k', 'k_v']
    freqs = df[freq_cols].to_numpy(dtype=np.int64)[::4].reshape(plan.ordered_freqs.shape)
    if not np.array_equal(freqs, plan.ordered_freqs) or not np.array_equal(df['phase'].to_numpy(),
                                                                           np.tile(np.arange(4), plan.n_freq)):
        raise FormatError("measurement CSV rows do not follow the frequency plan")
    readings = df['reading'].to_numpy(dtype=float).reshape(plan.n_freq, 4)
    return MeasurementSet(plan=plan, readings=readings, noise=noise)


def write_measurements_bin(path: PathLike, measurements: MeasurementSet) -> Path:
    path = Path(path)
    plan = measurements.plan
    freqs = plan.ordered_freqs.reshape(plan.n_freq, plan.ndim)
    with open(path, 'wb') as fh:
        _write_header(fh, READINGS_MAGIC)
        fh.write(struct.pack('<BIdQ', plan.ndim, plan.n_freq, measurements.noise.sigma, measurements.noise.seed))
        fh.write(freqs.astype('<i8').tobytes())
        fh.write(measurements.readings.astype('<f8').tobytes())
    return path


def read_measurements_bin(path: PathLike, plan: FrequencyPlan) -> MeasurementSet:
    with open(path, 'rb') as fh:
        _read_header(fh, READINGS_MAGIC)
        ndim, n_freq, sigma, seed = struct.unpack('<BIdQ', _read_exact(fh, 21, 'readings header'))
        freqs = _read_array(fh, '<i8', n_freq * ndim, 'frequencies')
        readings = _read_array(fh, '<f8', n_freq * 4, 'readings').reshape(n_freq, 4)
    if ndim != plan.ndim or n_freq != plan.n_freq or not np.array_equal(
            freqs.reshape(plan.ordered_freqs.shape), plan.ordered_freqs):
        raise FormatError("readings container does not match the frequency plan")
    return MeasurementSet(plan=plan, readings=readings, noise=NoiseConfig(sigma=sigma, seed=seed))


def write_spectrum(path: PathLike, spectrum: Spectrum) -> Path:
    path = Path(path)
    coeffs = np.ascontiguousarray(spectrum.coeffs, dtype=np.complex128)
    with open(path, 'wb') as fh:
        _write_header(fh, SPECTRUM_MAGIC)
        fh.write(struct.pack('<B', coeffs.ndim))
        fh.write(struct.pack(f'<{coeffs.ndim}I', *coeffs.shape))
        fh.write(coeffs.view(np.float64).astype('<f8').tobytes())
        fh.write(spectrum.measured_mask.astype('u1').tobytes())
    return path


def read_spectrum(path: PathLike) -> Spectrum:
    with open(path, 'rb') as fh:
        _read_header(fh, SPECTRUM_MAGIC)
        (ndim,) = struct.unpack('<B', _read_exact(fh, 1, 'ndim'))
        if ndim not in (1, 2):
            raise FormatError(f"spectrum must be 1D or 2D, got {ndim}")
        shape = struct.unpack(f'<{ndim}I', _read_exact(fh, 4 * ndim, 'shape'))
        size = int(np.prod(shape))
        interleaved = _read_array(fh, '<f8', 2 * size, 'coefficients')
        mask = _read_array(fh, 'u1', size, 'mask').astype(bool)
    coeffs = interleaved.view(np.complex128).reshape(shape)
    return Spectrum(coeffs=coeffs, measured_mask=mask.reshape(shape))
