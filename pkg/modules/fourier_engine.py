# modules/fourier_engine.py
"""
Fourier patterns, frequency plans, 4-step spectrum assembly and reconstruction.

Circular layouts use a 1D DFT over their flattened cell order; rect, rotrect
and identity layouts use a 2D DFT over their U′×V′ lattice. Forward transforms
are unnormalized and inverse transforms carry the 1/N_lattice factor
(numpy.fft conventions).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from modules.errors import DimensionError, IncompleteMeasurementError, NumericError, ParameterError
from modules.fovea_geometry import (
    CellLayout,
    Lattice,
    Lattice1D,
    Lattice2D,
    WeightVector,
    expand_to_pixels,
)

if TYPE_CHECKING:
    from modules.sensing import MeasurementSet

logger = logging.getLogger(__name__)

PHASES: Tuple[float, ...] = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)

Frequency = Union[int, Tuple[int, int]]


@dataclass(frozen=True)
class PatternSpec:
    """Pattern intensity a + b·cos(...); values must stay inside [0, 1]"""
    a: float = 0.5
    b: float = 0.5
    phases: Tuple[float, ...] = PHASES

    def __post_init__(self):
        if self.a < 0 or self.b <= 0:
            raise ParameterError(f"pattern needs a >= 0 and b > 0, got a={self.a}, b={self.b}")
        if self.a + self.b > 1 + 1e-12 or self.a - self.b < -1e-12:
            raise ParameterError(f"pattern values a±b must lie in [0, 1], got a={self.a}, b={self.b}")
        if tuple(self.phases) != PHASES:
            raise ParameterError("phase set is fixed to {0, pi/2, pi, 3pi/2}")


def _as_lattice(target: Union[CellLayout, Lattice]) -> Lattice:
    return target.lattice if isinstance(target, CellLayout) else target


def _signed(n: int) -> np.ndarray:
    """Signed frequency indices for a length-n axis, in (-n/2, n/2], in FFT slot order"""
    idx = np.arange(n, dtype=np.int64)
    return np.where(idx <= n // 2, idx, idx - n)


@dataclass(frozen=True, eq=False)
class FrequencyPlan:
    lattice_shape: Tuple[int, ...]
    ordered_freqs: np.ndarray
    Sr: float
    n_freq: int = field(init=False)

    def __post_init__(self):
        freqs = np.ascontiguousarray(self.ordered_freqs, dtype=np.int64)
        freqs.flags.writeable = False
        object.__setattr__(self, 'ordered_freqs', freqs)
        object.__setattr__(self, 'n_freq', int(freqs.shape[0]))

    @property
    def ndim(self) -> int:
        return len(self.lattice_shape)

    @property
    def n_lattice(self) -> int:
        return int(np.prod(self.lattice_shape))

    @property
    def n_measurements(self) -> int:
        return 4 * self.n_freq

    def lattice_descriptor(self) -> Dict[str, Any]:
        if self.ndim == 1:
            return {'kind': '1d', 'length': self.lattice_shape[0]}
        V, U = self.lattice_shape
        return {'kind': '2d', 'U': U, 'V': V}

    def freq(self, i: int) -> Frequency:
        if self.ndim == 1:
            return int(self.ordered_freqs[i])
        ku, kv = self.ordered_freqs[i]
        return int(ku), int(kv)

    def magnitudes(self) -> np.ndarray:
        """|f| in cycles per lattice sample"""
        if self.ndim == 1:
            return np.abs(self.ordered_freqs) / self.lattice_shape[0]
        V, U = self.lattice_shape
        return np.hypot(self.ordered_freqs[:, 0] / U, self.ordered_freqs[:, 1] / V)

    def flat_slots(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flat lattice slots of each planned frequency and of its conjugate"""
        if self.ndim == 1:
            N = self.lattice_shape[0]
            k = self.ordered_freqs
            return np.mod(k, N), np.mod(-k, N)
        V, U = self.lattice_shape
        ku, kv = self.ordered_freqs[:, 0], self.ordered_freqs[:, 1]
        return np.mod(kv, V) * U + np.mod(ku, U), np.mod(-kv, V) * U + np.mod(-ku, U)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({'index': np.arange(self.n_freq)})
        if self.ndim == 1:
            df['k'] = self.ordered_freqs
        else:
            df['k_u'] = self.ordered_freqs[:, 0]
            df['k_v'] = self.ordered_freqs[:, 1]
        df['|f|'] = self.magnitudes()
        return df


def conjugate_representatives(target: Union[CellLayout, Lattice]) -> np.ndarray:
    """
    One signed frequency per conjugate class, low-frequency first.
    1D returns shape (n,); 2D returns (n, 2) rows of (k_u, k_v).
    """
    lattice = _as_lattice(target)
    if isinstance(lattice, Lattice1D):
        k = _signed(lattice.length)
        # k and -k form a class; the non-negative member represents it (N/2 is its own conjugate)
        return np.sort(k[k >= 0])

    U, V = lattice.U, lattice.V
    su, sv = _signed(U), _signed(V)
    SU, SV = np.meshgrid(su, sv)
    CU = su[np.mod(-np.arange(U), U)][np.newaxis, :].repeat(V, axis=0)
    CV = sv[np.mod(-np.arange(V), V)][:, np.newaxis].repeat(U, axis=1)
    # keep the member of each class that is larger in (k_v, k_u) order
    keep = (SV > CV) | ((SV == CV) & (SU >= CU))
    ku, kv = SU[keep], SV[keep]

    # exact integer ordering of (k_u/U)^2 + (k_v/V)^2
    norm = ku * ku * (V * V) + kv * kv * (U * U)
    order = np.lexsort((kv, ku, norm))
    return np.stack([ku[order], kv[order]], axis=1)


def frequency_count(Sr: float, n_lattice: int) -> int:
    """floor(Sr·N_lattice/2), at least 1"""
    if not (0 < Sr <= 1):
        raise ParameterError(f"sampling ratio must lie in (0, 1], got {Sr}")
    return max(1, int(math.floor(Sr * n_lattice / 2 + 1e-9)))


def make_frequency_plan(target: Union[CellLayout, Lattice], Sr: float) -> FrequencyPlan:
    """
    Low-frequency-first plan for sampling ratio Sr.
    Sr = 1 plans every conjugate class, which is what a real signal needs to be
    fully determined; below 1 the plan keeps floor(Sr·N_lattice/2) frequencies.
    """
    lattice = _as_lattice(target)
    reps = conjugate_representatives(lattice)
    if Sr == 1:
        n_freq = reps.shape[0]
    else:
        n_freq = min(frequency_count(Sr, lattice.size), reps.shape[0])
    plan = FrequencyPlan(lattice_shape=lattice.shape, ordered_freqs=reps[:n_freq], Sr=float(Sr))
    logger.info("frequency plan: Sr=%g on lattice %s -> %d frequencies (%d measurements)",
                Sr, lattice.shape, plan.n_freq, plan.n_measurements)
    return plan


def plan_for_count(target: Union[CellLayout, Lattice], n_freq: int) -> FrequencyPlan:
    """Plan with an explicit frequency count (budget-matched comparisons)"""
    lattice = _as_lattice(target)
    reps = conjugate_representatives(lattice)
    if n_freq < 1:
        raise ParameterError(f"a plan needs at least one frequency, got {n_freq}")
    n_freq = min(int(n_freq), reps.shape[0])
    Sr = min(1.0, 2.0 * n_freq / lattice.size) if n_freq < reps.shape[0] else 1.0
    return FrequencyPlan(lattice_shape=lattice.shape, ordered_freqs=reps[:n_freq], Sr=Sr)


# =============================================================================
# Pattern synthesis
# =============================================================================


def _check_freq(lattice: Lattice, freq: Frequency) -> Tuple[int, ...]:
    if isinstance(lattice, Lattice1D):
        k = int(np.asarray(freq).reshape(-1)[0]) if np.ndim(freq) else int(freq)
        if not (-lattice.length < k < lattice.length):
            raise ParameterError(f"frequency {k} outside lattice of length {lattice.length}")
        return (k,)
    try:
        ku, kv = (int(v) for v in freq)
    except (TypeError, ValueError):
        raise ParameterError(f"2D lattice needs a (k_u, k_v) frequency, got {freq!r}")
    if not (-lattice.U < ku < lattice.U and -lattice.V < kv < lattice.V):
        raise ParameterError(f"frequency {(ku, kv)} outside lattice {lattice.U}x{lattice.V}")
    return ku, kv


def _unit_phasor(lattice: Lattice, freq: Frequency) -> np.ndarray:
    """exp(i·2π(k·n/N)) over the lattice, with integer phase reduction before scaling"""
    k = _check_freq(lattice, freq)
    if isinstance(lattice, Lattice1D):
        N = lattice.length
        n = np.arange(N, dtype=np.int64)
        return np.exp(2j * math.pi * (np.mod(k[0] * n, N) / N))
    ku, kv = k
    u = np.arange(lattice.U, dtype=np.int64)
    v = np.arange(lattice.V, dtype=np.int64)
    zu = np.exp(2j * math.pi * (np.mod(ku * u, lattice.U) / lattice.U))
    zv = np.exp(2j * math.pi * (np.mod(kv * v, lattice.V) / lattice.V))
    return np.outer(zv, zu)


def phase_quad(lattice: Lattice, freq: Frequency, spec: PatternSpec) -> np.ndarray:
    """The four phase-shifted FSI patterns for one frequency, shape (4, *lattice.shape)"""
    z = _unit_phasor(lattice, freq)
    re, im = z.real, z.imag
    # cos(t + phi) for phi = 0, pi/2, pi, 3pi/2
    return np.stack([spec.a + spec.b * re, spec.a - spec.b * im, spec.a - spec.b * re, spec.a + spec.b * im])


def _phase_slot(phase: float) -> Optional[int]:
    for j, p in enumerate(PHASES):
        if abs(math.remainder(phase - p, 2 * math.pi)) < 1e-15:
            return j
    return None


def synthesize_fsi_pattern(lattice: Union[CellLayout, Lattice], freq: Frequency, phase: float,
                           spec: PatternSpec) -> np.ndarray:
    """a + b·cos(2π k·n/N + φ) on the lattice"""
    lattice = _as_lattice(lattice)
    j = _phase_slot(phase)
    if j is not None:
        return phase_quad(lattice, freq, spec)[j]
    z = _unit_phasor(lattice, freq) * np.exp(1j * phase)
    return spec.a + spec.b * z.real


def _check_weights(layout: CellLayout, weights: WeightVector) -> None:
    if weights.w.shape != (layout.n_lattice,):
        raise DimensionError(f"weights cover {weights.w.size} cells, layout has {layout.n_lattice}")
    if not np.array_equal(weights.counts, layout.cell_counts):
        raise DimensionError("weights were computed for a different layout")


def weight_lattice_pattern(lattice_pattern: np.ndarray, layout: CellLayout, weights: WeightVector) -> np.ndarray:
    """T·[W(n)·P(n)]: weight each cell's value and spread it over its pixels"""
    weighted = np.asarray(lattice_pattern).ravel() * weights.w
    return weighted[layout.pixel_to_cell].reshape(layout.grid.shape)


def synthesize_uffsi_pattern(layout: CellLayout, weights: WeightVector, freq: Frequency, phase: float,
                             spec: PatternSpec) -> np.ndarray:
    """Foveated pattern on the pixel grid; empty lattice cells own no pixels and drop out"""
    _check_weights(layout, weights)
    return weight_lattice_pattern(synthesize_fsi_pattern(layout.lattice, freq, phase, spec), layout, weights)


# =============================================================================
# Spectrum assembly and reconstruction
# =============================================================================


@dataclass(frozen=True, eq=False)
class Spectrum:
    coeffs: np.ndarray
    measured_mask: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape

    def conjugate_mismatch(self) -> float:
        """max |C(-k) - conj C(k)| over the lattice"""
        flipped = self.coeffs
        for axis in range(self.coeffs.ndim):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        return float(np.max(np.abs(flipped - np.conj(self.coeffs)))) if self.coeffs.size else 0.0


def assemble_spectrum(measurements: 'MeasurementSet', plan: FrequencyPlan, spec: PatternSpec) -> Spectrum:
    """C(f) = [(S_0 - S_pi) + j(S_pi/2 - S_3pi/2)] / (2b), mirrored onto the conjugate slots"""
    readings = np.asarray(measurements.readings, dtype=float)
    if readings.shape != (plan.n_freq, 4) or np.isnan(readings).any():
        raise IncompleteMeasurementError(
            f"expected 4 readings for each of {plan.n_freq} frequencies, got array {readings.shape}"
            + (" with missing entries" if readings.size and np.isnan(readings).any() else ""))
    if measurements.plan is not plan and not np.array_equal(measurements.plan.ordered_freqs, plan.ordered_freqs):
        raise IncompleteMeasurementError("measurements were taken for a different frequency plan")
    if not np.isfinite(readings).all():
        raise NumericError("non-finite detector readings")

    c = ((readings[:, 0] - readings[:, 2]) + 1j * (readings[:, 1] - readings[:, 3])) / (2.0 * spec.b)
    slot, conj_slot = plan.flat_slots()

    # self-conjugate frequencies carry real coefficients
    self_conj = slot == conj_slot
    c[self_conj] = c[self_conj].real

    coeffs = np.zeros(plan.n_lattice, dtype=complex)
    coeffs[conj_slot] = np.conj(c)
    coeffs[slot] = c
    mask = np.zeros(plan.n_lattice, dtype=bool)
    mask[slot] = True
    mask[conj_slot] = True
    return Spectrum(coeffs=coeffs.reshape(plan.lattice_shape), measured_mask=mask.reshape(plan.lattice_shape))


def inverse_transform(spectrum: Spectrum) -> np.ndarray:
    """Complex lattice image from the spectrum (1/N_lattice normalization)"""
    if spectrum.coeffs.ndim == 1:
        return np.fft.ifft(spectrum.coeffs)
    return np.fft.ifft2(spectrum.coeffs)


def reconstruct_lattice(spectrum: Spectrum, layout: CellLayout) -> np.ndarray:
    """Real part of the inverse transform, checked against the layout lattice"""
    if spectrum.shape != layout.lattice.shape:
        raise DimensionError(f"spectrum shape {spectrum.shape} does not match lattice {layout.lattice.shape}")
    image = inverse_transform(spectrum)
    if image.size:
        logger.debug("inverse transform imaginary residue: %.3e", float(np.max(np.abs(image.imag))))
    real = image.real
    if not np.isfinite(real).all():
        raise NumericError("non-finite values in reconstructed lattice image")
    return real


def reconstruct(spectrum: Spectrum, layout: CellLayout) -> np.ndarray:
    """Pixel image T·IFT{C}"""
    return expand_to_pixels(reconstruct_lattice(spectrum, layout), layout)


def direct_dft(values: np.ndarray) -> np.ndarray:
    """Forward DFT by explicit summation, for small lattices"""
    values = np.asarray(values, dtype=complex)
    out = values
    for axis in range(values.ndim):
        n = values.shape[axis]
        k = np.arange(n)
        kernel = np.exp(-2j * math.pi * np.mod(np.outer(k, k), n) / n)
        out = np.moveaxis(np.tensordot(kernel, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
    return out


def frequencies_from_arg(values: Sequence[str], lattice: Lattice) -> Sequence[Frequency]:
    """Parse '3' or '3,1' style frequency strings for the given lattice"""
    freqs = []
    for raw in values:
        parts = [p for p in str(raw).replace(':', ',').split(',') if p.strip()]
        try:
            ints = [int(p) for p in parts]
        except ValueError:
            raise ParameterError(f"frequency {raw!r} is not an integer list")
        if isinstance(lattice, Lattice1D):
            if len(ints) != 1:
                raise ParameterError(f"1D lattice takes a single frequency index, got {raw!r}")
            freqs.append(ints[0])
        else:
            if len(ints) != 2:
                raise ParameterError(f"2D lattice takes k_u,k_v, got {raw!r}")
            freqs.append((ints[0], ints[1]))
        _check_freq(lattice, freqs[-1])
    return freqs
