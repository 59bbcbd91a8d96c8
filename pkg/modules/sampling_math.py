# modules/sampling_math.py
import math
from typing import Dict, Optional

from modules.errors import ParameterError
from modules.fourier_engine import frequency_count


def redundancy_reduction(M: int, N: int) -> float:
    """
    Fraction of pixel-level degrees of freedom removed by foveation.

    Formula: (M - N) / M
    """
    if M <= 0 or N < 0:
        raise ParameterError(f"pixel and cell counts must be positive, got M={M}, N={N}")
    if N > M:
        raise ParameterError(f"cell count {N} exceeds pixel count {M}")
    return (M - N) / M


def measurement_count(Sr: float, n_lattice: int) -> int:
    """
    Detector readings for sampling ratio Sr on an n_lattice-point transform lattice.

    Formula: 4 · floor(Sr · N / 2)
    """
    return 4 * frequency_count(Sr, n_lattice)


def full_sampling_measurements(n_lattice: int) -> int:
    """Nominal full-sampling budget 2N (conjugate symmetry halves 4N)"""
    return 2 * n_lattice


def sampling_ratio(n_measurements: int, n_lattice: int) -> float:
    """Sr = n_measurements / 2N"""
    if n_lattice <= 0:
        raise ParameterError(f"lattice must have at least one point, got {n_lattice}")
    return n_measurements / (2.0 * n_lattice)


def budget_for_reference_ratio(Sr_ref: float, M: int) -> int:
    """Budget of a uniform HR FSI run at Sr_ref on M pixels; the arm budget of a matched comparison"""
    return measurement_count(Sr_ref, M)


def frequencies_for_budget(budget: int) -> int:
    if budget < 4:
        raise ParameterError(f"a budget needs at least 4 measurements, got {budget}")
    return budget // 4


def budget_spread(budgets: Dict[str, int]) -> float:
    """Relative spread (max - min) / max of per-arm measurement counts"""
    values = [b for b in budgets.values() if b > 0]
    if not values:
        return 0.0
    return (max(values) - min(values)) / max(values)


def lr_downsample_factor(M: int, N: int, override: Optional[int] = None) -> int:
    """Box factor f so that the LR grid holds about N pixels: round(sqrt(M / N))"""
    if override:
        if override < 1:
            raise ParameterError(f"lr_factor must be >= 1, got {override}")
        return int(override)
    if N <= 0:
        raise ParameterError("cell count must be positive")
    return max(1, int(round(math.sqrt(M / N))))
