import hashlib
import math
from typing import Union


def format_percentage(fraction: Union[int, float], decimal_places: int = 1) -> str:
    """Format a fraction as a percentage ("0.767" -> "76.7%")"""
    if fraction == 0:
        return "0%"
    return f"{fraction * 100:.{decimal_places}f}%"


def format_redundancy(fraction: float) -> str:
    """Whole-percent redundancy figure, the way it is quoted in summaries ("89%")"""
    return format_percentage(fraction, 0)


def format_db(value: float, decimal_places: int = 2) -> str:
    """PSNR in dB; identical images print as 'inf dB'"""
    if math.isinf(value):
        return "inf dB"
    return f"{value:.{decimal_places}f} dB"


def format_count(value: int) -> str:
    return f"{value:,}"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()

