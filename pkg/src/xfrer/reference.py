"""Published reference values and the comparison bands used to check them."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import binom, norm

TOLERANCE_PP = 0.05
BAND_SIGMAS = 4.0


@dataclass(frozen=True)
class ReferencePoint:
    scenario_id: str
    hop: int
    percent: float


REFERENCE_POINTS: tuple[ReferencePoint, ...] = (
    ReferencePoint("paper-stream1-vanilla", 3, 98.98),
    ReferencePoint("paper-stream1-vanilla", 7, 98.84),
    ReferencePoint("paper-stream1-2pdu-2ue", 7, 99.97),
    ReferencePoint("paper-stream1-2pdu-1ue", 7, 99.97),
    ReferencePoint("paper-stream1-1pdu-pdcp", 7, 99.86),
    ReferencePoint("paper-stream1-1pdu-sdap", 7, 99.86),
    ReferencePoint("paper-stream2-vanilla", 4, 99.87),
    ReferencePoint("paper-stream2-vanilla", 5, 98.85),
    ReferencePoint("paper-stream2-vanilla", 7, 98.84),
    ReferencePoint("paper-stream2-enhanced", 7, 99.96),
)


def within_tolerance(value: float, percent: float, tol_pp: float = TOLERANCE_PP) -> bool:
    # small epsilon so a value printed exactly on the edge is not rejected by float noise
    return abs(100.0 * value - percent) <= tol_pp + 1e-9


def binomial_band(p: float, n: int, sigmas: float = BAND_SIGMAS) -> tuple[int, int]:
    """Accepted range of success counts for ``n`` trials at success probability ``p``.

    Union of the normal ``sigmas`` band and the exact binomial interval with the
    same two-sided tail mass; the latter keeps the band meaningful when the
    expected number of failures is far below one.
    """
    mean = n * p
    sd = math.sqrt(n * p * (1.0 - p))
    lo, hi = math.ceil(mean - sigmas * sd - 1e-9), math.floor(mean + sigmas * sd + 1e-9)
    tail = float(norm.sf(sigmas))
    if 0.0 < p < 1.0:
        lo = min(lo, int(binom.ppf(tail, n, p)))
        hi = max(hi, int(binom.isf(tail, n, p)))
    return max(lo, 0), min(hi, n)


def in_band(count: int, p: float, n: int, sigmas: float = BAND_SIGMAS) -> bool:
    lo, hi = binomial_band(p, n, sigmas)
    return lo <= count <= hi
