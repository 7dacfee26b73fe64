"""Eigenvalue-ratio estimate of the detectable dependence rank and the Monte Carlo tuning of d_n."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dcm import build_dcm
from .errors import NumericalError
from .measure import DiscreteMeasure, point_mass
from .synth import NORMAL, InnovationLaw, gen_independent

__all__ = [
    "RankEstimate",
    "CalibrationTable",
    "trim_eigenvalues",
    "eigen_ratios",
    "estimate_rank",
    "calibrate_dn",
    "null_ratio_statistic",
]

TRIM_REL = 1e-10
DEFAULT_LEVEL = 0.005


@dataclass(frozen=True)
class RankEstimate:
    m_hat: int
    d_n: float
    ratios: tuple[float, ...]
    capped: bool


@dataclass(frozen=True)
class CalibrationTable:
    n: int
    p: int
    q: int
    quantile: float
    d_n: float
    replicates: int
    seed: int
    level: float = DEFAULT_LEVEL
    skipped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationTable":
        return cls(**d)


def trim_eigenvalues(eigs, rel: float = TRIM_REL) -> np.ndarray:
    """Sort descending and drop values at or below ``rel * max`` (structural and numerical zeros)."""
    vals = np.sort(np.asarray(eigs, dtype=float))[::-1]
    if vals.size == 0 or vals[0] <= 0:
        return vals[:0]
    return vals[vals > rel * vals[0]]


def eigen_ratios(eigs, k: int) -> np.ndarray:
    """First ``k`` adjacent ratios lambda_{j+1} / lambda_j of a descending positive sequence."""
    vals = np.asarray(eigs, dtype=float)
    if vals.size < k + 1 or np.any(vals[: k + 1] <= 0):
        raise ValueError(f"need {k + 1} positive leading eigenvalues, got {vals.size}")
    return vals[1 : k + 1] / vals[:k]


def estimate_rank(eigs, d_n: float, cap: int = 20) -> RankEstimate:
    """m_hat = (first j >= 1 with lambda_{j+1}/lambda_j > 1 - d_n) - 1.

    Scans at most ``cap`` ratios. When no ratio crosses the threshold the
    result is flagged ``capped`` and m_hat is the number of ratios scanned.
    """
    if not 0.0 < d_n < 1.0:
        raise ValueError(f"d_n must lie in (0, 1), got {d_n!r}")
    vals = trim_eigenvalues(eigs)
    if vals.size < 2:
        raise ValueError(f"need at least 2 positive eigenvalues, got {vals.size}")
    k = min(int(cap), vals.size - 1)
    ratios = eigen_ratios(vals, k)
    hits = np.nonzero(ratios > 1.0 - d_n)[0]
    if hits.size:
        return RankEstimate(int(hits[0]), float(d_n), tuple(map(float, ratios)), False)
    return RankEstimate(k, float(d_n), tuple(map(float, ratios)), True)


def null_ratio_statistic(n, p, q, hx, hy, law, seed, replicate) -> float | None:
    """n^{2/3} (nu_2 / nu_1 - 1) for one null replicate; None if nu_1 vanishes."""
    data = gen_independent((p, q, n), hx, hy, law, seed, replicate=replicate)
    nu = build_dcm(data, top=2).eigenvalues
    if not nu[0] > 0:
        return None
    return n ** (2.0 / 3.0) * (nu[1] / nu[0] - 1.0)


def _cache_key(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def calibrate_dn(
    n: int,
    p: int,
    q: int,
    hx: DiscreteMeasure | None = None,
    hy: DiscreteMeasure | None = None,
    law: InnovationLaw = NORMAL,
    replicates: int = 500,
    seed: int = 0,
    *,
    level: float = DEFAULT_LEVEL,
    threads: int = 1,
    cache_dir=None,
) -> CalibrationTable:
    """Tune d_n from the lower ``level`` quantile of n^{2/3}(nu_2/nu_1 - 1) under independence.

    The quantile is the order statistic of rank ceil(level * R) among the R
    usable replicates. Results are cached as JSON in ``cache_dir`` when given.
    """
    if replicates < 200:
        raise ValueError(f"calibration needs at least 200 replicates, got {replicates}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    hx = hx or point_mass()
    hy = hy or point_mass()
    payload = {
        "n": n, "p": p, "q": q, "hx": hx.to_dict(), "hy": hy.to_dict(),
        "law": law.to_dict(), "replicates": replicates, "seed": seed, "level": level,
    }
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"calibration-{_cache_key(payload)}.json"
        if cache_file.exists():
            return CalibrationTable.from_dict(json.loads(cache_file.read_text()))

    def one(r):
        return null_ratio_statistic(n, p, q, hx, hy, law, seed, r)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        stats = list(pool.map(one, range(replicates)))
    kept = np.sort([s for s in stats if s is not None])
    skipped = replicates - kept.size
    if skipped > 0.05 * replicates:
        raise NumericalError(f"{skipped} of {replicates} calibration replicates had a zero top eigenvalue")
    k = max(1, math.ceil(level * kept.size))
    quantile = float(kept[k - 1])
    table = CalibrationTable(
        n, p, q, quantile, n ** (-2.0 / 3.0) * abs(quantile), replicates, seed, level, skipped
    )
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n")
    return table
