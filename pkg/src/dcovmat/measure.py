"""Atomic population spectral distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError

__all__ = [
    "DiscreteMeasure",
    "point_mass",
    "integrate",
    "covariance_diagonal",
    "parse_measure",
]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure ``sum_i weights[i] * delta(atoms[i])`` on (0, inf)."""

    atoms: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        atoms = tuple(float(a) for a in self.atoms)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if len(atoms) == 0 or len(atoms) != len(weights):
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if not all(math.isfinite(a) and a > 0 for a in atoms):
            raise ValueError(f"atoms must be finite and positive, got {atoms}")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise ValueError(f"atoms must be strictly increasing, got {atoms}")
        if not all(math.isfinite(w) and w > 0 for w in weights):
            raise ValueError(f"weights must be positive, got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {math.fsum(weights)!r}")

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.atoms)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.weights)

    def mean(self) -> float:
        return math.fsum(a * w for a, w in zip(self.atoms, self.weights))

    def to_dict(self) -> dict:
        return {"atoms": list(self.atoms), "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(tuple(d["atoms"]), tuple(d["weights"]))

    def to_spec(self) -> str:
        return ",".join(f"{a!r}:{w!r}" for a, w in zip(self.atoms, self.weights))


def point_mass(atom: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure((atom,), (1.0,))


def integrate(mu: DiscreteMeasure, f: Callable[[float], complex]) -> complex:
    """Return ``sum_i weights[i] * f(atoms[i])``."""
    total = 0j
    for a, w in zip(mu.atoms, mu.weights):
        try:
            v = complex(f(a))
        except (ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"integrand is not finite at atom {a!r}: {exc}") from None
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise EvaluationError(f"integrand is not finite at atom {a!r}: {v!r}")
        total += w * v
    return total


def covariance_diagonal(mu: DiscreteMeasure, dim: int) -> np.ndarray:
    """Deterministic diagonal of length ``dim`` whose empirical law approximates ``mu``.

    Counts use the largest-remainder rule: each atom first gets
    ``floor(w * dim)`` entries, leftover slots go to the largest fractional
    parts, ties broken toward the smaller atom. Output is sorted ascending.
    """
    k = len(mu.atoms)
    if dim < k:
        raise ValueError(f"dim={dim} is smaller than the number of atoms ({k})")
    # rounding to 9 decimals absorbs float noise such as 0.6 * 5 = 2.9999999999999996
    raw = [round(w * dim, 9) for w in mu.weights]
    counts = [int(math.floor(r)) for r in raw]
    frac = [r - c for r, c in zip(raw, counts)]
    short = dim - sum(counts)
    order = sorted(range(k), key=lambda i: (-frac[i], i))
    for i in order[:short]:
        counts[i] += 1
    return np.repeat(np.asarray(mu.atoms), counts)


def parse_measure(text: str) -> DiscreteMeasure:
    """Parse ``"atom:weight,atom:weight"``; weights are renormalised to sum to 1.

    Atoms may be given in any order and repeated atoms are merged.
    """
    pairs: dict[float, float] = {}
    try:
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            a, _, w = item.partition(":")
            atom = float(a)
            pairs[atom] = pairs.get(atom, 0.0) + (float(w) if w else 1.0)
    except ValueError as exc:
        raise ValueError(f"cannot parse measure {text!r}: {exc}") from None
    if not pairs:
        raise ValueError(f"empty measure {text!r}")
    atoms = sorted(pairs)
    total = math.fsum(pairs.values())
    weights = [pairs[a] / total for a in atoms]
    # put the rounding slack on the largest weight so the sum is 1 to the ulp
    j = max(range(len(weights)), key=weights.__getitem__)
    weights[j] = 1.0 - math.fsum(weights[:j] + weights[j + 1:])
    return DiscreteMeasure(tuple(atoms), tuple(weights))
