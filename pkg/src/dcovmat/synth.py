"""Seeded data generation: independent components model and finite-rank dependence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .measure import DiscreteMeasure, covariance_diagonal
from .rng import stream

__all__ = [
    "InnovationLaw",
    "NORMAL",
    "RADEMACHER",
    "SpikeSpec",
    "DataPair",
    "gen_independent",
    "gen_spiked",
    "unit_sphere",
    "write_data_csv",
]

_KINDS = ("standard-normal", "standardized-chi-square", "rademacher")


@dataclass(frozen=True)
class InnovationLaw:
    """Zero-mean, unit-variance law for the i.i.d. entries of W1, W2 (or for epsilon)."""

    kind: str = "standard-normal"
    df: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown innovation law {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "standardized-chi-square":
            df = 2 if self.df is None else int(self.df)
            if df < 1:
                raise ValueError("chi-square degrees of freedom must be >= 1")
            object.__setattr__(self, "df", df)
        elif self.df is not None:
            raise ValueError(f"df only applies to the chi-square law, not {self.kind!r}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "standard-normal":
            return rng.standard_normal(shape)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape) - 1.0
        v = self.df
        return (rng.chisquare(v, size=shape) - v) / math.sqrt(2.0 * v)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.df is not None:
            d["df"] = self.df
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InnovationLaw":
        return cls(d["kind"], d.get("df"))

    @classmethod
    def parse(cls, text: str) -> "InnovationLaw":
        """Accept ``normal``, ``rademacher``, ``chisq`` or ``chisq:<df>``."""
        name, _, arg = text.strip().lower().partition(":")
        if name in ("normal", "gaussian", "standard-normal"):
            return cls("standard-normal")
        if name in ("rademacher", "sign"):
            return cls("rademacher")
        if name in ("chisq", "chi2", "chi-square", "standardized-chi-square"):
            return cls("standardized-chi-square", int(arg) if arg else 2)
        raise ValueError(f"unknown innovation law {text!r}")


NORMAL = InnovationLaw("standard-normal")
RADEMACHER = InnovationLaw("rademacher")


@dataclass(frozen=True)
class SpikeSpec:
    """Dependence strengths theta_1 > ... > theta_m > 0 and the law of epsilon.

    ``directions_seed`` overrides the master seed for the u_k, v_k directions;
    ``None`` draws them from the replicate's own stream.
    """

    thetas: tuple[float, ...] = ()
    epsilon_law: InnovationLaw = RADEMACHER
    directions_seed: int | None = None

    def __post_init__(self) -> None:
        thetas = tuple(float(t) for t in self.thetas)
        object.__setattr__(self, "thetas", thetas)
        if any(t < 0 for t in thetas):
            raise ValueError(f"thetas must be non-negative, got {thetas}")
        positive = [t for t in thetas if t > 0]
        if any(b >= a for a, b in zip(positive, positive[1:])):
            raise ValueError(f"thetas must be strictly decreasing, got {thetas}")

    @property
    def rank(self) -> int:
        return len(self.thetas)


@dataclass
class DataPair:
    """Observed matrices: ``x`` is p x n, ``y`` is q x n (Y, or Z under dependence)."""

    x: np.ndarray
    y: np.ndarray
    label: str = "independent"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape[1] != self.y.shape[1]:
            raise ValueError(
                f"x and y need the same number of columns, got {self.x.shape[1]} and {self.y.shape[1]}"
            )

    @property
    def p(self) -> int:
        return self.x.shape[0]

    @property
    def q(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


def _check_dims(dims: Sequence[int]) -> tuple[int, int, int]:
    p, q, n = (int(d) for d in dims)
    if min(p, q, n) < 2:
        raise ValueError(f"dimensions must all be >= 2, got (p, q, n) = {(p, q, n)}")
    return p, q, n


def _population(hx, hy, law, p, q, n, seed, replicate):
    sx = np.sqrt(covariance_diagonal(hx, p))
    sy = np.sqrt(covariance_diagonal(hy, q))
    w1 = law.sample(stream(seed, replicate, "w1"), (p, n))
    w2 = law.sample(stream(seed, replicate, "w2"), (q, n))
    return sx[:, None] * w1, sy[:, None] * w2


def gen_independent(
    dims: Sequence[int],
    hx: DiscreteMeasure,
    hy: DiscreteMeasure,
    law: InnovationLaw = NORMAL,
    seed: int = 0,
    *,
    replicate: int = 0,
) -> DataPair:
    """Draw X = Sigma_x^{1/2} W1 and Y = Sigma_y^{1/2} W2 with diagonal Sigmas."""
    p, q, n = _check_dims(dims)
    x, y = _population(hx, hy, law, p, q, n, seed, replicate)
    return DataPair(x, y, "independent", {"seed": seed, "replicate": replicate})


def unit_sphere(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """``count`` independent uniform unit vectors in R^dim, as columns."""
    g = rng.standard_normal((dim, count))
    return g / np.linalg.norm(g, axis=0)


def gen_spiked(
    dims: Sequence[int],
    hx: DiscreteMeasure,
    hy: DiscreteMeasure,
    law: InnovationLaw = NORMAL,
    spec: SpikeSpec = SpikeSpec(),
    seed: int = 0,
    *,
    replicate: int = 0,
) -> DataPair:
    """Draw (X, Z) with z_i = eps_i * (sum_k theta_k u_k v_k') x_i + y_i.

    X and the Y part are bit-identical to ``gen_independent`` with the same
    seed and replicate, so Z = Y exactly when all thetas vanish.
    """
    p, q, n = _check_dims(dims)
    m = spec.rank
    if m > min(p, q):
        raise ValueError(f"dependence rank {m} exceeds min(p, q) = {min(p, q)}")
    x, y = _population(hx, hy, law, p, q, n, seed, replicate)
    z = y
    if m and any(spec.thetas):
        dseed = seed if spec.directions_seed is None else spec.directions_seed
        rng_d = stream(dseed, replicate, "directions")
        u = unit_sphere(rng_d, q, m)
        v = unit_sphere(rng_d, p, m)
        eps = spec.epsilon_law.sample(stream(seed, replicate, "epsilon"), n)
        proj = (v.T @ x) * eps  # m x n
        z = y + (u * np.asarray(spec.thetas)) @ proj
    return DataPair(x, z, "spiked", {"seed": seed, "replicate": replicate, "thetas": list(spec.thetas)})


def write_data_csv(data: DataPair, path, seed: int | None = None) -> None:
    """Write x then y as row-major CSV blocks preceded by a ``# p,q,n,seed`` header."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# p={data.p},q={data.q},n={data.n},seed={'' if seed is None else seed}\n")
        w = csv.writer(fh)
        for block in (data.x, data.y):
            for row in block:
                w.writerow(f"{v:.17g}" for v in row)
