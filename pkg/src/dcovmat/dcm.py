"""Distance covariance matrices, the distance covariance trace identity and T_n."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from .synth import DataPair

__all__ = [
    "DcmBundle",
    "center",
    "gram_matrix",
    "build_dcm",
    "dcm_eigenvalues",
    "distance_matrix",
    "sample_dcov_squared",
    "dcov_triple_sum",
    "tn_statistic",
    "trace_identity_gap",
    "write_eigenvalues_csv",
]


@dataclass(frozen=True)
class DcmBundle:
    """D_x, D_y, their kappas and the descending spectrum of P D_x P D_y P."""

    dx: np.ndarray
    dy: np.ndarray
    kappa_x: float
    kappa_y: float
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.dx.shape[0]

    def matrix(self) -> np.ndarray:
        """The (non-symmetric) DCM S = P D_x P D_y P, formed explicitly."""
        gd = center(self.dx) @ self.dy
        return gd - gd.mean(axis=1, keepdims=True)

    def trace(self) -> float:
        """tr S = tr(P D_x P D_y), computed without forming S."""
        return float(np.sum(center(self.dx) * self.dy))


def center(a: np.ndarray) -> np.ndarray:
    """P a P for a square matrix, by subtracting row/column means."""
    a = np.asarray(a, dtype=float)
    return a - a.mean(axis=0, keepdims=True) - a.mean(axis=1, keepdims=True) + a.mean()


def gram_matrix(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (M'M/d + kappa I, kappa) with kappa = sum_i ||m_i||^2 / (d n)."""
    d, n = m.shape
    g = m.T @ m / d
    kappa = float(np.trace(g)) / n
    g[np.diag_indices_from(g)] += kappa
    return g, kappa


def dcm_eigenvalues(
    dx: np.ndarray, dy: np.ndarray, method: str = "cholesky", top: int | None = None
) -> np.ndarray:
    """Descending eigenvalues of S = P D_x P D_y P via a symmetric similarity.

    ``method="sqrt"`` eigendecomposes G = P D_x P, clips its negative noise
    and symmetrises as G^{1/2} D_y G^{1/2}. ``method="cholesky"`` factors
    D_x = C C' and uses (PC)' (P D_y P) (PC), which has the same nonzero
    spectrum as G D_y and avoids the extra eigendecomposition. Both are
    similar to S up to the zero eigenvalue carried by the all-ones vector.
    ``top`` restricts the computation to the largest ``top`` eigenvalues.
    """
    if method == "cholesky":
        try:
            c = np.linalg.cholesky(dx)
        except np.linalg.LinAlgError:
            method = "sqrt"
        else:
            lc = c - c.mean(axis=0, keepdims=True)
            sym = lc.T @ center(dy) @ lc
    if method == "sqrt":
        vals, vecs = np.linalg.eigh(center(dx))
        root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
        sym = root @ dy @ root
    elif method != "cholesky":
        raise ValueError(f"unknown eigenvalue method {method!r}")
    sym = 0.5 * (sym + sym.T)
    n = sym.shape[0]
    if top is not None and 0 < top < n:
        vals = scipy.linalg.eigh(sym, eigvals_only=True, subset_by_index=[n - top, n - 1], check_finite=False)
        return vals[::-1]
    return np.linalg.eigvalsh(sym)[::-1]


def build_dcm(data: DataPair, method: str = "cholesky", top: int | None = None) -> DcmBundle:
    """Assemble D_x, D_y and the spectrum (or its ``top`` largest values) of the DCM."""
    if data.n < 2:
        raise ValueError("the DCM needs n >= 2 observations")
    dx, kx = gram_matrix(data.x)
    dy, ky = gram_matrix(data.y)
    eig = dcm_eigenvalues(dx, dy, method, top)
    return DcmBundle(dx, dy, kx, ky, eig)


def distance_matrix(m: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between the columns of ``m`` scaled by 1/sqrt(d)."""
    d = m.shape[0]
    return squareform(pdist(np.asarray(m, dtype=float).T)) / math.sqrt(d)


def sample_dcov_squared(data: DataPair) -> float:
    """Squared sample distance covariance via (sqrt(pq)/n^2) tr(P V_x P V_y P)."""
    n = data.n
    if n < 2:
        raise ValueError("need n >= 2")
    vx = distance_matrix(data.x)
    vy = distance_matrix(data.y)
    return math.sqrt(data.p * data.q) / n**2 * float(np.sum(center(vx) * center(vy)))


def dcov_triple_sum(data: DataPair) -> tuple[float, float, float]:
    """Direct evaluation of (S_1, S_2, S_3); V_n^2 = S_1 + S_2 - 2 S_3."""
    a = squareform(pdist(data.x.T))
    b = squareform(pdist(data.y.T))
    n = data.n
    s1 = float(np.sum(a * b)) / n**2
    s2 = float(a.sum()) / n**2 * float(b.sum()) / n**2
    s3 = float(a.sum(axis=1) @ b.sum(axis=1)) / n**3
    return s1, s2, s3


def tn_statistic(data: DataPair) -> float:
    """T_n = n V_n^2 / S_2."""
    if data.n < 3:
        raise ValueError("T_n needs n >= 3")
    a = squareform(pdist(data.x.T))
    b = squareform(pdist(data.y.T))
    n = data.n
    s2 = float(a.mean()) * float(b.mean())
    if s2 == 0.0:
        raise ValueError("S_2 is zero: all observations coincide in x or y")
    v2 = float(np.sum(center(a) * center(b))) / n**2
    return n * v2 / s2


def trace_identity_gap(data: DataPair, bundle: DcmBundle | None = None) -> float:
    """|V_n^2 - sqrt(pq / (kappa_x kappa_y)) tr(S) / (2 n^2)|.

    Sample kappas stand in for the population traces. Inputs whose columns
    all coincide in x or y make V_n^2 vanish identically while tr S does
    not; the gap is still returned but a RuntimeWarning flags the input.
    """
    if bundle is None:
        bundle = build_dcm(data)
    v2 = sample_dcov_squared(data)
    if np.ptp(data.x, axis=1).max() == 0.0 or np.ptp(data.y, axis=1).max() == 0.0:
        warnings.warn("degenerate input: identical columns, trace identity does not apply", RuntimeWarning)
    kk = bundle.kappa_x * bundle.kappa_y
    if kk <= 0.0:
        return abs(v2)
    approx = math.sqrt(data.p * data.q / kk) * bundle.trace() / (2.0 * data.n**2)
    return abs(v2 - approx)


def write_eigenvalues_csv(eigs, path) -> None:
    vals = np.sort(np.asarray(eigs, dtype=float))[::-1]
    Path(path).write_text("".join(f"{v:.17g}\n" for v in vals))
