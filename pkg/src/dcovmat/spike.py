"""Real-axis continuation beyond the bulk: g(lambda), the critical strength and spike locations.

To the right of the support the system has a real solution with s < 0,
w < 0 and m > 0, tending to (0, 0, 2 gamma_y) as lambda grows. Two
parametrisations of that branch are used:

* by lambda, tracking the root of the reduced equation with Newton steps
  from far right (``solve_real``);
* by w, which is explicit: m(w) is closed form, s(w) is the unique root of
  a monotone function on a known interval, and lambda(w) = (w m - 1) / s.
  lambda(w) decreases from +inf as w leaves 0 and the first local minimum
  is the right edge lambda_+ (``fold_edge``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConvergenceError, DomainError, NumericalError
from .lsd import RESIDUAL_TOL, ModelSpec, _m_of_w, _reduced, _residual, _w_map

__all__ = [
    "SpikeCurve",
    "fold_edge",
    "lambda_of_w",
    "solve_real",
    "g_eval",
    "g_of_w",
    "theta_critical",
    "theta_critical_fold",
    "spike_location",
    "spike_curve",
]


@dataclass(frozen=True)
class SpikeCurve:
    model: ModelSpec
    lambda_plus: float
    theta0: float
    samples: tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# w-parametrisation


def _w_floor(model: ModelSpec) -> float:
    """m(w) has its first pole at -c2 / max(t) coming from w = 0."""
    return -model.c2 / max(model.hy.atoms)


def _s_of_w(model: ModelSpec, w: float) -> tuple[float, float]:
    m = float(_m_of_w(model, w)[0])
    lo = -model.c1 / (max(model.hx.atoms) * m)

    def f(s):
        return float(_w_map(model, s, m)[0]) - w

    # f increases on (lo, 0), tends to -inf at lo and vanishes at 0
    a = lo * (1.0 - 1e-15)
    while f(a) > 0:
        a = lo + 0.5 * (a - lo)
        if a == lo:
            raise NumericalError(f"cannot bracket s at w={w!r}")
    s = brentq(f, a, 0.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return s, m


def lambda_of_w(model: ModelSpec, w: float) -> float:
    s, m = _s_of_w(model, w)
    return (w * m - 1.0) / s


def g_of_w(model: ModelSpec, w: float) -> float:
    t, p = model.hy.t, model.hy.p
    return float(-model.gamma_x * np.sum(p * w / (model.c2 + t * w)))


def _fold(model: ModelSpec) -> tuple[float, float]:
    floor = _w_floor(model)
    ws = -np.geomspace(1e-10, -floor * (1.0 - 1e-10), 3000)
    lams = np.array([lambda_of_w(model, w) for w in ws])
    rising = np.nonzero(np.diff(lams) > 0)[0]
    if rising.size == 0:
        raise NumericalError("lambda(w) has no interior minimum; cannot locate the edge")
    i = int(rising[0])
    if i == 0:
        raise NumericalError("edge fold too close to w = 0 for the scan")
    res = minimize_scalar(
        lambda w: lambda_of_w(model, w),
        bounds=(ws[i + 1], ws[i - 1]),
        method="bounded",
        options={"xatol": 1e-15 * abs(ws[i])},
    )
    return float(res.fun), float(res.x)


_fold_cached = lru_cache(maxsize=64)(_fold)


def fold_edge(model: ModelSpec) -> tuple[float, float]:
    """(lambda_+, w_+): right edge of the support and the value of w there."""
    return _fold_cached(model)


# ---------------------------------------------------------------------------
# lambda-parametrisation


def _newton_real(model, lam, w0, maxiter=80):
    w = float(w0)
    for _ in range(maxiter):
        f, df, _, _ = _reduced(model, lam, w)
        f, df = float(np.real(f)), float(np.real(df))
        if df == 0 or not math.isfinite(f):
            return None
        step = f / df
        w -= step
        if not math.isfinite(w):
            return None
        if abs(step) <= 1e-13 * (1.0 + abs(w)) or abs(f) <= 1e-15 * (1.0 + abs(w)):
            return w
    return None


def _path(lam_plus: float, target: float) -> list[float]:
    """Geometric steps (ratio 0.9) from 100 lambda_+ then halving the distance to the edge."""
    start = max(100.0 * lam_plus, 2.0 * target)
    pts = [start]
    x = start
    while x * 0.9 > target and (x * 0.9 - lam_plus) > 2.0 * (target - lam_plus):
        x *= 0.9
        pts.append(x)
    while x - target > 1e-12 * target:
        gap = x - lam_plus
        nxt = lam_plus + 0.5 * gap
        if nxt <= target:
            break
        x = nxt
        pts.append(x)
    pts.append(target)
    return pts


def solve_real(model: ModelSpec, lam: float) -> tuple[float, float, float]:
    """Real solution (s, w, m) at lam > lambda_+ by continuation from the far right."""
    lam_plus, w_plus = fold_edge(model)
    lam = float(lam)
    if not lam > lam_plus:
        raise DomainError(f"lambda={lam!r} is not to the right of the support edge {lam_plus!r}")
    pts = _path(lam_plus, lam)
    s0 = -1.0 / pts[0]
    w = 2.0 * model.gamma_x * s0
    for x in pts:
        w_new = _newton_real(model, x, w)
        if w_new is None or not (w_plus <= w_new < 0.0):
            raise ConvergenceError(f"lost the real branch at lambda={x!r} on the way to {lam!r}")
        w = w_new
    m = float(_m_of_w(model, w)[0])
    s = (w * m - 1.0) / lam
    res = _residual(model, lam, s, w, m)
    if res > RESIDUAL_TOL * (1.0 + lam):
        raise ConvergenceError(f"residual {res:.3g} too large at lambda={lam!r}", res)
    return s, w, m


def g_eval(model: ModelSpec, lam: float) -> float:
    """g(lambda) = -int t dH_x * int w / (c2 + t w) dH_y at lambda > lambda_+."""
    _, w, _ = solve_real(model, lam)
    return g_of_w(model, w)


def theta_critical(model: ModelSpec, max_terms: int = 48, rtol: float = 1e-3) -> float:
    """theta_0 = lim g(lambda)^{-1/2} as lambda decreases to lambda_+.

    Evaluates at lambda_+ + delta_j with delta_j = 2^-j * 0.01 * lambda_+ and
    removes the square-root edge behaviour by Richardson extrapolation in
    sqrt(delta); stops when two successive extrapolants agree to ``rtol``.
    """
    lam_plus, _ = fold_edge(model)
    r2 = math.sqrt(2.0)
    thetas, extrap = [], []
    for j in range(max_terms):
        delta = 2.0 ** (-j) * 0.01 * lam_plus
        thetas.append(g_eval(model, lam_plus + delta) ** -0.5)
        if j >= 1:
            extrap.append((r2 * thetas[-1] - thetas[-2]) / (r2 - 1.0))
        if len(extrap) >= 2 and abs(extrap[-1] - extrap[-2]) < rtol * abs(extrap[-1]):
            return extrap[-1]
    err = ConvergenceError("theta_0 extrapolation did not settle")
    err.sequence = thetas
    raise err


def theta_critical_fold(model: ModelSpec) -> float:
    """theta_0 evaluated directly at the fold point w_+."""
    _, w_plus = fold_edge(model)
    return g_of_w(model, w_plus) ** -0.5


def spike_location(model: ModelSpec, theta: float, rtol: float = 1e-12) -> float | None:
    """Almost-sure limit of the spiked eigenvalue for strength ``theta``.

    Returns ``None`` when theta <= theta_0: no outlier is predicted and the
    eigenvalue sticks to lambda_+.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta!r}")
    theta0 = theta_critical(model)
    if theta <= theta0:
        return None
    lam_plus, _ = fold_edge(model)
    target = 1.0 / theta**2
    lo = lam_plus * (1.0 + 1e-9)
    if g_eval(model, lo) <= target:
        # theta sits between the extrapolated theta_0 and g(lo)^{-1/2}
        return lo
    hi = 2.0 * lam_plus
    while g_eval(model, hi) >= target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6 * lam_plus:
            raise NumericalError(f"no spike location below {1e6 * lam_plus!r} for theta={theta!r}")
    return brentq(lambda x: g_eval(model, x) - target, lo, hi, xtol=1e-14 * hi, rtol=rtol)


def spike_curve(model: ModelSpec, lambdas) -> SpikeCurve:
    lam_plus, _ = fold_edge(model)
    samples = tuple((float(x), g_eval(model, x)) for x in lambdas)
    return SpikeCurve(model, lam_plus, theta_critical(model), samples)
