"""Limiting spectral distribution of the DCM through its Stieltjes transform.

The transform s(z) solves, jointly with two auxiliary functions w(z), m(z),

    s = (w m - 1) / z,
    w = int t s + t s / (1 + t s m / c1) dH_x(t),
    m = int t + t / (1 + t w / c2) dH_y(t),

with Im s > 0, Im w > 0 and Im m < 0 whenever Im z > 0. Because m is an
explicit function of w and s is then explicit in (w, m), the system reduces
to one complex equation F(w) = w - W(s(w), m(w)) = 0, which is what the
Newton steps below solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchError, ConvergenceError, NumericalError
from .measure import DiscreteMeasure, point_mass

__all__ = [
    "ModelSpec",
    "StieltjesPoint",
    "DensityGrid",
    "EdgeInfo",
    "solve_point",
    "density",
    "support_edge",
    "cubic_reference",
    "cubic_coefficients",
    "cubic_edge",
    "cubic_split_relations",
    "empirical_stieltjes",
    "NAMED_MODELS",
    "named_model",
]

TOL_NEWTON = 1e-14
RESIDUAL_TOL = 1e-10
EDGE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class ModelSpec:
    """Dimension ratios c1 = p/n, c2 = q/n and the two population spectral distributions."""

    c1: float
    c2: float
    hx: DiscreteMeasure = field(default_factory=point_mass)
    hy: DiscreteMeasure = field(default_factory=point_mass)

    def __post_init__(self) -> None:
        for name in ("c1", "c2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def gamma_x(self) -> float:
        return self.hx.mean()

    @property
    def gamma_y(self) -> float:
        return self.hy.mean()

    @property
    def lsd_mean(self) -> float:
        """First moment of the limiting law, 4 gamma_x gamma_y."""
        return 4.0 * self.gamma_x * self.gamma_y

    def to_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "hx": self.hx.to_dict(), "hy": self.hy.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            float(d["c1"]),
            float(d["c2"]),
            DiscreteMeasure.from_dict(d["hx"]) if "hx" in d else point_mass(),
            DiscreteMeasure.from_dict(d["hy"]) if "hy" in d else point_mass(),
        )


def _two_atom(a, b):
    return DiscreteMeasure((a, b), (0.5, 0.5))


NAMED_MODELS = {
    "model1": ModelSpec(1.0, 1.0),
    "model2": ModelSpec(2.0, 1.0, _two_atom(0.5, 1.0), _two_atom(0.25, 0.75)),
    "model4": ModelSpec(2.0, 2.0),
    "model5": ModelSpec(0.1, 0.2),
    "model6": ModelSpec(1.0, 2.0, _two_atom(0.5, 1.0), _two_atom(1.0, 1.5)),
    "tn-table": ModelSpec(0.5, 0.5),
}


def named_model(name: str) -> ModelSpec:
    try:
        return NAMED_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(NAMED_MODELS)}") from None


@dataclass(frozen=True)
class StieltjesPoint:
    z: complex
    s: complex
    w: complex
    m: complex
    residual: float

    def branch_ok(self) -> bool:
        return self.s.imag > 0 and self.w.imag > 0 and self.m.imag < 0


@dataclass(frozen=True)
class DensityGrid:
    xs: np.ndarray
    fs: np.ndarray
    eps: float

    def mass(self) -> float:
        return float(np.trapezoid(self.fs, self.xs))


@dataclass(frozen=True)
class EdgeInfo:
    lambda_plus: float
    method: str
    tol: float

    def to_dict(self) -> dict:
        return {"lambda_plus": self.lambda_plus, "method": self.method, "tol": self.tol}


# ---------------------------------------------------------------------------
# the reduced equation


def _m_of_w(model: ModelSpec, w):
    t, p = model.hy.t, model.hy.p
    d = 1.0 + t * w / model.c2
    m = np.sum(p * (t + t / d))
    dm = -np.sum(p * t * t / model.c2 / (d * d))
    return m, dm


def _w_map(model: ModelSpec, s, m):
    """W(s, m) and its partial derivatives in s and m."""
    t, p = model.hx.t, model.hx.p
    d = 1.0 + t * s * m / model.c1
    val = np.sum(p * (t * s + t * s / d))
    ds = np.sum(p * (t + t / (d * d)))
    dm = -np.sum(p * (t * s) ** 2 / model.c1 / (d * d))
    return val, ds, dm


def _reduced(model: ModelSpec, z, w):
    """F(w), F'(w), s, m for the one-variable form of the system."""
    m, dm = _m_of_w(model, w)
    s = (w * m - 1.0) / z
    dsdw = (m + w * dm) / z
    wv, ws, wm = _w_map(model, s, m)
    return w - wv, 1.0 - (ws * dsdw + wm * dm), s, m


def _residual(model: ModelSpec, z, s, w, m) -> float:
    r1 = abs(s - (w * m - 1.0) / z)
    r2 = abs(w - _w_map(model, s, m)[0])
    r3 = abs(m - _m_of_w(model, w)[0])
    return float(max(r1, r2, r3))


def _point(model, z, w) -> StieltjesPoint:
    m, _ = _m_of_w(model, w)
    s = (w * m - 1.0) / z
    return StieltjesPoint(complex(z), complex(s), complex(w), complex(m), _residual(model, z, s, w, m))


def _newton(model, z, w0, maxiter=60):
    """Newton on F from ``w0``. Returns a StieltjesPoint or None on failure."""
    w = complex(w0)
    for _ in range(maxiter):
        f, df, _, _ = _reduced(model, z, w)
        if df == 0 or not np.isfinite(f) or not np.isfinite(df):
            return None
        step = f / df
        w -= step
        if not np.isfinite(w):
            return None
        if abs(step) <= TOL_NEWTON * (1.0 + abs(w)) or abs(f) <= 1e-15 * (1.0 + abs(w)):
            break
    else:
        return None
    pt = _point(model, z, w)
    if pt.residual > RESIDUAL_TOL * (1.0 + abs(z)):
        return None
    return pt


def _accept(pt, z) -> bool:
    return pt is not None and (z.imag <= 0 or pt.branch_ok())


def _continue(model, z0, w0, z1, depth=0, max_depth=40):
    """Track the admissible root from (z0, w0) to z1, halving steps on failure."""
    pt = _newton(model, z1, w0)
    if _accept(pt, z1):
        return pt
    if depth >= max_depth:
        return None
    zm = 0.5 * (z0 + z1)
    mid = _continue(model, z0, w0, zm, depth + 1, max_depth)
    if mid is None:
        return None
    return _continue(model, zm, mid.w, z1, depth + 1, max_depth)


def _fixed_point(model, z, s, w, m, damping=0.5, tol=1e-12, maxiter=10_000):
    """Damped iteration m <- M(w), w <- W(s, m), s <- (w m - 1)/z."""
    for _ in range(maxiter):
        m_new = _m_of_w(model, w)[0]
        w_new = _w_map(model, s, m_new)[0]
        s_new = (w_new * m_new - 1.0) / z
        m = damping * m_new + (1 - damping) * m
        w = damping * w_new + (1 - damping) * w
        s_old, s = s, damping * s_new + (1 - damping) * s
        if abs(s - s_old) <= tol * (1.0 + abs(s)):
            break
    return s, w, m


def _scale(model: ModelSpec) -> float:
    return max(1.0, model.lsd_mean)


def _cold(model, z, w_scale=1.0, ratio=0.5):
    """Solve at z by descending vertically from far above the real axis."""
    top = max(10.0 * _scale(model), 2.0 * abs(z.real), 2.0 * z.imag)
    z_top = complex(z.real, top)
    s0 = -1.0 / z_top
    m0 = 2.0 * model.gamma_y
    w0 = 2.0 * model.gamma_x * s0 * w_scale
    _, w, _ = _fixed_point(model, z_top, s0, w0, m0)
    pt = _newton(model, z_top, w)
    if not _accept(pt, z_top):
        return None
    y = top
    while y > z.imag:
        y_next = max(y * ratio, z.imag)
        z_next = complex(z.real, y_next)
        pt = _continue(model, complex(z.real, y), pt.w, z_next)
        if pt is None:
            return None
        y = y_next
    return pt


def solve_point(model: ModelSpec, z: complex, warm_start: StieltjesPoint | None = None) -> StieltjesPoint:
    """Solve the system at ``z`` (Im z > 0) on the admissible branch.

    With ``warm_start`` the root is tracked along the segment from the
    warm-start point to ``z``. Otherwise, and as fallback, the solver starts
    from a damped fixed-point solve high above the real axis and descends
    vertically with Newton steps; five perturbed restarts follow if that
    fails.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ValueError(f"solve_point needs Im z > 0, got {z!r}")
    best = math.inf
    if warm_start is not None:
        pt = _continue(model, warm_start.z, warm_start.w, z)
        if pt is not None:
            return pt
    attempts = [(1.0, 0.5)]
    rng = np.random.default_rng(0)
    for _ in range(5):
        attempts.append((complex(1 + 0.2 * rng.standard_normal(), 0.2 * rng.standard_normal()), 0.3))
    for w_scale, ratio in attempts:
        pt = _cold(model, z, w_scale, ratio)
        if pt is not None:
            if not pt.branch_ok():
                raise BranchError(f"converged outside the admissible branch at z={z!r}: {pt}")
            return pt
    # report the best residual a plain Newton run reaches from the asymptotic guess
    s0 = -1.0 / z
    _, w, _ = _fixed_point(model, z, s0, 2.0 * model.gamma_x * s0, 2.0 * model.gamma_y)
    best = min(best, _point(model, z, w).residual)
    raise ConvergenceError(f"no admissible solution found at z={z!r}", best)


def density(model: ModelSpec, xs, eps: float = 1e-4) -> DensityGrid:
    """Approximate density Im s(x + i eps) / pi on an increasing grid.

    The sweep runs from the right end of the grid leftwards, warm-starting
    each point from its right neighbour.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("grid must be strictly increasing")
    if not eps > 0:
        raise ValueError("eps must be positive")
    fs = np.empty_like(xs)
    prev = None
    for i in range(xs.size - 1, -1, -1):
        try:
            prev = solve_point(model, complex(xs[i], eps), prev)
        except NumericalError as exc:
            raise type(exc)(f"grid index {i} (x={xs[i]!r}): {exc}") from exc
        fs[i] = prev.s.imag / math.pi
    return DensityGrid(xs, np.clip(fs, 0.0, None), eps)


def _fhat(model, x, eps):
    return solve_point(model, complex(x, eps)).s.imag / math.pi


def support_edge(
    model: ModelSpec,
    method: str = "density-threshold",
    threshold: float = EDGE_THRESHOLD,
    eps: float = 1e-4,
) -> EdgeInfo:
    """Right edge lambda_+ of the limiting support.

    ``density-threshold`` bisects on f_hat(x) > threshold after expanding a
    bracket geometrically to the right of a point inside the support.
    ``real-axis-fold`` returns the fold of the real branch beyond the
    support (see :func:`dcovmat.spike.fold_edge`), which is exact up to
    floating point. ``cubic-discriminant`` applies only when c1 = c2 and
    both PSDs are the same point mass at 1.
    """
    scale = _scale(model)
    if method == "real-axis-fold":
        from .spike import fold_edge

        lam, _ = fold_edge(model)
        return EdgeInfo(lam, method, 1e-12 * scale)
    if method == "cubic-discriminant":
        if not (model.c1 == model.c2 and model.hx == point_mass() and model.hy == point_mass()):
            raise ValueError("the cubic applies only to c1 = c2 with point masses at 1")
        return EdgeInfo(cubic_edge(model.c1), method, 1e-12 * scale)
    if method != "density-threshold":
        raise ValueError(f"unknown edge method {method!r}")

    x_in = model.lsd_mean
    if _fhat(model, x_in, eps) <= threshold:
        for x in np.linspace(0.05, 4.0, 80) * x_in:
            if _fhat(model, x, eps) > threshold:
                x_in = float(x)
                break
        else:
            raise NumericalError("could not locate a point inside the support")
    limit = 1e6 * model.hx.mean()
    lo, hi = x_in, 2.0 * x_in
    while _fhat(model, hi, eps) > threshold:
        lo, hi = hi, 2.0 * hi
        if hi > limit:
            raise NumericalError(f"density stays above {threshold} up to x={limit!r}")
    tol = 1e-4 * scale
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _fhat(model, mid, eps) > threshold:
            lo = mid
        else:
            hi = mid
    return EdgeInfo(0.5 * (lo + hi), method, tol)


# ---------------------------------------------------------------------------
# closed form for c1 = c2 = c, H_x = H_y = delta_1


def cubic_coefficients(c: float, z):
    """Coefficients (highest degree first) of the cubic in s satisfied by the transform."""
    return [z - z * z, 1.0 - 2.0 * z + 2.0 * c * z, -1.0 + 2.0 * c - 4.0 * c * c + c * c * z, c * c]


def cubic_reference(c: float, z: complex) -> complex:
    """Root of the cubic with Im s > 0 (companion-matrix roots)."""
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("cubic_reference needs Im z > 0")
    roots = np.roots(cubic_coefficients(c, z))
    # a Stieltjes transform of a law on [0, inf) obeys |s| <= 1/Im z and Im(z s) >= 0
    bound = (1.0 + 1e-9) / z.imag
    upper = [r for r in roots if r.imag > 0 and abs(r) <= bound and (z * r).imag >= -1e-12 * abs(z * r)]
    if not upper:
        raise NumericalError(f"no admissible root of the cubic at z={z!r}")
    upper.sort(key=lambda r: r.imag, reverse=True)
    return complex(upper[0])


def cubic_edge(c: float) -> float:
    """Largest real x where the discriminant of the cubic changes sign."""
    P = np.polynomial.Polynomial
    a = P([0.0, 1.0, -1.0])
    b = P([1.0, 2.0 * c - 2.0])
    cc = P([-1.0 + 2.0 * c - 4.0 * c * c, c * c])
    d = P([c * c])
    disc = 18 * a * b * cc * d - 4 * b**3 * d + b**2 * cc**2 - 4 * a * cc**3 - 27 * a**2 * d**2
    roots = disc.roots()
    real = sorted((r.real for r in roots if abs(r.imag) < 1e-9 * (1 + abs(r))), reverse=True)
    for r in real:
        h = 1e-6 * (1.0 + abs(r))
        if disc(r - h) * disc(r + h) < 0:
            return float(r)
    raise NumericalError("discriminant has no sign change")


def cubic_split_relations(c: float, x: float, su: float) -> tuple[float, float]:
    """The two expressions for s_v^2 obtained from the real and imaginary parts of the cubic.

    Both equal the squared imaginary part of the transform on the real axis
    when ``su`` is its real part.
    """
    num1 = (c * c - su + 2 * c * su - 4 * c * c * su + c * c * x * su + su**2 - 2 * x * su**2
            + 2 * c * x * su**2 + x * su**3 - x * x * su**3)
    den1 = 1 - 2 * x + 2 * c * x + 3 * x * su - 3 * x * x * su
    num2 = 1 - 2 * c + 4 * c * c - c * c * x - 2 * su + 4 * x * su - 4 * c * x * su - 3 * x * su**2 + 3 * x * x * su**2
    den2 = -x + x * x
    return num1 / den1, num2 / den2


def empirical_stieltjes(eigs, z: complex) -> complex:
    """(1/n) sum_i 1 / (lambda_i - z)."""
    eigs = np.asarray(eigs, dtype=float)
    return complex(np.mean(1.0 / (eigs - z)))
