"""Named simulation scenarios, their replicate runner and the CCA / TCCA baselines."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dcm import build_dcm, tn_statistic
from .errors import DcovError, NumericalError
from .lsd import NAMED_MODELS, ModelSpec, density
from .measure import DiscreteMeasure, point_mass
from .rank import eigen_ratios, estimate_rank
from .spike import fold_edge, spike_location, theta_critical
from .synth import NORMAL, DataPair, InnovationLaw, SpikeSpec, gen_spiked

__all__ = [
    "Scenario",
    "ScenarioResult",
    "run_scenario",
    "cca_top_eigs",
    "tcca_top_eigs",
    "ratio_profile",
    "histogram_deviation",
    "write_result",
    "load_result",
]

SCENARIO_NAMES = ("model1", "model2", "model4", "model5", "model6", "tn-table", "custom")
STATS = ("eigs", "spectrum", "tn", "rank", "cca")
ABORT_FRACTION = 0.05


@dataclass(frozen=True)
class Scenario:
    """One simulation design.

    ``stats`` selects the per-replicate quantities: ``eigs`` (top ``top_k``
    DCM eigenvalues), ``spectrum`` (full spectrum, pooled into a histogram),
    ``tn``, ``rank`` (needs ``d_n``) and ``cca`` (CCA and TCCA top values).
    """

    name: str
    dims: tuple[int, int, int]
    replicates: int = 100
    thetas: tuple[float, ...] = ()
    law: InnovationLaw = NORMAL
    seed: int = 0
    hx: DiscreteMeasure = field(default_factory=point_mass)
    hy: DiscreteMeasure = field(default_factory=point_mass)
    stats: tuple[str, ...] = ("eigs",)
    top_k: int = 5
    d_n: float | None = None
    cap: int = 20

    def __post_init__(self) -> None:
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "stats", tuple(self.stats))
        bad = set(self.stats) - set(STATS)
        if bad:
            raise ValueError(f"unknown statistics {sorted(bad)}; expected a subset of {STATS}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if not 1 <= self.top_k <= self.dims[2]:
            raise ValueError(f"top_k must lie in [1, n={self.dims[2]}], got {self.top_k}")
        if "rank" in self.stats and self.d_n is None:
            raise ValueError("rank estimation needs d_n")
        SpikeSpec(self.thetas)  # validates ordering

    @classmethod
    def named(cls, name: str, n: int, **kw) -> "Scenario":
        """Scenario pinned to a named model: p = c1 n, q = c2 n with the model's PSDs."""
        model = NAMED_MODELS[name]
        dims = (round(model.c1 * n), round(model.c2 * n), int(n))
        return cls(name, dims, hx=model.hx, hy=model.hy, **kw)

    @classmethod
    def tn_table(cls, p: int, **kw) -> "Scenario":
        """The T_n design p = q = n / 2."""
        kw.setdefault("stats", ("tn",))
        return cls("tn-table", (p, p, 2 * p), **kw)

    @property
    def model(self) -> ModelSpec:
        p, q, n = self.dims
        return ModelSpec(p / n, q / n, self.hx, self.hy)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "replicates": self.replicates,
            "thetas": list(self.thetas),
            "law": self.law.to_dict(),
            "seed": self.seed,
            "hx": self.hx.to_dict(),
            "hy": self.hy.to_dict(),
            "stats": list(self.stats),
            "top_k": self.top_k,
            "d_n": self.d_n,
            "cap": self.cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            d["name"],
            tuple(d["dims"]),
            d["replicates"],
            tuple(d["thetas"]),
            InnovationLaw.from_dict(d["law"]),
            d["seed"],
            DiscreteMeasure.from_dict(d["hx"]),
            DiscreteMeasure.from_dict(d["hy"]),
            tuple(d["stats"]),
            d["top_k"],
            d["d_n"],
            d["cap"],
        )


@dataclass
class ScenarioResult:
    scenario: Scenario
    rows: list[dict]
    aggregates: dict
    histogram: tuple[np.ndarray, np.ndarray] | None = None
    overlay: tuple[np.ndarray, np.ndarray] | None = None
    predictions: dict = field(default_factory=dict)
    spectra: np.ndarray | None = None

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r.get(key) is not None], dtype=float)


# ---------------------------------------------------------------------------
# baselines


def _orthonormal_basis(m: np.ndarray, label: str) -> np.ndarray:
    centered = m - m.mean(axis=1, keepdims=True)
    qm, r = np.linalg.qr(centered.T)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise NumericalError(
            f"{label} block is rank deficient after centering; classical CCA needs a regularized variant"
        )
    return qm


def cca_top_eigs(data: DataPair, k: int) -> np.ndarray:
    """Top ``k`` squared sample canonical correlations.

    These are the eigenvalues of (XX')^-1 XY' (YY')^-1 YX' for row-centred
    X, Y, obtained as squared singular values of Qx' Qy from thin QR factors.
    """
    qx = _orthonormal_basis(data.x, "x")
    qy = _orthonormal_basis(data.y, "y")
    sv = np.linalg.svd(qx.T @ qy, compute_uv=False)
    return np.clip(sv[:k], 0.0, 1.0) ** 2


def tcca_top_eigs(data: DataPair, k: int) -> np.ndarray:
    """CCA after the entrywise transform x -> exp(x)."""
    for label, m in (("x", data.x), ("y", data.y)):
        if np.max(m) > 700.0:
            raise NumericalError(f"exp overflows on {label} entries above 700; rescale the data first")
    return cca_top_eigs(DataPair(np.exp(data.x), np.exp(data.y)), k)


def ratio_profile(eigs, k: int) -> np.ndarray:
    """First ``k`` adjacent ratios of a descending sequence."""
    return eigen_ratios(eigs, k)


# ---------------------------------------------------------------------------
# running


def _replicate(sc: Scenario, r: int) -> dict:
    p, q, n = sc.dims
    data = gen_spiked((p, q, n), sc.hx, sc.hy, sc.law, SpikeSpec(sc.thetas), sc.seed, replicate=r)
    row: dict = {"replicate": r}
    need = 0
    if "eigs" in sc.stats:
        need = sc.top_k
    if "rank" in sc.stats:
        need = max(need, sc.cap + 1)
    if "spectrum" in sc.stats or need:
        top = None if "spectrum" in sc.stats else need
        eigs = build_dcm(data, top=top).eigenvalues
        if "spectrum" in sc.stats:
            row["_spectrum"] = eigs
        if "eigs" in sc.stats:
            for j in range(sc.top_k):
                row[f"eig_{j + 1}"] = float(eigs[j])
        if "rank" in sc.stats:
            est = estimate_rank(eigs, sc.d_n, sc.cap)
            row["m_hat"] = est.m_hat
            row["capped"] = int(est.capped)
    if "tn" in sc.stats:
        row["tn"] = tn_statistic(data)
    if "cca" in sc.stats:
        for prefix, fn in (("cca", cca_top_eigs), ("tcca", tcca_top_eigs)):
            vals = fn(data, sc.top_k)
            for j, v in enumerate(vals):
                row[f"{prefix}_{j + 1}"] = float(v)
    return row


def _safe_replicate(sc: Scenario, r: int):
    try:
        return _replicate(sc, r)
    except (DcovError, ValueError, np.linalg.LinAlgError) as exc:
        return {"replicate": r, "_error": f"{type(exc).__name__}: {exc}"}


def _aggregate(rows: list[dict]) -> dict:
    keys = [k for k in rows[0] if k not in ("replicate", "capped")] if rows else []
    out: dict = {"replicates": len(rows)}
    for key in keys:
        vals = np.array([r[key] for r in rows], dtype=float)
        entry = {"mean": float(vals.mean()), "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0}
        if key == "m_hat":
            uniq, counts = np.unique(vals.astype(int), return_counts=True)
            entry["frequency"] = {str(int(u)): float(c) / vals.size for u, c in zip(uniq, counts)}
        out[key] = entry
    if rows and "capped" in rows[0]:
        out["capped"] = int(sum(r["capped"] for r in rows))
    return out


def fd_histogram(values: np.ndarray, bins="fd") -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(values, bins=bins)
    return edges, counts


def _overlays(sc: Scenario, pooled: np.ndarray | None) -> tuple[tuple | None, dict]:
    model = sc.model
    preds: dict = {"model": model.to_dict()}
    lam_plus, _ = fold_edge(model)
    theta0 = theta_critical(model)
    preds["lambda_plus"] = lam_plus
    preds["theta0"] = theta0
    preds["spikes"] = [
        {"theta": t, "location": spike_location(model, t) if t > 0 else None, "supercritical": t > theta0}
        for t in sc.thetas
    ]
    overlay = None
    if pooled is not None:
        hi = max(1.05 * lam_plus, float(pooled.max()) * 1.02)
        xs = np.linspace(0.0, hi, 600)
        overlay = (xs, density(model, xs).fs)
    return overlay, preds


def run_scenario(
    sc: Scenario, threads: int = 1, *, bins="fd", overlays: bool = True
) -> ScenarioResult:
    """Run every replicate on its own random streams and reduce in replicate order."""
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        raw = list(pool.map(lambda r: _safe_replicate(sc, r), range(sc.replicates)))
    failed = [r for r in raw if "_error" in r]
    if len(failed) > ABORT_FRACTION * sc.replicates:
        raise NumericalError(
            f"{len(failed)} of {sc.replicates} replicates failed; first: {failed[0]['_error']}"
        )
    rows = [r for r in raw if "_error" not in r]
    spectra = None
    if "spectrum" in sc.stats:
        spectra = np.stack([r.pop("_spectrum") for r in rows])
    result = ScenarioResult(sc, rows, _aggregate(rows), spectra=spectra)
    result.aggregates["failed"] = len(failed)
    if spectra is not None:
        result.histogram = fd_histogram(spectra.ravel(), bins)
    if overlays:
        result.overlay, result.predictions = _overlays(sc, None if spectra is None else spectra.ravel())
    return result


def histogram_deviation(edges, counts, model: ModelSpec, per_bin: int = 8) -> float:
    """Sup over bins of |histogram density - bin-averaged limiting density|."""
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    widths = np.diff(edges)
    hist = counts / (counts.sum() * widths)
    offsets = (np.arange(per_bin) + 0.5) / per_bin
    xs = (edges[:-1, None] + widths[:, None] * offsets[None, :]).ravel()
    order = np.argsort(xs)
    fs = np.empty_like(xs)
    fs[order] = density(model, xs[order]).fs
    avg = fs.reshape(-1, per_bin).mean(axis=1)
    return float(np.max(np.abs(hist - avg)))


# ---------------------------------------------------------------------------
# storage


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_result(result: ScenarioResult, outdir) -> Path:
    """Write replicates.csv, aggregates.json, predictions.json and, when present,
    histogram.csv, overlay_density.csv and spectra.csv."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.rows
    cols = list(rows[0]) if rows else ["replicate"]
    with (out / "replicates.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
    _dump_json({"scenario": result.scenario.to_dict(), **result.aggregates}, out / "aggregates.json")
    _dump_json(result.predictions, out / "predictions.json")
    if result.histogram is not None:
        edges, counts = result.histogram
        with (out / "histogram.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["left", "right", "count"])
            for a, b, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([_fmt(a), _fmt(b), int(c)])
    if result.overlay is not None:
        with (out / "overlay_density.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "f"])
            for x, f in zip(*result.overlay):
                w.writerow([_fmt(x), _fmt(f)])
    if result.spectra is not None:
        np.savetxt(out / "spectra.csv", result.spectra, fmt="%.17g", delimiter=",")
    return out


def _parse_cell(col: str, text: str):
    if text == "":
        return None
    if col in ("replicate", "m_hat", "capped"):
        return int(text)
    return float(text)


def load_result(outdir) -> ScenarioResult:
    """Rebuild a ScenarioResult from the files written by ``write_result``."""
    out = Path(outdir)
    agg = json.loads((out / "aggregates.json").read_text())
    sc = Scenario.from_dict(agg.pop("scenario"))
    with (out / "replicates.csv").open(newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = [{c: _parse_cell(c, t) for c, t in zip(cols, line)} for line in reader]
    result = ScenarioResult(sc, rows, agg, predictions=json.loads((out / "predictions.json").read_text()))
    if (out / "histogram.csv").exists():
        h = np.loadtxt(out / "histogram.csv", delimiter=",", skiprows=1, ndmin=2)
        result.histogram = (np.append(h[:, 0], h[-1, 1]), h[:, 2].astype(int))
    if (out / "overlay_density.csv").exists():
        o = np.loadtxt(out / "overlay_density.csv", delimiter=",", skiprows=1, ndmin=2)
        result.overlay = (o[:, 0], o[:, 1])
    if (out / "spectra.csv").exists():
        result.spectra = np.loadtxt(out / "spectra.csv", delimiter=",", ndmin=2)
    return result
