"""End-to-end acceptance criteria, each at its stated tolerance.

Set DCOVMAT_ACCEPTANCE_PROFILE=fast to run the Model 6 rank check at
n = 800 with a 0.70 frequency threshold instead of n = 1600 and 0.90.
"""

import json
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

from dcovmat.bench import Scenario, histogram_deviation, run_scenario
from dcovmat.cli import main
from dcovmat.dcm import dcov_triple_sum, sample_dcov_squared
from dcovmat.lsd import ModelSpec, cubic_coefficients, cubic_edge, density, named_model, solve_point, support_edge
from dcovmat.measure import point_mass
from dcovmat.rank import calibrate_dn
from dcovmat.spike import fold_edge, spike_location, theta_critical
from dcovmat.synth import DataPair, InnovationLaw

from conftest import acceptance_profile

pytestmark = pytest.mark.acceptance


def test_c01_trace_identity_exact(verdict):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 11))
        p, q = (int(v) for v in rng.integers(1, 8, size=2))
        d = DataPair(rng.standard_normal((p, n)), rng.standard_normal((q, n)))
        s1, s2, s3 = dcov_triple_sum(d)
        ref = s1 + s2 - 2 * s3
        worst = max(worst, abs(sample_dcov_squared(d) - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    verdict("criterion 1 trace identity", worst < 1e-12 and elapsed < 1.0,
            f"max rel diff {worst:.2e} (< 1e-12), {elapsed:.3f}s (< 1s)")


@pytest.mark.parametrize("p, target", [(100, 1.0048), (400, 1.0013)])
def test_c02_tn_degeneracy(verdict, p, target):
    res = run_scenario(Scenario.tn_table(p, replicates=200, seed=2), overlays=False)
    mean = res.aggregates["tn"]["mean"]
    verdict(f"criterion 2 mean T_n at p={p}", abs(mean - target) <= 0.002,
            f"{mean:.5f} vs {target} +- 0.002")


@pytest.mark.parametrize("c", [1.0, 3.0, 5.0])
def test_c03_solver_vs_cubic(verdict, c):
    md = ModelSpec(c, c)
    xs = np.linspace(0.01, 1.5 * cubic_edge(c), 200)
    start = time.perf_counter()
    worst, branch = 0.0, True
    prev = None
    for x in xs[::-1]:
        z = complex(x, 1e-4)
        prev = solve_point(md, z, prev)
        worst = max(worst, abs(np.polyval(cubic_coefficients(c, z), prev.s)))
        branch &= prev.branch_ok()
    elapsed = time.perf_counter() - start
    verdict(f"criterion 3 cubic residual c={c:g}", worst < 1e-8 and branch and elapsed < 10,
            f"max residual {worst:.2e} (< 1e-8), branch certificates {'hold' if branch else 'violated'}, {elapsed:.2f}s")


@pytest.mark.parametrize("name, hi", [("model1", 20.0), ("model2", 8.0)])
def test_c04_density_mass(verdict, name, hi):
    mass = density(named_model(name), np.linspace(0.0, hi, 800)).mass()
    verdict(f"criterion 4 density mass {name}", abs(mass - 1) < 0.02, f"{mass:.4f} (1 +- 0.02)")


def test_c04_model2_histogram(verdict):
    sc = Scenario.named("model2", 400, replicates=50, stats=("spectrum",), seed=4)
    res = run_scenario(sc, overlays=False)
    assert sc.dims == (800, 400, 400)
    dev = histogram_deviation(*res.histogram, named_model("model2"))
    verdict("criterion 4 model2 histogram vs density", dev < 0.05, f"sup deviation {dev:.4f} (< 0.05)")


def test_c05_model4_edge(verdict):
    start = time.perf_counter()
    edge = support_edge(named_model("model4")).lambda_plus
    elapsed = time.perf_counter() - start
    verdict("criterion 5 model4 edge", abs(edge - 9.95) <= 0.05 and elapsed < 10,
            f"{edge:.4f} (9.95 +- 0.05), {elapsed:.2f}s")


_PHASE = [
    ("model4", "location", 2.0, 10.6875, ("abs", 0.001)),
    ("model4", "location", 3.0, 15.0123, ("abs", 0.001)),
    ("model4", "theta0", None, 1.52, ("abs", 0.01)),
    ("model5", "location", 2.0, 69.83, ("rel", 0.005)),
    ("model5", "location", 4.0, 187.5, ("rel", 0.005)),
    ("model5", "theta0", None, 1.2, ("abs", 0.05)),
    ("model6", "theta0", None, 2.5, ("abs", 0.05)),
]


@pytest.mark.parametrize("name, kind, theta, target, tol", _PHASE)
def test_c06_phase_transition(verdict, name, kind, theta, target, tol):
    md = named_model(name)
    start = time.perf_counter()
    value = spike_location(md, theta) if kind == "location" else theta_critical(md)
    elapsed = time.perf_counter() - start
    mode, eps = tol
    err = abs(value - target) if mode == "abs" else abs(value - target) / target
    what = f"lambda(theta={theta:g})" if kind == "location" else "theta0"
    verdict(f"criterion 6 {name} {what}", err <= eps and elapsed < 60,
            f"{value:.6g} vs {target} ({mode} err {err:.3g}, tol {eps})")


@pytest.fixture(scope="module")
def model4_runs():
    def top_mean(n, theta, reps=100):
        res = run_scenario(Scenario.named("model4", n, replicates=reps, thetas=(theta,), top_k=1, seed=7),
                           overlays=False)
        return res.aggregates["eig_1"]["mean"]

    return top_mean


@pytest.mark.parametrize("theta, target, sd", [(3.0, 15.0446, 0.7458), (2.0, 10.7114, 0.35)])
def test_c07_spiked_top_eigenvalue(verdict, model4_runs, theta, target, sd):
    mean = model4_runs(400, theta)
    band = 3 * sd / np.sqrt(100)
    verdict(f"criterion 7 model4 theta={theta:g} mean top eigenvalue", abs(mean - target) <= band,
            f"{mean:.4f} vs {target} +- {band:.4f}")


def test_c07_subcritical_sticks_to_edge(verdict, model4_runs):
    lam_plus = fold_edge(named_model("model4"))[0]
    means = [model4_runs(n, 1.0) for n in (200, 400, 800)]
    ok = all(m < lam_plus for m in means) and means[0] < means[1] < means[2]
    verdict("criterion 7 model4 theta=1 below edge and rising", ok,
            f"means {[round(m, 4) for m in means]} at n=200,400,800; edge {lam_plus:.4f}")


def _rank_frequency(name, n, thetas, target_rank):
    sc = Scenario.named(name, n, replicates=200, thetas=thetas, stats=("rank",), d_n=0.5, seed=11)
    p, q, _ = sc.dims
    table = calibrate_dn(n, p, q, point_mass(), point_mass(), replicates=500, seed=12)
    res = run_scenario(sc.with_(d_n=table.d_n), overlays=False)
    freq = res.aggregates["m_hat"]["frequency"]
    return freq.get(str(target_rank), 0.0), table.d_n, freq


def test_c08_rank_model5(verdict):
    f, d_n, freq = _rank_frequency("model5", 800, (4.0, 3.0, 2.0), 3)
    verdict("criterion 8 model5 n=800 freq(m_hat=3)", f >= 0.85, f"{f:.3f} (>= 0.85), d_n={d_n:.4f}, {freq}")


def test_c08_rank_model6(verdict):
    n, threshold = (800, 0.70) if acceptance_profile() == "fast" else (1600, 0.90)
    f, d_n, freq = _rank_frequency("model6", n, (4.0, 3.0, 2.0, 1.0), 2)
    verdict(f"criterion 8 model6 n={n} freq(m_hat=2)", f >= threshold,
            f"{f:.3f} (>= {threshold}), d_n={d_n:.4f}, {freq}")


@pytest.fixture(scope="module")
def baseline_run():
    sc = Scenario.named("model5", 1000, replicates=100, thetas=(2.0,), stats=("eigs", "cca"), top_k=11, seed=13)
    assert sc.dims == (100, 200, 1000)
    res = run_scenario(sc, overlays=False)

    def table(prefix):
        return np.array([[r[f"{prefix}_{j}"] for j in range(1, 12)] for r in res.rows])

    return {k: table(k) for k in ("eig", "cca", "tcca")}


def test_c09_dcm_first_ratio(verdict, baseline_run):
    m = baseline_run["eig"]
    ratio = float(np.mean(m[:, 1] / m[:, 0]))
    verdict("criterion 9 DCM mean first ratio", ratio < 0.5, f"{ratio:.4f} (< 0.5)")


@pytest.mark.parametrize("prefix", ["cca", "tcca"])
def test_c09_baseline_ratios(verdict, baseline_run, prefix):
    m = baseline_run[prefix]
    mins = float(np.mean((m[:, 1:] / m[:, :-1]).min(axis=1)))
    verdict(f"criterion 9 {prefix.upper()} mean min adjacent ratio", mins > 0.9, f"{mins:.4f} (> 0.9)")


def test_c09_tcca_largest(verdict, baseline_run):
    top = float(baseline_run["tcca"][:, 0].mean())
    verdict("criterion 9 TCCA mean largest", 0.49 <= top <= 0.53, f"{top:.4f} (in [0.49, 0.53])")


def test_c10_universality(verdict):
    pooled = []
    for law in ("normal", "chisq:2"):
        sc = Scenario.named("model1", 400, replicates=20, stats=("spectrum",), law=InnovationLaw.parse(law), seed=17)
        pooled.append(run_scenario(sc, overlays=False).spectra.ravel())
    dist = ks_2samp(*pooled).statistic
    verdict("criterion 10 universality KS distance", dist < 0.05, f"{dist:.4f} (< 0.05)")


def test_c11_determinism(verdict, tmp_path):
    argv = ["simulate", "--scenario", "model4", "--n", "100", "--reps", "12", "--thetas", "3",
            "--stats", "eigs,spectrum,tn", "--seed", "99"]
    dirs = {}
    for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
        dirs[tag] = tmp_path / tag
        assert main([*argv, "--threads", str(threads), "--out", str(dirs[tag])]) == 0
    names = sorted(p.name for p in dirs["a"].iterdir())
    same = all(
        (dirs["a"] / f).read_bytes() == (dirs[t] / f).read_bytes() for t in ("b", "c") for f in names
    ) and all(sorted(p.name for p in dirs[t].iterdir()) == names for t in ("b", "c"))
    verdict("criterion 11 determinism (repeat and threads 1 vs 8)", same, f"{len(names)} files compared")
