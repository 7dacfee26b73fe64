"""Command-line front end: ``dcovmat <command> [options]``.

Every command writes its outputs plus ``effective-config.json`` into
``--out``. Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import Scenario, run_scenario, write_result
from .errors import DcovError
from .lsd import NAMED_MODELS, ModelSpec, density, named_model, support_edge
from .measure import DiscreteMeasure, parse_measure, point_mass
from .rank import calibrate_dn
from .spike import fold_edge, spike_location, theta_critical, theta_critical_fold
from .synth import InnovationLaw

EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def _measure(value) -> DiscreteMeasure:
    """Inline ``atom:weight,...``, a JSON file path, or an already-decoded JSON value."""
    if isinstance(value, dict):
        return DiscreteMeasure.from_dict(value)
    if isinstance(value, str) and value.endswith(".json"):
        return _measure(_load_json(value))
    if isinstance(value, str):
        return parse_measure(value)
    raise UsageError(f"cannot interpret measure {value!r}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _density_grid(text: str) -> np.ndarray:
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise UsageError(f"grid must be start:stop:count, got {text!r}") from None
    if count < 1 or not stop > start:
        raise UsageError(f"empty grid {text!r}")
    return np.linspace(start, stop, count)


def _theta_grid(text: str) -> np.ndarray:
    """``start:step:stop`` (inclusive) or ``start:stop`` with step 0.1."""
    parts = text.split(":")
    try:
        if len(parts) == 2:
            start, stop, step = float(parts[0]), float(parts[1]), 0.1
        elif len(parts) == 3:
            start, step, stop = (float(x) for x in parts)
        else:
            raise ValueError
    except ValueError:
        raise UsageError(f"theta grid must be start:step:stop, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"empty theta grid {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def _model(args) -> ModelSpec:
    if args.config:
        cfg = _load_json(args.config)
        if not isinstance(cfg, dict) or "c1" not in cfg or "c2" not in cfg:
            raise UsageError(f"{args.config}: model config needs c1 and c2")
        return ModelSpec(
            float(cfg["c1"]),
            float(cfg["c2"]),
            _measure(cfg.get("hx", "1:1")),
            _measure(cfg.get("hy", "1:1")),
        )
    if args.model:
        base = named_model(args.model)
    else:
        base = ModelSpec(1.0, 1.0)
    return ModelSpec(
        args.c1 if args.c1 is not None else base.c1,
        args.c2 if args.c2 is not None else base.c2,
        _measure(args.hx) if args.hx else base.hx,
        _measure(args.hy) if args.hy else base.hy,
    )


def _scenario(args, stats, **extra) -> Scenario:
    law = InnovationLaw.parse(args.law)
    thetas = _floats(args.thetas) if args.thetas else ()
    common = dict(
        replicates=args.reps, thetas=thetas, law=law, seed=args.seed, stats=stats, top_k=args.top_k, **extra
    )
    if args.scenario == "custom" or args.dims:
        if not args.dims:
            raise UsageError("custom scenarios need --dims p,q,n")
        dims = tuple(int(d) for d in _floats(args.dims))
        if len(dims) != 3:
            raise UsageError(f"--dims needs three integers, got {args.dims!r}")
        hx = _measure(args.hx) if args.hx else point_mass()
        hy = _measure(args.hy) if args.hy else point_mass()
        return Scenario("custom" if args.scenario == "custom" else args.scenario, dims, hx=hx, hy=hy, **common)
    if args.scenario == "tn-table":
        return Scenario.tn_table(args.p or args.n // 2, **common)
    return Scenario.named(args.scenario, args.n, **common)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_table(out: Path, stem: str, header: list[str], rows, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        _write_json([dict(zip(header, r)) for r in rows], path)
    else:
        path = out / f"{stem}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_density(args, out: Path) -> dict:
    model = _model(args)
    xs = _density_grid(args.grid)
    grid = density(model, xs, eps=args.eps)
    _write_table(out, "density", ["x", "f"], zip(grid.xs, grid.fs), args.format)
    return {"model": model.to_dict(), "grid": args.grid, "eps": args.eps, "mass": grid.mass()}


def cmd_edge(args, out: Path) -> dict:
    model = _model(args)
    info = support_edge(model, method=args.method)
    _write_json(info.to_dict(), out / "edge.json")
    return {"model": model.to_dict(), "method": args.method}


def _theta0_record(model: ModelSpec) -> dict:
    lam_plus, w_plus = fold_edge(model)
    return {
        "lambda_plus": lam_plus,
        "theta0": theta_critical(model),
        "theta0_at_fold": theta_critical_fold(model),
        "w_plus": w_plus,
    }


def cmd_theta0(args, out: Path) -> dict:
    model = _model(args)
    _write_json(_theta0_record(model), out / "theta0.json")
    return {"model": model.to_dict()}


def cmd_spike_map(args, out: Path) -> dict:
    model = _model(args)
    rec = _theta0_record(model)
    _write_json(rec, out / "theta0.json")
    rows = []
    for th in _theta_grid(args.theta_grid):
        loc = spike_location(model, th) if th > 0 else None
        sup = loc is not None
        rows.append((float(th), loc if sup else rec["lambda_plus"], sup))
    _write_table(out, "spikemap", ["theta", "lambda", "supercritical"], rows, args.format)
    return {"model": model.to_dict(), "theta_grid": args.theta_grid}


def cmd_simulate(args, out: Path) -> dict:
    stats = tuple(s for s in args.stats.split(",") if s)
    sc = _scenario(args, stats)
    write_result(run_scenario(sc, args.threads), out)
    return {"scenario": sc.to_dict()}


def cmd_tn(args, out: Path) -> dict:
    sc = Scenario.tn_table(
        args.p, replicates=args.reps, law=InnovationLaw.parse(args.law), seed=args.seed
    )
    write_result(run_scenario(sc, args.threads, overlays=False), out)
    return {"scenario": sc.to_dict()}


def _calibrate(args, dims, law):
    p, q, n = dims
    return calibrate_dn(
        n, p, q, point_mass(), point_mass(), law, args.cal_reps, args.seed,
        level=args.level, threads=args.threads, cache_dir=args.cache_dir,
    )


def cmd_calibrate(args, out: Path) -> dict:
    law = InnovationLaw.parse(args.law)
    hx = _measure(args.hx) if args.hx else point_mass()
    hy = _measure(args.hy) if args.hy else point_mass()
    reps = args.reps if args.reps is not None else 500
    table = calibrate_dn(
        args.n, args.p, args.q, hx, hy, law, reps, args.seed,
        level=args.level, threads=args.threads, cache_dir=args.cache_dir,
    )
    _write_json(table.to_dict(), out / "calibration.json")
    return {"n": args.n, "p": args.p, "q": args.q, "hx": hx.to_dict(), "hy": hy.to_dict(),
            "law": law.to_dict(), "replicates": reps, "level": args.level}


def cmd_estimate_rank(args, out: Path) -> dict:
    probe = _scenario(args, ("rank",), d_n=0.5)
    d_n = args.d_n
    record: dict = {}
    if d_n is None:
        table = _calibrate(args, probe.dims, probe.law)
        _write_json(table.to_dict(), out / "calibration.json")
        d_n = table.d_n
        record["calibration"] = {"replicates": args.cal_reps, "level": args.level, "null": "identity"}
    sc = probe.with_(d_n=d_n, cap=args.cap)
    result = run_scenario(sc, args.threads)
    write_result(result, out)
    rows = [(r["replicate"], r["m_hat"], d_n, bool(r["capped"])) for r in result.rows]
    _write_table(out, "rank", ["replicate", "m_hat", "d_n", "capped"], rows, "csv")
    record["scenario"] = sc.to_dict()
    return record


def cmd_compare_cca(args, out: Path) -> dict:
    sc = _scenario(args, ("eigs", "cca"))
    result = run_scenario(sc, args.threads)
    write_result(result, out)
    k = sc.top_k - 1
    profile = {}
    for prefix in ("eig", "cca", "tcca"):
        m = np.array([[r[f"{prefix}_{j + 1}"] for j in range(sc.top_k)] for r in result.rows])
        ratios = m[:, 1:] / m[:, :-1]
        profile["dcm" if prefix == "eig" else prefix] = {
            "mean_ratios": [float(v) for v in ratios.mean(axis=0)],
            "mean_min_ratio": float(ratios.min(axis=1).mean()),
            "mean_top": float(m[:, 0].mean()),
        }
    _write_json({"k": k, **profile}, out / "ratio_profile.json")
    return {"scenario": sc.to_dict()}


# ---------------------------------------------------------------------------
# parser


def _add_global(p: argparse.ArgumentParser, reps_default=None) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reps", type=int, default=reps_default)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--out", default=".")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=sorted(NAMED_MODELS))
    p.add_argument("--config", help="JSON file with c1, c2, hx, hy")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--hx", help='"atom:weight,..." or a JSON file')
    p.add_argument("--hy", help='"atom:weight,..." or a JSON file')


def _add_scenario(p: argparse.ArgumentParser, default="model4") -> None:
    p.add_argument("--scenario", default=default, choices=sorted(set(NAMED_MODELS) | {"custom"}))
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--p", type=int, help="tn-table only: p = q = n/2")
    p.add_argument("--dims", help="p,q,n (custom scenario)")
    p.add_argument("--hx")
    p.add_argument("--hy")
    p.add_argument("--thetas", default="")
    p.add_argument("--law", default="normal")
    p.add_argument("--top-k", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcovmat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="limiting spectral density on a grid")
    _add_model(p)
    p.add_argument("--grid", default="0:20:400", help="start:stop:count")
    p.add_argument("--eps", type=float, default=1e-4)
    _add_global(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("edge", help="right edge of the limiting support")
    _add_model(p)
    p.add_argument("--method", default="density-threshold",
                   choices=("density-threshold", "real-axis-fold", "cubic-discriminant"))
    _add_global(p)
    p.set_defaults(func=cmd_edge)

    p = sub.add_parser("theta0", help="critical dependence strength")
    _add_model(p)
    _add_global(p)
    p.set_defaults(func=cmd_theta0)

    p = sub.add_parser("spike-map", help="outlier location over a theta grid")
    _add_model(p)
    p.add_argument("--theta-grid", default="0:0.1:4", help="start:step:stop")
    _add_global(p)
    p.set_defaults(func=cmd_spike_map)

    p = sub.add_parser("simulate", help="run a scenario and store per-replicate statistics")
    _add_scenario(p)
    p.add_argument("--stats", default="eigs,spectrum")
    _add_global(p, reps_default=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tn", help="T_n under p = q = n/2")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--law", default="normal")
    _add_global(p, reps_default=200)
    p.set_defaults(func=cmd_tn)

    p = sub.add_parser("estimate-rank", help="ratio estimate of the dependence rank")
    _add_scenario(p, default="model5")
    p.add_argument("--d-n", type=float, help="skip calibration and use this d_n")
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--cal-reps", type=int, default=500)
    p.add_argument("--level", type=float, default=0.005)
    p.add_argument("--cache-dir")
    _add_global(p, reps_default=200)
    p.set_defaults(func=cmd_estimate_rank)

    p = sub.add_parser("calibrate", help="Monte Carlo tuning of d_n under independence")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--hx")
    p.add_argument("--hy")
    p.add_argument("--law", default="normal")
    p.add_argument("--level", type=float, default=0.005)
    p.add_argument("--cache-dir")
    _add_global(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare-cca", help="DCM against CCA and exp-transformed CCA")
    _add_scenario(p, default="model5")
    _add_global(p, reps_default=100)
    p.set_defaults(func=cmd_compare_cca, n=1000)
    p.set_defaults(top_k=11)
    return parser


# threads and the output directory change neither the numbers nor the bytes written
_NOT_RECORDED = ("func", "threads", "out")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "reps", None) is not None and args.reps < 1:
        print("error: --reps must be positive", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        resolved = args.func(args, out)
        config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}
        config["resolved"] = resolved
        config["version"] = __version__
        _write_json(config, out / "effective-config.json")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DcovError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
