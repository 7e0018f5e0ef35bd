"""Command-line harness: simulation, theory, phase diagnostics and comparisons.

Every subcommand prints one JSON (or CSV) document to stdout and, with
``--out``, also writes it under that directory.  Outputs depend only on the
configuration, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, bjr, critical, graphstats
from .core import (DynNetError, InfiniteMoment, InvalidParams, ModelParams, NonConvergence,
                   RngStream, SocialIndexDistribution, Version, config_to_dict,
                   distribution_from_dict, parse_distribution)
from .sim import StopRule, TooManyRestarts, run
from .snapshot import Snapshot, write_snapshot

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESTARTS = 0, 2, 3, 4

DEFAULTS = {"lambda": 1.0, "mu": 0.5, "alpha": 1.0, "beta": 0.5, "version": "U",
            "s": "const:1", "seed": 0, "replicas": 1, "workers": 1,
            "stop_n": 10_000, "stop_t": None, "max_restarts": 1000}


# ---------------------------------------------------------------------------
# configuration


def _clean(x):
    """Make a value JSON-safe: numpy scalars to Python, non-finite to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Version):
        return x.value
    return x


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2) + "\n"


class Config:
    """Merged view of defaults, a JSON config file and explicit flags."""

    def __init__(self, args: argparse.Namespace):
        values = dict(DEFAULTS)
        if getattr(args, "config", None):
            try:
                loaded = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidParams(f"cannot read config {args.config}: {exc}") from None
            if "social_index" in loaded:
                values["s"] = distribution_from_dict(loaded.pop("social_index"))
            values.update(loaded)
        for key in list(DEFAULTS) + ["out"]:
            v = getattr(args, key, None)
            if v is not None:
                values[key] = v
        if getattr(args, "stop_t", None) is not None:
            values["stop_n"] = None
        self.values = values
        s = values["s"]
        self.dist: SocialIndexDistribution = (s if isinstance(s, SocialIndexDistribution)
                                              else parse_distribution(str(s)))
        self.params = ModelParams(values["lambda"], values["mu"], values["alpha"],
                                  values["beta"], values["version"])
        self.seed = int(values["seed"])
        self.replicas = int(values["replicas"])
        self.workers = max(1, int(values["workers"]))
        self.out = values.get("out")
        self.max_restarts = int(values["max_restarts"])
        if self.max_restarts < 0:
            raise InvalidParams("max_restarts must be >= 0")
        if self.replicas < 1:
            raise InvalidParams("replicas must be >= 1")

    @property
    def stop(self) -> StopRule:
        if self.values.get("stop_t") is not None:
            return StopRule(t_target=float(self.values["stop_t"]))
        return StopRule(n_target=int(self.values["stop_n"]))

    def to_dict(self) -> dict:
        d = config_to_dict(self.params, self.dist)
        d["seed"] = self.seed
        d["replicas"] = self.replicas
        stop = self.stop
        d["stop"] = ({"n_target": stop.n_target} if stop.n_target is not None
                     else {"t_target": stop.t_target})
        return d


def _emit(text: str, cfg: Config | None, name: str) -> None:
    sys.stdout.write(text)
    if cfg is not None and cfg.out:
        d = Path(cfg.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


# ---------------------------------------------------------------------------
# simulation helpers


def _one_replica(job):
    params, dist, stop, seed, replica, max_restarts = job
    return run(params, dist, stop, RngStream(seed, stream=replica), max_restarts=max_restarts)


def simulate_replicas(params: ModelParams, dist: SocialIndexDistribution, stop: StopRule,
                      seed: int, replicas: int, workers: int = 1,
                      first_stream: int = 0, max_restarts: int = 1000) -> list[Snapshot]:
    """Independent replicas on streams ``first_stream ...``; order is fixed by index."""
    jobs = [(params, dist, stop, seed, first_stream + r, max_restarts)
            for r in range(replicas)]
    if workers <= 1 or replicas == 1:
        return [_one_replica(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_replica, jobs))


def snapshot_stats(snaps: list[Snapshot], lam: float) -> dict:
    """Pooled estimator report for a list of snapshots."""
    hist = graphstats.empirical_degree_hist(snaps)
    n_nodes = int(sum(s.n_nodes for s in snaps))
    degs = np.concatenate([s.degree for s in snaps]).astype(float)
    try:
        assort = graphstats.assortativity(snaps).to_dict()
    except graphstats.TooFewEdges as exc:
        assort = {"r": None, "n_pairs": 0, "stderr": None, "error": str(exc)}
    comps = [graphstats.largest_component(s) for s in snaps]
    fracs = np.array([c.fraction for c in comps])
    return {
        "n_nodes": n_nodes,
        "mean_degree": float(degs.mean()),
        "mean_degree_stderr": float(degs.std(ddof=1) / math.sqrt(degs.size))
        if degs.size > 1 else None,
        "degree_hist": hist.tolist(),
        "assortativity": assort,
        "components": {"largest_fraction": [float(f) for f in fracs],
                       "mean_largest_fraction": float(fracs.mean()),
                       "count": [c.count for c in comps]},
        "age_ks": graphstats.empirical_age_ks(snaps, lam).to_dict(),
        "self_loops": int(sum(s.n_self_loops for s in snaps)),
        "multi_edges": int(sum(s.n_multi_edges for s in snaps)),
        "edges": int(sum(s.n_edges for s in snaps)),
        "discards": [int(s.meta.get("discards", 0)) for s in snaps],
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: Config, args) -> int:
    snaps = simulate_replicas(cfg.params, cfg.dist, cfg.stop, cfg.seed, cfg.replicas,
                              cfg.workers, max_restarts=cfg.max_restarts)
    if cfg.out:
        for r, snap in enumerate(snaps):
            write_snapshot(snap, Path(cfg.out) / f"replica_{r:03d}",
                           sidecar={"params": config_to_dict(cfg.params, cfg.dist),
                                    "seed": cfg.seed, "stream": r})
    doc = {"schema": SCHEMA, "command": "simulate", "config": cfg.to_dict(),
           "pooled": snapshot_stats(snaps, cfg.params.lam)}
    _emit(dumps(doc), cfg, "report.json")
    return EXIT_OK


def theory_section(params: ModelParams, dist: SocialIndexDistribution,
                   kmax: int | None = None) -> dict:
    law = analytic.DegreeLaw(params, dist)
    mean, var = analytic.degree_mean_var(params, dist)
    kmax = kmax if kmax is not None else law.default_kmax()
    pmf = law.pmf_table(kmax)
    sec = {"degree_mean": mean, "degree_variance": var,
           "pmf": pmf.tolist(), "pmf_sum": float(pmf.sum()),
           "covariance": analytic.covariance(params, dist),
           "edge_moments": analytic.edge_moment_displays(params, dist)}
    try:
        sec["degree_correlation"] = analytic.degree_correlation(params, dist).to_dict()
    except InfiniteMoment as exc:
        sec["degree_correlation"] = {"rho": None, "error": str(exc)}
    sec["critical"] = critical.R_and_verdict(params, dist).to_dict()
    return sec


def cmd_theory(cfg: Config, args) -> int:
    p, dist = cfg.params, cfg.dist
    dist.require_moments(1, 2)
    m1, m2, _ = dist.moments()
    doc = {"schema": SCHEMA, "command": "theory", "config": cfg.to_dict(),
           "moments": list(dist.moments()),
           "index_ratio": m2 / (m1 * m1),
           "threshold_a": analytic.threshold_parameter(p),
           "assortativity_threshold": analytic.assortativity_threshold(p),
           "versions": {v.value: theory_section(p.with_(version=v), dist, args.kmax)
                        for v in Version}}
    if args.tables:
        _write_tables(Path(args.tables), p, dist, doc)
    _emit(dumps(doc), cfg, "theory.json")
    return EXIT_OK


def _write_tables(d: Path, p: ModelParams, dist: SocialIndexDistribution, doc: dict) -> None:
    d.mkdir(parents=True, exist_ok=True)
    law = analytic.StationaryEdgeLaw(p, dist)
    ages = np.linspace(0.0, 10.0 / p.lam, 201)
    _write_csv(d / "stationary_age.csv", ["a", "density"],
               zip(ages, law.age_density(ages)))
    if dist.is_discrete:
        grid = dist.atoms()[0]
    else:
        grid = np.asarray(dist.ppf(np.linspace(0.005, 0.995, 199)))
    _write_csv(d / "stationary_index.csv", ["s", "density"],
               zip(grid, np.atleast_1d(law.index_density(grid))))
    for v, sec in doc["versions"].items():
        _write_csv(d / f"degree_pmf_{v}.csv", ["k", "pmf"], enumerate(sec["pmf"]))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])


def _rho_solution(params, dist, args):
    kernel = bjr.ModelKernel(params, dist)
    grid = kernel.type_grid(args.grid_age, args.grid_index)
    if not args.tol > 0:
        raise InvalidParams("--tol must be positive")
    if args.max_iter < 1:
        raise InvalidParams("--max-iter must be >= 1")
    sol = bjr.solve_rho(kernel, grid, tolerance=args.tol, max_iterations=args.max_iter)
    norm = bjr.operator_norm(kernel, grid)
    return sol, norm


def cmd_rho(cfg: Config, args) -> int:
    sol, norm = _rho_solution(cfg.params, cfg.dist, args)
    doc = {"schema": SCHEMA, "command": "rho", "config": cfg.to_dict(),
           "rho_kappa": sol.rho_kappa, "norm_estimate": norm.value,
           "grid_sizes": list(sol.grid.shape), "residual": sol.residual,
           "iterations": sol.iterations}
    if args.f_csv:
        g = sol.grid
        rows = ((a, s, sol.f[i, j]) for i, a in enumerate(g.ages)
                for j, s in enumerate(g.indices))
        Path(args.f_csv).parent.mkdir(parents=True, exist_ok=True)
        _write_csv(Path(args.f_csv), ["a", "s", "f"], rows)
    _emit(dumps(doc), cfg, "rho.json")
    return EXIT_OK


def _sweep_values(spec: str) -> tuple[str, list[float]]:
    """``name:start:stop:count`` (inclusive, evenly spaced) or ``name=v1,v2,...``."""
    if "=" in spec:
        name, _, vals = spec.partition("=")
        values = [float(v) for v in vals.split(",") if v]
    else:
        parts = spec.split(":")
        if len(parts) != 4:
            raise InvalidParams(f"bad sweep spec {spec!r}")
        name = parts[0]
        values = np.linspace(float(parts[1]), float(parts[2]), int(parts[3])).tolist()
    name = {"lam": "lambda"}.get(name, name)
    if name not in ("lambda", "mu", "alpha", "beta"):
        raise InvalidParams(f"cannot sweep {name!r}")
    if not values:
        raise InvalidParams("empty sweep")
    return name, values


_FIELD = {"lambda": "lam", "mu": "mu", "alpha": "alpha", "beta": "beta"}


def cmd_phase(cfg: Config, args) -> int:
    if not args.sweep:
        rep = critical.R_and_verdict(cfg.params, cfg.dist, margin=args.margin)
        sol, norm = _rho_solution(cfg.params, cfg.dist, args)
        doc = {"schema": SCHEMA, "command": "phase", "config": cfg.to_dict(),
               **rep.to_dict(), "rho_kappa": sol.rho_kappa, "norm_estimate": norm.value}
        if args.simulate:
            snaps = simulate_replicas(cfg.params, cfg.dist, cfg.stop, cfg.seed,
                                      cfg.replicas, cfg.workers, max_restarts=cfg.max_restarts)
            doc["measured_fraction"] = float(np.mean(
                [graphstats.largest_component(s).fraction for s in snaps]))
        _emit(dumps(doc), cfg, "phase.json")
        return EXIT_OK
    name, values = _sweep_values(args.sweep)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["param", "value", "R", "verdict", "rho_kappa"]
    if args.simulate:
        header.append("measured_fraction")
    w.writerow(header)
    for cell, v in enumerate(values):
        p = cfg.params.with_(**{_FIELD[name]: v})
        rep = critical.R_and_verdict(p, cfg.dist, margin=args.margin)
        sol, _ = _rho_solution(p, cfg.dist, args)
        row = [name, repr(float(v)), repr(rep.R), rep.verdict.value, repr(sol.rho_kappa)]
        if args.simulate:
            snaps = simulate_replicas(p, cfg.dist, cfg.stop, cfg.seed, cfg.replicas,
                                      cfg.workers, first_stream=cell * cfg.replicas, max_restarts=cfg.max_restarts)
            row.append(repr(float(np.mean(
                [graphstats.largest_component(s).fraction for s in snaps]))))
        w.writerow(row)
    _emit(buf.getvalue(), cfg, "phase_sweep.csv")
    return EXIT_OK


def cmd_sweep(cfg: Config, args) -> int:
    name, values = _sweep_values(args.param)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "value", "theory_mean_degree", "mean_degree", "R",
                "largest_fraction", "assortativity", "assortativity_stderr"])
    for cell, v in enumerate(values):
        p = cfg.params.with_(**{_FIELD[name]: v})
        snaps = simulate_replicas(p, cfg.dist, cfg.stop, cfg.seed, cfg.replicas,
                                  cfg.workers, first_stream=cell * cfg.replicas, max_restarts=cfg.max_restarts)
        st = snapshot_stats(snaps, p.lam)
        theory_mean = (analytic.degree_mean_var(p, cfg.dist)[0] if p.gamma > 0
                       else float("nan"))
        R = critical.R_and_verdict(p, cfg.dist).R if p.gamma > 0 else float("nan")
        a = st["assortativity"]
        w.writerow([name, repr(float(v)), repr(theory_mean), repr(st["mean_degree"]),
                    repr(R), repr(st["components"]["mean_largest_fraction"]),
                    "" if a["r"] is None else repr(a["r"]),
                    "" if a["stderr"] is None else repr(a["stderr"])])
    _emit(buf.getvalue(), cfg, "sweep.csv")
    return EXIT_OK


def _z(theory, estimate, stderr):
    if theory is None or estimate is None or not stderr:
        return None
    return (estimate - theory) / stderr


def cmd_compare(cfg: Config, args) -> int:
    p, dist = cfg.params, cfg.dist
    snaps = simulate_replicas(p, dist, cfg.stop, cfg.seed, cfg.replicas, cfg.workers, max_restarts=cfg.max_restarts)
    st = snapshot_stats(snaps, p.lam)
    mean, var = analytic.degree_mean_var(p, dist)
    rows = []

    rows.append({"quantity": "mean_degree", "theory": mean, "estimate": st["mean_degree"],
                 "stderr": st["mean_degree_stderr"], "stderr_method": "node sample"})

    try:
        rho = analytic.degree_correlation(p, dist).rho
    except InfiniteMoment:
        rho = None
    a = st["assortativity"]
    if rho is not None and a["r"] is not None:
        rows.append({"quantity": "degree_correlation", "theory": rho, "estimate": a["r"],
                     "stderr": a["stderr"], "stderr_method": "edge jackknife"})

    sol, _ = _rho_solution(p, dist, args)
    fracs = np.array(st["components"]["largest_fraction"])
    if fracs.size > 1:
        se, method = float(fracs.std(ddof=1) / math.sqrt(fracs.size)), "across replicas"
    else:
        f = float(fracs[0])
        se = math.sqrt(max(f * (1 - f), 1.0 / st["n_nodes"]) / st["n_nodes"])
        method = "binomial"
    rows.append({"quantity": "largest_fraction", "theory": sol.rho_kappa,
                 "estimate": float(fracs.mean()), "stderr": se, "stderr_method": method})
    for r in rows:
        r["z"] = _z(r["theory"], r["estimate"], r["stderr"])
    doc = {"schema": SCHEMA, "command": "compare", "config": cfg.to_dict(),
           "comparisons": rows,
           "max_abs_z": max((abs(r["z"]) for r in rows if r["z"] is not None), default=None)}
    _emit(dumps(doc), cfg, "compare.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lambda", type=float, help="node birth rate")
    p.add_argument("--mu", type=float, help="node death rate")
    p.add_argument("--alpha", type=float, help="edge creation multiplier")
    p.add_argument("--beta", type=float, help="edge deletion rate")
    p.add_argument("--version", choices=["U", "P"], help="neighbour choice rule")
    p.add_argument("--s", help="social index law, e.g. const:1, two:1,2,0.5, exp:1")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for output files")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--max-restarts", dest="max_restarts", type=int,
                   help="restarts allowed after early extinction")
    stop = p.add_mutually_exclusive_group()
    stop.add_argument("--stop-n", dest="stop_n", type=int, help="stop at this population")
    stop.add_argument("--stop-t", dest="stop_t", type=float, help="stop at this time")


def _grid_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-age", type=int, default=200)
    p.add_argument("--grid-index", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100_000,
                   help="iteration cap for the survival fixed point")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate snapshots and report statistics")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="analytic degree and correlation quantities")
    _common(p)
    p.add_argument("--kmax", type=int, default=None, help="last k of the pmf table")
    p.add_argument("--tables", help="directory for plot-ready CSV tables")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("phase", help="giant-component criterion")
    _common(p)
    _grid_opts(p)
    p.add_argument("--margin", type=float, default=0.02)
    p.add_argument("--sweep", help="name:start:stop:count or name=v1,v2,...")
    p.add_argument("--simulate", action="store_true",
                   help="also measure the largest component by simulation")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("rho", help="survival fixed point of the kernel")
    _common(p)
    _grid_opts(p)
    p.add_argument("--f-csv", dest="f_csv", help="write the solution on the grid")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("sweep", help="simulation grid over one parameter")
    _common(p)
    p.add_argument("--param", required=True, help="name:start:stop:count or name=v1,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="theory against simulation with z-scores")
    _common(p)
    _grid_opts(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _error(kind: str, exc: Exception, code: int) -> int:
    sys.stdout.write(dumps({"schema": SCHEMA, "error": {"type": kind,
                                                        "class": type(exc).__name__,
                                                        "message": str(exc)},
                            "exit_code": code}))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = Config(args)
    except (InvalidParams, ValueError, KeyError, TypeError) as exc:
        return _error("invalid_config", exc, EXIT_CONFIG)
    try:
        return args.func(cfg, args)
    except TooManyRestarts as exc:
        return _error("too_many_restarts", exc, EXIT_RESTARTS)
    except (NonConvergence, bjr.MaxIterations, critical.RootNotFound) as exc:
        return _error("non_convergence", exc, EXIT_NUMERIC)
    except (InvalidParams, InfiniteMoment) as exc:
        return _error("invalid_config", exc, EXIT_CONFIG)
    except DynNetError as exc:
        return _error("error", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
