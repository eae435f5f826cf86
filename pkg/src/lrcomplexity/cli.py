"""Command-line front end.

Every command writes its outputs and a ``manifest_<command>.json`` into ``--outdir``.
``lrcomplexity replay manifest.json`` reruns a command from its manifest.

Exit codes: 0 success, 1 numerical failure, 2 bad arguments or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import complexity_closed_form
from .core import (EmpiricalInputDistribution, all_configurations, empirical_distribution,
                   read_design_csv, write_design_csv)
from .degenerate import complexity_curves, delta_rank_table, enumerate_key_models, read_keys_csv
from .figures import ising_beta_sweep, localisation_sweep, uniform_sweep
from .montecarlo import default_threads
from .selection import SEARCHES, estimate_complexity, select
from .simulation import (CONVENTIONS, ExperimentConfig, IsingInputConfig, Task, fmt,
                         ising_distribution, realization_data, run_experiment, write_results)


class UsageError(Exception):
    """Bad arguments or unreadable input (exit code 2)."""


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    return p


def _need_seed(args, why: str):
    if args.seed is None:
        raise UsageError(f"--seed is required {why}")


def _write_csv(path: Path, rows: list, columns=None):
    columns = columns or list(rows[0].keys())
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _estimate_json(est) -> dict:
    d = est.to_dict()
    if not math.isfinite(d["log_value"]):
        d["log_value"] = None
    return d


# -- complexity -----------------------------------------------------------------------------

def _complexity_dist(args) -> EmpiricalInputDistribution:
    chosen = [bool(args.input), args.uniform, args.ising is not None, args.nu is not None]
    if sum(chosen) > 1:
        raise UsageError("choose one of --input, --uniform, --ising, --nu")
    if args.input:
        design, _ = read_design_csv(_existing(args.input))
        return empirical_distribution(design)
    if args.n is None:
        raise UsageError("--n is required for synthetic distributions")
    if args.ising is not None:
        return ising_distribution(IsingInputConfig(args.n, args.ising, convention=args.convention))
    if args.nu is not None:
        nu = np.asarray(args.nu, dtype=float)
        if nu.shape != (2 ** args.n,):
            raise UsageError(f"--nu needs 2^n = {2 ** args.n} frequencies, got {nu.size}")
        keep = nu > 0
        return EmpiricalInputDistribution(all_configurations(args.n)[keep], nu[keep] / nu.sum())
    return EmpiricalInputDistribution.uniform(args.n)


def cmd_complexity(args, outdir: Path) -> list:
    outputs = []
    sweeps = args.figure1 or args.figure2a or args.figure2b
    if sweeps:
        _need_seed(args, "for the figure sweeps")
    if args.figure1:
        rows = []
        for n in args.n_values or [2, 3, 4]:
            rows += localisation_sweep(n, args.paths, args.samples, args.batches, args.seed, args.threads)
        outputs.append(outdir / "figure1_localisation.csv")
        _write_csv(outputs[-1], rows)
    if args.figure2a:
        rows = uniform_sweep(args.n_values or list(range(1, 7)), args.samples, args.batches,
                             args.seed, args.threads)
        outputs.append(outdir / "figure2a_uniform.csv")
        _write_csv(outputs[-1], rows)
    if args.figure2b:
        rows = ising_beta_sweep(args.n or 4, args.beta_values or [0.0, 0.5, 1.0, 1.5, 2.0, 3.0],
                                args.samples, args.batches, args.seed, args.threads, args.convention)
        outputs.append(outdir / "figure2b_ising.csv")
        _write_csv(outputs[-1], rows)
    if sweeps:
        return outputs
    dist = _complexity_dist(args)
    method = "closed_form" if args.closed_form else args.method
    if method == "monte_carlo" or (method == "auto" and complexity_closed_form(dist) is None and dist.n > 3):
        _need_seed(args, "for Monte Carlo estimates")
    est = estimate_complexity(dist, method, args.seed or 0, args.samples, args.batches, args.threads)
    out = _estimate_json(est)
    print(json.dumps(out, sort_keys=True))
    outputs.append(outdir / "complexity.json")
    _write_json(outputs[-1], out)
    return outputs


# -- select ----------------------------------------------------------------------------------

def cmd_select(args, outdir: Path) -> list:
    _need_seed(args, "for model selection")
    design, y = read_design_csv(_existing(args.data), args.output_column)
    if y is None:
        raise UsageError(f"{args.data}: no output column {args.output_column!r}")
    reports = select(design, y, args.criterion, args.search, has_bias=args.bias, seed=args.seed,
                     max_N=args.max_n)
    names = list(design.names) if design.names else [str(i) for i in range(design.N)]
    out = {"T": design.T, "N": design.N, "inputs": names, "search": args.search,
           "criteria": {c: r.to_dict() for c, r in reports.items()}}
    print(json.dumps({c: r.to_dict()["chosen"] for c, r in reports.items()}, sort_keys=True))
    path = outdir / "select.json"
    _write_json(path, out)
    return [path]


# -- simulate --------------------------------------------------------------------------------

def _read_config_file(path: Path) -> dict:
    """key = value lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v.strip("\"'")
    return out


def _experiment_config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        raw = _read_config_file(_existing(args.config))
        parse = {"N": int, "realizations": int, "seed": int, "burn_in": int, "thinning": int,
                 "k_values": _ints, "beta_values": _floats, "sparsity_values": _floats,
                 "criteria": lambda s: [t.strip() for t in s.split(",")], "search": str,
                 "convention": str}
        for k, v in raw.items():
            if k not in parse:
                raise UsageError(f"{args.config}: unknown key {k!r}")
            base[k] = parse[k](v)
    if args.figure3:
        base.setdefault("N", 20)
        base.setdefault("realizations", 20)
    flags = {"N": args.N, "k_values": args.k, "beta_values": args.beta,
             "sparsity_values": args.sparsity, "realizations": args.realizations,
             "criteria": args.criteria, "search": args.search, "seed": args.seed,
             "convention": args.convention, "burn_in": args.burn_in, "thinning": args.thinning}
    base.update({k: v for k, v in flags.items() if v is not None})
    if "seed" not in base:
        raise UsageError("--seed is required for simulate (flag or config file)")
    return ExperimentConfig(**base)


def cmd_simulate(args, outdir: Path) -> list:
    cfg = _experiment_config(args)
    args.resolved = cfg.to_dict()
    result = run_experiment(cfg, workers=args.threads)
    outputs = list(write_results(result, outdir))
    if args.save_data:
        data_dir = outdir / "data"
        data_dir.mkdir(exist_ok=True)
        for ib, ik, js in itertools.product(range(len(cfg.beta_values)), range(len(cfg.k_values)),
                                            range(len(cfg.sparsity_values))):
            X, y, _, _ = realization_data(cfg, Task(ib, ik, js, 0))
            path = data_dir / f"beta{ib}_k{ik}_s{js}.csv"
            write_design_csv(path, X, y)
            outputs.append(path)
    return outputs


# -- degenerate and keys ------------------------------------------------------------------------

def cmd_degenerate(args, outdir: Path) -> list:
    n_values = args.n_values or list(range(1, args.n_max + 1))
    rows = complexity_curves(n_values, args.b)
    path = outdir / "degenerate_curves.csv"
    _write_csv(path, rows)
    return [path]


def example_keys_path() -> Path:
    return Path(str(resources.files("lrcomplexity") / "data" / "example_keys.csv"))


def cmd_keys(args, outdir: Path) -> list:
    path = example_keys_path() if args.data == "example" else _existing(args.data)
    data = read_keys_csv(path)
    rows = enumerate_key_models(data, args.b, threads=args.threads)
    table = rows if args.top is None else rows[:args.top]
    post = outdir / "keys_posterior.csv"
    with post.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "keys", "n_keys", "loglik", "theta", "complexity", "log_complexity",
                    "score", "exact_fit"])
        for i, r in enumerate(table, start=1):
            w.writerow([i, ";".join(data.names[j] for j in r.subset), len(r.subset), fmt(r.loglik),
                        fmt(r.theta), fmt(r.complexity), fmt(r.log_complexity), fmt(r.score),
                        int(r.exact_fit)])
    ordered, dr = delta_rank_table(rows, data.T)
    per_model = outdir / "keys_delta_rank.csv"
    with per_model.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "keys", "loglik_term", "log_complexity", "delta_rank"])
        for i, (r, d) in enumerate(zip(ordered, dr)):
            w.writerow([i, ";".join(data.names[j] for j in r.subset), fmt(data.T * r.loglik),
                        fmt(r.log_complexity), int(d)])
    hist = outdir / "keys_delta_rank_hist.csv"
    values, counts = np.unique(dr, return_counts=True)
    with hist.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_rank", "count"])
        for v, c in zip(values, counts):
            w.writerow([int(v), int(c)])
    summary = {"models": len(rows), "exact_fit": sum(r.exact_fit for r in rows),
               "mean_delta_rank": float(np.mean(dr)) if len(dr) else None,
               "best": [data.names[j] for j in rows[0].subset]}
    print(json.dumps(summary, sort_keys=True))
    return [post, per_model, hist]


# -- parser ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrcomplexity", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeded=True):
        sp.add_argument("--outdir", default=".", help="directory for outputs and the manifest")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker count (default: $LRCOMPLEXITY_THREADS or 1)")
        if seeded:
            sp.add_argument("--seed", type=int, default=None)

    c = sub.add_parser("complexity", help="estimate e^C for an input distribution")
    common(c)
    c.add_argument("--input", help="design CSV; the empirical distribution of its input columns is used")
    c.add_argument("--uniform", action="store_true", help="all 2^n configurations equally likely")
    c.add_argument("--ising", type=float, metavar="BETA", help="exact Ising distribution at this beta")
    c.add_argument("--nu", type=_floats, help="2^n frequencies in configuration order")
    c.add_argument("--n", type=int)
    c.add_argument("--convention", choices=CONVENTIONS, default="printed")
    c.add_argument("--method", choices=("auto", "closed_form", "quadrature", "monte_carlo"), default="auto")
    c.add_argument("--closed-form", action="store_true", help="shorthand for --method closed_form")
    c.add_argument("--samples", type=int, default=100_000)
    c.add_argument("--batches", type=int, default=20)
    c.add_argument("--figure1", action="store_true", help="random localisation paths to CSV")
    c.add_argument("--figure2a", action="store_true", help="uniform inputs versus n to CSV")
    c.add_argument("--figure2b", action="store_true", help="Ising inputs versus beta to CSV")
    c.add_argument("--paths", type=int, default=10)
    c.add_argument("--n-values", type=_ints)
    c.add_argument("--beta-values", type=_floats)

    s = sub.add_parser("select", help="rank input subsets of a design CSV")
    common(s)
    s.add_argument("data")
    s.add_argument("--criterion", default="all",
                   choices=("heuristic", "bic", "aic", "exact", "l1", "all"))
    s.add_argument("--search", default="decimation", choices=SEARCHES)
    s.add_argument("--bias", action="store_true", help="include a bias in every candidate")
    s.add_argument("--max-n", type=int, default=15, help="input limit for exhaustive search")
    s.add_argument("--output-column", default="y")

    m = sub.add_parser("simulate", help="reconstruction-error sweep on synthetic data")
    common(m)
    m.add_argument("--config", help="key = value file; flags override it")
    m.add_argument("--figure3", action="store_true", help="desk-scale sweep with N=20, 20 realizations")
    m.add_argument("--N", type=int)
    m.add_argument("--k", type=_ints, help="T = k N, comma-separated")
    m.add_argument("--beta", type=_floats)
    m.add_argument("--sparsity", type=_floats)
    m.add_argument("--realizations", type=int)
    m.add_argument("--criteria", type=lambda t: [x.strip() for x in t.split(",")])
    m.add_argument("--search", choices=SEARCHES)
    m.add_argument("--convention", choices=CONVENTIONS)
    m.add_argument("--burn-in", type=int)
    m.add_argument("--thinning", type=int)
    m.add_argument("--save-data", action="store_true",
                   help="also write realization 0 of every cell as a design CSV under data/")

    d = sub.add_parser("degenerate", help="tied-weight complexity and bounds versus n")
    common(d, seeded=False)
    d.add_argument("--n-max", type=int, default=100)
    d.add_argument("--n-values", type=_ints)
    d.add_argument("--b", type=float, default=0.0)

    k = sub.add_parser("keys", help="posterior table over all subsets of binary keys")
    common(k, seeded=False)
    k.add_argument("data", help="keys CSV, or 'example' for the bundled synthetic table")
    k.add_argument("--b", type=float, default=None, help="threshold (default K - 11)")
    k.add_argument("--top", type=int, default=None)

    r = sub.add_parser("replay", help="rerun a command from its manifest")
    r.add_argument("manifest")
    r.add_argument("--outdir", default=None, help="write outputs here instead")
    return p


COMMANDS = {"complexity": cmd_complexity, "select": cmd_select, "simulate": cmd_simulate,
            "degenerate": cmd_degenerate, "keys": cmd_keys}


def _replay_argv(args) -> list:
    manifest = json.loads(_existing(args.manifest).read_text())
    argv = list(manifest["argv"])
    if args.outdir is not None:
        argv = _set_outdir(argv, args.outdir)
    return argv


def _set_outdir(argv: list, outdir: str) -> list:
    out = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--outdir":
            skip = True
            continue
        if a.startswith("--outdir="):
            continue
        out.append(a)
    return out[:1] + ["--outdir", outdir] + out[1:]


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            return run(_replay_argv(args))
        except (UsageError, KeyError, json.JSONDecodeError) as exc:
            print(f"error: cannot replay {args.manifest}: {exc}", file=sys.stderr)
            return 2
    if args.threads is None:
        args.threads = default_threads()
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    outdir = Path(args.outdir)
    start = datetime.now(timezone.utc).isoformat()
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](args, outdir)
    except (UsageError, argparse.ArgumentTypeError, FileNotFoundError, IsADirectoryError, PermissionError,
            ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    config = {k: v for k, v in vars(args).items() if k not in ("resolved",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": getattr(args, "resolved", None) or config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "start": start,
        "end": datetime.now(timezone.utc).isoformat(),
        "outputs": [str(p) for p in outputs],
    }
    _write_json(outdir / f"manifest_{args.command}.json", manifest)
    return 0


def main(argv=None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else list(argv)))


if __name__ == "__main__":
    main()
