"""Command-line front end: ``graphon-nas <command> ...``.

Every command writes its outputs plus a ``<output>.manifest.json`` sidecar
holding the command line, parameters, seed, version and sha256 digests of
inputs and outputs. ``replay`` reruns a manifest and checks the digests.

Exit codes: 0 success, 2 invalid input, 3 infeasible request, 4 divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cutdist import (DBOX_EXACT_LIMIT, DELTA_HAT_EXACT_LIMIT, d_box_exact, d_box_heuristic,
                      delta_hat, delta_ub_optimize)
from .graphs import (DagGraph, StepGraphon, WeightedGraph, dag_to_weighted, load_graph,
                     save_graph, validate)
from .random_models import BaParams, ErParams, WsParams, ba_sample, er_graphon, ws_graphon
from .sampler import concentration_experiment, sample_simple
from .scaling import ScalePlan, blowup_k, fractional_blowup, interpolate_1d
from .search import (SearchConfig, SearchDiverged, ToyTask, graphon_as_dag_graph,
                     train_search)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4


class Infeasible(Exception):
    """A well-formed request that cannot be carried out."""


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_manifests(args, argv, inputs, outputs):
    params = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {"command": args.command, "argv": list(argv), "params": params,
           "seed": args.seed, "version": __version__,
           "inputs": {str(p): sha256(p) for p in inputs},
           "outputs": {str(p): sha256(p) for p in outputs}}
    for p in outputs:
        write_json(str(p) + ".manifest.json", doc)


def load_weighted(path):
    g = load_graph(path)
    if isinstance(g, StepGraphon):
        return g.to_weighted()
    if isinstance(g, DagGraph):
        return dag_to_weighted(g)
    if isinstance(g, WeightedGraph):
        report = validate(g)
        if not report.ok:
            raise ValueError(f"{path}: {report}")
        return g
    raise ValueError(f"{path}: expected a weighted graph or DAG")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "L"):
        return _jsonable(x.L)
    return x


# -- commands ----------------------------------------------------------------

def cmd_gen(args):
    if args.model == "er":
        g = er_graphon(ErParams(args.p), args.n)
    elif args.model == "ws":
        g = ws_graphon(WsParams(args.kappa, args.p), args.n)
    else:
        g = ba_sample(BaParams(m0=args.m0, m=args.m, n=args.n), args.seed)
    save_graph(g, args.out)
    return [], [args.out]


def cmd_scale(args):
    g = load_weighted(args.input)
    n, N = g.n, args.N
    if N < n:
        raise Infeasible(f"target N={N} is smaller than the input size n={n}")
    plan = ScalePlan.for_graph(g, N)
    if args.method == "blowup":
        if plan.m:
            raise Infeasible(f"N={N} is not a multiple of n={n}; use --method fractional")
        out = blowup_k(g, plan.k)
    elif args.method == "interpolate":
        if plan.m:
            raise Infeasible(f"interpolation needs an integer factor, but N/n = {N}/{n}")
        if not g.is_upper_triangular():
            raise Infeasible("interpolation needs an upper-triangular (DAG-oriented) graph")
        out = interpolate_1d(g, plan.k)
    else:
        out, plan = fractional_blowup(g, N)
    plan_path = args.plan or str(Path(args.out).with_suffix(".plan.json"))
    save_graph(out, args.out)
    write_json(plan_path, {"method": args.method, **plan.to_dict()})
    return [args.input], [args.out, plan_path]


def _report_outputs(args, report):
    outs = []
    if args.report:
        write_json(args.report, report.to_dict())
        outs.append(args.report)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
        outs.append(args.csv)
    return outs


def cmd_sample(args):
    g = load_weighted(args.input)
    if args.N is not None:
        if args.N < g.n:
            raise Infeasible(f"target N={args.N} is smaller than the input size n={g.n}")
        g, _ = fractional_blowup(g, args.N)
    save_graph(sample_simple(g, args.seed, "trial", 0), args.out)
    outs = [args.out]
    if args.trials > 1 or args.csv or args.report:
        report = concentration_experiment(g, args.trials, args.seed, restarts=args.restarts,
                                          threads=args.threads)
        outs += _report_outputs(args, report)
    return [args.input], outs


def cmd_concentration(args):
    g = load_weighted(args.input)
    report = concentration_experiment(g, args.trials, args.seed, limit=args.limit,
                                      restarts=args.restarts, threads=args.threads)
    args.report = args.report or args.out
    return [args.input], _report_outputs(args, report)


def cmd_distance(args):
    g, g2 = load_weighted(args.first), load_weighted(args.second)
    mode = args.mode
    if mode in ("dbox-exact", "dbox-heuristic", "delta-hat") and g.n != g2.n:
        raise Infeasible(f"{mode} needs equal node counts, got {g.n} and {g2.n}")
    if mode == "dbox-exact":
        if g.n > args.limit:
            raise Infeasible(f"n={g.n} exceeds the exact limit {args.limit}; "
                             "use --mode dbox-heuristic")
        res = d_box_exact(g, g2, limit=args.limit)
    elif mode == "dbox-heuristic":
        res = d_box_heuristic(g, g2, restarts=args.restarts, seed=args.seed)
    elif mode == "delta-hat":
        exact = g.n <= DELTA_HAT_EXACT_LIMIT
        res = delta_hat(g, g2, mode="exact" if exact else "heuristic", seed=args.seed)
    else:
        res = delta_ub_optimize(g, g2, iters=args.iters, seed=args.seed,
                                restarts=args.restarts)
    write_json(args.out, {"mode": mode, "value": float(res.value), "exact": bool(res.exact),
                          "witness": _jsonable(res.witness)})
    return [args.first, args.second], [args.out]


def cmd_search(args):
    task = ToyTask.from_dict(json.loads(Path(args.task).read_text()))
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    config = SearchConfig.from_dict(cfg)
    trace, dag = train_search(task, config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "trace.json", out / "graphon.json", out / "dag.json", out / "history.csv"]
    write_json(paths[0], trace.to_dict())
    save_graph(graphon_as_dag_graph(trace.average), paths[1])
    save_graph(dag, paths[2])
    write_csv(paths[3], ["epoch", "loss", "val_accuracy", "tau"],
              [[h["epoch"], repr(h["loss"]), repr(h["val_accuracy"]), repr(h["tau"])]
               for h in trace.history])
    inputs = [args.task] + ([args.config] if args.config else [])
    return inputs, [str(p) for p in paths]


def cmd_replay(args):
    doc = json.loads(Path(args.manifest).read_text())
    code = main(doc["argv"])
    if code != EXIT_OK:
        return code
    stale = [p for p, digest in doc["outputs"].items() if sha256(p) != digest]
    if stale:
        print("replay mismatch: " + ", ".join(stale), file=sys.stderr)
        return EXIT_INVALID
    print("replay reproduced all outputs")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="graphon-nas", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument("--threads", type=int, default=1, help="worker bound for trials")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an ER/WS step graphon or a BA sample")
    p.add_argument("model", choices=["er", "ws", "ba"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.4)
    p.add_argument("--m0", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("scale", help="grow a graph to N nodes")
    p.add_argument("input")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--method", choices=["blowup", "fractional", "interpolate"],
                   default="fractional")
    p.add_argument("--out", required=True)
    p.add_argument("--plan", help="plan JSON path (default: <out>.plan.json)")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("sample", help="draw a 0/1 graph, optionally after scaling to N")
    p.add_argument("input")
    p.add_argument("--N", type=int)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="SampleReport JSON path")
    p.add_argument("--csv", help="per-trial CSV path (trial, distance, threshold)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("concentration", help="distance from a graph to its samples")
    p.add_argument("input")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--limit", type=int, default=DBOX_EXACT_LIMIT)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--out", required=True, help="SampleReport JSON path")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_concentration, report=None)

    p = sub.add_parser("distance", help="cut distances between two graph files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--mode", choices=["dbox-exact", "dbox-heuristic", "delta-hat", "delta-ub"],
                   default="dbox-exact")
    p.add_argument("--limit", type=int, default=DBOX_EXACT_LIMIT)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("search", help="search input subsets on a toy task")
    p.add_argument("--task", required=True, help="task JSON")
    p.add_argument("--config", help="search config JSON")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("replay", help="rerun a manifest and compare output digests")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return args.func(args)
        inputs, outputs = args.func(args)
    except Infeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SearchDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, KeyError, TypeError, json.JSONDecodeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    write_manifests(args, argv, inputs, outputs)
    for p in outputs:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
