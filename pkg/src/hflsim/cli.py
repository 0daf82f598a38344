"""Command-line entry point.

    hflsim run      --config scenario.json --out DIR
    hflsim weights  --root IMAGE_TREE [--epsilon E] [--policy fedgau|proportional]
    hflsim distance --a IMG_OR_SUMMARY --b IMG_OR_SUMMARY
    hflsim schedule --params params.json
    hflsim metrics  --cm grid.txt

Exit codes: 0 success, 1 domain error, 2 usage error. The number of worker
threads for vehicle updates is read from ``HFLSIM_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .config import parse_config
from .divergence import divergence
from .errors import ConfigError, HflError
from .evalkit import load_confusion_text, metrics
from .experiment import run_scenario, write_outputs
from .gaussian_stats import GaussianSummary, dataset_summary, estimate_image_summary, load_ppm
from .scheduler import DivergenceEstimates, check_stability, scan_plans
from .topology import Edge, Topology
from .weights import PolicyConfig, hierarchy_weights

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm")


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise HflError(f"cannot read {path}: {exc.strerror}") from None


def _load_image(path: str):
    try:
        return load_ppm(_read_bytes(path))
    except HflError as exc:
        raise HflError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = args.out or cfg.output_dir
    if not out:
        raise ConfigError("output_dir: no --out given and the config sets no output_dir")
    result = run_scenario(cfg)
    paths = write_outputs(result, out)
    _print_json({
        "rounds": len(result.reports),
        "final_eval_loss": result.final_loss,
        "cumulative_exchanges": result.cumulative_exchanges,
        "outputs": paths,
    })
    return EXIT_OK


def _image_files(d: str) -> list[str]:
    return sorted(os.path.join(d, f) for f in os.listdir(d)
                  if f.lower().endswith(IMAGE_SUFFIXES) and os.path.isfile(os.path.join(d, f)))


def _subdirs(d: str) -> list[str]:
    return sorted(f for f in os.listdir(d) if os.path.isdir(os.path.join(d, f)))


def tree_summaries(root: str) -> tuple[Topology, dict]:
    """root/<edge>/<vehicle>/*.ppm -> topology and per-vehicle summaries."""
    if not os.path.isdir(root):
        raise HflError(f"{root}: not a directory")
    edges = []
    summaries = {}
    for e in _subdirs(root):
        vehicles = []
        for v in _subdirs(os.path.join(root, e)):
            files = _image_files(os.path.join(root, e, v))
            if not files:
                raise HflError(f"{os.path.join(root, e, v)}: no PPM/PGM images")
            vid = f"{e}/{v}"
            summaries[vid] = dataset_summary(_load_image(p) for p in files)
            vehicles.append(vid)
        if not vehicles:
            raise HflError(f"{os.path.join(root, e)}: no vehicle directories")
        edges.append(Edge(e, tuple(vehicles)))
    if not edges:
        raise HflError(f"{root}: no edge directories")
    return Topology(tuple(edges)), summaries


def cmd_weights(args) -> int:
    topo, summaries = tree_summaries(args.root)
    cfg = PolicyConfig(args.policy, args.epsilon)
    hw = hierarchy_weights(topo, summaries, cfg)
    prop = hierarchy_weights(topo, summaries, PolicyConfig("proportional", args.epsilon))
    out = {"policy": cfg.kind, "epsilon": cfg.epsilon, "cloud": hw.cloud_summary.to_dict(), "edges": []}
    for e in topo.edges:
        out["edges"].append({
            "id": e.id, "weight": hw.edge[e.id], "proportional": prop.edge[e.id],
            "summary": hw.edge_summaries[e.id].to_dict(),
            "vehicles": [{"id": v, "weight": hw.vehicle[v], "proportional": prop.vehicle[v],
                          "summary": summaries[v].to_dict()} for v in e.vehicles],
        })
    _print_json(out)
    return EXIT_OK


def _load_summary(path: str) -> GaussianSummary:
    raw = _read_bytes(path)
    if raw[:2] in (b"P5", b"P6"):
        return estimate_image_summary(_load_image(path))
    try:
        return GaussianSummary.from_dict(json.loads(raw))
    except (json.JSONDecodeError, UnicodeDecodeError, TypeError, AttributeError):
        raise HflError(f"{path}: neither a P5/P6 image nor a JSON summary {{n, mean, var}}") from None


def cmd_distance(args) -> int:
    a, b = _load_summary(args.a), _load_summary(args.b)
    d = divergence(a, b)
    _print_json({"a": a.to_dict(), "b": b.to_dict(),
                 "coefficient": d.coefficient, "distance": d.distance})
    return EXIT_OK


def _params_estimates(p: dict) -> tuple[int, float, DivergenceEstimates, dict]:
    try:
        budget = int(p.get("iteration_budget", p.get("I")))
        eta = float(p["eta"])
        edges = p["edges"]
        per_edge = {}
        weights = {}
        for i, e in enumerate(edges):
            eid = str(e.get("id", f"edge{i}"))
            per_edge[eid] = (float(e.get("rho", 0.0)), float(e["beta"]), float(e["theta"]))
            weights[eid] = float(e["weight"])
        est = DivergenceEstimates(rho=float(p["rho"]), beta=float(p["beta"]), theta=float(p["theta"]),
                                  per_edge=per_edge, C=float(p["C"]), eta=eta)
        vartheta = float(p["vartheta"])
    except KeyError as exc:
        raise ConfigError(f"params: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None
    return budget, vartheta, est, weights


def cmd_schedule(args) -> int:
    try:
        params = json.loads(_read_bytes(args.params))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.params}: invalid JSON: {exc}") from None
    budget, vartheta, est, weights = _params_estimates(params)
    check_stability(est.eta, est.beta)
    decision = scan_plans(budget, vartheta, est, weights)
    _print_json({
        "tau1": decision.plan.tau1, "tau2": decision.plan.tau2,
        "iteration_budget": budget, "vartheta": vartheta,
        "objective": decision.objective, "fallback": decision.fallback,
        "feasible": [{"tau1": t1, "tau2": t2, "objective": obj} for t1, t2, obj in decision.table],
    })
    return EXIT_OK


def cmd_metrics(args) -> int:
    text = _read_bytes(args.cm).decode("utf-8", errors="replace")
    _print_json(metrics(load_confusion_text(text)).to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hflsim", description="Hierarchical FL simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write round reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("weights", help="aggregation weights for an image tree root/edge/vehicle/*.ppm")
    p.add_argument("--root", required=True)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--policy", choices=("fedgau", "proportional"), default="fedgau")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("distance", help="Bhattacharyya distance between two images or summaries")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("schedule", help="pick (tau1, tau2) for given estimates")
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("metrics", help="segmentation metrics of a confusion-matrix grid")
    p.add_argument("--cm", required=True)
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except HflError as exc:
        print(f"hflsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"hflsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
