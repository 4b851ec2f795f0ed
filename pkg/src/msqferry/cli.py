"""msqferry command line: generate -> plan -> route -> optimize -> simulate, or all at once.

Exit codes: 0 ok, 2 validation or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cycles import CyclePlan, assign_cycles, plan_from_dict, plan_to_dict
from .errors import ConfigError, GeometryError, MSQError
from .geometry import (BUILTIN_REGIONS, Network, generate, init_triangulation, network_from_dict,
                       network_to_dict, subdivide_face, triangle_strip, validate)
from .population import read_raster
from .queueing import (delivery_cost, demands_to_dict, gravity_demands, initial_rates, optimize_rates,
                       parse_demands, plan_flows)
from .routing import DamageSet, route
from .seeding import derive_seed
from .sim import ScriptEvent, SimConfig, run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SCENARIO_DIR = Path(__file__).parent / "scenarios"


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage, self.cause = stage, exc


# -- small io helpers -------------------------------------------------------------
def dump_json(doc, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def canonical_hash(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, subcommand: str, inputs: dict, seed, config: dict) -> Path:
    listed = {k: {"path": str(v), "sha256": file_digest(v)} for k, v in sorted(inputs.items())
              if v is not None and Path(v).is_file()}
    return dump_json({"subcommand": subcommand, "inputs": listed, "seed": seed, "out": str(out),
                      "version": __version__, "config_hash": canonical_hash(config), "config": config},
                     out / "manifest.json")


def parse_region(spec) -> list:
    """``triangle``, ``hexagon``, ``strip:N``, a JSON file of triangles, or a literal list."""
    if isinstance(spec, list):
        return spec
    spec = str(spec)
    if spec in BUILTIN_REGIONS:
        return BUILTIN_REGIONS[spec]()
    if spec.startswith("strip:"):
        try:
            return triangle_strip(int(spec.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad region {spec!r}") from None
    if Path(spec).is_file():
        doc = load_json(spec)
        return doc["triangles"] if isinstance(doc, dict) else doc
    raise ConfigError(f"unknown region {spec!r} (triangle, hexagon, strip:N or a JSON file)")


def load_network(path) -> Network:
    return network_from_dict(load_json(path))


def load_or_assign_plan(network: Network, plan_path, scheme: str) -> CyclePlan:
    if plan_path:
        return plan_from_dict(load_json(plan_path))
    return assign_cycles(network, scheme)


def resolve_rates(spec, plan: CyclePlan, network: Network, demands, weighting="rate",
                  default: float = 0.0):
    """Return (rates, solution_doc). ``spec`` is "optimize" or a {cycle: mu} mapping."""
    if spec == "optimize":
        flows, wt = plan_flows(network, plan, demands, weighting)
        sol = optimize_rates(flows, wt)
        mu0 = initial_rates(flows, wt)
        doc = sol.as_dict(flows)
        doc["initial_rates"] = {str(c): m for c, m in sorted(mu0.items())}
        doc["initial_cost"] = delivery_cost(flows, wt, mu0)
        return {c: sol.mu.get(c, default) for c in sorted(plan.cycles)}, doc
    if not isinstance(spec, dict):
        raise ConfigError("rates must be \"optimize\" or a mapping of cycle id to rate")
    try:
        rates = {int(k): float(v) for k, v in spec.items()}
    except (TypeError, ValueError):
        raise ConfigError("rate entries must be numeric") from None
    unknown = sorted(set(rates) - set(plan.cycles))
    if unknown:
        raise ConfigError(f"rates name unknown cycles {unknown}")
    rates = {c: rates.get(c, default) for c in sorted(plan.cycles)}
    return rates, {"mu": {str(c): m for c, m in rates.items()}, "source": "fixed"}


# -- scenario loading --------------------------------------------------------------
def find_scenario(ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    bundled = SCENARIO_DIR / (ref if ref.endswith(".json") else ref + ".json")
    if bundled.is_file():
        return bundled
    raise ConfigError(f"no scenario file or bundled scenario named {ref!r}")


def build_network(spec: dict, base: Path, seed: int) -> Network:
    if "path" in spec:
        return load_network(base / spec["path"])
    if "inline" in spec:
        return network_from_dict(spec["inline"])
    if "region" not in spec:
        raise ConfigError("network needs one of path, inline or region")
    pop = read_raster(base / spec["population"]) if spec.get("population") else None
    net = init_triangulation(parse_region(spec["region"]), pop)
    for fid in spec.get("subdivide", []):
        subdivide_face(net, int(fid))
    if spec.get("target"):
        generate(net, pop, int(spec["target"]), derive_seed(seed, "generate"))
    return net


def scenario_config(doc: dict, rates: dict, demands, seed: int) -> SimConfig:
    det = doc.get("detection", {})
    try:
        events = [ScriptEvent(e["type"], e["target"], e["time"]) for e in doc.get("events", [])]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed event entry: {exc}") from None
    return SimConfig(demands, rates, mode=doc.get("mode", "queue"), seed=seed,
                     horizon=float(doc.get("horizon", 1000.0)), events=events,
                     detect_F=int(det.get("F", 3)), T_mult=float(det.get("T_mult", 3.0)),
                     ferries_per_cycle=int(doc.get("ferries_per_cycle", 1)),
                     warmup=float(doc.get("warmup", 0.0)), drain_margin=float(doc.get("drain_margin", 0.0)),
                     unified_rate=doc.get("unified_rate", "optimize"),
                     weighting=doc.get("weighting", "rate"))


def scenario_demands(doc: dict, network: Network, seed: int):
    spec = doc.get("demands", {})
    if isinstance(spec, dict) and "gravity" in spec:
        g = spec["gravity"]
        return gravity_demands(network, float(g["total_rate"]), g.get("pairs"),
                               np.random.default_rng(derive_seed(seed, "demands")))
    return parse_demands(spec)


# -- simulation output ----------------------------------------------------------------
def _simulate_one(args):
    net_doc, plan_doc, cfg_kwargs, events = args
    net, plan = network_from_dict(net_doc), plan_from_dict(plan_doc)
    cfg = SimConfig(events=[ScriptEvent(*e) for e in events], **cfg_kwargs)
    return run(net, plan, cfg)


def replicate(network: Network, plan: CyclePlan, config: SimConfig, replications: int, jobs: int):
    """Run ``replications`` independent copies; replication r uses a seed derived from (seed, r)."""
    seeds = [config.seed] if replications == 1 else \
        [derive_seed(config.seed, "replication", r) for r in range(replications)]
    base = {k: getattr(config, k) for k in config.__dataclass_fields__ if k not in ("events", "seed")}
    base["mode"] = config.mode.value
    events = [(e.type, e.target, e.time) for e in config.events]
    work = [(network_to_dict(network), plan_to_dict(plan), {**base, "seed": s}, events) for s in seeds]
    if jobs > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return seeds, list(pool.map(_simulate_one, work))
    return seeds, [_simulate_one(w) for w in work]


def write_metrics(metrics, out: Path, fmt: str, figures: bool, network=None, plan=None,
                  analytic: float | None = None) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "metrics.json"]
    (out / "metrics.json").write_text(metrics.to_json() + "\n")
    (out / "messages.csv").write_text(metrics.messages_csv())
    (out / "events.csv").write_text(metrics.events.to_csv())
    written += [out / "messages.csv", out / "events.csv"]
    if fmt == "csv":
        rows = ["pair,count,mean,p50,p90,p99"]
        for pair, st in metrics.pair_stats().items():
            rows.append(f"\"{pair}\",{st['count']},{st['mean']!r},{st['p50']!r},{st['p90']!r},{st['p99']!r}")
        (out / "pairs.csv").write_text("\n".join(rows) + "\n")
        written.append(out / "pairs.csv")
    if figures:
        from . import plotting
        if network is not None:
            written.append(plotting.plot_network(network, plan, out / "network.png"))
        written.append(plotting.plot_delays(metrics.delays(), out / "delays.png", analytic))
        written.append(plotting.plot_timeline(metrics, out / "timeline.png"))
    return written


def summarize(seeds, results) -> dict:
    means = [m.mean_delay() for m in results]
    finite = [x for x in means if x == x]
    doc = {"replications": len(results), "seeds": seeds,
           "mean_delay": {"per_replication": means,
                          "mean": float(np.mean(finite)) if finite else None,
                          "std": float(np.std(finite, ddof=1)) if len(finite) > 1 else None},
           "generated": [m.generated for m in results], "delivered": [m.delivered for m in results]}
    return doc


def emit_runs(seeds, results, out: Path, args, network, plan, analytic=None):
    if len(results) == 1:
        write_metrics(results[0], out, args.format, args.figures, network, plan, analytic)
        return results[0].as_dict()
    for r, m in enumerate(results):
        write_metrics(m, out / f"rep-{r:03d}", args.format, args.figures, network, plan, analytic)
    doc = summarize(seeds, results)
    dump_json(doc, out / "summary.json")
    return doc


# -- subcommands ----------------------------------------------------------------------
def cmd_generate(args) -> int:
    out = Path(args.out)
    pop = read_raster(args.population) if args.population else None
    net = init_triangulation(parse_region(args.region), pop)
    generate(net, pop, args.target, derive_seed(args.seed, "generate"))
    report = validate(net)
    dump_json(network_to_dict(net), out / "network.json")
    dump_json(report.as_dict(), out / "validation.json")
    write_manifest(out, "generate", {"population": args.population, "region": args.region}, args.seed,
                   {"region": args.region, "target": args.target, "population": args.population})
    if args.figures:
        from . import plotting
        plotting.plot_network(net, None, out / "network.png")
    print(f"generate: {len(net.nodes)} nodes, {len(net.edges)} edges, "
          f"{len(net.leaf_faces())} leaf faces -> {out / 'network.json'}")
    if not report.ok:
        print("validation failed: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_plan(args) -> int:
    out = Path(args.out)
    net = load_network(args.network)
    plan = assign_cycles(net, args.scheme)
    dump_json(plan_to_dict(plan), out / "plan.json")
    write_manifest(out, "plan", {"network": args.network}, args.seed, {"scheme": args.scheme})
    if args.figures:
        from . import plotting
        plotting.plot_network(net, plan, out / "plan.png")
    print(f"plan: {len(plan.cycles)} cycles ({plan.scheme.value}) -> {out / 'plan.json'}")
    return EXIT_OK


def cmd_route(args) -> int:
    out = Path(args.out)
    net = load_network(args.network)
    plan = load_or_assign_plan(net, args.plan, args.scheme)
    damage = DamageSet.from_dict(load_json(args.damage)) if args.damage else None
    rng = random.Random(derive_seed(args.seed, "route", args.source, args.terminal))
    r = route(net, plan, args.source, args.terminal, damage, rng, exhaustive=not args.local)
    doc = r.as_dict(net.distance(args.source, args.terminal))
    dump_json(doc, out / "route.json")
    if args.format == "csv":
        (out / "route.csv").write_text("hop,node,cycle,slot\n" + "".join(
            f"{i},{n},{'' if i == 0 else r.cycle_trace[i - 1][0]},{'' if i == 0 else r.cycle_trace[i - 1][1]}\n"
            for i, n in enumerate(r.nodes)))
    write_manifest(out, "route", {"network": args.network, "plan": args.plan, "damage": args.damage},
                   args.seed, {"source": args.source, "terminal": args.terminal, "scheme": args.scheme,
                               "local": args.local})
    print(f"route: {' -> '.join(map(str, r.nodes))} length {r.length:.6g}")
    return EXIT_OK


def _cli_demands(args, net):
    if args.demands:
        return parse_demands(load_json(args.demands))
    if args.gravity is not None:
        return gravity_demands(net, args.gravity, args.pairs, np.random.default_rng(derive_seed(args.seed, "demands")))
    raise ConfigError("give --demands FILE or --gravity TOTAL_RATE")


def cmd_optimize(args) -> int:
    out = Path(args.out)
    net = load_network(args.network)
    plan = load_or_assign_plan(net, args.plan, args.scheme)
    demands = _cli_demands(args, net)
    _, doc = resolve_rates("optimize", plan, net, demands, args.weighting)
    dump_json(doc, out / "solution.json")
    dump_json(demands_to_dict(demands), out / "demands.json")
    write_manifest(out, "optimize", {"network": args.network, "plan": args.plan, "demands": args.demands},
                   args.seed, {"scheme": args.scheme, "weighting": args.weighting, "gravity": args.gravity,
                               "pairs": args.pairs})
    print(f"optimize: cost {doc['cost']:.6g} (start {doc['initial_cost']:.6g}) -> {out / 'solution.json'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    net = load_network(args.network)
    plan = load_or_assign_plan(net, args.plan, args.scheme)
    demands = _cli_demands(args, net)
    spec = "optimize" if args.rates == "optimize" else load_json(args.rates)
    rates, sol = resolve_rates(spec, plan, net, demands, args.weighting, args.default_rate)
    events = load_json(args.events) if args.events else []
    doc = {"mode": args.mode, "horizon": args.horizon, "events": events, "warmup": args.warmup,
           "detection": {"F": args.F, "T_mult": args.T_mult}, "drain_margin": args.drain_margin}
    cfg = scenario_config(doc, rates, demands, args.seed)
    seeds, results = replicate(net, plan, cfg, args.replications, args.jobs)
    dump_json(sol, out / "solution.json")
    emit_runs(seeds, results, out, args, net, plan)
    write_manifest(out, "simulate", {"network": args.network, "plan": args.plan, "demands": args.demands,
                                     "rates": None if args.rates == "optimize" else args.rates,
                                     "events": args.events},
                   args.seed, {**doc, "scheme": args.scheme, "rates": args.rates, "replications": args.replications,
                               "default_rate": args.default_rate, "weighting": args.weighting})
    _report(results)
    return EXIT_OK


def run_scenario(path, out: Path, seed=None, scheme=None, mode=None, replications=1, jobs=1,
                 fmt="json", figures=False):
    """Run a scenario file end to end; returns (summary_doc, metrics list)."""
    path = find_scenario(str(path))
    doc = load_json(path)
    if seed is not None:
        doc["seed"] = seed
    if scheme is not None:
        doc["scheme"] = scheme
    if mode is not None:
        doc["mode"] = mode
    seed = int(doc.get("seed", 0))
    stage = "network"
    try:
        net = build_network(doc.get("network", {}), path.parent, seed)
        report = validate(net)
        if not report.ok:
            raise GeometryError("validation failed: " + ", ".join(report.failures()))
        stage = "plan"
        plan = assign_cycles(net, doc.get("scheme", "mixed"))
        stage = "optimize"
        demands = scenario_demands(doc, net, seed)
        rates, sol = resolve_rates(doc.get("rates", "optimize"), plan, net, demands,
                                   doc.get("weighting", "rate"), float(doc.get("default_rate", 0.0)))
        stage = "simulate"
        cfg = scenario_config(doc, rates, demands, seed)
        seeds, results = replicate(net, plan, cfg, replications, jobs)
    except (MSQError, KeyError, TypeError, ValueError) as exc:
        raise StageError(stage, exc) from exc
    dump_json(network_to_dict(net), out / "network.json")
    dump_json(plan_to_dict(plan), out / "plan.json")
    dump_json(sol, out / "solution.json")
    ns = argparse.Namespace(format=fmt, figures=figures)
    summary = emit_runs(seeds, results, out, ns, net, plan, doc.get("analytic_delay"))
    write_manifest(out, "pipeline", {"scenario": path}, seed,
                   {**doc, "replications": replications})
    return summary, results


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    _, results = run_scenario(args.scenario, out, args.seed, args.scheme, args.mode, args.replications,
                              args.jobs, args.format, args.figures)
    _report(results)
    return EXIT_OK


def _report(results) -> None:
    for r, m in enumerate(results):
        tag = "" if len(results) == 1 else f"rep {r}: "
        print(f"{tag}generated {m.generated}, delivered {m.delivered}, in flight {m.in_flight}, "
              f"stranded {m.stranded}, mean delay {m.mean_delay():.6g}")


# -- argument parsing -------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msqferry", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0; scenario seed for pipeline)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--figures", action="store_true", help="also render PNG figures")
    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--scheme", choices=("mixed", "all-clockwise"), default="mixed")
    netp = argparse.ArgumentParser(add_help=False)
    netp.add_argument("--network", required=True, help="network JSON from 'generate'")
    netp.add_argument("--plan", help="plan JSON from 'plan' (default: assign with --scheme)")
    dem = argparse.ArgumentParser(add_help=False)
    dem.add_argument("--demands", help='JSON {"s,t": rate}')
    dem.add_argument("--gravity", type=float, help="total rate for population-gravity demands")
    dem.add_argument("--pairs", type=int, help="keep this many gravity pairs")
    dem.add_argument("--weighting", choices=("rate", "pairs"), default="rate")
    reps = argparse.ArgumentParser(add_help=False)
    reps.add_argument("--replications", type=int, default=1)
    reps.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="grow an MSQ network")
    g.add_argument("--region", default="triangle", help="triangle, hexagon, strip:N or JSON file")
    g.add_argument("--population", help="ESRI-style ASCII raster")
    g.add_argument("--target", type=int, required=True, help="maximum node count")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("plan", parents=[common, scheme], help="assign ferry cycles")
    p.add_argument("--network", required=True)
    p.set_defaults(func=cmd_plan)

    r = sub.add_parser("route", parents=[common, scheme, netp], help="shortest served route")
    r.add_argument("--source", type=int, required=True)
    r.add_argument("--terminal", type=int, required=True)
    r.add_argument("--damage", help='JSON {"removed_edges": [[a, b]], "failed_nodes": [n]}')
    r.add_argument("--local", action="store_true", help="ellipse searches then greedy fallback only")
    r.set_defaults(func=cmd_route)

    o = sub.add_parser("optimize", parents=[common, scheme, netp, dem], help="optimal turnaround rates")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", parents=[common, scheme, netp, dem, reps], help="run the simulator")
    s.add_argument("--rates", default="optimize", help='"optimize" or JSON {cycle: rate}')
    s.add_argument("--default-rate", type=float, default=0.0)
    s.add_argument("--mode", choices=("queue", "ferry"), default="queue")
    s.add_argument("--horizon", type=float, default=1000.0)
    s.add_argument("--warmup", type=float, default=0.0)
    s.add_argument("--drain-margin", type=float, default=0.0)
    s.add_argument("--events", help="JSON list of {type, target, time}")
    s.add_argument("--F", type=int, default=3, help="missed interactions before a node counts as failed")
    s.add_argument("--T-mult", type=float, default=3.0, help="visit timeout in expected turnarounds")
    s.set_defaults(func=cmd_simulate)

    pl = sub.add_parser("pipeline", parents=[common, reps], help="run a scenario file end to end")
    pl.add_argument("scenario", help="scenario JSON path or bundled name (e.g. fig6-tandem)")
    pl.add_argument("--scheme", choices=("mixed", "all-clockwise"), default=None)
    pl.add_argument("--mode", choices=("queue", "ferry"), default=None)
    pl.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.seed is None and args.command != "pipeline":
        args.seed = 0
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, (ConfigError, GeometryError, KeyError, TypeError,
                                                       ValueError)) else EXIT_RUNTIME
    except (ConfigError, GeometryError) as exc:
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MSQError as exc:
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
