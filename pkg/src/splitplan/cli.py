"""Command-line interface.

Subcommands: ``profile`` (per-layer cost profile), ``plan`` (single-instance
placement), ``sweep`` (scenario grid to CSV), ``simulate`` (queueing
simulation over sweep results), ``report`` (figures from CSVs). Every run
with file outputs also writes a ``*.manifest.json`` describing it.

Exit codes: 0 success, 2 configuration/input error, 3 unwritable output,
4 plan infeasible (the policy file is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__, cost_model, evaluator, planner, problem, throughput_sim

logger = logging.getLogger("splitplan")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNWRITABLE = 3
EXIT_INFEASIBLE = 4


@dataclass
class RunManifest:
    """Provenance record written alongside every command's outputs."""

    command: str
    inputs: dict
    outputs: list
    seed: int | None
    version: str
    duration_s: float


def _write_manifest(primary_out, command: str, inputs: dict, outputs: list,
                    seed: int | None, started: float) -> None:
    target = Path(str(primary_out))
    if target.is_dir():
        path = target / "manifest.json"
    else:
        path = target.with_name(target.name + ".manifest.json")
    manifest = RunManifest(
        command=command,
        inputs={k: str(v) for k, v in inputs.items()},
        outputs=[str(p) for p in outputs],
        seed=seed,
        version=__version__,
        duration_s=time.perf_counter() - started,
    )
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")


class OutputWriteError(Exception):
    """Raised when an output path cannot be written (exit code 3)."""


def _emit(out: str, text: str) -> None:
    """Write fully-built text to a file or stdout ('-')."""
    if out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OutputWriteError(str(exc)) from exc


def _resolve_devices(args, spec) -> tuple[cost_model.DeviceSpec, cost_model.DeviceSpec]:
    if args.calibrate_client is not None:
        client = cost_model.calibrate(spec, spec.seq_len, args.calibrate_client, "client")
    elif args.client_tput is not None:
        client = cost_model.DeviceSpec("client", args.client_tput)
    else:
        raise ValueError("provide --client-tput or --calibrate-client")
    if args.calibrate_server is not None:
        server = cost_model.calibrate(spec, spec.seq_len, args.calibrate_server, "server")
    elif args.server_tput is not None:
        server = cost_model.DeviceSpec("server", args.server_tput)
    else:
        raise ValueError("provide --server-tput or --calibrate-server")
    return client, server


def cmd_profile(args) -> int:
    started = time.perf_counter()
    spec = cost_model.load_model_spec(args.model, args.seq_len)
    client, server = _resolve_devices(args, spec)
    layers = cost_model.profile(spec, client, server, args.metric)
    text = json.dumps(cost_model.profile_to_dict(spec, layers, args.metric),
                      indent=2, sort_keys=True) + "\n"
    _emit(args.out, text)
    if args.out != "-":
        _write_manifest(args.out, "profile",
                        {"model": args.model, "seq_len": args.seq_len,
                         "metric": args.metric}, [args.out], None, started)
    logger.info("profiled %s at seq_len=%d (%d layers)", spec.name, spec.seq_len, len(layers))
    return EXIT_OK


def cmd_plan(args) -> int:
    started = time.perf_counter()
    _, layers = cost_model.load_profile(args.profile)
    scenario = problem.load_scenario(args.scenario)
    prob = problem.build_problem(
        layers, scenario["link"], scenario["deadline_s"],
        unit_s=scenario["unit_s"], source_at_client=scenario["source_at_client"],
        rounding=scenario["rounding"], zero_server_time=scenario["zero_server_time"])
    policy = planner.run_planner(args.planner, prob)
    text = json.dumps(planner.policy_to_dict(policy), indent=2, sort_keys=True) + "\n"
    _emit(args.out, text)
    if args.out != "-":
        _write_manifest(args.out, "plan",
                        {"profile": args.profile, "scenario": args.scenario,
                         "planner": args.planner}, [args.out], None, started)
    logger.info("planner=%s feasible=%s server_load=%g latency=%d units",
                args.planner, policy.feasible, policy.server_load, policy.integer_latency)
    return EXIT_OK if policy.feasible else EXIT_INFEASIBLE


def _grid_from_args(args) -> evaluator.SweepGrid:
    doc = json.loads(Path(args.grid).read_text())
    deadlines = doc.get("deadlines_s")
    if args.deadline_max is not None:
        deadlines = evaluator.geometric_deadlines(args.deadline_max, args.deadline_count)
    if not deadlines:
        raise ValueError("grid has no deadlines (set deadlines_s or --deadline-max)")
    links = tuple(
        problem.LinkSpec(float(l["uplink_bps"]), float(l["downlink_bps"]),
                         float(l.get("propagation_s", 0.0)))
        for l in doc["links"])
    models = tuple(doc["models"])
    seq_lens = tuple(int(s) for s in doc["seq_lens"])

    def device(role: str) -> cost_model.DeviceSpec:
        conf = doc[role]
        if "flops_per_s" in conf:
            return cost_model.DeviceSpec(role, float(conf["flops_per_s"]))
        ref = cost_model.load_model_spec(conf["calibrate_model"],
                                         int(conf["calibrate_seq_len"]))
        return cost_model.calibrate(ref, ref.seq_len, float(conf["calibrate_s"]), role)

    return evaluator.SweepGrid(
        models=models,
        seq_lens=seq_lens,
        deadlines_s=tuple(float(d) for d in deadlines),
        links=links,
        client=device("client"),
        server=device("server"),
        planners=tuple(doc.get("planners", evaluator.DEFAULT_PLANNERS)),
        metric=str(doc.get("metric", "flop")),
        unit_s=float(doc.get("unit_s", 1e-3)),
        source_at_client=bool(doc.get("source_at_client", True)),
        rounding=str(doc.get("rounding", "conservative")),
    )


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    grid = _grid_from_args(args)
    cells = evaluator.run_sweep(grid, jobs=args.jobs)
    _emit(args.out, evaluator.sweep_csv_text(cells))
    if args.out != "-":
        _write_manifest(args.out, "sweep", {"grid": args.grid, "jobs": args.jobs},
                        [args.out], None, started)
    logger.info("sweep wrote %d rows", len(cells))
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    scenarios = throughput_sim.scenarios_from_csv(args.scenarios)
    if not scenarios:
        raise ValueError(f"no usable scenario rows in {args.scenarios} "
                         "(need feasible dp, greedy, and all_server rows)")
    capacity = throughput_sim.capacity_for_requests(scenarios, args.capacity_requests)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = throughput_sim.VARIANTS if args.variant == "compare" else (args.variant,)
    config = throughput_sim.SimConfig(
        beta_per_ms=args.beta, capacity=capacity, seed=args.seed,
        policy_variant=variants[0], horizon=args.horizon,
        scenarios=tuple(scenarios))
    outputs: list[Path] = []
    if args.variant == "compare":
        results = throughput_sim.compare_variants(config)
    else:
        results = {args.variant: throughput_sim.simulate(config)}
    for variant, result in results.items():
        outputs += throughput_sim.write_outputs(out_dir, variant, result)
        logger.info("%s: served=%d max_wait=%.3f ms mean_wait=%.3f ms", variant,
                    result.served_count, result.max_wait_ms, result.mean_wait_ms)
    _write_manifest(out_dir, "simulate",
                    {"scenarios": args.scenarios, "beta": args.beta,
                     "capacity_requests": args.capacity_requests,
                     "variant": args.variant, "horizon": args.horizon},
                    outputs, args.seed, started)
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.perf_counter()
    if args.sweep is None and args.sim_dir is None:
        raise ValueError("provide --sweep and/or --sim-dir")
    from . import report

    outputs: list[Path] = []
    if args.sweep is not None:
        outputs += report.plot_sweep(args.sweep, args.out_dir)
    if args.sim_dir is not None:
        outputs += report.plot_sim(args.sim_dir, args.out_dir)
    _write_manifest(Path(args.out_dir), "report",
                    {"sweep": args.sweep or "", "sim_dir": args.sim_dir or ""},
                    outputs, None, started)
    logger.info("report wrote %d figures", len(outputs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitplan",
        description="Plan and evaluate client/server layer placement for "
                    "transformer inference under a latency SLA.")
    parser.add_argument("--version", action="version", version=f"splitplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="generate a per-layer cost profile")
    p.add_argument("--model", required=True,
                   help="preset name or model-spec JSON path")
    p.add_argument("--seq-len", type=int, required=True)
    p.add_argument("--metric", choices=("flop", "memory"), default="flop")
    p.add_argument("--client-tput", type=float, help="client FLOP/s")
    p.add_argument("--server-tput", type=float, help="server FLOP/s")
    p.add_argument("--calibrate-client", type=float, metavar="SECONDS",
                   help="set client rate so the full model takes this long")
    p.add_argument("--calibrate-server", type=float, metavar="SECONDS")
    p.add_argument("--out", required=True, help="output JSON path or '-'")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("plan", help="compute one placement policy")
    p.add_argument("--profile", required=True, help="profile JSON from 'profile'")
    p.add_argument("--scenario", required=True, help="scenario JSON (link, deadline, unit)")
    p.add_argument("--planner", required=True,
                   choices=("dp", "greedy", "oracle", "all-server", "all-client"))
    p.add_argument("--out", required=True, help="output JSON path or '-'")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="evaluate a scenario grid to CSV")
    p.add_argument("--grid", required=True, help="grid JSON path")
    p.add_argument("--out", required=True, help="output CSV path or '-'")
    p.add_argument("--jobs", type=int, default=1, help="parallel cell evaluation")
    p.add_argument("--deadline-max", type=float,
                   help="generate deadlines geometrically from this maximum")
    p.add_argument("--deadline-count", type=int, default=4)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="queueing simulation over sweep results")
    p.add_argument("--scenarios", required=True, help="sweep results CSV")
    p.add_argument("--beta", type=float, required=True, help="arrival rate per ms")
    p.add_argument("--capacity-requests", type=float, default=500.0,
                   help="capacity in average nosplit requests held at once")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--variant", choices=("dp", "greedy", "nosplit", "compare"),
                   default="compare")
    p.add_argument("--horizon", type=int, required=True, help="number of requests")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render figures from sweep/sim outputs")
    p.add_argument("--sweep", help="sweep results CSV")
    p.add_argument("--sim-dir", help="simulation output directory")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def _setup_logging() -> None:
    level = os.environ.get("SPLITPLAN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OutputWriteError as exc:
        print(f"splitplan: error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    except (ValueError, KeyError, json.JSONDecodeError, OSError) as exc:
        logger.error("%s", exc)
        print(f"splitplan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
