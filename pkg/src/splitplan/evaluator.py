"""Policy evaluation and scenario sweeps.

The latency of a placement is the sum over layers of the chosen side's
compute time plus a boundary transfer whenever consecutive layers sit on
different devices (the position of the raw input counts as the side before
layer 1). The server load is the resource total of the server-side layers.

`run_sweep` evaluates a grid of (model, sequence length, deadline, link)
scenarios under several planners and emits one CSV row per scenario and
planner.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cost_model, planner as planner_mod
from .cost_model import DeviceSpec, ModelSpec
from .problem import LinkSpec, PlanProblem, build_problem

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "model", "seq_len", "deadline_s", "uplink_bps", "downlink_bps", "planner",
    "feasible", "server_load", "offload_fraction", "latency_s",
    "improvement_pp", "improvement_rel",
)

DEFAULT_PLANNERS = ("dp", "greedy", "all_server", "all_client")

__all__ = [
    "SweepGrid",
    "SweepCell",
    "SWEEP_COLUMNS",
    "DEFAULT_PLANNERS",
    "latency_of",
    "latency_units_of",
    "server_load_of",
    "client_value_of",
    "improvement_over_greedy",
    "geometric_deadlines",
    "run_sweep",
    "write_sweep_csv",
    "sweep_csv_text",
    "read_sweep_csv",
    "mean_over",
]


def _check_length(pi, problem: PlanProblem) -> np.ndarray:
    x = np.asarray(pi, dtype=float)
    if x.shape != (problem.n_layers,):
        raise ValueError(f"policy length {x.shape} does not match {problem.n_layers} layers")
    return x


def _eq1(x: np.ndarray, comp_client, comp_server, up, down, source_at_client: bool):
    xprev = np.empty_like(x)
    xprev[0] = 1.0 if source_at_client else 0.0
    xprev[1:] = x[:-1]
    terms = x * (comp_client + (1.0 - xprev) * down) + (1.0 - x) * (comp_server + xprev * up)
    return float(np.sum(terms))


def latency_of(pi, problem: PlanProblem) -> float:
    """Real-valued end-to-end latency (seconds) of a placement."""
    x = _check_length(pi, problem)
    if not problem.has_real_times:
        raise ValueError("problem carries no real-valued times")
    return _eq1(x, problem.client_s, problem.server_s, problem.up_s,
                problem.down_s, problem.source_at_client)


def latency_units_of(pi, problem: PlanProblem) -> int:
    """Integer-unit latency of a placement on the integerized costs."""
    x = _check_length(pi, problem)
    lat = _eq1(x, problem.client_units.astype(float), problem.server_units.astype(float),
               problem.up_units.astype(float), problem.down_units.astype(float),
               problem.source_at_client)
    return int(round(lat))


def server_load_of(pi, problem: PlanProblem) -> float:
    """Resource total of the layers a placement leaves on the server."""
    x = np.asarray(pi, dtype=np.int64)
    if x.shape != (problem.n_layers,):
        raise ValueError(f"policy length {x.shape} does not match {problem.n_layers} layers")
    return float(np.sum(problem.r[x == 0]))


def client_value_of(pi, problem: PlanProblem) -> float:
    x = np.asarray(pi, dtype=np.int64)
    if x.shape != (problem.n_layers,):
        raise ValueError(f"policy length {x.shape} does not match {problem.n_layers} layers")
    return float(np.sum(problem.r[x == 1]))


def improvement_over_greedy(dp_load: float, greedy_load: float,
                            total_r: float) -> float | None:
    """Server-load reduction vs. greedy, in percentage points of the model's
    total resource. None (undefined) when greedy is infeasible."""
    if greedy_load is None:
        return None
    if total_r <= 0:
        raise ValueError("total_r must be positive")
    return 100.0 * (greedy_load - dp_load) / total_r


def geometric_deadlines(deadline_max_s: float, count: int) -> list[float]:
    """Deadlines starting at the maximum and halving `count` times in total."""
    if deadline_max_s <= 0 or count < 1:
        raise ValueError("need a positive max deadline and count >= 1")
    return [deadline_max_s / (2.0**k) for k in range(count)]


@dataclass(frozen=True)
class SweepGrid:
    """Cross product of sweep axes plus the fixed scenario context."""

    models: tuple[str, ...]
    seq_lens: tuple[int, ...]
    deadlines_s: tuple[float, ...]
    links: tuple[LinkSpec, ...]
    client: DeviceSpec
    server: DeviceSpec
    # remaining fields configure how each scenario is profiled and integerized
    planners: tuple[str, ...] = DEFAULT_PLANNERS
    metric: str = "flop"
    unit_s: float = 1e-3
    source_at_client: bool = True
    rounding: str = "conservative"

    def __post_init__(self):
        if not (self.models and self.seq_lens and self.deadlines_s
                and self.links and self.planners):
            raise ValueError("every sweep axis must be non-empty")
        if any(d2 >= d1 for d1, d2 in zip(self.deadlines_s, self.deadlines_s[1:])):
            raise ValueError("deadlines must be strictly decreasing")


@dataclass(frozen=True)
class SweepCell:
    """One (scenario, planner) outcome. Improvement columns are populated on
    dp rows only; error cells keep their flag and leave numbers unset."""

    model: str
    seq_len: int
    deadline_s: float
    uplink_bps: float
    downlink_bps: float
    planner: str
    feasible: bool
    server_load: float | None = None
    offload_fraction: float | None = None
    latency_s: float | None = None
    improvement_pp: float | None = None
    improvement_rel: float | None = None
    error: str | None = None


def _resolve_model(source: str, seq_len: int) -> ModelSpec:
    return cost_model.load_model_spec(source, seq_len)


def _scenario_cells(grid: SweepGrid, model_name: str, seq_len: int,
                    deadline_s: float, link: LinkSpec) -> list[SweepCell]:
    coords = dict(model=model_name, seq_len=seq_len, deadline_s=deadline_s,
                  uplink_bps=link.uplink_bps, downlink_bps=link.downlink_bps)
    try:
        spec = _resolve_model(model_name, seq_len)
        layers = cost_model.profile(spec, grid.client, grid.server, grid.metric)
        prob = build_problem(layers, link, deadline_s, unit_s=grid.unit_s,
                             source_at_client=grid.source_at_client,
                             rounding=grid.rounding)
        policies = {name: planner_mod.run_planner(name, prob) for name in grid.planners}
    except Exception as exc:  # flagged cell, sweep goes on
        logger.warning("scenario %s failed: %s", coords, exc)
        return [SweepCell(planner=name, feasible=False, error=str(exc), **coords)
                for name in grid.planners]
    total = prob.total_r
    greedy = policies.get("greedy")
    greedy_load = greedy.server_load if greedy is not None and greedy.feasible else None
    cells = []
    for name in grid.planners:
        pol = policies[name]
        imp_pp = imp_rel = None
        if name == "dp" and greedy_load is not None:
            imp_pp = improvement_over_greedy(pol.server_load, greedy_load, total)
            imp_rel = (100.0 * (greedy_load - pol.server_load) / greedy_load
                       if greedy_load > 0 else 0.0)
        cells.append(SweepCell(
            planner=name,
            feasible=pol.feasible,
            server_load=pol.server_load,
            offload_fraction=pol.client_value / total if total > 0 else 0.0,
            latency_s=latency_of(pol.pi, prob),
            improvement_pp=imp_pp,
            improvement_rel=imp_rel,
            **coords,
        ))
    return cells


def run_sweep(grid: SweepGrid, jobs: int = 1) -> list[SweepCell]:
    """Evaluate every grid coordinate; output order is coordinate-sorted and
    independent of `jobs`."""
    scenarios = [(m, s, d, l) for m in grid.models for s in grid.seq_lens
                 for d in grid.deadlines_s for l in grid.links]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda sc: _scenario_cells(grid, *sc), scenarios))
    else:
        chunks = [_scenario_cells(grid, *sc) for sc in scenarios]
    cells = [cell for chunk in chunks for cell in chunk]
    cells.sort(key=lambda c: (c.model, c.seq_len, c.deadline_s,
                              c.uplink_bps, c.downlink_bps, c.planner))
    return cells


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def sweep_csv_text(cells: Iterable[SweepCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for c in cells:
        writer.writerow([_fmt(getattr(c, col)) for col in SWEEP_COLUMNS])
    return buf.getvalue()


def write_sweep_csv(path, cells: Iterable[SweepCell]) -> None:
    Path(path).write_text(sweep_csv_text(cells))


def read_sweep_csv(path) -> list[SweepCell]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepCell(
                model=rec["model"],
                seq_len=int(rec["seq_len"]),
                deadline_s=float(rec["deadline_s"]),
                uplink_bps=float(rec["uplink_bps"]),
                downlink_bps=float(rec["downlink_bps"]),
                planner=rec["planner"],
                feasible=rec["feasible"] == "true",
                server_load=float(rec["server_load"]) if rec["server_load"] else None,
                offload_fraction=(float(rec["offload_fraction"])
                                  if rec["offload_fraction"] else None),
                latency_s=float(rec["latency_s"]) if rec["latency_s"] else None,
                improvement_pp=(float(rec["improvement_pp"])
                                if rec["improvement_pp"] else None),
                improvement_rel=(float(rec["improvement_rel"])
                                 if rec["improvement_rel"] else None),
            ))
    return rows


def mean_over(cells: Sequence[SweepCell], axis: str, value: str,
              planner: str | None = None) -> dict:
    """Mean of `value` grouped by `axis`, optionally restricted to a planner.
    Cells with the value unset are skipped."""
    groups: dict = {}
    for c in cells:
        if planner is not None and c.planner != planner:
            continue
        v = getattr(c, value)
        if v is None:
            continue
        groups.setdefault(getattr(c, axis), []).append(v)
    return {k: float(np.mean(vs)) for k, vs in sorted(groups.items())}
