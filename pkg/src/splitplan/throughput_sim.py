"""FIFO queueing simulator for a capacity-limited inference server.

Requests arrive as a Poisson stream, each drawing a scenario from a table of
(per-variant server demand, deadline) rows produced by a sweep. A request
occupies `demand` capacity units for its whole duration; the queue admits
strictly in arrival order, so an oversized head blocks everything behind it.
Running the dp / greedy / nosplit demand variants against one shared arrival
skeleton gives paired wait-time comparisons.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluator import SweepCell

VARIANTS = ("dp", "greedy", "nosplit")
REQUEST_COLUMNS = ("request_id", "arrival_ms", "admit_ms", "wait_ms", "demand", "duration_ms")

__all__ = [
    "VARIANTS",
    "Scenario",
    "SimConfig",
    "Stream",
    "SimResult",
    "CapacityDeadlockError",
    "scenarios_from_cells",
    "scenarios_from_csv",
    "capacity_for_requests",
    "generate_stream",
    "simulate_stream",
    "simulate",
    "compare_variants",
    "requests_csv_text",
    "cumulative_csv_text",
    "summary_dict",
    "write_outputs",
]


class CapacityDeadlockError(RuntimeError):
    """A queued request demands more than the whole server capacity."""


@dataclass(frozen=True)
class Scenario:
    """One sweep row usable by the simulator: a deadline and the server
    demand it implies under each placement variant."""

    key: str
    deadline_s: float
    demand_dp: float
    demand_greedy: float
    demand_nosplit: float

    def demand(self, variant: str) -> float:
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        return getattr(self, f"demand_{variant}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters. `beta_per_ms` is the arrival rate (requests per
    millisecond); `capacity` is the server's resource pool in the same units
    as the scenario demands."""

    beta_per_ms: float
    capacity: float
    seed: int
    policy_variant: str
    horizon: int
    scenarios: tuple[Scenario, ...]
    exec_count_max: int = 10

    def __post_init__(self):
        if self.beta_per_ms <= 0:
            raise ValueError("beta_per_ms must be positive")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not self.scenarios:
            raise ValueError("scenario table must be non-empty")
        if self.policy_variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.policy_variant!r}")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))


@dataclass(frozen=True)
class Stream:
    """Request stream: the seeded skeleton plus the variant's demands."""

    arrival_ms: np.ndarray
    scenario_idx: np.ndarray
    exec_count: np.ndarray
    demand: np.ndarray
    duration_ms: np.ndarray


@dataclass(frozen=True)
class SimResult:
    """Per-request records in arrival order plus queueing aggregates."""

    arrival_ms: np.ndarray
    admit_ms: np.ndarray
    wait_ms: np.ndarray
    demand: np.ndarray
    duration_ms: np.ndarray
    served_count: int

    @property
    def max_wait_ms(self) -> float:
        return float(np.max(self.wait_ms)) if len(self.wait_ms) else 0.0

    @property
    def mean_wait_ms(self) -> float:
        return float(np.mean(self.wait_ms)) if len(self.wait_ms) else 0.0

    @property
    def cumulative_wait_ms(self) -> np.ndarray:
        return np.cumsum(self.wait_ms)


def scenarios_from_cells(cells: Sequence[SweepCell]) -> list[Scenario]:
    """Build the scenario table from sweep cells.

    A sweep scenario qualifies when its dp, greedy, and all_server rows all
    exist and are feasible (the all_server load is the full-model demand of
    the nosplit variant). Demands are normalized so the average nosplit
    request has demand 1.
    """
    by_coord: dict[tuple, dict[str, SweepCell]] = {}
    for c in cells:
        coord = (c.model, c.seq_len, c.deadline_s, c.uplink_bps, c.downlink_bps)
        by_coord.setdefault(coord, {})[c.planner] = c
    rows = []
    for coord in sorted(by_coord):
        group = by_coord[coord]
        needed = [group.get("dp"), group.get("greedy"), group.get("all_server")]
        if any(c is None or not c.feasible or c.server_load is None for c in needed):
            continue
        dp, greedy, nosplit = needed
        key = "{}/s{}/d{:g}/u{:g}".format(*coord[:4])
        rows.append((key, coord[2], dp.server_load, greedy.server_load, nosplit.server_load))
    if not rows:
        return []
    mean_nosplit = float(np.mean([r[4] for r in rows]))
    if mean_nosplit <= 0:
        raise ValueError("nosplit demands are all zero; nothing to simulate")
    return [
        Scenario(key=key, deadline_s=dl, demand_dp=d / mean_nosplit,
                 demand_greedy=g / mean_nosplit, demand_nosplit=n / mean_nosplit)
        for key, dl, d, g, n in rows
    ]


def scenarios_from_csv(path) -> list[Scenario]:
    from .evaluator import read_sweep_csv

    return scenarios_from_cells(read_sweep_csv(path))


def capacity_for_requests(scenarios: Sequence[Scenario], n_requests: float) -> float:
    """Capacity sized to hold `n_requests` average nosplit requests at once."""
    if not scenarios:
        raise ValueError("scenario table is empty")
    return float(n_requests) * float(np.mean([s.demand_nosplit for s in scenarios]))


def _skeleton(config: SimConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    n = config.horizon
    gaps = rng.exponential(scale=1.0 / config.beta_per_ms, size=n)
    arrivals = np.cumsum(gaps)
    idx = rng.integers(0, len(config.scenarios), size=n)
    execs = rng.integers(1, config.exec_count_max + 1, size=n)
    return arrivals, idx, execs


def _project(config: SimConfig, arrivals, idx, execs, variant: str) -> Stream:
    demands = np.array([s.demand(variant) for s in config.scenarios])
    deadlines_ms = np.array([s.deadline_s * 1000.0 for s in config.scenarios])
    return Stream(
        arrival_ms=arrivals,
        scenario_idx=idx,
        exec_count=execs,
        demand=demands[idx],
        duration_ms=deadlines_ms[idx] * execs,  # deadline times execution count
    )


def generate_stream(config: SimConfig) -> Stream:
    """Seeded request stream for the config's policy variant."""
    arrivals, idx, execs = _skeleton(config)
    return _project(config, arrivals, idx, execs, config.policy_variant)


def simulate_stream(stream: Stream, capacity: float) -> SimResult:
    """Run the FIFO admission loop over a prepared stream.

    Completions are processed before arrivals at equal timestamps, then by
    event sequence number. The head of the queue is admitted whenever free
    capacity covers its demand; a head that can never fit raises
    CapacityDeadlockError instead of blocking forever.
    """
    n = len(stream.arrival_ms)
    admit = np.zeros(n)
    eps = 1e-9 * capacity
    free = capacity
    in_service: list[tuple[float, int, int]] = []  # (finish_ms, seq, request)
    queue: list[int] = []
    q_head = 0
    seq = 0
    i = 0
    while i < n or in_service:
        next_arrival = stream.arrival_ms[i] if i < n else np.inf
        if in_service and in_service[0][0] <= next_arrival:
            now, _, done = heappop(in_service)
            free += stream.demand[done]
        else:
            queue.append(i)
            now = next_arrival
            i += 1
        while q_head < len(queue):
            req = queue[q_head]
            need = stream.demand[req]
            if need <= free + eps:
                admit[req] = now
                free -= need
                heappush(in_service, (now + stream.duration_ms[req], seq, req))
                seq += 1
                q_head += 1
            else:
                if need > capacity + eps:
                    raise CapacityDeadlockError(
                        f"request {req} demands {need:.6g} > capacity {capacity:.6g}; "
                        f"the FIFO head can never be admitted")
                break
    waits = admit - stream.arrival_ms
    return SimResult(
        arrival_ms=stream.arrival_ms,
        admit_ms=admit,
        wait_ms=waits,
        demand=stream.demand,
        duration_ms=stream.duration_ms,
        served_count=n,
    )


def simulate(config: SimConfig) -> SimResult:
    """Generate the seeded stream for the config's variant and run it."""
    return simulate_stream(generate_stream(config), config.capacity)


def compare_variants(config: SimConfig) -> dict[str, SimResult]:
    """Run dp, greedy, and nosplit over one shared arrival skeleton; only the
    per-request demands differ, so the results are pairwise comparable."""
    arrivals, idx, execs = _skeleton(config)
    out = {}
    for variant in VARIANTS:
        stream = _project(config, arrivals, idx, execs, variant)
        out[variant] = simulate_stream(stream, config.capacity)
    return out


def requests_csv_text(result: SimResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REQUEST_COLUMNS)
    for k in range(len(result.arrival_ms)):
        writer.writerow([
            k,
            repr(float(result.arrival_ms[k])),
            repr(float(result.admit_ms[k])),
            repr(float(result.wait_ms[k])),
            repr(float(result.demand[k])),
            repr(float(result.duration_ms[k])),
        ])
    return buf.getvalue()


def cumulative_csv_text(result: SimResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("request_id", "cumulative_wait_ms"))
    for k, total in enumerate(result.cumulative_wait_ms):
        writer.writerow([k, repr(float(total))])
    return buf.getvalue()


def summary_dict(result: SimResult) -> dict:
    return {
        "max_wait_ms": result.max_wait_ms,
        "mean_wait_ms": result.mean_wait_ms,
        "served": result.served_count,
    }


def write_outputs(out_dir, variant: str, result: SimResult) -> list[Path]:
    """Write the per-request CSV, cumulative-wait CSV, and summary JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in (
        (f"requests_{variant}.csv", requests_csv_text(result)),
        (f"cumulative_{variant}.csv", cumulative_csv_text(result)),
        (f"summary_{variant}.json",
         json.dumps(summary_dict(result), indent=2, sort_keys=True) + "\n"),
    ):
        path = out_dir / name
        path.write_text(text)
        paths.append(path)
    return paths
