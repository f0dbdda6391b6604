"""Placement planners.

Given an integer instance, each planner returns a binary placement vector
(1 = run the layer on the client, 0 = on the server) that respects the unit
budget. `plan_dp` maximizes the resource value kept off the server via two
budget-indexed tables and is exact; `plan_greedy` is the longest-feasible-
prefix baseline; `plan_oracle` enumerates every placement and exists to
cross-check the others.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problem import PlanProblem

ORACLE_MAX_LAYERS = 24
_NEG = -np.inf  # marker for unreachable table cells; absorbing under + r

PLANNER_NAMES = ("dp", "greedy", "all_server", "all_client", "oracle")

__all__ = [
    "PlacementPolicy",
    "DpTables",
    "PLANNER_NAMES",
    "ORACLE_MAX_LAYERS",
    "plan_dp",
    "plan_greedy",
    "plan_trivial",
    "plan_oracle",
    "run_planner",
    "build_dp_tables",
    "policy_to_dict",
    "save_policy",
]


@dataclass(frozen=True)
class PlacementPolicy:
    """A placement decision with its achieved value, load, and unit latency."""

    planner: str
    pi: tuple[int, ...]
    client_value: float
    server_load: float
    integer_latency: int
    feasible: bool


@dataclass
class DpTables:
    """Budget-indexed value tables.

    ``client[k][j]`` (``server[k][j]``) is the best achievable client-side
    resource value over the first k layers within budget j, with layer k
    resident on the client (server). Unreachable cells hold -inf. Row 0
    encodes the data origin: the origin side is 0 everywhere, the other side
    is unreachable.
    """

    client: np.ndarray
    server: np.ndarray


def _latency_units(pi, problem: PlanProblem) -> int:
    """Unit latency of a placement: compute per layer plus a transfer at
    every device switch, with the data origin as the side before layer 1."""
    lat = 0
    prev = 1 if problem.source_at_client else 0
    for k in range(problem.n_layers):
        x = int(pi[k])
        if x == 1:
            lat += int(problem.client_units[k])
            if prev == 0:
                lat += int(problem.down_units[k])
        else:
            lat += int(problem.server_units[k])
            if prev == 1:
                lat += int(problem.up_units[k])
        prev = x
    return lat


def _finish(pi, problem: PlanProblem, planner: str, feasible_hint=None) -> PlacementPolicy:
    x = np.asarray(pi, dtype=np.int64)
    client_value = float(np.sum(problem.r[x == 1]))
    server_load = float(np.sum(problem.r[x == 0]))
    latency = _latency_units(x, problem)
    feasible = latency <= problem.budget if feasible_hint is None else feasible_hint
    return PlacementPolicy(
        planner=planner,
        pi=tuple(int(v) for v in x),
        client_value=client_value,
        server_load=server_load,
        integer_latency=latency,
        feasible=bool(feasible),
    )


def _infeasible(problem: PlanProblem, planner: str) -> PlacementPolicy:
    # convention: an infeasible result reports the all-server placement
    return _finish(np.zeros(problem.n_layers, dtype=np.int64), problem, planner,
                   feasible_hint=False)


def _shift(row: np.ndarray, cost: int) -> np.ndarray:
    """row shifted right by `cost` budget columns; vacated cells unreachable."""
    if cost == 0:
        return row
    out = np.full(row.shape, _NEG)
    if cost < len(row):
        out[cost:] = row[:-cost]
    return out


def _effective_budget(problem: PlanProblem) -> int:
    # beyond the costliest possible path every placement is feasible, so a
    # larger budget cannot change the optimum; clamping keeps tables small
    worst_path = int(np.sum(np.maximum(problem.client_units + problem.down_units,
                                       problem.server_units + problem.up_units)))
    return min(problem.budget, worst_path)


def build_dp_tables(problem: PlanProblem) -> DpTables:
    L, W = problem.n_layers, _effective_budget(problem)
    C = np.full((L + 1, W + 1), _NEG)
    S = np.full((L + 1, W + 1), _NEG)
    if problem.source_at_client:
        C[0, :] = 0.0
    else:
        S[0, :] = 0.0
    i, s = problem.client_units, problem.server_units
    u, d = problem.up_units, problem.down_units
    r = problem.r
    for k in range(1, L + 1):
        ik, sk, uk, dk = int(i[k - 1]), int(s[k - 1]), int(u[k - 1]), int(d[k - 1])
        C[k] = np.maximum(_shift(C[k - 1], ik), _shift(S[k - 1], ik + dk)) + r[k - 1]
        S[k] = np.maximum(_shift(S[k - 1], sk), _shift(C[k - 1], sk + uk))
    return DpTables(client=C, server=S)


def _backtrace(tables: DpTables, problem: PlanProblem, end_side: str) -> np.ndarray:
    """Reconstruct a placement achieving the end cell's value by re-deriving,
    layer by layer, which predecessor produced each stored value."""
    C, S = tables.client, tables.server
    i, s = problem.client_units, problem.server_units
    u, d = problem.up_units, problem.down_units
    r = problem.r
    L = problem.n_layers
    j = C.shape[1] - 1
    side = end_side
    pi = np.zeros(L, dtype=np.int64)
    for k in range(L, 0, -1):
        ik, sk, uk, dk, rk = int(i[k - 1]), int(s[k - 1]), int(u[k - 1]), int(d[k - 1]), r[k - 1]
        if side == "client":
            pi[k - 1] = 1
            target = C[k, j]
            # prefer the stay-on-client predecessor on ties
            if j - ik >= 0 and C[k - 1, j - ik] + rk == target:
                j -= ik
            elif j - ik - dk >= 0 and S[k - 1, j - ik - dk] + rk == target:
                j -= ik + dk
                side = "server"
            else:  # pragma: no cover - would indicate corrupt tables
                raise AssertionError("no predecessor reproduces the stored value")
        else:
            target = S[k, j]
            if j - sk >= 0 and S[k - 1, j - sk] == target:
                j -= sk
            elif j - sk - uk >= 0 and C[k - 1, j - sk - uk] == target:
                j -= sk + uk
                side = "client"
            else:  # pragma: no cover
                raise AssertionError("no predecessor reproduces the stored value")
    return pi


def plan_dp(problem: PlanProblem, must_end_at: str | None = None) -> PlacementPolicy:
    """Optimal placement: maximum client-side value within the unit budget.

    Runs in O(L*W) time and memory. `must_end_at` ("client" or "server")
    optionally pins the last layer's side. When no placement fits the budget
    the result carries feasible=False instead of raising.
    """
    tables = build_dp_tables(problem)
    end_c = tables.client[-1, -1]
    end_s = tables.server[-1, -1]
    if must_end_at == "client":
        end_s = _NEG
    elif must_end_at == "server":
        end_c = _NEG
    elif must_end_at is not None:
        raise ValueError(f"must_end_at must be 'client' or 'server', got {must_end_at!r}")
    if max(end_c, end_s) == _NEG:
        return _infeasible(problem, "dp")
    side = "client" if end_c >= end_s else "server"
    pi = _backtrace(tables, problem, side)
    return _finish(pi, problem, "dp")


def plan_greedy(problem: PlanProblem) -> PlacementPolicy:
    """Longest-prefix baseline: keep layers 1..m on the client for the
    largest m whose prefix placement (including the boundary upload and the
    remaining server compute) still fits the budget."""
    L = problem.n_layers
    for m in range(L, -1, -1):
        pi = np.concatenate([np.ones(m, dtype=np.int64), np.zeros(L - m, dtype=np.int64)])
        if _latency_units(pi, problem) <= problem.budget:
            return _finish(pi, problem, "greedy")
    return _infeasible(problem, "greedy")


def plan_trivial(problem: PlanProblem, side: str) -> PlacementPolicy:
    """All-server or all-client placement with exact latency and feasibility."""
    if side == "all_server":
        pi = np.zeros(problem.n_layers, dtype=np.int64)
    elif side == "all_client":
        pi = np.ones(problem.n_layers, dtype=np.int64)
    else:
        raise ValueError(f"side must be 'all_server' or 'all_client', got {side!r}")
    return _finish(pi, problem, side)


def plan_oracle(problem: PlanProblem, chunk: int = 1 << 16) -> PlacementPolicy:
    """Exhaustive reference: evaluates every placement directly.

    Ties on value are broken toward the placement whose bit string (layer 1
    as the most significant bit) is the smallest binary number. Guarded to
    at most ORACLE_MAX_LAYERS layers.
    """
    L = problem.n_layers
    if L > ORACLE_MAX_LAYERS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_LAYERS} layers, got {L}")
    i = problem.client_units.astype(float)
    s = problem.server_units.astype(float)
    u = problem.up_units.astype(float)
    d = problem.down_units.astype(float)
    r = problem.r
    x0 = 1.0 if problem.source_at_client else 0.0
    shifts = np.arange(L - 1, -1, -1, dtype=np.uint32)  # layer 1 is the MSB
    best_value, best_mask, best_latency = None, None, None
    for start in range(0, 1 << L, chunk):
        masks = np.arange(start, min(start + chunk, 1 << L), dtype=np.uint32)
        x = ((masks[:, None] >> shifts[None, :]) & 1).astype(float)
        xprev = np.empty_like(x)
        xprev[:, 0] = x0
        xprev[:, 1:] = x[:, :-1]
        lat = np.sum(x * (i + (1 - xprev) * d) + (1 - x) * (s + xprev * u), axis=1)
        value = x @ r
        ok = lat <= problem.budget
        if not np.any(ok):
            continue
        value_ok = np.where(ok, value, _NEG)
        idx = int(np.argmax(value_ok))  # first max: smallest mask wins ties
        if best_value is None or value_ok[idx] > best_value:
            best_value = float(value_ok[idx])
            best_mask = int(masks[idx])
            best_latency = int(lat[idx])
    if best_value is None:
        return _infeasible(problem, "oracle")
    pi = [(best_mask >> int(sh)) & 1 for sh in shifts]
    policy = _finish(np.array(pi, dtype=np.int64), problem, "oracle")
    assert policy.integer_latency == best_latency
    return policy


def run_planner(name: str, problem: PlanProblem) -> PlacementPolicy:
    """Dispatch by planner name ('all-server' and 'all_server' both work)."""
    key = name.replace("-", "_")
    if key == "dp":
        return plan_dp(problem)
    if key == "greedy":
        return plan_greedy(problem)
    if key == "oracle":
        return plan_oracle(problem)
    if key in ("all_server", "all_client"):
        return plan_trivial(problem, key)
    raise ValueError(f"unknown planner {name!r}")


def policy_to_dict(policy: PlacementPolicy) -> dict:
    return {
        "planner": policy.planner,
        "pi": list(policy.pi),
        "server_load": policy.server_load,
        "client_value": policy.client_value,
        "integer_latency": policy.integer_latency,
        "feasible": policy.feasible,
    }


def save_policy(path, policy: PlacementPolicy) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(policy), indent=2, sort_keys=True) + "\n")
