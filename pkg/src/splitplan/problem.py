"""Integerized placement instances.

Turns a layer profile, a link model, and a latency deadline into the integer
costs the planner consumes: client/server compute units, upload/download
units per boundary tensor, and a unit budget. Two rounding modes exist:

* ``paper``        - round-half-up every cost and the budget.
* ``conservative`` - ceil every cost, floor the budget. Any placement feasible
  on the integer instance is then feasible in real time as well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cost_model import LayerProfile

ROUNDING_MODES = ("paper", "conservative")

# quotients within this relative distance of an integer are treated as exact
# multiples, so float noise in t/unit cannot flip a ceil or floor
_SNAP_REL_TOL = 1e-9

__all__ = [
    "LinkSpec",
    "PlanProblem",
    "ROUNDING_MODES",
    "transfer_times",
    "to_units",
    "budget_units",
    "integerize",
    "build_problem",
    "load_scenario",
]


@dataclass(frozen=True)
class LinkSpec:
    """Symmetric-latency duplex link between client and server."""

    uplink_bps: float
    downlink_bps: float
    propagation_s: float = 0.0

    def __post_init__(self):
        if not (self.uplink_bps > 0 and self.downlink_bps > 0):
            raise ValueError("link rates must be positive")
        if self.propagation_s < 0:
            raise ValueError("propagation delay must be >= 0")


def transfer_times(tau_bytes: float, link: LinkSpec) -> tuple[float, float]:
    """(upload_s, download_s) for one boundary tensor.

    Propagation delay is charged once per device-to-device transfer.
    """
    up = 8.0 * tau_bytes / link.uplink_bps + link.propagation_s
    down = 8.0 * tau_bytes / link.downlink_bps + link.propagation_s
    return up, down


def _snap(q: float) -> float:
    nearest = round(q)
    if abs(q - nearest) <= _SNAP_REL_TOL * max(1.0, abs(nearest)):
        return float(nearest)
    return q


def _half_up(q: float) -> int:
    return int(math.floor(q + 0.5))


def to_units(seconds, unit_s: float, mode: str = "conservative") -> np.ndarray:
    """Convert per-layer times (seconds) to integer time units."""
    if unit_s <= 0:
        raise ValueError("unit_s must be positive")
    if mode not in ROUNDING_MODES:
        raise ValueError(f"unknown rounding mode {mode!r}")
    arr = np.atleast_1d(np.asarray(seconds, dtype=float))
    if np.any(arr < 0):
        raise ValueError("times must be >= 0")
    out = np.empty(arr.shape, dtype=np.int64)
    for i, t in enumerate(arr):
        q = _snap(t / unit_s)
        out[i] = _half_up(q) if mode == "paper" else int(math.ceil(q))
    return out


def budget_units(deadline_s: float, unit_s: float, mode: str = "conservative") -> int:
    """Convert the deadline to the integer budget W."""
    if deadline_s < 0:
        raise ValueError("deadline must be >= 0")
    if unit_s <= 0:
        raise ValueError("unit_s must be positive")
    if mode not in ROUNDING_MODES:
        raise ValueError(f"unknown rounding mode {mode!r}")
    q = _snap(deadline_s / unit_s)
    return _half_up(q) if mode == "paper" else int(math.floor(q))


def integerize(times: Mapping[str, Sequence[float]], deadline_s: float,
               unit_s: float, mode: str = "conservative") -> tuple[dict[str, np.ndarray], int]:
    """Integer equivalents for a bundle of per-layer time vectors plus W.

    W == 0 alongside positive costs is a legal (likely infeasible) instance,
    not an error.
    """
    units = {name: to_units(vals, unit_s, mode) for name, vals in times.items()}
    return units, budget_units(deadline_s, unit_s, mode)


@dataclass
class PlanProblem:
    """Integer placement instance over a chain of layers.

    ``client_units``/``server_units`` are compute costs, ``up_units``/
    ``down_units`` the transfer costs of each layer's *input* tensor, and
    ``budget`` the integerized deadline. ``r`` is the per-layer resource
    value whose server-side share the planner minimizes. The real-valued
    times used to build the instance ride along (when known) so policies can
    be re-checked against the actual deadline.
    """

    client_units: np.ndarray
    server_units: np.ndarray
    up_units: np.ndarray
    down_units: np.ndarray
    r: np.ndarray
    budget: int
    source_at_client: bool = True
    unit_s: float = 1e-3
    rounding: str = "conservative"
    client_s: np.ndarray | None = None
    server_s: np.ndarray | None = None
    up_s: np.ndarray | None = None
    down_s: np.ndarray | None = None
    deadline_s: float | None = None

    def __post_init__(self):
        for name in ("client_units", "server_units", "up_units", "down_units"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be >= 0")
            setattr(self, name, arr)
        self.r = np.asarray(self.r, dtype=float)
        if np.any(self.r < 0):
            raise ValueError("r must be >= 0")
        lengths = {
            len(self.client_units), len(self.server_units),
            len(self.up_units), len(self.down_units), len(self.r),
        }
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("cost vectors must share one positive length")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        for name in ("client_s", "server_s", "up_s", "down_s"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, np.asarray(val, dtype=float))

    @property
    def n_layers(self) -> int:
        return len(self.client_units)

    @property
    def total_r(self) -> float:
        return float(np.sum(self.r))

    @property
    def has_real_times(self) -> bool:
        return self.client_s is not None

    @classmethod
    def from_costs(cls, client, server, up, down, r, budget,
                   source_at_client=True, **kwargs) -> "PlanProblem":
        """Synthetic instance directly from integer cost vectors."""
        return cls(np.asarray(client), np.asarray(server), np.asarray(up),
                   np.asarray(down), np.asarray(r, dtype=float), int(budget),
                   source_at_client=source_at_client, **kwargs)


def build_problem(layers: Sequence[LayerProfile], link: LinkSpec, deadline_s: float,
                  unit_s: float = 1e-3, source_at_client: bool = True,
                  rounding: str = "conservative",
                  zero_server_time: bool = False) -> PlanProblem:
    """Assemble the integer instance for a profiled model and a scenario.

    ``zero_server_time`` drops server compute from the latency model (the
    variant where only client compute and transfers count against the
    deadline); by default profiled server times are charged.
    """
    client_s = np.array([p.client_time_s for p in layers], dtype=float)
    server_s = np.zeros(len(layers)) if zero_server_time else np.array(
        [p.server_time_s for p in layers], dtype=float)
    pairs = [transfer_times(p.tau_bytes, link) for p in layers]
    up_s = np.array([u for u, _ in pairs], dtype=float)
    down_s = np.array([d for _, d in pairs], dtype=float)
    units, budget = integerize(
        {"client": client_s, "server": server_s, "up": up_s, "down": down_s},
        deadline_s, unit_s, rounding)
    return PlanProblem(
        client_units=units["client"],
        server_units=units["server"],
        up_units=units["up"],
        down_units=units["down"],
        r=np.array([p.r for p in layers], dtype=float),
        budget=budget,
        source_at_client=source_at_client,
        unit_s=unit_s,
        rounding=rounding,
        client_s=client_s,
        server_s=server_s,
        up_s=up_s,
        down_s=down_s,
        deadline_s=deadline_s,
    )


def load_scenario(path) -> dict:
    """Read a scenario JSON file: link rates, deadline, unit, flags."""
    doc = json.loads(Path(path).read_text())
    link = LinkSpec(
        uplink_bps=float(doc["uplink_bps"]),
        downlink_bps=float(doc["downlink_bps"]),
        propagation_s=float(doc.get("propagation_s", 0.0)),
    )
    return {
        "link": link,
        "deadline_s": float(doc["deadline_s"]),
        "unit_s": float(doc.get("unit_s", 1e-3)),
        "source_at_client": bool(doc.get("source_at_client", True)),
        "rounding": str(doc.get("rounding", "conservative")),
        "zero_server_time": bool(doc.get("zero_server_time", False)),
    }
