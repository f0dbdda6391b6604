import pytest

from splitplan import cost_model as cm
from splitplan.evaluator import (
    SWEEP_COLUMNS,
    SweepGrid,
    geometric_deadlines,
    improvement_over_greedy,
    latency_of,
    latency_units_of,
    mean_over,
    read_sweep_csv,
    run_sweep,
    server_load_of,
    sweep_csv_text,
    write_sweep_csv,
)
from splitplan.planner import run_planner
from splitplan.problem import LinkSpec, PlanProblem, build_problem


def instance_b():
    return PlanProblem.from_costs([4, 4, 4], [0, 0, 0], [1, 1, 1], [1, 1, 1],
                                  [1.0, 1.0, 10.0], 9, source_at_client=True)


def small_grid(**overrides):
    client = cm.DeviceSpec("client", 2e9)
    server = cm.DeviceSpec("server", 2e12)
    base = dict(
        models=("bert-12",),
        seq_lens=(64,),
        deadlines_s=(1.0,),
        links=(LinkSpec(1e8, 1e8, 0.01),),
        client=client,
        server=server,
    )
    base.update(overrides)
    return SweepGrid(**base)


# --- latency -------------------------------------------------------------------

def test_latency_all_on_origin_side_is_pure_compute():
    prob = PlanProblem.from_costs([2, 3, 4], [5, 6, 7], [9, 9, 9], [9, 9, 9],
                                  [1.0, 1.0, 1.0], 100, source_at_client=True)
    assert latency_units_of([1, 1, 1], prob) == 9
    flipped = PlanProblem.from_costs([2, 3, 4], [5, 6, 7], [9, 9, 9], [9, 9, 9],
                                     [1.0, 1.0, 1.0], 100, source_at_client=False)
    assert latency_units_of([0, 0, 0], flipped) == 18


def test_latency_units_on_derived_instance():
    assert latency_units_of([0, 0, 1], instance_b()) == 6


def test_latency_charges_one_transfer_per_switch():
    # zero compute; alternating placement pays u then d exactly once each
    prob = PlanProblem.from_costs([0, 0], [0, 0], [3, 3], [7, 7],
                                  [1.0, 1.0], 100, source_at_client=True)
    assert latency_units_of([0, 1], prob) == 3 + 7  # upload layer 1, download layer 2
    assert latency_units_of([1, 0], prob) == 3      # upload before layer 2 only
    assert latency_units_of([1, 1], prob) == 0
    assert latency_units_of([0, 0], prob) == 3


def test_latency_of_uses_real_times():
    layers = [cm.LayerProfile(0, "attention", 4.0, client_time_s=0.25,
                              server_time_s=0.001, tau_bytes=1000.0)]
    prob = build_problem(layers, LinkSpec(8e5, 8e5, 0.01), deadline_s=1.0)
    assert latency_of([1], prob) == pytest.approx(0.25)
    assert latency_of([0], prob) == pytest.approx(0.001 + 1000 * 8 / 8e5 + 0.01)


def test_latency_of_requires_real_times():
    with pytest.raises(ValueError, match="real-valued"):
        latency_of([0, 0, 1], instance_b())


def test_length_mismatch_rejected():
    prob = instance_b()
    with pytest.raises(ValueError):
        latency_units_of([0, 1], prob)
    with pytest.raises(ValueError):
        server_load_of([0, 1, 0, 1], prob)


# --- server load and improvement --------------------------------------------------

def test_server_load_cases():
    prob = PlanProblem.from_costs([0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0],
                                  [5.0, 1.0, 5.0], 10)
    assert server_load_of([1, 1, 1], prob) == 0.0
    assert server_load_of([0, 0, 0], prob) == 11.0
    assert server_load_of([1, 1, 0], prob) == 5.0


def test_improvement_over_greedy():
    assert improvement_over_greedy(4.0, 4.0, 10.0) == 0.0
    assert improvement_over_greedy(2.0, 10.0, 12.0) == pytest.approx(66.66666666666667)
    assert improvement_over_greedy(0.0, 12.0, 12.0) == 100.0
    assert improvement_over_greedy(2.0, None, 12.0) is None
    with pytest.raises(ValueError):
        improvement_over_greedy(1.0, 2.0, 0.0)


def test_geometric_deadlines():
    assert geometric_deadlines(8.0, 4) == [8.0, 4.0, 2.0, 1.0]
    with pytest.raises(ValueError):
        geometric_deadlines(0.0, 4)


# --- sweeps -----------------------------------------------------------------------

def test_single_cell_grid_matches_direct_planner():
    grid = small_grid(planners=("dp",))
    cells = run_sweep(grid)
    assert len(cells) == 1
    cell = cells[0]

    spec = cm.build_preset("bert-12", 64)
    layers = cm.profile(spec, grid.client, grid.server)
    prob = build_problem(layers, grid.links[0], 1.0)
    policy = run_planner("dp", prob)
    assert cell.server_load == policy.server_load
    assert cell.feasible == policy.feasible
    assert cell.offload_fraction == policy.client_value / prob.total_r
    assert cell.latency_s == latency_of(policy.pi, prob)


def test_loose_deadline_full_offload():
    grid = small_grid(deadlines_s=(1e6,), planners=("dp", "greedy"))
    cells = run_sweep(grid)
    assert all(c.offload_fraction == 1.0 for c in cells)
    dp_rows = [c for c in cells if c.planner == "dp"]
    assert all(c.improvement_pp == 0.0 for c in dp_rows)


def test_sweep_shape_and_csv_row_count(tmp_path):
    grid = small_grid(deadlines_s=(4.0, 2.0, 1.0, 0.5),
                      links=tuple(LinkSpec(b, b, 0.01) for b in (1e7, 1e8, 1e9)))
    cells = run_sweep(grid)
    per_planner = {}
    for c in cells:
        per_planner[c.planner] = per_planner.get(c.planner, 0) + 1
    assert per_planner == {"dp": 12, "greedy": 12, "all_server": 12, "all_client": 12}
    path = tmp_path / "results.csv"
    write_sweep_csv(path, cells)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 1 + len(cells)


def test_sweep_deterministic_and_jobs_invariant():
    grid = small_grid(deadlines_s=(2.0, 1.0),
                      links=(LinkSpec(1e7, 1e7, 0.01), LinkSpec(1e9, 1e9, 0.01)))
    sequential = sweep_csv_text(run_sweep(grid, jobs=1))
    parallel = sweep_csv_text(run_sweep(grid, jobs=8))
    assert sequential == parallel


def test_sweep_csv_roundtrip(tmp_path):
    grid = small_grid(deadlines_s=(2.0, 1.0))
    cells = run_sweep(grid)
    path = tmp_path / "cells.csv"
    write_sweep_csv(path, cells)
    assert read_sweep_csv(path) == cells


def test_dp_cells_respect_budget_and_match_loads():
    grid = small_grid(models=("bert-12", "cmt-like"), deadlines_s=(2.0, 1.0, 0.5),
                      planners=("dp", "greedy"))
    for cell in run_sweep(grid):
        if not cell.feasible:
            continue
        assert cell.latency_s <= cell.deadline_s
        assert 0.0 <= cell.offload_fraction <= 1.0
        if cell.planner == "dp" and cell.improvement_pp is not None:
            assert cell.improvement_pp >= 0.0


def test_grid_validation():
    with pytest.raises(ValueError, match="non-empty"):
        small_grid(models=())
    with pytest.raises(ValueError, match="strictly decreasing"):
        small_grid(deadlines_s=(1.0, 1.0))


def test_mean_over_groups():
    grid = small_grid(deadlines_s=(2.0, 1.0), planners=("dp",))
    cells = run_sweep(grid)
    means = mean_over(cells, "deadline_s", "offload_fraction", planner="dp")
    assert set(means) == {1.0, 2.0}
    assert means[2.0] >= means[1.0]
