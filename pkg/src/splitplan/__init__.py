"""splitplan: client/server layer placement for transformer inference.

The pipeline has four stages, each usable as a library or via the CLI:

1. ``cost_model``     - analytic per-layer FLOP/memory/boundary-size profiles.
2. ``problem``        - link model, deadline integerization, plan instances.
3. ``planner``        - optimal DP placement, greedy/trivial baselines, and an
                        exhaustive oracle for verification.
4. ``evaluator``      - latency/load evaluation, improvement metrics, sweeps.
5. ``throughput_sim`` - FIFO queueing simulation of server throughput.
6. ``report``         - matplotlib figures from the CSV outputs.
"""

__version__ = "0.1.0"

from .cost_model import (  # noqa: F401
    DeviceSpec,
    LayerKind,
    LayerProfile,
    LayerSpec,
    ModelSpec,
    PRESET_NAMES,
    build_preset,
    calibrate,
    flop_of_layer,
    memory_of_layer,
    output_bytes,
    profile,
)
from .problem import (  # noqa: F401
    LinkSpec,
    PlanProblem,
    build_problem,
    integerize,
    transfer_times,
)
from .planner import (  # noqa: F401
    PlacementPolicy,
    plan_dp,
    plan_greedy,
    plan_oracle,
    plan_trivial,
)
from .evaluator import (  # noqa: F401
    SweepCell,
    SweepGrid,
    improvement_over_greedy,
    latency_of,
    run_sweep,
    server_load_of,
)
from .throughput_sim import (  # noqa: F401
    SimConfig,
    SimResult,
    compare_variants,
    generate_stream,
    simulate,
)
