"""Buffer-occupancy-driven adaptive bitrate selection, simulated offline.

The library simulates a video client that picks the rate of each chunk from
the current playback buffer level, plus baselines that pick from estimated
throughput, and measures the resulting rebuffering, video rate, and switching
behavior over capacity traces.
"""
from .algorithms import ALGORITHMS, AbrDecisionContext, AlgorithmProfile, fixed_rate
from .domain import (
    CapacityTrace,
    ConfigError,
    Event,
    EventKind,
    InsufficientCapacity,
    OutageProtectionConfig,
    SessionConfig,
    SessionLog,
    SessionState,
    VideoManifest,
    validate_manifest,
)
from .maps import MapKind, MapSpec, base_map, compute_reservoir, effective_map, eval_map
from .metrics import (
    SessionMetrics,
    SummaryRow,
    aggregate_and_normalize,
    session_metrics,
)
from .simulator import (
    BatchCell,
    BatchResult,
    SessionRecord,
    fluid_oracle,
    run_batch,
    simulate_session,
)
from .traces_io import (
    FormatError,
    generate_outage_trace,
    generate_random_walk_trace,
    generate_vbr_manifest,
    load_capacity_trace,
    load_manifest,
    save_capacity_trace,
    save_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AbrDecisionContext",
    "AlgorithmProfile",
    "BatchCell",
    "BatchResult",
    "CapacityTrace",
    "ConfigError",
    "Event",
    "EventKind",
    "FormatError",
    "InsufficientCapacity",
    "MapKind",
    "MapSpec",
    "OutageProtectionConfig",
    "SessionConfig",
    "SessionLog",
    "SessionMetrics",
    "SessionRecord",
    "SessionState",
    "SummaryRow",
    "VideoManifest",
    "aggregate_and_normalize",
    "base_map",
    "compute_reservoir",
    "effective_map",
    "eval_map",
    "fixed_rate",
    "fluid_oracle",
    "generate_outage_trace",
    "generate_random_walk_trace",
    "generate_vbr_manifest",
    "load_capacity_trace",
    "load_manifest",
    "run_batch",
    "save_capacity_trace",
    "save_manifest",
    "session_metrics",
    "simulate_session",
    "validate_manifest",
    "__version__",
]
