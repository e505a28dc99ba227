"""Frame-level metrics computed from simulator traces."""

from .fairness import fairness_index, mean_fairness
from .latency import (
    UNBOUNDED,
    CalibrationError,
    FrameEvents,
    LatencyStats,
    call_establishment_latency,
    frame_events,
    frame_table,
    latency_stats,
    mimo_from_cell_readings,
    mimo_from_cells_fast_input,
    mimo_from_cells_slow_input,
    mimo_from_events,
    nfot,
    z_quantile,
)
from .loss import application_goodput, average_flr, frame_loss_ratio
from .procedures import (
    MFBSResult,
    Scenario,
    full_load_throughput,
    latency_ladder,
    lossless_throughput,
    mfbs,
    peak_throughput,
    throughput_levels,
)
