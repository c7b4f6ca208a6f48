"""Trace-driven simulator for DASH adaptive-bitrate policies.

The package replays bandwidth traces against video manifests that carry a
per-chunk, per-level SSIM table, runs one of four adaptation policies, and
reports rebuffering, switching instability, mean SSIM, and mean bitrate.
"""

from .abr import (
    BbaState,
    Decision,
    FestiveState,
    Observation,
    OsmfState,
    POLICY_IDS,
    PolicyState,
    SbaState,
    bba_decide,
    decide,
    festive_decide,
    make_policy_state,
    osmf_decide,
    sba_decide,
)
from .batch import (
    BatchResult,
    RunSpec,
    RunSpecError,
    emit_comparison_table,
    load_runspec,
    run_batch,
)
from .estimators import (
    SsimVariationHistory,
    ThroughputHistory,
    estimated_bandwidth_kbps,
    mean_ssim_delta,
    record_display_transition,
    record_download,
)
from .manifest import (
    NETFLIX_LADDER_KBPS,
    BitrateLadder,
    ManifestError,
    SaturationProfile,
    VideoManifest,
    load_manifest,
    manifest_from_dict,
    save_manifest,
    synthesize_manifest,
)
from .metrics import (
    AGGREGATE_CSV_COLUMNS,
    AggregateReport,
    SESSION_CSV_COLUMNS,
    SessionReport,
    aggregate,
    aggregates_csv,
    session_metrics,
    sessions_csv,
)
from .simulator import (
    LogFormatError,
    SessionConfig,
    SessionEventLog,
    replay_check,
    replay_diff,
    run_session,
)
from .trace import (
    BandwidthTrace,
    TraceError,
    TraceExhaustedError,
    download_finish_time,
    load_trace,
    save_trace,
    synthesize_oscillating_trace,
    transferred_kilobits,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATE_CSV_COLUMNS",
    "AggregateReport",
    "BandwidthTrace",
    "BatchResult",
    "BbaState",
    "BitrateLadder",
    "Decision",
    "FestiveState",
    "LogFormatError",
    "ManifestError",
    "NETFLIX_LADDER_KBPS",
    "Observation",
    "OsmfState",
    "POLICY_IDS",
    "PolicyState",
    "RunSpec",
    "RunSpecError",
    "SESSION_CSV_COLUMNS",
    "SaturationProfile",
    "SbaState",
    "SessionConfig",
    "SessionEventLog",
    "SessionReport",
    "SsimVariationHistory",
    "ThroughputHistory",
    "TraceError",
    "TraceExhaustedError",
    "VideoManifest",
    "aggregate",
    "aggregates_csv",
    "bba_decide",
    "decide",
    "download_finish_time",
    "emit_comparison_table",
    "estimated_bandwidth_kbps",
    "festive_decide",
    "load_manifest",
    "load_runspec",
    "load_trace",
    "make_policy_state",
    "manifest_from_dict",
    "mean_ssim_delta",
    "osmf_decide",
    "record_display_transition",
    "record_download",
    "replay_check",
    "replay_diff",
    "run_batch",
    "run_session",
    "sba_decide",
    "save_manifest",
    "save_trace",
    "session_metrics",
    "sessions_csv",
    "synthesize_manifest",
    "synthesize_oscillating_trace",
    "transferred_kilobits",
]
