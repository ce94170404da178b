"""Sleep interval estimation from WiFi association logs."""

from .config import RunConfig, load_config, parse_config
from .ensemble import EstimateStatus, SleepEstimate, infer_user_day
from .estimators import ChangePointDetector, SleepEnsemble
from .evaluate import ConfusionStats, slot_confusion, time_diff_stats
from .inference import ModelKind, PriorSpec, SamplerConfig, run_mh
from .ingest import WifiEvent, parse_log_line
from .oracle import exact_map
from .preprocess import DormInterval, SlotSeries, bin_events
from .synth import SynthProfile, generate_trace, inject_noise

__version__ = "0.1.0"

__all__ = [
    "ChangePointDetector", "ConfusionStats", "DormInterval", "EstimateStatus", "ModelKind",
    "PriorSpec", "RunConfig", "SamplerConfig", "SleepEnsemble", "SleepEstimate", "SlotSeries",
    "SynthProfile", "WifiEvent", "bin_events", "exact_map", "generate_trace", "infer_user_day",
    "inject_noise", "load_config", "parse_config", "parse_log_line", "run_mh", "slot_confusion",
    "time_diff_stats",
]
