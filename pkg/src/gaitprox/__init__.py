"""Proximity detection from WiFi CSI by fusing adjacent-subcarrier
correlation with an autocorrelation-based gait score."""

from .config import PipelineConfig
from .features import FeatureSample, GaitParams
from .fsm import DetectionEvent, EventKind, FsmConfig, ProximityFsm, ProximityState, run_detector
from .spectral import AcfResult, SpeedEstimate, estimate_speed, wave_number

__all__ = [
    "AcfResult", "DetectionEvent", "EventKind", "FeatureSample", "FsmConfig",
    "GaitParams", "PipelineConfig", "ProximityFsm", "ProximityState",
    "SpeedEstimate", "estimate_speed", "run_detector", "wave_number",
]
__version__ = "0.1.0"
