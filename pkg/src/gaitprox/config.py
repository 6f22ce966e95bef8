"""Pipeline configuration as one JSON document.

Schema (all keys optional; omitted keys take the defaults shown by
``PipelineConfig().to_dict()``)::

    {
      "sample_rate": 1500, "downsample_to": 30,
      "center_freq": 5.18e9, "bandwidth": 4e7,
      "hampel": {"window": 31, "n_sigmas": 3.0},
      "acf": {"window_s": 0.3, "hop_s": 0.0333, "max_lag_s": 0.1,
              "motion_floor": 0.05},
      "fp_window_s": 1.5, "feature_rate": 10, "slope_window_s": 3.0,
      "gait_window_s": 2.0,
      "gait": {"mean_speed": 1.34, "std_speed": 0.37, "c_min": 0.5, "c_max": 1.5},
      "fsm": {"theta_near": 0.65, ...},
      "proximate_radius": 1.5
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .features import GaitParams
from .fsm import ConfigError, FsmConfig


@dataclass(frozen=True)
class HampelConfig:
    window: int = 31
    n_sigmas: float = 3.0


@dataclass(frozen=True)
class AcfConfig:
    window_s: float = 0.3
    hop_s: float = 1.0 / 30.0
    max_lag_s: float = 0.1
    motion_floor: float = 0.05


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate: float = 1500.0
    downsample_to: float = 30.0
    center_freq: float = 5.18e9
    bandwidth: float = 40e6
    hampel: HampelConfig = field(default_factory=HampelConfig)
    acf: AcfConfig = field(default_factory=AcfConfig)
    fp_window_s: float = 1.5
    feature_rate: float = 10.0
    slope_window_s: float = 3.0
    gait_window_s: float = 2.0
    gait: GaitParams = field(default_factory=GaitParams)
    fsm: FsmConfig = field(default_factory=FsmConfig)
    proximate_radius: float = 1.5

    # derived sample counts -------------------------------------------
    @property
    def downsample_factor(self) -> int:
        return int(round(self.sample_rate / self.downsample_to))

    @property
    def acf_window(self) -> int:
        return int(round(self.acf.window_s * self.sample_rate))

    @property
    def acf_hop(self) -> int:
        return max(1, int(round(self.acf.hop_s * self.sample_rate)))

    @property
    def acf_max_lag(self) -> int:
        return int(round(self.acf.max_lag_s * self.sample_rate))

    @property
    def fp_window(self) -> int:
        return int(round(self.fp_window_s * self.downsample_to))

    @property
    def feature_decimation(self) -> int:
        """Proximity samples per feature sample."""
        return max(1, int(round(self.downsample_to / self.feature_rate)))

    def violations(self) -> list[str]:
        out = []
        positive = {
            "sample_rate": self.sample_rate, "downsample_to": self.downsample_to,
            "center_freq": self.center_freq, "bandwidth": self.bandwidth,
            "hampel.n_sigmas": self.hampel.n_sigmas, "acf.window_s": self.acf.window_s,
            "acf.hop_s": self.acf.hop_s, "acf.max_lag_s": self.acf.max_lag_s,
            "fp_window_s": self.fp_window_s, "feature_rate": self.feature_rate,
            "slope_window_s": self.slope_window_s, "gait_window_s": self.gait_window_s,
            "gait.std_speed": self.gait.std_speed, "proximate_radius": self.proximate_radius,
        }
        for name, v in positive.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) \
                    or not math.isfinite(v) or v <= 0:
                out.append(f"{name} must be a positive finite number, got {v!r}")
        if out:
            return out + self.fsm.violations()
        ratio = self.sample_rate / self.downsample_to
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            out.append(f"downsample_to ({self.downsample_to}) must divide "
                       f"sample_rate ({self.sample_rate})")
        w = self.hampel.window
        if not isinstance(w, int) or w < 3 or w % 2 == 0:
            out.append(f"hampel.window must be an odd integer >= 3, got {w!r}")
        if self.acf_max_lag < 2:
            out.append("acf.max_lag_s must span at least 2 samples")
        if 2 * self.acf_max_lag > self.acf_window:
            out.append("acf.window_s must be at least twice acf.max_lag_s")
        if self.fp_window < 10:
            out.append("fp_window_s must cover at least 10 downsampled samples")
        if not self.gait.c_min < self.gait.c_max:
            out.append("gait.c_min must be below gait.c_max")
        if self.gait_window_s < 2.0:
            out.append("gait_window_s must be at least 2 s")
        if not 0 <= self.acf.motion_floor < 1:
            out.append("acf.motion_floor must lie in [0, 1)")
        return out + self.fsm.violations()

    def validate(self) -> "PipelineConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError(["config must be a JSON object"])
        nested = {"hampel": HampelConfig, "acf": AcfConfig, "gait": GaitParams,
                  "fsm": FsmConfig}
        errors = []
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, val in d.items():
            if key not in known:
                errors.append(f"unknown key {key!r}")
            elif key in nested:
                sub = nested[key]
                sub_known = {f.name for f in fields(sub)}
                if not isinstance(val, dict):
                    errors.append(f"{key} must be an object")
                    continue
                extra = sorted(set(val) - sub_known)
                errors += [f"unknown key {key}.{k!r}" for k in extra]
                try:
                    kwargs[key] = sub(**{k: v for k, v in val.items() if k in sub_known})
                except (ValueError, TypeError) as exc:
                    errors.append(f"{key}: {exc}")
            else:
                kwargs[key] = val
        if errors:
            raise ConfigError(errors)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON: {exc}"]) from None
        return cls.from_dict(data)
