"""Run the detector over simulated scenarios and score the results."""

from __future__ import annotations

from dataclasses import dataclass

from .config import PipelineConfig
from .eval import EvalReport, evaluate_corpus
from .features import FeatureSample
from .fsm import DetectionEvent, FsmConfig, run_detector
from .pipeline import FeatureExtractor
from .synth import CsiSimulator, GroundTruthEvent, preset_scenario


@dataclass
class ScenarioRun:
    name: str
    seed: int
    features: list[FeatureSample]
    ground_truth: list[GroundTruthEvent]
    span: tuple[float, float]

    def detect(self, fsm: FsmConfig) -> list[DetectionEvent]:
        return run_detector(self.features, fsm)


def simulate(name: str, seed: int, cfg: PipelineConfig = PipelineConfig(),
             **params) -> ScenarioRun:
    scene, traj, duration = preset_scenario(name, seed=seed, **params)
    sim = CsiSimulator(scene, traj, duration, seed)
    feats = list(FeatureExtractor(cfg).run(sim.chunks()))
    return ScenarioRun(name, seed, feats, sim.ground_truth(cfg.proximate_radius),
                       (0.0, duration))


def score(runs: list[ScenarioRun], fsm: FsmConfig) -> EvalReport:
    return evaluate_corpus((r.detect(fsm), r.ground_truth, r.span) for r in runs)
