"""Command-line entry point: ``gaitprox {detect,synth,eval,sweep}``.

Exit codes: 0 success, 1 usage error, 2 data error (unparseable input,
invalid configuration or scenario, empty corpus).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import csifile
from .config import PipelineConfig
from .eval import EvalInputError, evaluate, evaluate_corpus, read_ground_truth, \
    write_ground_truth
from .fsm import ConfigError, FsmConfig, read_events, run_detector, write_events, \
    write_state_trace
from .pipeline import FeatureExtractor, write_feature_trace
from .synth import (CsiSimulator, Scene, ScenarioError, Trajectory, preset_scenario,
                    random_static_paths)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("gaitprox")


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def sidecar_path(csi_path: str | Path) -> Path:
    p = Path(csi_path)
    return p.with_name(p.stem + ".gt.jsonl")


def _load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return PipelineConfig.load(path)
    except OSError as exc:
        raise DataError(f"cannot read config: {exc}") from None
    except ConfigError as exc:
        raise DataError("invalid config:\n  " + "\n  ".join(exc.violations)) from None


def features_from_file(path: str | Path, cfg: PipelineConfig, acf_trace=None):
    """Run the feature extractor over a CSI or power file.

    Sample rate and carrier come from the file header.
    """
    with open(path) as fh:
        header = csifile.read_header(fh)
        cfg = replace(cfg, sample_rate=header.sample_rate,
                      center_freq=header.center_freq, bandwidth=header.bandwidth)
        try:
            cfg.validate()
        except ConfigError as exc:
            raise DataError("config does not fit the input:\n  "
                            + "\n  ".join(exc.violations)) from None
        fx = FeatureExtractor(cfg, acf_trace=acf_trace)
        feats = list(fx.run(csifile.iter_rows(fh, header), kind=header.kind))
    return feats, cfg


# detect ---------------------------------------------------------------

def cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    acf_fh = open(args.trace_acf, "w") if args.trace_acf else None
    try:
        feats, cfg = features_from_file(args.input, cfg, acf_fh)
    finally:
        if acf_fh:
            acf_fh.close()
    trace = [] if args.trace_state else None
    events = run_detector(feats, cfg.fsm, trace)
    if args.trace_features:
        with open(args.trace_features, "w") as fh:
            write_feature_trace(fh, feats)
    if args.trace_state:
        with open(args.trace_state, "w") as fh:
            write_state_trace(fh, trace)
    if args.out:
        with open(args.out, "w") as fh:
            write_events(fh, events)
    else:
        write_events(sys.stdout, events)
    log.info("%d events from %d feature samples", len(events), len(feats))
    return EXIT_OK


# synth ----------------------------------------------------------------

def load_scenario(source: str, seed: int):
    """Preset name, or a JSON document (see README for the schema)."""
    if not Path(source).exists():
        return preset_scenario(source, seed=seed)
    try:
        doc = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid scenario JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    if "preset" in doc:
        return preset_scenario(doc["preset"], seed=seed, **doc.get("params", {}))
    try:
        scene_kw = dict(doc.get("scene", {}))
        if "static_paths" in scene_kw:
            scene_kw["static_paths"] = tuple(
                (complex(re, im), tau) for re, im, tau in scene_kw["static_paths"])
        else:
            scene_kw["static_paths"] = tuple(random_static_paths(
                np.random.default_rng(np.random.SeedSequence([seed, 0x5C]))))
        scene = Scene(**scene_kw)
        tr = dict(doc["trajectory"])
        tr["waypoints"] = tuple(tuple(w) for w in tr["waypoints"])
        traj = Trajectory(**tr)
        duration = float(doc["duration"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario: {exc}") from None
    return scene, traj, duration


def cmd_synth(args) -> int:
    try:
        scene, traj, duration = load_scenario(args.scenario, args.seed)
        sim = CsiSimulator(scene, traj, duration, args.seed)
    except (ScenarioError, ValueError) as exc:
        raise DataError(str(exc)) from None
    header = csifile.Header(args.format, scene.num_subcarriers, scene.sample_rate,
                            scene.center_freq, scene.bandwidth)
    out = Path(args.out)
    with open(out, "w") as fh:
        csifile.write_header(fh, header)
        for t, h in sim.chunks():
            if args.format == "csi":
                csifile.write_csi_rows(fh, t, h)
            else:
                csifile.write_power_rows(fh, t, h.real ** 2 + h.imag ** 2)
    with open(sidecar_path(out), "w") as fh:
        write_ground_truth(fh, sim.ground_truth(), (0.0, duration))
    log.info("wrote %d frames to %s", sim.num_frames, out)
    return EXIT_OK


# eval -----------------------------------------------------------------

def _read_pair(events_path, gt_path):
    try:
        with open(events_path) as fh:
            events = read_events(fh)
        with open(gt_path) as fh:
            gt, span = read_ground_truth(fh)
    except OSError as exc:
        raise DataError(str(exc)) from None
    except (ValueError, EvalInputError) as exc:
        raise DataError(str(exc)) from None
    if span is None:
        ends = [e.t for e in events] + [g.exit_t for g in gt]
        span = (0.0, max(ends) if ends else 0.0)
    return events, gt, span


def cmd_eval(args) -> int:
    events, gt, span = _read_pair(args.events, args.ground_truth)
    try:
        report = evaluate(events, gt, span)
    except EvalInputError as exc:
        raise DataError(str(exc)) from None
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    else:
        print(report.to_json())
    return EXIT_OK


# sweep ----------------------------------------------------------------

DEFAULT_GRID = {
    "theta_near": [0.6, 0.65, 0.7],
    "theta_far": [0.4, 0.45, 0.5],
    "theta_gait": [0.03, 0.05, 0.1],
}


def pareto_front(rows: list[dict]) -> list[bool]:
    """Rows not dominated on (IA up, FA down)."""
    def key(r):
        return (r["ia"] if r["ia"] is not None else 0.0,
                -(r["fa"] if r["fa"] is not None else 0.0))
    flags = []
    for r in rows:
        if r["rejected"]:
            flags.append(False)
            continue
        a = key(r)
        dominated = any(
            not o["rejected"] and key(o) != a and key(o)[0] >= a[0] and key(o)[1] >= a[1]
            for o in rows)
        flags.append(not dominated)
    return flags


def sweep(corpus: list[tuple], base: FsmConfig, grid: dict) -> list[dict]:
    """``corpus`` holds ``(features, gt, span)``; one row per grid point."""
    names = list(grid)
    rows = []
    for values in itertools.product(*(grid[n] for n in names)):
        point = dict(zip(names, values))
        row = {**{n: v for n, v in point.items()}, "ia": None, "da": None, "fa": None,
               "tau_mean": None, "rejected": ""}
        try:
            cfg = replace(base, **point).validate()
        except (ConfigError, TypeError) as exc:
            row["rejected"] = str(exc)
            rows.append(row)
            continue
        rep = evaluate_corpus((run_detector(f, cfg), g, s) for f, g, s in corpus)
        row.update(ia=rep.ia, da=rep.da, fa=rep.fa, tau_mean=rep.tau_mean)
        rows.append(row)
    for row, flag in zip(rows, pareto_front(rows)):
        row["pareto"] = flag
    return rows


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    grid = DEFAULT_GRID
    if args.grid:
        try:
            grid = json.loads(Path(args.grid).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read grid: {exc}") from None
        unknown = set(grid) - set(FsmConfig.__dataclass_fields__)
        if unknown or not all(isinstance(v, list) and v for v in grid.values()):
            raise DataError(f"grid must map FSM fields to non-empty lists "
                            f"(unknown: {sorted(unknown)})")
    root = Path(args.corpus)
    files = sorted(p for p in root.glob("*.csv") if sidecar_path(p).exists()) \
        if root.is_dir() else []
    if not files:
        raise DataError(f"no scenario pairs (*.csv + *.gt.jsonl) in {root}")
    corpus = []
    for p in files:
        feats, _ = features_from_file(p, cfg)
        with open(sidecar_path(p)) as fh:
            gt, span = read_ground_truth(fh)
        if span is None:
            span = (0.0, feats[-1].t if feats else 0.0)
        corpus.append((feats, gt, span))
    rows = sweep(corpus, cfg.fsm, grid)
    cols = list(grid) + ["ia", "da", "fa", "tau_mean", "pareto", "rejected"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# wiring ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gaitprox", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="run the detector on a CSI or power file")
    d.add_argument("input")
    d.add_argument("--config")
    d.add_argument("--out", help="events JSON-lines (default: stdout)")
    d.add_argument("--trace-features", metavar="PATH")
    d.add_argument("--trace-acf", metavar="PATH")
    d.add_argument("--trace-state", metavar="PATH")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="simulate a scenario to a CSI file + ground truth")
    s.add_argument("scenario", help="preset name or scenario JSON path")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("csi", "power"), default="csi")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score events against ground truth")
    e.add_argument("events")
    e.add_argument("ground_truth")
    e.add_argument("--out", help="report JSON (default: stdout after the table)")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="grid-search FSM thresholds over a corpus")
    w.add_argument("corpus", help="directory of *.csv files with *.gt.jsonl sidecars")
    w.add_argument("--grid", help="JSON object mapping FSM fields to value lists")
    w.add_argument("--config")
    w.add_argument("--out", help="CSV path (default: stdout)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, csifile.ParseError) as exc:
        where = f"{getattr(args, 'input', '')}: " if isinstance(exc, csifile.ParseError) else ""
        print(f"gaitprox: error: {where}{exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"gaitprox: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
