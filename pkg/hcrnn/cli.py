#!/usr/bin/env python3
"""
HCRNN experiment runner

Commands:
- synth:  generate a synthetic depth dataset (depth files + manifest + topology descriptor)
- train:  train a model on a manifest, writing checkpoints and a loss log
- eval:   score a checkpoint (or an infer predictions file) against a manifest
- infer:  predict joints in mm for every frame of a manifest or a single depth file
- bench:  batch-1 inference throughput
- ablate: train and compare the full, two_branch and fc_regression variants

Exit status: 0 success, 2 usage/configuration error, 3 data error, 4 numeric failure.

Usage: python -m hcrnn.cli <command> [options]
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import tensor_core as tc
from .config import DEFAULT_TOPOLOGY, ExperimentConfig, load_environment
from .depth_pipeline import (
    CropSpec, Intrinsics, RawFrame, SyntheticDatasetBuilder, crop_normalize, cube_center,
    denormalize_joints, iter_manifest_records, load_frame, load_manifest, prepare_samples, read_depth,
)
from .errors import HcrnnError, UsageError, ValidationError, exit_code_for
from .hcrnn_model import ModelGraph, load_model, predict, require_topology
from .log_utils import LogMixin, get_logger
from .topology import JointTopology, resolve_topology
from .train_eval import TIMING_ITERATIONS, Trainer, compute_metrics, evaluate, measure_throughput, run_ablation

REFERENCE_FPS = 285
REFERENCE_HARDWARE = "Titan X"


class Experiment(LogMixin):
    """Runs one command inside its output directory"""

    def __init__(self, cfg, command, output_root=None):
        self.cfg = cfg
        self.command = command
        self.output_dir = cfg.resolve_output_dir(command, output_root)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger = get_logger(command, self.output_dir / "logs")
        self.seeds = cfg.seeds()
        self.summary = {"command": command, "outputs": {}, "errors": []}
        tc.set_default_precision(cfg.train.precision)
        cfg.echo(self.output_dir)

    def require_manifest(self):
        if not self.cfg.manifest:
            raise UsageError(f"'{self.command}' needs a manifest (--manifest or 'manifest' in the config)")
        path = Path(self.cfg.manifest)
        if not path.exists():
            raise UsageError(f"manifest not found: {path}")
        return path

    def topology(self):
        return resolve_topology(self.cfg.topology or DEFAULT_TOPOLOGY)

    def check_topology(self, model, manifest=None):
        """Refuse a checkpoint whose topology differs from the requested one or the dataset's descriptor"""
        if self.cfg.topology:
            require_topology(model, resolve_topology(self.cfg.topology))
        descriptor = Path(manifest).parent / "topology.json" if manifest else None
        if descriptor is not None and descriptor.exists():
            require_topology(model, JointTopology.load(descriptor))

    def load_samples(self, topology, center=None):
        manifest = self.require_manifest()
        frames = list(load_manifest(manifest, topology))
        if not frames:
            raise UsageError(f"manifest {manifest} has no frames")
        self.log(f"Loaded {len(frames)} frames from {manifest}")
        return prepare_samples(frames, topology, self.cfg.cube_size, center or self.cfg.center, self.cfg.workers)

    def cmd_synth(self):
        topology = self.topology()
        builder = SyntheticDatasetBuilder(
            topology, seed=self.seeds["synth"], subjects=self.cfg.synth_subjects,
            noise_mm=self.cfg.synth_noise_mm, logger=self.logger,
        )
        manifest = builder.build(self.output_dir, self.cfg.synth_frames)
        self.summary["outputs"]["manifest"] = str(manifest)
        return manifest

    def build_model(self, topology, variant=None):
        rng = np.random.default_rng(self.seeds["init"])
        return ModelGraph.build(self.cfg.model_config(), topology, variant or self.cfg.variant, rng)

    def cmd_train(self):
        topology = self.topology()
        samples = self.load_samples(topology, center="palm")
        model = self.build_model(topology)
        result = Trainer(
            model, self.cfg.train, self.seeds["data"], self.seeds["augment"], self.output_dir, self.logger
        ).train(samples)
        self.summary["outputs"]["checkpoint"] = str(result.checkpoint)
        self.summary["outputs"]["final_loss"] = result.final_loss
        return result

    def read_predictions(self, path):
        predictions = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    record = json.loads(line)
                    if "joints_mm" in record:
                        predictions[record["line"]] = np.asarray(record["joints_mm"], dtype=np.float64).reshape(-1, 3)
        return predictions

    def score_predictions(self, predictions_path, thresholds):
        """Score an infer output file against the manifest's ground truth"""
        manifest = self.require_manifest()
        predictions = self.read_predictions(predictions_path)
        pred, gt = [], []
        for record in iter_manifest_records(manifest):
            if record.joints is None or record.line_number not in predictions:
                self.summary["errors"].append(f"line {record.line_number}: no prediction or no ground truth")
                continue
            pred.append(predictions[record.line_number])
            gt.append(record.joints)
        if not pred:
            raise UsageError(f"no frames of {manifest} have both a prediction and ground truth")
        if pred[0].shape != gt[0].shape:
            raise ValidationError(f"predictions have {len(pred[0])} joints, manifest has {len(gt[0])}")
        return compute_metrics(np.stack(pred), np.stack(gt), thresholds)

    def cmd_eval(self, checkpoint=None, predictions=None, timing_iterations=0):
        thresholds = self.cfg.thresholds
        if predictions:
            report = self.score_predictions(predictions, thresholds)
        else:
            if not checkpoint:
                raise UsageError("eval needs --checkpoint or --predictions")
            model = load_model(checkpoint)
            self.check_topology(model, self.require_manifest())
            samples = self.load_samples(model.topology)
            report = evaluate(model, samples, thresholds, timing_iterations=timing_iterations)
        report.write(self.output_dir)
        self.log(f"✅ Mean 3D error {report.mean_error_mm:.3f} mm over {report.frame_count} frames")
        for threshold in (10.0, 20.0, 40.0):
            if threshold in thresholds:
                self.log(f"  success within {threshold:.0f} mm: {100 * report.success_at(threshold):.1f}%")
        self.summary["outputs"]["mean_error_mm"] = report.mean_error_mm
        return report

    def infer_frame(self, model, frame):
        center = self.cfg.center if frame.joints is not None else "mass"
        spec = CropSpec(center=tuple(cube_center(frame, model.topology, center)), cube_size=self.cfg.cube_size)
        sample = crop_normalize(frame, spec)
        joints_mm = denormalize_joints(predict(model, sample.patch[None])[0], spec)
        return {"joints_mm": [float(v) for v in joints_mm.reshape(-1)], "crop": spec.to_dict()}

    def cmd_infer(self, checkpoint, depth=None, intrinsics=None):
        if not checkpoint:
            raise UsageError("infer needs --checkpoint")
        model = load_model(checkpoint)
        if depth:
            if not intrinsics:
                raise UsageError("--depth needs --intrinsics fx fy cx cy")
            self.check_topology(model)
            camera = Intrinsics.from_list(intrinsics)
            jobs = [(1, str(depth), lambda: RawFrame(read_depth(depth), None, camera, source=str(depth)))]
        else:
            manifest = self.require_manifest()
            self.check_topology(model, manifest)
            jobs = [
                (r.line_number, str(r.depth_path), (lambda r=r: load_frame(r)))
                for r in iter_manifest_records(manifest, model.topology)
            ]

        output = self.output_dir / "predictions.jsonl"
        written = 0
        with open(output, "w", encoding="utf-8") as handle:
            for line_number, source, load in jobs:
                record = {"line": line_number, "source": source}
                try:
                    record.update(self.infer_frame(model, load()))
                    written += 1
                except HcrnnError as error:
                    record["error"] = str(error)
                    self.summary["errors"].append(f"{source}: {error}")
                    self.log(f"⚠ Frame {source} skipped: {error}", "WARNING")
                handle.write(json.dumps(record, sort_keys=True) + "\n")
        self.log(f"✅ {written} predictions written to {output} ({len(self.summary['errors'])} failed frames)")
        self.summary["outputs"]["predictions"] = str(output)
        return output

    def cmd_bench(self, checkpoint=None, iterations=100, warmup=10):
        if iterations < 1:
            raise UsageError(f"--iterations must be at least 1, got {iterations}")
        model = load_model(checkpoint) if checkpoint else self.build_model(self.topology())
        size = model.config.input_size
        rng = np.random.default_rng(self.seeds["data"])
        patches = rng.uniform(-1.0, 1.0, size=(8, 1, size, size)).astype(model.precision)
        self.log(f"Benchmarking {model.variant} model: {warmup} warmup + {iterations} timed batch-1 passes")
        stats = measure_throughput(model, patches, iterations, warmup)
        report = {
            **stats,
            "variant": model.variant,
            "parameters": model.parameter_count(),
            "precision": model.precision,
            "reference": f"{REFERENCE_FPS} fps on a {REFERENCE_HARDWARE} (published figure, hardware-bound, not compared)",
        }
        (self.output_dir / "bench_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        self.log(f"✅ {stats['fps']:.1f} fps | latency mean {stats['latency_mean_ms']:.2f} ms, "
                 f"p50 {stats['latency_p50_ms']:.2f} ms, p99 {stats['latency_p99_ms']:.2f} ms")
        self.log(f"Reference: {report['reference']}")
        return report

    def cmd_ablate(self, variants=None):
        topology = self.topology()
        samples = self.load_samples(topology, center="palm")
        table = run_ablation(
            samples, self.cfg.train, self.cfg.model_config(), topology, self.seeds,
            variants=tuple(variants) if variants else ("full", "two_branch", "fc_regression"),
            output_dir=self.output_dir, logger=self.logger,
        )
        with pd.option_context("display.width", 160):
            self.log("Ablation results:\n" + table.to_string(index=False))
        return table


def build_parser():
    parser = argparse.ArgumentParser(prog="hcrnn", description="HCRNN 3D hand pose toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--output-dir", help="output directory (default: $HCRNN_OUTPUT_ROOT/<command>-seed<seed>)")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--topology", help="msra, icvl, nyu or a topology descriptor .json")
    common.add_argument("--model-size", choices=["full", "tiny"])
    common.add_argument("--precision", choices=["float32", "float64"])
    common.add_argument("--workers", type=int, help="threads for frame preprocessing")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--manifest", help="JSON Lines frame manifest")
    data.add_argument("--cube-size", type=float, help="crop cube edge in mm")
    data.add_argument("--center", choices=["palm", "mass"], help="cube centre source")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--lr", type=float, dest="lr0")
    training.add_argument("--batch-size", type=int)
    training.add_argument("--weight-decay", type=float)
    training.add_argument("--epochs", type=int)
    training.add_argument("--lam", type=float, help="local loss weight")
    training.add_argument("--max-iterations", type=int)
    training.add_argument("--checkpoint-every", type=int)
    training.add_argument("--no-augment", action="store_false", dest="augment", default=None)

    synth = subparsers.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth.add_argument("--frames", type=int, dest="synth_frames")
    synth.add_argument("--subjects", type=int, dest="synth_subjects")
    synth.add_argument("--noise-mm", type=float, dest="synth_noise_mm")

    train = subparsers.add_parser("train", parents=[common, data, training], help="train a model")
    train.add_argument("--variant", choices=["full", "two_branch", "fc_regression"])

    evaluate_ = subparsers.add_parser("eval", parents=[common, data], help="evaluate a checkpoint")
    evaluate_.add_argument("--checkpoint")
    evaluate_.add_argument("--predictions", help="score an infer predictions.jsonl instead of a checkpoint")
    evaluate_.add_argument("--thresholds", type=float, nargs="+", help="success thresholds in mm")
    evaluate_.add_argument("--timing-iterations", type=int, default=TIMING_ITERATIONS,
                           help="timed batch-1 passes for the throughput figures (0 skips timing)")

    infer = subparsers.add_parser("infer", parents=[common, data], help="predict joints")
    infer.add_argument("--checkpoint")
    infer.add_argument("--depth", help="single depth file (.png or .dpt)")
    infer.add_argument("--intrinsics", type=float, nargs=4, metavar=("FX", "FY", "CX", "CY"))

    bench = subparsers.add_parser("bench", parents=[common], help="inference throughput")
    bench.add_argument("--checkpoint")
    bench.add_argument("--variant", choices=["full", "two_branch", "fc_regression"])
    bench.add_argument("--iterations", type=int, default=100)
    bench.add_argument("--warmup", type=int, default=10)

    ablate = subparsers.add_parser("ablate", parents=[common, data, training], help="compare variants")
    ablate.add_argument("--variants", nargs="+", choices=["full", "two_branch", "fc_regression"])
    return parser


CONFIG_FLAGS = (
    "output_dir", "seed", "topology", "model_size", "workers", "manifest", "cube_size", "center",
    "variant", "synth_frames", "synth_subjects", "synth_noise_mm", "thresholds",
)
TRAIN_FLAGS = (
    "lr0", "batch_size", "weight_decay", "epochs", "lam", "max_iterations", "checkpoint_every", "augment", "precision",
)


def resolve_config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    values = vars(args)
    overrides = {name: values.get(name) for name in CONFIG_FLAGS}
    train_overrides = {name: values.get(name) for name in TRAIN_FLAGS}
    return cfg.with_overrides(overrides, train_overrides)


def run(args, output_root=None):
    cfg = resolve_config(args)
    experiment = Experiment(cfg, args.command, output_root)
    experiment.log(f"=== hcrnn {args.command} (seed {cfg.seed}) -> {experiment.output_dir} ===")
    if args.command == "synth":
        return experiment.cmd_synth()
    if args.command == "train":
        return experiment.cmd_train()
    if args.command == "eval":
        return experiment.cmd_eval(args.checkpoint, args.predictions, args.timing_iterations)
    if args.command == "infer":
        return experiment.cmd_infer(args.checkpoint, args.depth, args.intrinsics)
    if args.command == "bench":
        return experiment.cmd_bench(args.checkpoint, args.iterations, args.warmup)
    return experiment.cmd_ablate(args.variants)


def main(argv=None):
    """Main execution function; returns the process exit status"""
    output_root = load_environment()
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_logger("cli")
    try:
        run(args, output_root)
    except (HcrnnError, FileNotFoundError, PermissionError) as error:
        logger.error(f"❌ {type(error).__name__}: {error}")
        return exit_code_for(error)
    return 0


if __name__ == "__main__":
    sys.exit(main())
