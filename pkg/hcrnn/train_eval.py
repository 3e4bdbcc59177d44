"""
Training and evaluation engine.

- Adam with bias correction and decoupled weight decay, lr = lr0 * 0.96^floor(t / 2000)
- Trainer: seeded mini-batches, online augmentation, loss log, periodic checkpoints
- evaluate: mean 3D joint error, per-joint error, success-frame curve (a frame succeeds
  when its WORST joint is within the threshold), batch-1 throughput
- run_ablation: trains full / two_branch / fc_regression identically and compares them
"""

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import tensor_core as tc
from .depth_pipeline import augment, denormalize_joints, stack_samples
from .errors import ConfigurationError, DimensionError, NonFiniteError, UsageError, ValidationError
from .hcrnn_model import (
    VARIANTS, ModelGraph, PoseOutput, forward, parameter_count, predict, save_model, total_loss,
)
from .log_utils import LogMixin

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_THRESHOLDS = tuple(float(t) for t in range(0, 82, 2))
PARITY_TOLERANCE = 0.10
TIMING_ITERATIONS = 20
TIMING_WARMUP = 5
# mean error (mm) of each variant on NYU at full scale; context only
REFERENCE_NYU_MM = {"full": 9.37, "two_branch": 9.88, "fc_regression": 10.05}


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    batch_size: int = 32
    weight_decay: float = 1e-5
    lr_decay: float = 0.96
    lr_decay_steps: int = 2000
    epochs: int = 120
    lam: float = 1.0
    seed: int = 0
    precision: str = "float32"
    max_iterations: int = None
    augment: bool = True
    checkpoint_every: int = 2000

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("lr0", "batch_size", "lr_decay", "lr_decay_steps", "epochs"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"train config '{name}' must be positive, got {getattr(self, name)}")
        for name in ("weight_decay", "lam", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"train config '{name}' must not be negative, got {getattr(self, name)}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.precision not in tc.PRECISIONS:
            raise ConfigurationError(f"unknown precision '{self.precision}'")

    @classmethod
    def from_dict(cls, document):
        unknown = set(document) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**document)

    def to_dict(self):
        return asdict(self)


# --- Optimizer ---

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def learning_rate(t, cfg):
    return cfg.lr0 * cfg.lr_decay ** (t // cfg.lr_decay_steps)


def adam_step(params, grads, state, t, cfg):
    """One Adam update of every tensor in ``params`` (name -> Tensor); returns the lr used"""
    if t < 1:
        raise UsageError(f"Adam step index must start at 1, got {t}")
    lr = learning_rate(t, cfg)
    correction1 = 1.0 - ADAM_BETA1 ** t
    correction2 = 1.0 - ADAM_BETA2 ** t
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != param.shape:
            raise DimensionError(f"gradient for '{name}' has shape {grad.shape}, parameter {param.shape}")
        m = state.m.get(name, np.zeros(param.shape))
        v = state.v.get(name, np.zeros(param.shape))
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        state.m[name], state.v[name] = m, v

        value = param.data.astype(np.float64)
        if cfg.weight_decay:
            value = value - lr * cfg.weight_decay * value
        value = value - lr * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
        param.assign_(value)
    state.t = t
    return lr


# --- Training ---

@dataclass
class TrainResult:
    model: ModelGraph
    loss_log: pd.DataFrame
    checkpoint: Path = None

    @property
    def final_loss(self):
        return float(self.loss_log["loss"].iloc[-1]) if len(self.loss_log) else float("nan")


class Trainer(LogMixin):
    """End-to-end training of one model on a list of HandSamples"""

    def __init__(self, model, cfg, data_seed=0, augment_seed=0, output_dir=None, logger=None, log_every=50):
        self.model = model
        self.cfg = cfg
        self.data_rng = np.random.default_rng(data_seed)
        self.augment_rng = np.random.default_rng(augment_seed)
        self.output_dir = Path(output_dir) if output_dir else None
        self.logger = logger
        self.log_every = log_every
        self.state = AdamState()
        self.records = []

    def _batches(self, count):
        size = min(self.cfg.batch_size, count)
        order = self.data_rng.permutation(count)
        for start in range(0, count, size):
            batch = order[start:start + size]
            if len(batch) >= 2:
                yield batch

    def _batch_arrays(self, samples, indices):
        chosen = [samples[i] for i in indices]
        if self.cfg.augment:
            chosen = [augment(sample, self.augment_rng) for sample in chosen]
        return stack_samples(chosen)

    def step(self, patches, joints, t):
        """Forward, loss, backward and Adam update for one mini-batch; returns (loss, lr)"""
        model = self.model
        targets = PoseOutput.from_joints(joints, model.topology, dtype=model.precision)
        model.zero_grad()
        with tc.Tape():
            prediction = forward(model, tc.Tensor(patches, dtype=model.precision), training=True)
            loss = total_loss(prediction, targets, self.cfg.lam)
        tc.backward(loss)
        grads = {}
        for name, param in model.parameters.items():
            if not np.all(np.isfinite(param.grad)):
                raise NonFiniteError("backward", f"first non-finite gradient in '{name}'")
            grads[name] = param.grad
        lr = adam_step(model.parameters, grads, self.state, t, self.cfg)
        return loss.item(), lr

    def save_checkpoint(self, name):
        if self.output_dir is None:
            return None
        return save_model(self.model, self.output_dir / name)

    def train(self, samples):
        samples = list(samples)
        if len(samples) < 2:
            raise ConfigurationError("training needs at least 2 samples (batch normalization uses batch statistics)")
        topology = self.model.topology
        if any(s.joints_norm is None or len(s.joints_norm) != topology.joint_count for s in samples):
            raise ValidationError(
                f"training samples must carry {topology.joint_count} joints for topology '{topology.name}'"
            )

        cfg = self.cfg
        self.log(
            f"Training {self.model.variant} model ({self.model.parameter_count()} parameters) on "
            f"{len(samples)} samples: lr0={cfg.lr0}, batch={cfg.batch_size}, epochs={cfg.epochs}, lambda={cfg.lam}"
        )
        t = 0
        try:
            for epoch in range(1, cfg.epochs + 1):
                for indices in self._batches(len(samples)):
                    if cfg.max_iterations is not None and t >= cfg.max_iterations:
                        break
                    t += 1
                    patches, joints = self._batch_arrays(samples, indices)
                    loss, lr = self.step(patches, joints, t)
                    self.records.append({"iteration": t, "epoch": epoch, "loss": loss, "lr": lr})
                    if t == 1 or t % self.log_every == 0:
                        self.log(f"  iteration {t} (epoch {epoch}): loss {loss:.6f}, lr {lr:.3e}")
                    if cfg.checkpoint_every and t % cfg.checkpoint_every == 0:
                        self.save_checkpoint(f"checkpoints/iter_{t:06d}.ckpt")
                if cfg.max_iterations is not None and t >= cfg.max_iterations:
                    break
        except NonFiniteError as error:
            self.log(f"❌ Training aborted at iteration {t + 1}: {error}", "ERROR")
            self.write_loss_log()
            raise

        checkpoint = self.save_checkpoint("model.ckpt")
        loss_log = self.write_loss_log()
        if len(loss_log):
            self.log(f"✅ Training finished after {t} iterations: loss {loss_log['loss'].iloc[0]:.6f} "
                     f"-> {loss_log['loss'].iloc[-1]:.6f}")
        return TrainResult(self.model, loss_log, checkpoint)

    def write_loss_log(self):
        loss_log = pd.DataFrame(self.records, columns=["iteration", "epoch", "loss", "lr"])
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            loss_log.to_json(self.output_dir / "loss_log.jsonl", orient="records", lines=True)
        return loss_log


def train(model, samples, cfg, data_seed=0, augment_seed=0, output_dir=None, logger=None):
    return Trainer(model, cfg, data_seed, augment_seed, output_dir, logger).train(samples)


# --- Evaluation ---

@dataclass
class EvalReport:
    mean_error_mm: float
    per_joint_error_mm: np.ndarray
    success_curve: list  # (threshold_mm, fraction)
    frame_count: int
    joint_names: list = None
    throughput: dict = None

    def success_at(self, threshold):
        for value, fraction in self.success_curve:
            if value == threshold:
                return fraction
        raise UsageError(f"threshold {threshold} mm is not on the success curve")

    def summary(self):
        record = {"record": "summary", "mean_error_mm": float(self.mean_error_mm), "frames": int(self.frame_count)}
        if self.throughput:
            record.update({k: float(v) for k, v in self.throughput.items()})
        return record

    def per_joint_table(self):
        names = self.joint_names or [f"joint_{i}" for i in range(len(self.per_joint_error_mm))]
        return pd.DataFrame({"joint": names, "mean_error_mm": self.per_joint_error_mm})

    def success_table(self):
        return pd.DataFrame(self.success_curve, columns=["threshold_mm", "fraction"])

    def write(self, output_dir):
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        records = [self.summary()]
        records += [{"record": "joint", **row} for row in self.per_joint_table().to_dict(orient="records")]
        records += [{"record": "success", **row} for row in self.success_table().to_dict(orient="records")]
        pd.DataFrame(records).to_json(output_dir / "eval_report.jsonl", orient="records", lines=True)
        self.per_joint_table().to_csv(output_dir / "per_joint_error.csv", index=False)
        self.success_table().to_csv(output_dir / "success_curve.csv", index=False)
        return output_dir


def compute_metrics(pred_mm, gt_mm, thresholds=DEFAULT_THRESHOLDS, joint_names=None):
    """Errors of F×T×3 predictions against ground truth, both in mm"""
    pred_mm = np.asarray(pred_mm, dtype=np.float64)
    gt_mm = np.asarray(gt_mm, dtype=np.float64)
    if pred_mm.shape != gt_mm.shape or pred_mm.ndim != 3 or pred_mm.shape[-1] != 3:
        raise DimensionError(f"metric inputs must both be F×T×3, got {pred_mm.shape} and {gt_mm.shape}")
    if len(pred_mm) == 0:
        raise UsageError("cannot evaluate an empty set of frames")
    errors = np.linalg.norm(pred_mm - gt_mm, axis=-1)
    per_joint = errors.mean(axis=0)
    worst = errors.max(axis=1)
    curve = [(float(t), float(np.mean(worst <= t))) for t in sorted(thresholds)]
    return EvalReport(
        mean_error_mm=float(per_joint.mean()),
        per_joint_error_mm=per_joint,
        success_curve=curve,
        frame_count=len(pred_mm),
        joint_names=list(joint_names) if joint_names is not None else None,
    )


def measure_throughput(model, patches, iterations=100, warmup=10):
    """Batch-1 forward passes: fps and per-frame latency percentiles (ms)"""
    if iterations < 1:
        raise UsageError(f"iterations must be at least 1, got {iterations}")
    patches = np.asarray(patches)
    for i in range(warmup):
        predict(model, patches[i % len(patches)][None], batch_size=1)
    latencies = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter()
        predict(model, patches[i % len(patches)][None], batch_size=1)
        latencies[i] = time.perf_counter() - start
    latencies_ms = latencies * 1000.0
    return {
        "fps": float(iterations / latencies.sum()),
        "latency_mean_ms": float(latencies_ms.mean()),
        "latency_p50_ms": float(np.percentile(latencies_ms, 50)),
        "latency_p99_ms": float(np.percentile(latencies_ms, 99)),
        "iterations": iterations,
    }


def evaluate(model, samples, thresholds=DEFAULT_THRESHOLDS, timing_iterations=TIMING_ITERATIONS,
             warmup=TIMING_WARMUP):
    """Predict every sample, denormalize to mm and score against the sample's joints

    Batch-1 throughput is measured after ``warmup`` passes; ``timing_iterations=0`` skips it.
    """
    samples = list(samples)
    if not samples:
        raise UsageError("evaluate needs at least one sample")
    patches, joints_norm = stack_samples(samples)
    if joints_norm is None:
        raise ValidationError("evaluation samples carry no ground-truth joints")
    if joints_norm.shape[1] != model.topology.joint_count:
        raise ValidationError(
            f"samples have {joints_norm.shape[1]} joints, model topology '{model.topology.name}' "
            f"expects {model.topology.joint_count}"
        )
    pred_norm = predict(model, patches)
    pred_mm = np.stack([denormalize_joints(p, s.crop) for p, s in zip(pred_norm, samples)])
    gt_mm = np.stack([denormalize_joints(s.joints_norm, s.crop) for s in samples])
    report = compute_metrics(pred_mm, gt_mm, thresholds, model.topology.joint_names)
    if timing_iterations:
        report.throughput = measure_throughput(model, patches, timing_iterations, warmup)
    return report


# --- Ablation ---

class AblationRunner(LogMixin):
    """Trains each variant on the same samples with the same seeds and compares them"""

    def __init__(self, model_config, topology, cfg, seeds, output_dir=None, logger=None):
        self.model_config = model_config
        self.topology = topology
        self.cfg = cfg
        self.seeds = seeds
        self.output_dir = Path(output_dir) if output_dir else None
        self.logger = logger
        self.summary = {"variants": {}, "errors": []}

    def parity(self):
        full = parameter_count(self.model_config, self.topology, "full")
        return {v: parameter_count(self.model_config, self.topology, v) / full for v in VARIANTS}

    def run_variant(self, variant, samples, eval_samples):
        model = ModelGraph.build(self.model_config, self.topology, variant, np.random.default_rng(self.seeds["init"]))
        variant_dir = self.output_dir / variant if self.output_dir else None
        self.log(f"Variant {variant}: {model.parameter_count()} parameters")
        result = Trainer(model, self.cfg, self.seeds["data"], self.seeds["augment"], variant_dir, self.logger).train(samples)
        report = evaluate(model, eval_samples, timing_iterations=0)
        if variant_dir is not None:
            report.write(variant_dir)
        return model, result, report

    def run(self, samples, eval_samples=None, variants=VARIANTS):
        eval_samples = eval_samples if eval_samples is not None else samples
        ratios = self.parity()
        if "two_branch" in variants and abs(ratios["two_branch"] - 1.0) > PARITY_TOLERANCE:
            self.log(f"❌ two_branch parameter ratio {ratios['two_branch']:.3f} outside ±10% of full", "ERROR")
            raise ConfigurationError(
                f"two_branch variant has {ratios['two_branch']:.3f}x the parameters of full (limit ±10%)"
            )
        rows = []
        for variant in variants:
            model, result, report = self.run_variant(variant, samples, eval_samples)
            rows.append({
                "variant": variant,
                "parameter_count": model.parameter_count(),
                "mean_error_mm": report.mean_error_mm,
                "final_loss": result.final_loss,
                "parity_ratio": ratios[variant],
                "parity_ok": abs(ratios[variant] - 1.0) <= PARITY_TOLERANCE,
                "reference_nyu_mm": REFERENCE_NYU_MM[variant],
            })
            self.summary["variants"][variant] = report.mean_error_mm
            self.log(f"  {variant}: mean error {report.mean_error_mm:.2f} mm")

        table = pd.DataFrame(rows)
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            table.to_csv(self.output_dir / "ablation.csv", index=False)
        if {"full", "fc_regression"} <= set(table["variant"]):
            errors = table.set_index("variant")["mean_error_mm"]
            marker = "✅" if errors["full"] <= errors["fc_regression"] else "⚠"
            self.log(f"{marker} full {errors['full']:.2f} mm vs fc_regression {errors['fc_regression']:.2f} mm")
        return table


def run_ablation(samples, cfg, model_config, topology, seeds, variants=VARIANTS, output_dir=None,
                 eval_samples=None, logger=None):
    runner = AblationRunner(model_config, topology, cfg, seeds, output_dir, logger)
    return runner.run(samples, eval_samples, variants)
