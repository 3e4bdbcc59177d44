"""
Hierarchical convolutional recurrent hand-pose network.

Structure:
- encoder: five full pre-activation residual blocks (BN -> ReLU -> conv, twice) with a
  1x1 convolution shortcut, average pooling after blocks 1-3 (96 -> 48 -> 24 -> 12)
- six branches on the shared encoder output, each starting with its own
  3x3 conv -> BN -> ReLU -> global average pooling head:
    palm:    FC+ReLU layers, then a linear regression of the P palm joints
    fingers: N distinct FC+ReLU layers give one feature per joint, a GRU walks them
             MCP -> tip and a shared readout regresses each joint
- ensemble: palm feature and the final hidden state of every finger are concatenated,
  then FC(1024)+ReLU and a linear regression of all T joints

Ablation variants:
- two_branch:    palm branch + one finger branch whose recurrence emits all five
                 fingers per step; its width is solved for parameter parity with `full`
- fc_regression: every finger branch regresses its joints with FC layers, no recurrence

Checkpoint layout: b"HCRNNCK1", u64 little-endian metadata length, UTF-8 JSON metadata
(sorted keys), then the little-endian raw arrays in manifest order.
"""

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import tensor_core as tc
from .errors import CheckpointFormatError, ConfigurationError, DimensionError, ValidationError
from .recurrent import GruParams, gru_unroll
from .topology import JointTopology

logger = logging.getLogger(__name__)

VARIANTS = ("full", "two_branch", "fc_regression")
CHECKPOINT_MAGIC = b"HCRNNCK1"
CHECKPOINT_VERSION = 1
SMOOTH_L1_KNEE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class ModelConfig:
    encoder_channels: tuple = (64, 64, 128, 256, 256)
    branch_width: int = 256
    ensemble_width: int = 1024
    palm_hidden_layers: int = 2
    two_branch_width: int = None
    input_size: int = 96

    def __post_init__(self):
        if len(self.encoder_channels) != 5:
            raise ConfigurationError(f"encoder needs 5 channel widths, got {list(self.encoder_channels)}")
        if min(self.encoder_channels) < 1 or self.branch_width < 1 or self.ensemble_width < 1:
            raise ConfigurationError("model widths must be positive")
        if self.palm_hidden_layers < 1:
            raise ConfigurationError("palm branch needs at least one hidden layer")
        if self.input_size % 8:
            raise ConfigurationError(f"input size {self.input_size} must be divisible by 8")

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def tiny(cls):
        return cls(encoder_channels=(8, 8, 16, 32, 32), branch_width=16, ensemble_width=64)

    @classmethod
    def from_dict(cls, document):
        document = dict(document)
        unknown = set(document) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {sorted(unknown)}")
        if "encoder_channels" in document:
            document["encoder_channels"] = tuple(document["encoder_channels"])
        return cls(**document)

    def to_dict(self):
        document = asdict(self)
        document["encoder_channels"] = list(self.encoder_channels)
        return document


@dataclass
class PoseOutput:
    """Batched predictions (or targets) in normalized cube coordinates"""

    global_joints: tc.Tensor  # B×T×3
    palm_joints: tc.Tensor  # B×P×3
    finger_joints: dict = field(default_factory=dict)  # name -> B×N_k×3

    @classmethod
    def from_joints(cls, joints, topology, dtype=None):
        """Split B×T×3 annotated joints into the branch targets"""
        joints = np.asarray(joints)
        if joints.ndim == 2:
            joints = joints[None]
        if joints.shape[1:] != (topology.joint_count, 3):
            raise DimensionError(f"joints shape {joints.shape[1:]} does not match {topology.joint_count}×3")
        return cls(
            global_joints=tc.Tensor(joints, dtype=dtype),
            palm_joints=tc.Tensor(joints[:, list(topology.palm)], dtype=dtype),
            finger_joints={f.name: tc.Tensor(joints[:, list(f.joints)], dtype=dtype) for f in topology.fingers},
        )


# --- Parameter tables ---

def _conv(table, prefix, c_out, c_in, k):
    table[f"{prefix}.weight"] = (c_out, c_in, k, k)
    table[f"{prefix}.bias"] = (c_out,)


def _bn(table, prefix, channels):
    table[f"{prefix}.gamma"] = (channels,)
    table[f"{prefix}.beta"] = (channels,)


def _fc(table, prefix, d_out, d_in):
    table[f"{prefix}.weight"] = (d_out, d_in)
    table[f"{prefix}.bias"] = (d_out,)


def _head(table, prefix, c_in, width):
    _conv(table, f"{prefix}.head.conv", width, c_in, 3)
    _bn(table, f"{prefix}.head.bn", width)


def _gru(table, prefix, d_in, d_h, d_out):
    for name, shape in GruParams.shapes(d_in, d_h, d_out).items():
        table[f"{prefix}.gru.{name}"] = shape


def _palm_tables(table, config, topology):
    width = config.branch_width
    _head(table, "palm", config.encoder_channels[-1], width)
    for n in range(1, config.palm_hidden_layers + 1):
        _fc(table, f"palm.fc{n}", width, width)
    _fc(table, "palm.out", 3 * topology.palm_count, width)


def parameter_shapes(config, topology, variant="full", two_branch_width=None):
    """Ordered name -> shape table of every trainable parameter"""
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant '{variant}', expected one of {list(VARIANTS)}")
    table = {}
    c_in = 1
    for i, c_out in enumerate(config.encoder_channels, start=1):
        prefix = f"encoder.block{i}"
        _bn(table, f"{prefix}.bn1", c_in)
        _conv(table, f"{prefix}.conv1", c_out, c_in, 3)
        _bn(table, f"{prefix}.bn2", c_out)
        _conv(table, f"{prefix}.conv2", c_out, c_out, 3)
        _conv(table, f"{prefix}.shortcut", c_out, c_in, 1)
        c_in = c_out

    _palm_tables(table, config, topology)
    width = config.branch_width
    features = config.branch_width

    if variant == "two_branch":
        w2 = two_branch_width or config.two_branch_width or solve_two_branch_width(config, topology)
        _head(table, "fingers", c_in, w2)
        for n in range(1, topology.max_chain_length + 1):
            _fc(table, f"fingers.joint_fc{n}", w2, w2)
        _gru(table, "fingers", w2, w2, 3 * len(topology.fingers))
        features += w2
    else:
        for finger in topology.fingers:
            prefix = f"finger.{finger.name}"
            _head(table, prefix, c_in, width)
            if variant == "full":
                for n in range(1, finger.length + 1):
                    _fc(table, f"{prefix}.joint_fc{n}", width, width)
                _gru(table, prefix, width, width, 3)
            else:
                _fc(table, f"{prefix}.fc", width, width)
                _fc(table, f"{prefix}.out", 3 * finger.length, width)
            features += width

    _fc(table, "ensemble.fc", config.ensemble_width, features)
    _fc(table, "ensemble.out", 3 * topology.joint_count, config.ensemble_width)
    return table


def buffer_shapes(config, topology, variant="full", two_branch_width=None):
    """BN layer name -> channel count, in parameter-table order"""
    shapes = parameter_shapes(config, topology, variant, two_branch_width)
    return {name[: -len(".gamma")]: shape[0] for name, shape in shapes.items() if name.endswith(".gamma")}


def parameter_count(config, topology, variant="full", two_branch_width=None):
    return int(sum(np.prod(shape) for shape in parameter_shapes(config, topology, variant, two_branch_width).values()))


@lru_cache(maxsize=32)
def solve_two_branch_width(config, topology):
    """Finger-branch width of the two-branch variant closest in parameter count to `full`"""
    target = parameter_count(config, topology, "full")
    best_width, best_gap = 1, None
    for width in range(1, 8 * config.branch_width + 1):
        gap = abs(parameter_count(config, topology, "two_branch", two_branch_width=width) - target)
        if best_gap is None or gap < best_gap:
            best_width, best_gap = width, gap
    logger.debug("two-branch width %d (parameter gap %d)", best_width, best_gap)
    return best_width


def _initial_value(name, shape, rng):
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "gamma":
        return np.ones(shape)
    if leaf in ("beta", "bias") or leaf.startswith("b_"):
        return np.zeros(shape)
    if ".gru." in name:
        d_h = shape[1] if leaf == "W_y" else shape[0]
        bound = np.sqrt(1.0 / d_h)
    else:
        bound = np.sqrt(1.0 / int(np.prod(shape[1:])))
    return rng.uniform(-bound, bound, size=shape)


# --- Model graph ---

class ModelGraph:
    """Named parameters, BN running moments, topology and variant of one network"""

    def __init__(self, config, topology, variant, parameters, bn_states, two_branch_width=None):
        self.config = config
        self.topology = topology
        self.variant = variant
        self.parameters = parameters
        self.bn_states = bn_states
        self.two_branch_width = two_branch_width

    @classmethod
    def build(cls, config, topology, variant="full", rng=None):
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant '{variant}', expected one of {list(VARIANTS)}")
        rng = rng if rng is not None else np.random.default_rng(0)
        width = None
        if variant == "two_branch":
            width = config.two_branch_width or solve_two_branch_width(config, topology)
        shapes = parameter_shapes(config, topology, variant, width)
        parameters = {
            name: tc.Tensor(_initial_value(name, shape, rng), requires_grad=True, name=name)
            for name, shape in shapes.items()
        }
        bn_states = {
            name: tc.BatchNormState(channels, BN_MOMENTUM, BN_EPS)
            for name, channels in buffer_shapes(config, topology, variant, width).items()
        }
        logger.debug("built %s model with %d parameters", variant, sum(t.size for t in parameters.values()))
        return cls(config, topology, variant, parameters, bn_states, width)

    @property
    def precision(self):
        return next(iter(self.parameters.values())).dtype.name

    def parameter_count(self):
        return int(sum(t.size for t in self.parameters.values()))

    def named_parameters(self):
        return list(self.parameters.items())

    def zero_grad(self):
        for tensor in self.parameters.values():
            tensor.zero_grad()

    def gru(self, prefix):
        return GruParams(**{name: self.parameters[f"{prefix}.gru.{name}"] for name in GruParams.shapes(1, 1, 1)})

    def forward(self, patches, training=False):
        return forward(self, patches, training=training)

    def __repr__(self):
        return (
            f"ModelGraph(variant={self.variant}, topology={self.topology.name}, "
            f"parameters={self.parameter_count()}, precision={self.precision})"
        )


def build_model(config, topology, variant="full", seed=0):
    return ModelGraph.build(config, topology, variant, np.random.default_rng(seed))


# --- Graph pieces ---

def _p(model, name):
    return model.parameters[name]


def _conv_layer(model, prefix, x, padding):
    return tc.conv2d(x, _p(model, f"{prefix}.weight"), _p(model, f"{prefix}.bias"), stride=1, padding=padding)


def _bn_layer(model, prefix, x, training):
    return tc.batch_norm(
        x, _p(model, f"{prefix}.gamma"), _p(model, f"{prefix}.beta"), model.bn_states[prefix], training=training
    )


def _fc_layer(model, prefix, x):
    return tc.fully_connected(x, _p(model, f"{prefix}.weight"), _p(model, f"{prefix}.bias"))


def residual_block(model, index, x, training):
    prefix = f"encoder.block{index}"
    out = tc.relu(_bn_layer(model, f"{prefix}.bn1", x, training))
    out = _conv_layer(model, f"{prefix}.conv1", out, padding=1)
    out = tc.relu(_bn_layer(model, f"{prefix}.bn2", out, training))
    out = _conv_layer(model, f"{prefix}.conv2", out, padding=1)
    return out + _conv_layer(model, f"{prefix}.shortcut", x, padding=0)


def encode(model, depth, training=False):
    """B×1×S×S depth patches -> B×C×(S/8)×(S/8) feature map"""
    size = model.config.input_size
    if depth.ndim != 4 or depth.shape[1:] != (1, size, size):
        raise DimensionError(f"encoder expects B×1×{size}×{size} input, got {list(depth.shape)}")
    x = depth
    for index in range(1, 6):
        x = residual_block(model, index, x, training)
        if index <= 3:
            x = tc.avg_pool2d(x, 2)
    return x


def branch_head(model, prefix, feat, training=False):
    """3x3 conv -> BN -> ReLU -> global average pooling"""
    out = _conv_layer(model, f"{prefix}.head.conv", feat, padding=1)
    out = tc.relu(_bn_layer(model, f"{prefix}.head.bn", out, training))
    return tc.global_avg_pool(out)


def joint_features(model, prefix, f_k, count):
    return [tc.relu(_fc_layer(model, f"{prefix}.joint_fc{n}", f_k)) for n in range(1, count + 1)]


def finger_recurrence(model, name, features):
    """GRU over per-joint features MCP -> tip; returns (B×N×3 joints, final hidden state)"""
    finger = model.topology.finger(name)
    if len(features) != finger.length:
        raise ConfigurationError(
            f"finger '{name}' has {finger.length} joints but {len(features)} joint features were given"
        )
    outputs, state = gru_unroll(model.gru(f"finger.{name}"), features)
    return tc.stack(outputs, axis=1), state.h


def finger_branch(model, name, f_k):
    """Finger feature -> (B×N×3 local joints, feature handed to the ensemble)"""
    finger = model.topology.finger(name)
    prefix = f"finger.{name}"
    if model.variant == "fc_regression":
        hidden = tc.relu(_fc_layer(model, f"{prefix}.fc", f_k))
        joints = _fc_layer(model, f"{prefix}.out", hidden)
        return tc.reshape(joints, (joints.shape[0], finger.length, 3)), hidden
    return finger_recurrence(model, name, joint_features(model, prefix, f_k, finger.length))


def unified_finger_branch(model, f_k):
    """Two-branch variant: one recurrence emitting all five fingers per step"""
    topology = model.topology
    steps = topology.max_chain_length
    outputs, state = gru_unroll(model.gru("fingers"), joint_features(model, "fingers", f_k, steps))
    batch = f_k.shape[0]
    per_step = [tc.reshape(y, (batch, len(topology.fingers), 3)) for y in outputs]
    fingers = {}
    for k, finger in enumerate(topology.fingers):
        fingers[finger.name] = tc.stack([per_step[n][:, k, :] for n in range(finger.length)], axis=1)
    return fingers, state.h


def palm_branch(model, f_0):
    """Palm feature -> (B×P×3 palm joints, last hidden feature)"""
    hidden = f_0
    for n in range(1, model.config.palm_hidden_layers + 1):
        hidden = tc.relu(_fc_layer(model, f"palm.fc{n}", hidden))
    joints = _fc_layer(model, "palm.out", hidden)
    return tc.reshape(joints, (joints.shape[0], model.topology.palm_count, 3)), hidden


def ensemble(model, palm_feat, finger_states):
    """Concatenate palm and finger features -> FC+ReLU -> B×T×3 global joints"""
    expected = 1 if model.variant == "two_branch" else len(model.topology.fingers)
    if len(finger_states) != expected:
        raise ConfigurationError(f"ensemble expects {expected} finger states, got {len(finger_states)}")
    fused = tc.concat([palm_feat, *finger_states], axis=-1)
    hidden = tc.relu(_fc_layer(model, "ensemble.fc", fused))
    joints = _fc_layer(model, "ensemble.out", hidden)
    return tc.reshape(joints, (joints.shape[0], model.topology.joint_count, 3))


def _as_batch(model, patches):
    if not isinstance(patches, tc.Tensor):
        patches = tc.Tensor(patches, dtype=model.precision)
    if patches.ndim == 3:
        patches = tc.reshape(patches, (1,) + patches.shape)
    return patches


def forward(model, patches, training=False):
    patches = _as_batch(model, patches)
    feat = encode(model, patches, training)
    palm_joints, palm_feat = palm_branch(model, branch_head(model, "palm", feat, training))

    if model.variant == "two_branch":
        finger_joints, state = unified_finger_branch(model, branch_head(model, "fingers", feat, training))
        finger_states = [state]
    else:
        finger_joints, finger_states = {}, []
        for finger in model.topology.fingers:
            f_k = branch_head(model, f"finger.{finger.name}", feat, training)
            finger_joints[finger.name], state = finger_branch(model, finger.name, f_k)
            finger_states.append(state)

    global_joints = ensemble(model, palm_feat, finger_states)
    return PoseOutput(global_joints, palm_joints, finger_joints)


def predict(model, patches, batch_size=32):
    """Global joints (B×T×3 numpy, normalized) with BN running moments and no tape"""
    patches = np.asarray(patches.data if isinstance(patches, tc.Tensor) else patches)
    if patches.ndim == 3:
        patches = patches[None]
    chunks = []
    with tc.no_grad():
        for start in range(0, len(patches), batch_size):
            output = forward(model, patches[start:start + batch_size], training=False)
            chunks.append(output.global_joints.numpy())
    return np.concatenate(chunks, axis=0)


# --- Losses ---

def smooth_l1(x, knee=SMOOTH_L1_KNEE):
    """0.5·x² for |x| < knee, knee·(|x| − knee/2) otherwise; floats in, float out"""
    if isinstance(x, tc.Tensor):
        return tc.smooth_l1(x, knee)
    return tc.smooth_l1(tc.Tensor(x, dtype=np.float64), knee).item()


def _summed_smooth_l1(pred, target):
    if pred.shape != target.shape:
        raise DimensionError(f"loss: prediction {list(pred.shape)} vs target {list(target.shape)}")
    return tc.tensor_sum(tc.smooth_l1(pred - target, SMOOTH_L1_KNEE))


def total_loss(pred, gt, lam=1.0):
    """Batch mean of global smooth-L1 plus lam times the palm and finger local terms"""
    batch = pred.global_joints.shape[0]
    loss = _summed_smooth_l1(pred.global_joints, gt.global_joints)
    if lam:
        local = _summed_smooth_l1(pred.palm_joints, gt.palm_joints)
        if set(pred.finger_joints) != set(gt.finger_joints):
            raise DimensionError(
                f"loss: finger sets differ ({sorted(pred.finger_joints)} vs {sorted(gt.finger_joints)})"
            )
        for name in sorted(pred.finger_joints):
            local = local + _summed_smooth_l1(pred.finger_joints[name], gt.finger_joints[name])
        loss = loss + tc.scale(local, lam)
    return tc.scale(loss, 1.0 / batch)


# --- Checkpoints ---

def _metadata(model):
    arrays, offset = [], 0
    entries = [(name, t.data, "parameter") for name, t in model.parameters.items()]
    for name, state in model.bn_states.items():
        entries.append((f"{name}.running_mean", state.running_mean, "buffer"))
        entries.append((f"{name}.running_var", state.running_var, "buffer"))
    payload = []
    for name, array, kind in entries:
        raw = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes()
        arrays.append({
            "name": name, "kind": kind, "shape": list(array.shape),
            "dtype": array.dtype.name, "offset": offset, "nbytes": len(raw),
        })
        payload.append(raw)
        offset += len(raw)
    metadata = {
        "format_version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "precision": model.precision,
        "model_config": model.config.to_dict(),
        "two_branch_width": model.two_branch_width,
        "topology": model.topology.to_dict(),
        "bn_eps": BN_EPS,
        "bn_momentum": BN_MOMENTUM,
        "palm_hidden_layers": model.config.palm_hidden_layers,
        "arrays": arrays,
    }
    return metadata, b"".join(payload)


def save_model(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata, payload = _metadata(model)
    header = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<Q", len(header)))
        handle.write(header)
        handle.write(payload)
    logger.debug("saved %s checkpoint to %s", model.variant, path)
    return path


def _read_array(payload, entry, expected_shape):
    name = entry.get("name", "?")
    if list(entry.get("shape", [])) != list(expected_shape):
        raise CheckpointFormatError(f"arrays.{name}.shape", f"expected {list(expected_shape)}, got {entry.get('shape')}")
    if entry.get("dtype") not in tc.PRECISIONS:
        raise CheckpointFormatError(f"arrays.{name}.dtype", f"unsupported dtype {entry.get('dtype')!r}")
    dtype = np.dtype(entry["dtype"]).newbyteorder("<")
    offset, nbytes = int(entry.get("offset", -1)), int(entry.get("nbytes", -1))
    if nbytes != int(np.prod(expected_shape)) * dtype.itemsize:
        raise CheckpointFormatError(f"arrays.{name}.nbytes", f"{nbytes} bytes do not hold shape {list(expected_shape)}")
    if offset < 0 or offset + nbytes > len(payload):
        raise CheckpointFormatError(f"arrays.{name}.offset", "array extends past the end of the file (truncated?)")
    array = np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
    return array.astype(dtype.newbyteorder("="), copy=True).reshape(expected_shape)


def load_model(path):
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(CHECKPOINT_MAGIC) + 8:
        raise CheckpointFormatError("magic", f"{path} is too short to be a checkpoint")
    if blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("magic", f"expected {CHECKPOINT_MAGIC!r}, got {blob[:8]!r}")
    (length,) = struct.unpack("<Q", blob[8:16])
    if 16 + length > len(blob):
        raise CheckpointFormatError("metadata_length", f"{length} bytes declared, file truncated")
    try:
        metadata = json.loads(blob[16:16 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise CheckpointFormatError("metadata", str(error)) from error
    payload = blob[16 + length:]

    if metadata.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError("format_version", f"unsupported version {metadata.get('format_version')!r}")
    variant = metadata.get("variant")
    if variant not in VARIANTS:
        raise CheckpointFormatError("variant", f"unknown variant {variant!r}")
    if metadata.get("precision") not in tc.PRECISIONS:
        raise CheckpointFormatError("precision", f"unknown precision {metadata.get('precision')!r}")
    try:
        config = ModelConfig.from_dict(metadata["model_config"])
    except (KeyError, TypeError, ConfigurationError) as error:
        raise CheckpointFormatError("model_config", str(error)) from error
    try:
        topology = JointTopology.from_dict(metadata["topology"])
    except (KeyError, ValidationError) as error:
        raise CheckpointFormatError("topology", str(error)) from error

    width = metadata.get("two_branch_width")
    shapes = parameter_shapes(config, topology, variant, width)
    channels = buffer_shapes(config, topology, variant, width)
    entries = {entry.get("name"): entry for entry in metadata.get("arrays", [])}
    expected = set(shapes) | {f"{n}.{s}" for n in channels for s in ("running_mean", "running_var")}
    if set(entries) != expected:
        missing = sorted(expected - set(entries))[:3]
        extra = sorted(set(entries) - expected)[:3]
        raise CheckpointFormatError("arrays", f"parameter manifest mismatch (missing {missing}, unexpected {extra})")
    total = sum(int(entry.get("nbytes", 0)) for entry in entries.values())
    if total != len(payload):
        raise CheckpointFormatError("payload", f"expected {total} bytes of arrays, found {len(payload)}")

    parameters = {
        name: tc.Tensor(_read_array(payload, entries[name], shape), requires_grad=True, name=name,
                        dtype=metadata["precision"])
        for name, shape in shapes.items()
    }
    bn_states = {}
    for name, count in channels.items():
        state = tc.BatchNormState(count, float(metadata.get("bn_momentum", BN_MOMENTUM)),
                                  float(metadata.get("bn_eps", BN_EPS)), dtype=metadata["precision"])
        state.running_mean = _read_array(payload, entries[f"{name}.running_mean"], (count,))
        state.running_var = _read_array(payload, entries[f"{name}.running_var"], (count,))
        bn_states[name] = state
    logger.debug("loaded %s checkpoint from %s", variant, path)
    return ModelGraph(config, topology, variant, parameters, bn_states, width)


def require_topology(model, topology):
    """Raise unless the model was built for ``topology``"""
    if model.topology.to_dict() != topology.to_dict():
        raise ValidationError(
            f"checkpoint topology '{model.topology.name}' ({model.topology.joint_count} joints) does not match "
            f"data topology '{topology.name}' ({topology.joint_count} joints)"
        )
