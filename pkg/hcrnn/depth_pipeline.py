"""
Depth-frame preprocessing and synthetic data.

- camera helpers (pinhole intrinsics, projection / back-projection)
- cube crop: a fixed metric cube around the hand is projected onto the image, warped to
  a 96x96 patch and normalized to [-1, 1]; everything outside the cube depth range is 1
- online augmentation: one composite warp (scale -> rotate -> translate) applied to the
  patch and the joint labels
- synthetic articulated hand: forward kinematics of a palm plus five finger chains,
  depth-rendered by ray casting capsules and an ellipsoid palm
- manifest I/O: JSON Lines records pointing at .png (16-bit) or .dpt depth files
- leave-one-subject-out splitter

Camera convention: x right, y down, z forward (away from the camera), all in millimetres.
"""

import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import CropError, ManifestParseError, UsageError, ValidationError
from .log_utils import LogMixin
from .topology import FINGER_NAMES

logger = logging.getLogger(__name__)

PATCH_SIZE = 96
DEFAULT_CUBE_MM = 300.0
MASS_BAND_MM = 150.0
SYNTH_IMAGE_SHAPE = (240, 320)
SYNTH_DEPTH_SCALE_UM = 100
DEFAULT_DEPTH_SCALE_UM = 1000
BACKGROUND = 1.0

FLEXION_RANGE = (0.0, 90.0)
ABDUCTION_RANGE = (-20.0, 20.0)


# --- Camera ---

@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def project(self, points):
        """N×3 camera-space mm -> N×2 pixel coordinates (u, v)"""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        u = self.fx * points[:, 0] / points[:, 2] + self.cx
        v = self.fy * points[:, 1] / points[:, 2] + self.cy
        return np.stack([u, v], axis=1)

    def backproject(self, uv, z):
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        x = (uv[:, 0] - self.cx) * z / self.fx
        y = (uv[:, 1] - self.cy) * z / self.fy
        return np.stack([x, y, z], axis=1)

    def to_list(self):
        return [self.fx, self.fy, self.cx, self.cy]

    @classmethod
    def from_list(cls, values):
        fx, fy, cx, cy = (float(v) for v in values)
        return cls(fx, fy, cx, cy)


SYNTH_INTRINSICS = Intrinsics(475.0, 475.0, (SYNTH_IMAGE_SHAPE[1] - 1) / 2.0, (SYNTH_IMAGE_SHAPE[0] - 1) / 2.0)


# --- Frame and sample types ---

@dataclass
class RawFrame:
    depth: np.ndarray  # H×W mm, 0 = missing
    joints: np.ndarray  # T×3 camera-space mm (None when unannotated)
    intrinsics: Intrinsics
    subject: int = 0
    source: str = ""

    def __post_init__(self):
        if np.any(self.depth < 0):
            raise ValidationError(f"frame {self.source or '?'}: negative depth values")


@dataclass(frozen=True)
class CropSpec:
    center: tuple  # cube centre, camera-space mm
    cube_size: float = DEFAULT_CUBE_MM

    def __post_init__(self):
        if not self.cube_size > 0:
            raise ValidationError(f"cube size must be positive, got {self.cube_size}")

    def to_dict(self):
        return {"center": [float(c) for c in self.center], "cube_size": float(self.cube_size)}


@dataclass
class HandSample:
    patch: np.ndarray  # 1×96×96 in [-1, 1]
    joints_norm: np.ndarray  # T×3 in cube coordinates (None when unannotated)
    crop: CropSpec
    source: str = ""


@dataclass(frozen=True)
class AugmentParams:
    rotation_deg: float = 0.0
    translation_px: tuple = (0.0, 0.0)
    scale: float = 1.0


# --- Cube centres ---

def palm_center(joints, topology):
    """Training-time cube centre: centroid of the palm region

    The palm region is bounded by the palm joints and the root joint of every finger
    chain, so a single wrist joint (msra) does not pull the cube off the fingers.
    """
    region = list(topology.palm) + [finger.joints[0] for finger in topology.fingers]
    return np.asarray(joints, dtype=np.float64)[region].mean(axis=0)


def estimate_mass_center(depth, intrinsics, band_mm=MASS_BAND_MM):
    """Inference-time cube centre: centroid of the pixels within ``band_mm`` of the nearest surface"""
    valid = depth > 0
    if not valid.any():
        raise CropError("no valid depth pixels to locate the hand")
    nearest = depth[valid].min()
    mask = valid & (depth <= nearest + band_mm)
    v, u = np.nonzero(mask)
    z = depth[mask].mean()
    return intrinsics.backproject([[u.mean(), v.mean()]], [z])[0]


# --- Crop and normalization ---

def normalize_depth(depth, center_z, cube_size):
    """mm -> [-1, 1] relative to the cube; missing or out-of-range depth -> 1"""
    half = cube_size / 2.0
    inside = (depth > 0) & (np.abs(depth - center_z) <= half)
    scaled = np.clip(2.0 * (depth - center_z) / cube_size, -1.0, 1.0)
    return np.where(inside, scaled, BACKGROUND)


def crop_transform(spec, intrinsics, size=PATCH_SIZE):
    """2×3 affine mapping image pixels onto the patch"""
    cx, cy, cz = (float(c) for c in spec.center)
    if cz <= 0:
        raise CropError(f"cube centre depth must be positive, got {cz}")
    u_c = intrinsics.fx * cx / cz + intrinsics.cx
    v_c = intrinsics.fy * cy / cz + intrinsics.cy
    k_u = size * cz / (intrinsics.fx * spec.cube_size)
    k_v = size * cz / (intrinsics.fy * spec.cube_size)
    mid = (size - 1) / 2.0
    return np.array([[k_u, 0.0, mid - k_u * u_c], [0.0, k_v, mid - k_v * v_c]]), (u_c, v_c, k_u, k_v)


def _warp(image, matrix, size):
    return cv2.warpAffine(
        image.astype(np.float32), matrix, (size, size),
        flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=BACKGROUND,
    )


def _restore_background(patch, background):
    patch = np.clip(patch, -1.0, 1.0)
    patch[background >= 1.0 - 1e-6] = BACKGROUND
    return patch


def normalize_joints(joints, spec):
    return (np.asarray(joints, dtype=np.float64) - np.asarray(spec.center, dtype=np.float64)) * 2.0 / spec.cube_size


def denormalize_joints(joints_norm, spec):
    """Cube coordinates back to camera-space mm"""
    return np.asarray(joints_norm, dtype=np.float64) * spec.cube_size / 2.0 + np.asarray(spec.center, dtype=np.float64)


def crop_normalize(frame, spec, size=PATCH_SIZE):
    """Cut the cube around ``spec.center`` out of the frame and normalize depth and joints"""
    height, width = frame.depth.shape
    matrix, (u_c, v_c, k_u, k_v) = crop_transform(spec, frame.intrinsics, size)
    half_u, half_v = (size / 2.0) / k_u, (size / 2.0) / k_v
    if u_c + half_u < 0 or u_c - half_u > width - 1 or v_c + half_v < 0 or v_c - half_v > height - 1:
        raise CropError(
            f"cube at {np.round(spec.center, 1).tolist()} projects outside the {width}×{height} image"
        )

    normalized = normalize_depth(frame.depth, spec.center[2], spec.cube_size)
    patch = _warp(normalized, matrix, size)
    background = _warp((normalized >= BACKGROUND).astype(np.float32), matrix, size)
    patch = _restore_background(patch, background)

    joints = None if frame.joints is None else normalize_joints(frame.joints, spec)
    return HandSample(patch=patch[None].astype(np.float32), joints_norm=joints, crop=spec, source=frame.source)


# --- Augmentation ---

def draw_augmentation(rng, rotation=180.0, translation=10.0, scale=(0.9, 1.1)):
    return AugmentParams(
        rotation_deg=float(rng.uniform(-rotation, rotation)),
        translation_px=tuple(float(t) for t in rng.uniform(-translation, translation, size=2)),
        scale=float(rng.uniform(*scale)),
    )


def augmentation_matrix(params, size=PATCH_SIZE):
    """Forward 2×3 pixel map p' = c + R(θ)(p − c)/s + t"""
    theta = np.deg2rad(params.rotation_deg)
    rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    linear = rotation / params.scale
    mid = np.full(2, (size - 1) / 2.0)
    offset = mid + np.asarray(params.translation_px, dtype=np.float64) - linear @ mid
    return np.hstack([linear, offset[:, None]]), rotation


def apply_augmentation(sample, params):
    size = sample.patch.shape[-1]
    matrix, rotation = augmentation_matrix(params, size)

    plane = sample.patch[0].astype(np.float32)
    background = _warp((plane >= BACKGROUND).astype(np.float32), matrix, size)
    warped = _warp(plane / np.float32(params.scale), matrix, size)
    patch = _restore_background(warped, background)

    joints = None
    if sample.joints_norm is not None:
        joints = np.array(sample.joints_norm, dtype=np.float64)
        joints[:, :2] = joints[:, :2] @ rotation.T / params.scale + np.asarray(params.translation_px) / (size / 2.0)
        joints[:, 2] = joints[:, 2] / params.scale
    return HandSample(patch=patch[None].astype(np.float32), joints_norm=joints, crop=sample.crop, source=sample.source)


def augment(sample, seed):
    """Random rotation, translation and scale drawn from ``seed`` (int or Generator)"""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return apply_augmentation(sample, draw_augmentation(rng))


# --- Synthetic hand ---

# Hand frame: origin at the palm centre, x across the palm (thumb side negative), y toward the
# fingers, z out of the back of the hand. Flexion curls links toward -z.
HAND_GEOMETRY = {
    "mcp": {
        "thumb": (-36.0, -2.0, 0.0),
        "index": (-24.0, 46.0, 0.0),
        "middle": (-6.0, 50.0, 0.0),
        "ring": (12.0, 46.0, 0.0),
        "little": (28.0, 38.0, 0.0),
    },
    "splay_deg": {"thumb": 50.0, "index": 8.0, "middle": 0.0, "ring": -8.0, "little": -16.0},
    "length": {"thumb": 70.0, "index": 80.0, "middle": 88.0, "ring": 82.0, "little": 65.0},
    "radius": {"thumb": 10.0, "index": 8.5, "middle": 9.0, "ring": 8.5, "little": 7.5},
    "palm_landmarks": {
        "palm": (0.0, 0.0, 0.0),
        "wrist": (0.0, -38.0, 0.0),
        "wrist_radial": (-24.0, -32.0, 0.0),
        "wrist_ulnar": (24.0, -32.0, 0.0),
        "thumb_root": (-30.0, -16.0, 0.0),
    },
    "palm_center": (0.0, 8.0, 0.0),
    "palm_semi_axes": (42.0, 48.0, 13.0),
    "link_decay": 0.7,
}

# hand frame -> camera frame for the identity global rotation: back of the hand faces the camera
HAND_TO_CAMERA = np.diag([1.0, -1.0, -1.0])


@dataclass
class HandPose:
    """Articulation of one synthetic hand; angles in degrees, translation in mm"""

    flexion: np.ndarray = field(default_factory=lambda: np.zeros((5, 3)))  # per finger, per link
    abduction: np.ndarray = field(default_factory=lambda: np.zeros(5))
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # Euler x, y, z
    translation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 600.0]))
    scale: float = 1.0

    def validate(self):
        flexion = np.asarray(self.flexion, dtype=np.float64)
        abduction = np.asarray(self.abduction, dtype=np.float64)
        if flexion.ndim != 2 or flexion.shape[0] != 5 or abduction.shape != (5,):
            raise ValidationError(f"pose needs 5×K flexion and 5 abduction angles, got {flexion.shape} / {abduction.shape}")
        if flexion.min() < FLEXION_RANGE[0] or flexion.max() > FLEXION_RANGE[1]:
            raise ValidationError(f"flexion angles must lie in {list(FLEXION_RANGE)} degrees")
        if abduction.min() < ABDUCTION_RANGE[0] or abduction.max() > ABDUCTION_RANGE[1]:
            raise ValidationError(f"abduction angles must lie in {list(ABDUCTION_RANGE)} degrees")
        if not self.scale > 0:
            raise ValidationError(f"hand scale must be positive, got {self.scale}")

    @classmethod
    def random(cls, rng, links=3, scale=1.0):
        # at 560-660 mm an open hand stays inside the 320x240 synthetic view
        return cls(
            flexion=rng.uniform(0.0, 70.0, size=(5, links)),
            abduction=rng.uniform(-15.0, 15.0, size=5),
            rotation=np.array([rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-60, 60)]),
            translation=np.array([rng.uniform(-30, 30), rng.uniform(-20, 20), rng.uniform(560, 660)]),
            scale=scale,
        )


def rotation_matrix(axis, degrees):
    c, s = np.cos(np.deg2rad(degrees)), np.sin(np.deg2rad(degrees))
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def homogeneous(rotation=None, translation=None):
    transform = np.eye(4)
    if rotation is not None:
        transform[:3, :3] = rotation
    if translation is not None:
        transform[:3, 3] = translation
    return transform


def link_lengths(total, count):
    weights = HAND_GEOMETRY["link_decay"] ** np.arange(count)
    return total * weights / weights.sum()


def hand_to_camera(pose):
    rx, ry, rz = pose.rotation
    global_rotation = rotation_matrix("z", rz) @ rotation_matrix("y", ry) @ rotation_matrix("x", rx)
    return homogeneous(global_rotation @ HAND_TO_CAMERA, pose.translation)


def finger_chain_points(pose, finger_index, joint_count):
    """Hand-frame joint positions of one finger, MCP first, as a product of link transforms"""
    name = FINGER_NAMES[finger_index]
    links = joint_count - 1
    if links > np.asarray(pose.flexion).shape[1]:
        raise ValidationError(f"finger '{name}' needs {links} flexion angles, pose has {np.asarray(pose.flexion).shape[1]}")
    splay = HAND_GEOMETRY["splay_deg"][name] + pose.abduction[finger_index]
    transform = homogeneous(rotation_matrix("z", splay), np.asarray(HAND_GEOMETRY["mcp"][name]) * pose.scale)
    points = [transform[:3, 3].copy()]
    for link, length in enumerate(link_lengths(HAND_GEOMETRY["length"][name] * pose.scale, links)):
        transform = transform @ homogeneous(rotation_matrix("x", -pose.flexion[finger_index][link]))
        transform = transform @ homogeneous(translation=(0.0, length, 0.0))
        points.append(transform[:3, 3].copy())
    return np.array(points)


def hand_joints(pose, topology):
    """Camera-space T×3 joints for ``topology``"""
    pose.validate()
    to_camera = hand_to_camera(pose)
    local = np.zeros((topology.joint_count, 3))
    landmarks = HAND_GEOMETRY["palm_landmarks"]
    for index in topology.palm:
        name = topology.joint_names[index]
        if name not in landmarks:
            raise ValidationError(f"synthetic hand has no palm landmark '{name}' (known: {sorted(landmarks)})")
        local[index] = np.asarray(landmarks[name]) * pose.scale
    for finger in topology.fingers:
        local[list(finger.joints)] = finger_chain_points(pose, FINGER_NAMES.index(finger.name), finger.length)
    return local @ to_camera[:3, :3].T + to_camera[:3, 3]


def _camera_rays(shape, intrinsics):
    v, u = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    return np.stack([(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, np.ones_like(u)], axis=-1)


def ray_sphere(rays, center, radius):
    """Nearest positive hit distance along unnormalized rays from the origin (inf on miss)"""
    a = np.einsum("...i,...i->...", rays, rays)
    b = rays @ center
    c = center @ center - radius * radius
    disc = b * b - a * c
    hit = disc >= 0
    t = np.full(rays.shape[:-1], np.inf)
    t[hit] = (b[hit] - np.sqrt(disc[hit])) / a[hit]
    t[t <= 0] = np.inf
    return t


def ray_capsule(rays, start, end, radius):
    axis = end - start
    length = np.linalg.norm(axis)
    t = np.minimum(ray_sphere(rays, start, radius), ray_sphere(rays, end, radius))
    if length < 1e-9:
        return t
    w = axis / length
    d_perp = rays - (rays @ w)[..., None] * w
    m_perp = -start - (-start @ w) * w
    a = np.einsum("...i,...i->...", d_perp, d_perp)
    b = 2.0 * (d_perp @ m_perp)
    c = m_perp @ m_perp - radius * radius
    disc = b * b - 4.0 * a * c
    hit = (disc >= 0) & (a > 1e-12)
    body = np.full(rays.shape[:-1], np.inf)
    body[hit] = (-b[hit] - np.sqrt(disc[hit])) / (2.0 * a[hit])
    with np.errstate(invalid="ignore"):
        along = (body[..., None] * rays - start) @ w
        inside = np.isfinite(body) & (body > 0) & (along >= 0) & (along <= length)
    return np.minimum(t, np.where(inside, body, np.inf))


def ray_ellipsoid(rays, center, rotation, semi_axes):
    """Ellipsoid with principal axes given by the columns of ``rotation``"""
    semi_axes = np.asarray(semi_axes, dtype=np.float64)
    d_local = (rays @ rotation) / semi_axes
    o_local = (rotation.T @ -center) / semi_axes
    a = np.einsum("...i,...i->...", d_local, d_local)
    b = 2.0 * (d_local @ o_local)
    c = o_local @ o_local - 1.0
    disc = b * b - 4.0 * a * c
    hit = disc >= 0
    t = np.full(rays.shape[:-1], np.inf)
    t[hit] = (-b[hit] - np.sqrt(disc[hit])) / (2.0 * a[hit])
    t[t <= 0] = np.inf
    return t


def render_hand(pose, topology, intrinsics, shape):
    """Nearest-surface depth (mm, 0 where nothing is hit)"""
    to_camera = hand_to_camera(pose)
    rotation, translation = to_camera[:3, :3], to_camera[:3, 3]
    rays = _camera_rays(shape, intrinsics)

    palm_origin = rotation @ (np.asarray(HAND_GEOMETRY["palm_center"]) * pose.scale) + translation
    nearest = ray_ellipsoid(rays, palm_origin, rotation, np.asarray(HAND_GEOMETRY["palm_semi_axes"]) * pose.scale)
    for finger in topology.fingers:
        # single-joint chains still get one bone
        points = finger_chain_points(pose, FINGER_NAMES.index(finger.name), max(finger.length, 2))
        points = points @ rotation.T + translation
        radius = HAND_GEOMETRY["radius"][finger.name] * pose.scale
        for start, end in zip(points[:-1], points[1:]):
            nearest = np.minimum(nearest, ray_capsule(rays, start, end, radius))
    return np.where(np.isfinite(nearest), nearest, 0.0)


def quantize_depth(depth_mm, scale_um):
    return np.clip(np.rint(depth_mm * 1000.0 / scale_um), 0, np.iinfo(np.uint16).max).astype(np.uint16)


def dequantize_depth(units, scale_um):
    return units.astype(np.float64) * (scale_um / 1000.0)


def synth_hand(pose, topology, seed=0, intrinsics=SYNTH_INTRINSICS, shape=SYNTH_IMAGE_SHAPE,
               noise_mm=0.0, scale_um=SYNTH_DEPTH_SCALE_UM, subject=0):
    """Render one synthetic frame; depth is quantized to the depth-file unit"""
    joints = hand_joints(pose, topology)
    depth = render_hand(pose, topology, intrinsics, shape)
    if noise_mm > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        valid = depth > 0
        depth[valid] += rng.normal(0.0, noise_mm, size=int(valid.sum()))
        depth[valid] = np.maximum(depth[valid], scale_um / 1000.0)
    depth = dequantize_depth(quantize_depth(depth, scale_um), scale_um)
    return RawFrame(depth=depth, joints=joints, intrinsics=intrinsics, subject=subject)


# --- Depth files ---

def read_depth(path, scale_um=DEFAULT_DEPTH_SCALE_UM):
    """Depth in mm from a 16-bit PNG or a .dpt raw grid (header: int32 H, W, scale µm/unit)"""
    path = Path(path)
    if path.suffix.lower() == ".dpt":
        try:
            blob = path.read_bytes()
        except OSError as error:
            raise ValidationError(f"{path}: unreadable depth file ({error})") from error
        if len(blob) < 12:
            raise ValidationError(f"{path}: depth file too short for its header")
        height, width, file_scale = struct.unpack("<3i", blob[:12])
        if height <= 0 or width <= 0 or file_scale <= 0 or len(blob) != 12 + 2 * height * width:
            raise ValidationError(f"{path}: header ({height}, {width}, {file_scale}) does not match file size {len(blob)}")
        units = np.frombuffer(blob, dtype="<u2", offset=12).reshape(height, width)
        return dequantize_depth(units, file_scale)
    try:
        with Image.open(path) as image:
            if len(image.getbands()) != 1:
                raise ValidationError(f"{path}: depth image must be single-channel, got {image.mode}")
            units = np.asarray(image).astype(np.uint16)
    except (OSError, SyntaxError) as error:
        raise ValidationError(f"{path}: unreadable depth image ({error})") from error
    return dequantize_depth(units, scale_um)


def write_depth(path, depth_mm, scale_um=DEFAULT_DEPTH_SCALE_UM):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    units = quantize_depth(depth_mm, scale_um)
    if path.suffix.lower() == ".dpt":
        height, width = units.shape
        path.write_bytes(struct.pack("<3i", height, width, int(scale_um)) + units.astype("<u2").tobytes())
    else:
        Image.fromarray(units).save(path)
    return path


# --- Manifest ---

@dataclass
class ManifestRecord:
    line_number: int
    depth_path: Path
    joints: np.ndarray  # T×3 mm or None
    intrinsics: Intrinsics
    subject: int = 0
    depth_scale_um: int = DEFAULT_DEPTH_SCALE_UM


def iter_manifest_records(path, topology=None):
    """Parse a JSON Lines manifest without touching the depth files"""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as error:
                raise ManifestParseError(path, line_number, f"invalid JSON ({error.msg})") from error
            if not isinstance(record, dict) or "depth" not in record or "intrinsics" not in record:
                raise ManifestParseError(path, line_number, "record needs 'depth' and 'intrinsics' fields")
            try:
                intrinsics = Intrinsics.from_list(record["intrinsics"])
            except (TypeError, ValueError) as error:
                raise ManifestParseError(path, line_number, "intrinsics must be [fx, fy, cx, cy]") from error

            joints = record.get("joints")
            if joints is not None:
                try:
                    joints = np.asarray(joints, dtype=np.float64).reshape(-1)
                except (TypeError, ValueError) as error:
                    raise ManifestParseError(path, line_number, "joints must be a list of numbers") from error
                if joints.size == 0 or joints.size % 3:
                    raise ManifestParseError(path, line_number, f"{joints.size} joint values is not a multiple of 3")
                joints = joints.reshape(-1, 3)
                if topology is not None and len(joints) != topology.joint_count:
                    raise ValidationError(
                        f"{path}:{line_number}: {len(joints)} joints, topology '{topology.name}' "
                        f"expects {topology.joint_count}"
                    )

            yield ManifestRecord(
                line_number=line_number,
                depth_path=(path.parent / record["depth"]),
                joints=joints,
                intrinsics=intrinsics,
                subject=int(record.get("subject", 0)),
                depth_scale_um=int(record.get("depth_scale_um", DEFAULT_DEPTH_SCALE_UM)),
            )


def load_frame(record):
    depth = read_depth(record.depth_path, record.depth_scale_um)
    return RawFrame(depth=depth, joints=record.joints, intrinsics=record.intrinsics,
                    subject=record.subject, source=str(record.depth_path))


def load_manifest(path, topology=None):
    """Stream RawFrames in manifest order"""
    for record in iter_manifest_records(path, topology):
        yield load_frame(record)


def manifest_entry(depth_name, frame, depth_scale_um=None):
    entry = {
        "depth": depth_name,
        "joints": [float(v) for v in np.asarray(frame.joints).reshape(-1)],
        "intrinsics": frame.intrinsics.to_list(),
        "subject": int(frame.subject),
    }
    if depth_scale_um is not None:
        entry["depth_scale_um"] = int(depth_scale_um)
    return entry


def write_manifest(path, entries):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
    return path


# --- Sample preparation ---

def cube_center(frame, topology, center="palm"):
    if center == "palm":
        if frame.joints is None:
            raise UsageError(f"frame {frame.source or '?'} has no joints; use the mass centre")
        return palm_center(frame.joints, topology)
    if center == "mass":
        return estimate_mass_center(frame.depth, frame.intrinsics)
    raise UsageError(f"unknown cube centre mode '{center}', expected 'palm' or 'mass'")


def prepare_sample(frame, topology, cube_size=DEFAULT_CUBE_MM, center="palm"):
    spec = CropSpec(center=tuple(cube_center(frame, topology, center)), cube_size=cube_size)
    return crop_normalize(frame, spec)


def prepare_samples(frames, topology, cube_size=DEFAULT_CUBE_MM, center="palm", workers=1):
    """Crop every frame; results keep input order whatever the worker count"""
    frames = list(frames)
    if workers <= 1:
        return [prepare_sample(f, topology, cube_size, center) for f in frames]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda f: prepare_sample(f, topology, cube_size, center), frames))


def stack_samples(samples):
    """(B×1×S×S patches, B×T×3 normalized joints)"""
    patches = np.stack([s.patch for s in samples]).astype(np.float32)
    joints = np.stack([s.joints_norm for s in samples]) if samples[0].joints_norm is not None else None
    return patches, joints


def leave_one_subject_out(subjects):
    """Yield (subject, train_indices, test_indices) per subject, subjects ascending"""
    subjects = np.array([getattr(s, "subject", s) for s in subjects])
    for subject in np.unique(subjects):
        yield int(subject), np.flatnonzero(subjects != subject), np.flatnonzero(subjects == subject)


# --- Synthetic dataset builder ---

class SyntheticDatasetBuilder(LogMixin):
    """Writes depth files, a manifest and a topology descriptor for a synthetic set"""

    def __init__(self, topology, seed=0, subjects=4, noise_mm=0.0, logger=None):
        self.topology = topology
        self.seed = seed
        self.subjects = subjects
        self.noise_mm = noise_mm
        self.logger = logger
        self.summary = {"frames": 0, "errors": []}

    def frames(self, count):
        """Deterministic frames: one child seed per frame, subject scales from the root seed"""
        if count < 1:
            raise UsageError(f"frame count must be at least 1, got {count}")
        root = np.random.SeedSequence(self.seed)
        scale_seed, *frame_seeds = root.spawn(count + 1)
        scales = np.random.default_rng(scale_seed).uniform(0.9, 1.1, size=self.subjects)
        links = max(self.topology.max_chain_length - 1, 1)
        for index, frame_seed in enumerate(frame_seeds):
            rng = np.random.default_rng(frame_seed)
            subject = index % self.subjects
            pose = HandPose.random(rng, links=links, scale=float(scales[subject]))
            yield synth_hand(pose, self.topology, seed=rng, noise_mm=self.noise_mm, subject=subject)

    def build(self, output_dir, count):
        output_dir = Path(output_dir)
        (output_dir / "depth").mkdir(parents=True, exist_ok=True)
        self.log(f"Generating {count} synthetic frames ({self.topology.name}, seed {self.seed})")
        entries = []
        for index, frame in enumerate(self.frames(count)):
            name = f"depth/{index:05d}.dpt"
            write_depth(output_dir / name, frame.depth, SYNTH_DEPTH_SCALE_UM)
            entries.append(manifest_entry(name, frame))
            self.summary["frames"] += 1
            if (index + 1) % 100 == 0:
                self.log(f"  {index + 1}/{count} frames written")
        manifest = write_manifest(output_dir / "manifest.jsonl", entries)
        self.topology.save(output_dir / "topology.json")
        self.log(f"✅ Synthetic set ready: {manifest} ({self.summary['frames']} frames)")
        return manifest
