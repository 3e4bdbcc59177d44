"""
Tests for cropping, augmentation, the synthetic hand and manifest I/O.
"""

import json

import numpy as np
import pytest
from PIL import Image

from hcrnn.depth_pipeline import (
    HAND_GEOMETRY,
    PATCH_SIZE,
    SYNTH_INTRINSICS,
    AugmentParams,
    CropSpec,
    HandPose,
    HandSample,
    Intrinsics,
    RawFrame,
    SyntheticDatasetBuilder,
    apply_augmentation,
    augment,
    crop_normalize,
    cube_center,
    denormalize_joints,
    draw_augmentation,
    estimate_mass_center,
    finger_chain_points,
    hand_joints,
    iter_manifest_records,
    leave_one_subject_out,
    link_lengths,
    load_manifest,
    manifest_entry,
    normalize_depth,
    normalize_joints,
    palm_center,
    prepare_samples,
    read_depth,
    render_hand,
    rotation_matrix,
    synth_hand,
    write_depth,
    write_manifest,
)
from hcrnn.errors import CropError, ManifestParseError, UsageError, ValidationError
from hcrnn.topology import FINGER_NAMES, JointTopology, resolve_topology

SHAPE = (240, 320)
MID = (PATCH_SIZE - 1) / 2.0


def plane(depth_mm, shape=SHAPE):
    return np.full(shape, float(depth_mm))


def frame_of(depth, joints=None, subject=0):
    return RawFrame(depth=depth, joints=joints, intrinsics=SYNTH_INTRINSICS, subject=subject)


# =============================================================================
# Camera and depth normalization
# =============================================================================

class TestCamera:

    def test_project_backproject(self, rng):
        points = np.column_stack([rng.uniform(-100, 100, 10), rng.uniform(-100, 100, 10), rng.uniform(300, 900, 10)])
        uv = SYNTH_INTRINSICS.project(points)
        np.testing.assert_allclose(SYNTH_INTRINSICS.backproject(uv, points[:, 2]), points)

    def test_optical_axis_hits_principal_point(self):
        np.testing.assert_allclose(SYNTH_INTRINSICS.project([[0.0, 0.0, 500.0]]), [[159.5, 119.5]])

    def test_list_round_trip(self):
        intrinsics = Intrinsics(588.0, 587.0, 320.0, 240.0)
        assert Intrinsics.from_list(intrinsics.to_list()) == intrinsics

    def test_negative_depth_rejected(self):
        with pytest.raises(ValidationError):
            frame_of(plane(-1.0))


class TestNormalizeDepth:

    @pytest.mark.parametrize("depth,expected", [
        (500.0, 0.0),
        (575.0, 0.5),
        (650.0, 1.0),
        (350.0, -1.0),
        (0.0, 1.0),
        (700.0, 1.0),
        (300.0, 1.0),
    ])
    def test_values(self, depth, expected):
        assert normalize_depth(np.array([depth]), 500.0, 300.0)[0] == pytest.approx(expected)


# =============================================================================
# Crop
# =============================================================================

class TestCrop:

    def test_plane_at_cube_centre(self):
        sample = crop_normalize(frame_of(plane(800.0)), CropSpec((0.0, 0.0, 800.0)))
        assert sample.patch.shape == (1, 96, 96)
        assert sample.patch.dtype == np.float32
        assert not sample.patch.any()

    def test_plane_behind_centre(self):
        sample = crop_normalize(frame_of(plane(875.0)), CropSpec((0.0, 0.0, 800.0)))
        np.testing.assert_allclose(sample.patch, 0.5, atol=1e-6)

    def test_missing_half_is_background(self):
        depth = plane(800.0)
        depth[:, 160:] = 0.0
        patch = crop_normalize(frame_of(depth), CropSpec((0.0, 0.0, 800.0))).patch[0]
        assert np.mean(patch == 1.0) == pytest.approx(0.5, abs=1.0 / 96)
        assert np.all(patch[:, :40] == 0.0)
        assert np.all(patch[:, 56:] == 1.0)

    def test_point_lands_on_its_patch_pixel(self):
        point = np.array([40.0, -30.0, 800.0])
        u, v = np.rint(SYNTH_INTRINSICS.project(point)[0]).astype(int)
        depth = np.zeros(SHAPE)
        depth[v - 2:v + 3, u - 2:u + 3] = 800.0
        spec = CropSpec((0.0, 0.0, 800.0))
        patch = crop_normalize(frame_of(depth), spec).patch[0]

        weight = 1.0 - patch
        rows, cols = np.mgrid[0:96, 0:96]
        centroid = np.array([(weight * cols).sum(), (weight * rows).sum()]) / weight.sum()
        square_centre = SYNTH_INTRINSICS.backproject([[u, v]], [800.0])
        expected = MID + 48.0 * normalize_joints(square_centre, spec)[0, :2]
        assert np.abs(centroid - expected).max() < 0.5

    def test_joint_normalization_round_trip(self, rng):
        spec = CropSpec((12.0, -7.0, 430.0), cube_size=250.0)
        joints = rng.uniform(-200, 600, size=(21, 3))
        np.testing.assert_allclose(denormalize_joints(normalize_joints(joints, spec), spec), joints)
        np.testing.assert_allclose(normalize_joints([[12.0, -7.0, 555.0]], spec), [[0.0, 0.0, 1.0]])

    def test_cube_corner_maps_to_unit_corner(self):
        spec = CropSpec((10.0, 20.0, 500.0), cube_size=300.0)
        corners = np.array([[160.0, 170.0, 650.0], [-140.0, -130.0, 350.0]])
        np.testing.assert_allclose(normalize_joints(corners, spec), [[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]])

    def test_cube_off_image(self):
        with pytest.raises(CropError):
            crop_normalize(frame_of(plane(800.0)), CropSpec((5000.0, 0.0, 800.0)))

    def test_cube_behind_camera(self):
        with pytest.raises(CropError):
            crop_normalize(frame_of(plane(800.0)), CropSpec((0.0, 0.0, -10.0)))

    def test_invalid_cube_size(self):
        with pytest.raises(ValidationError):
            CropSpec((0.0, 0.0, 500.0), cube_size=0.0)

    def test_mass_centre(self):
        depth = plane(900.0)
        depth[100:120, 150:170] = 500.0
        center = estimate_mass_center(depth, SYNTH_INTRINSICS)
        assert center[2] == pytest.approx(500.0)
        np.testing.assert_allclose(
            SYNTH_INTRINSICS.project(center)[0], [159.5, 109.5], atol=1e-6
        )

    def test_mass_centre_needs_depth(self):
        with pytest.raises(CropError):
            estimate_mass_center(np.zeros(SHAPE), SYNTH_INTRINSICS)

    def test_palm_centre_needs_joints(self, msra_topology):
        with pytest.raises(UsageError):
            cube_center(frame_of(plane(500.0)), msra_topology, "palm")


# =============================================================================
# Augmentation
# =============================================================================

def blob_sample(xy, sigma=2.5):
    """Background patch with a dark Gaussian dot at the joint's pixel"""
    rows, cols = np.mgrid[0:PATCH_SIZE, 0:PATCH_SIZE].astype(np.float64)
    px, py = MID + 48.0 * np.asarray(xy)
    g = np.exp(-((cols - px) ** 2 + (rows - py) ** 2) / (2.0 * sigma ** 2))
    patch = (1.0 - 2.0 * g)[None].astype(np.float32)
    joints = np.array([[xy[0], xy[1], 0.2]])
    return HandSample(patch=patch, joints_norm=joints, crop=CropSpec((0.0, 0.0, 500.0)))


def dot_centroid(patch):
    core = patch < 0
    weight = -patch[core]
    rows, cols = np.nonzero(core)
    return np.array([(weight * cols).sum(), (weight * rows).sum()]) / weight.sum()


class TestAugmentation:

    def test_identity(self, rng):
        sample = blob_sample((0.1, -0.2))
        out = apply_augmentation(sample, AugmentParams())
        np.testing.assert_allclose(out.patch, sample.patch, atol=1e-6)
        np.testing.assert_allclose(out.joints_norm, sample.joints_norm)

    def test_half_turn_negates_xy(self):
        sample = blob_sample((0.2, -0.1))
        out = apply_augmentation(sample, AugmentParams(rotation_deg=180.0))
        np.testing.assert_allclose(out.joints_norm[0], [-0.2, 0.1, 0.2], atol=1e-12)
        np.testing.assert_allclose(dot_centroid(out.patch[0]), MID + 48.0 * np.array([-0.2, 0.1]), atol=0.5)

    def test_draw_ranges(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            params = draw_augmentation(rng)
            assert -180.0 <= params.rotation_deg <= 180.0
            assert all(-10.0 <= t <= 10.0 for t in params.translation_px)
            assert 0.9 <= params.scale <= 1.1

    def test_dot_follows_joint(self):
        rng = np.random.default_rng(17)
        worst = 0.0
        for seed in range(1000):
            xy = rng.uniform(-0.3, 0.3, size=2)
            out = augment(blob_sample(xy), seed)
            predicted = MID + 48.0 * out.joints_norm[0, :2]
            worst = max(worst, np.abs(dot_centroid(out.patch[0]) - predicted).max())
        assert worst < 0.5

    def test_depth_and_z_scale_together(self):
        sample = blob_sample((0.0, 0.0))
        out = apply_augmentation(sample, AugmentParams(scale=1.1))
        assert out.joints_norm[0, 2] == pytest.approx(0.2 / 1.1)
        assert out.patch[0, 48, 48] == pytest.approx(sample.patch[0, 48, 48] / 1.1, abs=0.05)

    def test_background_stays_exact(self):
        out = augment(blob_sample((0.0, 0.0)), 5)
        assert out.patch[0, 0, 0] == 1.0
        assert out.patch.max() == 1.0
        assert out.patch.min() >= -1.0

    def test_seeded(self):
        sample = blob_sample((0.05, 0.05))
        assert augment(sample, 9).patch.tobytes() == augment(sample, 9).patch.tobytes()

    def test_unannotated_sample(self):
        sample = blob_sample((0.0, 0.0))
        sample.joints_norm = None
        assert augment(sample, 1).joints_norm is None


# =============================================================================
# Synthetic hand
# =============================================================================

def closed_form_chain(pose, finger_index, joint_count):
    name = FINGER_NAMES[finger_index]
    splay = rotation_matrix("z", HAND_GEOMETRY["splay_deg"][name] + pose.abduction[finger_index])
    mcp = np.asarray(HAND_GEOMETRY["mcp"][name]) * pose.scale
    lengths = link_lengths(HAND_GEOMETRY["length"][name] * pose.scale, joint_count - 1)
    angles = np.deg2rad(np.cumsum(pose.flexion[finger_index][: joint_count - 1]))
    steps = np.column_stack([np.zeros_like(angles), np.cos(angles), -np.sin(angles)]) * lengths[:, None]
    offsets = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
    return mcp + offsets @ splay.T


class TestKinematics:

    def test_link_lengths(self):
        lengths = link_lengths(80.0, 3)
        assert lengths.sum() == pytest.approx(80.0)
        assert lengths[1] / lengths[0] == pytest.approx(0.7)

    def test_extended_finger(self):
        points = finger_chain_points(HandPose(), FINGER_NAMES.index("middle"), 4)
        np.testing.assert_allclose(points[-1], [-6.0, 50.0 + 88.0, 0.0], atol=1e-9)

    def test_right_angle_curls_away_from_back(self):
        pose = HandPose()
        pose.flexion[2, 0] = 90.0
        points = finger_chain_points(pose, FINGER_NAMES.index("middle"), 2)
        np.testing.assert_allclose(points[1], [-6.0, 50.0, -88.0], atol=1e-9)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pose = HandPose.random(rng, links=3, scale=rng.uniform(0.9, 1.1))
            for k in range(5):
                np.testing.assert_allclose(finger_chain_points(pose, k, 4), closed_form_chain(pose, k, 4), atol=1e-9)

    def test_unabducted_chain_is_planar(self):
        rng = np.random.default_rng(4)
        pose = HandPose.random(rng)
        pose.abduction[:] = 0.0
        for k, name in enumerate(FINGER_NAMES):
            points = finger_chain_points(pose, k, 4)
            normal = rotation_matrix("z", HAND_GEOMETRY["splay_deg"][name]) @ np.array([1.0, 0.0, 0.0])
            np.testing.assert_allclose((points - points[0]) @ normal, 0.0, atol=1e-9)

    def test_camera_placement(self, icvl_topology):
        joints = hand_joints(HandPose(), icvl_topology)
        np.testing.assert_allclose(joints[0], [0.0, 0.0, 600.0])
        assert joints.shape == (16, 3)
        # fingers point up the image: negative camera y
        assert joints[icvl_topology.finger("middle").joints[-1], 1] < -100.0

    def test_open_hand_is_flat(self, msra_topology):
        joints = hand_joints(HandPose(), msra_topology)
        np.testing.assert_allclose(joints[:, 2], 600.0, atol=1e-9)

    def test_joints_independent_of_resolution(self, nyu_topology):
        pose = HandPose.random(np.random.default_rng(6), links=1)
        small = Intrinsics(237.5, 237.5, 79.5, 59.5)
        low = synth_hand(pose, nyu_topology, intrinsics=small, shape=(120, 160))
        high = synth_hand(pose, nyu_topology)
        np.testing.assert_array_equal(low.joints, high.joints)
        assert low.depth.shape == (120, 160)

    def test_flexion_moves_tips_away_from_camera(self, icvl_topology):
        pose = HandPose()
        pose.flexion[:, :] = 45.0
        joints = hand_joints(pose, icvl_topology)
        tips = [f.joints[-1] for f in icvl_topology.fingers]
        assert np.all(joints[tips, 2] > 600.0)

    @pytest.mark.parametrize("field,value", [("flexion", 95.0), ("abduction", -25.0)])
    def test_angle_limits(self, icvl_topology, field, value):
        pose = HandPose()
        getattr(pose, field).flat[0] = value
        with pytest.raises(ValidationError):
            hand_joints(pose, icvl_topology)

    def test_unknown_palm_landmark(self, msra_topology):
        document = msra_topology.to_dict()
        document["joint_names"][0] = "elbow"
        with pytest.raises(ValidationError):
            hand_joints(HandPose(), JointTopology.from_dict(document))


class TestRendering:

    def test_visible_tip_depth(self, icvl_topology):
        pose = HandPose()
        joints = hand_joints(pose, icvl_topology)
        depth = render_hand(pose, icvl_topology, SYNTH_INTRINSICS, SHAPE)
        tip = joints[icvl_topology.finger("middle").joints[-1]]
        u, v = np.rint(SYNTH_INTRINSICS.project(tip)[0]).astype(int)
        assert depth[v, u] == pytest.approx(tip[2] - HAND_GEOMETRY["radius"]["middle"], abs=0.5)

    def test_curled_tip_is_occluded_by_palm(self, icvl_topology):
        pose = HandPose()
        pose.flexion[FINGER_NAMES.index("index"), :2] = 90.0
        joints = hand_joints(pose, icvl_topology)
        depth = render_hand(pose, icvl_topology, SYNTH_INTRINSICS, SHAPE)
        tip = joints[icvl_topology.finger("index").joints[-1]]
        u, v = np.rint(SYNTH_INTRINSICS.project(tip)[0]).astype(int)
        assert 0 < depth[v, u] < tip[2] - 10.0

    def test_background_is_missing(self, icvl_topology):
        depth = render_hand(HandPose(), icvl_topology, SYNTH_INTRINSICS, SHAPE)
        assert depth[0, 0] == 0.0
        assert np.all(depth >= 0.0)
        assert 0.02 < np.mean(depth > 0) < 0.6

    def test_synth_frame_is_quantized(self, msra_topology):
        frame = synth_hand(HandPose.random(np.random.default_rng(1)), msra_topology, seed=1, noise_mm=1.0)
        units = frame.depth * 10.0
        np.testing.assert_allclose(units, np.rint(units), atol=1e-6)
        assert frame.joints.shape == (21, 3)

    def test_synth_frame_is_seeded(self, msra_topology):
        pose = HandPose.random(np.random.default_rng(1))
        first = synth_hand(pose, msra_topology, seed=5, noise_mm=2.0)
        second = synth_hand(pose, msra_topology, seed=5, noise_mm=2.0)
        assert first.depth.tobytes() == second.depth.tobytes()

    def test_crop_of_synthetic_hand(self, nyu_topology):
        frame = synth_hand(HandPose(), nyu_topology)
        sample = prepare_samples([frame], nyu_topology)[0]
        assert sample.patch.min() < 0.0
        assert sample.patch.max() == 1.0
        assert np.abs(sample.joints_norm).max() < 1.5


# =============================================================================
# Files and manifests
# =============================================================================

class TestDepthFiles:

    @pytest.mark.parametrize("suffix,scale", [(".dpt", 100), (".png", 1000)])
    def test_round_trip(self, tmp_path, rng, suffix, scale):
        depth = np.where(rng.random(SHAPE) < 0.3, 0.0, rng.uniform(200.0, 1500.0, SHAPE))
        path = write_depth(tmp_path / f"frame{suffix}", depth, scale)
        loaded = read_depth(path, scale)
        np.testing.assert_allclose(loaded, depth, atol=scale / 2000.0 + 1e-9)
        assert loaded.shape == SHAPE

    def test_truncated_dpt(self, tmp_path):
        path = write_depth(tmp_path / "frame.dpt", plane(500.0, (4, 4)), 100)
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(ValidationError):
            read_depth(path)

    @pytest.mark.parametrize("name", ["absent.dpt", "absent.png"])
    def test_missing_file(self, tmp_path, name):
        with pytest.raises(ValidationError, match=name):
            read_depth(tmp_path / name)

    def test_colour_png(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
        with pytest.raises(ValidationError):
            read_depth(path)

    def test_unreadable_png(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image")
        with pytest.raises(ValidationError):
            read_depth(path)


class TestManifest:

    def _write(self, tmp_path, lines):
        path = tmp_path / "manifest.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path, icvl_topology):
        frames = [synth_hand(HandPose(), icvl_topology, subject=s) for s in (0, 1)]
        entries = []
        for index, frame in enumerate(frames):
            name = f"depth/{index}.dpt"
            write_depth(tmp_path / name, frame.depth, 100)
            entries.append(manifest_entry(name, frame))
        manifest = write_manifest(tmp_path / "manifest.jsonl", entries)

        loaded = list(load_manifest(manifest, icvl_topology))
        assert [f.subject for f in loaded] == [0, 1]
        np.testing.assert_allclose(loaded[1].joints, frames[1].joints)
        np.testing.assert_allclose(loaded[0].depth, frames[0].depth, atol=1e-9)

    def test_records_sorted_keys(self, tmp_path, icvl_topology):
        entry = manifest_entry("a.dpt", synth_hand(HandPose(), icvl_topology))
        line = write_manifest(tmp_path / "m.jsonl", [entry]).read_text().splitlines()[0]
        assert list(json.loads(line)) == sorted(json.loads(line))

    def test_invalid_json_reports_line(self, tmp_path):
        path = self._write(tmp_path, [
            json.dumps({"depth": "a.dpt", "intrinsics": [1, 1, 0, 0]}),
            "{not json",
        ])
        with pytest.raises(ManifestParseError) as excinfo:
            list(iter_manifest_records(path))
        assert excinfo.value.line_number == 2
        assert str(excinfo.value).startswith(f"{path}:2:")

    @pytest.mark.parametrize("record,reason", [
        ({"intrinsics": [1, 1, 0, 0]}, "depth"),
        ({"depth": "a.dpt", "intrinsics": [1, 1]}, "intrinsics"),
        ({"depth": "a.dpt", "intrinsics": [1, 1, 0, 0], "joints": [1, 2, 3, 4]}, "multiple of 3"),
    ])
    def test_malformed_record(self, tmp_path, record, reason):
        path = self._write(tmp_path, [json.dumps(record)])
        with pytest.raises(ManifestParseError, match=reason):
            list(iter_manifest_records(path))

    def test_joint_count_must_match_topology(self, tmp_path, msra_topology):
        record = {"depth": "a.dpt", "intrinsics": [1, 1, 0, 0], "joints": [0.0] * 48}
        path = self._write(tmp_path, [json.dumps(record)])
        with pytest.raises(ValidationError):
            list(iter_manifest_records(path, msra_topology))

    def test_blank_lines_and_optional_joints(self, tmp_path):
        path = self._write(tmp_path, ["", json.dumps({"depth": "x/a.dpt", "intrinsics": [1, 2, 3, 4]}), ""])
        records = list(iter_manifest_records(path))
        assert len(records) == 1
        assert records[0].line_number == 2
        assert records[0].joints is None
        assert records[0].depth_path == tmp_path / "x" / "a.dpt"

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(UsageError):
            list(iter_manifest_records(tmp_path / "absent.jsonl"))


# =============================================================================
# Preparation and splits
# =============================================================================

class TestPreparation:

    def test_worker_count_keeps_order(self, icvl_topology):
        builder = SyntheticDatasetBuilder(icvl_topology, seed=3)
        frames = list(builder.frames(6))
        serial = prepare_samples(frames, icvl_topology, workers=1)
        parallel = prepare_samples(frames, icvl_topology, workers=3)
        for a, b in zip(serial, parallel):
            assert a.patch.tobytes() == b.patch.tobytes()
            np.testing.assert_array_equal(a.joints_norm, b.joints_norm)

    @pytest.mark.parametrize("preset", ["msra", "icvl", "nyu"])
    def test_synthetic_joints_stay_in_cube(self, preset):
        topology = resolve_topology(preset)
        samples = prepare_samples(SyntheticDatasetBuilder(topology, seed=0).frames(24), topology)
        for sample in samples:
            assert np.abs(sample.joints_norm).max() <= 1.0

    @pytest.mark.parametrize("preset", ["msra", "icvl", "nyu"])
    @pytest.mark.parametrize("rotation", [(0, 0, 0), (90, 0, 0), (0, 90, 0), (30, -30, 60)])
    def test_open_large_hand_fits_cube(self, preset, rotation):
        topology = resolve_topology(preset)
        pose = HandPose(abduction=np.full(5, 15.0), rotation=np.array(rotation, dtype=float), scale=1.1)
        joints = hand_joints(pose, topology)
        spec = CropSpec(center=tuple(palm_center(joints, topology)), cube_size=300.0)
        assert np.abs(normalize_joints(joints, spec)).max() <= 1.0

    def test_palm_centre_uses_finger_roots(self, msra_topology):
        joints = np.zeros((msra_topology.joint_count, 3))
        for finger in msra_topology.fingers:
            joints[finger.joints[0]] = [0.0, 60.0, 600.0]
            joints[finger.joints[-1]] = [0.0, 150.0, 600.0]
        joints[msra_topology.palm[0]] = [0.0, 0.0, 600.0]
        np.testing.assert_allclose(palm_center(joints, msra_topology), [0.0, 50.0, 600.0])

    def test_leave_one_subject_out(self):
        folds = list(leave_one_subject_out([0, 1, 0, 2, 1]))
        assert [subject for subject, _, _ in folds] == [0, 1, 2]
        subject, train, test = folds[0]
        assert test.tolist() == [0, 2]
        assert train.tolist() == [1, 3, 4]
        for _, train, test in folds:
            assert set(train).isdisjoint(test)
            assert sorted(set(train) | set(test)) == [0, 1, 2, 3, 4]

    def test_leave_one_subject_out_on_frames(self):
        frames = [frame_of(plane(500.0, (2, 2)), subject=s) for s in (3, 1, 3)]
        assert [s for s, _, _ in leave_one_subject_out(frames)] == [1, 3]


class TestSyntheticDatasetBuilder:

    def test_frame_count_must_be_positive(self, msra_topology):
        with pytest.raises(UsageError):
            list(SyntheticDatasetBuilder(msra_topology).frames(0))

    def test_subjects_cycle(self, msra_topology):
        frames = list(SyntheticDatasetBuilder(msra_topology, seed=1, subjects=3).frames(5))
        assert [f.subject for f in frames] == [0, 1, 2, 0, 1]

    def test_build_is_reproducible(self, tmp_path, icvl_topology):
        first = SyntheticDatasetBuilder(icvl_topology, seed=8, noise_mm=1.0).build(tmp_path / "a", 3)
        second = SyntheticDatasetBuilder(icvl_topology, seed=8, noise_mm=1.0).build(tmp_path / "b", 3)
        assert first.read_bytes() == second.read_bytes()
        for index in range(3):
            name = f"depth/{index:05d}.dpt"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "topology.json").exists()
        assert len(list(load_manifest(first, icvl_topology))) == 3
