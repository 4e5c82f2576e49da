"""
Tests for MOTIONTOK pose sequences, preprocessing, metrics, synthetic motion and pose files.
"""

import pytest
import sys
import os
import tempfile

import numpy as np
from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.skeleton import (
    PoseSequence, CameraModel, CoordinateSpace, JointLayout, TaskSample, Task,
    H36M_LAYOUT, H36M_REST_POSE,
)
from core.geometry import preprocess, unproject, root_depths
from core.metrics import mpjpe, n_mpjpe, per_frame_errors, horizon_frames, motion_magnitude
from core.synth import SynthConfig, synth_motion, bone_lengths, constant_velocity_motion, linear_motion
from core.mskl import encode_mskl, decode_mskl, read_mskl, write_mskl
from core.dataset import generate_clips, save_clips, load_clips, chunk_clips, split_clip, synth_clip
from errors import (
    ShapeError, DataError, CoordinateSpaceError, DegenerateProjectionError,
    FormatError, EmptyDatasetError,
)
import config


def random_pair(seed: int, frames: int = 4):
    rng = np.random.default_rng(seed)
    gt = rng.normal(0.0, 300.0, size=(frames, config.NUM_JOINTS, 3))
    pred = gt * rng.uniform(0.5, 1.5) + rng.normal(0.0, 50.0, size=gt.shape)
    return pred, gt


class TestPoseSequence:
    """Test pose sequence validation."""

    def test_shape_is_checked(self):
        """Test that poses must be F x N x 3."""
        with pytest.raises(ShapeError):
            PoseSequence(data=np.zeros((4, config.NUM_JOINTS, 2)))
        with pytest.raises(ShapeError):
            PoseSequence(data=np.zeros((4, 5, 3)))

    def test_non_finite_rejected(self):
        """Test that NaN positions are rejected."""
        data = np.ones((2, config.NUM_JOINTS, 3))
        data[1, 3, 0] = np.nan
        with pytest.raises(DataError):
            PoseSequence(data=data)

    def test_pixel_space_root_depth_must_be_zero(self):
        """Test the pixel_rootrel root-depth invariant."""
        data = np.zeros((2, config.NUM_JOINTS, 3))
        data[0, 0, 2] = 1.0
        with pytest.raises(DataError):
            PoseSequence(data=data, coordinate_space=CoordinateSpace.PIXEL_ROOTREL)

    def test_data_is_read_only(self):
        """Test that sequences are immutable."""
        seq = constant_velocity_motion(3, (1.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            seq.data[0, 0, 0] = 5.0

    def test_layout_groups_partition_joints(self):
        """Test the body-part partition of the H36M layout."""
        assert H36M_LAYOUT.has_canonical_groups
        assert H36M_LAYOUT.group_of(H36M_LAYOUT.root_index) == "torso"
        with pytest.raises(DataError):
            JointLayout(names=("a", "b"), root_index=0, groups={"torso": (0,)})

    def test_task_sample_requirements(self):
        """Test that PE needs features and MP/MIB need an input pose."""
        seq = constant_velocity_motion(2, (0.0, 0.0, 0.0))
        with pytest.raises(DataError):
            TaskSample(task=Task.PE, target_pose=seq)
        with pytest.raises(DataError):
            TaskSample(task=Task.MP, target_pose=seq)
        sample = TaskSample(task="mib", target_pose=seq, input_pose=seq)
        assert sample.task is Task.MIB


class TestGeometry:
    """Test preprocessing and its inverse."""

    def test_round_trip(self):
        """Test that unproject inverts preprocess given the root depth."""
        seq = synth_motion(SynthConfig(frames=16), seed=3)
        cam = CameraModel()
        px = preprocess(seq, cam)
        back = unproject(px, cam, root_depths(seq))
        assert np.max(np.abs(back.data - seq.data)) < 1e-6

    def test_root_depth_zero(self):
        """Test that the root joint has depth exactly 0 after preprocessing."""
        px = preprocess(synth_motion(SynthConfig(frames=8), seed=1), CameraModel())
        assert px.coordinate_space is CoordinateSpace.PIXEL_ROOTREL
        assert np.all(px.data[:, H36M_LAYOUT.root_index, 2] == 0.0)

    def test_projection_formula(self):
        """Test u = fx * X / Z + cx on a single joint."""
        seq = constant_velocity_motion(1, (0.0, 0.0, 0.0), depth=4000.0)
        cam = CameraModel(focal=(1000.0, 1000.0), principal_point=(500.0, 400.0))
        px = preprocess(seq, cam)
        x, y, z = seq.data[0, 1]
        assert px.data[0, 1, 0] == pytest.approx(1000.0 * x / z + 500.0)
        assert px.data[0, 1, 1] == pytest.approx(1000.0 * y / z + 400.0)

    def test_wrong_space_rejected(self):
        """Test coordinate-space checks."""
        px = preprocess(constant_velocity_motion(2, (0.0, 0.0, 0.0)), CameraModel())
        with pytest.raises(CoordinateSpaceError):
            preprocess(px, CameraModel())
        with pytest.raises(CoordinateSpaceError):
            root_depths(px)

    def test_degenerate_depth(self):
        """Test that joints behind the camera are rejected."""
        seq = constant_velocity_motion(2, (0.0, 0.0, 0.0), depth=-10.0)
        with pytest.raises(DegenerateProjectionError):
            preprocess(seq, CameraModel())

    def test_root_depth_length_checked(self):
        """Test that unproject needs one root depth per frame."""
        seq = constant_velocity_motion(3, (0.0, 0.0, 0.0))
        px = preprocess(seq, CameraModel())
        with pytest.raises(ShapeError):
            unproject(px, CameraModel(), [4500.0])


class TestMetrics:
    """Test MPJPE and N-MPJPE."""

    def test_mpjpe_identity(self):
        """Test mpjpe(a, a) = 0."""
        seq = synth_motion(SynthConfig(frames=4), seed=0)
        assert mpjpe(seq, seq) == 0.0

    def test_constant_offset(self):
        """Test that a (3, 4, 0) offset gives exactly 5 mm."""
        seq = synth_motion(SynthConfig(frames=4), seed=0)
        moved = seq.with_data(seq.data + np.array([3.0, 4.0, 0.0]))
        assert abs(mpjpe(moved, seq) - 5.0) < 1e-9

    def test_shape_mismatch(self):
        """Test that shapes must agree."""
        with pytest.raises(ShapeError):
            mpjpe(np.zeros((2, 17, 3)), np.zeros((3, 17, 3)))

    def test_space_mismatch(self):
        """Test that coordinate spaces must agree."""
        seq = constant_velocity_motion(2, (0.0, 0.0, 0.0))
        with pytest.raises(ShapeError):
            mpjpe(preprocess(seq, CameraModel()), seq)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_n_mpjpe_never_exceeds_mpjpe(self, seed):
        """Test n_mpjpe <= mpjpe on random pairs."""
        pred, gt = random_pair(seed)
        assert n_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9

    def test_scaled_prediction(self):
        """Test that a uniformly scaled prediction aligns exactly."""
        _, gt = random_pair(7)
        assert n_mpjpe(2.0 * gt, gt) < 1e-6
        assert n_mpjpe(2.0 * gt, gt, method="least_squares") < 1e-6
        assert n_mpjpe(0.5 * gt, gt, per_frame=True) < 1e-6

    def test_optimal_not_worse_than_least_squares(self):
        """Test that the optimal scale beats the closed form."""
        pred, gt = random_pair(11)
        assert n_mpjpe(pred, gt) <= n_mpjpe(pred, gt, method="least_squares") + 1e-9

    def test_default_scale_matches_grid_search(self):
        """Test the default scale against a dense search over s in [0.5, 2.0]."""
        pred, gt = random_pair(13)
        grid_min = min(mpjpe(s * pred, gt) for s in np.arange(0.5, 2.0 + 1e-9, 1e-4))
        assert grid_min >= n_mpjpe(pred, gt) - 1e-6
        assert n_mpjpe(pred, gt) == n_mpjpe(pred, gt, method="optimal")

    def test_unknown_method(self):
        """Test that unknown scale methods are rejected."""
        pred, gt = random_pair(0)
        with pytest.raises(DataError):
            n_mpjpe(pred, gt, method="median")

    def test_per_frame_errors(self):
        """Test the per-frame curve."""
        gt = np.zeros((3, 17, 3))
        pred = gt.copy()
        pred[2] += np.array([0.0, 0.0, 2.0])
        assert np.allclose(per_frame_errors(pred, gt), [0.0, 0.0, 2.0])

    def test_horizon_frames(self):
        """Test that 80/160/320 ms land on frames 4/8/16 at 50 Hz."""
        assert [horizon_frames(ms, 50.0) for ms in (80, 160, 320)] == [4, 8, 16]
        with pytest.raises(DataError):
            horizon_frames(10, 50.0)

    def test_motion_magnitude(self):
        """Test that a static clip has zero motion."""
        assert motion_magnitude(synth_motion(SynthConfig.static(8), seed=0)) < 1e-9
        assert motion_magnitude(synth_motion(SynthConfig(frames=16), seed=0)) > 0.0


class TestSynthMotion:
    """Test the synthetic generator."""

    def test_deterministic(self):
        """Test that the same seed gives the same clip."""
        a = synth_motion(SynthConfig(frames=16), seed=5)
        b = synth_motion(SynthConfig(frames=16), seed=5)
        c = synth_motion(SynthConfig(frames=16), seed=6)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_bone_lengths_preserved(self):
        """Test that forward kinematics keeps bone lengths."""
        seq = synth_motion(SynthConfig(frames=32), seed=2)
        lengths = bone_lengths(seq)
        rest = bone_lengths(PoseSequence(data=H36M_REST_POSE[None] + np.array([0.0, 0.0, 4500.0])))
        assert np.max(np.abs(lengths - rest)) < 1e-6 * rest.max()

    def test_static_config_is_rest_pose(self):
        """Test that zero amplitudes reproduce the rest pose."""
        seq = synth_motion(SynthConfig.static(4), seed=9)
        expected = H36M_REST_POSE + np.array([0.0, 0.0, config.DEFAULT_SUBJECT_DEPTH])
        assert np.allclose(seq.data, expected[None])

    def test_positive_depth(self):
        """Test that generated joints stay in front of the camera."""
        for clip in generate_clips(10, 32, seed=0):
            assert np.all(clip.pose.data[..., 2] > 0)

    def test_constructed_fixtures(self):
        """Test constant-velocity and linear motion generators."""
        seq = constant_velocity_motion(5, (10.0, 0.0, 0.0))
        assert np.allclose(np.diff(seq.data[:, 0, 0]), 10.0)
        start = H36M_REST_POSE + np.array([0.0, 0.0, 4000.0])
        end = start + 100.0
        lin = linear_motion(3, start, end)
        assert np.allclose(lin.data[1], start + 50.0)
        with pytest.raises(DataError):
            linear_motion(1, start, end)
        with pytest.raises(ShapeError):
            linear_motion(3, start, end[:5])


class TestMskl:
    """Test MSKL pose files."""

    def test_round_trip(self):
        """Test binary write/read within float32 precision."""
        seq = synth_motion(SynthConfig(frames=8), seed=0).with_data(
            synth_motion(SynthConfig(frames=8), seed=0).data, label="walking")
        back = decode_mskl(encode_mskl(seq))
        assert back.num_joints == 17
        assert back.label == "walking"
        assert back.coordinate_space is CoordinateSpace.CAMERA_MM
        assert np.allclose(back.data, seq.data, atol=1e-3)

    def test_json_variant(self):
        """Test the pure-JSON variant."""
        seq = preprocess(synth_motion(SynthConfig(frames=4), seed=1), CameraModel())
        back = decode_mskl(encode_mskl(seq, json_variant=True))
        assert back.coordinate_space is CoordinateSpace.PIXEL_ROOTREL
        assert np.allclose(back.data, seq.data, atol=1e-3)

    def test_deterministic_bytes(self):
        """Test that encoding is byte-stable."""
        seq = synth_motion(SynthConfig(frames=4), seed=1)
        assert encode_mskl(seq) == encode_mskl(seq)

    def test_bad_version(self):
        """Test that unknown versions are rejected."""
        data = encode_mskl(synth_motion(SynthConfig(frames=2), seed=1))
        bad = data.replace(b'"version":1', b'"version":9', 1)
        with pytest.raises(FormatError):
            decode_mskl(bad)

    def test_truncated_payload(self):
        """Test that partial frames are rejected."""
        data = encode_mskl(synth_motion(SynthConfig(frames=2), seed=1))
        with pytest.raises(FormatError):
            decode_mskl(data[:-5])

    def test_garbage_header(self):
        """Test that non-JSON headers are rejected."""
        with pytest.raises(FormatError):
            decode_mskl(b"not a header\n\x00\x01")

    def test_file_io(self):
        """Test write_mskl / read_mskl."""
        seq = synth_motion(SynthConfig(frames=4), seed=2)
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "clip.mskl")
            write_mskl(path, seq)
            assert np.allclose(read_mskl(path).data, seq.data, atol=1e-3)
            with pytest.raises(FormatError):
                read_mskl(os.path.join(d, "missing.mskl"))


class TestDataset:
    """Test clip datasets."""

    def test_generate_deterministic(self):
        """Test that generated datasets depend only on the seed."""
        a = generate_clips(3, 16, seed=4)
        b = generate_clips(3, 16, seed=4)
        assert all(np.array_equal(x.pose.data, y.pose.data) for x, y in zip(a, b))
        assert all(c.num_frames == 16 for c in a)

    def test_save_and_load(self):
        """Test the on-disk dataset with cameras."""
        clips = generate_clips(2, 8, seed=0, camera=CameraModel(focal=(900.0, 900.0)))
        with tempfile.TemporaryDirectory() as d:
            save_clips(d, clips)
            loaded = load_clips(d)
        assert len(loaded) == 2
        assert loaded[0].camera.focal == (900.0, 900.0)
        assert np.allclose(loaded[1].pose.data, clips[1].pose.data, atol=1e-3)

    def test_empty_directory(self):
        """Test that an empty directory is an error."""
        with tempfile.TemporaryDirectory() as d:
            with pytest.raises(EmptyDatasetError):
                load_clips(d)

    def test_chunk_and_split(self):
        """Test chunking and history/future splits."""
        clip = synth_clip(0, frames=36)
        chunks = chunk_clips([clip], 16)
        assert len(chunks) == 2
        assert np.array_equal(chunks[1].pose.data, clip.pose.data[16:32])
        history, future = split_clip(clip.slice_frames(0, 32), 16)
        assert history.num_frames == future.num_frames == 16

    def test_clip_to_camera(self):
        """Test that a clip unprojects its own pixel pose."""
        clip = synth_clip(1, frames=8)
        back = clip.to_camera(clip.pixel_pose)
        assert mpjpe(back, clip.pose) < 1e-6
