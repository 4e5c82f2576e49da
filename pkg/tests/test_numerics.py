"""
Tests for MOTIONTOK numeric operators, gradient checks and checkpoints.
"""

import pytest
import sys
import os
import tempfile

import numpy as np
import torch
import torch.nn as nn
from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from numerics.ops import (
    FeatureMapSequence, bilinear_sample, bilinear_sample_torch, stop_gradient,
    straight_through, uniform_fan_in_, zero_, count_parameters,
)
from numerics.gradcheck import grad_check
from numerics.checkpoint import (
    serialize_checkpoint, deserialize_checkpoint, save_checkpoint, load_checkpoint,
)
from errors import ShapeError, NumericError, CheckpointError
import config


class _WrongBackward(torch.autograd.Function):
    """2x forward with a 3x backward."""

    @staticmethod
    def forward(ctx, x):
        return 2.0 * x

    @staticmethod
    def backward(ctx, grad):
        return 3.0 * grad


@pytest.fixture
def grid():
    rng = np.random.default_rng(0)
    return rng.normal(size=(5, 7, 3))


class TestFeatureMaps:
    """Test the feature-map container."""

    def test_shape_is_checked(self):
        """Test that maps must be F x H x W x C."""
        with pytest.raises(ShapeError):
            FeatureMapSequence(np.zeros((4, 4, 3)))

    def test_non_finite_rejected(self):
        """Test that NaN maps are rejected."""
        data = np.zeros((1, 2, 2, 1))
        data[0, 1, 1, 0] = np.inf
        with pytest.raises(NumericError):
            FeatureMapSequence(data)

    def test_properties(self):
        """Test frame, grid and channel accessors."""
        maps = FeatureMapSequence(np.zeros((3, 4, 5, 6)))
        assert maps.num_frames == 3
        assert maps.grid_shape == (4, 5)
        assert maps.channels == 6
        assert maps.to_tensor().shape == (3, 4, 5, 6)

    def test_data_is_read_only(self):
        """Test that the stored array cannot be modified."""
        maps = FeatureMapSequence(np.zeros((1, 2, 2, 1)))
        with pytest.raises(ValueError):
            maps.data[0, 0, 0, 0] = 1.0


class TestBilinearSample:
    """Test bilinear sampling."""

    def test_integer_point_hits_cell(self, grid):
        """Test that integer coordinates return the cell value."""
        np.testing.assert_allclose(bilinear_sample(grid, (3, 2)), grid[2, 3])

    def test_midpoint_is_average(self, grid):
        """Test that the centre of four cells averages them."""
        expected = (grid[1, 1] + grid[1, 2] + grid[2, 1] + grid[2, 2]) / 4
        np.testing.assert_allclose(bilinear_sample(grid, (1.5, 1.5)), expected)

    def test_x_indexes_columns(self, grid):
        """Test that x moves along columns and y along rows."""
        np.testing.assert_allclose(bilinear_sample(grid, (6, 0)), grid[0, 6])
        np.testing.assert_allclose(bilinear_sample(grid, (0, 4)), grid[4, 0])

    def test_border_clamping(self, grid):
        """Test that outside points clamp to the border."""
        np.testing.assert_allclose(bilinear_sample(grid, (-3.0, -1.0)), grid[0, 0])
        np.testing.assert_allclose(bilinear_sample(grid, (100.0, 2.0)), grid[2, 6])
        np.testing.assert_allclose(bilinear_sample(grid, (2.0, 50.0)), grid[4, 2])

    def test_bad_grid_rejected(self):
        """Test that a 2D array is not a grid."""
        with pytest.raises(ShapeError):
            bilinear_sample(np.zeros((3, 3)), (1, 1))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_torch_matches_numpy(self, seed):
        """Test that the batched sampler agrees with the reference one."""
        rng = np.random.default_rng(seed)
        maps = rng.normal(size=(2, 6, 5, 4))
        points = rng.uniform(-2.0, 8.0, size=(2, 3, 2))
        out = bilinear_sample_torch(torch.from_numpy(maps), torch.from_numpy(points)).numpy()
        assert out.shape == (2, 3, 4)
        for b in range(2):
            for m in range(3):
                np.testing.assert_allclose(out[b, m], bilinear_sample(maps[b], points[b, m]), atol=1e-10)

    def test_torch_keeps_leading_dims(self):
        """Test that extra point dimensions are preserved."""
        maps = torch.zeros(2, 4, 4, 3)
        points = torch.zeros(2, 5, 6, 7, 2)
        assert bilinear_sample_torch(maps, points).shape == (2, 5, 6, 7, 3)

    def test_torch_shape_errors(self):
        """Test batched sampler argument checks."""
        with pytest.raises(ShapeError):
            bilinear_sample_torch(torch.zeros(4, 4, 3), torch.zeros(1, 2, 2))
        with pytest.raises(ShapeError):
            bilinear_sample_torch(torch.zeros(1, 4, 4, 3), torch.zeros(2, 2, 2))
        with pytest.raises(ShapeError):
            bilinear_sample_torch(torch.zeros(1, 4, 4, 3), torch.zeros(1, 2, 3))

    def test_gradients_match_finite_differences(self):
        """Test sampler gradients for maps and interior points."""
        rng = np.random.default_rng(1)
        maps = torch.tensor(rng.normal(size=(1, 5, 5, 2)), requires_grad=True)
        points = torch.tensor([[[1.3, 2.6], [3.2, 0.7]]], dtype=torch.float64, requires_grad=True)
        weights = torch.tensor(rng.normal(size=(1, 2, 2)))

        def f():
            return (bilinear_sample_torch(maps, points) * weights).sum()

        report = grad_check(f, {'maps': maps, 'points': points}, eps=1e-5, tol=1e-5)
        assert report.passed, report.to_dict()


class TestGradientControl:
    """Test stop-gradient and straight-through."""

    def test_stop_gradient_blocks(self):
        """Test that no gradient reaches a stopped input."""
        x = torch.ones(3, requires_grad=True)
        y = torch.ones(3, requires_grad=True)
        (stop_gradient(x) * y).sum().backward()
        assert x.grad is None
        torch.testing.assert_close(y.grad, torch.ones(3))

    def test_straight_through_forward_value(self):
        """Test that the forward value is the quantized tensor."""
        z = torch.tensor([0.2, -1.0, 3.0], requires_grad=True)
        q = torch.tensor([0.0, -1.5, 2.0])
        torch.testing.assert_close(straight_through(z, q), q)

    def test_straight_through_copies_gradient(self):
        """Test that dL/dz equals dL/dq."""
        z = torch.tensor([0.2, -1.0, 3.0], requires_grad=True)
        q = torch.tensor([0.0, -1.5, 2.0], requires_grad=True)
        upstream = torch.tensor([1.0, 2.0, -3.0])
        (straight_through(z, q) * upstream).sum().backward()
        torch.testing.assert_close(z.grad, upstream)
        assert q.grad is None or torch.all(q.grad == 0)


class TestInitialisation:
    """Test layer initialisation helpers."""

    def test_uniform_fan_in_bounds(self):
        """Test that weights stay inside 1/sqrt(fan_in)."""
        layer = uniform_fan_in_(nn.Linear(16, 4))
        assert float(layer.weight.abs().max()) <= 0.25
        conv = uniform_fan_in_(nn.Conv2d(4, 2, kernel_size=3))
        assert float(conv.weight.abs().max()) <= 1.0 / 6.0

    def test_zero(self):
        """Test that zero_ clears weight and bias."""
        layer = zero_(nn.Linear(3, 3))
        assert torch.all(layer.weight == 0)
        assert torch.all(layer.bias == 0)

    def test_count_parameters(self):
        """Test parameter counting."""
        assert count_parameters(nn.Linear(3, 4)) == 16


class TestGradCheck:
    """Test the finite-difference gradient checker."""

    def test_passes_on_smooth_function(self):
        """Test a quadratic form in double precision."""
        torch.manual_seed(0)
        w = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
        x = torch.randn(3, dtype=torch.float64)

        report = grad_check(lambda: ((w @ x) ** 2).sum(), [w], eps=1e-4, tol=1e-4)
        assert report.passed
        assert report.checked_entries == 12

    def test_detects_wrong_backward(self):
        """Test that a wrong analytic gradient fails the check."""
        x = torch.tensor([0.5, -1.0], dtype=torch.float64, requires_grad=True)
        report = grad_check(lambda: _WrongBackward.apply(x).sum(), [x])
        assert not report.passed
        assert report.max_rel_error == pytest.approx(1.0 / 3.0, rel=1e-6)
        assert report.worst_parameter.startswith("param0")

    def test_entry_subset(self):
        """Test that max_entries limits the entries checked per tensor."""
        w = torch.randn(10, 10, dtype=torch.float64, requires_grad=True)
        report = grad_check(lambda: (w ** 2).sum(), {'w': w}, max_entries=7)
        assert report.checked_entries == 7

    def test_parameters_restored(self):
        """Test that perturbations are undone."""
        w = torch.randn(3, dtype=torch.float64, requires_grad=True)
        before = w.detach().clone()
        grad_check(lambda: (w ** 3).sum(), [w])
        torch.testing.assert_close(w.detach(), before)

    def test_non_scalar_rejected(self):
        """Test that vector-valued functions are rejected."""
        w = torch.randn(3, dtype=torch.float64, requires_grad=True)
        with pytest.raises(NumericError):
            grad_check(lambda: w * 2, [w])


class TestCheckpoint:
    """Test the MTCK checkpoint format."""

    @pytest.fixture
    def state(self):
        torch.manual_seed(0)
        return {
            'encoder.weight': torch.randn(4, 3),
            'encoder.bias': torch.randn(4),
            'scale': torch.tensor(2.5),
        }

    def test_round_trip(self, state):
        """Test that tensors and metadata survive serialization."""
        meta = {'kind': 'vgmt', 'model': {'num_codes': 16}, 'config_hash': 'abc'}
        loaded, loaded_meta = deserialize_checkpoint(serialize_checkpoint(state, meta))
        assert list(loaded) == list(state)
        for name, tensor in state.items():
            torch.testing.assert_close(loaded[name], tensor)
        assert loaded_meta == meta

    def test_bad_magic(self, state):
        """Test that foreign bytes are rejected."""
        data = serialize_checkpoint(state, {})
        with pytest.raises(CheckpointError):
            deserialize_checkpoint(b'XXXX' + data[4:])

    def test_truncated(self, state):
        """Test that a cut-off payload is rejected."""
        data = serialize_checkpoint(state, {})
        with pytest.raises(CheckpointError):
            deserialize_checkpoint(data[:-3])

    def test_trailing_bytes(self, state):
        """Test that extra bytes after the last record are rejected."""
        data = serialize_checkpoint(state, {})
        with pytest.raises(CheckpointError):
            deserialize_checkpoint(data + b'\x00')

    def test_unsupported_version(self, state):
        """Test that an unknown version is rejected."""
        data = bytearray(serialize_checkpoint(state, {}))
        data[4] = 99
        with pytest.raises(CheckpointError):
            deserialize_checkpoint(bytes(data))

    def test_file_io(self, state):
        """Test save and load through a file."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'model.mtck')
            save_checkpoint(path, state, {'kind': 'test'})
            loaded, meta = load_checkpoint(path)
        assert meta == {'kind': 'test'}
        torch.testing.assert_close(loaded['encoder.weight'], state['encoder.weight'])

    def test_integer_range(self):
        """Test that integer tensors round-trip up to 2**24 and are refused beyond."""
        edge = {'counter': torch.tensor([config.MTCK_MAX_EXACT_INT, -3], dtype=torch.int64)}
        loaded, _ = deserialize_checkpoint(serialize_checkpoint(edge, {}))
        assert loaded['counter'].long().tolist() == [config.MTCK_MAX_EXACT_INT, -3]
        with pytest.raises(CheckpointError):
            serialize_checkpoint({'counter': torch.tensor(config.MTCK_MAX_EXACT_INT + 1)}, {})

    def test_metadata_integers_exact(self, state):
        """Test that large metadata integers survive unchanged."""
        meta = {'step': 2 ** 40 + 1, 'seed': 123_456_789_012}
        _, loaded_meta = deserialize_checkpoint(serialize_checkpoint(state, meta))
        assert loaded_meta == meta

    def test_missing_file(self):
        """Test that a missing file raises CheckpointError."""
        with pytest.raises(CheckpointError):
            load_checkpoint('/nonexistent/model.mtck')
