"""
Tests for MOTIONTOK motion-aware fusion, the motion language model and its
training loss.
"""

import math
import pytest
import sys
import os

import numpy as np
import torch

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from motion_lm import (
    MotionVocabulary, MaftBlock, VisualPrefix, maft_fuse, maft_parameter_count,
    maft_parameter_fraction, MotionLM, LmConfig, uniform_log_loss, build_prompt,
    collate, ar_loss, evaluate_loss, VisualContext, UnifiedTrainConfig, train_unified,
)
from motion_lm.trainer import warmup_cosine, per_task_losses, token_losses
from numerics.ops import FeatureMapSequence, zero_, count_parameters
from numerics.gradcheck import grad_check
from vgmt.tokens import TokenGrid
from core.skeleton import Task
from errors import ConfigError, ShapeError, ContextOverflowError, CheckpointError, EmptyDatasetError
import config

K = 16


def random_grid(seed: int, windows: int = 4) -> TokenGrid:
    rng = np.random.default_rng(seed)
    return TokenGrid(indices=rng.integers(0, K, size=(windows, config.NUM_JOINTS)), num_codes=K)


def random_visual(frames: int, seed: int = 0, grid: int = 8) -> VisualContext:
    rng = np.random.default_rng(seed)
    return VisualContext(
        maps=FeatureMapSequence(rng.normal(size=(frames, grid, grid, config.NUM_JOINTS + 1))),
        ref_points=rng.uniform(0.0, grid - 1.0, size=(frames, config.NUM_JOINTS, 2)),
    )


def small_lm_config(vocab: MotionVocabulary, **changes) -> LmConfig:
    params = dict(vocab_size=len(vocab), layers=1, heads=2, dim=32, context_length=512,
                  visual_dim=16, maft_heads=2, maft_ffn_dim=32, maft_patches=2)
    params.update(changes)
    return LmConfig(**params)


@pytest.fixture
def vocab():
    return MotionVocabulary.build(K)


@pytest.fixture
def model(vocab):
    torch.manual_seed(0)
    return MotionLM(small_lm_config(vocab)).eval()


class TestMaft:
    """Test the motion-aware fusion block."""

    def test_identity_at_init(self):
        """Test that a fresh block returns its grid tokens unchanged."""
        torch.manual_seed(0)
        block = MaftBlock(dim=16, heads=4, ffn_dim=32)
        grid = torch.randn(2, 6, 16)
        pose = torch.randn(2, 9, 16)
        torch.testing.assert_close(maft_fuse(grid, pose, block), grid)

    def test_pose_tokens_matter_once_projection_moves(self):
        """Test that the attention path is live once the output projection moves."""
        torch.manual_seed(0)
        block = MaftBlock(dim=8, heads=2, ffn_dim=16)
        with torch.no_grad():
            block.out_proj.weight.normal_()
        grid = torch.randn(1, 3, 8)
        a = block(grid, torch.randn(1, 4, 8))
        b = block(grid, torch.randn(1, 4, 8))
        assert not torch.allclose(a, b)

    def test_parameter_count_formula(self):
        """Test the closed form against the module."""
        block = MaftBlock(dim=64, heads=4, ffn_dim=128)
        assert count_parameters(block) == maft_parameter_count(64, 128)

    def test_reference_scale_budget(self):
        """Test the fusion block size at the reference width."""
        assert maft_parameter_count() == 9_845_760
        assert maft_parameter_fraction() < config.MAFT_PARAM_BUDGET

    def test_head_divisibility(self):
        """Test that dim must split across heads."""
        with pytest.raises(ShapeError):
            MaftBlock(dim=10, heads=4)

    def test_shape_checks(self):
        """Test token-set validation."""
        block = MaftBlock(dim=8, heads=2, ffn_dim=16)
        with pytest.raises(ShapeError):
            block(torch.randn(1, 3, 8), torch.randn(1, 4, 6))
        with pytest.raises(ShapeError):
            block(torch.randn(1, 3, 8), torch.randn(2, 4, 8))
        with pytest.raises(ShapeError):
            block(torch.randn(3, 8), torch.randn(4, 8))

    def test_gradients_match_finite_differences(self):
        """Test a block with random weights against central differences in float64."""
        torch.manual_seed(2)
        block = MaftBlock(dim=8, heads=2, ffn_dim=16).double()
        with torch.no_grad():
            for name, p in block.named_parameters():
                if not name.startswith("norm"):
                    p.normal_(0.0, 0.3)
        grid = torch.randn(1, 3, 8, dtype=torch.float64, requires_grad=True)
        pose = torch.randn(1, 5, 8, dtype=torch.float64, requires_grad=True)
        weights = torch.randn(1, 3, 8, dtype=torch.float64)

        def f():
            return (block(grid, pose) * weights).sum()

        params = dict(block.named_parameters())
        params.update(grid=grid, pose=pose)
        report = grad_check(f, params, eps=1e-3, tol=1e-3, max_entries=6, floor=1e-4)
        assert report.passed, report.to_dict()


class TestVisualPrefix:
    """Test visual conditioning tokens."""

    @pytest.mark.parametrize("use_maft", [True, False])
    def test_shape(self, use_maft):
        """Test W x P^2 prefix tokens in the model width."""
        prefix = VisualPrefix(lm_dim=32, dim=16, heads=2, ffn_dim=32, patches=2, use_maft=use_maft)
        maps = torch.randn(1, 8, 8, 8, config.NUM_JOINTS + 1)
        ref = torch.rand(1, 8, config.NUM_JOINTS, 2) * 7
        out = prefix(maps, ref)
        assert out.shape == (1, prefix.num_tokens(8), 32)
        assert prefix.num_tokens(8) == 4 * 4

    def test_without_maft_ignores_pose(self):
        """Test that disabling fusion skips the pose sampler."""
        prefix = VisualPrefix(lm_dim=8, dim=8, heads=2, ffn_dim=8, patches=2, use_maft=False)
        _, pose = prefix.tokens(torch.randn(1, 4, 8, 8, config.NUM_JOINTS + 1),
                                torch.zeros(1, 4, config.NUM_JOINTS, 2))
        assert pose is None

    def test_shape_errors(self):
        """Test map and reference-point validation."""
        prefix = VisualPrefix(lm_dim=8, dim=8, heads=2, ffn_dim=8, patches=2)
        with pytest.raises(ShapeError):
            prefix(torch.randn(1, 4, 8, 8, 3), torch.zeros(1, 4, config.NUM_JOINTS, 2))
        with pytest.raises(ShapeError):
            prefix(torch.randn(1, 4, 8, 8, config.NUM_JOINTS + 1), torch.zeros(1, 2, config.NUM_JOINTS, 2))
        with pytest.raises(ShapeError):
            prefix(torch.randn(1, 3, 8, 8, config.NUM_JOINTS + 1), torch.zeros(1, 3, config.NUM_JOINTS, 2))


class TestLmConfig:
    """Test language-model configuration."""

    def test_invalid(self):
        """Test that inconsistent sizes are rejected."""
        with pytest.raises(ConfigError):
            LmConfig(vocab_size=0)
        with pytest.raises(ConfigError):
            LmConfig(vocab_size=10, dim=30, heads=4)
        with pytest.raises(ConfigError):
            LmConfig(vocab_size=10, visual_dim=10, maft_heads=4)
        with pytest.raises(ConfigError):
            LmConfig(vocab_size=10, dropout=1.0)

    def test_round_trip(self, vocab):
        """Test dictionary serialization."""
        cfg = small_lm_config(vocab, use_maft=False)
        assert LmConfig.from_dict(cfg.to_dict()) == cfg


class TestMotionLM:
    """Test the decoder-only model."""

    def test_logit_shape(self, model, vocab):
        """Test B x T x V logits."""
        ids = torch.randint(0, len(vocab), (2, 7))
        assert model(ids).shape == (2, 7, len(vocab))

    def test_causal(self, model, vocab):
        """Test that later tokens do not change earlier logits."""
        ids = torch.randint(0, len(vocab), (1, 10))
        changed = ids.clone()
        changed[0, 7:] = (changed[0, 7:] + 1) % len(vocab)
        with torch.no_grad():
            torch.testing.assert_close(model(ids)[0, :7], model(changed)[0, :7])

    def test_prefix_padding_is_invisible(self, model, vocab):
        """Test that a row's logits do not depend on the other rows' prefixes."""
        visual = random_visual(8)
        ids = torch.randint(0, len(vocab), (1, 6))
        with torch.no_grad():
            alone, _ = model.embed_prefixes([None])
            solo = model(ids)
            prefix, lengths = model.embed_prefixes([visual, None])
            both = model(ids.repeat(2, 1), prefix, lengths)
            single_prefix, single_lengths = model.embed_prefixes([visual])
            with_visual = model(ids, single_prefix, single_lengths)
        assert alone is None
        torch.testing.assert_close(both[1], solo[0], atol=1e-5, rtol=1e-5)
        torch.testing.assert_close(both[0], with_visual[0], atol=1e-5, rtol=1e-5)

    def test_visual_changes_output(self, model, vocab):
        """Test that the prefix conditions the text logits."""
        ids = torch.randint(0, len(vocab), (1, 5))
        with torch.no_grad():
            prefix, lengths = model.embed_prefixes([random_visual(8)])
            assert not torch.allclose(model(ids), model(ids, prefix, lengths))

    def test_context_overflow(self, vocab):
        """Test that over-long sequences raise ContextOverflowError."""
        lm = MotionLM(small_lm_config(vocab, context_length=8))
        with pytest.raises(ContextOverflowError):
            lm(torch.zeros(1, 9, dtype=torch.long))

    def test_token_range(self, model, vocab):
        """Test that ids outside the vocabulary are rejected."""
        with pytest.raises(ShapeError):
            model(torch.tensor([[len(vocab)]]))

    def test_checkpoint_round_trip(self, model, vocab):
        """Test that a restored model gives the same logits."""
        restored = MotionLM.from_checkpoint(model.state_dict(), model.metadata(vocab.to_dict(), "h"))
        ids = torch.randint(0, len(vocab), (1, 5))
        with torch.no_grad():
            torch.testing.assert_close(restored(ids), model(ids))

    def test_checkpoint_kind_checked(self, model, vocab):
        """Test that a tokenizer checkpoint is refused."""
        with pytest.raises(CheckpointError):
            MotionLM.from_checkpoint(model.state_dict(), {'kind': 'vgmt'})


class TestLoss:
    """Test the masked autoregressive loss."""

    def test_zero_head_gives_uniform_loss(self, model, vocab):
        """Test that all-zero logits cost ln V per scored token."""
        zero_(model.head)
        samples = [build_prompt(Task.MIB, vocab, random_grid(s)) for s in range(3)]
        loss = ar_loss(model, collate(samples, vocab.pad_id))
        assert float(loss) == pytest.approx(uniform_log_loss(len(vocab)), rel=1e-5)
        assert uniform_log_loss(len(vocab)) == pytest.approx(math.log(len(vocab)))

    def test_collate_masks_prompt_and_padding(self, vocab):
        """Test that only response targets survive collation."""
        short = build_prompt(Task.MIB, vocab, random_grid(0, windows=3))
        long = build_prompt(Task.MP, vocab, random_grid(1), history=random_grid(2))
        batch = collate([short, long], vocab.pad_id)
        assert batch.input_ids.shape[1] == max(len(short.input_ids), len(long.input_ids))
        scored = batch.target_ids != config.IGNORE_INDEX
        assert int(scored[0].sum()) == int(short.loss_mask.sum())
        assert int(scored[1].sum()) == int(long.loss_mask.sum())
        assert batch.tasks == ["mib", "mp"]

    def test_prompt_tokens_do_not_move_the_loss(self, model, vocab):
        """Test that gradients reach the model only through response positions."""
        sample = build_prompt(Task.MIB, vocab, random_grid(3))
        batch = collate([sample], vocab.pad_id)
        losses, valid = token_losses(model, batch)
        assert torch.all(losses[~valid] == 0)

    def test_empty_batch(self, vocab):
        """Test that an empty batch is rejected."""
        with pytest.raises(EmptyDatasetError):
            collate([], vocab.pad_id)

    def test_evaluate_loss_with_visuals(self, model, vocab):
        """Test scoring a mixed set of text-only and visual samples."""
        target = random_grid(4)
        samples = [
            build_prompt(Task.PE, vocab, target, visual=random_visual(target.num_frames)),
            build_prompt(Task.MIB, vocab, random_grid(5)),
        ]
        value = evaluate_loss(model, samples, vocab.pad_id, batch_size=2)
        assert math.isfinite(value) and value > 0

    def test_per_task_losses(self):
        """Test loss averages per task."""
        losses = torch.tensor([[1.0, 3.0], [2.0, 0.0]])
        valid = torch.tensor([[True, True], [True, False]])
        assert per_task_losses(losses, valid, ["pe", "mp"]) == {'mp': 2.0, 'pe': 2.0}

    def test_gradients_match_finite_differences(self, vocab):
        """Test the masked loss of a tiny float64 model against central differences."""
        torch.manual_seed(3)
        model = MotionLM(small_lm_config(vocab, dim=16, heads=2)).double().eval()
        samples = [build_prompt(Task.MIB, vocab, random_grid(s, windows=3)) for s in range(2)]
        batch = collate(samples, vocab.pad_id)
        params = {name: p for name, p in model.named_parameters() if not name.startswith("visual.")}
        report = grad_check(lambda: ar_loss(model, batch), params,
                            eps=1e-3, tol=1e-3, max_entries=3, floor=1e-4)
        assert report.passed, report.to_dict()


class TestSchedule:
    """Test the learning-rate schedule and task mixture."""

    def test_warmup_cosine(self):
        """Test linear warmup then decay to zero."""
        factor = warmup_cosine(100, 0.1)
        assert factor(0) == pytest.approx(0.1)
        assert factor(9) == pytest.approx(1.0)
        assert factor(10) == pytest.approx(1.0)
        assert factor(100) == pytest.approx(0.0, abs=1e-12)

    def test_task_mix_validation(self):
        """Test that task ratios are checked."""
        with pytest.raises(ConfigError):
            UnifiedTrainConfig(task_mix={'pe': 0.0, 'mp': 0.0, 'mib': 0.0})
        with pytest.raises(ConfigError):
            UnifiedTrainConfig(task_mix={'dance': 1.0})
        with pytest.raises(ConfigError):
            UnifiedTrainConfig(task_mix={'pe': -1.0, 'mp': 1.0})
        assert UnifiedTrainConfig(task_mix={'pe': 0.0, 'mp': 1.0, 'mib': 2.0}).active_tasks == ['mp', 'mib']

    def test_missing_task_data(self, vocab):
        """Test that a task with positive ratio needs samples."""
        with pytest.raises(EmptyDatasetError):
            train_unified({'mib': []}, vocab, small_lm_config(vocab),
                          UnifiedTrainConfig(steps=1, task_mix={'mib': 1.0}))

    def test_vocab_size_mismatch(self, vocab):
        """Test that the model must match the vocabulary."""
        with pytest.raises(ConfigError):
            train_unified({'mib': [build_prompt(Task.MIB, vocab, random_grid(0))]}, vocab,
                          small_lm_config(vocab, vocab_size=len(vocab) + 1),
                          UnifiedTrainConfig(steps=1, task_mix={'mib': 1.0}))

    def test_training_context_check(self, vocab):
        """Test that samples longer than the context are caught before training."""
        with pytest.raises(ContextOverflowError):
            train_unified({'mib': [build_prompt(Task.MIB, vocab, random_grid(0))]}, vocab,
                          small_lm_config(vocab, context_length=32),
                          UnifiedTrainConfig(steps=1, task_mix={'mib': 1.0}))


@pytest.mark.slow
class TestUnifiedTraining:
    """Desk-scale training checks."""

    def test_loss_drops_below_uniform(self, vocab):
        """Test that a short run learns the response format."""
        samples = [build_prompt(Task.MIB, vocab, random_grid(s)) for s in range(8)]
        result = train_unified({'mib': samples}, vocab, small_lm_config(vocab),
                               UnifiedTrainConfig(steps=60, batch_size=4, lr=3e-3, log_interval=20,
                                                  task_mix={'mib': 1.0}))
        assert len(result.log) == 3
        assert result.final.loss < uniform_log_loss(len(vocab))
        assert set(result.final.task_losses) == {'mib'}
