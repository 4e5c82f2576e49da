"""
Tests for MOTIONTOK prompt construction and loss masking.
"""

import pytest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from motion_lm.vocabulary import MotionVocabulary, BOS, EOS, START, MIDDLE, END
from motion_lm.prompts import VisualContext, build_prompt, prompt_tokens, keyframe_tokens, video_tokens
from motion_lm.serialization import serialize, parse
from numerics.ops import FeatureMapSequence
from vgmt.tokens import TokenGrid
from core.skeleton import Task
from errors import DataError, ShapeError
import config

K = 16


def random_grid(seed: int, windows: int = 4) -> TokenGrid:
    rng = np.random.default_rng(seed)
    return TokenGrid(indices=rng.integers(0, K, size=(windows, config.NUM_JOINTS)), num_codes=K)


def blank_visual(frames: int, grid: int = 8) -> VisualContext:
    return VisualContext(
        maps=FeatureMapSequence(np.zeros((frames, grid, grid, config.NUM_JOINTS + 1))),
        ref_points=np.full((frames, config.NUM_JOINTS, 2), grid / 2.0),
    )


@pytest.fixture
def vocab():
    return MotionVocabulary.build(K)


class TestVisualContext:
    """Test visual conditioning inputs."""

    def test_ref_point_shape(self):
        """Test that reference points must be F x N x 2."""
        maps = FeatureMapSequence(np.zeros((4, 8, 8, 3)))
        with pytest.raises(ShapeError):
            VisualContext(maps=maps, ref_points=np.zeros((4, 17, 3)))

    def test_frame_count(self):
        """Test that maps and points must cover the same frames."""
        maps = FeatureMapSequence(np.zeros((4, 8, 8, 3)))
        with pytest.raises(ShapeError):
            VisualContext(maps=maps, ref_points=np.zeros((2, 17, 2)))


class TestBuildPrompt:
    """Test conversation samples for each task."""

    def test_sequence_layout(self, vocab):
        """Test <bos> User : ... Assistant : response <eos>."""
        target = random_grid(0)
        sample = build_prompt(Task.MIB, vocab, target)
        seq = vocab.decode(sample.sequence_ids)
        assert seq[:3] == [BOS, "User", ":"]
        assert seq[sample.prompt_length - 2:sample.prompt_length] == ["Assistant", ":"]
        assert seq[-1] == EOS
        assert len(sample) == len(seq)

    def test_loss_mask_covers_response_only(self, vocab):
        """Test that exactly the response and <eos> are scored."""
        sample = build_prompt(Task.MP, vocab, random_grid(1), history=random_grid(2))
        mask = sample.loss_mask
        assert not mask[:sample.prompt_length - 1].any()
        assert mask[sample.prompt_length - 1:].all()
        scored = sample.target_ids[mask]
        np.testing.assert_array_equal(scored, sample.response_ids)
        assert scored[-1] == vocab.eos_id

    def test_shifted_ids(self, vocab):
        """Test that targets are inputs shifted by one."""
        sample = build_prompt(Task.MIB, vocab, random_grid(3))
        np.testing.assert_array_equal(sample.input_ids[1:], sample.target_ids[:-1])

    def test_response_round_trip(self, vocab):
        """Test that the response serialization parses back to the target."""
        target = random_grid(4)
        sample = build_prompt(Task.MP, vocab, target, history=random_grid(5))
        response = vocab.decode(sample.response_ids[:-1])
        first = response.index("Future")
        assert parse(response[first:], num_codes=K).grid == target

    def test_mp_prompt_contains_history(self, vocab):
        """Test that the history serialization is embedded in the instruction."""
        history = random_grid(6)
        sample = build_prompt(Task.MP, vocab, random_grid(7), history=history)
        prompt = vocab.decode(sample.prompt_ids)
        expected = serialize(history)
        joined = " ".join(prompt)
        assert " ".join(expected) in joined
        assert sample.response_mode == "future_prefix"

    def test_mib_prompt_has_keyframes(self, vocab):
        """Test that only the first and last windows are given, with original numbers."""
        target = random_grid(8, windows=5)
        tokens = keyframe_tokens(target)
        assert tokens[0] == START and tokens[-1] == END
        assert tokens.count(MIDDLE) == 1
        middle = tokens.index(MIDDLE)
        assert tokens[middle + 1:middle + 4] == ["Frame", "5", ":"]
        assert tokens.count("Frame") == 2
        prompt = vocab.decode(build_prompt(Task.MIB, vocab, target).prompt_ids)
        assert START in prompt and END in prompt

    def test_pe_prompt_has_video_tokens(self, vocab):
        """Test that pose estimation prompts carry the vision markers."""
        target = random_grid(9)
        sample = build_prompt(Task.PE, vocab, target, visual=blank_visual(target.num_frames))
        prompt = vocab.decode(sample.prompt_ids)
        for tok in video_tokens():
            assert tok in prompt
        assert sample.visual is not None

    def test_optional_video_for_generation(self, vocab):
        """Test that MP and MIB prompts gain video markers only with visuals."""
        plain = prompt_tokens(Task.MIB, keyframes=random_grid(10))
        with_video = prompt_tokens(Task.MIB, keyframes=random_grid(10), with_video=True)
        assert with_video[:len(video_tokens())] == video_tokens()
        assert len(with_video) == len(plain) + len(video_tokens())

    def test_labels_carried(self, vocab):
        """Test that action labels travel with the sample."""
        sample = build_prompt(Task.MIB, vocab, random_grid(11), label="walking")
        assert sample.label == "walking"
        assert sample.window_numbers == [1, 2, 3, 4]


class TestPromptErrors:
    """Test task input validation."""

    def test_pe_needs_visual(self, vocab):
        """Test that pose estimation without visuals is rejected."""
        with pytest.raises(DataError):
            build_prompt(Task.PE, vocab, random_grid(0))

    def test_mp_needs_history(self, vocab):
        """Test that motion prediction without history is rejected."""
        with pytest.raises(DataError):
            build_prompt(Task.MP, vocab, random_grid(0))

    def test_mp_window_mismatch(self, vocab):
        """Test that future and history must have equal length."""
        with pytest.raises(DataError):
            build_prompt(Task.MP, vocab, random_grid(0, windows=4), history=random_grid(1, windows=3))

    def test_mib_needs_three_windows(self, vocab):
        """Test that in-betweening needs something between the keyframes."""
        with pytest.raises(DataError):
            build_prompt(Task.MIB, vocab, random_grid(0, windows=2))

    def test_codebook_mismatch(self, vocab):
        """Test that grids over another K are rejected."""
        grid = TokenGrid(indices=np.zeros((4, config.NUM_JOINTS)), num_codes=K * 2)
        with pytest.raises(DataError):
            build_prompt(Task.MIB, vocab, grid)

    def test_pe_visual_frames(self, vocab):
        """Test that visuals must cover the target frames."""
        target = random_grid(0)
        with pytest.raises(ShapeError):
            build_prompt(Task.PE, vocab, target, visual=blank_visual(target.num_frames + 2))

    def test_unknown_task(self, vocab):
        """Test that unknown task names are rejected."""
        with pytest.raises(ValueError):
            build_prompt("summarise", vocab, random_grid(0))
