"""
Tests for MOTIONTOK motion vocabulary and frame/body-part token serialization.
"""

import pytest
import sys
import os

import numpy as np
from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from motion_lm.vocabulary import (
    MotionVocabulary, split_text, render_text, skel_token, skel_index,
    load_template, EOS,
)
from motion_lm.serialization import (
    serialize, parse, tokens_per_window, FALLBACK_INDEX,
)
from vgmt.tokens import TokenGrid
from core.skeleton import JointLayout, H36M_LAYOUT
from errors import SerializationError, ConfigError
import config

K = 32


def random_grid(seed: int, windows: int = 3, num_codes: int = K) -> TokenGrid:
    rng = np.random.default_rng(seed)
    return TokenGrid(indices=rng.integers(0, num_codes, size=(windows, config.NUM_JOINTS)),
                     num_codes=num_codes)


def block_span(tokens, part: str, window: int = 0):
    """Index of the part name and of its closing period in one window."""
    starts = [i for i, t in enumerate(tokens) if t == part]
    start = starts[window]
    return start, tokens.index(".", start)


class TestVocabulary:
    """Test the motion vocabulary."""

    @pytest.fixture
    def vocab(self):
        return MotionVocabulary.build(K)

    def test_special_tokens_first(self, vocab):
        """Test that pad, bos and eos take ids 0..2."""
        assert (vocab.pad_id, vocab.bos_id, vocab.eos_id) == (0, 1, 2)

    def test_skel_block_is_contiguous(self, vocab):
        """Test that <skel_k> ids form one block at the end."""
        ids = [vocab.id_of(skel_token(k)) for k in range(K)]
        assert ids == list(range(vocab.skel_offset, vocab.skel_offset + K))
        assert ids[-1] == len(vocab) - 1
        assert vocab.is_skel_id(ids[0]) and not vocab.is_skel_id(vocab.eos_id)

    def test_bijective(self, vocab):
        """Test that every id maps back to its token."""
        for i in range(len(vocab)):
            assert vocab.id_of(vocab.token_of(i)) == i

    def test_structural_tokens_present(self, vocab):
        """Test that headers, body parts and markers are in the vocabulary."""
        for tok in ("Frame", "Future", ":", ".", "User", "Assistant", "[START]", "[MIDDLE]", "[END]",
                    "<|vision_start|>", "1", str(config.MAX_WINDOWS), *config.BODY_PARTS):
            assert tok in vocab

    def test_template_tokens_covered(self, vocab):
        """Test that every template word can be encoded."""
        for name in ("pe", "mp", "mib", "response"):
            text = load_template(name).replace("{frames}", "8")
            words = [t for t in split_text(text) if t not in ("<video>", "<skeleton>")]
            vocab.encode(words)

    def test_unknown_token(self, vocab):
        """Test that out-of-vocabulary tokens raise SerializationError."""
        with pytest.raises(SerializationError):
            vocab.id_of("banana")
        with pytest.raises(SerializationError):
            vocab.token_of(len(vocab))
        with pytest.raises(SerializationError):
            vocab.skel_id(K)

    def test_dict_round_trip(self, vocab):
        """Test that a stored vocabulary reproduces every id."""
        restored = MotionVocabulary.from_dict(vocab.to_dict())
        assert len(restored) == len(vocab)
        assert restored.decode(range(len(vocab))) == vocab.decode(range(len(vocab)))

    def test_skel_collision_rejected(self):
        """Test that text tokens may not look like motion tokens."""
        with pytest.raises(ConfigError):
            MotionVocabulary(4, ["hello", "<skel_3>"])

    def test_unknown_template(self):
        """Test that unknown template names raise ConfigError."""
        with pytest.raises(ConfigError):
            load_template("summary")


class TestTextSplitting:
    """Test the text tokenizer."""

    def test_split(self):
        """Test words, punctuation and special tokens."""
        assert split_text("Frame 1: torso: <skel_3><skel_12>.") == [
            "Frame", "1", ":", "torso", ":", "<skel_3>", "<skel_12>", ".",
        ]
        assert split_text("Here's <|vision_start|>...") == ["Here's", "<|vision_start|>", "..."]

    def test_skel_index(self):
        """Test motion-token parsing."""
        assert skel_index("<skel_42>") == 42
        assert skel_index("skel_42") is None
        assert skel_index("<skel_42>x") is None

    def test_render_round_trip(self):
        """Test that rendering and splitting agree."""
        tokens = ["Frame", "2", ":", "torso", ":", "<skel_1>", "<skel_2>", "."]
        text = render_text(tokens)
        assert text == "Frame 2: torso: <skel_1><skel_2>."
        assert split_text(text) == tokens


class TestSerialize:
    """Test grid serialization."""

    def test_layout(self):
        """Test header, body-part order and joint order."""
        grid = TokenGrid(indices=np.arange(config.NUM_JOINTS)[None], num_codes=K)
        tokens = serialize(grid)
        assert tokens[:3] == ["Frame", "1", ":"]
        parts = [t for t in tokens if t in config.BODY_PARTS]
        assert parts == list(config.BODY_PARTS)
        start, stop = block_span(tokens, "torso")
        torso = [skel_index(t) for t in tokens[start + 2:stop]]
        assert torso == list(H36M_LAYOUT.groups["torso"])

    def test_future_prefix(self):
        """Test Future Frame headers."""
        tokens = serialize(random_grid(0, windows=2), "future_prefix")
        assert tokens[:4] == ["Future", "Frame", "1", ":"]
        assert tokens.count("Future") == 2

    def test_window_numbers(self):
        """Test custom window labels."""
        tokens = serialize(random_grid(0, windows=2), window_numbers=[1, 8])
        assert tokens[tokens.index("Frame", 1) + 1] == "8"
        with pytest.raises(SerializationError):
            serialize(random_grid(0, windows=2), window_numbers=[1])

    def test_length(self):
        """Test tokens per window for both modes."""
        assert tokens_per_window() == 3 + config.NUM_JOINTS + 15
        assert len(serialize(random_grid(0, windows=4))) == 4 * tokens_per_window()
        assert len(serialize(random_grid(0, windows=4), "future_prefix")) == 4 * tokens_per_window(mode="future_prefix")

    def test_unknown_mode(self):
        """Test that unknown modes are rejected."""
        with pytest.raises(SerializationError):
            serialize(random_grid(0), "reverse")

    def test_non_canonical_layout(self):
        """Test that layouts without the five body parts cannot be serialized."""
        layout = JointLayout(names=("a", "b"), root_index=0, groups={"torso": (0,), "tail": (1,)})
        grid = TokenGrid(indices=np.zeros((1, 2)), num_codes=K, layout=layout)
        with pytest.raises(SerializationError):
            serialize(grid)


def check_round_trip(seed: int, windows: int, mode: str) -> None:
    grid = random_grid(seed, windows)
    result = parse(serialize(grid, mode), num_codes=K)
    assert result.grid == grid
    assert result.clean
    assert result.mode == mode
    assert result.window_numbers == list(range(1, windows + 1))


class TestParse:
    """Test strict and robust parsing."""

    @given(seed=st.integers(0, 100_000), windows=st.integers(1, 6),
           mode=st.sampled_from(["plain", "future_prefix"]))
    @settings(max_examples=60, deadline=None)
    def test_strict_round_trip(self, seed, windows, mode):
        """Test that parse inverts serialize."""
        check_round_trip(seed, windows, mode)

    @pytest.mark.slow
    @given(seed=st.integers(0, 100_000), windows=st.integers(1, 6),
           mode=st.sampled_from(["plain", "future_prefix"]))
    @settings(max_examples=10_000, deadline=None)
    def test_strict_round_trip_full(self, seed, windows, mode):
        """Test the round trip over 10,000 random grids."""
        check_round_trip(seed, windows, mode)

    def test_missing_token_repaired(self):
        """Test that a short block falls back and is counted."""
        grid = random_grid(1)
        tokens = serialize(grid)
        start, _ = block_span(tokens, "left_arm", window=1)
        del tokens[start + 2]
        result = parse(tokens, num_codes=K, strict=False)
        assert result.malformed == 3
        assert result.truncated_windows == 0
        assert np.all(result.grid.indices[1, list(H36M_LAYOUT.groups["left_arm"])] == FALLBACK_INDEX)
        np.testing.assert_array_equal(result.grid.indices[0], grid.indices[0])
        np.testing.assert_array_equal(result.grid.indices[2], grid.indices[2])
        with pytest.raises(SerializationError):
            parse(tokens, num_codes=K)

    def test_out_of_range_code(self):
        """Test that a code >= K invalidates its block."""
        tokens = serialize(random_grid(2, windows=1))
        start, _ = block_span(tokens, "right_leg")
        tokens[start + 2] = skel_token(K + 5)
        result = parse(tokens, num_codes=K, strict=False)
        assert result.malformed == 3

    def test_truncated_window_dropped(self):
        """Test that an unterminated final window is dropped."""
        grid = random_grid(3, windows=3)
        tokens = serialize(grid)
        cut = tokens[:2 * tokens_per_window() + 10]
        result = parse(cut, num_codes=K, strict=False)
        assert result.truncated_windows == 1
        assert result.grid == grid.slice_windows(0, 2)

    def test_expected_windows(self):
        """Test padding and trimming to the expected window count."""
        grid = random_grid(4, windows=2)
        padded = parse(serialize(grid), num_codes=K, strict=False, expected_windows=4)
        assert padded.grid.num_windows == 4
        assert padded.malformed == 2 * config.NUM_JOINTS
        assert np.all(padded.grid.indices[2:] == FALLBACK_INDEX)

        trimmed = parse(serialize(random_grid(4, windows=5)), num_codes=K, strict=False, expected_windows=3)
        assert trimmed.grid.num_windows == 3
        assert trimmed.clean

    def test_leading_text_ignored(self):
        """Test that a preamble before the first header is skipped."""
        grid = random_grid(5, windows=2)
        tokens = split_text("There are 2 frames in total.") + serialize(grid)
        result = parse(tokens, num_codes=K, strict=False)
        assert result.grid == grid
        assert result.clean
        with pytest.raises(SerializationError):
            parse(tokens, num_codes=K)

    def test_duplicate_block(self):
        """Test that a repeated body part keeps the first well-formed copy."""
        grid = random_grid(6, windows=1)
        tokens = serialize(grid)
        start, stop = block_span(tokens, "torso")
        dup = [tokens[start], ":"] + [skel_token(0)] * 5 + ["."]
        tokens[stop + 1:stop + 1] = dup
        result = parse(tokens, num_codes=K, strict=False)
        np.testing.assert_array_equal(result.grid.indices, grid.indices)

    def test_garbage(self):
        """Test that tokens without any header give an empty grid or an error."""
        tokens = ["hello", "world", "."]
        result = parse(tokens, num_codes=K, strict=False)
        assert result.grid.num_windows == 0
        with pytest.raises(SerializationError):
            parse(tokens, num_codes=K)

    def test_mixed_headers_strict(self):
        """Test that plain and future headers may not be mixed in strict mode."""
        grid = random_grid(7, windows=2)
        tokens = serialize(grid.slice_windows(0, 1)) + serialize(grid.slice_windows(1, 2), "future_prefix", [2])
        with pytest.raises(SerializationError):
            parse(tokens, num_codes=K)
        assert parse(tokens, num_codes=K, strict=False).grid == grid

    def test_trailing_eos_is_not_clean_strict(self):
        """Test that strict parsing rejects trailing tokens."""
        tokens = serialize(random_grid(8, windows=1)) + [EOS]
        with pytest.raises(SerializationError):
            parse(tokens, num_codes=K)
