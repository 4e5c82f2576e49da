"""
MOTIONTOK Token Serialization
TokenGrid <-> frame/body-part text:

    Frame 1: torso: <skel_a>...<skel_e>. left_arm: <skel_f><skel_g><skel_h>. ...

Windows are labelled "Frame w" (plain) or "Future Frame w" (future_prefix).
Body parts always appear in the canonical order, each followed by the skel
tokens of its joints in layout order and a period.
"""

import logging
from typing import List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np

import config
from errors import SerializationError
from core.skeleton import JointLayout, H36M_LAYOUT
from vgmt.tokens import TokenGrid
from .vocabulary import skel_token, skel_index, FRAME, FUTURE, COLON, PERIOD

logger = logging.getLogger(__name__)

SERIAL_MODES = ("plain", "future_prefix")

# Code written into cells that could not be recovered
FALLBACK_INDEX = 0


def _check_layout(layout: JointLayout) -> None:
    if not layout.has_canonical_groups:
        raise SerializationError(
            f"Layout groups {sorted(layout.groups)} are not the five canonical body parts"
        )


def window_header(number: int, mode: str = "plain") -> List[str]:
    head = [FRAME, str(number), COLON]
    return [FUTURE] + head if mode == "future_prefix" else head


def serialize_window(row: Sequence[int], layout: JointLayout) -> List[str]:
    tokens: List[str] = []
    for part in config.BODY_PARTS:
        tokens += [part, COLON]
        tokens += [skel_token(int(row[j])) for j in layout.groups[part]]
        tokens.append(PERIOD)
    return tokens


def serialize(grid: TokenGrid, mode: str = "plain",
              window_numbers: Optional[Sequence[int]] = None) -> List[str]:
    """
    Text tokens of a grid.

    Args:
        grid: Token grid with a canonical five-part layout
        mode: 'plain' or 'future_prefix'
        window_numbers: Labels of the windows (default 1..W)
    """
    if mode not in SERIAL_MODES:
        raise SerializationError(f"Unknown serialization mode {mode!r}")
    _check_layout(grid.layout)
    numbers = list(window_numbers) if window_numbers is not None else list(range(1, grid.num_windows + 1))
    if len(numbers) != grid.num_windows:
        raise SerializationError(f"{len(numbers)} window numbers for {grid.num_windows} windows")

    tokens: List[str] = []
    for number, row in zip(numbers, grid.indices):
        tokens += window_header(number, mode)
        tokens += serialize_window(row, grid.layout)
    return tokens


def tokens_per_window(layout: JointLayout = H36M_LAYOUT, mode: str = "plain") -> int:
    """Skel tokens plus structural overhead of one window."""
    return len(window_header(1, mode)) + layout.num_joints + 3 * len(config.BODY_PARTS)


# ============================================================================
# PARSING
# ============================================================================

@dataclass
class ParseResult:
    """Recovered grid and what had to be repaired."""

    grid: TokenGrid
    malformed: int = 0                      # cells filled with the fallback index
    truncated_windows: int = 0              # incomplete trailing windows dropped
    window_numbers: List[int] = field(default_factory=list)
    mode: str = "plain"

    @property
    def clean(self) -> bool:
        return self.malformed == 0 and self.truncated_windows == 0


def _header_at(tokens: Sequence[str], i: int) -> Optional[Tuple[int, int, str]]:
    """(window number, header length, mode) when a header starts at i."""
    mode = "plain"
    j = i
    if j < len(tokens) and tokens[j] == FUTURE:
        mode, j = "future_prefix", j + 1
    if (j + 2 < len(tokens) and tokens[j] == FRAME and tokens[j + 1].isdigit()
            and tokens[j + 2] == COLON):
        return int(tokens[j + 1]), j + 3 - i, mode
    return None


def _parse_blocks(segment: Sequence[str], layout: JointLayout, num_codes: int,
                  row: np.ndarray, filled: np.ndarray) -> bool:
    """
    Fill cells from the body-part blocks of one window. Returns True when the
    last canonical block is present and terminated.
    """
    last_done = False
    i = 0
    while i < len(segment):
        part = segment[i]
        if part not in layout.groups or i + 1 >= len(segment) or segment[i + 1] != COLON:
            i += 1
            continue
        joints = layout.groups[part]
        j = i + 2
        codes = []
        while j < len(segment) and skel_index(segment[j]) is not None:
            codes.append(skel_index(segment[j]))
            j += 1
        terminated = j < len(segment) and segment[j] == PERIOD
        valid = (terminated and len(codes) == len(joints)
                 and all(0 <= c < num_codes for c in codes)
                 and not filled[list(joints)].any())
        if valid:
            row[list(joints)] = codes
            filled[list(joints)] = True
        if terminated and part == config.BODY_PARTS[-1]:
            last_done = True
        i = j + 1 if terminated else j
    return last_done


def parse(tokens: Sequence[str], layout: JointLayout = H36M_LAYOUT,
          num_codes: int = config.CODEBOOK_SIZE, strict: bool = True,
          expected_windows: Optional[int] = None,
          frame_rate_hz: float = config.FRAME_RATE_HZ,
          downsample: int = config.DOWNSAMPLE_FACTOR) -> ParseResult:
    """
    Recover a TokenGrid from serialized tokens.

    Robust mode keeps every well-formed (window, body part) block, fills
    missing cells with FALLBACK_INDEX and counts them, and drops a trailing
    window whose final body part never terminated. With expected_windows,
    missing windows are appended as fallback cells and extra windows dropped.
    Tokens before the first window header are ignored.

    Strict mode raises SerializationError unless the tokens are exactly the
    serializer's output for the recovered grid.
    """
    _check_layout(layout)
    n = layout.num_joints

    starts = []
    i = 0
    while i < len(tokens):
        header = _header_at(tokens, i)
        if header is not None:
            starts.append((i, header))
            i += header[1]
        else:
            i += 1

    rows, numbers, modes = [], [], []
    malformed = truncated = 0
    for k, (pos, (number, length, mode)) in enumerate(starts):
        end = starts[k + 1][0] if k + 1 < len(starts) else len(tokens)
        row = np.full(n, FALLBACK_INDEX, dtype=np.int64)
        filled = np.zeros(n, dtype=bool)
        complete = _parse_blocks(tokens[pos + length:end], layout, num_codes, row, filled)
        if k == len(starts) - 1 and not complete:
            truncated += 1
            break
        rows.append(row)
        numbers.append(number)
        modes.append(mode)
        malformed += int((~filled).sum())

    if expected_windows is not None:
        if len(rows) > expected_windows:
            rows, numbers, modes = rows[:expected_windows], numbers[:expected_windows], modes[:expected_windows]
        while len(rows) < expected_windows:
            rows.append(np.full(n, FALLBACK_INDEX, dtype=np.int64))
            numbers.append(len(rows))
            modes.append(modes[-1] if modes else "plain")
            malformed += n

    indices = np.stack(rows) if rows else np.zeros((0, n), dtype=np.int64)
    grid = TokenGrid(indices=indices, num_codes=num_codes, layout=layout,
                     frame_rate_hz=frame_rate_hz, downsample=downsample)
    mode = modes[0] if modes else "plain"
    result = ParseResult(grid=grid, malformed=malformed, truncated_windows=truncated,
                         window_numbers=numbers, mode=mode)

    if strict:
        if not rows:
            raise SerializationError("No window found")
        if len(set(modes)) > 1:
            raise SerializationError("Mixed Frame / Future Frame headers")
        expected = serialize(grid, mode, numbers)
        if list(tokens) != expected or not result.clean:
            raise SerializationError(
                f"Tokens do not follow the frame/body-part format "
                f"({malformed} malformed cells, {truncated} truncated windows)"
            )
    elif not result.clean:
        logger.debug(f"Recovered {len(rows)} windows, {malformed} malformed cells, {truncated} truncated")
    return result
