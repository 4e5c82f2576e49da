"""
MOTIONTOK Response Grammar
The frame/body-part response format as a linear automaton: every position
of a well-formed response is either one fixed token or any <skel_k> token.
The state is the number of tokens emitted so far.
"""

import logging
from typing import List, Optional, Sequence

import torch

import config
from errors import SerializationError
from core.skeleton import JointLayout, H36M_LAYOUT
from .vocabulary import MotionVocabulary, load_template, split_text, COLON, PERIOD
from .serialization import window_header

logger = logging.getLogger(__name__)

# Slot value standing for "any motion token"
SKEL_SLOT = -1


class ResponseGrammar:
    """
    Constraint over the assistant response of one sample:

        preamble, then W x (header, 5 x (part ":" skel... ".")), then <eos>
    """

    def __init__(self, vocab: MotionVocabulary, num_windows: int, mode: str = "plain",
                 layout: JointLayout = H36M_LAYOUT):
        if num_windows < 1:
            raise SerializationError(f"A response needs at least one window, got {num_windows}")
        if not layout.has_canonical_groups:
            raise SerializationError("Layout groups are not the five canonical body parts")
        self.vocab = vocab
        self.num_windows = num_windows
        self.mode = mode

        preamble = load_template("response", vocab.template_version).replace("{frames}", str(num_windows))
        slots: List[int] = vocab.encode(split_text(preamble))
        for w in range(1, num_windows + 1):
            slots += vocab.encode(window_header(w, mode))
            for part in config.BODY_PARTS:
                slots += vocab.encode([part, COLON])
                slots += [SKEL_SLOT] * len(layout.groups[part])
                slots.append(vocab.id_of(PERIOD))
        slots.append(vocab.eos_id)
        self.slots = slots

        self._skel_mask = torch.zeros(vocab.size, dtype=torch.bool)
        self._skel_mask[vocab.skel_offset:vocab.skel_offset + vocab.num_codes] = True

    def __len__(self) -> int:
        return len(self.slots)

    def init_state(self) -> int:
        return 0

    def accepts(self, state: int) -> bool:
        return state == len(self.slots)

    def fixed_token(self, state: int) -> Optional[int]:
        """The only legal token at this state, or None when any skel token is legal."""
        self._check_state(state)
        slot = self.slots[state]
        return None if slot == SKEL_SLOT else slot

    def allowed_mask(self, state: int) -> torch.Tensor:
        """V boolean mask of legal next tokens."""
        fixed = self.fixed_token(state)
        if fixed is None:
            return self._skel_mask.clone()
        mask = torch.zeros(self.vocab.size, dtype=torch.bool)
        mask[fixed] = True
        return mask

    def is_legal(self, state: int, token_id: int) -> bool:
        if state >= len(self.slots):
            return False
        slot = self.slots[state]
        return self.vocab.is_skel_id(token_id) if slot == SKEL_SLOT else token_id == slot

    def apply(self, state: int, logits: torch.Tensor) -> torch.Tensor:
        """Logits with every illegal token set to -inf."""
        mask = self.allowed_mask(state).to(logits.device)
        return logits.masked_fill(~mask, float('-inf'))

    def update_state(self, state: int, token_id: int) -> int:
        if not self.is_legal(state, token_id):
            raise SerializationError(
                f"Token {self.vocab.token_of(int(token_id))!r} is not allowed at response position {state}"
            )
        return state + 1

    def check(self, token_ids: Sequence[int]) -> bool:
        """True when token_ids is a complete, legal response."""
        state = self.init_state()
        for tok in token_ids:
            if not self.is_legal(state, int(tok)):
                return False
            state += 1
        return self.accepts(state)

    def _check_state(self, state: int) -> None:
        if not 0 <= state < len(self.slots):
            raise SerializationError(f"Grammar state {state} outside 0..{len(self.slots) - 1}")
