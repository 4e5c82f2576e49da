"""
MOTIONTOK Motion Vocabulary
Word/symbol-level vocabulary built from the versioned prompt templates, the
frame/body-part structure and one <skel_k> token per codebook entry.
"""

import os
import re
import logging
from typing import List, Dict, Any, Sequence, Optional, Iterable
from functools import lru_cache

import config
from errors import SerializationError, ConfigError

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
TEMPLATE_NAMES = ("pe", "mp", "mib", "response", "video")

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"
SPECIAL_TOKENS = (PAD, BOS, EOS)

USER, ASSISTANT, COLON, PERIOD = "User", "Assistant", ":", "."
FRAME, FUTURE = "Frame", "Future"
START, MIDDLE, END = "[START]", "[MIDDLE]", "[END]"

VIDEO_PLACEHOLDER = "<video>"
SKELETON_PLACEHOLDER = "<skeleton>"

TOKEN_PATTERN = re.compile(
    r"<skel_\d+>"             # motion tokens
    r"|<\|[a-z_]+\|>"         # vision special tokens
    r"|<[a-z]+>"              # placeholders and control tokens
    r"|\[[A-Z]+\]"            # in-betweening markers
    r"|\.\.\."
    r"|[A-Za-z_]+(?:'[a-z]+)?"
    r"|\d+"
    r"|\S"
)
SKEL_PATTERN = re.compile(r"<skel_(\d+)>$")

NO_SPACE_BEFORE = {".", ",", ":", "?", "!", "-"}
NO_SPACE_AFTER = {"-"}


def skel_token(index: int) -> str:
    return f"<skel_{index}>"


def split_text(text: str) -> List[str]:
    """Split text into vocabulary tokens (whitespace is not a token)."""
    return TOKEN_PATTERN.findall(text)


def _glued(prev: str, tok: str) -> bool:
    if tok in NO_SPACE_BEFORE or prev in NO_SPACE_AFTER:
        return True
    if prev.startswith("<") and tok.startswith("<") and prev not in SPECIAL_TOKENS and tok not in SPECIAL_TOKENS:
        # runs of skel tokens and vision tokens are written without spaces
        return prev[:6] == tok[:6] or (prev.startswith("<|") and tok.startswith("<|"))
    return False


def render_text(tokens: Sequence[str]) -> str:
    """Join tokens back into the template layout."""
    out: List[str] = []
    for i, tok in enumerate(tokens):
        if i and not _glued(tokens[i - 1], tok):
            out.append(" ")
        out.append(tok)
    return "".join(out)


@lru_cache(maxsize=None)
def load_template(name: str, version: str = config.TEMPLATE_VERSION) -> str:
    """Raw text of a prompt template asset."""
    if name not in TEMPLATE_NAMES:
        raise ConfigError(f"Unknown template {name!r}")
    path = os.path.join(TEMPLATE_DIR, version, f"{name}.txt")
    try:
        with open(path, encoding="utf-8") as f:
            return f.read().strip()
    except OSError as e:
        raise ConfigError(f"Template {name} ({version}) not found: {e}")


def template_tokens(version: str = config.TEMPLATE_VERSION) -> List[str]:
    """Every text token used by the templates of one version."""
    tokens: List[str] = []
    for name in TEMPLATE_NAMES:
        text = load_template(name, version).replace("{frames}", "1")
        tokens.extend(t for t in split_text(text)
                      if t not in (VIDEO_PLACEHOLDER, SKELETON_PLACEHOLDER))
    return tokens


def structural_tokens(max_windows: int = config.MAX_WINDOWS) -> List[str]:
    tokens = [USER, ASSISTANT, COLON, PERIOD, FRAME, FUTURE, START, MIDDLE, END]
    tokens.extend(config.BODY_PARTS)
    tokens.extend(str(i) for i in range(1, max_windows + 1))
    return tokens


class MotionVocabulary:
    """
    Bijective token <-> id map.

    Ids are laid out as special tokens, sorted text tokens, then the K skel
    tokens as one contiguous block.
    """

    def __init__(self, num_codes: int, text_tokens: Iterable[str],
                 template_version: str = config.TEMPLATE_VERSION):
        if num_codes < 1:
            raise ConfigError(f"Vocabulary needs at least one code, got {num_codes}")
        text = sorted(set(text_tokens) - set(SPECIAL_TOKENS))
        for tok in text:
            if SKEL_PATTERN.match(tok):
                raise ConfigError(f"Text token {tok!r} collides with motion tokens")
        self.num_codes = num_codes
        self.template_version = template_version
        self.text_tokens = text
        self._itos: List[str] = list(SPECIAL_TOKENS) + text + [skel_token(k) for k in range(num_codes)]
        self._stoi: Dict[str, int] = {tok: i for i, tok in enumerate(self._itos)}
        self.skel_offset = len(SPECIAL_TOKENS) + len(text)

    @classmethod
    def build(cls, num_codes: int = config.CODEBOOK_SIZE,
              template_version: str = config.TEMPLATE_VERSION,
              max_windows: int = config.MAX_WINDOWS) -> 'MotionVocabulary':
        tokens = template_tokens(template_version) + structural_tokens(max_windows)
        return cls(num_codes, tokens, template_version)

    def __len__(self) -> int:
        return len(self._itos)

    @property
    def size(self) -> int:
        return len(self._itos)

    @property
    def pad_id(self) -> int:
        return self._stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self._stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self._stoi[EOS]

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def id_of(self, token: str) -> int:
        try:
            return self._stoi[token]
        except KeyError:
            raise SerializationError(f"Token {token!r} is not in the vocabulary")

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._itos):
            raise SerializationError(f"Token id {token_id} outside vocabulary of {len(self._itos)}")
        return self._itos[token_id]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.token_of(int(i)) for i in ids]

    def skel_id(self, index: int) -> int:
        if not 0 <= index < self.num_codes:
            raise SerializationError(f"Code {index} outside [0, {self.num_codes})")
        return self.skel_offset + index

    def is_skel_id(self, token_id: int) -> bool:
        return self.skel_offset <= token_id < self.skel_offset + self.num_codes

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_codes': self.num_codes,
            'template_version': self.template_version,
            'text_tokens': self.text_tokens,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MotionVocabulary':
        return cls(int(data['num_codes']), data['text_tokens'],
                   data.get('template_version', config.TEMPLATE_VERSION))


def skel_index(token: str) -> Optional[int]:
    """Code index of a <skel_k> token, None for any other token."""
    match = SKEL_PATTERN.match(token)
    return int(match.group(1)) if match else None
