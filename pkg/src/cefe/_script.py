"""Character-class helpers shared by the corruption operators and the MT simulator."""

import hashlib

import numpy as np

# (lo, hi) inclusive code point ranges treated as one "script"
_SCRIPT_RANGES = (
    (0x4E00, 0x9FFF),  # CJK unified ideographs
    (0x3041, 0x3096),  # hiragana
    (0x30A1, 0x30FA),  # katakana
    (0xAC00, 0xD7A3),  # hangul syllables
    (ord("a"), ord("z")),
    (ord("A"), ord("Z")),
    (ord("0"), ord("9")),
)
_FALLBACK = _SCRIPT_RANGES[0]


def script_range(ch: str) -> tuple[int, int] | None:
    cp = ord(ch)
    for lo, hi in _SCRIPT_RANGES:
        if lo <= cp <= hi:
            return lo, hi
    return None


def is_content_char(ch: str) -> bool:
    """Letters, digits and ideographs; not punctuation or whitespace."""
    return script_range(ch) is not None or ch.isalnum()


def random_same_script(ch: str, rng: np.random.Generator) -> str:
    """Draw a character from ``ch``'s script that differs from ``ch``."""
    lo, hi = script_range(ch) or _FALLBACK
    size = hi - lo + 1
    cp = lo + int(rng.integers(size - 1))
    if cp >= ord(ch) and lo <= ord(ch) <= hi:
        cp += 1
    return chr(cp)


def stable_hash(*parts) -> int:
    """64-bit hash that, unlike ``hash``, is stable across processes."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def derived_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(stable_hash(*parts)))
