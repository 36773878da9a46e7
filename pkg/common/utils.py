"""
Shared Utility Functions
========================

Common utility functions used across the model, training and CLI packages.

Public API:
    config_run_id: 8-char base62 identifier derived from a resolved configuration
    derive_rng: Deterministic numpy Generator for a named purpose under a seed
    fraction_literal: Parse "1/4", "0.25" or "1" into a float
    fit_heads: Largest head count up to a limit that divides a stream width
"""

import hashlib
import zlib
from fractions import Fraction

import numpy as np

from common.exceptions import ConfigError

# Base62 alphabet for compact, path-safe identifiers
BASE62_ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"


def _int_to_base62(num: int, length: int) -> str:
    """Convert an integer to a base62 string of fixed length.

    Args:
        num: Non-negative integer to convert
        length: Desired output length (will be zero-padded)

    Returns:
        Base62 string of exactly `length` characters
    """
    if num == 0:
        return BASE62_ALPHABET[0] * length

    result = []
    while num > 0:
        result.append(BASE62_ALPHABET[num % 62])
        num //= 62

    while len(result) < length:
        result.append(BASE62_ALPHABET[0])

    return "".join(reversed(result[-length:]))


def config_run_id(config_text: str, seed: int) -> str:
    """Generate an 8-character base62 id for a resolved configuration.

    Unlike a random run hash, the id is a pure function of the resolved
    config text and the seed, so re-running a manifest lands in the same id.

    Args:
        config_text: Resolved key=value configuration
        seed: Run seed

    Returns:
        8-character base62 id (e.g., "K7xMp2Qw")
    """
    digest = hashlib.sha256(f"{config_text}\nseed={seed}".encode()).digest()[:6]
    return _int_to_base62(int.from_bytes(digest, "big"), 8)


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    """Return an independent Generator for `purpose` under `seed`.

    Streams for different purposes (init, shuffle, dropout, crop) never
    share state, so changing how many draws one consumer makes leaves the
    others untouched.
    """
    tag = zlib.crc32(purpose.encode())
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def fraction_literal(text: str) -> float:
    """Parse a decimal or fraction literal.

    Raises:
        ValueError: If the text is neither.
    """
    return float(Fraction(text.strip()))


def fit_heads(width: int, heads: int) -> int:
    """Largest divisor of width that does not exceed heads.

    Raises:
        ConfigError: If width or heads is below one.
    """
    if width < 1 or heads < 1:
        raise ConfigError(f"cannot fit {heads} heads to width {width}")
    return next(h for h in range(min(heads, width), 0, -1) if width % h == 0)
