"""Deterministic seed derivation for independent RNG streams.

Every stochastic component (design sampling, unobserved-component draws,
Monte Carlo integration) gets its own 64-bit seed derived from a root seed
plus a tuple of coordinates. The scheme is a SHA-256 hash of the
'\\x1f'-joined string forms of the parts, truncated to 8 bytes, so changing
any single coordinate re-keys only its own stream.
"""

import hashlib

__all__ = ["derive_seed"]


def derive_seed(*parts) -> int:
    """Hash an arbitrary tuple of coordinates down to a 64-bit seed.

    Floats are rendered with repr() so e.g. 0.25 and 0.250 collide (same
    value, same stream) while 0.25 and 0.2500001 do not.
    """
    text = "\x1f".join(_part_str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _part_str(p) -> str:
    if isinstance(p, float):
        return repr(p)
    return str(p)
