"""Deterministic seed derivation.

All randomness in a run flows from one root seed: a stage seed is the
little-endian 64-bit digest of the stage name keyed-hashed (BLAKE2b) with
the root seed, so one number reproduces every stage.
"""

import hashlib


def derive_seed(root, name):
    """64-bit seed for ``name`` derived from the root seed."""
    key = (int(root) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(str(name).encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")
