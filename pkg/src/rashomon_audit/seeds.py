import hashlib


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary key parts (ints, floats, strings).

    Unlike ``hash()``, the result does not depend on the interpreter's
    string-hash salt, so worker processes agree with the parent.
    """
    parts = [p.item() if hasattr(p, "item") else p for p in parts]
    key = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1
