from Crypto.Hash import keccak


def keccak256(data: bytes) -> bytes:
    """Original Keccak-256 (pre-NIST padding), as used by the EVM."""
    return keccak.new(digest_bits=256, data=data).digest()


def keccak_word(*words: int) -> int:
    """Hash the 32-byte big-endian encodings of ``words``, concatenated."""
    blob = b"".join(w.to_bytes(32, "big") for w in words)
    return int.from_bytes(keccak256(blob), "big")
