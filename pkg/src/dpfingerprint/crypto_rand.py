"""Keyed deterministic randomness: position streams, fingerprints, IDs, Laplace noise.

The position stream value for seed ``s`` and tag ``j`` is the first 8 bytes
(big-endian) of keyed BLAKE2b over ``serialize(s) || j``. Seeds are
serialized as a sequence of 4-byte big-endian length prefixes, each followed
by its component bytes, so no two distinct component tuples collide.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError

MIN_KEY_BYTES = 16
FINGERPRINT_BITS = 128
KEY_ENV_VAR = "DPFP_KEY"


class SecretKey:
    """Owner secret. Refuses to be printed, pickled or copied into artifacts."""

    __slots__ = ("_material", "_mac_key")

    def __init__(self, material: bytes):
        if isinstance(material, str):
            material = material.encode("utf-8")
        material = bytes(material)
        if len(material) < MIN_KEY_BYTES:
            raise ParameterError(f"secret key must be at least {MIN_KEY_BYTES} bytes")
        self._material = material
        # keyed BLAKE2b accepts at most 64 key bytes
        self._mac_key = material if len(material) <= 64 else hashlib.sha512(material).digest()

    @classmethod
    def generate(cls) -> "SecretKey":
        return cls(os.urandom(32))

    @classmethod
    def from_file(cls, path) -> "SecretKey":
        raw = Path(path).read_bytes().strip()
        return cls(raw)

    @classmethod
    def from_env(cls, var: str = KEY_ENV_VAR) -> "SecretKey":
        value = os.environ.get(var)
        if value is None:
            raise ParameterError(f"environment variable {var} is not set")
        return cls(value.encode("utf-8"))

    @property
    def material(self) -> bytes:
        return self._material

    def __repr__(self):
        return "SecretKey(<redacted>)"

    __str__ = __repr__

    def __reduce__(self):
        raise TypeError("SecretKey cannot be serialized")

    def __eq__(self, other):
        return isinstance(other, SecretKey) and self._material == other._material

    def __hash__(self):
        return hash(hashlib.sha256(self._material).digest())


def _frame(part: bytes) -> bytes:
    return len(part).to_bytes(4, "big") + part


def _as_bytes(value) -> bytes:
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, SecretKey):
        return value.material
    raise TypeError(f"cannot use {type(value).__name__} as a seed component")


@dataclass(frozen=True)
class Seed:
    components: tuple

    def serialize(self) -> bytes:
        return b"".join(_frame(_as_bytes(c)) for c in self.components)

    @classmethod
    def for_position(cls, key: SecretKey, primary_key: str, attribute: int, bit: int) -> "Seed":
        """Seed of one bit position; ``attribute`` and ``bit`` count from 1."""
        return cls((key.material, primary_key, attribute.to_bytes(4, "big"), bit.to_bytes(4, "big")))


def prs_value(key: SecretKey, seed: Seed, j: int) -> int:
    """64-bit keyed pseudorandom value of ``seed`` for stream tag ``j``."""
    if j not in (1, 2, 3):
        raise ParameterError(f"stream tag must be 1, 2 or 3, got {j}")
    digest = hashlib.blake2b(
        seed.serialize() + bytes([j]), key=key._mac_key, digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def position_streams(key: SecretKey, primary_keys, attr_bits):
    """Stream values for every (record, attribute, bit) position at once.

    Args:
        key: owner secret.
        primary_keys: record keys in row order.
        attr_bits: ``(attribute, bit)`` pairs, both counted from 1, visited
            for every record.

    Returns:
        ``(u1, u2, u3)``: uint64 arrays of shape ``(len(primary_keys), len(attr_bits))``.
    """
    mac = key._mac_key
    head = _frame(key.material)
    tails = [
        [_frame(t.to_bytes(4, "big")) + _frame(k.to_bytes(4, "big")) + bytes([j]) for t, k in attr_bits]
        for j in (1, 2, 3)
    ]
    n, m = len(primary_keys), len(attr_bits)
    out = [bytearray(8 * n * m) for _ in range(3)]
    blake = hashlib.blake2b
    for i, pk in enumerate(primary_keys):
        prefix = head + _frame(pk.encode("utf-8"))
        base = 8 * i * m
        for j in range(3):
            buf, tj = out[j], tails[j]
            for c in range(m):
                pos = base + 8 * c
                buf[pos:pos + 8] = blake(prefix + tj[c], key=mac, digest_size=8).digest()
    return tuple(np.frombuffer(bytes(b), dtype=">u8").astype(np.uint64).reshape(n, m) for b in out)


@dataclass(frozen=True)
class FingerprintBits:
    """Binary fingerprint string, most significant digest bit first."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8).copy()
        if arr.ndim != 1 or (arr.size and arr.max() > 1):
            raise ParameterError("fingerprint bits must be a 1-d array of 0/1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self):
        return len(self.bits)

    def __eq__(self, other):
        return isinstance(other, FingerprintBits) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def hamming(self, other: "FingerprintBits") -> int:
        return int(np.count_nonzero(self.bits != other.bits))

    def to_string(self) -> str:
        return "".join(map(str, self.bits.tolist()))

    @classmethod
    def from_string(cls, text: str) -> "FingerprintBits":
        return cls(np.array([int(c) for c in text], dtype=np.uint8))


def gen_fingerprint(key: SecretKey, internal_id: bytes, length: int = FINGERPRINT_BITS) -> FingerprintBits:
    """Recipient fingerprint from MD5 over the framed (key, internal id).

    Lengths above 128 append further MD5 blocks over (key, id, block number).
    """
    if length < 1:
        raise ParameterError("fingerprint length must be positive")
    body = _frame(key.material) + _frame(_as_bytes(internal_id))
    digest = hashlib.md5(body).digest()
    block = 1
    while 8 * len(digest) < length:
        digest += hashlib.md5(body + _frame(block.to_bytes(4, "big"))).digest()
        block += 1
    bits = np.unpackbits(np.frombuffer(digest, dtype=np.uint8))[:length]
    return FingerprintBits(bits)


def internal_id(key: SecretKey, recipient: int, trial: int) -> bytes:
    """Owner-private recipient identifier for recipient ``recipient``, attempt ``trial``."""
    if recipient < 1 or trial < 1:
        raise ParameterError("recipient and trial numbers start at 1")
    body = (
        _frame(key.material)
        + _frame(recipient.to_bytes(8, "big"))
        + _frame(trial.to_bytes(8, "big"))
    )
    return hashlib.sha256(body).digest()


class LaplaceSampler:
    """Zero-mean Laplace draws with scale ``scale`` from a seeded stream.

    Successive calls continue the same stream, so a sampler reproduces the
    same sequence of draws for the same seed however they are batched.
    """

    def __init__(self, scale: float, rng_seed: int = 0):
        if not scale > 0:
            raise ParameterError(f"Laplace scale must be positive, got {scale}")
        self.scale = float(scale)
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)

    def sample(self, n: int) -> np.ndarray:
        u = self._rng.random(n)
        while True:
            zero = u == 0.0
            if not zero.any():
                break
            u[zero] = self._rng.random(int(zero.sum()))
        centred = u - 0.5
        return -self.scale * np.sign(centred) * np.log1p(-2.0 * np.abs(centred))

    def draw(self) -> float:
        return float(self.sample(1)[0])


def laplace(sampler: LaplaceSampler, n: int) -> np.ndarray:
    return sampler.sample(n)
