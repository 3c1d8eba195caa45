"""Sparse distributed representations and the scalar encoder feeding the region.

An :class:`SDR` is a fixed-width binary vector stored as the sorted list of
its active bit positions. Scalars enter the system through
:class:`ScalarEncoder`, which hashes a sliding window of tap indices into bit
positions so that nearby values share most of their active bits and distant
values share almost none. Encoded vectors travel to the region as a stream of
31-bit packets; :func:`packetize` and :func:`depacketize` implement that
framing.
"""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import (DataError, check_active_indices, check_dense_input,
                         check_scalar_finite, require, rng_for, zigzag)

# Packet framing: payload bits per packet on the input bus.
PACKET_PAYLOAD_BITS = 31


class SDR:
    """Fixed-width binary vector represented by its active bit indices."""

    __slots__ = ("width", "active")

    def __init__(self, width: int, active: Iterable[int] = ()):
        require(int(width) > 0, "SDR width must be positive")
        self.width = int(width)
        self.active = check_active_indices(self.width, active)
        self.active.setflags(write=False)

    @classmethod
    def from_dense(cls, dense) -> "SDR":
        dense = np.asarray(dense).astype(bool)
        return cls(dense.shape[0], np.flatnonzero(dense))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.width, dtype=bool)
        out[self.active] = True
        return out

    @property
    def n_active(self) -> int:
        return int(self.active.size)

    @property
    def sparsity(self) -> float:
        return self.active.size / self.width

    def overlap(self, other: "SDR") -> int:
        return overlap(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SDR):
            return NotImplemented
        return self.width == other.width and np.array_equal(self.active, other.active)

    def __hash__(self) -> int:
        return hash((self.width, self.active.tobytes()))

    def __repr__(self) -> str:
        return f"SDR(width={self.width}, n_active={self.n_active})"


def overlap(a: SDR, b: SDR) -> int:
    """Number of bit positions active in both vectors."""
    require(a.width == b.width,
            f"cannot overlap SDRs of widths {a.width} and {b.width}", DataError)
    return int(np.intersect1d(a.active, b.active, assume_unique=True).size)


class Packet(NamedTuple):
    index: int
    bits: int


def n_packets(width: int, payload_bits: int = PACKET_PAYLOAD_BITS) -> int:
    """Packets needed to stream one vector of the given width."""
    return math.ceil(width / payload_bits)


def packetize(sdr: SDR, payload_bits: int = PACKET_PAYLOAD_BITS) -> list[int]:
    """Split an SDR into bus words of ``payload_bits`` bits each.

    Bit ``k`` of the vector lands in bit ``k % payload_bits`` of word
    ``k // payload_bits``. The final word of a 512-wide vector therefore
    carries only 16 meaningful bits.
    """
    require(payload_bits > 0, "payload_bits must be positive")
    words = [0] * n_packets(sdr.width, payload_bits)
    for k in sdr.active.tolist():
        words[k // payload_bits] |= 1 << (k % payload_bits)
    return words


def iter_packets(sdr: SDR, payload_bits: int = PACKET_PAYLOAD_BITS):
    for i, bits in enumerate(packetize(sdr, payload_bits)):
        yield Packet(i, bits)


def depacketize(words: Sequence[int], width: int,
                payload_bits: int = PACKET_PAYLOAD_BITS) -> SDR:
    """Inverse of :func:`packetize`."""
    require(len(words) == n_packets(width, payload_bits),
            f"expected {n_packets(width, payload_bits)} words for width {width}",
            DataError)
    active = []
    for i, w in enumerate(words):
        require(0 <= w < (1 << payload_bits),
                f"word {i} does not fit in {payload_bits} bits", DataError)
        base = i * payload_bits
        while w:
            low = w & -w
            active.append(base + low.bit_length() - 1)
            w ^= low
    require(not active or active[-1] < width,
            "set bits beyond the declared width", DataError)
    return SDR(width, active)


class ScalarEncoder(TransformerMixin, BaseEstimator):
    """Hash-based scalar encoder with sliding-window bucket overlap.

    A value maps to bucket ``floor((value - offset) / resolution)``; bucket
    ``b`` activates the tap positions at indices ``[b, b + active_bits)`` of a
    lazily grown, seeded tap table. Each tap avoids the values of the
    ``2 * active_bits`` taps before it, which makes the overlap between
    buckets ``b`` and ``b + k`` exactly ``active_bits - |k|`` for
    ``|k| <= active_bits``. Buckets further apart share bits only by hash
    collision, a fraction of order ``active_bits / width``.

    Parameters
    ----------
    width : total number of bits in the encoding.
    active_bits : number of bits active for every value (exact, by
        construction).
    resolution : scalar width of one bucket.
    offset : scalar mapped to the lower edge of bucket 0.
    seed : tap-table seed; two encoders with equal parameters produce
        identical encodings.
    """

    # Refuse to wander absurdly far from the offset; the tap table is lazy
    # but not free.
    _MAX_BUCKET = 10_000_000

    def __init__(self, width: int = 512, active_bits: int = 21,
                 resolution: float = 1.0, offset: float = 0.0, seed: int = 0):
        self.width = width
        self.active_bits = active_bits
        self.resolution = resolution
        self.offset = offset
        self.seed = seed
        self._taps: dict[int, int] = {}
        self._hi = 0   # taps exist for [_lo, _hi)
        self._lo = 0

    @classmethod
    def for_range(cls, lo: float, hi: float, n_buckets: int = 140,
                  width: int = 512, active_bits: int = 21, seed: int = 0
                  ) -> "ScalarEncoder":
        """Encoder whose buckets tile [lo, hi] in ``n_buckets`` steps."""
        require(hi > lo, "range must have positive extent")
        require(n_buckets > 0, "n_buckets must be positive")
        return cls(width=width, active_bits=active_bits,
                   resolution=(hi - lo) / n_buckets, offset=lo, seed=seed)

    def _validate(self):
        require(self.width > 4 * self.active_bits,
                "width must exceed four times active_bits for collision-free "
                "local overlap")
        require(self.active_bits > 0, "active_bits must be positive")
        require(self.resolution > 0, "resolution must be positive")
        check_scalar_finite(self.offset, "offset")

    # -- tap table ---------------------------------------------------------
    def _grow_tap(self, j: int, neighbors: range) -> None:
        forbidden = {self._taps[n] for n in neighbors if n in self._taps}
        rng = rng_for(self.seed, zigzag(j))
        while True:
            cand = int(rng.integers(self.width))
            if cand not in forbidden:
                self._taps[j] = cand
                return

    def _tap(self, j: int) -> int:
        avoid = 2 * self.active_bits
        while self._hi <= j:
            self._grow_tap(self._hi, range(self._hi - avoid, self._hi))
            self._hi += 1
        while self._lo > j:
            self._grow_tap(self._lo - 1, range(self._lo, self._lo + avoid))
            self._lo -= 1
        return self._taps[j]

    # -- encoding ----------------------------------------------------------
    def bucket_index(self, value) -> int:
        self._validate()
        v = check_scalar_finite(value)
        b = math.floor((v - self.offset) / self.resolution)
        require(abs(b) < self._MAX_BUCKET,
                f"value {value!r} is unreasonably far from offset "
                f"{self.offset} at resolution {self.resolution}", DataError)
        return b

    def bucket_value(self, bucket: int) -> float:
        """Midpoint scalar of a bucket (used to read predictions back out)."""
        return self.offset + (bucket + 0.5) * self.resolution

    def encode(self, value) -> SDR:
        b = self.bucket_index(value)
        taps = [self._tap(j) for j in range(b, b + self.active_bits)]
        return SDR(self.width, taps)

    def encode_bucket(self, bucket: int) -> SDR:
        require(abs(int(bucket)) < self._MAX_BUCKET, "bucket out of range",
                DataError)
        taps = [self._tap(j) for j in range(int(bucket), int(bucket) + self.active_bits)]
        return SDR(self.width, taps)

    # -- estimator surface ---------------------------------------------------
    def fit(self, X=None, y=None):
        """Stateless; present for pipeline compatibility."""
        self._validate()
        return self

    def transform(self, X) -> list[SDR]:
        return [self.encode(v) for v in np.asarray(X, dtype=float).ravel()]
