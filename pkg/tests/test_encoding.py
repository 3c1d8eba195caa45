import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memhtm.encoding import (SDR, ScalarEncoder, depacketize, iter_packets,
                             n_packets, overlap, packetize)
from memhtm.validation import DataError

from conftest import random_sdr


class TestBucketIndex:
    def test_origin(self):
        enc = ScalarEncoder(resolution=1.0, offset=0.0)
        assert enc.bucket_index(0) == 0

    def test_floor(self):
        enc = ScalarEncoder(resolution=1.0, offset=0.0)
        assert enc.bucket_index(2.5) == 2

    def test_floor_negative(self):
        enc = ScalarEncoder(resolution=1.0, offset=0.0)
        assert enc.bucket_index(-0.1) == -1

    def test_nonfinite_rejected(self):
        enc = ScalarEncoder()
        with pytest.raises(DataError):
            enc.bucket_index(float("nan"))
        with pytest.raises(DataError):
            enc.bucket_index(float("inf"))


class TestEncode:
    def test_deterministic(self, encoder):
        a = encoder.encode(42.0)
        b = encoder.encode(42.0)
        assert np.array_equal(a.active, b.active)

    def test_exact_sparsity(self, encoder):
        for v in np.linspace(0, 100, 37):
            sdr = encoder.encode(v)
            assert sdr.active.size == encoder.active_bits

    def test_adjacent_buckets_share_all_but_one(self, encoder):
        for b in (0, 3, 77, 138):
            a = encoder.encode_bucket(b)
            c = encoder.encode_bucket(b + 1)
            assert overlap(a, c) == encoder.active_bits - 1

    def test_distant_buckets_nearly_disjoint(self):
        # collisions between unrelated windows average w*w/width; 2 is a
        # generous per-pair cap checked over many seeded pairs
        hits = []
        for seed in range(100):
            enc = ScalarEncoder.for_range(0, 100, seed=seed)
            for b in (0, 17, 53):
                hits.append(overlap(enc.encode_bucket(b),
                                    enc.encode_bucket(b + 200)))
        assert np.mean(hits) < 2.0
        assert max(hits) <= 6

    def test_locality_non_increasing(self, encoder):
        w = encoder.active_bits
        base = encoder.encode_bucket(300)
        over = [overlap(base, encoder.encode_bucket(300 + k))
                for k in range(w + 1)]
        assert over[0] == w
        assert all(over[i] >= over[i + 1] for i in range(w))


class TestPacketize:
    def test_width_512_gives_17_packets(self):
        assert n_packets(512) == 17
        words = packetize(SDR(512, [0, 511]))
        assert len(words) == 17
        # 512 = 16*31 + 16: the final packet carries 16 payload bits
        assert words[-1] < (1 << 16)

    def test_empty_sdr_all_zero(self):
        words = packetize(SDR(512, []))
        assert len(words) == 17
        assert all(w == 0 for w in words)

    def test_bit_31_lands_in_packet_1_bit_0(self):
        words = packetize(SDR(512, [31]))
        assert words[1] == 1
        assert all(w == 0 for i, w in enumerate(words) if i != 1)

    def test_packet_tuples_carry_ordinals(self):
        packets = list(iter_packets(SDR(512, [31])))
        assert [p.index for p in packets] == list(range(17))
        assert packets[1].bits == 1

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_round_trip(self, data):
        width = data.draw(st.integers(min_value=1, max_value=700))
        n = data.draw(st.integers(min_value=0, max_value=min(width, 40)))
        seed = data.draw(st.integers(min_value=0, max_value=2**31))
        rng = np.random.default_rng(seed)
        sdr = SDR(width, rng.choice(width, size=n, replace=False))
        back = depacketize(packetize(sdr), width)
        assert back.width == sdr.width
        assert np.array_equal(back.active, sdr.active)


class TestOverlap:
    def test_self_overlap(self, rng):
        a = random_sdr(rng)
        assert overlap(a, a) == a.active.size

    def test_empty(self, rng):
        a = random_sdr(rng)
        assert overlap(a, SDR(a.width, [])) == 0

    def test_hand_intersection(self):
        a = SDR(10, [1, 2, 3])
        b = SDR(10, [2, 3, 4])
        assert overlap(a, b) == 2

    def test_width_mismatch_rejected(self):
        with pytest.raises(DataError):
            overlap(SDR(10, [1]), SDR(11, [1]))
