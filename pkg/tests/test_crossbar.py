import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memhtm.crossbar import (G_SENSE_MAX, G_SENSE_MID, G_SENSE_MIN, Crossbar)
from memhtm.memristor import DeviceParams
from memhtm.ssr import CycleLedger

QUIET = DeviceParams(c2c_sigma=0.0, d2d_sigma=0.0)


def make_bar(n_columns=4, n_taps=8, **kw):
    kw.setdefault("params", QUIET)
    kw.setdefault("seed", 5)
    return Crossbar(n_columns, n_taps, **kw)


class TestReadout:
    def test_all_inputs_off_reads_zero(self):
        bar = make_bar()
        mask = np.zeros((4, 8), dtype=bool)
        assert (bar.read_overlap(mask) == 0).all()

    def test_single_on_device_divider_value(self):
        # one fully-on device against a 20 kilo-ohm sense resistor:
        # 6.667u * 0.5 / (50u + 6.667u) = 0.0588 V
        bar = make_bar(1, 4)
        bar.devices.set_state(np.array([[1.0, 0, 0, 0]]))
        bar.g_sense[:] = 1.0 / 20e3
        v = bar.read_overlap_column(0, [0])
        assert v == pytest.approx(0.0588, abs=2e-4)

    def test_two_on_devices_exceed_one(self):
        bar = make_bar(1, 4)
        bar.devices.set_state(np.array([[1.0, 1.0, 0, 0]]))
        bar.g_sense[:] = 1.0 / 20e3
        v2 = bar.read_overlap_column(0, [0, 1])
        g = bar.params.g_on
        expected = 0.5 * 2 * g / (1.0 / 20e3 + 2 * g)
        assert v2 == pytest.approx(expected, rel=1e-12)
        assert v2 == pytest.approx(0.1053, abs=2e-4)
        assert v2 > bar.read_overlap_column(0, [0])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31))
    def test_divider_matches_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        bar = make_bar(3, 10, seed=seed)
        bar.devices.set_state(rng.uniform(0, 1, (3, 10)))
        mask = rng.random((3, 10)) < 0.5
        got = bar.read_overlap(mask)
        g = bar.devices.conductance()
        for j in range(3):
            s = g[j][mask[j]].sum()
            want = 0.5 * s / (bar.g_sense[j] + s) if s > 0 else 0.0
            assert got[j] == pytest.approx(want, rel=1e-12)

    def test_reads_never_disturb_state(self):
        bar = make_bar(2, 16)
        before_w = bar.devices.w.copy()
        before_writes = bar.devices.writes.copy()
        mask = np.ones((2, 16), dtype=bool)
        for _ in range(10_000):
            bar.read_overlap(mask)
        assert np.array_equal(bar.devices.w, before_w)
        assert np.array_equal(bar.devices.writes, before_writes)

    def test_activating_an_input_raises_readout(self):
        bar = make_bar(1, 6)
        bar.devices.set_state(np.full((1, 6), 0.5))
        taps = [0, 1]
        v1 = bar.read_overlap_column(0, taps)
        v2 = bar.read_overlap_column(0, taps + [2])
        assert v2 > v1


class TestBoost:
    def test_neutral_boost_is_midrange(self):
        bar = make_bar()
        bar.set_boost(np.ones(4))
        assert np.allclose(bar.g_sense, G_SENSE_MID)

    def test_double_boost_raises_readout(self):
        bar = make_bar(2, 4)
        bar.devices.set_state(np.full((2, 4), 0.7))
        mask = np.zeros((2, 4), dtype=bool)
        mask[:, :2] = True
        bar.set_boost(np.array([1.0, 2.0]))
        v = bar.read_overlap(mask)
        assert v[1] > v[0]

    def test_boost_clamps_at_sense_range(self):
        bar = make_bar()
        bar.set_boost(np.full(4, 1000.0))
        assert np.allclose(bar.g_sense, G_SENSE_MIN)
        bar.set_boost(np.full(4, 1e-3))
        assert np.allclose(bar.g_sense, G_SENSE_MAX)


class TestProgramming:
    def test_full_swing_drives_fresh_device_on(self):
        bar = make_bar(1, 3, init="off")
        deltas = np.array([1.0, 0.0, 0.0])
        counts = bar.program_permanence(0, deltas)
        assert counts[0] == 51
        assert bar.permanences()[0, 0] >= 0.95
        assert bar.permanences()[0, 1] == 0.0

    def test_zero_delta_leaves_no_writes(self):
        bar = make_bar(1, 3, init="off")
        bar.program_permanence(0, np.zeros(3))
        assert bar.devices.writes.sum() == 0

    def test_small_swing_approximately_reversible(self):
        # +5 then -5 pulses on a fresh device: the rail plateau keeps the
        # excursion small and the return nearly exact
        bar = make_bar(1, 1, init="off")
        w0 = bar.devices.w[0, 0]
        bar.program_permanence(0, np.array([0.1]))
        bar.program_permanence(0, np.array([-0.1]))
        assert abs(bar.devices.w[0, 0] - w0) <= 0.02

    def test_programming_charges_ledger(self):
        ledger = CycleLedger()
        bar = make_bar(ledger=ledger)
        bar.program_permanence(1, np.zeros(8))
        assert ledger.as_dict()["sp_learn"] == 2
        bar.program_rows(np.array([0, 2]), np.zeros((2, 8)))
        assert ledger.as_dict()["sp_learn"] == 6

    def test_fault_fraction_injection_count(self):
        bar = make_bar(10, 10)
        rng = np.random.default_rng(0)
        n = bar.inject_fault_fraction("stuck_on", 0.25, rng)
        assert n == 25
        assert (bar.devices.fault != 0).sum() == 25
