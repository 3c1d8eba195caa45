"""Analog crossbar columns that score input overlap as a voltage.

Each column owns one device per potential synapse plus a sense device at the
bottom of the bit line. Driving the word lines of the currently active inputs
at the read voltage turns the column into a voltage divider:

``v_alpha = V_read * S / (g_sense + S)``    with ``S = sum of active-input
device conductances``.

Inactive word lines float, so only active inputs contribute to either sum.
The sense device doubles as the boosting knob: homeostasis lowers its
conductance for starved columns, which raises their readout for the same
input. Reads stay below the device switching thresholds and never disturb
state; programming happens through explicit signed pulse trains and costs
two system cycles per column event on the ledger.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .memristor import (FULL_SWING_PULSES, DeviceParams, MemristorArray,
                        pulses_for_delta)
from .ssr import CycleLedger, PROGRAMMING_EVENT_CYCLES
from .validation import DataError, require

# Sense device conductance range (a 20 to 80 kilo-ohm device) and its
# neutral midpoint.
G_SENSE_MIN = 1.0 / 80e3
G_SENSE_MAX = 1.0 / 20e3
G_SENSE_MID = 0.5 * (G_SENSE_MIN + G_SENSE_MAX)


class Crossbar:
    """A bank of analog columns sharing one device population.

    Parameters
    ----------
    n_columns, n_taps : grid shape; one device per (column, tap).
    params : device population parameters.
    seed : seeds device initial states, variability draws, and noise.
    init : initial state distribution ("gaussian" models post-forming
        devices scattered around mid-range).
    ledger : optional cycle ledger charged for programming events.
    """

    def __init__(self, n_columns: int, n_taps: int,
                 params: Optional[DeviceParams] = None, seed: int = 0,
                 init: str = "gaussian", init_sigma: float = 0.1,
                 ledger: Optional[CycleLedger] = None):
        require(n_columns > 0 and n_taps > 0, "crossbar shape must be positive")
        self.n_columns = int(n_columns)
        self.n_taps = int(n_taps)
        self.devices = MemristorArray((self.n_columns, self.n_taps),
                                      params=params, seed=seed, init=init,
                                      init_sigma=init_sigma)
        self.params = self.devices.params
        self.g_sense = np.full(self.n_columns, G_SENSE_MID)
        self.ledger = ledger

    # -- readout ---------------------------------------------------------
    def read_overlap(self, active_mask: np.ndarray) -> np.ndarray:
        """Readout voltage of every column for one input presentation.

        ``active_mask`` has shape (n_columns, n_taps) and marks, per column,
        which of its taps carry an active input bit.
        """
        mask = np.asarray(active_mask, dtype=bool)
        require(mask.shape == (self.n_columns, self.n_taps),
                f"active mask must have shape {(self.n_columns, self.n_taps)}",
                DataError)
        g = self.devices.conductance()
        s = np.where(mask, g, 0.0).sum(axis=1)
        v = self.params.read_voltage * s / (self.g_sense + s)
        return np.where(s > 0, v, 0.0)

    def read_overlap_column(self, column: int, active) -> float:
        """Single-column readout; ``active`` is a tap mask or tap indices."""
        active = np.asarray(active)
        if active.dtype != bool:
            m = np.zeros(self.n_taps, dtype=bool)
            m[active.astype(int)] = True
            active = m
        mask = np.zeros((self.n_columns, self.n_taps), dtype=bool)
        mask[column] = active
        return float(self.read_overlap(mask)[column])

    def equivalent_counts(self, v_alpha: np.ndarray) -> np.ndarray:
        """Invert the divider into equivalent fully-on synapse counts.

        De-boosted diagnostic: recovers the active conductance sum from the
        readout and expresses it in units of one fully-on device.
        """
        v = np.asarray(v_alpha, dtype=float)
        v_read = self.params.read_voltage
        s = self.g_sense * v / np.maximum(v_read - v, 1e-30)
        return s / self.params.g_on

    def gate_voltage(self, overlap_threshold: float) -> float:
        """Readout a neutral column would produce at the overlap threshold.

        The threshold is expressed in connected-synapse counts; its voltage
        equivalent is that many devices sitting exactly at the permanence
        threshold, read against the mid-range sense conductance.
        """
        g_th = self.params.conductance_of_state(0.5)
        s = float(overlap_threshold) * g_th
        return self.params.read_voltage * s / (G_SENSE_MID + s)

    @staticmethod
    def threshold_output(v_alpha, v_th: float) -> np.ndarray:
        """Comparator at the column output."""
        return np.asarray(v_alpha) >= v_th

    # -- boosting ----------------------------------------------------------
    def set_boost(self, boosts, column: Optional[int] = None) -> None:
        """Map boost factors onto sense conductances, clamped to the device
        range. Boost > 1 lowers the sense conductance, raising the readout.
        """
        if column is not None:
            self.g_sense[column] = np.clip(G_SENSE_MID / float(boosts),
                                           G_SENSE_MIN, G_SENSE_MAX)
            return
        b = np.asarray(boosts, dtype=float)
        require(b.shape == (self.n_columns,), "need one boost per column",
                DataError)
        require(np.all(b > 0), "boost factors must be positive", DataError)
        self.g_sense[...] = np.clip(G_SENSE_MID / b, G_SENSE_MIN, G_SENSE_MAX)

    # -- programming -------------------------------------------------------
    def program_permanence(self, column: int, deltas) -> np.ndarray:
        """Translate permanence deltas into signed pulse trains on one column.

        Returns the pulse counts applied. Charges the ledger with the
        programming event latency.
        """
        deltas = np.asarray(deltas, dtype=float)
        require(deltas.shape == (self.n_taps,),
                f"need one delta per tap, got shape {deltas.shape}", DataError)
        counts = np.array([pulses_for_delta(d) for d in deltas], dtype=np.int64)
        full = np.zeros((self.n_columns, self.n_taps), dtype=np.int64)
        full[column] = counts
        self.devices.apply_signed_pulses(full)
        if self.ledger is not None:
            self.ledger.add("sp_learn", PROGRAMMING_EVENT_CYCLES)
        return counts

    def program_rows(self, rows: np.ndarray, deltas: np.ndarray) -> None:
        """Batch form of :meth:`program_permanence` for several columns."""
        rows = np.asarray(rows, dtype=int)
        deltas = np.asarray(deltas, dtype=float)
        require(deltas.shape == (rows.size, self.n_taps),
                "deltas must be (n_rows, n_taps)", DataError)
        counts = np.sign(deltas) * np.round(np.abs(deltas) * FULL_SWING_PULSES)
        full = np.zeros((self.n_columns, self.n_taps), dtype=np.int64)
        full[rows] = counts.astype(np.int64)
        self.devices.apply_signed_pulses(full)
        if self.ledger is not None:
            self.ledger.add("sp_learn", PROGRAMMING_EVENT_CYCLES * rows.size)

    # -- state access --------------------------------------------------------
    def permanences(self) -> np.ndarray:
        return self.devices.permanence()

    def set_permanences(self, perms) -> None:
        self.devices.set_state(perms)

    def inject_fault_fraction(self, kind: str, fraction: float,
                              rng: np.random.Generator) -> int:
        """Pin a random fraction of the population to a fault mode."""
        require(0.0 <= fraction <= 1.0, "fraction must lie in [0, 1]")
        n = int(round(fraction * self.devices.w.size))
        if n == 0:
            return 0
        flat = rng.choice(self.devices.w.size, size=n, replace=False)
        self.devices.inject_fault(kind, np.unravel_index(flat, self.devices.w.shape))
        return n
