"""Spatial pooler: competitive column layer over a shared input space.

Every column samples a fixed random subset of the input bits (its potential
taps) and holds one permanence per tap. A tap counts as a connected synapse
while its permanence sits at or above the permanence threshold. Overlap is
the boosted count of connected taps that carry an active input bit; a k-max
competition over the whole region (or over local neighborhoods on the column
grid) picks the winning columns. Hebbian learning nudges the winners'
connected permanences toward the current input, and a slow duty-cycle
homeostat boosts starved columns back into the competition.

Two fidelity modes share this class. ``ideal`` keeps permanences as floats
and counts synapses digitally. ``memristive`` stores every permanence in a
crossbar device, scores overlap with the analog voltage divider, realizes
boosting through the per-column sense device, and applies learning as signed
pulse trains, inheriting all device nonlinearity, variability, and faults.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .crossbar import Crossbar
from .encoding import SDR
from .memristor import DeviceParams
from .ssr import CycleLedger
from .validation import ConfigError, check_dense_input, require, rng_for


class SpatialPooler(BaseEstimator):
    """Competitive spatial coder with ideal and memristive backends.

    Parameters mirror the region defaults: 961 columns on a 31 by 31 grid,
    31 potential taps per column over a 512-bit input, 40 winners per step.
    """

    def __init__(self, n_columns: int = 961, n_inputs: int = 512,
                 n_taps: int = 31, n_winners: int = 40,
                 overlap_threshold: float = 1.0, perm_threshold: float = 0.5,
                 perm_inc: float = 0.1, perm_dec: float = 0.01,
                 boost_strength: float = 2.0, duty_period: int = 1000,
                 inhibition: str = "global", inhibition_radius: int = 5,
                 learn_potential: bool = False, mode: str = "ideal",
                 device_params: Optional[DeviceParams] = None,
                 init_sigma: float = 0.1, seed: int = 0):
        self.n_columns = n_columns
        self.n_inputs = n_inputs
        self.n_taps = n_taps
        self.n_winners = n_winners
        self.overlap_threshold = overlap_threshold
        self.perm_threshold = perm_threshold
        self.perm_inc = perm_inc
        self.perm_dec = perm_dec
        self.boost_strength = boost_strength
        self.duty_period = duty_period
        self.inhibition = inhibition
        self.inhibition_radius = inhibition_radius
        self.learn_potential = learn_potential
        self.mode = mode
        self.device_params = device_params
        self.init_sigma = init_sigma
        self.seed = seed

    # -- construction ------------------------------------------------------
    def initialize(self, ledger: Optional[CycleLedger] = None) -> "SpatialPooler":
        require(self.mode in ("ideal", "memristive"),
                f"unknown mode {self.mode!r}")
        require(0 < self.n_taps <= self.n_inputs, "n_taps must fit the input")
        require(0 < self.n_winners <= self.n_columns, "n_winners must fit")
        require(self.inhibition in ("global", "local"),
                f"unknown inhibition {self.inhibition!r}")
        rng = rng_for(self.seed, 0x5350)
        # Potential taps: a fixed random sample of input bits per column.
        self.topology_ = np.empty((self.n_columns, self.n_taps), dtype=np.int32)
        for c in range(self.n_columns):
            self.topology_[c] = rng.choice(self.n_inputs, self.n_taps,
                                           replace=False)
        self.topology_.sort(axis=1)
        if self.mode == "ideal":
            self.permanences_ = rng.uniform(0.0, 1.0,
                                            (self.n_columns, self.n_taps))
            self.crossbar_ = None
        else:
            self.crossbar_ = Crossbar(self.n_columns, self.n_taps,
                                      params=self.device_params,
                                      seed=self.seed, init="gaussian",
                                      init_sigma=self.init_sigma,
                                      ledger=ledger)
            self.permanences_ = None
        self.boost_ = np.ones(self.n_columns)
        self.duty_ = np.full(self.n_columns, self.n_winners / self.n_columns)
        self.activation_counts_ = np.zeros(self.n_columns, dtype=np.int64)
        self.step_ = 0
        if self.inhibition == "local":
            self._build_neighborhoods()
        return self

    def _build_neighborhoods(self):
        side = math.isqrt(self.n_columns)
        require(side * side == self.n_columns,
                "local inhibition needs a square column grid", ConfigError)
        r = int(self.inhibition_radius)
        require(r >= 1, "inhibition_radius must be at least 1")
        rows, cols = np.divmod(np.arange(self.n_columns), side)
        # Chebyshev neighborhoods on the grid, as index lists.
        self._neighbors = []
        for c in range(self.n_columns):
            ri, ci = rows[c], cols[c]
            sel = (np.abs(rows - ri) <= r) & (np.abs(cols - ci) <= r)
            self._neighbors.append(np.flatnonzero(sel))

    def _initialized(self) -> bool:
        return hasattr(self, "step_")

    # -- scoring --------------------------------------------------------------
    def _active_taps(self, x) -> np.ndarray:
        dense = x.to_dense() if isinstance(x, SDR) else check_dense_input(x, self.n_inputs)
        require(dense.shape[0] == self.n_inputs,
                f"input width {dense.shape[0]} does not match {self.n_inputs}")
        return dense[self.topology_]

    def overlaps(self, x) -> np.ndarray:
        """Boosted overlap score per column for one input."""
        if not self._initialized():
            self.initialize()
        act = self._active_taps(x)
        if self.mode == "ideal":
            conn = self.permanences_ >= self.perm_threshold
            return self.boost_ * (act & conn).sum(axis=1)
        return self.crossbar_.read_overlap(act)

    def overlap_counts(self, x) -> np.ndarray:
        """Overlap per column expressed in synapse counts for either mode.

        Ideal mode returns the boosted count as is. Memristive mode inverts
        the analog readout through the sense divider and rounds, which is the
        resolution at which the two modes are commensurable.
        """
        alpha = self.overlaps(x)
        if self.mode == "ideal":
            return alpha
        return np.round(self.crossbar_.equivalent_counts(alpha))

    def _gate(self) -> float:
        if self.mode == "ideal":
            return float(self.overlap_threshold)
        return self.crossbar_.gate_voltage(self.overlap_threshold)

    def _select_winners(self, alpha: np.ndarray) -> np.ndarray:
        gate = self._gate()
        candidates = np.flatnonzero(alpha >= gate)
        if candidates.size == 0:
            return candidates
        if self.inhibition == "local":
            density = self.n_winners / self.n_columns
            keep = []
            for c in candidates:
                nb = self._neighbors[c]
                k = max(1, int(round(density * nb.size)))
                kth = np.partition(alpha[nb], -k)[-k]
                if alpha[c] >= kth:
                    keep.append(c)
            candidates = np.asarray(keep, dtype=int)
        if candidates.size <= self.n_winners:
            return np.sort(candidates)
        # k-max with deterministic ties: higher score first, then lower index.
        order = np.lexsort((candidates, -alpha[candidates]))
        return np.sort(candidates[order[:self.n_winners]])

    # -- learning ----------------------------------------------------------
    def _learn(self, act: np.ndarray, winners: np.ndarray) -> None:
        if winners.size == 0:
            return
        a = act[winners]
        delta = np.where(a, self.perm_inc, -self.perm_dec)
        if self.mode == "ideal":
            p = self.permanences_[winners]
            eligible = np.ones_like(a, dtype=bool) if self.learn_potential \
                else p >= self.perm_threshold
            self.permanences_[winners] = np.clip(p + delta * eligible, 0.0, 1.0)
        else:
            p = self.crossbar_.permanences()[winners]
            eligible = np.ones_like(a, dtype=bool) if self.learn_potential \
                else p >= self.perm_threshold
            self.crossbar_.program_rows(winners, delta * eligible)

    def _update_duty(self, winners: np.ndarray) -> None:
        active = np.zeros(self.n_columns)
        active[winners] = 1.0
        self.duty_ += (active - self.duty_) / self.duty_period
        self.boost_ = np.exp(-self.boost_strength * (self.duty_ - self.duty_.mean()))
        if self.mode == "memristive":
            self.crossbar_.set_boost(self.boost_)

    # -- main entry ----------------------------------------------------------
    def compute(self, x, learn: bool = True) -> np.ndarray:
        """Score one input and return the sorted winning column indices."""
        alpha = self.overlaps(x)
        winners = self._select_winners(alpha)
        self.last_overlaps_ = alpha
        self.last_winners_ = winners
        self.activation_counts_[winners] += 1
        if learn:
            self._learn(self._active_taps(x), winners)
            self._update_duty(winners)
        self.step_ += 1
        return winners

    # -- estimator surface -----------------------------------------------------
    def fit(self, X, y=None) -> "SpatialPooler":
        """Initialize fresh and stream the inputs once with learning on."""
        self.initialize()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None) -> "SpatialPooler":
        for x in X:
            self.compute(x, learn=True)
        return self

    def transform(self, X) -> np.ndarray:
        """Winner indicator matrix (n_samples, n_columns), learning off."""
        out = np.zeros((len(X), self.n_columns), dtype=bool)
        for i, x in enumerate(X):
            out[i, self.compute(x, learn=False)] = True
        return out

    # -- fidelity bridging ----------------------------------------------------
    def permanence_matrix(self) -> np.ndarray:
        if self.mode == "ideal":
            return self.permanences_.copy()
        return self.crossbar_.permanences()

    def as_memristive(self, device_params: Optional[DeviceParams] = None
                      ) -> "SpatialPooler":
        """Memristive twin with identical topology and mirrored permanences."""
        require(self._initialized(), "initialize before mirroring")
        twin = SpatialPooler(**{**self.get_params(),
                                "mode": "memristive",
                                "device_params": device_params or self.device_params})
        twin.initialize()
        twin.topology_ = self.topology_.copy()
        twin.crossbar_.set_permanences(self.permanence_matrix())
        twin.boost_ = self.boost_.copy()
        twin.duty_ = self.duty_.copy()
        twin.crossbar_.set_boost(twin.boost_)
        return twin

    # -- checkpointing -----------------------------------------------------
    def state_dict(self) -> dict:
        require(self._initialized(), "nothing to snapshot")
        d = {"topology": self.topology_, "boost": self.boost_,
             "duty": self.duty_, "counts": self.activation_counts_,
             "step": np.int64(self.step_)}
        if self.mode == "ideal":
            d["perm"] = self.permanences_
        else:
            d["perm"] = self.crossbar_.permanences()
            d["writes"] = self.crossbar_.devices.writes
            d["fault"] = self.crossbar_.devices.fault
            d["g_sense"] = self.crossbar_.g_sense
        return d

    def load_state_dict(self, d: dict) -> "SpatialPooler":
        if not self._initialized():
            self.initialize()
        self.topology_ = np.asarray(d["topology"], dtype=np.int32)
        self.boost_ = np.asarray(d["boost"], dtype=float)
        self.duty_ = np.asarray(d["duty"], dtype=float)
        self.activation_counts_ = np.asarray(d["counts"], dtype=np.int64)
        self.step_ = int(d["step"])
        if self.mode == "ideal":
            self.permanences_ = np.asarray(d["perm"], dtype=float)
        else:
            self.crossbar_.set_permanences(np.asarray(d["perm"]))
            self.crossbar_.devices.writes = np.asarray(d["writes"]).copy()
            self.crossbar_.devices.fault = np.asarray(d["fault"]).copy()
            self.crossbar_.g_sense = np.asarray(d["g_sense"]).copy()
        return self
