"""Softmax prediction head over scalar buckets, with anomaly scoring.

The sequence memory's active-cell SDR is dotted with a bucket by cell
weight matrix to produce bucket logits. A delay buffer holds the last k
input SDRs, so each training call associates the SDR observed k steps ago
with the bucket observed now; the head therefore learns to predict k steps
ahead. In memristive mode every weight is a device state, reads go through
the device conductance (so stuck and dead devices distort the output), and
each gradient step is rounded to signed programming pulses.
"""
from __future__ import annotations

from collections import deque
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .memristor import FULL_SWING_PULSES, DeviceParams, MemristorArray
from .validation import (ConfigError, check_active_indices, require,
                         rng_for)

__all__ = ["SdrClassifier", "anomaly_score", "softmax"]


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax; all-equal logits give a uniform vector."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def anomaly_score(winner_columns, predicted_columns) -> float:
    """Fraction of winning columns that were not predicted last step.

    Returns 0.0 for an empty winner set: no activity carries no evidence
    of surprise.
    """
    winners = np.unique(np.asarray(winner_columns, dtype=np.int64).ravel())
    if winners.size == 0:
        return 0.0
    predicted = np.asarray(predicted_columns, dtype=np.int64).ravel()
    hit = np.isin(winners, predicted).sum()
    return float(1.0 - hit / winners.size)


class SdrClassifier(BaseEstimator):
    """Online bucket classifier over sparse cell activity.

    Parameters
    ----------
    n_buckets : rows of the weight matrix; bucket indices passed to
        :meth:`train` must lie in ``[0, n_buckets)``.
    n_cells : width of the input SDR (cell count of the sequence memory).
    steps_ahead : prediction horizon k; the delay buffer holds k SDRs and
        the first k training calls only warm it up.
    lr : gradient step size on the cross-entropy loss.
    readout : ``argmax`` reads the midpoint of the most probable bucket,
        ``expectation`` reads the probability-weighted mean of all bucket
        values. Argmax is the default; a fault-flattened distribution
        drags an expectation toward the range midpoint, while the argmax
        only moves once some other bucket actually wins.
    bucket_values : optional scalar value per bucket (length n_buckets).
        When absent, predictions report the bucket index itself.
    mode : ``ideal`` keeps float weights; ``memristive`` stores weights in
        device states and learns through rounded pulse trains.
    device_params : device model overrides for memristive mode.
    seed : device variability seed (memristive mode only; weights start
        at zero in both modes, as device off-states or literal zeros).
    """

    def __init__(self, n_buckets: int = 140, n_cells: int = 3844,
                 steps_ahead: int = 2, lr: float = 0.1,
                 readout: str = "argmax", bucket_values=None,
                 mode: str = "ideal",
                 device_params: Optional[DeviceParams] = None, seed: int = 0):
        self.n_buckets = n_buckets
        self.n_cells = n_cells
        self.steps_ahead = steps_ahead
        self.lr = lr
        self.readout = readout
        self.bucket_values = bucket_values
        self.mode = mode
        self.device_params = device_params
        self.seed = seed

    # -- lifecycle -----------------------------------------------------------
    def initialize(self) -> "SdrClassifier":
        require(self.n_buckets >= 2, "need at least two buckets")
        require(self.n_cells >= 1, "n_cells must be positive")
        require(self.steps_ahead >= 1, "steps_ahead must be positive")
        require(self.lr >= 0.0, "learning rate must be nonnegative")
        require(self.readout in ("argmax", "expectation"),
                f"unknown readout {self.readout!r}")
        require(self.mode in ("ideal", "memristive"),
                f"unknown mode {self.mode!r}")
        if self.bucket_values is not None:
            vals = np.asarray(self.bucket_values, dtype=float).ravel()
            require(vals.size == self.n_buckets,
                    "bucket_values length must equal n_buckets")
            self._values = vals
        else:
            self._values = None
        if self.mode == "ideal":
            self.weights_ = np.zeros((self.n_buckets, self.n_cells))
            self.devices_ = None
        else:
            # Weight devices start at the off rail, mirroring the zero
            # initial weights of the ideal head. The switching window is
            # flattest near the rails, so pulse updates stay fine-grained
            # where the learning actually operates.
            self.weights_ = None
            self.devices_ = MemristorArray(
                (self.n_buckets, self.n_cells), self.device_params,
                seed=(self.seed << 8) | 0xC1, init="off")
        self._history: deque = deque(maxlen=self.steps_ahead)
        self.n_updates_ = 0
        return self

    def _check_ready(self):
        if not hasattr(self, "_history"):
            raise ConfigError("classifier is not initialized; call "
                              "initialize() first")

    def reset(self) -> "SdrClassifier":
        """Clear the delay buffer; learned weights are kept."""
        self._check_ready()
        self._history.clear()
        return self

    # -- inference -------------------------------------------------------------
    def _weight_matrix(self) -> np.ndarray:
        if self.mode == "ideal":
            return self.weights_
        # Read through the conductance so stuck devices distort the output.
        p = self.devices_.params
        return (self.devices_.conductance() - p.g_off) / (p.g_on - p.g_off)

    def logits(self, active_cells) -> np.ndarray:
        cells = check_active_indices(self.n_cells, active_cells)
        if cells.size == 0:
            return np.zeros(self.n_buckets)
        return self._weight_matrix()[:, cells].sum(axis=1)

    def predict(self, active_cells):
        """Bucket distribution and scalar estimate for one input SDR.

        Read-only. Returns ``(probabilities, estimate)`` where the
        estimate follows the configured readout.
        """
        self._check_ready()
        probs = softmax(self.logits(active_cells))
        if self._values is None:
            values = np.arange(self.n_buckets, dtype=float)
        else:
            values = self._values
        if self.readout == "argmax":
            estimate = float(values[int(np.argmax(probs))])
        else:
            estimate = float(probs @ values)
        return probs, estimate

    # -- learning ----------------------------------------------------------------
    def train(self, active_cells, bucket: int) -> "SdrClassifier":
        """One online update: associate the SDR from k steps ago with the
        bucket observed now, then push the current SDR into the buffer.

        The first k calls only warm the buffer and leave the weights
        unchanged.
        """
        self._check_ready()
        cells = check_active_indices(self.n_cells, active_cells)
        b = int(bucket)
        require(0 <= b < self.n_buckets,
                f"bucket {b} outside [0, {self.n_buckets})")
        if len(self._history) == self.steps_ahead:
            past = self._history[0]
            if past.size and self.lr > 0.0:
                err = -softmax(self.logits(past))
                err[b] += 1.0
                self._apply_update(past, err)
                self.n_updates_ += 1
        self._history.append(cells)
        return self

    def _apply_update(self, cells: np.ndarray, err: np.ndarray) -> None:
        if self.mode == "ideal":
            self.weights_[:, cells] += self.lr * err[:, None]
            return
        counts = np.rint(self.lr * err * FULL_SWING_PULSES).astype(np.int64)
        rows = np.flatnonzero(counts)
        if rows.size == 0:
            return
        flat = (rows[:, None] * self.n_cells + cells[None, :]).ravel()
        self.devices_.apply_signed_pulses_flat(
            flat, np.repeat(counts[rows], cells.size))

    # -- persistence ---------------------------------------------------------
    def state_dict(self) -> dict:
        self._check_ready()
        state = {"n_updates": self.n_updates_,
                 "history": [h.copy() for h in self._history]}
        if self.mode == "ideal":
            state["weights"] = self.weights_.copy()
        else:
            state["device_w"] = self.devices_.w.copy()
            state["device_writes"] = self.devices_.writes.copy()
            state["device_fault"] = self.devices_.fault.copy()
        return state

    def load_state_dict(self, state: dict) -> "SdrClassifier":
        self._check_ready()
        self.n_updates_ = int(state["n_updates"])
        self._history.clear()
        for h in state["history"]:
            self._history.append(np.asarray(h, dtype=np.int64))
        if self.mode == "ideal":
            self.weights_[...] = state["weights"]
        else:
            self.devices_.w[...] = state["device_w"]
            self.devices_.writes[...] = state["device_writes"]
            self.devices_.fault[...] = state["device_fault"]
        return self
