"""End-to-end streaming model: encoder, pooler, sequence memory, head.

``HtmModel`` wires the four stages into one online learner. Each call to
:meth:`step` consumes one scalar sample, produces the winner columns, the
anomaly score, and the k-step-ahead value estimate, then (optionally)
trains every stage in place. The ``sw`` variant runs all stages with ideal
float arithmetic; ``hw`` runs the pooler, sequence memory, and prediction
head on simulated device arrays. A cycle ledger accumulates the per-phase
system-cycle costs of the modeled architecture so a run can report its
implied hardware latency.
"""
from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator

from .classifier import SdrClassifier
from .encoding import ScalarEncoder, n_packets
from .memristor import DeviceParams
from .spatial_pooler import SpatialPooler
from .ssr import CycleLedger, broadcast_cycles, latency_estimate
from .temporal_memory import TemporalMemory
from .validation import ConfigError, require

__all__ = ["HtmModel", "StepResult"]

# Architecture phase costs in system cycles. Input streaming is one cycle
# per packet; compute phases cost two cycles (evaluate, resolve); learning
# costs two cycles per programming event.
SP_COMPUTE_CYCLES = 2
TM_COMPUTE_CYCLES = 2
TM_LEARN_CYCLES = 2
SP_LEARN_CYCLES = 2


class StepResult(NamedTuple):
    value: float
    bucket: int
    winners: np.ndarray
    anomaly: float
    probs: np.ndarray
    estimate: float


class HtmModel(BaseEstimator):
    """Online scalar-sequence learner with selectable fidelity.

    Parameters
    ----------
    lo, hi : scalar range tiled by the encoder buckets. Values outside the
        range are clipped to the edge buckets.
    n_buckets : encoder buckets, which are also the prediction head's
        output classes.
    input_width, active_bits : encoded SDR geometry.
    n_columns, n_winners, cells_per_column : region geometry.
    steps_ahead : prediction horizon k.
    lr : prediction head learning rate.
    readout : scalar readout of the head (``argmax`` or ``expectation``).
    model : ``sw`` for ideal arithmetic, ``hw`` for device-backed stages.
    sp_params, tm_params, clf_params : keyword overrides forwarded to the
        pooler, the sequence memory, and the head.
    device_params : device model shared by all hw stages.
    seed : master seed; every stage derives its own streams from it.
    """

    def __init__(self, lo: float = 0.0, hi: float = 100.0,
                 n_buckets: int = 140, input_width: int = 512,
                 active_bits: int = 21, n_columns: int = 961,
                 n_winners: int = 40, cells_per_column: int = 4,
                 steps_ahead: int = 2, lr: float = 0.1,
                 readout: str = "argmax", model: str = "sw",
                 sp_params: Optional[dict] = None,
                 tm_params: Optional[dict] = None,
                 clf_params: Optional[dict] = None,
                 device_params: Optional[DeviceParams] = None, seed: int = 0):
        self.lo = lo
        self.hi = hi
        self.n_buckets = n_buckets
        self.input_width = input_width
        self.active_bits = active_bits
        self.n_columns = n_columns
        self.n_winners = n_winners
        self.cells_per_column = cells_per_column
        self.steps_ahead = steps_ahead
        self.lr = lr
        self.readout = readout
        self.model = model
        self.sp_params = sp_params
        self.tm_params = tm_params
        self.clf_params = clf_params
        self.device_params = device_params
        self.seed = seed

    # -- lifecycle -----------------------------------------------------------
    def initialize(self) -> "HtmModel":
        require(self.model in ("sw", "hw"),
                f"unknown model {self.model!r}; expected 'sw' or 'hw'")
        require(self.hi > self.lo, "need hi > lo")
        mode = "ideal" if self.model == "sw" else "memristive"
        self.ledger_ = CycleLedger()
        self.encoder_ = ScalarEncoder.for_range(
            self.lo, self.hi, n_buckets=self.n_buckets,
            width=self.input_width, active_bits=self.active_bits,
            seed=self.seed)
        sp_kwargs = dict(
            n_columns=self.n_columns, n_inputs=self.input_width,
            n_winners=self.n_winners, mode=mode,
            device_params=self.device_params, seed=self.seed)
        sp_kwargs.update(self.sp_params or {})
        self.sp_ = SpatialPooler(**sp_kwargs)
        self.sp_.initialize(ledger=self.ledger_)
        tm_kwargs = dict(
            n_columns=self.n_columns, cells_per_column=self.cells_per_column,
            mode=mode, device_params=self.device_params, seed=self.seed)
        tm_kwargs.update(self.tm_params or {})
        self.tm_ = TemporalMemory(**tm_kwargs)
        self.tm_.initialize()
        values = np.array([self.encoder_.bucket_value(b)
                           for b in range(self.n_buckets)])
        clf_kwargs = dict(
            n_buckets=self.n_buckets, n_cells=self.tm_.n_cells_,
            steps_ahead=self.steps_ahead, lr=self.lr, readout=self.readout,
            bucket_values=values, mode=mode,
            device_params=self.device_params, seed=self.seed)
        clf_kwargs.update(self.clf_params or {})
        self.clf_ = SdrClassifier(**clf_kwargs)
        self.clf_.initialize()
        self._packets = n_packets(self.input_width)
        self.step_ = 0
        return self

    def _check_ready(self):
        if not hasattr(self, "step_"):
            raise ConfigError("model is not initialized; call initialize() "
                              "first")

    def reset(self) -> "HtmModel":
        """Clear sequence state between independent streams; keep learning."""
        self._check_ready()
        self.tm_.reset()
        self.clf_.reset()
        return self

    # -- streaming -------------------------------------------------------------
    def bucket_of(self, value) -> int:
        b = self.encoder_.bucket_index(value)
        return int(np.clip(b, 0, self.n_buckets - 1))

    def step(self, value, learn: bool = True) -> StepResult:
        """Consume one sample; report prediction and anomaly for it.

        The returned estimate is the model's forecast of the value
        ``steps_ahead`` samples after this one.
        """
        self._check_ready()
        bucket = self.bucket_of(value)
        sdr = self.encoder_.encode_bucket(bucket)
        led = self.ledger_
        led.add("input_stream", self._packets)
        led.add("sp_compute", SP_COMPUTE_CYCLES)
        winners = self.sp_.compute(sdr.to_dense(), learn=learn)
        if learn and self.sp_.mode == "ideal":
            led.add("sp_learn", SP_LEARN_CYCLES)
        led.add("broadcast", broadcast_cycles(winners, self.n_columns))
        led.add("tm_compute", TM_COMPUTE_CYCLES)
        active = self.tm_.compute(winners, learn=learn)
        if learn:
            led.add("tm_learn", TM_LEARN_CYCLES)
        probs, estimate = self.clf_.predict(active)
        if learn:
            self.clf_.train(active, bucket)
        led.steps += 1
        self.step_ += 1
        return StepResult(value=float(value), bucket=bucket, winners=winners,
                          anomaly=float(self.tm_.anomaly_), probs=probs,
                          estimate=estimate)

    def run(self, values, learn: bool = True) -> list[StepResult]:
        return [self.step(v, learn=learn) for v in values]

    def latency(self, pipeline: bool = True):
        """Hardware latency implied by the accumulated cycle ledger."""
        self._check_ready()
        return latency_estimate(self.ledger_, pipeline=pipeline)

    # -- persistence ---------------------------------------------------------
    def state_dict(self) -> dict:
        """Flat array mapping for npz checkpointing."""
        self._check_ready()
        state = {"step": np.int64(self.step_)}
        for prefix, sub in (("sp", self.sp_.state_dict()),
                            ("tm", self.tm_.state_dict()),
                            ("clf", self.clf_.state_dict())):
            for key, val in sub.items():
                if key == "history":
                    state[f"{prefix}.history.n"] = np.int64(len(val))
                    for i, h in enumerate(val):
                        state[f"{prefix}.history.{i}"] = h
                else:
                    state[f"{prefix}.{key}"] = np.asarray(val)
        return state

    def load_state_dict(self, state: dict) -> "HtmModel":
        self._check_ready()
        groups: dict[str, dict] = {"sp": {}, "tm": {}, "clf": {}}
        hist: list = []
        n_hist = int(state.get("clf.history.n", 0))
        for key, val in state.items():
            if key == "step" or key.endswith(".history.n"):
                continue
            prefix, _, rest = key.partition(".")
            if rest.startswith("history."):
                continue
            groups[prefix][rest] = val
        for i in range(n_hist):
            hist.append(np.asarray(state[f"clf.history.{i}"]))
        groups["clf"]["history"] = hist
        groups["clf"].setdefault("n_updates", state.get("clf.n_updates", 0))
        self.sp_.load_state_dict(groups["sp"])
        self.tm_.load_state_dict(groups["tm"])
        self.clf_.load_state_dict(groups["clf"])
        self.step_ = int(state["step"])
        return self

    def save(self, path) -> None:
        np.savez_compressed(path, **self.state_dict())

    def load(self, path) -> "HtmModel":
        with np.load(path, allow_pickle=False) as data:
            self.load_state_dict({k: data[k] for k in data.files})
        return self
