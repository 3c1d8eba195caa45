"""Voltage-threshold memristor model with a state-dependent switching window.

A device carries a normalized state ``w`` in [0, 1]. Its conductance
interpolates linearly between ``g_off`` (state 0) and ``g_on`` (state 1).
Applying a voltage past one of the two thresholds moves the state by one
explicit Euler step per pulse; the pulse is the quantum of time, so the rate
constants absorb the physical pulse width. The window function suppresses
switching near both state rails and peaks at mid-range, which reproduces the
measured behavior of devices of this class: conductance barely moves for the
first pulses out of a rail, then sweeps across the middle of the range in
very few pulses.

Cycle-to-cycle variability multiplies every programmed step by a Gaussian
factor; device-to-device variability draws a fixed per-device rate multiplier
at construction. Devices also wear out: once a device has absorbed its
endurance budget of effective writes it freezes at its last state ("dead"),
which is distinct from the injectable stuck-on / stuck-off faults used by the
fault-sweep experiments.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .validation import ConfigError, require, rng_for

# Fault codes stored per device.
FAULT_NONE = 0
FAULT_STUCK_ON = 1
FAULT_STUCK_OFF = 2
FAULT_DEAD = 3

_FAULT_CODES = {
    "stuck_on": FAULT_STUCK_ON,
    "stuck_off": FAULT_STUCK_OFF,
    "dead": FAULT_DEAD,
}

# Pulses for a rail-to-rail transition at the training voltage; the rate
# constants below are calibrated against this number and permanence deltas
# are translated to pulse counts with it.
FULL_SWING_PULSES = 51

# Calibrated by fit_rate_constants(FULL_SWING_PULSES) with the default
# parameters; regenerate with the device-fit CLI command after changing any
# switching parameter.
_CALIBRATED_K = 17562.463200985694


@dataclass
class DeviceParams:
    """Switching and variability parameters for one device population."""

    g_on: float = 1.0 / 150e3        # conductance at state 1, siemens
    g_off: float = 1.0 / 10e6        # conductance at state 0, siemens
    v_on: float = -0.95              # negative switching threshold, volts
    v_off: float = 0.95              # positive switching threshold, volts
    alpha_on: int = 3
    alpha_off: int = 3
    k_on: float = _CALIBRATED_K      # state units per pulse at full drive
    k_off: float = _CALIBRATED_K
    tau: float = 200.0               # window exponential sharpness
    delta: float = 0.5               # window center (normalized state)
    k_window: float = 1.0            # window peak value
    p_window: int = 4                # window exponent (even keeps it symmetric)
    pulse_width: float = 125e-9      # seconds; informational, folded into k_*
    train_voltage: float = 1.1
    read_voltage: float = 0.5
    c2c_sigma: float = 0.10          # cycle-to-cycle multiplicative step noise
    d2d_sigma: float = 0.05          # device-to-device rate spread
    endurance: float = 1e9           # effective writes before the device dies

    def validate(self) -> "DeviceParams":
        require(self.g_on > self.g_off > 0, "need g_on > g_off > 0")
        require(self.v_off > 0 > self.v_on, "need v_off > 0 > v_on")
        require(self.k_on > 0 and self.k_off > 0, "rate constants must be positive")
        require(self.tau >= 0 and self.k_window > 0, "bad window parameters")
        require(self.p_window >= 1, "window exponent must be >= 1")
        require(0.0 < self.delta < 1.0, "window center must lie inside (0, 1)")
        require(self.train_voltage > self.v_off, "train voltage must exceed v_off")
        require(abs(self.read_voltage) < min(self.v_off, -self.v_on),
                "read voltage must sit inside the switching deadband")
        require(self.endurance > 0, "endurance must be positive")
        return self

    def conductance_of_state(self, w):
        return self.g_off + np.asarray(w, dtype=float) * (self.g_on - self.g_off)


def window(w_norm, params: Optional[DeviceParams] = None):
    """State-dependent switching window.

    ``f(w) = k * (1 - 2 * (w - delta)**p) * exp(-tau * (w - delta)**p)``

    With an even exponent the window is symmetric about ``delta``, equals
    ``k`` there, and stays strictly positive on [0, 1] (about 3.3e-6 at the
    rails with the defaults), so a device parked at a rail can always be
    switched back.
    """
    p = params or DeviceParams()
    x = np.asarray(w_norm, dtype=float) - p.delta
    xp = x ** p.p_window
    return p.k_window * (1.0 - 2.0 * xp) * np.exp(-p.tau * xp)


def pulses_for_delta(delta: float, pulses_per_unit: int = FULL_SWING_PULSES) -> int:
    """Signed pulse count approximating a desired permanence change."""
    n = int(round(abs(float(delta)) * pulses_per_unit))
    return n if delta >= 0 else -n


class MemristorArray:
    """Vectorized population of devices sharing one parameter set.

    All state lives in flat numpy arrays of the given shape. The scalar
    :class:`MemristorDevice` is a one-element view of this class, so both
    code paths exercise identical physics.
    """

    def __init__(self, shape, params: Optional[DeviceParams] = None,
                 seed: int = 0, init: str = "gaussian", init_sigma: float = 0.1,
                 init_state=None):
        self.params = (params or DeviceParams()).validate()
        self.shape = tuple(np.atleast_1d(shape).astype(int)) if not np.isscalar(shape) else (int(shape),)
        rng = rng_for(seed, 0x6D656D)
        if init_state is not None:
            self.w = np.clip(np.asarray(init_state, dtype=float).reshape(self.shape), 0.0, 1.0).copy()
        elif init == "gaussian":
            # Post-forming conductances scatter around mid-range.
            self.w = np.clip(rng.normal(0.5, init_sigma, self.shape), 0.0, 1.0)
        elif init == "uniform":
            self.w = rng.uniform(0.0, 1.0, self.shape)
        elif init == "off":
            self.w = np.zeros(self.shape, dtype=float)
        elif init == "on":
            self.w = np.ones(self.shape, dtype=float)
        else:
            raise ConfigError(f"unknown init {init!r}")
        self.rate_scale = np.maximum(
            rng.normal(1.0, self.params.d2d_sigma, self.shape), 0.05)
        self.writes = np.zeros(self.shape, dtype=np.int64)
        self.fault = np.zeros(self.shape, dtype=np.uint8)
        self._rng = rng_for(seed, 0x6E6F6973)

    # -- read side -----------------------------------------------------------
    def conductance(self) -> np.ndarray:
        """Conductance of every device; reading never disturbs state."""
        g = self.params.conductance_of_state(self.w)
        if self.fault.any():
            g = np.where(self.fault == FAULT_STUCK_ON, self.params.g_on, g)
            g = np.where(self.fault == FAULT_STUCK_OFF, self.params.g_off, g)
        return g

    def permanence(self) -> np.ndarray:
        """Normalized state doubles as the synaptic permanence."""
        return self.w.copy()

    def set_state(self, w) -> None:
        self.w[...] = np.clip(np.asarray(w, dtype=float), 0.0, 1.0)

    # -- write side ----------------------------------------------------------
    def _rate(self, voltage: float, w: np.ndarray) -> np.ndarray:
        p = self.params
        if voltage > p.v_off:
            drive = p.k_off * (voltage / p.v_off - 1.0) ** p.alpha_off
            return drive * window(w, p)
        if voltage < p.v_on:
            drive = p.k_on * (voltage / p.v_on - 1.0) ** p.alpha_on
            return -drive * window(w, p)
        return np.zeros_like(w)

    def _step(self, voltage: float, mask: np.ndarray, noise: bool) -> None:
        self._step_at(voltage, np.flatnonzero(mask.ravel()), noise)

    def _step_at(self, voltage: float, idx: np.ndarray, noise: bool) -> None:
        """One Euler step at unique flat positions ``idx``."""
        p = self.params
        if idx.size == 0 or not (voltage > p.v_off or voltage < p.v_on):
            return  # inside the deadband: no state change, no wear
        flat_fault = self.fault.ravel()
        idx = idx[flat_fault[idx] == FAULT_NONE]
        if idx.size == 0:
            return
        flat_writes = self.writes.ravel()
        exhausted = flat_writes[idx] >= p.endurance
        if exhausted.any():
            flat_fault[idx[exhausted]] = FAULT_DEAD
            idx = idx[~exhausted]
            if idx.size == 0:
                return
        flat_w = self.w.ravel()
        dw = self._rate(voltage, flat_w[idx]) * self.rate_scale.ravel()[idx]
        if noise and p.c2c_sigma > 0:
            dw = dw * (1.0 + p.c2c_sigma * self._rng.standard_normal(idx.size))
        new_w = np.clip(flat_w[idx] + dw, 0.0, 1.0)
        changed = new_w != flat_w[idx]
        flat_w[idx] = new_w
        flat_writes[idx] += changed

    def apply_pulses(self, voltage: float, counts=1, noise: bool = True) -> None:
        """Apply ``counts`` identical pulses of ``voltage`` to each device.

        ``counts`` may be a scalar or an integer array matching the device
        shape; devices step independently, one Euler update per pulse.
        """
        counts = np.broadcast_to(np.asarray(counts, dtype=np.int64), self.shape)
        require(counts.min() >= 0, "pulse counts must be non-negative")
        top = int(counts.max()) if counts.size else 0
        for k in range(top):
            self._step(float(voltage), counts > k, noise)

    def apply_signed_pulses(self, counts, voltage: Optional[float] = None,
                            noise: bool = True) -> None:
        """Positive counts potentiate, negative counts depress.

        ``voltage`` is the pulse magnitude (training voltage by default).
        """
        v = self.params.train_voltage if voltage is None else abs(float(voltage))
        counts = np.broadcast_to(np.asarray(counts, dtype=np.int64), self.shape)
        top = int(np.abs(counts).max()) if counts.size else 0
        for k in range(top):
            self._step(v, counts > k, noise)
            self._step(-v, -counts > k, noise)

    def apply_signed_pulses_flat(self, idx, counts,
                                 voltage: Optional[float] = None,
                                 noise: bool = True) -> None:
        """Signed pulse trains at unique flat array positions.

        Sparse counterpart of :meth:`apply_signed_pulses` for callers that
        touch a few devices of a large array; identical physics per pulse.
        """
        idx = np.asarray(idx, dtype=np.int64).ravel()
        counts = np.broadcast_to(np.asarray(counts, dtype=np.int64), idx.shape)
        v = self.params.train_voltage if voltage is None else abs(float(voltage))
        top = int(np.abs(counts).max()) if counts.size else 0
        for k in range(top):
            self._step_at(v, idx[counts > k], noise)
            self._step_at(-v, idx[-counts > k], noise)

    # -- faults ----------------------------------------------------------------
    def inject_fault(self, kind: str, where) -> None:
        """Pin the selected devices to a fault mode.

        ``where`` is any index expression valid for the state array.
        """
        require(kind in _FAULT_CODES, f"unknown fault kind {kind!r}")
        self.fault[where] = _FAULT_CODES[kind]

    def healthy(self) -> np.ndarray:
        return self.fault == FAULT_NONE


class MemristorDevice:
    """Single device; a convenience façade over a one-element array."""

    def __init__(self, params: Optional[DeviceParams] = None, seed: int = 0,
                 init: str = "off", init_state=None):
        self._arr = MemristorArray((1,), params=params, seed=seed, init=init,
                                   init_state=None if init_state is None
                                   else [init_state])

    @property
    def params(self) -> DeviceParams:
        return self._arr.params

    @property
    def state(self) -> float:
        return float(self._arr.w[0])

    @property
    def writes(self) -> int:
        return int(self._arr.writes[0])

    @property
    def fault(self) -> int:
        return int(self._arr.fault[0])

    @property
    def rate_scale(self) -> float:
        return float(self._arr.rate_scale[0])

    def conductance(self) -> float:
        return float(self._arr.conductance()[0])

    def permanence(self) -> float:
        return self.state

    def apply_pulse(self, voltage: float, n: int = 1, noise: bool = True) -> None:
        self._arr.apply_pulses(voltage, n, noise=noise)

    def inject_fault(self, kind: str) -> None:
        self._arr.inject_fault(kind, 0)


class CalibrationError(ConfigError):
    """Raised when no rate constant meets the pulse-count target."""


def _pulses_to_cross(k: float, up: bool, params: DeviceParams, voltage: float,
                     fraction: float, max_pulses: int) -> Optional[int]:
    """Noise-free pulse count for a fresh device to cross the state range."""
    p = replace(params, k_on=k, k_off=k, c2c_sigma=0.0, d2d_sigma=0.0)
    w = 0.0 if up else 1.0
    v = voltage if up else -voltage
    for n in range(1, max_pulses + 1):
        if v > p.v_off:
            dw = p.k_off * (v / p.v_off - 1.0) ** p.alpha_off * float(window(w, p))
        else:
            dw = -p.k_on * (v / p.v_on - 1.0) ** p.alpha_on * float(window(w, p))
        w = min(1.0, max(0.0, w + dw))
        if up and w >= fraction:
            return n
        if not up and w <= 1.0 - fraction:
            return n
    return None


def fit_rate_constants(target_pulses: int = FULL_SWING_PULSES,
                       params: Optional[DeviceParams] = None,
                       voltage: Optional[float] = None,
                       fraction: float = 0.95,
                       max_pulses: int = 100_000) -> DeviceParams:
    """Calibrate ``k_on`` and ``k_off`` so a fresh device crosses the range.

    Binary search over each rate constant until ``target_pulses`` pulses at
    the training voltage drive the state across ``fraction`` of [0, 1] in the
    corresponding direction (within one pulse). Returns a copy of ``params``
    with the calibrated constants. Raises :class:`CalibrationError` with the
    bracketing diagnostics when the target is unreachable, which happens when
    the transition count jumps past the target as the rate crosses the
    boundary.
    """
    base = (params or DeviceParams()).validate()
    v = base.train_voltage if voltage is None else float(voltage)
    require(v > base.v_off, "calibration voltage must exceed v_off")
    require(target_pulses >= 1, "target_pulses must be positive")

    def solve(up: bool) -> float:
        count = lambda k: _pulses_to_cross(k, up, base, v, fraction, max_pulses)
        lo, hi = 1e-9, 1e9
        n_hi = count(hi)
        if n_hi is None or n_hi > target_pulses:
            raise CalibrationError(
                f"target {target_pulses} unreachable: k={hi:g} needs {n_hi} pulses")
        n_lo = count(lo)
        if n_lo is not None and n_lo <= target_pulses:
            raise CalibrationError(
                f"target {target_pulses} unreachable: k={lo:g} already needs "
                f"only {n_lo} pulses")
        for _ in range(200):
            mid = (lo * hi) ** 0.5
            n_mid = count(mid)
            if n_mid is None or n_mid > target_pulses:
                lo = mid
            else:
                hi = mid
            if hi / lo < 1.0 + 1e-13:
                break
        n_final = count(hi)
        if n_final is not None and abs(n_final - target_pulses) <= 1:
            return hi
        n_under = count(lo)
        if n_under is not None and abs(n_under - target_pulses) <= 1:
            return lo
        raise CalibrationError(
            f"pulse count jumps past {target_pulses}: k={lo:g} gives {n_under}, "
            f"k={hi:g} gives {n_final}")

    k_off = solve(up=True)
    k_on = solve(up=False)
    return replace(base, k_on=k_on, k_off=k_off)


def pulse_sweep_trace(params: Optional[DeviceParams] = None,
                      n_pulses: int = FULL_SWING_PULSES,
                      voltage: Optional[float] = None):
    """Noise-free conductance trace for a full up-then-down pulse sweep.

    Returns ``(pulse_index, conductance_siemens)`` arrays covering state 0,
    ``n_pulses`` potentiating pulses, then ``n_pulses`` depressing pulses.
    """
    p = (params or DeviceParams()).validate()
    v = p.train_voltage if voltage is None else float(voltage)
    quiet = replace(p, c2c_sigma=0.0, d2d_sigma=0.0)
    dev = MemristorDevice(quiet, init="off")
    trace = [dev.conductance()]
    for _ in range(n_pulses):
        dev.apply_pulse(v, noise=False)
        trace.append(dev.conductance())
    for _ in range(n_pulses):
        dev.apply_pulse(-v, noise=False)
        trace.append(dev.conductance())
    return np.arange(len(trace)), np.asarray(trace)
