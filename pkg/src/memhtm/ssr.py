"""Synthetic synapse routing: address generation, arbitration, and timing.

The region broadcasts the coordinates of active cells over a shared bus.
A per-row priority arbiter grants one requesting column per system cycle and
spends one extra cycle advancing to the next row, so a full broadcast of a
winner grid costs ``n_winners + n_rows`` cycles. Cells receive the broadcast
addresses and compare them against the outputs of small maximal-length LFSRs;
the probability that enough of a 40-column activation pattern lands inside a
cell's 256 address slots is a hypergeometric tail computed here in log space.

Timing model: the digital side runs at ``SYS_CLOCK_HZ`` while LFSRs burst
``FAST_CLOCK_HZ / SYS_CLOCK_HZ`` addresses inside one system cycle. Encoder
packets stream at one packet per system cycle. With the pipeline enabled the
spatial and temporal stages overlap the next sample's input streaming, so
only input streaming, broadcast, and a small fixed overhead remain visible
per sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import ConfigError, DataError, require

SYS_CLOCK_HZ = 8e6
FAST_CLOCK_HZ = 128e6
ADDRESSES_PER_CYCLE = int(FAST_CLOCK_HZ / SYS_CLOCK_HZ)  # 16

# Behavioral per-phase cycle charges for the non-broadcast stages. Analog
# evaluation settles within a cycle and programming takes two cycles per
# event, with one cycle of margin each for latching results.
SP_COMPUTE_CYCLES = 2
SP_LEARN_CYCLES = 2
TM_COMPUTE_CYCLES = 2
TM_LEARN_CYCLES = 2
PROGRAMMING_EVENT_CYCLES = 2

# Visible-pipeline calibration constant: WTA settle, learn handshake, and
# output latch that cannot hide behind the next sample's input stream.
PIPELINE_OVERHEAD_CYCLES = 5


class Lfsr:
    """Maximal-length Fibonacci LFSR over a small register.

    The default 5-bit register with taps (5, 3) walks all 31 nonzero states
    before repeating, so 16 consecutive outputs are 16 distinct addresses.
    """

    def __init__(self, seed: int = 1, width: int = 5, taps: tuple = (5, 3)):
        require(width >= 2, "LFSR width must be at least 2")
        self.width = int(width)
        self.taps = tuple(int(t) for t in taps)
        require(all(1 <= t <= self.width for t in self.taps), "taps out of range")
        self._mask = (1 << self.width) - 1
        self.reseed(seed)

    def reseed(self, seed: int) -> None:
        state = int(seed) & self._mask
        require(state != 0, "LFSR seed must be nonzero within the register width")
        self.state = state

    def step(self) -> int:
        fb = 0
        for t in self.taps:
            fb ^= (self.state >> (t - 1)) & 1
        self.state = ((self.state << 1) | fb) & self._mask
        return self.state

    def run(self, n: int) -> list[int]:
        return [self.step() for _ in range(n)]

    def burst(self) -> list[int]:
        """One system cycle worth of addresses."""
        return self.run(ADDRESSES_PER_CYCLE)


@dataclass
class ArbiterTrace:
    grant_order: list
    cycles: int


def arbitrate(requests) -> ArbiterTrace:
    """Cycle-accurate priority arbitration of one row of requests.

    Pending requests are granted in ascending column order, one per cycle,
    then one final cycle advances the row selector. A row with no requests
    still costs that one advance cycle.
    """
    req = np.asarray(requests, dtype=bool)
    require(req.ndim == 1, "requests must be a flat row of flags", DataError)
    pending = req.copy()
    order = []
    cycles = 0
    while pending.any():
        col = int(np.flatnonzero(pending)[0])
        order.append(col)
        pending[col] = False
        cycles += 1
    cycles += 1  # row-selector advance
    return ArbiterTrace(order, cycles)


def arbitrate_grid(winner_grid) -> ArbiterTrace:
    """Event-driven broadcast of a square winner grid, row by row."""
    grid = np.asarray(winner_grid, dtype=bool)
    require(grid.ndim == 2 and grid.shape[0] == grid.shape[1],
            "winner grid must be square", DataError)
    order = []
    cycles = 0
    for i in range(grid.shape[0]):
        t = arbitrate(grid[i])
        order.extend((i, c) for c in t.grant_order)
        cycles += t.cycles
    return ArbiterTrace(order, cycles)


def broadcast_cycles(winners, n_columns: int | None = None) -> int:
    """Closed-form broadcast cost of a winner set on the row arbiter.

    ``winners`` is either a square boolean grid or a flat winner-index array
    (then ``n_columns`` must be a perfect square). Cost is one cycle per
    winner plus one advance cycle per row.
    """
    arr = np.asarray(winners)
    if arr.ndim == 2:
        require(arr.shape[0] == arr.shape[1], "winner grid must be square", DataError)
        return int(arr.astype(bool).sum()) + arr.shape[0]
    require(n_columns is not None, "flat winner list needs n_columns")
    side = math.isqrt(int(n_columns))
    require(side * side == int(n_columns),
            f"n_columns={n_columns} is not a perfect square", ConfigError)
    n_win = int(np.unique(arr).size) if arr.size else 0
    return n_win + side


def _log_choose(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def p_match(n_c: int, n_w: int, n_sd: int, i_min: int) -> float:
    """Probability that at least ``i_min`` of ``n_w`` active columns fall
    inside a segment's ``n_sd`` address slots.

    Hypergeometric upper tail, summed in log space so small tails survive.
    """
    require(0 < n_w <= n_c, "need 0 < n_w <= n_c")
    require(0 < n_sd <= n_c, "need 0 < n_sd <= n_c")
    require(i_min >= 0, "i_min must be non-negative")
    hi = min(n_w, n_sd)
    lo = max(i_min, n_w + n_sd - n_c, 0)
    if lo > hi:
        return 0.0 if i_min > 0 else 1.0
    log_denom = _log_choose(n_c, n_sd)
    logs = [
        _log_choose(n_w, i) + _log_choose(n_c - n_w, n_sd - i) - log_denom
        for i in range(lo, hi + 1)
    ]
    peak = max(logs)
    return min(1.0, math.exp(peak) * sum(math.exp(v - peak) for v in logs))


def p_false_match(n_c: int, n_w: int, n_patterns: int) -> float:
    """Chance a random pattern is spuriously covered by stored patterns.

    ``[1 - (1 - n_w / n_c) ** M] ** n_w`` evaluated in log space. Monotone in
    the number of stored patterns M; zero when nothing is stored.
    """
    require(0 < n_w <= n_c, "need 0 < n_w <= n_c")
    require(n_patterns >= 0, "n_patterns must be non-negative")
    if n_patterns == 0:
        return 0.0
    log_miss_one = n_patterns * math.log1p(-n_w / n_c)
    log_hit = math.log1p(-math.exp(log_miss_one)) if log_miss_one < 0 else 0.0
    return math.exp(n_w * log_hit)


@dataclass
class CycleLedger:
    """Per-phase system-cycle counters accumulated over a run."""

    input_stream: int = 0
    sp_compute: int = 0
    sp_learn: int = 0
    broadcast: int = 0
    tm_compute: int = 0
    tm_learn: int = 0
    steps: int = 0

    _PHASES = ("input_stream", "sp_compute", "sp_learn", "broadcast",
               "tm_compute", "tm_learn")

    def add(self, phase: str, cycles: int) -> None:
        require(phase in self._PHASES, f"unknown phase {phase!r}")
        setattr(self, phase, getattr(self, phase) + int(cycles))

    def total(self) -> int:
        return sum(getattr(self, p) for p in self._PHASES)

    def as_dict(self) -> dict:
        d = {p: getattr(self, p) for p in self._PHASES}
        d["steps"] = self.steps
        d["total"] = self.total()
        return d

    def mean_per_step(self) -> dict:
        n = max(self.steps, 1)
        return {p: getattr(self, p) / n for p in self._PHASES}


@dataclass
class LatencyReport:
    cycles: float
    seconds: float
    pipeline: bool

    @property
    def microseconds(self) -> float:
        return self.seconds * 1e6


def latency_estimate(ledger: CycleLedger, pipeline: bool = True) -> LatencyReport:
    """Visible per-sample latency implied by a ledger.

    With the pipeline on, compute and learn phases hide behind the next
    sample's input streaming; only input streaming, the broadcast, and the
    fixed overhead remain visible. With the pipeline off every phase counts.
    """
    n = max(ledger.steps, 1)
    per_step = ledger.mean_per_step()
    if pipeline:
        cycles = (per_step["input_stream"] + per_step["broadcast"]
                  + PIPELINE_OVERHEAD_CYCLES)
    else:
        cycles = sum(per_step.values()) + PIPELINE_OVERHEAD_CYCLES
    return LatencyReport(cycles=cycles, seconds=cycles / SYS_CLOCK_HZ,
                         pipeline=pipeline)


def latency_sweep(column_counts, winner_fraction: float | None = None,
                  input_packets: int = 17) -> list[dict]:
    """Cycles and wall time versus region size for the pipelined system.

    Each entry assumes a square grid of ``n_c`` columns with the usual
    winner fraction (40 of 961 by default) and the standard input stream.
    """
    frac = 40.0 / 961.0 if winner_fraction is None else float(winner_fraction)
    rows = []
    for n_c in column_counts:
        side = math.isqrt(int(n_c))
        require(side * side == int(n_c),
                f"n_c={n_c} is not a perfect square", ConfigError)
        n_w = max(1, round(frac * n_c))
        cycles = input_packets + (n_w + side) + PIPELINE_OVERHEAD_CYCLES
        rows.append({"n_columns": int(n_c), "n_winners": int(n_w),
                     "cycles": int(cycles),
                     "microseconds": cycles / SYS_CLOCK_HZ * 1e6})
    return rows
