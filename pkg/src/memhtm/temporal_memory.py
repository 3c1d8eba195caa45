"""Temporal memory: sequence learning over the pooled column code.

Each column splits into a few cells so the same column activation can carry
different temporal contexts. Per step the layer runs three phases. First the
winning columns are evaluated: a column with correctly predicted cells
activates exactly those cells, an unpredicted column bursts all of its cells.
Second, cells that predicted but whose column did not win are punished, and
fresh predictions are computed for every cell from the new activity. Third,
Hebbian learning reinforces the lateral synapses that produced correct
predictions and grows new ones in bursting columns, targeting the cells that
were active on the previous step (bursting columns contribute all of their
cells as presynaptic sources).

Two backends share the class. ``ideal`` gives every cell a list of distal
segments with explicit synapse tables. ``memristive`` models the fabric the
region is built from: one merged 256-slot segment per cell, addressed by the
outputs of two per-cell maximal-length LFSRs. A lateral connection can only
form where the presynaptic cell's grid coordinates appear in both LFSR
output sets, so roughly half the address space is reachable per axis and a
40-column pattern captures about 10 to 11 slots. Slot devices carry the
permanence; segment activity is the summed read current of the matched slots
compared against thresholds expressed in connected-synapse units (the
conductance at the middle of the connected permanence band).
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .memristor import (FAULT_STUCK_OFF, FAULT_STUCK_ON, DeviceParams,
                        MemristorArray, pulses_for_delta)
from .ssr import Lfsr
from .validation import ConfigError, DataError, require, rng_for

def select_learning_cell(matching_scores, usage, match_floor,
                         exclude=None) -> int:
    """Choose the cell of a bursting column that gets to learn.

    The best matching cell wins (highest score at or above the floor,
    lowest index on ties). Cells flagged in ``exclude`` never compete.
    Without any matching cell the least used cell wins (lowest usage,
    lowest index on ties).
    """
    scores = np.asarray(matching_scores, dtype=float)
    usage = np.asarray(usage)
    eligible = scores >= match_floor
    if exclude is not None:
        eligible &= ~np.asarray(exclude, dtype=bool)
    if eligible.any():
        return int(np.argmax(np.where(eligible, scores, -np.inf)))
    return int(np.argmin(usage))


class _IdealSegments:
    """Growable synapse tables for the ideal backend.

    Segments live in flat arrays padded to ``n_syn`` slots; empty slots hold
    presynaptic index -1. A per-cell table caps segments per cell.
    """

    def __init__(self, n_cells: int, max_segments: int, n_syn: int,
                 perm_threshold: float):
        self.n_cells = n_cells
        self.max_segments = max_segments
        self.n_syn = n_syn
        self.perm_threshold = perm_threshold
        cap = 1024
        self.presyn = np.full((cap, n_syn), -1, dtype=np.int32)
        self.perm = np.zeros((cap, n_syn))
        self.seg_cell = np.full(cap, -1, dtype=np.int32)
        self.n_segments = 0
        self.cell_segs = np.full((n_cells, max_segments), -1, dtype=np.int32)
        self.cell_nseg = np.zeros(n_cells, dtype=np.int16)

    def _ensure_capacity(self, extra: int) -> None:
        need = self.n_segments + extra
        cap = self.presyn.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        grow = cap - self.presyn.shape[0]
        self.presyn = np.vstack([self.presyn,
                                 np.full((grow, self.n_syn), -1, np.int32)])
        self.perm = np.vstack([self.perm, np.zeros((grow, self.n_syn))])
        self.seg_cell = np.concatenate([self.seg_cell,
                                        np.full(grow, -1, np.int32)])

    def counts(self, active_mask: np.ndarray):
        """Connected and potential synapse counts per segment vs an activity
        mask. Returns (active_counts, potential_counts), each length
        n_segments."""
        s = self.n_segments
        if s == 0 or not active_mask.any():
            return np.zeros(s, np.int32), np.zeros(s, np.int32)
        presyn = self.presyn[:s]
        valid = presyn >= 0
        act = active_mask[presyn] & valid
        conn = self.perm[:s] >= self.perm_threshold
        return (act & conn).sum(1).astype(np.int32), act.sum(1).astype(np.int32)

    def add_segment(self, cell: int, targets: np.ndarray, perm: float) -> int:
        if self.cell_nseg[cell] >= self.max_segments:
            return -1
        self._ensure_capacity(1)
        seg = self.n_segments
        self.n_segments += 1
        k = min(targets.size, self.n_syn)
        self.presyn[seg, :k] = targets[:k]
        self.perm[seg, :k] = perm
        self.seg_cell[seg] = cell
        self.cell_segs[cell, self.cell_nseg[cell]] = seg
        self.cell_nseg[cell] += 1
        return seg

    def reclaim_dead(self, seg: int) -> None:
        """Prune fully decayed synapses so their slots can be regrown."""
        dead = (self.presyn[seg] >= 0) & (self.perm[seg] <= 0.0)
        self.presyn[seg, dead] = -1

    def extend_segment(self, seg: int, targets: np.ndarray, perm: float) -> None:
        free = np.flatnonzero(self.presyn[seg] < 0)
        k = min(free.size, targets.size)
        if k:
            self.presyn[seg, free[:k]] = targets[:k]
            self.perm[seg, free[:k]] = perm

    def adjust(self, segs: np.ndarray, active_mask: np.ndarray,
               inc: float, dec: float) -> None:
        """Hebbian move for whole segments: synapses onto active cells gain
        ``inc``, every other existing synapse loses ``dec``."""
        sub = self.presyn[segs]
        valid = sub >= 0
        on = active_mask[sub] & valid
        delta = np.where(on, inc, -dec) * valid
        self.perm[segs] = np.clip(self.perm[segs] + delta, 0.0, 1.0)

    def punish(self, segs: np.ndarray, active_mask: np.ndarray,
               amount: float) -> None:
        sub = self.presyn[segs]
        on = active_mask[sub] & (sub >= 0)
        self.perm[segs] = np.clip(self.perm[segs] - amount * on, 0.0, 1.0)


class _UniversalSegments:
    """Merged per-cell distal segment with LFSR-addressed slots.

    Every cell owns a 16 by 16 grid of synapse slots. Slot (i, j) is wired
    to grid position (x_i, y_j), where x and y are the 16-address bursts of
    the cell's two LFSRs, so connectivity is fixed per seed. A slot captures
    a presynaptic cell by storing its intra-column index in a small register
    and potentiating its device; evaluation sums the read current of slots
    whose stored address and register match a currently active cell.
    """

    def __init__(self, n_columns: int, cells_per_column: int,
                 params: Optional[DeviceParams], seed: int,
                 slots_per_axis: int = 16, init_sigma: float = 0.1,
                 perm_threshold: float = 0.5):
        side = math.isqrt(n_columns)
        require(side * side == n_columns,
                "the memristive backend needs a square column grid",
                ConfigError)
        require(side <= 31, "grid side must fit 5-bit addresses", ConfigError)
        self.side = side
        self.m = cells_per_column
        self.n_cells = n_columns * cells_per_column
        self.k = slots_per_axis
        self.n_slots = slots_per_axis ** 2
        self.devices = MemristorArray((self.n_cells, self.n_slots),
                                      params=params, seed=(seed << 8) | 0x55,
                                      init="gaussian", init_sigma=init_sigma)
        self.params = self.devices.params
        self.formed = np.zeros((self.n_cells, self.n_slots), dtype=bool)
        self.has_slots = np.zeros(self.n_cells, dtype=bool)
        self.zreg = np.zeros((self.n_cells, self.n_slots), dtype=np.uint8)
        self.pattern_count = np.zeros(self.n_cells, dtype=np.int32)
        # address -> slot-axis index (or -1) per cell, both axes
        self.xslot = np.full((self.n_cells, self.side), -1, dtype=np.int64)
        self.yslot = np.full((self.n_cells, self.side), -1, dtype=np.int64)
        rng = rng_for(seed, 0x4C46)
        seeds = rng.integers(1, 32, size=(self.n_cells, 2))
        for c in range(self.n_cells):
            self._wire_cell(c, int(seeds[c, 0]), int(seeds[c, 1]))
        # Threshold currents are measured in units of one connected
        # synapse. A connected device's permanence sits anywhere between
        # the threshold and the top rail, so the comparator reference uses
        # the conductance at the middle of that band.
        self.unit_current = float(
            self.params.conductance_of_state((perm_threshold + 1.0) / 2.0)
            * self.params.read_voltage)

    def _wire_cell(self, cell: int, seed_x: int, seed_y: int) -> None:
        self.xslot[cell] = -1
        self.yslot[cell] = -1
        for i, addr in enumerate(Lfsr(seed_x).run(self.k)):
            if addr <= self.side:
                self.xslot[cell, addr - 1] = i
        for j, addr in enumerate(Lfsr(seed_y).run(self.k)):
            if addr <= self.side:
                self.yslot[cell, addr - 1] = j

    def reseed_cell(self, cell: int, seed_x: int, seed_y: int) -> None:
        """New LFSR seeds wipe the cell's learned connectivity."""
        self._wire_cell(cell, seed_x, seed_y)
        self.formed[cell] = False
        self.has_slots[cell] = False
        self.zreg[cell] = 0
        self.pattern_count[cell] = 0

    def _coords(self, cell_idx: np.ndarray):
        cols = cell_idx // self.m
        return cols // self.side, cols % self.side, (cell_idx % self.m).astype(np.uint8)

    def currents(self, active_idx: np.ndarray) -> np.ndarray:
        """Summed matched-slot read current per cell for an active set."""
        if active_idx.size == 0:
            return np.zeros(self.n_cells)
        live = np.flatnonzero(self.has_slots)
        if live.size == 0:
            return np.zeros(self.n_cells)
        xa, ya, za = self._coords(active_idx)
        xs = self.xslot[np.ix_(live, xa)]
        ys = self.yslot[np.ix_(live, ya)]
        valid = (xs >= 0) & (ys >= 0)
        slot = np.where(valid, xs * self.k + ys, 0)
        flat = slot + live[:, None] * self.n_slots
        sel = np.take(self.formed.ravel(), flat) & valid
        sel &= np.take(self.zreg.ravel(), flat) == za[None, :]
        rows, hits = np.nonzero(sel)
        if rows.size == 0:
            return np.zeros(self.n_cells)
        # Conductance of the matched devices only; a full-array read would
        # dwarf the rest of this step.
        fi = flat[rows, hits]
        g = self.params.conductance_of_state(self.devices.w.ravel()[fi])
        fault = self.devices.fault.ravel()[fi]
        if fault.any():
            g = np.where(fault == FAULT_STUCK_ON, self.params.g_on, g)
            g = np.where(fault == FAULT_STUCK_OFF, self.params.g_off, g)
        cur = np.zeros(self.n_cells)
        cur[live] = np.bincount(rows, weights=g, minlength=live.size)
        return cur * self.params.read_voltage

    def _matches(self, cell: int, presyn_idx: np.ndarray):
        """Slot index and register value per matched presynaptic cell,
        first match kept when a slot is hit more than once."""
        xa, ya, za = self._coords(presyn_idx)
        xs = self.xslot[cell, xa]
        ys = self.yslot[cell, ya]
        ok = (xs >= 0) & (ys >= 0)
        slots = xs[ok] * self.k + ys[ok]
        z = za[ok]
        _, first = np.unique(slots, return_index=True)
        return slots[first], z[first]

    def _pulse_row(self, cell: int, counts: np.ndarray, out=None) -> None:
        idx = np.flatnonzero(counts)
        if idx.size == 0:
            return
        if out is not None:
            out[0].append(cell * self.n_slots + idx)
            out[1].append(counts[idx])
            return
        self.devices.apply_signed_pulses_flat(cell * self.n_slots + idx,
                                              counts[idx])

    def flush_pulses(self, out) -> None:
        """Apply a batch of row updates collected by learn_event/punish."""
        if out[0]:
            self.devices.apply_signed_pulses_flat(np.concatenate(out[0]),
                                                  np.concatenate(out[1]))

    def learn_event(self, cell: int, active_idx: np.ndarray,
                    capture_idx: np.ndarray, grow: bool,
                    inc_pulses: int, dec_pulses: int, out=None) -> bool:
        """Hebbian update plus optional synaptogenesis on one cell.

        Programming needs a driven select path, so only slots addressed by
        this event's broadcast can change. Addressed formed slots whose
        register agrees with the broadcast potentiate; addressed formed
        slots holding a different cell address depress. Slots outside the
        addressed set keep their state untouched. With growth enabled,
        slots reachable from ``capture_idx`` are captured: an unformed slot
        loads the register and potentiates, a formed slot holding a
        different address has its register overwritten while the device
        keeps its state, so the merged segment favors recent contexts when
        space collides. Returns True when anything was captured.
        """
        counts = np.zeros(self.n_slots, dtype=np.int64)
        matched = np.zeros(self.n_slots, dtype=bool)
        addressed = np.zeros(self.n_slots, dtype=bool)
        formed = self.formed[cell]
        if active_idx.size:
            slots, z = self._matches(cell, active_idx)
            if slots.size:
                addressed[slots] = True
                hit = slots[formed[slots] & (self.zreg[cell, slots] == z)]
                counts[hit] += inc_pulses
                matched[hit] = True
        grew = False
        if grow and capture_idx.size:
            slots, z = self._matches(cell, capture_idx)
            if slots.size:
                addressed[slots] = True
                is_formed = formed[slots]
                fresh = slots[~is_formed]
                if fresh.size:
                    self.formed[cell, fresh] = True
                    self.has_slots[cell] = True
                    self.zreg[cell, fresh] = z[~is_formed]
                    counts[fresh] += inc_pulses
                    matched[fresh] = True
                    grew = True
                stale = is_formed & (self.zreg[cell, slots] != z)
                if stale.any():
                    # Re-pointing an existing synapse: register overwritten,
                    # device state kept, pattern budget not consumed.
                    self.zreg[cell, slots[stale]] = z[stale]
                    matched[slots[stale]] = True
        depress = formed & addressed & ~matched
        counts[depress] -= dec_pulses
        self._pulse_row(cell, counts, out)
        if grew:
            self.pattern_count[cell] += 1
        return grew

    def punish(self, cell: int, presyn_idx: np.ndarray, pulses: int,
               out=None) -> None:
        """Depress only the slots that matched the given activity."""
        if presyn_idx.size == 0:
            return
        slots, z = self._matches(cell, presyn_idx)
        if slots.size == 0:
            return
        sel = slots[self.formed[cell, slots] & (self.zreg[cell, slots] == z)]
        counts = np.zeros(self.n_slots, dtype=np.int64)
        counts[sel] = -pulses
        self._pulse_row(cell, counts, out)


class TemporalMemory(BaseEstimator):
    """Sequence memory over winning columns, ideal or memristive."""

    def __init__(self, n_columns: int = 961, cells_per_column: int = 4,
                 activation_threshold: int = 10, match_threshold: int = 5,
                 perm_threshold: float = 0.5, perm_inc: float = 0.1,
                 perm_dec: float = 0.05, punish_dec: float = 0.01,
                 initial_perm: float = 0.21, max_segments_per_cell: int = 10,
                 max_synapses_per_segment: int = 40,
                 max_patterns_per_segment: int = 30, mode: str = "ideal",
                 device_params: Optional[DeviceParams] = None,
                 init_sigma: float = 0.1, seed: int = 0):
        self.n_columns = n_columns
        self.cells_per_column = cells_per_column
        self.activation_threshold = activation_threshold
        self.match_threshold = match_threshold
        self.perm_threshold = perm_threshold
        self.perm_inc = perm_inc
        self.perm_dec = perm_dec
        self.punish_dec = punish_dec
        self.initial_perm = initial_perm
        self.max_segments_per_cell = max_segments_per_cell
        self.max_synapses_per_segment = max_synapses_per_segment
        self.max_patterns_per_segment = max_patterns_per_segment
        self.mode = mode
        self.device_params = device_params
        self.init_sigma = init_sigma
        self.seed = seed

    # -- construction -------------------------------------------------------
    def initialize(self) -> "TemporalMemory":
        require(self.mode in ("ideal", "memristive"),
                f"unknown mode {self.mode!r}")
        require(self.cells_per_column >= 1, "need at least one cell per column")
        self.n_cells_ = self.n_columns * self.cells_per_column
        self._active_mask = np.zeros(self.n_cells_, dtype=bool)
        self._active_idx = np.empty(0, dtype=np.int64)
        self._winner_idx = np.empty(0, dtype=np.int64)
        self._pi = np.zeros(self.n_cells_, dtype=bool)
        self.anomaly_ = 0.0
        self.step_ = 0
        self._rng = rng_for(self.seed, 0x544D)
        if self.mode == "ideal":
            self.segments_ = _IdealSegments(self.n_cells_,
                                            self.max_segments_per_cell,
                                            self.max_synapses_per_segment,
                                            self.perm_threshold)
            self.universal_ = None
        else:
            self.universal_ = _UniversalSegments(
                self.n_columns, self.cells_per_column, self.device_params,
                self.seed, init_sigma=self.init_sigma,
                perm_threshold=self.perm_threshold)
            self.segments_ = None
        return self

    def _initialized(self) -> bool:
        return hasattr(self, "step_")

    def reset(self) -> "TemporalMemory":
        """Clear the activity context at a sequence boundary; synapses keep
        their state, so the next input starts a fresh sequence."""
        if self._initialized():
            self._active_mask[:] = False
            self._active_idx = np.empty(0, dtype=np.int64)
            self._winner_idx = np.empty(0, dtype=np.int64)
            self._pi[:] = False
            self.anomaly_ = 0.0
        return self

    # -- introspection --------------------------------------------------------
    @property
    def predicted_cells_(self) -> np.ndarray:
        return np.flatnonzero(self._pi)

    def predicted_columns(self) -> np.ndarray:
        return np.unique(self.predicted_cells_ // self.cells_per_column)

    @property
    def active_cells_(self) -> np.ndarray:
        return self._active_idx.copy()

    # -- main entry -------------------------------------------------------------
    def compute(self, winner_columns, learn: bool = True) -> np.ndarray:
        """Advance one step; returns the sorted active cell indices."""
        if not self._initialized():
            self.initialize()
        winners = np.unique(np.asarray(winner_columns, dtype=np.int64))
        if winners.size:
            require(0 <= winners[0] and winners[-1] < self.n_columns,
                    "winner column index out of range", DataError)
        m = self.cells_per_column
        prev_idx = self._active_idx
        prev_mask = self._active_mask
        pi_prev = self._pi

        # Phase 1: column evaluation. Predicted cells activate; unpredicted
        # winning columns burst.
        pi_grid = pi_prev.reshape(self.n_columns, m)
        win_pi = pi_grid[winners]
        has_pred = win_pi.any(axis=1)
        active_mask = np.zeros(self.n_cells_, dtype=bool)
        grid = active_mask.reshape(self.n_columns, m)
        grid[winners[has_pred]] = win_pi[has_pred]
        grid[winners[~has_pred]] = True
        active_idx = np.flatnonzero(active_mask)
        self.anomaly_ = (1.0 - has_pred.sum() / winners.size) if winners.size else 0.0

        ctx = self._context(prev_idx, prev_mask)

        # Phase 2: punish wrong predictions, then predict from new activity.
        if learn:
            wrong = pi_prev.copy()
            wrong.reshape(self.n_columns, m)[winners] = False
            self._punish(np.flatnonzero(wrong), prev_idx, prev_mask, ctx)
        self._pi = self._predict(active_idx, active_mask)

        # Phase 3: Hebbian learning. Reinforcement is driven by the full
        # previous activity; synapse growth targets the previous winner
        # cells (predicted-active plus the learning cell of each bursting
        # column), so shared subsequences keep their contexts apart.
        predicted_active = np.flatnonzero(active_mask & pi_prev)
        burst_cols = winners[~has_pred]
        if learn and prev_idx.size:
            grow_pool = self._winner_idx if self._winner_idx.size else prev_idx
            learning_cells = self._learn(predicted_active, burst_cols,
                                         prev_idx, prev_mask, grow_pool, ctx)
        elif learn and burst_cols.size:
            # No prior context to learn from (first input after a reset).
            # Still pick one cell per column so the next step grows toward
            # a pure single-cell pool instead of a whole-column burst.
            learning_cells = self._least_used_cells(burst_cols)
        elif burst_cols.size:
            learning_cells = (burst_cols[:, None] * m + np.arange(m)).ravel()
        else:
            learning_cells = np.empty(0, dtype=np.int64)
        self._winner_idx = np.union1d(predicted_active,
                                      np.asarray(learning_cells, dtype=np.int64))
        self._active_mask = active_mask
        self._active_idx = active_idx
        self.step_ += 1
        return active_idx

    def _least_used_cells(self, cols) -> np.ndarray:
        """One cell per column with the fewest segments or stored patterns."""
        m = self.cells_per_column
        cells = cols[:, None] * m + np.arange(m)
        if self.mode == "ideal":
            usage = self.segments_.cell_nseg[cells]
        else:
            usage = self.universal_.pattern_count[cells]
        return cells[np.arange(cols.size), usage.argmin(axis=1)].astype(np.int64)

    # -- backend dispatch -----------------------------------------------------
    def _context(self, prev_idx, prev_mask):
        """Segment evaluation against the previous step's activity with the
        current synaptic state."""
        if self.mode == "ideal":
            act, pot = self.segments_.counts(prev_mask)
            return {"act": act, "pot": pot}
        cur = self.universal_.currents(prev_idx)
        unit = self.universal_.unit_current
        return {"cur": cur,
                "score": cur / unit,
                "active": cur >= self.activation_threshold * unit,
                "matching": cur >= self.match_threshold * unit}

    def _predict(self, active_idx, active_mask) -> np.ndarray:
        pi = np.zeros(self.n_cells_, dtype=bool)
        if self.mode == "ideal":
            act, _ = self.segments_.counts(active_mask)
            hot = act >= self.activation_threshold
            if hot.any():
                pi[self.segments_.seg_cell[:self.segments_.n_segments][hot]] = True
        else:
            cur = self.universal_.currents(active_idx)
            pi = cur >= self.activation_threshold * self.universal_.unit_current
        return pi

    def _punish(self, wrong_cells, prev_idx, prev_mask, ctx) -> None:
        if wrong_cells.size == 0 or prev_idx.size == 0:
            return
        if self.mode == "ideal":
            segs = self.segments_.cell_segs[wrong_cells].ravel()
            segs = segs[segs >= 0]
            segs = segs[ctx["pot"][segs] >= self.match_threshold]
            if segs.size:
                self.segments_.punish(segs, prev_mask, self.punish_dec)
        else:
            pulses = max(1, abs(pulses_for_delta(self.punish_dec)))
            batch = ([], [])
            for cell in wrong_cells:
                if ctx["matching"][cell]:
                    self.universal_.punish(int(cell), prev_idx, pulses,
                                           out=batch)
            self.universal_.flush_pulses(batch)

    def _learn(self, predicted_active, burst_cols, prev_idx, prev_mask,
               grow_pool, ctx) -> np.ndarray:
        """Runs phase-3 learning; returns the burst learning cells."""
        if self.mode == "ideal":
            return self._learn_ideal(predicted_active, burst_cols, prev_idx,
                                     prev_mask, grow_pool, ctx)
        return self._learn_hw(predicted_active, burst_cols, prev_idx,
                              grow_pool, ctx)

    # -- ideal backend ----------------------------------------------------------
    def _learn_ideal(self, predicted_active, burst_cols, prev_idx, prev_mask,
                     grow_pool, ctx) -> np.ndarray:
        seg_store = self.segments_
        if predicted_active.size:
            segs = seg_store.cell_segs[predicted_active].ravel()
            segs = segs[segs >= 0]
            segs = segs[ctx["act"][segs] >= self.activation_threshold]
            if segs.size:
                seg_store.adjust(segs, prev_mask, self.perm_inc, self.perm_dec)
        m = self.cells_per_column
        have_segs = ctx["pot"].size > 0
        learning_cells = []
        for col in burst_cols:
            cells = np.arange(col * m, col * m + m)
            seg_table = seg_store.cell_segs[cells]
            if have_segs:
                pot = np.where(seg_table >= 0, ctx["pot"][seg_table.clip(0)], -1)
                act = np.where(seg_table >= 0, ctx["act"][seg_table.clip(0)], -1)
            else:
                pot = np.full(seg_table.shape, -1)
                act = np.full(seg_table.shape, -1)
            best_per_cell = pot.max(axis=1)
            has_active = (act >= self.activation_threshold).any(axis=1)
            chosen = select_learning_cell(best_per_cell,
                                          seg_store.cell_nseg[cells],
                                          self.match_threshold,
                                          exclude=has_active)
            cell = int(cells[chosen])
            learning_cells.append(cell)
            if best_per_cell[chosen] >= self.match_threshold:
                seg = int(seg_table[chosen, int(np.argmax(pot[chosen]))])
                seg_store.adjust(np.array([seg]), prev_mask, self.perm_inc,
                                 self.perm_dec)
                seg_store.reclaim_dead(seg)
                existing = seg_store.presyn[seg]
                pool = np.setdiff1d(grow_pool, existing[existing >= 0],
                                    assume_unique=False)
                room = int((seg_store.presyn[seg] < 0).sum())
                k = min(room, pool.size)
                if k > 0:
                    pick = self._rng.choice(pool, size=k, replace=False)
                    seg_store.extend_segment(seg, pick, self.initial_perm)
            else:
                k = min(self.max_synapses_per_segment, grow_pool.size)
                pick = self._rng.choice(grow_pool, size=k, replace=False)
                seg_store.add_segment(cell, pick, self.initial_perm)
        return np.asarray(learning_cells, dtype=np.int64)

    # -- memristive backend ----------------------------------------------------
    def _learn_hw(self, predicted_active, burst_cols, prev_idx, grow_pool,
                  ctx) -> np.ndarray:
        uni = self.universal_
        inc_p = abs(pulses_for_delta(self.perm_inc))
        dec_p = abs(pulses_for_delta(self.perm_dec))
        empty = np.empty(0, dtype=np.int64)
        batch = ([], [])
        for cell in predicted_active:
            uni.learn_event(int(cell), prev_idx, empty, grow=False,
                            inc_pulses=inc_p, dec_pulses=dec_p, out=batch)
        m = self.cells_per_column
        learning_cells = []
        for col in burst_cols:
            cells = np.arange(col * m, col * m + m)
            chosen = select_learning_cell(ctx["score"][cells],
                                          uni.pattern_count[cells],
                                          self.match_threshold,
                                          exclude=ctx["active"][cells])
            cell = int(cells[chosen])
            learning_cells.append(cell)
            grow = uni.pattern_count[cell] < self.max_patterns_per_segment
            uni.learn_event(cell, prev_idx, grow_pool if grow else empty,
                            grow=grow, inc_pulses=inc_p, dec_pulses=dec_p,
                            out=batch)
        uni.flush_pulses(batch)
        return np.asarray(learning_cells, dtype=np.int64)

    # -- estimator surface -------------------------------------------------------
    def fit(self, X, y=None) -> "TemporalMemory":
        """Initialize fresh and stream winner-column sets once, learning on."""
        self.initialize()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None) -> "TemporalMemory":
        for winners in X:
            self.compute(winners, learn=True)
        return self

    def transform(self, X) -> list:
        """Active-cell sets for a stream of winner sets, learning off."""
        return [self.compute(w, learn=False) for w in X]

    # -- checkpointing ------------------------------------------------------------
    def state_dict(self) -> dict:
        require(self._initialized(), "nothing to snapshot")
        d = {"active_mask": self._active_mask, "pi": self._pi,
             "step": np.int64(self.step_)}
        if self.mode == "ideal":
            s = self.segments_
            d.update(presyn=s.presyn[:s.n_segments],
                     perm=s.perm[:s.n_segments],
                     seg_cell=s.seg_cell[:s.n_segments],
                     cell_segs=s.cell_segs, cell_nseg=s.cell_nseg)
        else:
            u = self.universal_
            d.update(formed=u.formed, zreg=u.zreg,
                     pattern_count=u.pattern_count, xslot=u.xslot,
                     yslot=u.yslot, device_w=u.devices.w,
                     device_writes=u.devices.writes,
                     device_fault=u.devices.fault)
        return d

    def load_state_dict(self, d: dict) -> "TemporalMemory":
        if not self._initialized():
            self.initialize()
        self._active_mask = np.asarray(d["active_mask"], dtype=bool).copy()
        self._active_idx = np.flatnonzero(self._active_mask)
        self._pi = np.asarray(d["pi"], dtype=bool).copy()
        self.step_ = int(d["step"])
        if self.mode == "ideal":
            s = self.segments_
            n = np.asarray(d["seg_cell"]).size
            s._ensure_capacity(n)
            s.n_segments = n
            s.presyn[:n] = d["presyn"]
            s.perm[:n] = d["perm"]
            s.seg_cell[:n] = d["seg_cell"]
            s.cell_segs = np.asarray(d["cell_segs"], dtype=np.int32).copy()
            s.cell_nseg = np.asarray(d["cell_nseg"], dtype=np.int16).copy()
        else:
            u = self.universal_
            u.formed = np.asarray(d["formed"], dtype=bool).copy()
            u.has_slots = u.formed.any(axis=1)
            u.zreg = np.asarray(d["zreg"], dtype=np.uint8).copy()
            u.pattern_count = np.asarray(d["pattern_count"], dtype=np.int32).copy()
            u.xslot = np.asarray(d["xslot"], dtype=np.int64).copy()
            u.yslot = np.asarray(d["yslot"], dtype=np.int64).copy()
            u.devices.w[...] = d["device_w"]
            u.devices.writes[...] = d["device_writes"]
            u.devices.fault[...] = d["device_fault"]
        return self
