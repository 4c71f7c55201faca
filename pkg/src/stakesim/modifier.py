"""Stake modifier generation.

A modifier is assembled bit by bit. For bit k the candidate set is every
block whose timestamp falls in the cumulative window
``[interval_start - selection_interval, stop_k)`` and that was not already
picked for an earlier bit. The candidate with the lowest selection hash
wins and contributes the low bit of its proof hash.
"""
from __future__ import annotations

import csv
from bisect import bisect_left
import hashlib
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Protocol, Sequence

from .core import ChainParams, ModifierMode, Utxo, WindowLaw, hash_to_hex

log = logging.getLogger(__name__)


class WindowExhausted(RuntimeError):
    """No block is available for a window, even before the selection interval."""


class NotEnoughHistory(RuntimeError):
    """The chain does not reach back to the start of the selection interval."""


class ModifierNotReady(RuntimeError):
    """The requested modifier depends on blocks that cannot exist yet."""


class BlockLike(Protocol):
    hash: int
    prev: int
    height: int
    timestamp: int
    hash_proof: int


@dataclass(frozen=True)
class BlockRef:
    """Minimal block record, enough for modifier selection."""

    hash: int
    prev: int
    height: int
    timestamp: int
    hash_proof: int


def window_lengths(selection_interval: int, n_windows: int, law: WindowLaw) -> list[int]:
    """Integer window lengths summing exactly to ``selection_interval``."""
    return list(_window_lengths(selection_interval, n_windows, WindowLaw(law)))


@lru_cache(maxsize=64)
def _window_lengths(selection_interval: int, n_windows: int, law: WindowLaw) -> tuple[int, ...]:
    if n_windows <= 0:
        raise ValueError("n_windows must be positive")
    if law is WindowLaw.LINEAR:
        # window k carries weight k + 1, i.e. k/2080-style growth for 64 windows
        weights = [Fraction(k + 1) for k in range(n_windows)]
    else:
        last = n_windows - 1
        weights = [Fraction(last, last + (last - i) * 2) if last else Fraction(1)
                   for i in range(n_windows)]
    total = sum(weights)
    cum = 0
    edges = []
    acc = Fraction(0)
    for w in weights:
        acc += w
        edges.append(int(acc * selection_interval / total))
    lengths = []
    for e in edges:
        lengths.append(e - cum)
        cum = e
    if sum(lengths) != selection_interval:
        raise AssertionError("window lengths do not cover the selection interval")
    return tuple(lengths)


def window_stops(interval_start: int, params: ChainParams) -> list[int]:
    """Exclusive end time of each cumulative window."""
    start = interval_start - params.selection_interval
    stops = []
    t = start
    for length in _window_lengths(params.selection_interval, params.modifier_bits,
                                  params.window_law):
        t += length
        stops.append(t)
    return stops


def selection_hash(hash_proof: int, prev_modifier: int) -> int:
    data = hash_proof.to_bytes(32, "little") + prev_modifier.to_bytes(8, "little")
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def select_window_bit(candidates: Iterable[BlockLike], prev_modifier: int,
                      already_selected: set[int]) -> tuple[BlockLike, int]:
    """Lowest-selection-hash block not yet chosen, and the bit it contributes."""
    best = None
    best_h = None
    for b in candidates:
        if b.hash in already_selected:
            continue
        h = selection_hash(b.hash_proof, prev_modifier)
        if best_h is None or h < best_h or (h == best_h and b.hash < best.hash):
            best, best_h = b, h
    if best is None:
        raise WindowExhausted("no unselected candidate")
    return best, best.hash_proof & 1


@dataclass(frozen=True)
class ModifierSchedule:
    mode: ModifierMode
    interval_start: int
    value: int
    source_blocks: tuple[int, ...] = ()
    fallback_bits: int = 0

    def to_row(self) -> list:
        return [self.mode.value, self.interval_start, format(self.value, "016x"),
                len(self.source_blocks), self.fallback_bits,
                " ".join(hash_to_hex(h)[:16] for h in self.source_blocks)]


TRACE_HEADER = ["mode", "interval_start", "modifier", "n_sources", "fallback_bits", "sources"]


def trace_csv(schedules: Iterable[ModifierSchedule]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for s in schedules:
        w.writerow(s.to_row())
    return buf.getvalue()


def interval_start_for(t: int, params: ChainParams) -> int:
    return (t // params.modifier_interval) * params.modifier_interval


def static_interval_for(block_time_from: int, params: ChainParams) -> int:
    """First interval boundary at or after block_time_from + selection_interval."""
    mi = params.modifier_interval
    t = block_time_from + params.selection_interval
    return -((-t) // mi) * mi


def generate_modifier(chain: Sequence[BlockLike], interval_start: int, params: ChainParams,
                      prev_modifier: int, genesis_time: int | None = None,
                      now: int | None = None) -> ModifierSchedule:
    """Modifier for the interval starting at ``interval_start``.

    ``chain`` is one branch in height order. Blocks at or after
    ``interval_start`` are ignored. ``genesis_time`` defaults to the first
    block's timestamp when that block has height 0.
    """
    if not chain:
        raise NotEnoughHistory("empty chain")
    tip_time = chain[-1].timestamp if now is None else max(now, chain[-1].timestamp)
    if tip_time < interval_start:
        raise ModifierNotReady(f"interval {interval_start} starts after the chain tip")
    if genesis_time is None and chain[0].height == 0:
        genesis_time = chain[0].timestamp
    sel_start = interval_start - params.selection_interval
    if genesis_time is not None and sel_start < genesis_time:
        return ModifierSchedule(params.modifier_mode, interval_start, 0)
    if chain[0].height != 0 and chain[0].timestamp >= sel_start:
        raise NotEnoughHistory("chain starts inside the selection interval")
    in_window = [b for b in chain if sel_start <= b.timestamp < interval_start]
    before = [b for b in chain if b.timestamp < sel_start]
    try:
        return _assemble(in_window, before, interval_start, sel_start, params, prev_modifier)
    except WindowExhausted:
        if chain[0].height == 0:
            # too few blocks since genesis to fill every window: still bootstrapping
            return ModifierSchedule(params.modifier_mode, interval_start, 0)
        raise


def _assemble(in_window: Sequence[BlockLike], before: Sequence[BlockLike], interval_start: int,
              sel_start: int, params: ChainParams, prev_modifier: int) -> ModifierSchedule:
    stops = window_stops(interval_start, params)
    keyed = sorted(((selection_hash(b.hash_proof, prev_modifier), b.hash, b) for b in in_window),
                   key=lambda x: (x[0], x[1]))
    selected: set[int] = set()
    value = 0
    sources = []
    fallback = 0
    fallback_pool = sorted(before, key=lambda b: (b.timestamp, b.height), reverse=True)
    fb_index = 0
    times = sorted(b.timestamp for b in in_window)
    taken_in_window = 0
    for k, stop in enumerate(stops):
        chosen = None
        if bisect_left(times, stop) > taken_in_window:
            for i, (_, _, b) in enumerate(keyed):
                if b.timestamp < stop:
                    chosen = b
                    del keyed[i]
                    taken_in_window += 1
                    break
        if chosen is None:
            while fb_index < len(fallback_pool) and fallback_pool[fb_index].hash in selected:
                fb_index += 1
            if fb_index >= len(fallback_pool):
                raise WindowExhausted(f"window {k} of interval {interval_start} is empty")
            chosen = fallback_pool[fb_index]
            fallback += 1
        selected.add(chosen.hash)
        sources.append(chosen.hash)
        value |= (chosen.hash_proof & 1) << k
    if fallback:
        log.debug("interval %d: %d window(s) filled from earlier blocks", interval_start, fallback)
    return ModifierSchedule(params.modifier_mode, interval_start, value, tuple(sources), fallback)


@dataclass
class ModifierOracle:
    """Computes and caches modifiers for any branch of a block tree.

    Entries are keyed by (anchor block, interval start), where the anchor is
    the last block before the interval on that branch. Modifier values are a
    pure function of that key, so one oracle may serve many nodes.
    """

    params: ChainParams
    lookup: Callable[[int], BlockLike | None]
    genesis_time: int
    cache: dict = field(default_factory=dict)
    fallback_windows: int = 0
    computed: int = 0

    def _anchor(self, tip: BlockLike, interval_start: int) -> BlockLike:
        b = tip
        while b.timestamp >= interval_start:
            parent = self.lookup(b.prev)
            if parent is None:
                raise NotEnoughHistory("branch does not reach back before the interval")
            b = parent
        return b

    def modifier_at(self, tip: BlockLike, interval_start: int, now: int | None = None) -> int:
        return self.schedule_at(tip, interval_start, now).value

    def schedule_at(self, tip: BlockLike, interval_start: int,
                    now: int | None = None) -> ModifierSchedule:
        if interval_start % self.params.modifier_interval:
            raise ValueError("interval_start is not an interval boundary")
        reference = tip.timestamp if now is None else max(now, tip.timestamp)
        if reference < interval_start:
            raise ModifierNotReady(f"interval {interval_start} has not begun at the tip")
        if interval_start - self.params.selection_interval < self.genesis_time:
            return ModifierSchedule(self.params.modifier_mode, interval_start, 0)
        anchor = self._anchor(tip, interval_start)
        return self._schedule(anchor, interval_start)

    def _schedule(self, anchor: BlockLike, interval_start: int) -> ModifierSchedule:
        mi = self.params.modifier_interval
        sel = self.params.selection_interval
        # walk back to the newest cached or bootstrap interval, then fill forward
        pending = []
        a, start = anchor, interval_start
        while True:
            key = (a.hash, start)
            if key in self.cache:
                prev_value = self.cache[key].value
                break
            if start - sel < self.genesis_time:
                sched = ModifierSchedule(self.params.modifier_mode, start, 0)
                self.cache[key] = sched
                prev_value = 0
                break
            pending.append((a, start))
            start -= mi
            a = self._anchor(a, start)
        result = self.cache.get((anchor.hash, interval_start))
        for a, start in reversed(pending):
            sched = self._build(a, start, prev_value)
            self.cache[(a.hash, start)] = sched
            prev_value = sched.value
            result = sched
        return result

    def _build(self, anchor: BlockLike, interval_start: int, prev_modifier: int) -> ModifierSchedule:
        sel_start = interval_start - self.params.selection_interval
        in_window = []
        before = []
        b = anchor
        while b is not None:
            if b.timestamp >= sel_start:
                in_window.append(b)
            else:
                before.append(b)
                # a few earlier blocks suffice for the fallback pool
                if len(before) >= self.params.modifier_bits:
                    break
            b = self.lookup(b.prev) if b.height > 0 else None
        try:
            sched = _assemble(in_window, before, interval_start, sel_start, self.params,
                              prev_modifier)
        except WindowExhausted:
            if b is not None:
                raise
            # branch exhausted back to genesis: still bootstrapping
            return ModifierSchedule(self.params.modifier_mode, interval_start, 0)
        self.computed += 1
        if sched.fallback_bits:
            if self.fallback_windows == 0:
                log.warning("stake modifier windows filled from blocks before the selection "
                            "interval (chain sparser than the window law expects)")
            self.fallback_windows += sched.fallback_bits
        return sched

    def stake_modifier(self, utxo: Utxo, now: int, tip: BlockLike) -> int:
        """Modifier a stake must use at time ``now`` on the branch ending at ``tip``."""
        params = self.params
        if params.modifier_mode is ModifierMode.DYNAMIC:
            return self.modifier_at(tip, interval_start_for(now, params), now)
        start = static_interval_for(utxo.block_time_from, params)
        if now < start:
            raise ModifierNotReady("static modifier of this output is not fixed yet")
        return self.modifier_at(tip, start, now)


def modifier_for_stake(utxo: Utxo, now: int, chain: Sequence[BlockLike],
                       params: ChainParams) -> int:
    """Convenience wrapper over :class:`ModifierOracle` for a single branch."""
    by_hash = {b.hash: b for b in chain}
    genesis_time = chain[0].timestamp if chain[0].height == 0 else min(b.timestamp for b in chain)
    oracle = ModifierOracle(params, by_hash.get, genesis_time)
    return oracle.stake_modifier(utxo, now, chain[-1])
