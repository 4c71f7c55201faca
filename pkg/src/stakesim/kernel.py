"""Stake kernel hashing, the stake inequality and difficulty retargeting.

Kernel layout (40 bytes, little-endian, this order)::

    u64 stake modifier
    i64 timestamp of the block that confirmed the staked output
    u32 byte offset of the output's transaction in that block
    i64 timestamp of the output's transaction
    u32 output index
    i64 timestamp of the new block

The kernel hash is SHA-256 of those bytes read as a big-endian integer.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import (DAY, MAX_HASH, ChainParams, CoinAgeMode, Counter, OutPoint,
                   StakeInequality, Utxo)

KERNEL_STRUCT = struct.Struct("<QqIqIq")
_PREFIX_STRUCT = struct.Struct("<QqIqI")
_TIME_STRUCT = struct.Struct("<q")
TIME_WEIGHT_CAP_DAYS = 60


class YoungStakeError(ValueError):
    """The output has not reached the minimum stake age."""


@dataclass(frozen=True)
class Kernel:
    stake_modifier: int
    time_block_from: int
    tx_prev_offset: int
    tx_prev_time: int
    prevout_n: int
    time_tx: int

    def serialize(self) -> bytes:
        return KERNEL_STRUCT.pack(self.stake_modifier, self.time_block_from, self.tx_prev_offset,
                                  self.tx_prev_time, self.prevout_n, self.time_tx)

    @classmethod
    def deserialize(cls, data: bytes) -> Kernel:
        return cls(*KERNEL_STRUCT.unpack(data))

    def to_json(self) -> dict:
        return {
            "stake_modifier": self.stake_modifier,
            "time_block_from": self.time_block_from,
            "tx_prev_offset": self.tx_prev_offset,
            "tx_prev_time": self.tx_prev_time,
            "prevout_n": self.prevout_n,
            "time_tx": self.time_tx,
        }

    @classmethod
    def from_json(cls, data: dict) -> Kernel:
        return cls(**{k: int(v) for k, v in data.items()})


def kernel_for(utxo: Utxo, modifier: int, t: int) -> Kernel:
    return Kernel(modifier, utxo.block_time_from, utxo.tx_offset, utxo.tx_time,
                  utxo.id.index, t)


def kernel_hash(k: Kernel) -> int:
    return int.from_bytes(hashlib.sha256(k.serialize()).digest(), "big")


def weight_units(age: int, params: ChainParams) -> int:
    """Coin-age weight in seconds (a weight of 1 is DAY)."""
    if age < params.min_stake_age:
        return 0
    if params.coin_age_mode is CoinAgeMode.NEUCOIN_FLAT:
        return DAY
    return min(TIME_WEIGHT_CAP_DAYS * DAY, age - params.min_stake_age)


def time_weight(age: int, params: ChainParams) -> float:
    """Coin-age weight: 0 when young, 1 in flat mode, min(60, days past maturity) otherwise."""
    return weight_units(age, params) / DAY


def stake_threshold(target: int, utxo: Utxo, now: int, params: ChainParams) -> int:
    """target * amount * weight, saturating at 2^256 - 1."""
    w = weight_units(now - utxo.tx_time, params)
    if w == 0:
        return 0
    value = target * utxo.amount * w // DAY
    return min(value, MAX_HASH)


def hash_passes(h: int, threshold: int, params: ChainParams) -> bool:
    if params.stake_inequality is StakeInequality.STRICT:
        return h < threshold
    return h <= threshold


def check_stake(kernel: Kernel, target: int, utxo: Utxo, params: ChainParams) -> bool:
    if kernel.time_tx - utxo.tx_time < params.min_stake_age:
        raise YoungStakeError(f"stake age {kernel.time_tx - utxo.tx_time}s below minimum")
    threshold = stake_threshold(target, utxo, kernel.time_tx, params)
    if threshold == 0:
        return False
    return hash_passes(kernel_hash(kernel), threshold, params)


def retarget(prev: int, actual_spacing: int, params: ChainParams) -> int:
    """Exponential moving retarget toward the block time, clamped to [prev/2, 2 prev]."""
    if prev <= 0:
        raise ValueError("target must be positive")
    tau = params.block_time_target
    w = params.retarget_smoothing
    spacing = max(0, actual_spacing)
    new = prev * ((w - 1) * tau + 2 * spacing) // ((w + 1) * tau)
    new = max(new, max(1, prev // 2))
    new = min(new, prev * 2, MAX_HASH)
    return max(1, new)


def genesis_target(eligible_weighted_stake: int, params: ChainParams) -> int:
    """Target at which eligible stake yields one block per block_time_target."""
    if eligible_weighted_stake <= 0:
        raise ValueError("no eligible stake")
    return max(1, min(MAX_HASH, (1 << 256) // (params.block_time_target * eligible_weighted_stake)))


def mine_tick(utxos: Iterable[Utxo], modifier: int | Mapping[OutPoint, int], target: int,
              now: int, params: ChainParams, counter: Counter | None = None
              ) -> list[tuple[Utxo, Kernel]]:
    """All eligible outputs whose kernel passes at second ``now``, in output-id order.

    ``modifier`` is a single value or a per-output mapping (static modifiers).
    Exactly one hash is evaluated per eligible output.
    """
    hits = []
    evaluated = 0
    for u in sorted(utxos, key=lambda x: x.id):
        if now - u.tx_time < params.min_stake_age:
            continue
        m = modifier if isinstance(modifier, int) else modifier[u.id]
        k = kernel_for(u, m, now)
        evaluated += 1
        threshold = stake_threshold(target, u, now, params)
        if threshold and hash_passes(kernel_hash(k), threshold, params):
            hits.append((u, k))
    if counter is not None:
        counter.add(evaluated)
    return hits


@dataclass
class _Slot:
    utxo: Utxo
    prefix: bytes
    eligible_from: int
    threshold_bytes: bytes | None


class KernelScanner:
    """Batched scan of many outputs over a range of seconds.

    Produces the same verdicts as calling :func:`mine_tick` once per second
    but precomputes each output's 32-byte kernel prefix and compares raw
    digests against the big-endian threshold.
    """

    def __init__(self, params: ChainParams, counter: Counter | None = None) -> None:
        self.params = params
        self.counter = counter if counter is not None else Counter()

    def _slots(self, utxos: Sequence[Utxo], modifier, target: int, t_hi: int) -> list[_Slot]:
        params = self.params
        flat = params.coin_age_mode is CoinAgeMode.NEUCOIN_FLAT
        slots = []
        for u in sorted(utxos, key=lambda x: x.id):
            m = modifier if isinstance(modifier, int) else modifier[u.id]
            prefix = _PREFIX_STRUCT.pack(m, u.block_time_from, u.tx_offset, u.tx_time, u.id.index)
            # weight is non-decreasing in time, so t_hi gives a valid prefilter
            thr = stake_threshold(target, u, t_hi, params)
            if thr == 0:
                continue
            if flat and params.stake_inequality is StakeInequality.STRICT:
                thr_cmp = thr  # digest < thr
            else:
                thr_cmp = thr + 1 if thr < MAX_HASH else MAX_HASH + 1
            # digest < tb; None means every digest passes
            tb = thr_cmp.to_bytes(32, "big") if thr_cmp <= MAX_HASH else None
            slots.append(_Slot(u, prefix, u.tx_time + params.min_stake_age, tb))
        return slots

    def scan(self, utxos: Sequence[Utxo], modifier: int | Mapping[OutPoint, int], target: int,
             t_from: int, t_to: int, key=None) -> tuple[int, list[tuple[Utxo, Kernel]]] | None:
        """First second in [t_from, t_to) at which some output passes, with all passes then."""
        if t_to <= t_from:
            return None
        slots = self._slots(utxos, modifier, target, t_to - 1)
        if not slots:
            return None
        params = self.params
        sha = hashlib.sha256
        pack = _TIME_STRUCT.pack
        exact_needed = params.coin_age_mode is not CoinAgeMode.NEUCOIN_FLAT
        evaluated = 0
        prepared = [(s.prefix, s.threshold_bytes, s.eligible_from, s) for s in slots]
        for t in range(t_from, t_to):
            tb = pack(t)
            hits = None
            for prefix, thr, elig, slot in prepared:
                if t < elig:
                    continue
                evaluated += 1
                if thr is None or sha(prefix + tb).digest() < thr:
                    if hits is None:
                        hits = []
                    hits.append(slot)
            if hits:
                out = []
                for slot in hits:
                    k = Kernel(*_PREFIX_STRUCT.unpack(slot.prefix), t)
                    if exact_needed and not check_stake(k, target, slot.utxo, params):
                        continue
                    out.append((slot.utxo, k))
                if out:
                    self.counter.add(evaluated, key)
                    return t, out
        self.counter.add(evaluated, key)
        return None
