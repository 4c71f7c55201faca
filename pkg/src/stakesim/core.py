"""Shared value types: chain parameters, hashes, UTXOs, log-domain probabilities, RNG."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

MINUTE = 60
HOUR = 3600
DAY = 86400
YEAR = 365 * DAY
COIN = 1_000_000  # base units per coin
MAX_HASH = (1 << 256) - 1


class ParamsError(ValueError):
    """Raised when a parameter set violates its invariants."""


class InvariantViolation(RuntimeError):
    """Raised when an internal consistency check fails."""


class CoinAgeMode(str, Enum):
    PEERCOIN_TIME_WEIGHT = "PEERCOIN_TIME_WEIGHT"
    NEUCOIN_FLAT = "NEUCOIN_FLAT"


class ModifierMode(str, Enum):
    STATIC = "STATIC"
    DYNAMIC = "DYNAMIC"


class StakeInequality(str, Enum):
    NON_STRICT = "NON_STRICT"
    STRICT = "STRICT"


class WindowLaw(str, Enum):
    LINEAR = "LINEAR"
    PEERCOIN = "PEERCOIN"


class DuplicatePolicy(str, Enum):
    PUNITIVE = "PUNITIVE"
    DETECT_ONLY = "DETECT_ONLY"


_ENUM_FIELDS = {
    "coin_age_mode": CoinAgeMode,
    "modifier_mode": ModifierMode,
    "stake_inequality": StakeInequality,
    "window_law": WindowLaw,
    "duplicate_policy": DuplicatePolicy,
}


@dataclass(frozen=True)
class ChainParams:
    """Consensus parameters. All durations are integer seconds."""

    block_time_target: int
    min_stake_age: int
    modifier_interval: int
    selection_interval: int
    coin_age_mode: CoinAgeMode
    modifier_mode: ModifierMode
    stake_inequality: StakeInequality
    reward_initial_rate: float
    reward_final_rate: float
    reward_decline_years: float
    modifier_bits: int = 64
    retarget_smoothing: int = 100
    window_law: WindowLaw = WindowLaw.LINEAR
    duplicate_policy: DuplicatePolicy = DuplicatePolicy.PUNITIVE

    def __post_init__(self) -> None:
        for name, enum_type in _ENUM_FIELDS.items():
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    object.__setattr__(self, name, enum_type(value))
                except ValueError as exc:
                    raise ParamsError(f"{name}: {exc}") from None
        for name in ("block_time_target", "min_stake_age", "modifier_interval",
                     "selection_interval", "retarget_smoothing"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ParamsError(f"{name} must be a positive integer, got {value!r}")
        if not 1 <= self.modifier_bits <= 64:
            raise ParamsError("modifier_bits must lie in [1, 64]")
        if self.min_stake_age <= self.selection_interval:
            raise ParamsError("min_stake_age must exceed selection_interval")
        if self.modifier_interval > self.selection_interval:
            raise ParamsError("modifier_interval must not exceed selection_interval")
        if self.selection_interval < self.modifier_bits:
            raise ParamsError("selection_interval too short for the window count")
        for name in ("reward_initial_rate", "reward_final_rate"):
            if getattr(self, name) < 0:
                raise ParamsError(f"{name} must be non-negative")
        if self.reward_decline_years < 0:
            raise ParamsError("reward_decline_years must be non-negative")

    def replace(self, **changes: Any) -> ChainParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for name in _ENUM_FIELDS:
            out[name] = out[name].value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChainParams:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParamsError(f"unknown parameter(s): {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ParamsError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ChainParams:
        return cls.from_dict(json.loads(text))


NEUCOIN = ChainParams(
    block_time_target=MINUTE,
    min_stake_age=int(1.6 * DAY),
    modifier_interval=200 * MINUTE,
    selection_interval=2250 * MINUTE,
    coin_age_mode=CoinAgeMode.NEUCOIN_FLAT,
    modifier_mode=ModifierMode.DYNAMIC,
    stake_inequality=StakeInequality.STRICT,
    reward_initial_rate=1.00,
    reward_final_rate=0.06,
    reward_decline_years=10.0,
    window_law=WindowLaw.LINEAR,
    duplicate_policy=DuplicatePolicy.PUNITIVE,
)

PEERCOIN = ChainParams(
    block_time_target=10 * MINUTE,
    min_stake_age=30 * DAY,
    modifier_interval=6 * HOUR,
    selection_interval=9 * DAY,
    coin_age_mode=CoinAgeMode.PEERCOIN_TIME_WEIGHT,
    modifier_mode=ModifierMode.STATIC,
    stake_inequality=StakeInequality.NON_STRICT,
    reward_initial_rate=0.01,
    reward_final_rate=0.01,
    reward_decline_years=10.0,
    window_law=WindowLaw.PEERCOIN,
    duplicate_policy=DuplicatePolicy.DETECT_ONLY,
)

PRESETS: dict[str, ChainParams] = {"neucoin": NEUCOIN, "peercoin": PEERCOIN}


def preset(name: str) -> ChainParams:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ParamsError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# Hashes are SHA-256 digests read as big-endian unsigned integers.

def sha256_int(data: bytes) -> int:
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def hash_to_hex(h: int) -> str:
    return format(h, "064x")


def hash_from_hex(text: str) -> int:
    if len(text) != 64:
        raise ValueError("hash hex must be 64 characters")
    return int(text, 16)


def hash_to_bytes(h: int) -> bytes:
    return h.to_bytes(32, "big")


def hash_from_bytes(data: bytes) -> int:
    if len(data) != 32:
        raise ValueError("hash must be 32 bytes")
    return int.from_bytes(data, "big")


class OutPoint(NamedTuple):
    tx_hash: int
    index: int

    def to_json(self) -> list:
        return [hash_to_hex(self.tx_hash), self.index]

    @classmethod
    def from_json(cls, data: list) -> OutPoint:
        return cls(hash_from_hex(data[0]), int(data[1]))


@dataclass(frozen=True)
class Utxo:
    id: OutPoint
    amount: int
    tx_time: int
    block_time_from: int
    tx_offset: int
    owner: int

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("UTXO amount must be positive")

    def age(self, now: int) -> int:
        return now - self.tx_time

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id.to_json(),
            "amount": self.amount,
            "tx_time": self.tx_time,
            "block_time_from": self.block_time_from,
            "tx_offset": self.tx_offset,
            "owner": self.owner,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> Utxo:
        return cls(
            id=OutPoint.from_json(data["id"]),
            amount=int(data["amount"]),
            tx_time=int(data["tx_time"]),
            block_time_from=int(data["block_time_from"]),
            tx_offset=int(data["tx_offset"]),
            owner=int(data["owner"]),
        )


_LN10 = math.log(10.0)


@dataclass(frozen=True, order=False)
class TailProb:
    """A probability in [0, 1] held as log10, so values far below 1e-308 survive."""

    log10_value: float
    is_zero: bool = False

    def __post_init__(self) -> None:
        if self.is_zero:
            object.__setattr__(self, "log10_value", -math.inf)
        elif math.isnan(self.log10_value):
            raise ValueError("log10 value is NaN")
        elif self.log10_value > 1e-12:
            raise ValueError(f"probability above 1 (log10={self.log10_value})")
        elif self.log10_value > 0:
            object.__setattr__(self, "log10_value", 0.0)
        elif self.log10_value == -math.inf:
            object.__setattr__(self, "is_zero", True)

    @classmethod
    def zero(cls) -> TailProb:
        return cls(-math.inf, True)

    @classmethod
    def one(cls) -> TailProb:
        return cls(0.0)

    @classmethod
    def from_linear(cls, x: float) -> TailProb:
        if x < 0 or x > 1 + 1e-12:
            raise ValueError(f"probability out of range: {x}")
        if x == 0:
            return cls.zero()
        return cls(min(0.0, math.log10(x)))

    @classmethod
    def from_ln(cls, ln_value: float) -> TailProb:
        if ln_value == -math.inf:
            return cls.zero()
        return cls(min(0.0, ln_value / _LN10))

    @property
    def ln(self) -> float:
        return -math.inf if self.is_zero else self.log10_value * _LN10

    def to_linear(self) -> float:
        """Linear value; underflows to 0.0 below ~1e-308."""
        return 0.0 if self.is_zero else 10.0 ** self.log10_value

    def __float__(self) -> float:
        return self.to_linear()

    def __mul__(self, other: TailProb) -> TailProb:
        if self.is_zero or other.is_zero:
            return TailProb.zero()
        return TailProb(self.log10_value + other.log10_value)

    def __add__(self, other: TailProb) -> TailProb:
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        hi, lo = max(self.ln, other.ln), min(self.ln, other.ln)
        return TailProb.from_ln(min(0.0, hi + math.log1p(math.exp(lo - hi))))

    def __lt__(self, other: TailProb) -> bool:
        return self.log10_value < other.log10_value

    def __le__(self, other: TailProb) -> bool:
        return self.log10_value <= other.log10_value

    def __gt__(self, other: TailProb) -> bool:
        return self.log10_value > other.log10_value

    def __ge__(self, other: TailProb) -> bool:
        return self.log10_value >= other.log10_value

    def complement(self) -> TailProb:
        """1 - x, accurate at both ends."""
        if self.is_zero:
            return TailProb.one()
        ln_x = self.ln
        if ln_x > -0.6931471805599453:
            return TailProb.from_ln(math.log(-math.expm1(ln_x)) if ln_x < 0 else -math.inf)
        return TailProb.from_ln(math.log1p(-math.exp(ln_x)))

    def power(self, k: float) -> TailProb:
        if k < 0:
            raise ValueError("negative exponent")
        if k == 0:
            return TailProb.one()
        if self.is_zero:
            return TailProb.zero()
        return TailProb(self.log10_value * k)

    def to_json(self) -> dict[str, Any]:
        return {"log10": None if self.is_zero else self.log10_value, "is_zero": self.is_zero}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> TailProb:
        if data["is_zero"]:
            return cls.zero()
        return cls(float(data["log10"]))

    def __repr__(self) -> str:
        if self.is_zero:
            return "TailProb(0)"
        return f"TailProb(1e{self.log10_value:.6g})"


def complement_power(q: TailProb, k: float) -> TailProb:
    """1 - (1 - q)**k without cancellation, for k up to ~1e20 and any q."""
    if k < 0:
        raise ValueError("negative exponent")
    if k == 0 or q.is_zero:
        return TailProb.zero()
    if q.log10_value >= 0:
        return TailProb.one()
    # x = -k * ln(1 - q), result = 1 - exp(-x)
    if q.log10_value < -300:
        log10_x = math.log10(k) + q.log10_value
    else:
        log10_x = math.log10(k) + math.log10(-math.log1p(-q.to_linear()))
    if log10_x < -15:
        return TailProb(log10_x)
    if log10_x > 3:
        return TailProb.one()
    x = 10.0 ** log10_x
    return TailProb.from_linear(min(1.0, -math.expm1(-x)))


class Rng:
    """Seeded PCG64 stream; the same (seed, stream) always yields the same draws."""

    def __init__(self, seed: int, stream: int = 0) -> None:
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> Rng:
        """Independent stream derived from this seed; unaffected by draws on self."""
        return Rng(self.seed, (self.stream << 20) + 1 + int(stream))

    def random(self, size: int | None = None):
        return self.generator.random(size)

    def integers(self, low: int, high: int | None = None, size: int | None = None):
        return self.generator.integers(low, high, size)

    def exponential(self, scale: float = 1.0, size: int | None = None):
        return self.generator.exponential(scale, size)

    def poisson(self, lam, size: int | None = None):
        return self.generator.poisson(lam, size)

    def bits64(self) -> int:
        return int(self.generator.integers(0, 1 << 64, dtype=np.uint64))

    def hash256(self) -> int:
        return int.from_bytes(self.generator.bytes(32), "big")


_KEY_STRUCT = struct.Struct("<q")


def keyed_uniform(seed: int, *parts: int | bytes | str) -> float:
    """Uniform in (0, 1) derived by hashing; independent of draw order."""
    h = hashlib.sha256(_KEY_STRUCT.pack(seed))
    for part in parts:
        if isinstance(part, int):
            h.update(part.to_bytes(40, "little", signed=True))
        elif isinstance(part, str):
            h.update(part.encode())
        else:
            h.update(part)
    top = int.from_bytes(h.digest()[:8], "big") >> 11
    return (top + 0.5) / float(1 << 53)


def name_key(name: str) -> int:
    """Stable 63-bit identity for a named participant."""
    return sha256_int(b"node:" + name.encode()) >> 193


@dataclass
class Counter:
    """Mutable tally shared by hot loops (for example hashes evaluated)."""

    value: int = 0
    by_key: dict = field(default_factory=dict)

    def add(self, n: int, key: Any = None) -> None:
        self.value += n
        if key is not None:
            self.by_key[key] = self.by_key.get(key, 0) + n
