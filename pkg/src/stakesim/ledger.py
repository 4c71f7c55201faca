"""Blocks, the UTXO set, validation, fork choice and the duplicate-stake policy."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import IO, Iterable, Iterator, Mapping

from .core import (DAY, YEAR, ChainParams, DuplicatePolicy, InvariantViolation, OutPoint, Utxo,
                   hash_from_hex, hash_to_hex, sha256_int)
from .kernel import Kernel, check_stake, kernel_hash, retarget
from .modifier import ModifierNotReady, ModifierOracle, NotEnoughHistory, WindowExhausted

log = logging.getLogger(__name__)

HEADER_SIZE = 80
COINSTAKE_OFFSET = HEADER_SIZE + 1
TRANSFER_STRIDE = 100


class RejectReason(str, Enum):
    BAD_PROOF = "BAD_PROOF"
    YOUNG_STAKE = "YOUNG_STAKE"
    UNKNOWN_UTXO = "UNKNOWN_UTXO"
    BAD_REWARD = "BAD_REWARD"
    BANNED_MINER = "BANNED_MINER"
    DUPLICATE_STAKE = "DUPLICATE_STAKE"
    BAD_SPEND = "BAD_SPEND"


@dataclass(frozen=True)
class Transfer:
    """Spend of one output into new outputs; values must balance."""

    spent: OutPoint
    outputs: tuple[tuple[int, int], ...]  # (owner, amount)

    @cached_property
    def tx_hash(self) -> int:
        data = struct.pack("<32sI", self.spent.tx_hash.to_bytes(32, "big"), self.spent.index)
        for owner, amount in self.outputs:
            data += struct.pack("<qq", owner, amount)
        return sha256_int(b"transfer" + data)

    def to_json(self) -> dict:
        return {"spent": self.spent.to_json(), "outputs": [list(o) for o in self.outputs]}

    @classmethod
    def from_json(cls, data: dict) -> Transfer:
        return cls(OutPoint.from_json(data["spent"]),
                   tuple((int(a), int(b)) for a, b in data["outputs"]))


_HEADER = struct.Struct("<qq32s32sq32sIqq")


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    prev: int
    kernel: Kernel | None
    hash_proof: int
    miner: int
    staked: OutPoint | None
    reward: int
    spends: tuple[Transfer, ...] = ()
    nonce: int = 0

    def header_bytes(self) -> bytes:
        staked = self.staked or OutPoint(0, 0)
        body = hashlib.sha256()
        for t in self.spends:
            body.update(t.tx_hash.to_bytes(32, "big"))
        kernel = self.kernel.serialize() if self.kernel else b""
        return _HEADER.pack(self.height, self.timestamp, self.prev.to_bytes(32, "big"),
                            self.hash_proof.to_bytes(32, "big"), self.miner,
                            staked.tx_hash.to_bytes(32, "big"), staked.index, self.reward,
                            self.nonce) + kernel + body.digest()

    @cached_property
    def hash(self) -> int:
        return sha256_int(self.header_bytes())

    @cached_property
    def coinstake_tx_hash(self) -> int:
        staked = self.staked or OutPoint(0, 0)
        return sha256_int(b"coinstake" + struct.pack(
            "<32sIqqqq", staked.tx_hash.to_bytes(32, "big"), staked.index, self.timestamp,
            self.reward, self.nonce, self.miner))

    def to_json(self) -> dict:
        return {
            "hash": hash_to_hex(self.hash),
            "height": self.height,
            "timestamp": self.timestamp,
            "prev": hash_to_hex(self.prev),
            "kernel": self.kernel.to_json() if self.kernel else None,
            "hash_proof": hash_to_hex(self.hash_proof),
            "miner": self.miner,
            "staked": self.staked.to_json() if self.staked else None,
            "reward": self.reward,
            "spends": [t.to_json() for t in self.spends],
            "nonce": self.nonce,
        }

    @classmethod
    def from_json(cls, data: dict) -> Block:
        b = cls(
            height=int(data["height"]),
            timestamp=int(data["timestamp"]),
            prev=hash_from_hex(data["prev"]),
            kernel=Kernel.from_json(data["kernel"]) if data["kernel"] else None,
            hash_proof=hash_from_hex(data["hash_proof"]),
            miner=int(data["miner"]),
            staked=OutPoint.from_json(data["staked"]) if data["staked"] else None,
            reward=int(data["reward"]),
            spends=tuple(Transfer.from_json(t) for t in data["spends"]),
            nonce=int(data["nonce"]),
        )
        if "hash" in data and hash_from_hex(data["hash"]) != b.hash:
            raise ValueError("block hash does not match its contents")
        return b


def make_genesis(timestamp: int, nonce: int = 0) -> Block:
    return Block(height=0, timestamp=timestamp, prev=0, kernel=None, hash_proof=0, miner=-1,
                 staked=None, reward=0, nonce=nonce)


def reward_rate(elapsed_years: Fraction, params: ChainParams) -> Fraction:
    r0 = Fraction(str(params.reward_initial_rate))
    r1 = Fraction(str(params.reward_final_rate))
    span = Fraction(str(params.reward_decline_years))
    if span == 0 or elapsed_years >= span:
        return r1
    frac = max(Fraction(0), Fraction(elapsed_years)) / span
    return r0 + (r1 - r0) * frac


def coinstake_reward(amount: int, days_idle, elapsed_years, params: ChainParams) -> int:
    """floor(amount * days_idle / 365 * annual rate), exact rational arithmetic."""
    if amount < 0 or days_idle < 0:
        raise ValueError("amount and idle time must be non-negative")
    rate = reward_rate(Fraction(elapsed_years), params)
    return int(Fraction(amount) * Fraction(days_idle) / 365 * rate)


@lru_cache(maxsize=16)
def _rate_coeffs(r0: float, r1: float, years: float) -> tuple[int, int, int, int, int]:
    """Integers (a0, a1, c, p, q): rates a0/c and a1/c, decline span p/q seconds."""
    f0, f1 = Fraction(str(r0)), Fraction(str(r1))
    c = f0.denominator * f1.denominator // math.gcd(f0.denominator, f1.denominator)
    span = Fraction(str(years)) * YEAR
    return int(f0 * c), int(f1 * c), c, span.numerator, span.denominator


def reward_for(utxo: Utxo, block_time: int, genesis_time: int, params: ChainParams) -> int:
    """Same value as :func:`coinstake_reward` in integer arithmetic on seconds."""
    a0, a1, c, sp, sq = _rate_coeffs(params.reward_initial_rate, params.reward_final_rate,
                                     params.reward_decline_years)
    idle = block_time - utxo.tx_time
    elapsed = max(0, block_time - genesis_time)
    if sp == 0 or elapsed * sq >= sp:
        return utxo.amount * idle * a1 // (YEAR * c)
    num = a0 * sp + (a1 - a0) * elapsed * sq
    return utxo.amount * idle * num // (YEAR * c * sp)


def coinstake_output(block: Block, staked: Utxo) -> Utxo:
    return Utxo(OutPoint(block.coinstake_tx_hash, 0), staked.amount + block.reward,
                block.timestamp, block.timestamp, COINSTAKE_OFFSET, staked.owner)


def transfer_outputs(block: Block, index: int, transfer: Transfer) -> list[Utxo]:
    offset = COINSTAKE_OFFSET + TRANSFER_STRIDE * (index + 1)
    return [Utxo(OutPoint(transfer.tx_hash, i), amount, block.timestamp, block.timestamp,
                 offset, owner) for i, (owner, amount) in enumerate(transfer.outputs)]


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: RejectReason | None = None
    detail: str = ""


ACCEPT = Verdict(True)


class ReceiptStatus(str, Enum):
    ACCEPTED = "ACCEPTED"
    REJECTED = "REJECTED"
    ORPHANED = "ORPHANED"  # parent unknown; pooled
    KNOWN = "KNOWN"


@dataclass(frozen=True)
class Receipt:
    status: ReceiptStatus
    reason: RejectReason | None = None
    tip_changed: bool = False
    reorg_depth: int = 0
    relay: bool = False
    punished: int | None = None  # miner banned by this block
    connected: tuple[int, ...] = ()  # hashes accepted, including released orphans


@dataclass
class BlockEntry:
    block: Block
    parent: BlockEntry | None
    next_target: int
    seen_order: int
    spent: tuple[Utxo, ...]
    created: tuple[Utxo, ...]
    valid: bool = True
    children: list = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.block.height


class _View(Mapping):
    """UTXO set of another branch: base set with an overlay of removals/additions."""

    def __init__(self, base: Mapping[OutPoint, Utxo], removed: set, added: dict) -> None:
        self.base, self.removed, self.added = base, removed, added

    def __getitem__(self, key: OutPoint) -> Utxo:
        if key in self.added:
            return self.added[key]
        if key in self.removed:
            raise KeyError(key)
        return self.base[key]

    def __iter__(self) -> Iterator[OutPoint]:
        for k in self.base:
            if k not in self.removed and k not in self.added:
                yield k
        yield from self.added

    def __len__(self) -> int:
        return sum(1 for _ in self)


class ChainState:
    """One node's view: block tree, best chain and the UTXO set at its tip."""

    def __init__(self, params: ChainParams, genesis: Block, genesis_utxos: Iterable[Utxo],
                 genesis_target: int, oracle: ModifierOracle | None = None,
                 block_store: dict | None = None, orphan_ttl: int | None = None) -> None:
        self.params = params
        self.genesis = genesis
        self.genesis_time = genesis.timestamp
        utxos = tuple(genesis_utxos)
        self.entries: dict[int, BlockEntry] = {}
        self._seen = 0
        root = BlockEntry(genesis, None, genesis_target, self._next_seen(), (), utxos)
        self.entries[genesis.hash] = root
        self.tip: BlockEntry = root
        self.utxos: dict[OutPoint, Utxo] = {u.id: u for u in utxos}
        self.by_owner: dict[int, dict[OutPoint, Utxo]] = {}
        for u in utxos:
            self.by_owner.setdefault(u.owner, {})[u.id] = u
        self.genesis_supply = sum(u.amount for u in utxos)
        self.proofs: dict[int, int] = {}
        self.banned: set[int] = set()
        self.rejected: dict[int, RejectReason] = {}
        self.orphans: dict[int, list[tuple[Block, float]]] = {}
        self.orphan_ttl = 2 * params.selection_interval if orphan_ttl is None else orphan_ttl
        self.version = 0
        self.reorgs: dict[int, int] = {}
        store = block_store if block_store is not None else {}
        store.setdefault(genesis.hash, genesis)
        self.store = store
        self.oracle = oracle or ModifierOracle(params, store.get, genesis.timestamp)

    def _next_seen(self) -> int:
        self._seen += 1
        return self._seen

    # -- queries -----------------------------------------------------------

    @property
    def height(self) -> int:
        return self.tip.height

    def best_chain(self) -> list[Block]:
        out = []
        e = self.tip
        while e is not None:
            out.append(e.block)
            e = e.parent
        out.reverse()
        return out

    def owned_utxos(self, owner: int) -> list[Utxo]:
        return list(self.by_owner.get(owner, {}).values())

    def supply(self) -> int:
        return sum(u.amount for u in self.utxos.values())

    def _path_from(self, a: BlockEntry, b: BlockEntry) -> tuple[list[BlockEntry], list[BlockEntry]]:
        """Entries to disconnect from a and to connect toward b (fork point excluded)."""
        down, up = [], []
        while a.height > b.height:
            down.append(a)
            a = a.parent
        while b.height > a.height:
            up.append(b)
            b = b.parent
        while a is not b:
            down.append(a)
            up.append(b)
            a, b = a.parent, b.parent
        up.reverse()
        return down, up

    def view_at(self, entry: BlockEntry) -> Mapping[OutPoint, Utxo]:
        """UTXO set after ``entry`` on its branch."""
        if entry is self.tip:
            return self.utxos
        down, up = self._path_from(self.tip, entry)
        removed: set = set()
        added: dict = {}
        for e in down:
            for u in e.created:
                added.pop(u.id, None)
                removed.add(u.id)
            for u in e.spent:
                removed.discard(u.id)
                added[u.id] = u
        for e in up:
            for u in e.spent:
                added.pop(u.id, None)
                removed.add(u.id)
            for u in e.created:
                removed.discard(u.id)
                added[u.id] = u
        return _View(self.utxos, removed, added)

    # -- validation --------------------------------------------------------

    def validate(self, b: Block) -> tuple[Verdict, tuple, tuple]:
        """Verdict plus the (spent, created) outputs the block would apply."""
        params = self.params
        none = ((), ())
        if b.miner in self.banned:
            return Verdict(False, RejectReason.BANNED_MINER), *none
        parent = self.entries.get(b.prev)
        if parent is None or not parent.valid:
            return Verdict(False, RejectReason.BAD_PROOF, "unknown or invalid parent"), *none
        if b.kernel is None or b.staked is None:
            return Verdict(False, RejectReason.BAD_PROOF, "missing kernel"), *none
        k = b.kernel
        if (b.height != parent.height + 1 or b.timestamp <= parent.block.timestamp
                or k.time_tx != b.timestamp):
            return Verdict(False, RejectReason.BAD_PROOF, "header inconsistent"), *none
        view = self.view_at(parent)
        staked = view.get(b.staked)
        if staked is None:
            return Verdict(False, RejectReason.UNKNOWN_UTXO, "staked output"), *none
        if b.timestamp - staked.tx_time < params.min_stake_age:
            return Verdict(False, RejectReason.YOUNG_STAKE), *none
        if (k.time_block_from != staked.block_time_from or k.tx_prev_offset != staked.tx_offset
                or k.tx_prev_time != staked.tx_time or k.prevout_n != staked.id.index):
            return Verdict(False, RejectReason.BAD_PROOF, "kernel fields"), *none
        try:
            expected = self.oracle.stake_modifier(staked, b.timestamp, parent.block)
        except (ModifierNotReady, NotEnoughHistory, WindowExhausted) as exc:
            return Verdict(False, RejectReason.BAD_PROOF, f"modifier: {exc}"), *none
        if k.stake_modifier != expected:
            return Verdict(False, RejectReason.BAD_PROOF, "modifier mismatch"), *none
        if b.hash_proof != kernel_hash(k):
            return Verdict(False, RejectReason.BAD_PROOF, "hash proof"), *none
        if not check_stake(k, parent.next_target, staked, params):
            return Verdict(False, RejectReason.BAD_PROOF, "stake inequality"), *none
        if b.reward != reward_for(staked, b.timestamp, self.genesis_time, params):
            return Verdict(False, RejectReason.BAD_REWARD), *none
        spent = [staked]
        created = [coinstake_output(b, staked)]
        for i, t in enumerate(b.spends):
            src = view.get(t.spent)
            if src is None or t.spent == b.staked or any(s.id == t.spent for s in spent):
                return Verdict(False, RejectReason.UNKNOWN_UTXO, "transfer input"), *none
            if sum(a for _, a in t.outputs) != src.amount or any(a <= 0 for _, a in t.outputs):
                return Verdict(False, RejectReason.BAD_SPEND), *none
            spent.append(src)
            created.extend(transfer_outputs(b, i, t))
        other = self.proofs.get(b.hash_proof)
        if other is not None and other != b.hash:
            return Verdict(False, RejectReason.DUPLICATE_STAKE), tuple(spent), tuple(created)
        return ACCEPT, tuple(spent), tuple(created)

    # -- state changes -----------------------------------------------------

    def _apply(self, e: BlockEntry) -> None:
        for u in e.spent:
            del self.utxos[u.id]
            del self.by_owner[u.owner][u.id]
        for u in e.created:
            self.utxos[u.id] = u
            self.by_owner.setdefault(u.owner, {})[u.id] = u

    def _unapply(self, e: BlockEntry) -> None:
        for u in e.created:
            del self.utxos[u.id]
            del self.by_owner[u.owner][u.id]
        for u in e.spent:
            self.utxos[u.id] = u
            self.by_owner.setdefault(u.owner, {})[u.id] = u

    def _switch_to(self, target: BlockEntry) -> int:
        if target is self.tip:
            return 0
        down, up = self._path_from(self.tip, target)
        for e in down:
            self._unapply(e)
        for e in up:
            self._apply(e)
        self.tip = target
        self.version += 1
        depth = len(down)
        if depth:
            self.reorgs[depth] = self.reorgs.get(depth, 0) + 1
        return depth

    def _best_entry(self) -> BlockEntry:
        best = None
        for e in self.entries.values():
            if not e.valid:
                continue
            if best is None or e.height > best.height or (
                    e.height == best.height and e.seen_order < best.seen_order):
                best = e
        return best

    def fork_choice(self) -> Block:
        """Most blocks wins; among equal heights the block seen first wins."""
        best = self._best_entry()
        self._switch_to(best)
        return best.block

    def _invalidate(self, e: BlockEntry) -> int:
        stack, n = [e], 0
        while stack:
            x = stack.pop()
            if x.valid:
                x.valid = False
                n += 1
                if self.proofs.get(x.block.hash_proof) == x.block.hash:
                    del self.proofs[x.block.hash_proof]
            stack.extend(x.children)
        return n

    def punish(self, miner: int) -> int:
        """Ban a miner and drop all of its blocks (and, mechanically, their descendants)."""
        self.banned.add(miner)
        removed = 0
        for e in list(self.entries.values()):
            if e.block.miner == miner and e.valid:
                removed += self._invalidate(e)
        if not self.tip.valid:
            # step back to a valid ancestor first, then pick the best branch
            anc = self.tip
            while not anc.valid:
                anc = anc.parent
            self._switch_to(anc)
        self.fork_choice()
        log.info("banned miner %d, removed %d block(s)", miner, removed)
        return removed

    def receive(self, b: Block, now: float | None = None) -> Receipt:
        """Process a block arriving from the network (idempotent)."""
        h = b.hash
        if h in self.entries or h in self.rejected:
            return Receipt(ReceiptStatus.KNOWN)
        if now is not None:
            self._expire_orphans(now)
        if b.prev not in self.entries:
            pool = self.orphans.setdefault(b.prev, [])
            if all(x.hash != h for x, _ in pool):
                pool.append((b, now if now is not None else 0.0))
            return Receipt(ReceiptStatus.ORPHANED)
        receipt = self._connect(b)
        if receipt.status is not ReceiptStatus.ACCEPTED:
            return receipt
        connected = list(receipt.connected)
        tip_changed, depth = receipt.tip_changed, receipt.reorg_depth
        queue = [h]
        while queue:
            parent_hash = queue.pop()
            for child, _ in self.orphans.pop(parent_hash, []):
                r = self._connect(child)
                if r.status is ReceiptStatus.ACCEPTED:
                    connected.append(child.hash)
                    queue.append(child.hash)
                    tip_changed = tip_changed or r.tip_changed
                    depth = max(depth, r.reorg_depth)
        return Receipt(ReceiptStatus.ACCEPTED, None, tip_changed, depth, True, None,
                       tuple(connected))

    def _connect(self, b: Block) -> Receipt:
        verdict, spent, created = self.validate(b)
        if not verdict.ok:
            if verdict.reason is RejectReason.DUPLICATE_STAKE:
                return self._on_duplicate(b)
            self.rejected[b.hash] = verdict.reason
            return Receipt(ReceiptStatus.REJECTED, verdict.reason)
        parent = self.entries[b.prev]
        nt = retarget(parent.next_target, b.timestamp - parent.block.timestamp, self.params)
        e = BlockEntry(b, parent, nt, self._next_seen(), spent, created)
        self.entries[b.hash] = e
        parent.children.append(e)
        self.proofs[b.hash_proof] = b.hash
        self.store.setdefault(b.hash, b)
        depth = 0
        changed = False
        if e.height > self.tip.height:
            depth = self._switch_to(e)
            changed = True
        return Receipt(ReceiptStatus.ACCEPTED, None, changed, depth, True, None, (b.hash,))

    def _on_duplicate(self, b: Block) -> Receipt:
        self.rejected[b.hash] = RejectReason.DUPLICATE_STAKE
        if self.params.duplicate_policy is DuplicatePolicy.DETECT_ONLY:
            return Receipt(ReceiptStatus.REJECTED, RejectReason.DUPLICATE_STAKE)
        old_tip = self.tip
        self.punish(b.miner)
        changed = self.tip is not old_tip
        return Receipt(ReceiptStatus.REJECTED, RejectReason.DUPLICATE_STAKE, changed, 0, False,
                       b.miner)

    def _expire_orphans(self, now: float) -> None:
        cutoff = now - self.orphan_ttl
        for key in list(self.orphans):
            kept = [(b, t) for b, t in self.orphans[key] if t >= cutoff]
            if kept:
                self.orphans[key] = kept
            else:
                del self.orphans[key]

    # -- audits and export -------------------------------------------------

    def audit(self) -> None:
        """Check supply and stake-age invariants on the best chain."""
        chain = self.best_chain()
        minted = sum(b.reward for b in chain[1:])
        if self.supply() != self.genesis_supply + minted:
            raise InvariantViolation("supply does not match genesis plus rewards")
        utxos: dict[OutPoint, Utxo] = {}
        for e in reversed(list(self._tip_path())):
            for u in e.spent:
                utxos.pop(u.id, None)
            for u in e.created:
                utxos[u.id] = u
            b = e.block
            if b.height > 0:
                s = e.spent[0]
                if b.timestamp - s.tx_time < self.params.min_stake_age:
                    raise InvariantViolation("block staked a young output")
        if utxos != self.utxos:
            raise InvariantViolation("UTXO set differs from replay of the best chain")

    def _tip_path(self) -> Iterator[BlockEntry]:
        e = self.tip
        while e is not None:
            yield e
            e = e.parent

    def dump_jsonl(self, fp: IO[str], chain: Iterable[Block] | None = None) -> None:
        for b in (self.best_chain() if chain is None else chain):
            fp.write(json.dumps(b.to_json(), sort_keys=True) + "\n")


def load_jsonl(fp: IO[str]) -> list[Block]:
    return [Block.from_json(json.loads(line)) for line in fp if line.strip()]


def validate_block(b: Block, state: ChainState, params: ChainParams | None = None) -> Verdict:
    if params is not None and params != state.params:
        raise ValueError("params differ from the chain state's params")
    return state.validate(b)[0]


def on_block_received(b: Block, state: ChainState, now: float | None = None) -> Receipt:
    return state.receive(b, now)


def fork_choice(state: ChainState) -> Block:
    return state.fork_choice()
