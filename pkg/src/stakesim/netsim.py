"""Discrete-event network simulation of stake miners.

Time advances in integer seconds for mining and in real seconds for block
arrival. A node evaluates one kernel hash per eligible output per second.
Blocks arriving at time ``a`` influence mining from second ``floor(a) + 1``;
with zero latency two nodes can therefore succeed in the same second and
fork. Every random quantity is derived from the seed and the identities of
the blocks and nodes involved, so relabeling nodes relabels the results.
"""
from __future__ import annotations

import heapq
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from .core import (DAY, ChainParams, CoinAgeMode, Counter, ModifierMode, OutPoint, ParamsError,
                   Utxo, hash_to_hex, keyed_uniform, name_key, sha256_int)
from .kernel import KernelScanner, genesis_target, kernel_hash, weight_units
from .ledger import COINSTAKE_OFFSET, Block, ChainState, RejectReason, make_genesis, reward_for
from .modifier import ModifierOracle, interval_start_for, static_interval_for

HONEST = "honest"
DUAL_FORK = "dual_fork"
BEHAVIORS = (HONEST, DUAL_FORK)

_MINED, _SCAN, _ARRIVAL = 0, 1, 2


@dataclass(frozen=True)
class NodeSpec:
    name: str
    stake: int
    splits: int = 1
    behavior: str = HONEST

    def __post_init__(self) -> None:
        if self.stake <= 0:
            raise ParamsError(f"node {self.name}: stake must be positive")
        if self.splits < 1 or self.splits > self.stake:
            raise ParamsError(f"node {self.name}: splits must lie in [1, stake]")
        if self.behavior not in BEHAVIORS:
            raise ParamsError(f"node {self.name}: unknown behavior {self.behavior!r}")


@dataclass(frozen=True)
class LatencyModel:
    """Per-link delivery delay in seconds."""

    kind: str = "lognormal"
    median: float = 2.0
    sigma: float = 0.8
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "uniform", "lognormal"):
            raise ParamsError(f"unknown latency kind {self.kind!r}")
        if min(self.median, self.sigma, self.low, self.high) < 0:
            raise ParamsError("latency parameters must be non-negative")
        if self.kind == "uniform" and self.high < self.low:
            raise ParamsError("latency parameters must be non-negative and ordered")

    def quantile(self, u: float) -> float:
        if self.kind == "fixed":
            return self.median
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * u
        if self.median == 0:
            return 0.0
        return self.median * math.exp(self.sigma * statistics.NormalDist().inv_cdf(u))

    def mean(self) -> float:
        if self.kind == "fixed":
            return self.median
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return self.median * math.exp(0.5 * self.sigma ** 2)


ZERO_LATENCY = LatencyModel("fixed", median=0.0)
# Fitted so that ten equal nodes fork about 2% of blocks at a 600 s block time.
CALIBRATED_LATENCY = LatencyModel("lognormal", median=10.0, sigma=0.8)


@dataclass(frozen=True)
class SimConfig:
    params: ChainParams
    nodes: tuple[NodeSpec, ...]
    duration: int
    seed: int
    latency: LatencyModel = CALIBRATED_LATENCY
    warmup_blocks: int = 1000
    tail_blocks: int = 6
    genesis_time: int = 0
    chunk: int | None = None
    record_trace: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise ParamsError("at least one node is required")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ParamsError("node names must be unique")
        if self.warmup_blocks < 0 or self.tail_blocks < 0:
            raise ParamsError("warmup and tail must be non-negative")
        need = self.params.selection_interval + self.warmup_blocks * self.params.block_time_target
        if self.duration < need:
            raise ParamsError(f"duration {self.duration}s shorter than selection interval plus "
                              f"warmup ({need}s)")
        if self.seed < 0:
            raise ParamsError("seed must be non-negative")

    @property
    def measure_from(self) -> int:
        p = self.params
        return self.genesis_time + p.selection_interval + self.warmup_blocks * p.block_time_target

    @property
    def measure_to(self) -> int:
        return self.genesis_time + self.duration - self.tail_blocks * self.params.block_time_target

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "nodes": [asdict(n) for n in self.nodes],
            "duration": self.duration,
            "seed": self.seed,
            "latency": asdict(self.latency),
            "warmup_blocks": self.warmup_blocks,
            "tail_blocks": self.tail_blocks,
            "genesis_time": self.genesis_time,
            "chunk": self.chunk,
            "record_trace": self.record_trace,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SimConfig:
        d = dict(data)
        d["params"] = ChainParams.from_dict(d["params"])
        d["nodes"] = tuple(NodeSpec(**n) for n in d["nodes"])
        if "latency" in d:
            d["latency"] = LatencyModel(**d["latency"])
        return cls(**d)


@dataclass
class SimResult:
    node_names: list[str]
    blocks_per_node: list[int]
    main_chain_per_node: list[int]
    main_chain_length: int
    orphan_count: int
    total_blocks: int
    fork_rate: float
    reorg_depths: dict[int, int]
    rewards_per_node: list[int]
    hashes: int
    hashes_per_node: list[int]
    final_height: int
    measure_window: tuple[int, int]
    banned_by_node: list[list[str]] = field(default_factory=list)
    dishonest_on_chain: list[int] = field(default_factory=list)
    duplicate_events: list[dict] = field(default_factory=list)
    trace: list[tuple] | None = None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["reorg_depths"] = {str(k): v for k, v in sorted(self.reorg_depths.items())}
        d["measure_window"] = list(self.measure_window)
        if self.trace is None:
            d.pop("trace")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def split_amounts(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def genesis_utxos(cfg: SimConfig) -> list[Utxo]:
    p = cfg.params
    out = []
    for spec in cfg.nodes:
        owner = name_key(spec.name)
        for i, amount in enumerate(split_amounts(spec.stake, spec.splits)):
            txh = sha256_int(f"genesis:{cfg.seed}:{spec.name}:{i}".encode())
            stagger = txh % p.modifier_interval
            pre_age = p.min_stake_age + stagger
            if p.coin_age_mode is CoinAgeMode.PEERCOIN_TIME_WEIGHT:
                pre_age += DAY
            t = cfg.genesis_time - pre_age
            out.append(Utxo(OutPoint(txh, 0), amount, t, t, COINSTAKE_OFFSET + (txh >> 200) % 64,
                            owner))
    return out


def initial_target(cfg: SimConfig, utxos: Sequence[Utxo]) -> int:
    weighted = sum(u.amount * weight_units(cfg.genesis_time - u.tx_time, cfg.params)
                   for u in utxos) // DAY
    return genesis_target(weighted, cfg.params)


@dataclass
class _Node:
    index: int
    spec: NodeSpec
    key: int
    state: ChainState
    produced: list = field(default_factory=list)


class Simulation:
    def __init__(self, cfg: SimConfig) -> None:
        self.cfg = cfg
        p = cfg.params
        self.params = p
        self.store: dict[int, Block] = {}
        self.genesis = make_genesis(cfg.genesis_time, nonce=cfg.seed)
        self.store[self.genesis.hash] = self.genesis
        self.oracle = ModifierOracle(p, self.store.get, cfg.genesis_time)
        utxos = genesis_utxos(cfg)
        target = initial_target(cfg, utxos)
        self.nodes: list[_Node] = []
        for i, spec in enumerate(cfg.nodes):
            state = ChainState(p, self.genesis, utxos, target, oracle=self.oracle,
                               block_store=self.store)
            self.nodes.append(_Node(i, spec, name_key(spec.name), state))
        self.counter = Counter()
        self.scanner = KernelScanner(p, self.counter)
        tau = p.block_time_target
        self.chunk = cfg.chunk or max(4, min(128, tau // 4))
        self.queue: list = []
        self.seq = 0
        self.trace: list | None = [] if cfg.record_trace else None
        self.duplicates: list[dict] = []
        self.end = cfg.genesis_time + cfg.duration

    def _push(self, t: float, kind: int, node: _Node, payload: Any = None, tiebreak: int = 0) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (t, kind, node.key, tiebreak, self.seq, node.index, payload))

    def _schedule_scan(self, node: _Node, t: int) -> None:
        if t < self.end:
            self._push(t, _SCAN, node, node.state.version)

    def _modifiers(self, node: _Node, utxos: list[Utxo], t_from: int, t_to: int):
        """Modifier(s) valid over [t_from, t_to'); returns (modifier, usable utxos, t_to')."""
        p = self.params
        tip = node.state.tip.block
        if p.modifier_mode is ModifierMode.DYNAMIC:
            start = interval_start_for(t_from, p)
            t_to = min(t_to, start + p.modifier_interval)
            return self.oracle.modifier_at(tip, start, t_from), utxos, t_to
        mods = {}
        usable = []
        for u in utxos:
            s = static_interval_for(u.block_time_from, p)
            if s <= t_from:
                mods[u.id] = self.oracle.modifier_at(tip, s, t_from)
                usable.append(u)
            else:
                t_to = min(t_to, s)
        return mods, usable, t_to

    def _scan(self, node: _Node, t_from: int) -> None:
        state = node.state
        t_to = min(t_from + self.chunk, self.end)
        utxos = [u for u in state.owned_utxos(node.key)
                 if u.tx_time + self.params.min_stake_age < t_to]
        if not utxos:
            pending = [u.tx_time + self.params.min_stake_age for u in state.owned_utxos(node.key)]
            if pending:
                self._schedule_scan(node, max(t_to, min(pending)))
            return
        modifier, usable, t_to = self._modifiers(node, utxos, t_from, t_to)
        found = self.scanner.scan(usable, modifier, state.tip.next_target, t_from, t_to,
                                  key=node.index)
        if found is None:
            self._schedule_scan(node, t_to)
            return
        t, hits = found
        self._push(t, _MINED, node, (state.version, hits))

    def _make_block(self, node: _Node, t: int, hits, nonce: int = 0) -> Block:
        utxo, k = min(hits, key=lambda h: (kernel_hash(h[1]), h[0].id))
        tip = node.state.tip.block
        reward = reward_for(utxo, t, self.cfg.genesis_time, self.params)
        return Block(height=tip.height + 1, timestamp=t, prev=tip.hash, kernel=k,
                     hash_proof=kernel_hash(k), miner=node.key, staked=utxo.id, reward=reward,
                     nonce=nonce)

    def _broadcast(self, sender: _Node, block: Block, t: int) -> None:
        for other in self.nodes:
            if other is sender:
                continue
            u = keyed_uniform(self.cfg.seed, block.hash, other.key)
            self._push(t + self.cfg.latency.quantile(u), _ARRIVAL, other, block,
                       tiebreak=block.hash >> 192)

    def _mined(self, node: _Node, t: int, payload) -> None:
        version, hits = payload
        if version != node.state.version:
            return
        blocks = [self._make_block(node, t, hits)]
        if node.spec.behavior == DUAL_FORK:
            blocks.append(self._make_block(node, t, hits, nonce=1))
        for b in blocks:
            node.produced.append(b)
            self.store.setdefault(b.hash, b)
        node.state.receive(blocks[0], now=t)
        for b in blocks:
            self._broadcast(node, b, t)
        if self.trace is not None:
            for b in blocks:
                self.trace.append((t, "mined", node.spec.name, hash_to_hex(b.hash)))
        self._schedule_scan(node, t + 1)

    def _arrival(self, node: _Node, t: float, block: Block) -> None:
        v0 = node.state.version
        receipt = node.state.receive(block, now=t)
        if receipt.reason is not None and receipt.reason is RejectReason.DUPLICATE_STAKE:
            self.duplicates.append({"node": node.spec.name, "time": t,
                                    "block": hash_to_hex(block.hash),
                                    "punished": receipt.punished is not None})
        if self.trace is not None:
            self.trace.append((t, "arrival", node.spec.name, hash_to_hex(block.hash),
                               receipt.status.value))
        if node.state.version != v0:
            self._schedule_scan(node, math.floor(t) + 1)

    def run(self) -> SimResult:
        start = self.cfg.genesis_time + 1
        for node in self.nodes:
            self._schedule_scan(node, start)
        while self.queue:
            t, kind, _, _, _, idx, payload = heapq.heappop(self.queue)
            if t >= self.end:
                break
            node = self.nodes[idx]
            if kind == _MINED:
                self._mined(node, t, payload)
            elif kind == _SCAN:
                if payload == node.state.version:
                    self._scan(node, t)
            else:
                self._arrival(node, t, payload)
        return self._result()

    def observer(self) -> _Node:
        for n in self.nodes:
            if n.spec.behavior == HONEST:
                return n
        return self.nodes[0]

    def _result(self) -> SimResult:
        cfg = self.cfg
        lo, hi = cfg.measure_from, cfg.measure_to
        obs = self.observer()
        chain = obs.state.best_chain()
        key_to_index = {n.key: n.index for n in self.nodes}
        names = [n.spec.name for n in self.nodes]
        produced = [sum(1 for b in n.produced if lo <= b.timestamp < hi) for n in self.nodes]
        main = [0] * len(self.nodes)
        rewards = [0] * len(self.nodes)
        for b in chain[1:]:
            i = key_to_index[b.miner]
            rewards[i] += b.reward
            if lo <= b.timestamp < hi:
                main[i] += 1
        main_len = sum(main)
        total = sum(produced)
        orphans = total - main_len
        reorgs: dict[int, int] = {}
        for n in self.nodes:
            if n.spec.behavior != HONEST:
                continue
            for d, c in n.state.reorgs.items():
                reorgs[d] = reorgs.get(d, 0) + c
        dishonest_keys = {n.key for n in self.nodes if n.spec.behavior != HONEST}
        banned, dishonest_counts = [], []
        for n in self.nodes:
            banned.append(sorted(names[key_to_index[k]] for k in n.state.banned))
            dishonest_counts.append(sum(1 for b in n.state.best_chain()
                                        if b.miner in dishonest_keys))
        per_node_hashes = [self.counter.by_key.get(n.index, 0) for n in self.nodes]
        return SimResult(
            node_names=names,
            blocks_per_node=produced,
            main_chain_per_node=main,
            main_chain_length=main_len,
            orphan_count=orphans,
            total_blocks=total,
            fork_rate=orphans / total if total else 0.0,
            reorg_depths=reorgs,
            rewards_per_node=rewards,
            hashes=self.counter.value,
            hashes_per_node=per_node_hashes,
            final_height=obs.state.height,
            measure_window=(lo, hi),
            banned_by_node=banned,
            dishonest_on_chain=dishonest_counts,
            duplicate_events=self.duplicates,
            trace=self.trace,
        )


def run_sim(cfg: SimConfig) -> SimResult:
    return Simulation(cfg).run()


def scale_params(params: ChainParams, tau: int) -> ChainParams:
    """Change the block time, keeping stake age and intervals fixed in blocks where possible."""
    f = tau / params.block_time_target
    sel = max(params.modifier_bits, round(params.selection_interval * f))
    mi = min(sel, max(1, round(params.modifier_interval * f)))
    msa = max(sel + 1, round(params.min_stake_age * f))
    return params.replace(block_time_target=tau, selection_interval=sel, modifier_interval=mi,
                          min_stake_age=msa)


def fork_rate_curve(cfg: SimConfig, block_times: Sequence[int], measured_blocks: int,
                    jobs: int = 1, scale: bool = True) -> list[tuple[int, float, SimResult]]:
    """Fork rate for each block time.

    With ``scale`` the stake age and modifier intervals keep their length in
    blocks; otherwise only the block time changes.
    """
    cfgs = []
    for tau in block_times:
        params = scale_params(cfg.params, int(tau)) if scale else \
            cfg.params.replace(block_time_target=int(tau))
        duration = (params.selection_interval
                    + (cfg.warmup_blocks + measured_blocks + cfg.tail_blocks) * int(tau))
        cfgs.append(SimConfig(params, cfg.nodes, duration, cfg.seed, cfg.latency,
                              cfg.warmup_blocks, cfg.tail_blocks, cfg.genesis_time, None,
                              cfg.record_trace))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(run_sim, cfgs))
    else:
        results = [run_sim(c) for c in cfgs]
    return [(int(tau), r.fork_rate, r) for tau, r in zip(block_times, results)]
