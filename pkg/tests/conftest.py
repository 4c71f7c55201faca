from __future__ import annotations

from dataclasses import dataclass, field

import pytest

from stakesim.core import COIN, NEUCOIN, ChainParams, OutPoint, Utxo, name_key, sha256_int
from stakesim.kernel import check_stake, genesis_target, kernel_for, kernel_hash
from stakesim.ledger import COINSTAKE_OFFSET, Block, ChainState, make_genesis, reward_for

# short intervals so a few hundred simulated seconds exercise every code path
TINY = NEUCOIN.replace(block_time_target=16, modifier_interval=16, selection_interval=64,
                       min_stake_age=96)


@dataclass
class World:
    params: ChainParams
    names: tuple[str, ...] = ("alice", "bob", "carol")
    amount: int = 1000 * COIN
    age: int | None = None
    genesis: Block = field(init=False)
    utxos: list[Utxo] = field(init=False)
    target: int = field(init=False)

    def __post_init__(self) -> None:
        self.genesis = make_genesis(0)
        age = self.params.min_stake_age + 1 if self.age is None else self.age
        self.utxos = [Utxo(OutPoint(sha256_int(f"g:{n}".encode()), 0), self.amount, -age - i,
                           -age - i, COINSTAKE_OFFSET, name_key(n))
                      for i, n in enumerate(self.names)]
        self.target = genesis_target(sum(u.amount for u in self.utxos), self.params)

    def key(self, name: str) -> int:
        return name_key(name)

    def state(self) -> ChainState:
        return ChainState(self.params, self.genesis, self.utxos, self.target)

    def mine(self, state: ChainState, parent: int | None, name: str, after: int = 0,
             nonce: int = 0, spends=(), limit: int = 200_000) -> Block:
        """First valid block ``name`` can stake on ``parent`` at a time > after."""
        params = self.params
        entry = state.entries[state.tip.block.hash if parent is None else parent]
        owner = self.key(name)
        view = state.view_at(entry)
        mine = sorted((u for u in view.values() if u.owner == owner), key=lambda u: u.id)
        t = max(entry.block.timestamp + 1, after + 1)
        for t in range(t, t + limit):
            for u in mine:
                if t - u.tx_time < params.min_stake_age:
                    continue
                m = state.oracle.stake_modifier(u, t, entry.block)
                k = kernel_for(u, m, t)
                if check_stake(k, entry.next_target, u, params):
                    return Block(height=entry.height + 1, timestamp=t, prev=entry.block.hash,
                                 kernel=k, hash_proof=kernel_hash(k), miner=owner, staked=u.id,
                                 reward=reward_for(u, t, self.genesis.timestamp, params),
                                 spends=tuple(spends), nonce=nonce)
        raise AssertionError(f"{name} found no block")


@pytest.fixture
def world() -> World:
    return World(TINY)


# one PASS/FAIL line per acceptance criterion, printed after the run
_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report) -> None:
    props = dict(report.user_properties)
    if "criterion" not in props or report.when != "call" and not report.failed:
        return
    if report.passed:
        status = "PASS"
    elif hasattr(report, "wasxfail"):
        status = "FAIL (expected)"
    else:
        status = "FAIL"
    _CRITERIA[props["criterion"]] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter) -> None:
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status:<15} {detail}")
