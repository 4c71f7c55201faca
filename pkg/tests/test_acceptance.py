"""Acceptance criteria, one test each, at their stated tolerances.

Each test records its criterion number and the measured values; the
summary hook in conftest prints one PASS/FAIL line per criterion.
"""
import math
import statistics
import time
from fractions import Fraction

import pytest

from stakesim import analytics as an
from stakesim.analytics import RaceParams
from stakesim.attacks import (AttackSpec, run_double_spend, run_history_revision,
                              run_preprogrammed, run_toy_grinding)
from stakesim.core import (COIN, NEUCOIN, PEERCOIN, DuplicatePolicy, ModifierMode)
from stakesim.ledger import RejectReason, coinstake_reward, reward_rate
from stakesim.netsim import (CALIBRATED_LATENCY, ZERO_LATENCY, NodeSpec, SimConfig, Simulation,
                             fork_rate_curve, run_sim)

from test_analytics import PRINTED_TABLE

# short fixed-second intervals keep every output mature most of the time
NET = NEUCOIN.replace(block_time_target=60, modifier_interval=60, selection_interval=120,
                      min_stake_age=121)


@pytest.fixture
def crit(record_property):
    def start(n: int):
        record_property("criterion", n)
        return lambda text: record_property("detail", text)
    return start


def test_criterion_01_table(crit):
    detail = crit(1)
    t0 = time.perf_counter()
    rows = an.table1()
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for row in rows:
        for n, printed in zip(an.TABLE1_N, PRINTED_TABLE[row["p"]]):
            got = row[n].to_linear()
            worst = max(worst, abs(got / printed - 1))
    cell = an.double_spend_probability(0.1, 60).to_linear()
    detail(f"28 cells, worst rel. error {worst:.3%}, 10%/60 = {cell:.3g}, {elapsed:.3f}s")
    assert worst <= 0.05
    assert cell == pytest.approx(4.4e-35, rel=0.05)
    assert elapsed < 1.0


def test_criterion_02_double_spend_monte_carlo(crit):
    detail = crit(2)
    cases = [(0.10, 1, 10**5), (0.05, 1, 10**5), (0.20, 10, 10**6)]
    parts, ok = [], True
    for p, n, trials in cases:
        o = run_double_spend(AttackSpec("double_spend", p, n_conf=n, trials=trials, seed=7))
        want = an.double_spend_probability(p, n).to_linear()
        inside = o.within_ci(want)
        ok &= inside
        parts.append(f"({p},{n}) {o.probability:.4g} vs {want:.4g} "
                     f"[{o.ci_low:.4g},{o.ci_high:.4g}]")
    detail("; ".join(parts))
    assert ok


def test_criterion_03_grinding_trial_anchor(crit):
    detail = crit(3)
    rp = RaceParams(p=0.2, tau=60, t_modifier=200 * 60)
    strict = an.grinding_trial_probability(rp, strict=True).log10_value
    geq = an.grinding_trial_probability(rp, strict=False).log10_value
    detail(f"log10 strict {strict:.2f}, at-expectation {geq:.2f}")
    assert abs(strict + 46) <= 1 and abs(geq + 46) <= 1


def test_criterion_04_grinding_thresholds(crit):
    detail = crit(4)
    cases = [(200, 1, (0.29, 0.32)), (400, 1, (0.34, 0.38)), (800, 1, (0.38, 0.42)),
             (200, 100, (0.27, 0.31))]
    parts, ok = [], True
    for tmod, scale, (lo, hi) in cases:
        r = an.grinding_threshold(scale * an.BITCOIN_HASH_RATE, tmod * 60.0)
        ok &= r.p_star is not None and lo <= r.p_star <= hi
        parts.append(f"T={tmod} x{scale}: {r.p_star:.4f}")
    detail("; ".join(parts))
    assert ok


def test_criterion_05_grinding_grand_anchor(crit):
    detail = crit(5)
    rp = RaceParams(p=0.10)
    # the closed form as printed takes the tail from the honest expectation
    printed_form = an.grinding_success_probability(rp, strict=False).log10_value
    strict = an.grinding_success_probability(rp, strict=True).log10_value
    detail(f"log10 {printed_form:.2f} (strictly-more reading {strict:.2f})")
    assert abs(printed_form + 87) <= 2


def test_criterion_06_history_revision_bounds(crit):
    detail = crit(6)
    a = an.catchup_upper_bound(RaceParams(p=0.75, n=240, alpha=1.0))
    b = an.catchup_upper_bound(RaceParams(p=0.10, n=60, alpha=1.0))
    detail(f"(0.75, 240) log10 {a.value.log10_value:.2f}; (0.10, 60) log10 "
           f"{b.value.log10_value:.2f}")
    assert not a.diverged and not b.diverged
    assert a.value.log10_value <= -50
    assert b.value.log10_value <= -90


@pytest.mark.xfail(strict=True, reason="from a one-block deficit a random walk biased against the "
                   "attacker still gets strictly ahead with probability near (p/q)^2 = 0.67 at "
                   "p = 0.45, far above 5%")
def test_criterion_07_ownership_threshold(crit):
    detail = crit(7)
    probs = {}
    for p in (0.45, 0.50, 0.55):
        o = run_history_revision(AttackSpec("history_revision", p, lag_blocks=1, owns_coins=True,
                                            trials=2000, give_up_blocks=10**4, seed=7))
        probs[p] = o.probability
    ruin = (0.45 / 0.55) ** 2
    detail(", ".join(f"p={p}: {v:.3f}" for p, v in probs.items())
           + f"; random-walk estimate {ruin:.3f} at p=0.45")
    assert probs[0.55] > 0.5
    assert probs[0.45] < 0.05


def _dual_fork_run(policy: DuplicatePolicy):
    params = NET.replace(duplicate_policy=policy)
    nodes = [NodeSpec("cheat", 10**9, behavior="dual_fork")] + \
        [NodeSpec(f"h{i}", 10**9) for i in range(9)]
    cfg = SimConfig(params, nodes, params.selection_interval + 420 * 60, seed=21,
                    latency=CALIBRATED_LATENCY, warmup_blocks=20, record_trace=True)
    sim = Simulation(cfg)
    result = sim.run()
    return sim, result


def test_criterion_08_punitive_mechanism(crit):
    detail = crit(8)
    sim, res = _dual_fork_run(DuplicatePolicy.PUNITIVE)
    cheat = sim.nodes[0]
    honest = sim.nodes[1:]
    on_chain = [sum(1 for b in n.state.best_chain() if b.miner == cheat.key) for n in honest]
    detected = [cheat.key in n.state.banned for n in honest]

    sim2, lax = _dual_fork_run(DuplicatePolicy.DETECT_ONLY)
    pairs = list(zip(sim2.nodes[0].produced[0::2], sim2.nodes[0].produced[1::2]))
    arrivals: dict[tuple[str, int], tuple[int, str]] = {}
    for event in sim2.trace:
        if event[1] == "arrival":
            arrivals.setdefault((event[2], int(event[3], 16)), (len(arrivals), event[4]))
    order_ok, checked, both_kept = True, 0, 0
    for n in sim2.nodes[1:]:
        name = n.spec.name
        for a, b in pairs:
            both_kept += a.hash in n.state.entries and b.hash in n.state.entries
            ra, rb = (arrivals.get((name, x.hash)) for x in (a, b))
            # later pairs sit on a parent the node already dropped; they never connect
            if ra is None or rb is None or "ORPHANED" in (ra[1], rb[1]):
                continue
            first, second = (a, b) if ra < rb else (b, a)
            order_ok &= (n.state.rejected.get(second.hash) is RejectReason.DUPLICATE_STAKE
                         and first.hash in n.state.entries)
            checked += 1
    detail(f"punitive: cheater blocks on honest chains {on_chain}, detected by "
           f"{sum(detected)}/9; detect-only: {checked} connectable twin arrivals, later copy "
           f"dropped in all: {order_ok}, both copies kept: {both_kept}, no bans")
    assert res.duplicate_events and all(detected)
    assert all(c == 0 for c in on_chain)
    assert checked > 0 and order_ok and both_kept == 0
    assert lax.duplicate_events
    assert all(not n.state.banned for n in sim2.nodes)


def test_criterion_09_preprogrammed_differential(crit):
    detail = crit(9)
    static = run_preprogrammed(AttackSpec("preprogrammed", 0.1, n_conf=1, trials=3,
                                          window_blocks=1, n_stakes=100, seed=3), PEERCOIN)
    dyn_params = PEERCOIN.replace(modifier_mode=ModifierMode.DYNAMIC)
    ratios = []
    for seed in range(20):
        o = run_preprogrammed(AttackSpec("preprogrammed", 0.1, n_conf=1, trials=1,
                                         window_blocks=1, n_stakes=100, seed=seed), dyn_params)
        ratios.append(o.extras["runs"][0]["enrichment"])
    mean = statistics.fmean(ratios)
    se = statistics.stdev(ratios) / math.sqrt(len(ratios))
    detail(f"static enrichment {static.extras['enrichment_mean']:.1f}x; dynamic mean ratio "
           f"{mean:.2f} +- {se:.2f} over 20 seeds ({abs(mean - 1) / se:.2f} sigma)")
    assert static.extras["enrichment_mean"] >= 5
    assert abs(mean - 1) <= 3 * se


def test_criterion_10_reward_schedule(crit):
    detail = crit(10)
    rates = [reward_rate(Fraction(y), NEUCOIN) for y in (0, 5, 10, 20)]
    flat = [reward_rate(Fraction(y), PEERCOIN) for y in (0, 5, 30)]
    detail(f"neucoin {[float(r) for r in rates]}, peercoin {[float(r) for r in flat]}")
    assert rates == [1, Fraction(53, 100), Fraction(6, 100), Fraction(6, 100)]
    assert flat == [Fraction(1, 100)] * 3
    assert coinstake_reward(1000 * COIN, 365, 0, NEUCOIN) == 1000 * COIN


def test_criterion_11_proportional_mining(crit):
    detail = crit(11)
    params = NEUCOIN.replace(block_time_target=16, modifier_interval=16, selection_interval=64,
                             min_stake_age=96)
    # equal-sized outputs: the 10% holder owns one, the rest of the network nine
    nodes = [NodeSpec("small", 10**9), NodeSpec("big", 9 * 10**9, 9)]
    cfg = SimConfig(params, nodes, 64 + (100 + 50_000 + 6) * 16, seed=11,
                    latency=ZERO_LATENCY, warmup_blocks=100)
    r = run_sim(cfg)
    share = r.blocks_per_node[0] / r.total_blocks
    chain_share = r.main_chain_per_node[0] / r.main_chain_length
    detail(f"{r.total_blocks} blocks, 10% holder produced {share:.4f}, "
           f"main-chain share {chain_share:.4f}")
    assert r.total_blocks >= 45_000
    assert abs(share - 0.10) <= 0.01


def test_criterion_12_fork_rate(crit):
    detail = crit(12)
    nodes = [NodeSpec(f"n{i}", 10**9) for i in range(10)]
    cfg = SimConfig(NET, nodes, NET.selection_interval + 2106 * 60, seed=1,
                    latency=CALIBRATED_LATENCY, warmup_blocks=100)
    (_, fast, rf), (_, slow, rs) = fork_rate_curve(cfg, [60, 600], 2000, scale=False)
    detail(f"fork rate {fast:.2%} at 60s ({rf.total_blocks} blocks), {slow:.2%} at 600s "
           f"({rs.total_blocks} blocks)")
    assert fast > slow
    assert 0.01 <= slow <= 0.03


def test_criterion_13_toy_grinding(crit):
    detail = crit(13)
    o = run_toy_grinding(AttackSpec("toy_grinding", 0.45, modifier_bits=16, trials=10_000,
                                    seed=13))
    z = o.extras["z_score"]
    detail(f"successful modifier share {o.extras['successful_modifier_fraction']:.6g} vs "
           f"{o.extras['trial_probability']:.6g} (z = {z:.2f}) over 10^4 intervals")
    assert abs(z) < 3
