"""Monte Carlo attack scenarios.

Double spend, history revision and grinding are simulated as block-arrival
races (the attacker's blocks form a Poisson process; the honest chain
follows the same model as the matching closed form in
:mod:`stakesim.analytics`). Preprogrammed attacks work on real kernels and
modifiers computed from a synthetic honest chain.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.stats import binomtest

from .analytics import (RaceParams, catchup_upper_bound, double_spend_probability,
                        grinding_exponent, grinding_success_probability,
                        grinding_trial_probability, poisson_sf)
from .core import (NEUCOIN, ChainParams, ModifierMode, OutPoint, ParamsError, Rng, TailProb,
                   Utxo, complement_power)
from .kernel import KernelScanner, genesis_target, stake_threshold
from .ledger import COINSTAKE_OFFSET, TRANSFER_STRIDE
from .modifier import BlockRef, ModifierOracle, interval_start_for, static_interval_for

KINDS = ("double_spend", "history_revision", "grinding", "preprogrammed", "toy_grinding")

_STREAM_DOUBLE_SPEND = 1
_STREAM_RACE = 2  # shared by history revision and grinding so one reduces to the other
_STREAM_BITS = 3
_STREAM_PREPROGRAMMED = 4
_STREAM_TOY = 5


class InfeasibleSplit(ValueError):
    """The split cannot cover the requested number of confirmations."""


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    p: float
    n_conf: int = 0
    lag_blocks: int = 0
    owns_coins: bool = True
    n_stakes: int | None = None
    hash_budget: float = 0.0  # hashes per second
    attack_window: tuple[int, int] | None = None
    trials: int = 10_000
    give_up_blocks: int | None = None
    modifier_bits: int = 64
    seed: int = 0
    strict_threshold: bool = True
    cycles: int = 8
    window_blocks: int = 20
    toy_interval_blocks: int = 20

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ParamsError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ParamsError("p must lie in [0, 1]")
        if self.n_conf < 0 or self.lag_blocks < 0 or self.trials <= 0:
            raise ParamsError("n_conf and lag_blocks must be >= 0, trials > 0")
        if self.n_stakes is not None and self.n_stakes <= 0:
            raise ParamsError("n_stakes must be positive")
        if self.hash_budget < 0:
            raise ParamsError("hash_budget must be non-negative")
        if not 1 <= self.modifier_bits <= 64:
            raise ParamsError("modifier_bits must lie in [1, 64]")
        if self.give_up_blocks is not None and self.give_up_blocks <= 0:
            raise ParamsError("give_up_blocks must be positive")
        if self.attack_window is not None:
            a, b = self.attack_window
            object.__setattr__(self, "attack_window", (int(a), int(b)))
            if b <= a:
                raise ParamsError("attack window must have positive length")

    @property
    def give_up(self) -> int:
        if self.give_up_blocks is not None:
            return self.give_up_blocks
        return 10 * max(1, self.n_conf, self.lag_blocks)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if self.attack_window is not None:
            d["attack_window"] = list(self.attack_window)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AttackSpec:
        d = dict(data)
        if d.get("attack_window") is not None:
            d["attack_window"] = tuple(d["attack_window"])
        return cls(**d)


@dataclass
class AttackOutcome:
    kind: str
    p: float
    successes: int
    trials: int
    probability: float
    ci_low: float
    ci_high: float
    max_lead: float
    analytic: TailProb | None = None
    analytic_label: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    def within_ci(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["analytic"] = self.analytic.to_json() if self.analytic is not None else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, TailProb):
        return x.to_json()
    raise TypeError(type(x))


def binomial_ci(successes: int, trials: int, level: float = 0.99) -> tuple[float, float]:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level,
                                                              method="exact")
    return float(ci.low), float(ci.high)


def _outcome(spec: AttackSpec, successes: int, max_lead: float, analytic: TailProb | None,
             label: str, extras: dict | None = None, trials: int | None = None) -> AttackOutcome:
    n = spec.trials if trials is None else trials
    lo, hi = binomial_ci(successes, n)
    return AttackOutcome(spec.kind, spec.p, int(successes), n, successes / n, lo, hi,
                         float(max_lead), analytic, label, extras or {})


def _params(cfg) -> ChainParams:
    if cfg is None:
        return NEUCOIN
    return getattr(cfg, "params", cfg)


def _seed(spec: AttackSpec, cfg) -> int:
    return int(getattr(cfg, "seed", spec.seed)) if cfg is not None else spec.seed


# -- splitting --------------------------------------------------------------

def plan_split(total: int, n_conf: int, factor: int) -> list[int]:
    """Split ``total`` into ``factor`` near-equal outputs."""
    if factor < n_conf + 1:
        raise InfeasibleSplit(f"{factor} outputs cannot stake {n_conf + 1} blocks")
    if factor > total:
        raise InfeasibleSplit("more outputs than base units")
    base, extra = divmod(total, factor)
    return [base + (1 if i < extra else 0) for i in range(factor)]


def residual_fraction(factor: int, mined: int) -> float:
    """Share of the split stake still unspent after ``mined`` blocks."""
    if mined > factor:
        raise InfeasibleSplit("mined more blocks than outputs")
    return (factor - mined) / factor


# -- double spend -------------------------------------------------------------

def run_double_spend(spec: AttackSpec, cfg=None) -> AttackOutcome:
    """Race after the merchant sees n confirmations.

    The honest chain takes exactly n * tau / q to confirm; the attacker's
    blocks meanwhile arrive as a Poisson process (slowed by stake depletion
    when ``n_stakes`` is set). The race then continues block by block until
    the attacker's deficit reaches zero or ``give_up`` blocks pass.
    """
    params = _params(cfg)
    rng = Rng(_seed(spec, cfg), _STREAM_DOUBLE_SPEND)
    p, n, N = spec.p, spec.n_conf, spec.trials
    q = 1.0 - p
    tau = params.block_time_target
    k = np.zeros(N, dtype=np.int64)
    if p > 0 and n > 0:
        horizon = n * tau / q if q > 0 else math.inf
        t = np.zeros(N)
        active = np.ones(N, dtype=bool)
        while active.any():
            idx = np.flatnonzero(active)
            rate = p / tau * _depletion(k[idx], spec.n_stakes)
            ok = rate > 0
            dt = np.full(idx.size, np.inf)
            dt[ok] = rng.exponential(1.0, ok.sum()) / rate[ok]
            t[idx] += dt
            hit = t[idx] <= horizon
            k[idx[hit]] += 1
            active[idx[~hit]] = False
    deficit = n - k
    success = deficit <= 0
    max_lead = float((k - n).max()) if N else 0.0
    alive = ~success
    steps = 0
    while alive.any() and steps < spec.give_up:
        idx = np.flatnonzero(alive)
        pa = p * _depletion(k[idx], spec.n_stakes)
        denom = pa + q
        prob = np.divide(pa, denom, out=np.zeros_like(pa), where=denom > 0)
        att = rng.random(idx.size) < prob
        k[idx[att]] += 1
        deficit[idx[att]] -= 1
        deficit[idx[~att]] += 1
        won = deficit[idx] <= 0
        success[idx[won]] = True
        alive[idx[won]] = False
        max_lead = max(max_lead, float(-deficit[idx].min()))
        steps += 1
    analytic = double_spend_probability(p, n) if spec.n_stakes is None else None
    return _outcome(spec, int(success.sum()), max_lead, analytic, "double_spend_probability",
                    {"give_up_steps": spec.give_up})


def _depletion(k: np.ndarray, n_stakes: int | None) -> np.ndarray:
    if n_stakes is None:
        return np.ones(k.shape)
    return np.clip((n_stakes - k) / n_stakes, 0.0, 1.0)


# -- shared catch-up race -------------------------------------------------------

def _max_poisson_table(lam: float, K: float) -> np.ndarray:
    """K * ln F(x) for x = 0..xmax, F the Poisson(lam) cdf (ascending, ends at ~0)."""
    xmax = int(lam + 20 * math.sqrt(lam + 1) + 60)
    vals = np.empty(xmax + 1)
    for x in range(xmax + 1):
        sf = poisson_sf(x + 1, lam)
        ln_f = -sf.to_linear() if sf.log10_value < -300 else sf.complement().ln
        vals[x] = K * ln_f if ln_f != 0 else 0.0
    return vals


def _catchup_race(rng: Rng, n_trials: int, p: float, alpha: float, lag: int, tau: float,
                  interval: float, give_up_blocks: int, k_schedule, threshold: int | None):
    """Attacker vs a deterministic honest chain growing alpha / tau per second.

    In each modifier interval the attacker's block count is the best of K
    independent Poisson(p * interval / tau) candidates; arrival times within
    the interval are uniform order statistics. Success when the attacker's
    count reaches alpha * t / tau + lag.
    """
    lam = p * interval / tau
    horizon = give_up_blocks * tau / alpha if alpha > 0 else math.inf
    n_intervals = max(1, math.ceil(horizon / interval)) if math.isfinite(horizon) else 1
    count = np.zeros(n_trials, dtype=np.int64)
    success = np.zeros(n_trials, dtype=bool)
    max_lead = -math.inf
    hits = 0
    tables: dict[float, np.ndarray] = {}
    for j in range(n_intervals):
        K = k_schedule(j)
        if K not in tables:
            tables[K] = _max_poisson_table(lam, K)
        table = tables[K]
        v = rng.random(n_trials)
        x = np.searchsorted(table, np.log(v), side="left").astype(np.int64)
        x = np.minimum(x, table.size - 1)
        if threshold is not None:
            hits += int((x >= threshold).sum())
        width = int(x.max()) if n_trials else 0
        if width:
            u = rng.random((n_trials, width))
            u[np.arange(width)[None, :] >= x[:, None]] = np.inf
            u.sort(axis=1)
            t = (j + u) * interval
            att = count[:, None] + np.arange(1, width + 1)[None, :]
            lead = att - (alpha * t / tau + lag)
            lead[~np.isfinite(t) | (t > horizon)] = -np.inf
            best = lead.max(axis=1)
            max_lead = max(max_lead, float(best.max()))
            success |= best >= 0
        count += x
    return success, max_lead, hits, n_intervals


def _race_alpha(spec: AttackSpec) -> float:
    return (1.0 - spec.p) if spec.owns_coins else 1.0


def run_history_revision(spec: AttackSpec, cfg=None) -> AttackOutcome:
    """Rewrite the chain from ``lag_blocks`` back; grinding with no hash budget."""
    params = _params(cfg)
    rng = Rng(_seed(spec, cfg), _STREAM_RACE)
    alpha = _race_alpha(spec)
    success, max_lead, _, _ = _catchup_race(
        rng, spec.trials, spec.p, alpha, spec.lag_blocks, params.block_time_target,
        params.modifier_interval, spec.give_up, lambda j: 1.0, None)
    rp = RaceParams(p=spec.p, n=spec.lag_blocks, alpha=alpha, tau=params.block_time_target)
    bound = catchup_upper_bound(rp)
    return _outcome(spec, int(success.sum()), max_lead, bound.value, "catchup_upper_bound",
                    {"alpha": alpha, "bound_diverged": bound.diverged})


def run_grinding(spec: AttackSpec, cfg=None) -> AttackOutcome:
    """History revision where each interval's modifier is ground over K candidates.

    For the first ceil(selection / modifier interval) intervals the attacker
    controls too few modifier bits to choose among candidates, so K = 1.
    """
    params = _params(cfg)
    if params.modifier_mode is ModifierMode.STATIC:
        raise ParamsError("grinding needs a modifier that is reseeded every interval (DYNAMIC)")
    rng = Rng(_seed(spec, cfg), _STREAM_RACE)
    alpha = _race_alpha(spec)
    tau, interval = params.block_time_target, params.modifier_interval
    n_stakes = spec.n_stakes if spec.n_stakes is not None else 1_000_000
    rp = RaceParams(p=spec.p, n=spec.lag_blocks, alpha=alpha, tau=tau, t_modifier=interval,
                    hash_rate=spec.hash_budget, n_stakes=n_stakes,
                    modifier_bits=spec.modifier_bits)
    K = grinding_exponent(rp) if spec.hash_budget > 0 else 1.0
    step_one = math.ceil(params.selection_interval / interval)
    threshold = _threshold(spec.p, interval, tau, spec.strict_threshold)
    success, max_lead, hits, n_int = _catchup_race(
        rng, spec.trials, spec.p, alpha, spec.lag_blocks, tau, interval, spec.give_up,
        lambda j: 1.0 if j < step_one else K, threshold)
    trial = grinding_trial_probability(rp, spec.strict_threshold)
    extras = {
        "alpha": alpha,
        "k_candidates": K,
        "step_one_intervals": step_one,
        "interval_threshold": threshold,
        "interval_hit_rate": hits / (spec.trials * n_int),
        "trial_probability_log10": trial.log10_value,
        "interval_success_log10": complement_power(trial, K).log10_value,
    }
    analytic = grinding_success_probability(rp, spec.strict_threshold) if K > 1 else None
    return _outcome(spec, int(success.sum()), max_lead, analytic,
                    "grinding_success_probability", extras)


def _threshold(p: float, interval: float, tau: float, strict: bool) -> int:
    expected = (1.0 - p) * interval / tau
    return math.floor(expected + 1e-9) + 1 if strict else math.ceil(expected - 1e-9)


def synthetic_chain(rng: Rng, t_start: int, t_end: int, tau: float,
                    attacker_from: int | None = None, attacker_share: float = 0.0
                    ) -> list[BlockRef]:
    """Linear chain with Poisson block times and random proof hashes.

    From ``attacker_from`` on, blocks arrive at rate attacker_share / tau,
    as on a branch only the attacker extends.
    """
    blocks = [BlockRef(rng.hash256(), 0, 0, t_start, rng.hash256())]
    t = float(t_start)
    while True:
        rate = 1.0 / tau
        if attacker_from is not None and t >= attacker_from:
            rate = attacker_share / tau
        t += float(rng.exponential(1.0 / rate))
        ts = math.floor(t)
        if ts >= t_end:
            break
        if ts <= blocks[-1].timestamp:
            continue
        prev = blocks[-1]
        blocks.append(BlockRef(rng.hash256(), prev.hash, prev.height + 1, ts, rng.hash256()))
    return blocks


def measure_bit_control(p: float, params: ChainParams, seed: int, n_intervals: int,
                        chains: int = 4) -> list[float]:
    """Mean modifier bits sourced from attacker blocks, per interval after the fork.

    The honest chain runs for two selection intervals, then only the
    attacker (share p) extends the branch.
    """
    mi, sel, tau = params.modifier_interval, params.selection_interval, params.block_time_target
    totals = [0.0] * n_intervals
    for c in range(chains):
        rng = Rng(seed, _STREAM_BITS).child(c)
        fork = 2 * sel
        fork -= fork % mi
        end = fork + (n_intervals + 1) * mi
        chain = synthetic_chain(rng, 0, end, tau, attacker_from=fork, attacker_share=p)
        store = {b.hash: b for b in chain}
        attacker = {b.hash for b in chain if b.timestamp >= fork}
        oracle = ModifierOracle(params, store.get, 0)
        times = [b.timestamp for b in chain]
        for i in range(n_intervals):
            start = fork + (i + 1) * mi
            anchor = chain[bisect.bisect_left(times, start) - 1]
            sched = oracle.schedule_at(anchor, start, now=start)
            totals[i] += sum(1 for h in sched.source_blocks if h in attacker)
    return [x / chains for x in totals]


# -- preprogrammed ------------------------------------------------------------

_UNIT = 1000 * 1_000_000
_ATTACKER = -7


def _prepro_once(spec: AttackSpec, params: ChainParams, rng: Rng) -> dict[str, Any]:
    tau, mi, sel, msa = (params.block_time_target, params.modifier_interval,
                         params.selection_interval, params.min_stake_age)
    n_stakes = spec.n_stakes or 100
    cycle = -(-(sel + mi) // mi) * mi
    cycles = spec.cycles
    if spec.attack_window is not None:
        w_start, w_end = spec.attack_window
    else:
        w_start = (cycles - 1) * cycle + msa
        w_start = -(-w_start // mi) * mi
        w_end = w_start + spec.window_blocks * tau
    if w_start < (cycles - 1) * cycle + msa:
        raise ParamsError("attack window opens before the last recycled stakes mature")
    genesis = -2 * sel - mi
    chain = synthetic_chain(rng, genesis, w_end + mi, tau)
    store = {b.hash: b for b in chain}
    times = [b.timestamp for b in chain]
    oracle = ModifierOracle(params, store.get, genesis)

    def modifier_at(start: int) -> int:
        anchor = chain[bisect.bisect_left(times, start) - 1]
        return oracle.modifier_at(anchor, start, now=start)

    def confirm_time(t: int) -> int:
        return chain[bisect.bisect_left(times, t)].timestamp

    stake_total = n_stakes * _UNIT
    network = int(stake_total / spec.p) if spec.p > 0 else stake_total
    target = genesis_target(network, params)
    scanner = KernelScanner(params)
    static = params.modifier_mode is ModifierMode.STATIC

    def real_modifier(u: Utxo, t: int) -> int:
        if static:
            return modifier_at(static_interval_for(u.block_time_from, params))
        return modifier_at(interval_start_for(t, params))

    def passes(u: Utxo, modifier_fn) -> bool:
        # split the window at interval boundaries so each piece has one modifier
        t = w_start
        while t < w_end:
            piece_end = min(w_end, interval_start_for(t, params) + mi)
            if scanner.scan([u], modifier_fn(u, t), target, t, piece_end) is not None:
                return True
            t = piece_end
        return False

    def fresh_stake(t_make: int) -> Utxo:
        offset = COINSTAKE_OFFSET + TRANSFER_STRIDE * int(rng.integers(1, 50))
        return Utxo(OutPoint(rng.hash256(), int(rng.integers(0, 4))), _UNIT, t_make,
                    confirm_time(t_make), offset, _ATTACKER)

    retained: list[Utxo] = []
    final: list[Utxo] = []
    for c in range(cycles):
        fresh = [fresh_stake(c * cycle) for _ in range(n_stakes - len(retained))]
        kept = []
        for u in fresh:
            known_at = static_interval_for(u.block_time_from, params)
            if static:
                if known_at > w_start:
                    raise ParamsError("static modifier of the last stakes is unknown at the window")
                guess = modifier_at(known_at)
            else:
                # the window's modifier does not exist yet; the best guess is today's
                guess = modifier_at(interval_start_for(known_at, params))
            if passes(u, lambda _u, _t, g=guess: g):
                kept.append(u)
        retained.extend(kept)
        final = retained + [u for u in fresh if u not in kept]
    burst = sum(1 for u in final if passes(u, real_modifier))
    expected = 0.0
    for u in final:
        log_miss = 0.0
        for t in range(w_start, w_end):
            pi = stake_threshold(target, u, t, params) / 2.0 ** 256
            log_miss += math.log1p(-min(pi, 1.0 - 1e-16))
        expected += -math.expm1(log_miss)
    return {
        "burst": burst,
        "retained": len(retained),
        "baseline": expected,
        "share_baseline": spec.p * (w_end - w_start) / tau,
        "enrichment": burst / expected if expected > 0 else math.inf,
        "window": [w_start, w_end],
        "hashes": scanner.counter.value,
    }


def run_preprogrammed(spec: AttackSpec, cfg=None) -> AttackOutcome:
    """Recycle stakes until many are known to pass inside a future window.

    Each trial returns the burst of blocks the attacker can mine in the
    window, the expected burst with no foreknowledge, and their ratio.
    Static modifiers are fixed once a stake's selection interval has passed;
    dynamic modifiers for the window do not exist when the stakes are chosen.
    """
    params = _params(cfg)
    seed = _seed(spec, cfg)
    runs = [_prepro_once(spec, params, Rng(seed, _STREAM_PREPROGRAMMED).child(i))
            for i in range(spec.trials)]
    ratios = np.array([r["enrichment"] for r in runs])
    need = spec.n_conf + 1
    successes = sum(1 for r in runs if r["burst"] >= need)
    max_burst = max(r["burst"] for r in runs)
    mean_baseline = float(np.mean([r["baseline"] for r in runs]))
    extras = {
        "enrichment_mean": float(ratios.mean()),
        "enrichment_sd": float(ratios.std(ddof=1)) if len(runs) > 1 else 0.0,
        "burst_mean": float(np.mean([r["burst"] for r in runs])),
        "baseline_mean": mean_baseline,
        "modifier_mode": params.modifier_mode.value,
        "runs": runs,
    }
    return _outcome(spec, successes, max_burst, None, "", extras, trials=len(runs))


# -- toy grinding -----------------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def run_toy_grinding(spec: AttackSpec, cfg=None) -> AttackOutcome:
    """Exhaustive grinding over every modifier of a reduced width.

    Each interval gets a fresh seed. For each candidate modifier the
    attacker's block count is a Poisson draw keyed by (seed, modifier, stake),
    the same way a kernel hash keys a stake's luck to the modifier. Counts
    are compared with the honest chain's expected block count.
    """
    bits = spec.modifier_bits
    if bits > 24:
        raise ParamsError("toy grinding enumerates modifiers; use at most 24 bits")
    rng = Rng(_seed(spec, cfg), _STREAM_TOY)
    n_stakes = spec.n_stakes or 1
    blocks = spec.toy_interval_blocks
    lam = spec.p * blocks
    threshold = _threshold(spec.p, blocks, 1, spec.strict_threshold)
    per_stake = lam / n_stakes
    xmax = int(per_stake + 20 * math.sqrt(per_stake + 1) + 40)
    cdf = np.array([1.0 - poisson_sf(x + 1, per_stake).to_linear() for x in range(xmax + 1)])
    mods = np.arange(1 << bits, dtype=np.uint64)
    scale = 1.0 / float(1 << 53)
    successful_mods = 0
    intervals_won = 0
    best_counts = []
    with np.errstate(over="ignore"):
        for _ in range(spec.trials):
            seed = np.uint64(rng.bits64())
            counts = np.zeros(mods.size, dtype=np.int64)
            for s in range(n_stakes):
                z = _mix64(seed ^ (mods * _GOLD) ^ np.uint64((s + 1) * 0x632BE59BD9B4E019
                                                              % (1 << 64)))
                u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * scale
                counts += np.searchsorted(cdf, u, side="left")
            ok = counts >= threshold
            n_ok = int(ok.sum())
            successful_mods += n_ok
            intervals_won += n_ok > 0
            best_counts.append(int(counts.max()))
    trial = poisson_sf(threshold, lam)
    total = spec.trials * mods.size
    frac = successful_mods / total
    sigma = math.sqrt(trial.to_linear() * (1 - trial.to_linear()) / total)
    extras = {
        "modifiers_per_interval": int(mods.size),
        "threshold": threshold,
        "lambda": lam,
        "successful_modifier_fraction": frac,
        "trial_probability": trial.to_linear(),
        "z_score": (frac - trial.to_linear()) / sigma if sigma > 0 else 0.0,
        "interval_success_rate": intervals_won / spec.trials,
        "interval_success_analytic": complement_power(trial, float(mods.size)).to_linear(),
        "mean_best_count": float(np.mean(best_counts)),
    }
    return _outcome(spec, intervals_won, float(max(best_counts)) - threshold,
                    complement_power(trial, float(mods.size)), "interval_success", extras)


RUNNERS = {
    "double_spend": run_double_spend,
    "history_revision": run_history_revision,
    "grinding": run_grinding,
    "preprogrammed": run_preprogrammed,
    "toy_grinding": run_toy_grinding,
}


def run_attack(spec: AttackSpec, cfg=None) -> AttackOutcome:
    return RUNNERS[spec.kind](spec, cfg)
