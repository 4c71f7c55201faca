"""Closed-form attack probabilities, evaluated in the log domain.

Every public function returns a :class:`TailProb` so that values such as
1e-189 or 1e-87 keep full relative precision. Poisson tails are summed
directly from the dominant term outwards; an independent regularized
incomplete gamma routine is kept alongside as a cross-check.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import TailProb, complement_power

BITCOIN_HASH_RATE = 391_367_666e9  # H/s
SINGLE_ASIC_HASH_RATE = 1e13  # H/s
DEFAULT_N_STAKES = 1_000_000
MAX_GRIND_BITS = 64

_LN10 = math.log(10.0)
_REL_EPS = 1e-17
_TOL = 1e-9


def _floor_tol(x: float) -> int:
    return math.floor(x + _TOL)


def _ceil_tol(x: float) -> int:
    return math.ceil(x - _TOL)


@dataclass(frozen=True)
class RaceParams:
    """Inputs shared by the race formulas. Times in seconds."""

    p: float
    n: int = 0
    alpha: float | None = None
    tau: float = 60.0
    t_modifier: float = 200 * 60.0
    hash_rate: float = BITCOIN_HASH_RATE
    n_stakes: float = DEFAULT_N_STAKES
    modifier_bits: int = MAX_GRIND_BITS

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.tau <= 0 or self.t_modifier <= 0:
            raise ValueError("durations must be positive")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def a(self) -> float:
        """Honest growth rate relative to 1/tau (1 - p unless set explicitly)."""
        return self.q if self.alpha is None else self.alpha


def log_poisson_pmf(k: int, lam: float) -> TailProb:
    if k < 0:
        return TailProb.zero()
    if lam == 0:
        return TailProb.one() if k == 0 else TailProb.zero()
    return TailProb.from_ln(-lam + k * math.log(lam) - math.lgamma(k + 1))


def _ln_pmf(k: int, lam: float) -> float:
    return -lam + k * math.log(lam) - math.lgamma(k + 1)


def poisson_sf(k: int, lam: float) -> TailProb:
    """P[X >= k] for X ~ Poisson(lam)."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if k <= 0:
        return TailProb.one()
    if lam == 0:
        return TailProb.zero()
    if k > lam:
        # upper tail: sum pmf(k) * prod(lam / j) outward
        total, term, j = 1.0, 1.0, k
        while True:
            j += 1
            term *= lam / j
            total += term
            if term < _REL_EPS * total:
                break
        return TailProb.from_ln(_ln_pmf(k, lam) + math.log(total))
    # lower tail is the smaller side: 1 - sum_{j<k} pmf(j)
    total, term, j = 1.0, 1.0, k - 1
    while j > 0:
        term *= j / lam
        j -= 1
        total += term
        if term < _REL_EPS * total:
            break
    ln_cdf = _ln_pmf(k - 1, lam) + math.log(total)
    return TailProb.from_ln(ln_cdf).complement()


def log10_gammainc_lower(a: float, x: float) -> TailProb:
    """Regularized lower incomplete gamma P(a, x) by series or continued fraction.

    For integer a this equals P[Poisson(x) >= a]. The algorithm is
    independent of :func:`poisson_sf` and serves as its cross-check.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return TailProb.zero()
    ln_pre = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1:
        ap, delta = a, 1.0 / a
        s = delta
        for _ in range(100_000):
            ap += 1
            delta *= x / ap
            s += delta
            if abs(delta) < abs(s) * 1e-17:
                break
        return TailProb.from_ln(ln_pre + math.log(s))
    # Lentz continued fraction for Q(a, x), then P = 1 - Q
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 100_000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return TailProb.from_ln(ln_pre + math.log(h)).complement()


def double_spend_probability(p: float, n: int) -> TailProb:
    """Chance an attacker with share p reverses a payment after n confirmations.

    Evaluated as P[K > n] + sum_{k<=n} P[K=k] (p/q)^(n-k) with K ~ Poisson(n p / q),
    which equals 1 - sum_{k<=n} P[K=k] (1 - (p/q)^(n-k)) but has only
    positive terms.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if n < 0:
        raise ValueError("n must be non-negative")
    if p >= 0.5:
        return TailProb.one()
    if p == 0:
        return TailProb.one() if n == 0 else TailProb.zero()
    q = 1.0 - p
    lam = n * p / q
    ln_r = math.log(p / q)
    acc = poisson_sf(n + 1, lam) if n > 0 else TailProb.zero()
    if n == 0:
        return TailProb.one()
    for k in range(n + 1):
        acc = acc + TailProb.from_ln(_ln_pmf(k, lam) + (n - k) * ln_r)
    return acc


def catchup_probability_at(t: float, rp: RaceParams) -> TailProb:
    """Chance the attacker's branch has caught up at time t (seconds)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    need = _ceil_tol(rp.a * t / rp.tau + rp.n)
    return poisson_sf(need, rp.p * t / rp.tau)


@dataclass(frozen=True)
class SeriesBound:
    value: TailProb
    remainder: TailProb
    n_terms: int
    diverged: bool = False


def _chernoff_ln(a: float, lam: float) -> float:
    return -(a * math.log(a / lam) - a + lam)


def catchup_upper_bound(rp: RaceParams, rel_tol: float = 1e-30,
                        max_terms: int = 5_000_000) -> SeriesBound:
    """Union bound over block times i*tau of the catch-up probability.

    The sum is cut once the analytic remainder (a Chernoff majorant summed as
    a geometric series) falls below ``rel_tol`` of the partial sum; that
    remainder is added to the reported value, so the result stays an upper
    bound.
    """
    p, a, n = rp.p, rp.a, rp.n
    if p >= a:
        return SeriesBound(TailProb.one(), TailProb.zero(), 0, diverged=True)
    if p == 0:
        return SeriesBound(TailProb.zero(), TailProb.zero(), 0)
    total = TailProb.zero()
    d_inf = a * math.log(a / p) - a + p
    i = 0
    while i < max_terms:
        i += 1
        total = total + poisson_sf(_ceil_tol(a * i + n), p * i)
        if i % 16:
            continue
        g = a * math.log((a + n / i) / p) - (a + n / i) + p
        if g <= 0 or a * i + n <= p * i:
            continue
        g = min(g, d_inf)
        ln_rem = _chernoff_ln(a * i + n, p * i) - g - math.log(-math.expm1(-g))
        if total.is_zero:
            continue
        if ln_rem - total.ln < math.log(rel_tol):
            rem = TailProb.from_ln(min(0.0, ln_rem))
            value = total + rem
            return SeriesBound(value, rem, i)
    raise RuntimeError("catch-up bound did not converge")


def grinding_threshold_count(rp: RaceParams, strict: bool = True) -> int:
    """Blocks the attacker needs in one modifier interval."""
    expected = rp.q * rp.t_modifier / rp.tau
    if strict:
        return _floor_tol(expected) + 1
    return _ceil_tol(expected)


def grinding_trial_probability(rp: RaceParams, strict: bool = True) -> TailProb:
    """Chance one modifier candidate beats the honest network in one interval."""
    return poisson_sf(grinding_threshold_count(rp, strict), rp.p * rp.t_modifier / rp.tau)


def grinding_exponent(rp: RaceParams) -> float:
    """Number of modifier candidates the attacker can try per interval."""
    tries = rp.hash_rate * rp.t_modifier / rp.n_stakes
    return max(1.0, min(tries, float(2 ** rp.modifier_bits)))


def grinding_success_probability(rp: RaceParams, strict: bool = True) -> TailProb:
    return complement_power(grinding_trial_probability(rp, strict), grinding_exponent(rp))


@dataclass(frozen=True)
class ThresholdResult:
    p_star: float | None
    bracket: tuple[float, float]
    boundary: str | None = None  # "below" or "above" when no crossing exists


def grinding_threshold(hash_rate: float, t_modifier: float, tau: float = 60.0,
                       n_stakes: float = DEFAULT_N_STAKES, success_target: float = 0.5,
                       strict: bool = True, lo: float = 1e-4, hi: float = 0.5,
                       iterations: int = 60) -> ThresholdResult:
    """Smallest stake share whose grinding success reaches ``success_target``."""
    target = TailProb.from_linear(success_target)

    def f(p: float) -> TailProb:
        rp = RaceParams(p=p, tau=tau, t_modifier=t_modifier, hash_rate=hash_rate,
                        n_stakes=n_stakes)
        return grinding_success_probability(rp, strict)

    grid = [lo + (hi - lo) * k / 48 for k in range(49)]
    values = [f(x).log10_value for x in grid]
    for v0, v1 in zip(values, values[1:]):
        if v1 < v0 - 1e-9:
            raise ArithmeticError("grinding success is not monotone in p on the bracket")
    if f(lo) >= target:
        return ThresholdResult(None, (lo, hi), "below")
    if f(hi) < target:
        return ThresholdResult(None, (lo, hi), "above")
    a, b = lo, hi
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if f(mid) >= target:
            b = mid
        else:
            a = mid
    return ThresholdResult(0.5 * (a + b), (a, b))


TABLE1_P = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
TABLE1_N = (1, 10, 60, 120)


def table1(ps: Sequence[float] = TABLE1_P, ns: Sequence[int] = TABLE1_N) -> list[dict]:
    rows = []
    for p in ps:
        row = {"p": p}
        for n in ns:
            row[n] = double_spend_probability(p, n)
        rows.append(row)
    return rows


def format_prob(x: TailProb, digits: int = 4) -> str:
    if x.is_zero:
        return "0"
    if x.log10_value > -4:
        return f"{x.to_linear():.{digits}g}"
    exp = math.floor(x.log10_value)
    mant = 10 ** (x.log10_value - exp)
    if mant >= 9.9995:
        mant, exp = mant / 10, exp + 1
    return f"{mant:.{digits - 1}f}e{exp}"


def table1_csv(rows: Iterable[dict], ns: Sequence[int] = TABLE1_N) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p"] + [f"n={n}" for n in ns] + [f"log10_n={n}" for n in ns])
    for row in rows:
        probs = [row[n] for n in ns]
        writer.writerow([row["p"]] + [format_prob(x) for x in probs]
                        + [f"{x.log10_value:.6f}" for x in probs])
    return buf.getvalue()


def catchup_series(ps: Sequence[float], lags: Sequence[int], owns_coins: bool,
                   tau: float = 60.0) -> list[tuple[float, int, TailProb]]:
    """Upper bound on history revision for each (p, lag)."""
    out = []
    for p in ps:
        for lag in lags:
            alpha = (1.0 - p) if owns_coins else 1.0
            bound = catchup_upper_bound(RaceParams(p=p, n=lag, alpha=alpha, tau=tau))
            out.append((p, lag, bound.value))
    return out


def pmf_series(p: float, t_modifier: float, tau: float = 60.0,
               k_max: int | None = None) -> list[tuple[int, TailProb]]:
    """Distribution of the attacker's block count over one modifier interval."""
    lam = p * t_modifier / tau
    k_max = int(lam + 12 * math.sqrt(lam + 1) + 20) if k_max is None else k_max
    return [(k, log_poisson_pmf(k, lam)) for k in range(k_max + 1)]


def grinding_curve(ps: Sequence[float], hash_rates: Sequence[float], t_modifier: float,
                   tau: float = 60.0, n_stakes: float = DEFAULT_N_STAKES
                   ) -> list[tuple[float, float, TailProb]]:
    out = []
    for h in hash_rates:
        for p in ps:
            rp = RaceParams(p=p, tau=tau, t_modifier=t_modifier, hash_rate=h, n_stakes=n_stakes)
            out.append((h, p, grinding_success_probability(rp)))
    return out


def series_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header) + ["log10_value"])
    for row in rows:
        *keys, prob = row
        writer.writerow(list(keys) + ["-inf" if prob.is_zero else f"{prob.log10_value:.6f}"])
    return buf.getvalue()
