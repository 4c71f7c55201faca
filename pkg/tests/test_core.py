import json
import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stakesim.core import (DAY, MINUTE, NEUCOIN, PEERCOIN, ChainParams, CoinAgeMode,
                           DuplicatePolicy, ModifierMode, OutPoint, ParamsError, Rng,
                           StakeInequality, TailProb, Utxo, WindowLaw, complement_power,
                           hash_from_hex, hash_to_hex, keyed_uniform, name_key, preset)

mp.mp.dps = 60


def test_tailprob_from_linear_anchors():
    assert TailProb.from_linear(1.0).log10_value == 0.0
    assert TailProb.from_linear(0.0).is_zero
    assert abs(TailProb.from_linear(1e-35).log10_value + 35) < 1e-12


@pytest.mark.parametrize("x", [-0.1, 1.5, 2.0])
def test_tailprob_domain(x):
    with pytest.raises(ValueError):
        TailProb.from_linear(x)


@pytest.mark.parametrize("x", [1.0, 1e-5, 1e-50, 1e-300])
def test_tailprob_roundtrip(x):
    assert TailProb.from_linear(x).to_linear() == pytest.approx(x, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-300, max_value=1.0))
def test_tailprob_roundtrip_property(x):
    assert TailProb.from_linear(x).to_linear() == pytest.approx(x, rel=1e-9)


def test_tailprob_sum_and_product_match_high_precision():
    a, b = TailProb(-120.25), TailProb(-121.5)
    want = mp.log10(mp.mpf(10) ** mp.mpf(-120.25) + mp.mpf(10) ** mp.mpf(-121.5))
    assert (a + b).log10_value == pytest.approx(float(want), abs=1e-12)
    assert (a * b).log10_value == pytest.approx(-241.75)
    assert (a + TailProb.zero()) == a
    assert (a * TailProb.zero()).is_zero


def test_tailprob_complement_and_power():
    assert TailProb.from_linear(0.25).complement().to_linear() == pytest.approx(0.75)
    tiny = TailProb(-40)
    assert tiny.complement().log10_value == pytest.approx(-1e-40 / math.log(10), abs=1e-50)
    assert TailProb.from_linear(0.5).power(3).to_linear() == pytest.approx(0.125)
    assert TailProb.one().complement().is_zero


def test_tailprob_json():
    for x in (TailProb(-95.3), TailProb.zero(), TailProb.one()):
        assert TailProb.from_json(json.loads(json.dumps(x.to_json()))) == x


def _complement_power_oracle(q, k):
    q, k = mp.mpf(q), mp.mpf(k)
    return -mp.expm1(k * mp.log1p(-q))


def test_complement_power_anchors():
    assert complement_power(TailProb.zero(), 10**6).is_zero
    assert complement_power(TailProb.from_linear(0.5), 1).to_linear() == pytest.approx(0.5)
    got = complement_power(TailProb(-46), 1e19)
    assert got.to_linear() == pytest.approx(1e-27, rel=0.01)


@pytest.mark.parametrize("q,k", [(1e-12, 1000), (1e-46, 1e19), (1e-7, 5e4), (3e-3, 10)])
def test_complement_power_small_product_precision(q, k):
    got = complement_power(TailProb.from_linear(q), k).to_linear()
    want = float(_complement_power_oracle(q, k))
    assert got == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("q,k", [(0.3, 5), (0.01, 200), (1e-3, 1e4)])
def test_complement_power_moderate(q, k):
    got = complement_power(TailProb.from_linear(q), k).to_linear()
    assert got == pytest.approx(float(_complement_power_oracle(q, k)), rel=1e-9)


def test_presets():
    assert NEUCOIN.block_time_target == MINUTE
    assert NEUCOIN.min_stake_age == int(1.6 * DAY)
    assert NEUCOIN.modifier_interval == 200 * MINUTE
    assert NEUCOIN.selection_interval == 2250 * MINUTE
    assert NEUCOIN.stake_inequality is StakeInequality.STRICT
    assert NEUCOIN.coin_age_mode is CoinAgeMode.NEUCOIN_FLAT
    assert NEUCOIN.modifier_mode is ModifierMode.DYNAMIC
    assert PEERCOIN.min_stake_age == 30 * DAY
    assert PEERCOIN.selection_interval == 9 * DAY
    assert PEERCOIN.modifier_interval == 6 * 3600
    assert PEERCOIN.modifier_mode is ModifierMode.STATIC
    assert PEERCOIN.stake_inequality is StakeInequality.NON_STRICT
    assert PEERCOIN.window_law is WindowLaw.PEERCOIN
    assert PEERCOIN.duplicate_policy is DuplicatePolicy.DETECT_ONLY
    assert preset("NeuCoin") is NEUCOIN
    with pytest.raises(ParamsError):
        preset("bitcoin")


def test_selection_interval_of_sixteen_tenths_day_is_configurable():
    # 1.6 days of selection needs a longer stake age than the preset's
    p = NEUCOIN.replace(selection_interval=int(1.6 * DAY), min_stake_age=int(1.6 * DAY) + 1)
    assert p.selection_interval == 2304 * MINUTE


@pytest.mark.parametrize("changes", [
    {"min_stake_age": 2250 * MINUTE},
    {"modifier_interval": 2251 * MINUTE},
    {"block_time_target": 0},
    {"modifier_bits": 65},
    {"coin_age_mode": "SOMETHING"},
    {"selection_interval": 10, "modifier_interval": 5},
])
def test_params_invariants(changes):
    with pytest.raises(ParamsError):
        NEUCOIN.replace(**changes)


def test_params_json_roundtrip():
    for p in (NEUCOIN, PEERCOIN):
        assert ChainParams.from_json(p.to_json()) == p
    with pytest.raises(ParamsError):
        ChainParams.from_dict({**NEUCOIN.to_dict(), "bogus": 1})


def test_hash_hex_roundtrip():
    for h in (0, 1, (1 << 256) - 1, 0xDEADBEEF << 100):
        assert hash_from_hex(hash_to_hex(h)) == h
    assert len(hash_to_hex(5)) == 64


def test_utxo_json_and_validation():
    u = Utxo(OutPoint(123456789, 3), 50, 10, 12, 81, 7)
    assert Utxo.from_json(json.loads(json.dumps(u.to_json()))) == u
    assert u.age(110) == 100
    with pytest.raises(ValueError):
        Utxo(OutPoint(1, 0), 0, 0, 0, 0, 0)


def test_rng_determinism_and_streams():
    a, b = Rng(42, 0), Rng(42, 0)
    assert [a.bits64() for _ in range(5)] == [b.bits64() for _ in range(5)]
    assert Rng(42, 0).bits64() != Rng(42, 1).bits64()
    assert Rng(42, 0).bits64() != Rng(43, 0).bits64()
    parent = Rng(9, 2)
    c1 = parent.child(5).bits64()
    parent.random(100)
    assert parent.child(5).bits64() == c1
    with pytest.raises(ValueError):
        Rng(-1)


def test_rng_pinned_first_draws():
    # guards against silent changes of the generator or seeding scheme
    assert Rng(42, 0).bits64() == PINNED_RNG_42_0
    assert Rng(7, 3).hash256() == PINNED_RNG_7_3


PINNED_RNG_42_0 = 16910944855483863638
PINNED_RNG_7_3 = (
    34806462578195197836893511013283785303653344923549272536574856906059042126980)


def test_keyed_uniform():
    u = keyed_uniform(1, 2, "x", b"y")
    assert 0 < u < 1
    assert u == keyed_uniform(1, 2, "x", b"y")
    assert u != keyed_uniform(2, 2, "x", b"y")
    vals = [keyed_uniform(5, i) for i in range(4000)]
    assert abs(sum(vals) / len(vals) - 0.5) < 0.02


def test_name_key_stable_and_distinct():
    assert name_key("alice") == name_key("alice")
    assert name_key("alice") != name_key("bob")
    assert 0 <= name_key("alice") < 1 << 63
