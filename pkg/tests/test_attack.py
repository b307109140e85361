import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from headturn.attack import (
    ASCEND, ATTACKS, AttackConfig, advheat_rand, advheat_score, baseline_score, cosine_step_size,
    estimate_gradient, select_transfer_index, select_transfer_view,
)
from headturn.detector import (
    FEATURE_NAMES, Detector, LandscapeSpec, Label, QueryLedger, cross_entropy, scripted_oracle,
)
from headturn.harness import brute_force_adversarial_set, fluctuating_landscape, random_landscape
from headturn.viewpath import ViewPath

PATH = ViewPath()


def explicit(values, threshold, K=None):
    values = list(values)
    return scripted_oracle(LandscapeSpec(K=K or len(values), adversarial_threshold=threshold,
                                         loss_values=values))


def ledger_counts_from_trace(res):
    dec = sum(e.kind == "decision" for e in res.trace)
    return dec, len(res.trace) - dec


# -- rand -----------------------------------------------------------------------

def test_rand_empty_set_exhausts():
    res = advheat_rand(explicit([2.0] * 360, 0.5), PATH, AttackConfig(T=360))
    assert not res.success and res.queries_used == (360, 0)


def test_rand_everything_adversarial():
    res = advheat_rand(explicit([0.1] * 360, 0.5), PATH, AttackConfig(T=360, seed=9))
    assert res.success and res.queries_used == (1, 0)


def test_rand_order_ignores_responses():
    a = advheat_rand(explicit([2.0] * 360, 0.5), PATH, AttackConfig(seed=4))
    b = advheat_rand(explicit(np.linspace(3, 9, 360), 0.5), PATH, AttackConfig(seed=4))
    vals = [2.0] * 360
    vals[77] = 0.0
    c = advheat_rand(explicit(vals, 0.5), PATH, AttackConfig(seed=4))
    ia = [e.index for e in a.trace]
    assert ia == [e.index for e in b.trace]
    assert sorted(ia) == list(range(360))
    assert [e.index for e in c.trace] == ia[:ia.index(77) + 1]


def test_rand_complete_on_random_landscapes():
    for s in range(200):
        spec = random_landscape(s)
        truth = spec.adversarial_set()
        res = advheat_rand(scripted_oracle(spec), PATH, AttackConfig(T=360, seed=s))
        assert res.success == bool(truth)
        assert not res.success or res.adversarial_index in truth


# -- gradient estimate ------------------------------------------------------------

def test_gradient_on_linear_landscape():
    oracle = explicit([0.01 * i for i in range(360)], 0.0)
    g = estimate_gradient(oracle, PATH, 100, 1, QueryLedger())
    assert abs(g.value - 0.01) < 1e-9 and g.at_index == 100


def test_gradient_on_constant_landscape():
    assert estimate_gradient(explicit([1.3] * 360, 0.0), PATH, 5, 3, QueryLedger()).value == 0.0


def test_gradient_matches_loss_table():
    rng = np.random.default_rng(0)
    for s in range(5):
        spec = random_landscape(s)
        oracle = scripted_oracle(spec)
        table = [cross_entropy(math.exp(-l), "real") for l in spec.losses()]
        for k, h in zip(rng.integers(-400, 800, 20), rng.integers(1, 30, 20)):
            g = estimate_gradient(oracle, PATH, int(k), int(h), QueryLedger())
            assert g.value == (table[int(k) % 360] - table[(int(k) - int(h)) % 360]) / int(h)


def test_gradient_cache_saves_queries():
    oracle = explicit(np.linspace(0, 1, 360), 0.0)
    led, cache = QueryLedger(), {}
    estimate_gradient(oracle, PATH, 10, 1, led, cache)
    assert led.score_queries == 2
    estimate_gradient(oracle, PATH, 11, 1, led, cache)
    assert led.score_queries == 3


def test_gradient_wraps_at_zero():
    vals = np.linspace(0, 1, 360)
    g = estimate_gradient(explicit(vals, 0.0), PATH, 0, 1, QueryLedger())
    assert abs(g.value - (cross_entropy(math.exp(-vals[0]), "real")
                          - cross_entropy(math.exp(-vals[359]), "real"))) < 1e-12


# -- score attack ---------------------------------------------------------------------

def basin(K=360):
    return [1.0 - math.cos(2 * math.pi * i / K) for i in range(K)]


def test_score_descends_a_wide_basin():
    vals = basin()
    truth = {i for i, v in enumerate(vals) if v < 0.05}
    for s in range(50):
        res = advheat_score(explicit(vals, 0.05), PATH, AttackConfig(T=360, seed=s))
        assert res.success and res.adversarial_index in truth
        assert res.total_queries < 360


def test_score_without_adversarial_views_exhausts():
    res = advheat_score(explicit(basin(), -1.0), PATH, AttackConfig(T=360, seed=3))
    assert not res.success
    assert res.queries_used == ledger_counts_from_trace(res)
    # stops once the next step (decision plus up to two scores) no longer fits
    assert 358 <= res.total_queries <= 360


def _trajectory(res):
    return [(e.index, e.kind) for e in res.trace]


def test_score_sign_invariance_under_scaling_and_shift():
    for s in range(30):
        spec = LandscapeSpec(K=360, adversarial_threshold=1.2 + 0.01 * s, offset=2.0,
                             sinusoids=((1.0, 1, 0.1 * s), (0.3, 4, 0.7), (0.05, 13, 1.0)))
        base = spec.losses()
        ref = advheat_score(scripted_oracle(spec), PATH, AttackConfig(T=120, seed=s))
        scaled = advheat_score(explicit(7 * base, 7 * spec.adversarial_threshold), PATH,
                               AttackConfig(T=120, seed=s))
        shifted = advheat_score(explicit(base + 0.5, spec.adversarial_threshold + 0.5), PATH,
                                AttackConfig(T=120, seed=s))
        assert _trajectory(ref) == _trajectory(scaled) == _trajectory(shifted)
        assert ref.success == scaled.success == shifted.success


def test_ascend_convention_climbs():
    vals = basin()
    for seed in range(20):
        runs = {}
        for conv in ("descend_real_loss", ASCEND):
            res = advheat_score(explicit(vals, 0.05), PATH, AttackConfig(T=60, seed=seed, sign_convention=conv))
            runs[conv] = [e.index for e in res.trace if e.kind == "decision"][:2]
        k0, down = runs["descend_real_loss"]
        _, up = runs[ASCEND]
        assert vals[down] < vals[k0] < vals[up]


# -- baseline -------------------------------------------------------------------------

def test_baseline_constant_never_moves():
    res = baseline_score(explicit([1.0] * 360, 0.5), PATH, AttackConfig(T=50, seed=2))
    assert not res.success
    assert len({e.index for e in res.trace if e.kind == "decision"}) == 1


def test_baseline_moves_alpha_against_unit_slope():
    oracle = explicit([1.0 + (i % 20) for i in range(360)], 0.5)
    cfg_kwargs = dict(T=30, alpha_max=10, alpha_min=10)
    for seed in range(40):
        res = baseline_score(oracle, PATH, AttackConfig(seed=seed, **cfg_kwargs))
        ks = [e.index for e in res.trace if e.kind == "decision"]
        if ks[0] % 10 == 0:
            continue  # the start sits on a sawtooth drop
        assert len(ks) > 3
        assert all((a - b) % 360 == 10 for a, b in zip(ks, ks[1:]))


def test_score_beats_baseline_at_full_budget():
    wins = {"score": 0, "baseline": 0}
    for s in range(1000):
        oracle = scripted_oracle(fluctuating_landscape(s))
        wins["score"] += advheat_score(oracle, PATH, AttackConfig(T=360, seed=s)).success
        wins["baseline"] += baseline_score(oracle, PATH, AttackConfig(T=360, seed=s)).success
    assert wins["baseline"] < wins["score"]


# -- schedule -------------------------------------------------------------------------

def test_cosine_schedule_examples():
    assert cosine_step_size(0, 50, 10, 3) == 10
    assert abs(cosine_step_size(49, 50, 10, 3) - 3) < 1e-12
    assert abs(cosine_step_size(49, 99, 10, 3) - 6.5) < 1e-12
    assert cosine_step_size(0, 1, 10, 3) == 10


@given(st.integers(1, 500), st.data())
def test_cosine_schedule_is_monotone(T, data):
    t = data.draw(st.integers(0, max(0, T - 2)))
    a, b = cosine_step_size(t, T, 10, 3), cosine_step_size(t + 1, T, 10, 3)
    assert 3 - 1e-12 <= b <= a <= 10 + 1e-12


# -- transfer selection ------------------------------------------------------------------

def _brightness_detector():
    w = np.zeros(len(FEATURE_NAMES))
    w[FEATURE_NAMES.index("lum_mean")] = 5.0
    return Detector(weights=w, bias=-2.5)


def test_select_transfer_view_example():
    views = np.stack([np.full((16, 16), v) for v in (0.1, 0.9, 0.4)])
    led = QueryLedger()
    i, img = select_transfer_view(_brightness_detector(), views, led)
    assert i == 1 and np.array_equal(img, views[1]) and led.score_queries == 3


def test_select_transfer_ties_and_examples():
    assert select_transfer_index([0.1, 0.9, 0.4]) == 1
    assert select_transfer_index([0.3] * 5) == 0
    views = np.stack([np.full((16, 16), 0.5)] * 4)
    assert select_transfer_view(_brightness_detector(), views)[0] == 0


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=50))
def test_select_transfer_monotone_invariance(ticks):
    s = np.array(ticks) / 1000.0
    i = select_transfer_index(s)
    assert select_transfer_index(np.exp(3 * s) + 2) == i
    assert select_transfer_index(s ** 3) == i
    assert select_transfer_index(np.log1p(s)) == i


# -- global invariants ---------------------------------------------------------------------

def test_budget_ledger_and_soundness_over_random_runs():
    rng = np.random.default_rng(11)
    kinds = sorted(ATTACKS)
    for run in range(1000):
        spec = random_landscape(int(rng.integers(1 << 30)))
        oracle = scripted_oracle(spec)
        kind = kinds[run % 3]
        cfg = AttackConfig(T=int(rng.integers(1, 400)), h=int(rng.integers(1, 6)), seed=run)
        res = ATTACKS[kind](oracle, PATH, cfg)
        assert res.total_queries <= cfg.T
        assert res.queries_used == ledger_counts_from_trace(res)
        if res.success:
            assert oracle.decide(res.adversarial_index, QueryLedger()) is Label.REAL


def test_attacks_are_deterministic():
    oracle = scripted_oracle(fluctuating_landscape(5))
    for fn in ATTACKS.values():
        a = fn(oracle, PATH, AttackConfig(T=80, seed=3))
        b = fn(oracle, PATH, AttackConfig(T=80, seed=3))
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_ring_mismatch_raises():
    with pytest.raises(ValueError):
        advheat_rand(explicit([1.0] * 10, 0.5), PATH, AttackConfig())


@pytest.mark.parametrize("kwargs", [dict(T=0), dict(h=0), dict(alpha_max=2, alpha_min=3),
                                    dict(sign_convention="sideways")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        AttackConfig(**kwargs)


def test_brute_force_matches_spec_set():
    vals = [1.0] * 360
    vals[17] = vals[200] = 0.0
    assert brute_force_adversarial_set(explicit(vals, 0.5), PATH) == {17, 200}
