from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from largealpha.entropy_core import Sequence
from largealpha.schemas import REPORT_SCHEMA
from largealpha.threshold_lab import (
    ConfigError,
    ExperimentConfig,
    birthday_collision_prob,
    birthday_exact_prob,
    birthday_monte_carlo,
    chernoff_check,
    chernoff_tail_bound,
    crossover_trend,
    dominance_experiment,
    follower_event_bound,
    follower_threshold,
    incompressible_fraction_bound,
    max_distinct_followers,
    occurrence_indicators,
    quantizer_scaling,
    short_string_count,
    threshold_experiment,
    wilson_interval,
)


def test_birthday_classic():
    assert birthday_exact_prob(365, 23) == pytest.approx(0.5072972, abs=1e-6)
    assert birthday_collision_prob(365, 23) == pytest.approx(1 - math.exp(-23 * 22 / 730))
    assert birthday_exact_prob(10, 11) == 1.0
    assert birthday_collision_prob(10, 1) == 0.0


def test_birthday_monte_carlo_agrees_with_exact():
    mc = birthday_monte_carlo(365, 23, 4000, seed=1)
    lo, hi = wilson_interval(round(mc * 4000), 4000, 0.999)
    assert lo <= birthday_exact_prob(365, 23) <= hi


def test_short_string_count():
    for L in range(8):
        brute = sum(1 for k in range(L + 1) for _ in itertools.product("01", repeat=k))
        assert short_string_count(L) == brute
    assert short_string_count(3.7) == 15
    assert short_string_count(-1) == 0


def test_incompressible_fraction_bound():
    assert incompressible_fraction_bound(2, 3, 1.0) == 0.0  # 1 - 2/2 = 0
    assert incompressible_fraction_bound(1024, 30, 0.3) == pytest.approx(1 - 2 / 1024 ** 3)
    with pytest.raises(ValueError):
        incompressible_fraction_bound(1, 5, 0.1)


def test_follower_formulas():
    assert follower_threshold(64, 1, 1.0, 0.75) == pytest.approx(64 ** 0.5 - 1)
    assert follower_event_bound(2 ** 30, 1, 0.3) == pytest.approx(2 ** 30 / 2 ** (2 ** 3 - 1))


def brute_followers(s, ell, exclude):
    fol = defaultdict(set)
    for i in range(ell, len(s)):
        ctx = tuple(s[i - ell:i])
        if not (exclude and s[i] in ctx):
            fol[ctx].add(s[i])
    return max((len(v) for v in fol.values()), default=0)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=80), st.integers(0, 3), st.booleans())
def test_max_distinct_followers(s, ell, exclude):
    if len(s) < ell + 1:
        return
    assert max_distinct_followers(Sequence(s, 6), ell, exclude) == brute_followers(s, ell, exclude)


def test_chernoff_tail_bound():
    assert chernoff_tail_bound(0.01, 0.06, 100) == pytest.approx(2 ** -6)
    assert chernoff_tail_bound(0.02, 0.06, 100) is None
    with pytest.raises(ValueError):
        chernoff_tail_bound(0.5, 0.1, 10)


def test_chernoff_check():
    res = chernoff_check(0.01, 100, 6, samples=50_000, seed=3)
    assert res["exact"] == pytest.approx(stats.binom.sf(5, 100, 0.01))
    assert res["empirical"] <= res["bound"]
    lo, hi = res["empirical_ci"]
    assert lo <= res["exact"] <= hi or abs(res["empirical"] - res["exact"]) < 4e-4


def test_occurrence_indicators_brute():
    rng = np.random.default_rng(0)
    strings = rng.integers(0, 3, size=(20, 30))
    for alpha in [(0,), (0, 1), (2, 2), (1, 0, 1)]:
        got = occurrence_indicators(strings, alpha)
        ell = len(alpha)
        for r, row in enumerate(strings.tolist()):
            want = [tuple(row[i:i + ell]) == alpha and row[i + ell] not in alpha for i in range(30 - ell)]
            assert got[r].tolist() == want


def test_dominance_small():
    res = dominance_experiment((0, 0), n=2, m=64, trials=5000, seed=1)
    assert res["violations"] <= 2
    assert res["p"] == pytest.approx(0.5)
    assert res["x_mean"] < res["y_mean"]
    # 01 over a binary alphabet never has a follower outside {0, 1}
    res01 = dominance_experiment((0, 1), n=2, m=64, trials=2000, seed=1)
    assert res01["x_mean"] == 0.0 and res01["violations"] == 0


def test_dominance_rejects_bad_pattern():
    with pytest.raises(ValueError):
        dominance_experiment((0, 2), n=2, trials=10)


def _config(**kw):
    base = dict(m_values=[2048], n_values=[4, 64, 2048], order=1, c=1.0, eps=0.5, trials=3, seed=5)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_config_points():
    assert _config().points == [(4, 2048), (64, 2048), (2048, 2048)]
    cfg = _config(n_values=None, ratios=[0.25, 1.0, 4.0])
    ns = [n for n, _ in cfg.points]
    assert ns == sorted(ns) and all(n >= 2 for n in ns)
    cfg = _config(n_values=None, n_rule="sparse_boundary")
    assert cfg.points == [(math.ceil(2048 ** (1 / 1.5)), 2048)]


@pytest.mark.parametrize("bad,field", [
    (dict(trials=0), "trials"),
    (dict(eps=1.5), "eps"),
    (dict(order=0), "order"),
    (dict(bogus=1), "bogus"),
    (dict(m_values=[]), "m_values"),
    (dict(n_rule="other", n_values=None), "n_rule"),
    (dict(ratios=[1.0]), "n_values"),
    (dict(mode="x"), "mode"),
])
def test_config_errors_name_the_field(bad, field):
    with pytest.raises(ConfigError) as info:
        _config(**bad)
    assert info.value.field == field


def test_config_requires_m_values():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"trials": 2})
    assert info.value.field == "m_values"


def test_report_mode_allows_any_eps():
    _config(mode="report", eps=3.0, order=0)


def test_threshold_experiment_rows():
    rep = threshold_experiment(_config(codec=True, verify_roundtrip=True))
    rows = rep.points
    assert [r["n"] for r in rows] == [4, 64, 2048]
    assert rows[0]["regime"] == "dense" and rows[-1]["regime"] == "sparse"
    for r in rows:
        assert r["chain_ok"] and r["roundtrip_ok"]
        assert r["ratio"] == pytest.approx(r["n"] ** 2 / 2048)
        assert 0 <= r["frac_collision"] <= 1
    assert rows[0]["codec_budget_met_frac"] == 1.0
    jsonschema.validate(json.loads(rep.to_json()), REPORT_SCHEMA)
    csv_text = rep.to_csv()
    assert csv_text.startswith("# schema_version=1")
    assert len(csv_text.strip().splitlines()) == 2 + len(rows)


def test_single_trial_single_row():
    rep = threshold_experiment(_config(n_values=[16], trials=1))
    assert len(rep.points) == 1 and rep.points[0]["trials"] == 1


def test_memory_budget_skips_points():
    rep = threshold_experiment(_config(memory_budget=1000))
    assert all(r.get("skipped") == "memory budget" for r in rep.points)


def test_workers_do_not_change_the_report():
    cfg = _config(codec=True, trials=4)
    assert threshold_experiment(cfg, workers=1).to_json() == threshold_experiment(cfg, workers=3).to_json()


def test_timing_only_when_requested():
    assert "runtime_seconds" not in threshold_experiment(_config(trials=1)).config
    assert "runtime_seconds" in threshold_experiment(_config(trials=1, include_timing=True)).config


def test_crossover_trend():
    rep = threshold_experiment(_config(n_values=[4, 16, 64, 256, 1024], trials=2))
    tr = crossover_trend(rep)
    assert tr["spearman"] > 0.9 and tr["crosses"]
    assert rep.summary["budget_ratio"] == tr


def test_quantizer_scaling():
    res = quantizer_scaling((2 ** 8, 2 ** 12, 2 ** 16), c=2.0, eps=0.1)
    bits = [r["bits"] for r in res["rows"]]
    assert bits == sorted(bits)
    assert res["target_exponent"] == pytest.approx(0.4)
    assert 0.2 < res["slope"] < 0.8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 500))
def test_wilson_interval_brackets_estimate(k, extra):
    n = k + extra
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1
