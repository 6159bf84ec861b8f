"""Acceptance suite: one test per criterion, each run at its stated tolerance
and time limit.  Every test records a PASS/FAIL line that is repeated in the
terminal summary under "acceptance criteria"."""

from __future__ import annotations

import bisect
import math
import time

import numpy as np
import pytest
from scipy import stats

from largealpha.dist_quantizer import (
    QuantizerParams,
    quantize,
    reconstruct,
    verify_kl_bound,
)
from largealpha.entropy_core import (
    Distribution,
    Sequence,
    count_contexts,
    empirical_entropy,
    empirical_markov_model,
    entropy_profile,
    kl_divergence,
    self_information,
)
from largealpha.generators import (
    champernowne_digits,
    copeland_erdos_digits,
    de_bruijn_count,
    enumerate_de_bruijn,
    is_de_bruijn,
    random_de_bruijn,
    random_string,
)
from largealpha.markov_codec import (
    compress,
    count_table,
    decompress,
    model_self_information,
)
from largealpha.seqio import sequence_bytes
from largealpha.threshold_lab import (
    ExperimentConfig,
    chernoff_check,
    crossover_trend,
    dominance_experiment,
    threshold_experiment,
    wilson_interval,
)

# --- 1 -------------------------------------------------------------------------------


def test_criterion_1_toronto(record):
    entropy_profile(Sequence.from_text("TORONTO"), 2)  # warm caches
    times = []
    for _ in range(21):
        t0 = time.perf_counter()
        h = entropy_profile(Sequence.from_text("TORONTO"), 2)
        times.append(time.perf_counter() - t0)
    runtime = sorted(times)[len(times) // 2]
    ok = (abs(h[0] - 1.8424) <= 5e-4 and abs(h[1] - 2 / 7) <= 1e-12 and h[2] == 0.0 and runtime < 1e-3)
    record("1", ok, f"H = {h[0]:.6f}, {h[1]!r}, {h[2]!r}; median runtime {runtime * 1e3:.3f} ms")
    assert ok


# --- 2 -------------------------------------------------------------------------------

DB_CASES = [(2, 1, 2), (2, 2, 4), (2, 3, 16), (3, 1, 6), (3, 2, 216)]


def test_criterion_2_counts_and_scan(record):
    t0 = time.perf_counter()
    found = {}
    scans = True
    for n, ell, want in DB_CASES:
        seqs = enumerate_de_bruijn(n, ell)
        found[(n, ell)] = len(seqs)
        scans &= all(is_de_bruijn(S, n, ell) for S in seqs)
        assert len(seqs) == want == de_bruijn_count(n, ell)
    runtime = time.perf_counter() - t0
    ok = scans and runtime < 5.0
    record("2", ok, f"counts {list(found.values())}, exactly-once scan {'ok' if scans else 'FAILED'}, "
                    f"{runtime:.2f} s")
    assert ok


def test_criterion_2_binary_order_three_h2(record):
    # stated target: every (2,3) sequence has H_2 = 0.7 within 1e-9
    hs = [empirical_entropy(S, 2) for S in enumerate_de_bruijn(2, 3)]
    ok = all(abs(h - 0.7) <= 1e-9 for h in hs)
    record("2", ok, f"H_2 of the 16 (2,3) sequences: {sorted(set(round(h, 12) for h in hs))} vs stated 0.7")
    assert ok


# --- 3 -------------------------------------------------------------------------------


def _distribution(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "uniform":
        return np.full(n, 1.0 / n)
    if kind == "zipf":
        w = 1.0 / np.arange(1, n + 1) ** rng.uniform(0.3, 2.5)
        w = w[rng.permutation(n)]
    elif kind == "point":
        w = np.zeros(n)
        w[rng.integers(n)] = 1.0
        if rng.random() < 0.5:  # near point mass with a thin tail
            w = w + rng.uniform(0, 1e-3) * rng.random(n)
    else:
        w = np.zeros(n)
        k = int(rng.integers(1, max(2, n // 10) + 1))
        w[rng.choice(n, k, replace=False)] = rng.dirichlet(np.full(k, rng.uniform(0.2, 2.0)))
    return w / w.sum()


def test_criterion_3_quantizer_bound(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240603)
    grid = [(c, e) for c in (1.0, 1.5, 2.0, 3.0) for e in (0.1, 0.5, 1.0)]
    kinds = ("uniform", "zipf", "point", "sparse")
    checks = failures = t_over = 0
    worst = -math.inf
    for i in range(10_000):
        n = (10, 100, 1000, 10_000)[i % 4]
        P = Distribution(_distribution(kinds[(i // 4) % 4], n, rng))
        for c, eps in grid:
            params = QuantizerParams(c, eps, n)
            check = verify_kl_bound(P, params)
            checks += 1
            failures += not check.ok
            worst = max(worst, check.kl - check.bound)
            t_over += quantize(P, params).t > params.max_entries
    uniform_err = 0.0
    for n in (10, 100, 1000, 10_000):
        for eps in (0.1, 0.5, 1.0):
            U = Distribution(np.full(n, 1.0 / n))
            kl = kl_divergence(U, reconstruct(quantize(U, QuantizerParams(1.0, eps, n))))
            uniform_err = max(uniform_err, abs(kl - eps / 2))
    runtime = time.perf_counter() - t0
    ok = failures == 0 and t_over == 0 and uniform_err <= 1e-9 and runtime < 60
    record("3", ok, f"{checks} (P, c, eps) checks, {failures} bound failures (max KL - bound {worst:.3g}), "
                    f"{t_over} t-overflows, uniform |KL - eps/2| <= {uniform_err:.2g}, {runtime:.1f} s")
    assert ok


# --- 4 -------------------------------------------------------------------------------


def _fast_markov(n: int, m: int, ell: int, rng: np.random.Generator, conc: float) -> Sequence:
    """Order-ell chain with lazily drawn Dirichlet conditionals; bisect on cumulative lists."""
    u = rng.random(m).tolist()
    s = rng.integers(0, n, size=ell).tolist()
    cdf: dict = {}
    for i in range(ell, m):
        ctx = tuple(s[i - ell:i])
        row = cdf.get(ctx)
        if row is None:
            row = cdf[ctx] = np.cumsum(rng.dirichlet(np.full(n, conc))).tolist()
        s.append(min(bisect.bisect_right(row, u[i]), n - 1))
    return Sequence(s[:m], n)


def _fuzz_string(rng: np.random.Generator, max_n: int, max_m: int, max_ell: int) -> tuple[Sequence, int]:
    n = int(rng.integers(1, max_n + 1))
    ell = int(rng.integers(0, max_ell + 1))
    m = int(np.exp(rng.uniform(math.log(ell + 1), math.log(max_m))))
    if rng.random() < 0.05:
        m = max_m
    src = rng.integers(3)
    if src == 0:
        S = random_string(n, m, seed=int(rng.integers(2 ** 32)))
    elif src == 1:
        S = _fast_markov(n, m, ell, rng, float(rng.choice([0.05, 0.3, 1.0])))
    else:
        w = 1.0 / np.arange(1, n + 1) ** rng.uniform(0.5, 2.0)
        S = Sequence(rng.choice(n, size=m, p=w / w.sum()), n)
    return S, ell


def _perturbed_information(S: Sequence, ell: int, rng: np.random.Generator) -> float:
    """Self-information of S under a random perturbation of its empirical model."""
    table = count_contexts(S, ell)
    tot = table.totals[table.pair_context].astype(np.float64)
    p = table.counts / tot
    kind = rng.integers(3)
    if kind == 0:
        lam = rng.uniform(1e-4, 1.0)
        noise = rng.gamma(rng.uniform(0.1, 2.0), size=(len(table), S.n))
        noise /= noise.sum(axis=1, keepdims=True)
        q = (1 - lam) * p + lam * noise[table.pair_context, table.followers]
    elif kind == 1:
        beta = rng.uniform(0.5, 1.5)
        w = p ** beta
        sums = np.add.reduceat(w, table.ptr[:-1])
        q = w / sums[table.pair_context]
    else:
        q = p.copy()
        for k in rng.choice(len(table), size=min(len(table), 20), replace=False):
            a, b = table.ptr[k], table.ptr[k + 1]
            if b - a >= 2:
                i, j = rng.choice(np.arange(a, b), 2, replace=False)
                delta = rng.uniform(0, q[i])
                q[i] -= delta
                q[j] += delta
    with np.errstate(divide="ignore"):
        return math.fsum((table.counts * -np.log2(q)).tolist())


def test_criterion_4_empirical_model_is_optimal(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_eq = 0.0
    worst_gain = -math.inf
    dense_checked = 0
    for i in range(1000):
        S, ell = _fuzz_string(rng, 64, 10_000, 3)
        target = S.m * empirical_entropy(S, ell)
        si = model_self_information(count_table(S, ell), S)
        worst_eq = max(worst_eq, abs(si - target) / S.m)
        if i % 10 == 0 and S.m <= 3000:
            dense = self_information(empirical_markov_model(S, ell), S)
            worst_eq = max(worst_eq, abs(dense - target) / S.m)
            dense_checked += 1
        worst_gain = max(worst_gain, (target - _perturbed_information(S, ell, rng)) / S.m)
    runtime = time.perf_counter() - t0
    ok = worst_eq <= 1e-6 and worst_gain <= 1e-6 and runtime < 60
    record("4", ok, f"max |SI - mH|/m = {worst_eq:.2g} ({dense_checked} also via dense model), "
                    f"best perturbed gain per symbol {worst_gain:.2g}, {runtime:.1f} s")
    assert ok


# --- 5 and 7b ------------------------------------------------------------------------

END_TO_END = [(4, 1, 1.0, 0.2, 1 << 20), (16, 1, 2.0, 0.5, 1 << 21)]


@pytest.fixture(scope="module")
def end_to_end():
    t0 = time.perf_counter()
    rows = []
    for n, ell, c, eps, m in END_TO_END:
        for trial in range(20):
            S = random_string(n, m, seed=(5, n, trial))
            data = compress(S, ell, c, eps).to_bytes()
            budget = (c * empirical_entropy(S, ell) + eps) * m
            rows.append({"n": n, "bits": 8 * len(data), "budget": budget, "lossless": decompress(data) == S})
    return rows, time.perf_counter() - t0


def test_criterion_5_end_to_end(end_to_end, record):
    rows, runtime = end_to_end
    met = sum(r["bits"] < r["budget"] for r in rows)
    lossless = sum(r["lossless"] for r in rows)
    slack = min(1 - r["bits"] / r["budget"] for r in rows)
    ok = met == len(rows) and lossless == len(rows) and runtime < 120
    record("5", ok, f"{met}/{len(rows)} under budget (min slack {slack:.2%}), {lossless}/{len(rows)} lossless, "
                    f"{runtime:.1f} s")
    assert ok


# --- 6 -------------------------------------------------------------------------------


def test_criterion_6_coder_tightness(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = -math.inf
    bad = 0
    for _ in range(1000):
        S, ell = _fuzz_string(rng, 300, 20_000, 3)
        if S.n ** (ell + 1) > 1 << 40:
            ell = 1
        mode = "quantized" if rng.random() < 0.7 else "exact_table"
        c = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        eps = float(rng.choice([0.1, 0.5, 1.0]))
        cont = compress(S, ell, c, eps, mode)
        si = model_self_information(cont.model, S)
        limit = math.ceil(si) + 2 + 0.01 * S.m
        worst = max(worst, cont.payload.nbits - limit)
        bad += cont.payload.nbits > limit
    runtime = time.perf_counter() - t0
    ok = bad == 0 and runtime < 60
    record("6", ok, f"{bad}/1000 over ceil(SI) + 2 + 0.01 m (closest margin {-worst:.1f} bits), {runtime:.1f} s")
    assert ok


# --- 7 -------------------------------------------------------------------------------


def test_criterion_7_threshold_phenomenon(end_to_end, record):
    t0 = time.perf_counter()
    # (a) birthday regime
    cfg = ExperimentConfig.from_dict(dict(m_values=[1000], n_values=[10 ** 8], order=1, c=1.0, eps=0.5,
                                          trials=200, seed=7))
    row = threshold_experiment(cfg).points[0]
    p0 = row["birthday_no_collision"]
    sigma = math.sqrt(p0 * (1 - p0) / 200)
    frac = row["frac_zero_entropy"]
    ok_a = frac >= 0.95 and abs(frac - p0) <= 4 * sigma
    record("7a", ok_a, f"fraction with H_1 = 0: {frac:.3f}, prediction {p0:.5f} +- 4 x {sigma:.4f}")

    # (b) dense regime: the n = 4 runs of the end-to-end check
    rows, _ = end_to_end
    dense = [r for r in rows if r["n"] == 4]
    ok_b = all(r["bits"] < r["budget"] and r["lossless"] for r in dense)
    record("7b", ok_b, f"n=4, m=2^20: {sum(r['bits'] < r['budget'] for r in dense)}/{len(dense)} under budget")

    # (c) crossover sweep
    sweep = ExperimentConfig.from_dict(dict(
        m_values=[1 << 14], n_values=[8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096], order=1, c=1.0, eps=0.5,
        trials=3, seed=17, codec=True, verify_roundtrip=True))
    rep = threshold_experiment(sweep, workers=4)
    budget = crossover_trend(rep, "budget_ratio")
    codec = crossover_trend(rep, "codec_ratio")
    roundtrip = all(r["roundtrip_ok"] for r in rep.points)
    ok_c = (budget["spearman"] > 0.9 and budget["crosses"] and codec["spearman"] > 0.9 and codec["crosses"]
            and roundtrip)
    runtime = time.perf_counter() - t0
    ratios = [round(r["ratio"], 3) for r in rep.points]
    record("7c", ok_c and runtime < 600,
           f"ratio {ratios[0]}..{ratios[-1]}: Spearman(ratio, incompressible/entropy budget) = "
           f"{budget['spearman']:.3f} crosses 1: {budget['crosses']}; Spearman(ratio, achieved/entropy budget) = "
           f"{codec['spearman']:.3f} crosses 1: {codec['crosses']}; {runtime:.1f} s")
    assert ok_a and ok_b and ok_c and runtime < 600


# --- 8 -------------------------------------------------------------------------------


def test_criterion_8_dominance(record):
    t0 = time.perf_counter()
    details = []
    ok = True
    for alpha in ((0, 0), (0, 1)):
        res = dominance_experiment(alpha, n=2, m=64, trials=100_000, seed=8)
        ks = [g["k"] for g in res["grid"] if g["violation"]]
        isolated = all(b - a > 1 for a, b in zip(ks, ks[1:]))
        ok &= len(ks) <= 2 and isolated
        details.append(f"alpha={''.join(map(str, alpha))}: {len(ks)} violations at k={ks}, "
                       f"mean X {res['x_mean']:.3f} vs Y {res['y_mean']:.3f}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 120
    record("8", ok, "; ".join(details) + f"; {runtime:.1f} s")
    assert ok


# --- 9 -------------------------------------------------------------------------------


def test_criterion_9_chernoff(record):
    t0 = time.perf_counter()
    res = chernoff_check(0.01, 100, 6, samples=1_000_000, seed=9)
    lo, hi = wilson_interval(round(res["empirical"] * res["samples"]), res["samples"], 0.999)
    exact = float(stats.binom.sf(5, 100, 0.01))
    runtime = time.perf_counter() - t0
    ok = (res["empirical"] <= 2.0 ** -6 and res["bound"] == 2.0 ** -6 and lo <= exact <= hi
          and exact <= 2.0 ** -6 and runtime < 5)
    record("9", ok, f"empirical {res['empirical']:.3e} (99.9% CI {lo:.3e}..{hi:.3e}), exact {exact:.3e}, "
                    f"bound {2.0 ** -6:.3e}, {runtime:.2f} s")
    assert ok


# --- 10 ------------------------------------------------------------------------------


def _generator_bytes() -> bytes:
    parts = [
        random_string(1000, 5000, seed=(10, 1)),
        random_de_bruijn(3, 5, seed=10),
        champernowne_digits(7, 3000),
        copeland_erdos_digits(10, 3000),
        *enumerate_de_bruijn(3, 2),
    ]
    return b"".join(sequence_bytes(S) for S in parts)


def _container_bytes() -> bytes:
    S = random_string(32, 20_000, seed=(10, 2))
    return b"".join(compress(S, ell, 1.5, 0.4, mode).to_bytes() for ell in (0, 1, 2)
                    for mode in ("quantized", "exact_table"))


def test_criterion_10_determinism(record):
    cfg = ExperimentConfig.from_dict(dict(m_values=[4096], n_values=[4, 64, 1024], order=1, c=1.0, eps=0.5,
                                          trials=6, seed=10, codec=True, verify_roundtrip=True))
    checks = {
        "generators": _generator_bytes() == _generator_bytes(),
        "containers": _container_bytes() == _container_bytes(),
        "experiment workers 1 vs 8": threshold_experiment(cfg, workers=1).to_json()
        == threshold_experiment(cfg, workers=8).to_json(),
        "experiment rerun": threshold_experiment(cfg, workers=8).to_csv()
        == threshold_experiment(cfg, workers=8).to_csv(),
        "dominance rerun": dominance_experiment((0, 0), trials=20_000, seed=3)
        == dominance_experiment((0, 0), trials=20_000, seed=3),
    }
    ok = all(checks.values())
    record("10", ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in checks.items()))
    assert ok
