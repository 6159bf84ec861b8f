"""Monte Carlo experiments around the incompressibility threshold.

For random strings over a large alphabet, ``c H_ell(S) + eps`` stops being an
upper bound on the per-symbol complexity roughly when ``n**(ell + 1/c)``
overtakes ``m``.  This module measures the quantities that drive that
behaviour: birthday collisions, the counting bound on compressible strings,
the largest number of distinct followers of any context, a Chernoff tail
bound and the dominance of the overlap-suppressed occurrence process by
independent coin flips.  Every trial draws from its own Philox substream
keyed by ``(seed, point, trial)`` so reports are identical for any worker
count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from ._rng import make_rng
from .dist_quantizer import QuantizerParams, quantize, storage_bits
from .entropy_core import Distribution, Sequence, count_contexts, empirical_entropy
from .generators import random_string
from .markov_codec import compress, decompress

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "birthday_collision_prob",
    "birthday_exact_prob",
    "birthday_monte_carlo",
    "chernoff_check",
    "chernoff_tail_bound",
    "crossover_trend",
    "dominance_experiment",
    "follower_event_bound",
    "follower_threshold",
    "incompressible_fraction_bound",
    "max_distinct_followers",
    "occurrence_indicators",
    "quantizer_scaling",
    "short_string_count",
    "threshold_experiment",
    "wilson_interval",
]

REPORT_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# --- closed forms ---------------------------------------------------------------


def birthday_collision_prob(n: int, m: int) -> float:
    """Approximate Pr[some value repeats in m uniform draws from n]: 1 - exp(-m(m-1)/(2n))."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    return -math.expm1(-m * (m - 1) / (2.0 * n))


def birthday_exact_prob(n: int, m: int) -> float:
    """Exact collision probability 1 - prod_{i<m} (1 - i/n)."""
    if m > n:
        return 1.0
    i = np.arange(m, dtype=np.float64)
    return -math.expm1(math.fsum(np.log1p(-i / n).tolist()))


def birthday_monte_carlo(n: int, m: int, trials: int, seed=0) -> float:
    """Fraction of trials in which m uniform draws contain a repeat."""
    key = tuple(int(x) for x in seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    hits = 0
    for t in range(trials):
        draws = make_rng((*key, t)).integers(0, n, size=m)
        hits += np.unique(draws).size < m
    return hits / trials


def short_string_count(max_len: float) -> int:
    """Number of binary strings of length at most ``max_len``: 2**(L+1) - 1."""
    L = math.floor(max_len)
    return (1 << (L + 1)) - 1 if L >= 0 else 0


def incompressible_fraction_bound(n: int, m: int, eps: float) -> float:
    """Lower bound max(0, 1 - 2/n**(eps m/3)) on Pr[K(S) >= (1 - eps/3) m log2 n]."""
    if n < 2 or m < 1 or eps <= 0:
        raise ValueError("need n >= 2, m >= 1, eps > 0")
    log_term = 1.0 - eps * m * math.log2(n) / 3.0  # log2 of 2/n**(eps m/3)
    return max(0.0, 1.0 - 2.0 ** log_term)


def follower_threshold(n: int, order: int, c: float, eps: float) -> float:
    """Level n**(1/c - 2 eps/3) - ell that the follower count must stay below."""
    return n ** (1.0 / c - 2.0 * eps / 3.0) - order


def follower_event_bound(n: int, order: int, eps: float) -> float:
    """Union bound n**ell / 2**(n**(eps/3) - ell) on the bad follower event (may exceed 1)."""
    expo = order * math.log2(n) - (n ** (eps / 3.0) - order)
    return 2.0 ** expo if expo < 1000 else math.inf


def max_distinct_followers(S: Sequence, order: int, exclude_context_symbols: bool = False) -> int:
    """Largest number of distinct followers of any context of length ``order``.

    With ``exclude_context_symbols`` a follower that also appears inside the
    context is not counted.
    """
    if S.m < order + 1:
        raise ValueError("need m >= order + 1")
    table = count_contexts(S, order)
    if not exclude_context_symbols or order == 0:
        return int(np.diff(table.ptr).max())
    in_ctx = np.any(table.contexts[table.pair_context] == table.followers[:, None], axis=1)
    kept = (~in_ctx).astype(np.int64)
    csum = np.r_[0, np.cumsum(kept)]
    return int((csum[table.ptr[1:]] - csum[table.ptr[:-1]]).max())


def chernoff_tail_bound(p: float, q: float, trials: int):
    """``2**(-q*trials)`` bounding Pr[Binomial(trials, p) >= q*trials]; ``None``
    when the bound does not apply (q < 6p)."""
    if not (0.0 <= p <= q <= 1.0):
        raise ValueError("need 0 <= p <= q <= 1")
    if q < 6.0 * p:
        return None
    return 2.0 ** (-q * trials)


def chernoff_check(p: float = 0.01, trials: int = 100, k: int = 6, samples: int = 200_000, seed=0) -> dict:
    """Empirical and exact Pr[Binomial(trials, p) >= k] next to the Chernoff bound."""
    draws = make_rng(seed).binomial(trials, p, size=samples)
    hits = int(np.count_nonzero(draws >= k))
    exact = float(stats.binom.sf(k - 1, trials, p))
    return {
        "p": p,
        "trials": trials,
        "k": k,
        "samples": samples,
        "empirical": hits / samples,
        "empirical_ci": wilson_interval(hits, samples),
        "exact": exact,
        "bound": chernoff_tail_bound(p, k / trials, trials),
    }


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(successes), int(total)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


# --- dominance of the occurrence process ---------------------------------------------


def occurrence_indicators(strings: np.ndarray, alpha) -> np.ndarray:
    """X_i = 1 iff the window at i equals ``alpha`` and the next symbol is not in alpha.

    ``strings`` has shape (trials, m); the result has shape (trials, m - ell).
    """
    a = np.asarray(alpha, dtype=np.int64)
    ell = a.size
    m = strings.shape[1]
    width = m - ell
    hit = np.ones((strings.shape[0], width), dtype=bool)
    for j in range(ell):
        hit &= strings[:, j: j + width] == a[j]
    hit &= ~np.isin(strings[:, ell: ell + width], a)
    return hit


def dominance_experiment(alpha, n: int = 2, m: int = 64, trials: int = 100_000, seed=0,
                         p: float | None = None, thresholds=None, chunk: int = 20_000) -> dict:
    """Compare tails of sum(X) against sum(Y), Y_i i.i.d. Bernoulli(p).

    ``p`` defaults to 1/(n**ell - ell), the bound on Pr[X_i = 1 | history]
    for the occurrence process.  A grid point is a ``violation`` when the
    X-tail exceeds the Wilson upper limit of the Y-tail, and a
    ``separated`` violation when the two Wilson intervals do not overlap.
    """
    alpha = tuple(int(x) for x in alpha)
    ell = len(alpha)
    if ell < 1 or any(not 0 <= x < n for x in alpha):
        raise ValueError("alpha must be a non-empty tuple over the alphabet")
    width = m - ell
    if p is None:
        p = 1.0 / (n ** ell - ell) if n ** ell > ell else 1.0
    xs = np.empty(trials, dtype=np.int64)
    ys = np.empty(trials, dtype=np.int64)
    done = 0
    block = 0
    while done < trials:
        size = min(chunk, trials - done)
        rng = make_rng((int(seed), block))
        strings = rng.integers(0, n, size=(size, m))
        xs[done: done + size] = occurrence_indicators(strings, alpha).sum(axis=1)
        ys[done: done + size] = rng.binomial(width, p, size=size)
        done += size
        block += 1
    if thresholds is None:
        thresholds = range(1, width + 1)
    grid = []
    for k in thresholds:
        kx = int(np.count_nonzero(xs >= k))
        ky = int(np.count_nonzero(ys >= k))
        x_ci = wilson_interval(kx, trials)
        y_ci = wilson_interval(ky, trials)
        grid.append({
            "k": int(k),
            "q": k / width,
            "x_tail": kx / trials,
            "y_tail": ky / trials,
            "x_ci": x_ci,
            "y_ci": y_ci,
            "violation": kx / trials > y_ci[1],
            "separated": x_ci[0] > y_ci[1],
        })
    return {
        "alpha": list(alpha),
        "n": n,
        "m": m,
        "trials": trials,
        "p": p,
        "x_mean": float(xs.mean()),
        "y_mean": float(ys.mean()),
        "grid": grid,
        "violations": sum(g["violation"] for g in grid),
        "separated_violations": sum(g["separated"] for g in grid),
    }


# --- threshold sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    m_values: tuple
    order: int = 1
    c: float = 1.0
    eps: float = 0.5
    trials: int = 10
    seed: int = 0
    n_values: tuple | None = None
    n_rule: str | None = None
    ratios: tuple | None = None
    mode: str = "strict"
    codec: bool = False
    verify_roundtrip: bool = False
    memory_budget: int = 1 << 31
    include_timing: bool = False

    @property
    def points(self) -> list[tuple[int, int]]:
        """(n, m) pairs in schedule order."""
        out = []
        for m in self.m_values:
            if self.n_values is not None:
                ns = list(self.n_values)
            elif self.ratios is not None:
                expo = 1.0 / (self.order + 1.0 / self.c)
                ns = [max(2, round((rho * m) ** expo)) for rho in self.ratios]
            else:
                expo = 1.0 / (self.order + 1.0 / self.c - self.eps)
                ns = [max(2, math.ceil(m ** expo))]
            out.extend((int(n), int(m)) for n in ns)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"kind"}
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown field")
        if "m_values" not in d:
            raise ConfigError("m_values", "required")
        kw = dict(d)
        kw.pop("kind", None)
        for key in ("m_values", "n_values", "ratios"):
            if kw.get(key) is not None:
                if not isinstance(kw[key], (list, tuple)) or not kw[key]:
                    raise ConfigError(key, "must be a non-empty list")
                kw[key] = tuple(kw[key])
        try:
            cfg = cls(**kw)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if int(self.trials) < 1:
            raise ConfigError("trials", "must be >= 1")
        if not self.m_values or any(int(m) < 1 for m in self.m_values):
            raise ConfigError("m_values", "must be a non-empty list of positive integers")
        if self.n_values is not None and any(int(n) < 1 for n in self.n_values):
            raise ConfigError("n_values", "must be positive")
        if sum(x is not None for x in (self.n_values, self.ratios, self.n_rule)) > 1:
            raise ConfigError("n_values", "give only one of n_values, ratios, n_rule")
        if self.n_rule not in (None, "sparse_boundary"):
            raise ConfigError("n_rule", "only 'sparse_boundary' is supported")
        if self.order < 0:
            raise ConfigError("order", "must be >= 0")
        if self.c < 1:
            raise ConfigError("c", "must be >= 1")
        if self.eps <= 0:
            raise ConfigError("eps", "must be > 0")
        if self.mode not in ("strict", "report"):
            raise ConfigError("mode", "must be 'strict' or 'report'")
        if self.mode == "strict":
            if not self.eps < 1.0 / self.c:
                raise ConfigError("eps", "strict mode needs 0 < eps < 1/c")
            if self.order < 1:
                raise ConfigError("order", "strict mode needs order >= 1")
        if self.n_rule == "sparse_boundary" and self.order + 1.0 / self.c - self.eps <= 0:
            raise ConfigError("n_rule", "exponent ell + 1/c - eps must be positive")


FORMULAS = {
    "ratio": "n**(ell + 1/c) / m",
    "birthday_no_collision": "exp(-m(m-1)/(2n))",
    "incompressible_bound": "max(0, 1 - 2/n**(eps*m/3))",
    "incompressible_budget_bits": "(1 - eps/3) * m * log2(n)",
    "entropy_budget_bits": "mean over trials of (c*H_ell(S) + eps) * m",
    "entropy_cap": "(1 - 2*eps/3) * log2(n)",
    "follower_threshold": "n**(1/c - 2*eps/3) - ell",
    "follower_event_bound": "n**ell / 2**(n**(eps/3) - ell)",
    "budget_ratio": "incompressible_budget_bits / entropy_budget_bits",
    "codec_ratio": "codec_bits_mean / entropy_budget_bits",
}


@dataclass
class ExperimentReport:
    config: dict
    points: list = field(default_factory=list)
    schema_version: int = REPORT_SCHEMA_VERSION
    kind: str = "threshold"
    formulas: dict = field(default_factory=lambda: dict(FORMULAS))
    summary: dict = field(default_factory=dict)
    package_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        cols = sorted({k for p in self.points for k in p})
        buf = io.StringIO()
        buf.write(f"# schema_version={self.schema_version} kind={self.kind} seed={self.config.get('seed')}"
                  f" config={json.dumps(self.config, sort_keys=True)}\n")
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for p in self.points:
            w.writerow({k: p.get(k, "") for k in cols})
        return buf.getvalue()


def _estimated_bytes(n: int, m: int, order: int) -> int:
    # windows, keys, sort scratch and CSR arrays, roughly 8 int64 per window
    return 64 * m * (order + 2)


def _trial(cfg: ExperimentConfig, point: int, trial: int, n: int, m: int) -> dict:
    ell, c, eps = cfg.order, cfg.c, cfg.eps
    S = random_string(n, m, (cfg.seed, point, trial))
    h = empirical_entropy(S, ell) if m >= max(ell, 1) else 0.0
    out = {"trial": trial, "entropy": h, "collision": bool(np.unique(S.symbols).size < m)}
    if m >= ell + 1:
        table = count_contexts(S, ell)
        distinct = np.diff(table.ptr)
        f_all = int(distinct.max())
        f_excl = max_distinct_followers(S, ell, True) if ell else f_all
        # H_ell <= max log2 |{a in S_alpha}| <= max log2(|{a in S_alpha, a not in alpha}| + ell)
        cap1 = math.log2(f_all)
        cap2 = math.log2(f_excl + ell) if f_excl + ell > 0 else 0.0
        out.update(
            max_followers=f_all,
            max_followers_excl=f_excl,
            chain_ok=bool(h <= cap1 + 1e-9 and cap1 <= cap2 + 1e-9),
            follower_event=bool(f_excl >= follower_threshold(n, ell, c, eps)),
        )
        if cfg.codec:
            cont = compress(S, ell, c, eps)
            bits = cont.total_bits
            out["codec_bits"] = bits
            out["codec_budget_met"] = bool(bits < (c * h + eps) * m)
            if cfg.verify_roundtrip:
                out["roundtrip_ok"] = bool(decompress(cont.to_bytes()) == S)
    return out


def _run_chunk(args):
    cfg, tasks = args
    return [(p, t, _trial(cfg, p, t, n, m)) for p, t, n, m in tasks]


def _aggregate(cfg: ExperimentConfig, n: int, m: int, trials: list[dict]) -> dict:
    ell, c, eps = cfg.order, cfg.c, cfg.eps
    T = len(trials)
    hs = [t["entropy"] for t in trials]
    log_n = math.log2(n) if n > 1 else 0.0
    ent_budget = math.fsum((c * h + eps) * m for h in hs) / T
    inc_budget = (1.0 - eps / 3.0) * m * log_n
    row = {
        "n": n,
        "m": m,
        "order": ell,
        "trials": T,
        "ratio": n ** (ell + 1.0 / c) / m,
        "regime": _regime(cfg, n, m),
        "entropy_mean": math.fsum(hs) / T,
        "entropy_max": max(hs),
        "entropy_min": min(hs),
        "log2_n": log_n,
        "frac_zero_entropy": sum(h == 0.0 for h in hs) / T,
        "frac_entropy_below_cap": sum(c * h < (1 - 2 * eps / 3) * log_n for h in hs) / T,
        "entropy_cap": (1 - 2 * eps / 3) * log_n,
        "frac_collision": sum(t["collision"] for t in trials) / T,
        "birthday_no_collision": math.exp(-m * (m - 1) / (2.0 * n)),
        "incompressible_bound": incompressible_fraction_bound(n, m, eps) if n >= 2 else 0.0,
        "incompressible_budget_bits": inc_budget,
        "entropy_budget_bits": ent_budget,
        "budget_ratio": inc_budget / ent_budget,
    }
    if "max_followers" in trials[0]:
        bound = follower_event_bound(n, ell, eps)
        row.update(
            max_followers_mean=math.fsum(t["max_followers"] for t in trials) / T,
            max_followers_max=max(t["max_followers"] for t in trials),
            max_followers_excl_max=max(t["max_followers_excl"] for t in trials),
            follower_threshold=follower_threshold(n, ell, c, eps),
            frac_follower_event=sum(t["follower_event"] for t in trials) / T,
            follower_event_bound=min(bound, 1e300),
            bound_asserted=bool(bound < 0.5),
            chain_ok=all(t["chain_ok"] for t in trials),
        )
    if cfg.codec and "codec_bits" in trials[0]:
        mean_bits = math.fsum(t["codec_bits"] for t in trials) / T
        row.update(
            codec_bits_mean=mean_bits,
            codec_bits_max=max(t["codec_bits"] for t in trials),
            codec_budget_met_frac=sum(t["codec_budget_met"] for t in trials) / T,
            codec_ratio=mean_bits / ent_budget,
        )
        if cfg.verify_roundtrip:
            row["roundtrip_ok"] = all(t["roundtrip_ok"] for t in trials)
    return row


def _regime(cfg: ExperimentConfig, n: int, m: int) -> str:
    ell, c, eps = cfg.order, cfg.c, cfg.eps
    if n ** (ell + 1.0 / c) * max(math.log2(n), 1.0) <= m / 64.0:
        return "dense"
    if n ** (ell + 1.0 / c - eps) >= m:
        return "sparse"
    return "transition"


def threshold_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Sample ``trials`` random strings at every (n, m) point and tabulate."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    config.validate()
    pts = config.points
    tasks = []
    skipped = {}
    for p, (n, m) in enumerate(pts):
        if _estimated_bytes(n, m, config.order) > config.memory_budget:
            skipped[p] = True
            continue
        tasks.extend((p, t, n, m) for t in range(config.trials))

    started = time.perf_counter()
    results: dict[int, list] = {p: [] for p in range(len(pts))}
    if workers <= 1 or len(tasks) <= 1:
        for p, t, tr in _run_chunk((config, tasks)):
            results[p].append((t, tr))
    else:
        size = max(1, math.ceil(len(tasks) / (4 * workers)))
        chunks = [(config, tasks[i: i + size]) for i in range(0, len(tasks), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_run_chunk, chunks):
                for p, t, tr in batch:
                    results[p].append((t, tr))

    rows = []
    for p, (n, m) in enumerate(pts):
        if p in skipped:
            rows.append({"n": n, "m": m, "order": config.order, "skipped": "memory budget"})
            continue
        trials = [tr for _, tr in sorted(results[p], key=lambda x: x[0])]
        rows.append(_aggregate(config, n, m, trials))
    cfg_dict = asdict(config)
    report = ExperimentReport(config=cfg_dict, points=rows)
    for column in ("budget_ratio", "codec_ratio"):
        if sum(column in r for r in rows) > 2:
            report.summary[column] = crossover_trend(report, column)
    if config.include_timing:
        report.config["runtime_seconds"] = time.perf_counter() - started
    return report


def crossover_trend(report: ExperimentReport, column: str = "budget_ratio") -> dict:
    """Spearman correlation of ``ratio`` against ``column`` (``None`` when undefined)
    and whether the column crosses 1."""
    rows = [r for r in report.points if column in r]
    x = [r["ratio"] for r in rows]
    y = [r[column] for r in rows]
    rho = float(stats.spearmanr(x, y).statistic) if len(rows) > 2 else math.nan
    if not math.isfinite(rho):
        rho = None  # too few points or a constant column
    return {
        "column": column,
        "spearman": rho,
        "crosses": bool(min(y) < 1.0 < max(y)) if y else False,
        "points": len(rows),
    }


def quantizer_scaling(ns=tuple(2 ** k for k in range(8, 21, 2)), c: float = 2.0, eps: float = 0.1,
                      seed=0) -> dict:
    """Stored size of quantized distributions with about r*n**(1/c) heavy entries.

    Each P puts 3/4 of its mass on ``floor(r n**(1/c) / 2)`` heavy symbols
    (every one above the recording threshold) and spreads the rest thinly.
    ``slope`` is the least-squares exponent of bits against n on log-log axes,
    to be read against ``1/c - eps``.
    """
    rows = []
    for i, n in enumerate(ns):
        params = QuantizerParams(c, eps, n)
        rng = make_rng((int(seed), i))
        k = max(1, min(n - 1, int(params.r * n ** (1.0 / c) / 2)))
        thr = params.threshold
        w = thr + (0.75 - k * thr) * rng.dirichlet(np.ones(k))
        p = np.full(n, (1.0 - w.sum()) / (n - k))
        p[rng.choice(n, size=k, replace=False)] = w
        qd = quantize(Distribution(p / p.sum()), params)
        bits = storage_bits(qd)
        rows.append({"n": n, "t": qd.t, "bits": bits, "bits_over_n_pow": bits / n ** (1.0 / c - eps)})
    slope = float(np.polyfit(np.log2([r["n"] for r in rows]), np.log2([r["bits"] for r in rows]), 1)[0])
    return {"c": c, "eps": eps, "target_exponent": 1.0 / c - eps, "slope": slope, "rows": rows}
