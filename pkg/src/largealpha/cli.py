"""Command-line interface.

Subcommands: ``entropy``, ``compress``, ``decompress``, ``gen`` and
``experiment``.  Exit codes are a stable contract: 0 success, 1 usage error,
2 I/O error, 3 data or format error.  ``--format json`` output follows the
schemas in :mod:`largealpha.schemas`.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._wire import FormatError
from .entropy_core import Sequence, entropy_profile
from .generators import (
    ResourceLimitError,
    champernowne_digits,
    copeland_erdos_digits,
    enumerate_de_bruijn,
    random_de_bruijn,
    random_string,
)
from .markov_codec import (
    MODES,
    CodecError,
    CompressedContainer,
    compress,
    compression_stats,
    decompress,
)
from .schemas import SCHEMA_VERSION
from .seqio import parse_sequences, sequence_bytes
from .threshold_lab import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    birthday_collision_prob,
    birthday_exact_prob,
    birthday_monte_carlo,
    chernoff_check,
    dominance_experiment,
    quantizer_scaling,
    threshold_experiment,
    wilson_interval,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _load_sequence(data: bytes, mode: str) -> tuple[Sequence, list | None]:
    if mode == "raw":
        return Sequence(np.frombuffer(data, dtype=np.uint8).astype(np.int64), 256), None
    if mode == "text":
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"input is not valid UTF-8: {exc}") from None
        S = Sequence.from_text(text)
        return S, list(S.labels or ())
    seqs = parse_sequences(data)
    if len(seqs) != 1:
        raise FormatError(f"expected one sequence record, found {len(seqs)}")
    return seqs[0], None


def _emit(payload: dict, fmt: str, text_lines: list[str], csv_rows: list[dict] | None = None) -> None:
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True))
    elif fmt == "csv":
        rows = csv_rows if csv_rows is not None else [
            {k: v for k, v in payload.items() if not isinstance(v, (list, dict))}
        ]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        print("\n".join(text_lines))


# --- entropy ----------------------------------------------------------------------


def cmd_entropy(args) -> int:
    if args.text is not None:
        if args.input is not None:
            raise UsageError("give either an input file or --text, not both")
        S = Sequence.from_text(args.text)
        mapping = list(S.labels or ())
        mode = "text"
    else:
        if args.input is None:
            raise UsageError("an input file or --text is required")
        S, mapping = _load_sequence(_read_bytes(args.input), args.mode)
        mode = args.mode
    if S.m == 0:
        raise FormatError("input is empty")
    if args.lmax < 0:
        raise UsageError("--lmax must be non-negative")
    top = min(args.lmax, S.m - 1)
    prof = entropy_profile(S, top)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "entropy",
        "input_mode": mode,
        "n": S.n,
        "m": S.m,
        "distinct": S.distinct(),
        "max_order": top,
        "profile": [{"order": k, "entropy": h} for k, h in enumerate(prof)],
        "mapping": mapping,
    }
    lines = [f"n={S.n} m={S.m} distinct={S.distinct()}"]
    if mapping is not None:
        lines.append("mapping: " + " ".join(f"{json.dumps(c)}={i}" for i, c in enumerate(mapping)))
    lines += [f"H_{k} = {h:.10g}" for k, h in enumerate(prof)]
    _emit(payload, args.format, lines, [{"order": k, "entropy": repr(h)} for k, h in enumerate(prof)])
    return EXIT_OK


# --- compress / decompress ----------------------------------------------------------


def cmd_compress(args) -> int:
    S, _ = _load_sequence(_read_bytes(args.input), args.input_mode)
    if S.m < args.order + 1:
        raise FormatError(f"input has {S.m} symbols; order {args.order} needs at least {args.order + 1}")
    cont = compress(S, args.order, args.c, args.eps, args.mode)
    _write_bytes(args.output, cont.to_bytes())
    stats = compression_stats(S, cont)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "compress",
        "output": str(args.output),
        "input_mode": args.input_mode,
        "stats": stats,
    }
    line = (f"n={S.n} m={S.m} order={cont.order} mode={cont.mode} H={stats['entropy']:.6f} "
            f"model_bits={stats['model_bits']} payload_bits={stats['payload_bits']} "
            f"total_bits={stats['total_bits']} budget_bits={stats['budget_bits']:.1f} "
            f"budget_met={'yes' if stats['budget_met'] else 'no'}")
    _emit(payload, args.format, [line], [stats])
    return EXIT_OK


def cmd_decompress(args) -> int:
    cont = CompressedContainer.from_bytes(_read_bytes(args.input))
    S = decompress(cont)
    if args.output_mode == "raw":
        if S.n > 256:
            raise FormatError(f"alphabet of size {S.n} cannot be written as raw bytes; use --output-mode seq")
        data = S.symbols.astype(np.uint8).tobytes()
    else:
        data = sequence_bytes(S)
    _write_bytes(args.output, data)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "decompress",
        "output": str(args.output),
        "output_mode": args.output_mode,
        "n": S.n,
        "m": S.m,
        "order": cont.order,
        "mode": cont.mode,
    }
    _emit(payload, args.format, [f"wrote {S.m} symbols (n={S.n}) to {args.output}"])
    return EXIT_OK


# --- gen ----------------------------------------------------------------------------


def _render(S: Sequence) -> str:
    if S.n <= len(DIGITS):
        return "".join(DIGITS[s] for s in S.symbols.tolist())
    return " ".join(map(str, S.symbols.tolist()))


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "random":
        if args.n is None or args.m is None:
            raise UsageError("random needs -n and -m")
        seqs = [random_string(args.n, args.m, args.seed)]
    elif kind == "debruijn":
        if args.n is None or args.order is None:
            raise UsageError("debruijn needs -n and -l")
        if args.enumerate:
            seqs = enumerate_de_bruijn(args.n, args.order, args.cap)
        else:
            seqs = [random_de_bruijn(args.n, args.order, args.seed)]
    else:
        base = args.base if args.base is not None else (args.n if args.n is not None else 10)
        if args.m is None:
            raise UsageError(f"{kind} needs -m")
        fn = champernowne_digits if kind == "champernowne" else copeland_erdos_digits
        seqs = [fn(base, args.m)]
    if args.output is not None:
        _write_bytes(args.output, b"".join(sequence_bytes(S) for S in seqs))
    n = seqs[0].n if seqs else 0
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "gen",
        "kind": kind,
        "n": n,
        "count": len(seqs),
        "lengths": [S.m for S in seqs],
        "output": None if args.output is None else str(args.output),
    }
    if args.output is None:
        payload["sequences"] = [S.symbols.tolist() for S in seqs]
        lines = [_render(S) for S in seqs]
    else:
        lines = [f"wrote {len(seqs)} sequence(s) to {args.output}"]
    rows = [{"index": i, "n": S.n, "m": S.m} for i, S in enumerate(seqs)]
    _emit(payload, args.format, lines, rows)
    return EXIT_OK


# --- experiment ---------------------------------------------------------------------


def _bundled_config(name: str) -> str | None:
    stem = name if name.endswith(".json") else f"{name}.json"
    ref = resources.files("largealpha").joinpath("configs", stem)
    return ref.read_text() if ref.is_file() else None


def _load_config(path: str) -> dict:
    p = Path(path)
    if p.exists():
        text = p.read_text()
    else:
        text = _bundled_config(p.name)
        if text is None:
            raise FileNotFoundError(f"config file not found: {path}")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError("config", "top level must be an object")
    return d


def _fields(d: dict, fields: dict) -> dict:
    """Check ``d`` against ``{name: (type, default)}``; default ``...`` marks a required field."""
    extra = set(d) - set(fields) - {"kind"}
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    out = {}
    for name, (typ, default) in fields.items():
        if name not in d:
            if default is ...:
                raise ConfigError(name, "required")
            out[name] = default
            continue
        v = d[name]
        ok = isinstance(v, typ) and not (isinstance(v, bool) and typ in (int, (int, float)))
        if not ok:
            raise ConfigError(name, f"expected {getattr(typ, '__name__', 'number')}, got {type(v).__name__}")
        out[name] = v
    return out


def _positive(cfg: dict, *names) -> None:
    for name in names:
        if cfg[name] is not None and cfg[name] <= 0:
            raise ConfigError(name, "must be positive")


def _run_dominance(d: dict) -> ExperimentReport:
    cfg = _fields(d, {"alphas": (list, [[0, 0], [0, 1]]), "n": (int, 2), "m": (int, 64),
                      "trials": (int, 100_000), "seed": (int, 0), "p": ((int, float, type(None)), None)})
    _positive(cfg, "n", "m", "trials", "p")
    rows, summary = [], {}
    for a in cfg["alphas"]:
        if not isinstance(a, list) or not a or any(not isinstance(x, int) or not 0 <= x < cfg["n"] for x in a):
            raise ConfigError("alphas", f"{a!r} is not a non-empty list of symbols below n")
        if len(a) >= cfg["m"]:
            raise ConfigError("alphas", "pattern must be shorter than m")
        res = dominance_experiment(a, cfg["n"], cfg["m"], cfg["trials"], cfg["seed"], cfg["p"])
        label = "".join(map(str, a))
        summary[label] = {k: res[k] for k in ("p", "x_mean", "y_mean", "violations", "separated_violations")}
        for g in res["grid"]:
            rows.append({"alpha": label, "k": g["k"], "q": g["q"], "x_tail": g["x_tail"], "y_tail": g["y_tail"],
                         "x_ci_low": g["x_ci"][0], "x_ci_high": g["x_ci"][1],
                         "y_ci_low": g["y_ci"][0], "y_ci_high": g["y_ci"][1],
                         "violation": bool(g["violation"]), "separated": bool(g["separated"])})
    formulas = {"p": "1 / (n**ell - ell)", "violation": "x_tail > wilson_upper(y_tail)"}
    return ExperimentReport(config=cfg, points=rows, kind="dominance", formulas=formulas, summary=summary)


def _run_birthday(d: dict) -> ExperimentReport:
    cfg = _fields(d, {"points": (list, ...), "trials": (int, 1000), "seed": (int, 0)})
    _positive(cfg, "trials")
    rows = []
    for i, pt in enumerate(cfg["points"]):
        if (not isinstance(pt, list) or len(pt) != 2 or any(not isinstance(x, int) or x < 1 for x in pt)):
            raise ConfigError("points", f"{pt!r} is not an [n, m] pair of positive integers")
        n, m = pt
        mc = birthday_monte_carlo(n, m, cfg["trials"], (cfg["seed"], i))
        lo, hi = wilson_interval(round(mc * cfg["trials"]), cfg["trials"])
        rows.append({"n": n, "m": m, "approx": birthday_collision_prob(n, m), "exact": birthday_exact_prob(n, m),
                     "monte_carlo": mc, "ci_low": lo, "ci_high": hi})
    formulas = {"approx": "1 - exp(-m(m-1)/(2n))", "exact": "1 - prod_{i<m} (1 - i/n)"}
    return ExperimentReport(config=cfg, points=rows, kind="birthday", formulas=formulas)


def _run_chernoff(d: dict) -> ExperimentReport:
    cfg = _fields(d, {"p": ((int, float), 0.01), "trials": (int, 100), "k": (int, 6),
                      "samples": (int, 200_000), "seed": (int, 0)})
    _positive(cfg, "trials", "k", "samples")
    if not 0 <= cfg["p"] <= 1:
        raise ConfigError("p", "must lie in [0, 1]")
    if cfg["k"] > cfg["trials"]:
        raise ConfigError("k", "must not exceed trials")
    res = chernoff_check(cfg["p"], cfg["trials"], cfg["k"], cfg["samples"], cfg["seed"])
    lo, hi = res.pop("empirical_ci")
    res.update(ci_low=lo, ci_high=hi)
    formulas = {"bound": "2**(-q*trials) with q = k/trials, valid when q >= 6p"}
    return ExperimentReport(config=cfg, points=[res], kind="chernoff", formulas=formulas)


def _run_scaling(d: dict) -> ExperimentReport:
    cfg = _fields(d, {"ns": (list, [2 ** k for k in range(8, 21, 2)]), "c": ((int, float), 2.0),
                      "eps": ((int, float), 0.1), "seed": (int, 0)})
    if not cfg["ns"] or any(not isinstance(n, int) or n < 2 for n in cfg["ns"]):
        raise ConfigError("ns", "must be a non-empty list of integers >= 2")
    if cfg["c"] < 1:
        raise ConfigError("c", "must be >= 1")
    _positive(cfg, "eps")
    res = quantizer_scaling(tuple(cfg["ns"]), cfg["c"], cfg["eps"], cfg["seed"])
    summary = {k: res[k] for k in ("slope", "target_exponent")}
    formulas = {"bits_over_n_pow": "bits / n**(1/c - eps)"}
    return ExperimentReport(config=cfg, points=res["rows"], kind="scaling", formulas=formulas, summary=summary)


def cmd_experiment(args) -> int:
    d = _load_config(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.trials is not None:
        d["trials"] = args.trials
    kind = d.get("kind", "threshold")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if kind == "threshold":
        report = threshold_experiment(ExperimentConfig.from_dict(d), workers=args.workers)
    elif kind == "dominance":
        report = _run_dominance(d)
    elif kind == "birthday":
        report = _run_birthday(d)
    elif kind == "chernoff":
        report = _run_chernoff(d)
    elif kind == "scaling":
        report = _run_scaling(d)
    else:
        raise ConfigError("kind", f"unknown experiment kind {kind!r}")
    prefix = Path(args.output) if args.output else Path(Path(args.config).stem + "_report")
    json_path = prefix.with_name(prefix.name + ".json")
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path.write_text(report.to_json() + "\n")
    csv_path.write_text(report.to_csv())
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "experiment",
        "kind": kind,
        "json_path": str(json_path),
        "csv_path": str(csv_path),
        "points": len(report.points),
    }
    lines = [f"{kind}: {len(report.points)} row(s) -> {json_path}, {csv_path}"]
    lines += [f"  {k}: {json.dumps(v, sort_keys=True)}" for k, v in report.summary.items()]
    _emit(payload, args.format, lines)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="largealpha", description="Empirical entropy, Markov-model compression and "
                                                "threshold experiments over large alphabets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def fmt(sp):
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")

    e = sub.add_parser("entropy", help="empirical entropy profile H_0..H_lmax")
    e.add_argument("input", nargs="?", help="input file")
    e.add_argument("--text", help="literal text (symbols ranked by first appearance)")
    e.add_argument("--mode", choices=("raw", "text", "seq"), default="raw",
                   help="how to read the input file: bytes (n=256), UTF-8 code points, or a sequence file")
    e.add_argument("--lmax", type=int, default=3, help="largest order (clipped to m-1)")
    fmt(e)
    e.set_defaults(func=cmd_entropy)

    c = sub.add_parser("compress", help="compress with a quantized order-ell Markov model")
    c.add_argument("input")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--input-mode", choices=("raw", "seq"), default="raw")
    c.add_argument("-l", "--order", type=int, default=1)
    c.add_argument("-c", type=float, default=1.0, dest="c")
    c.add_argument("--eps", type=float, default=0.5)
    c.add_argument("--mode", choices=MODES, default="quantized")
    fmt(c)
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="restore a compressed container")
    d.add_argument("input")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--output-mode", choices=("raw", "seq"), default="raw")
    fmt(d)
    d.set_defaults(func=cmd_decompress)

    g = sub.add_parser("gen", help="generate test sequences")
    g.add_argument("kind", choices=("random", "debruijn", "champernowne", "copeland-erdos"))
    g.add_argument("-n", type=int, help="alphabet size")
    g.add_argument("-m", type=int, help="length")
    g.add_argument("-l", "--order", type=int, help="de Bruijn order")
    g.add_argument("-b", "--base", type=int, help="digit base (default 10)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--enumerate", action="store_true", help="list every de Bruijn sequence")
    g.add_argument("--cap", type=int, default=1 << 20, help="work cap for --enumerate")
    g.add_argument("-o", "--output", help="sequence file to write (default: print)")
    fmt(g)
    g.set_defaults(func=cmd_gen)

    x = sub.add_parser("experiment", help="run an experiment from a JSON config")
    x.add_argument("config", help="JSON config path or the name of a bundled config")
    x.add_argument("-o", "--output", help="report path prefix (default: <config stem>_report)")
    x.add_argument("--workers", type=int, default=1)
    x.add_argument("--seed", type=int)
    x.add_argument("--trials", type=int)
    fmt(x)
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"largealpha {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"largealpha {args.command}: invalid config: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"largealpha {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, CodecError, ResourceLimitError, ValueError, MemoryError) as exc:
        print(f"largealpha {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
