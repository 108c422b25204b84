"""Command-line interface: ``semfaith score | synth | oracle-check``.

Exit codes
    0  success
    2  malformed input or invalid flags
    3  some triplets failed (the others are still reported)
    4  oracle-check found a difference above --tol
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .cache import ResultCache, cache_key
from .core import QcaTriplet, SolverConfig, from_cluster_counts, shannon_entropy, to_units
from .errors import InvalidInput, SemFaithError
from .oracle import OracleConfig, grid_dmin_n2, pgd_dmin, pgd_sep
from .sep_solver import solve_sep
from .sf_solver import solve_sf
from .synthetic import SynthConfig, run_study

log = logging.getLogger("semfaith")

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_PARTIAL = 3
EXIT_ORACLE_MISMATCH = 4

ORACLE_MAX_N = 5

# (name, unit kind); "e" columns follow --units, "n" columns are always nats
REPORT_COLUMNS = [
    ("id", None), ("H_Q", "e"), ("H_C", "e"), ("H_A", "e"), ("S_dot", "e"), ("D_min", "n"),
    ("F_S", None), ("SEP", "e"), ("S_m", "e"), ("naive_SEP", "n"), ("first_order_SEP", "e"),
    ("outer_iters", None), ("residual", None), ("cached", None),
]


class MalformedInput(Exception):
    """Input that cannot be parsed into triplets at all (exit 2)."""


@dataclass
class Entry:
    """One element of a TripletFile: a triplet or the reason it could not be built."""
    index: int
    id: str
    triplet: QcaTriplet | None = None
    error: str | None = None


# ---------------------------------------------------------------- input


def _field(obj, key, where):
    if key not in obj:
        raise MalformedInput(f"{where}: missing field {key!r}")
    return obj[key]


def _numbers(value, where, n):
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise MalformedInput(f"{where}: expected an array of numbers")
    if len(value) != n:
        raise MalformedInput(f"{where}: length {len(value)} does not match n_topics={n}")
    return [float(x) for x in value]


def parse_entry(obj, index: int) -> Entry:
    where = f"triplet[{index}]"
    if not isinstance(obj, dict):
        raise MalformedInput(f"{where}: expected an object")
    tid = _field(obj, "id", where)
    if not isinstance(tid, str):
        raise MalformedInput(f"{where}.id: expected a string")
    n = _field(obj, "n_topics", where)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise MalformedInput(f"{where}.n_topics: expected a positive integer")
    meta = obj.get("metadata", {})
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        raise MalformedInput(f"{where}.metadata: expected a map of strings")

    dists = {}
    problems = []
    for s in ("q", "c", "a"):
        if f"p_{s}" in obj:
            dists[s] = _numbers(obj[f"p_{s}"], f"{where}.p_{s}", n)
        elif f"counts_{s}" in obj:
            counts = obj[f"counts_{s}"]
            _numbers(counts, f"{where}.counts_{s}", n)
            try:
                dists[s] = from_cluster_counts(counts, n).probs
            except InvalidInput as exc:
                problems.append(f"counts_{s}: {exc}")
        else:
            raise MalformedInput(f"{where}: needs p_{s} or counts_{s}")
    if problems:
        return Entry(index, tid, error="; ".join(problems))
    t = QcaTriplet.from_arrays(tid, dists["q"], dists["c"], dists["a"], metadata=meta, check=False)
    return Entry(index, tid, triplet=t)


def load_triplet_file(path) -> list[Entry]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    items = doc if isinstance(doc, list) else [doc]
    if not items:
        raise MalformedInput(f"{path}: no triplets")
    return [parse_entry(obj, i) for i, obj in enumerate(items)]


# ---------------------------------------------------------------- output


def fmt(v) -> str:
    """Shortest decimal that round-trips; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def report_header(units: str) -> list[str]:
    out = []
    for name, kind in REPORT_COLUMNS:
        if kind == "e":
            out.append(f"{name}[{units}]")
        elif kind == "n":
            out.append(f"{name}[nats]")
        else:
            out.append(name)
    return out


def render(rows: list[dict], header: list[str], fmt_name: str, extra: dict | None = None) -> str:
    if fmt_name == "json":
        doc = dict(extra or {})
        doc["columns"] = header
        doc["rows"] = rows
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(row[h]) for h in header])
    return buf.getvalue()


def emit(text: str, out):
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _diag(entry: Entry, msg: str):
    print(f"error: triplet[{entry.index}] {entry.id!r}: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- score


def _solve_values(t: QcaTriplet, cfg: SolverConfig) -> dict:
    """Everything a report row needs, in nats, plus the solved matrices."""
    sf = solve_sf(t, cfg)
    sep = solve_sep(sf.a_star, t.p_c, t.p_a, cfg, sf=sf, p_q=t.p_q)
    return {
        "h_q": shannon_entropy(t.p_q, "nats"),
        "h_c": shannon_entropy(t.p_c, "nats"),
        "h_a": shannon_entropy(t.p_a, "nats"),
        "s_dot": sep.s_system,
        "d_min": sf.d_min,
        "f_s": sf.f_s,
        "sep": sep.sep_total,
        "s_m": sep.s_medium,
        "naive_sep": sep.naive_sep,
        "first_order_sep": sep.first_order_sep,
        "outer_iters": sf.outer_iters,
        "residual": max(sf.constraint_residual, sep.reverse_residual),
        "matrices": {
            "q_star": sf.q_star.tolist(),
            "a_star": sf.a_star.tolist(),
            "a_reverse": sep.a_reverse.tolist(),
        },
    }


def _row(tid: str, v: dict, units: str, cached: bool) -> dict:
    def e(x):
        return None if x is None else to_units(x, units)

    h = report_header(units)
    vals = [tid, e(v["h_q"]), e(v["h_c"]), e(v["h_a"]), e(v["s_dot"]), v["d_min"], v["f_s"],
            e(v["sep"]), e(v["s_m"]), v["naive_sep"], e(v["first_order_sep"]), v["outer_iters"],
            v["residual"], cached]
    return dict(zip(h, vals))


def cmd_score(args) -> int:
    cfg = solver_config(args)
    entries = load_triplet_file(args.input)
    cache = ResultCache(args.cache) if args.cache else None
    rows = []
    failed = 0
    for entry in entries:
        if entry.error:
            _diag(entry, entry.error)
            failed += 1
            continue
        t = entry.triplet
        key = cache_key(t, cfg) if cache else None
        values = cache.get(key) if cache else None
        hit = values is not None
        if not hit:
            try:
                values = _solve_values(t, cfg)
            except SemFaithError as exc:
                _diag(entry, str(exc))
                failed += 1
                continue
            if cache:
                cache.put(key, values)
        rows.append(_row(t.id, values, cfg.report_units, hit))
        if args.emit_matrices:
            _write_matrices(Path(args.emit_matrices), entry, values["matrices"])
        if args.figures:
            plotting.triplet_figures(t.id, t.p_q.probs, t.p_c.probs, t.p_a.probs, values["matrices"], args.figures)

    header = report_header(cfg.report_units)
    emit(render(rows, header, args.format, {"units": cfg.report_units}), args.out)
    return EXIT_PARTIAL if failed else EXIT_OK


def _write_matrices(root: Path, entry: Entry, matrices: dict):
    root.mkdir(parents=True, exist_ok=True)
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in entry.id)
    path = root / f"{entry.index:04d}_{safe}.json"
    path.write_text(json.dumps({"id": entry.id, **matrices}, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    cfg = solver_config(args)
    try:
        scfg = SynthConfig(
            n_topics=args.n_topics, n_triplets=args.n, alpha_q=args.alpha_q, alpha_c=args.alpha_c,
            alpha_a=args.alpha_a, context_coupling=args.coupling,
            seed=42 if args.seed is None else args.seed,
        )
    except InvalidInput as exc:
        raise MalformedInput(str(exc)) from exc
    report = run_study(scfg, cfg)
    out = Path(args.out or "synth_out")
    out.mkdir(parents=True, exist_ok=True)
    u = cfg.report_units

    def e(x):
        return to_units(x, u)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_s", "sep", "s_dot", "h_q", "h_c", "h_a"])
    for r in report.records:
        w.writerow([fmt(r.f_s), fmt(e(r.sep_total)), fmt(e(r.s_system)), fmt(e(r.h_q)), fmt(e(r.h_c)), fmt(e(r.h_a))])
    (out / "scatter.csv").write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_s", "naive_sep"])
    for f, s in report.naive_curve_points:
        w.writerow([fmt(f), fmt(s)])
    (out / "naive_curve.csv").write_text(buf.getvalue(), encoding="utf-8")

    iters = [r.outer_iters for r in report.records]
    fr = report.forward_reverse_fit
    summary = {
        "units": {"sep": u, "s_dot": u, "entropies": u, "f_s": "dimensionless", "naive_sep": "nats"},
        "n_triplets": scfg.n_triplets,
        "n_solved": len(report.records),
        "failures": len(report.failures),
        "failure_details": [{"index": i, "error": msg} for i, msg in report.failures],
        "pearson_r": report.pearson_r,
        "correlation": "absent" if report.pearson_r is None else "present",
        # the fit is in nats; a bits report rescales slope and intercept
        "slope": None if report.ols_slope is None else e(report.ols_slope),
        "intercept": None if report.ols_intercept is None else e(report.ols_intercept),
        "sep_range": [e(min(r.sep_total for r in report.records)), e(max(r.sep_total for r in report.records))]
        if report.records else None,
        "forward_reverse_fit": {
            "pearson_r": fr.pearson_r,
            "slope": None if fr.slope is None else e(fr.slope),
            "intercept": None if fr.intercept is None else e(fr.intercept),
        },
        "outer_iters": {"median": statistics.median(iters), "max": max(iters)} if iters else None,
        "config": {
            "n_topics": scfg.n_topics, "alpha_q": scfg.alpha_q, "alpha_c": scfg.alpha_c,
            "alpha_a": scfg.alpha_a, "context_coupling": scfg.context_coupling, "seed": scfg.seed,
            "solver": cfg.as_dict(),
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if not args.no_figures:
        if plotting.available():
            plotting.study_figures(report, out)
        else:
            log.warning("matplotlib is not installed; skipping figures")
    print(f"wrote {out}/scatter.csv, summary.json, naive_curve.csv "
          f"({len(report.records)} solved, {len(report.failures)} failed)", file=sys.stderr)
    return EXIT_PARTIAL if report.failures else EXIT_OK


# ---------------------------------------------------------------- oracle-check

ORACLE_HEADER = ["id", "n_topics", "D_min_solver", "D_min_oracle", "D_min_diff",
                 "SEP_solver", "SEP_oracle", "SEP_diff", "method", "ok"]


def cmd_oracle_check(args) -> int:
    cfg = solver_config(args)
    ocfg = OracleConfig() if args.seed is None else OracleConfig(seed=args.seed)
    entries = load_triplet_file(args.input)
    for entry in entries:
        n = entry.triplet.n_topics if entry.triplet else None
        if n is not None and not 2 <= n <= ORACLE_MAX_N:
            raise MalformedInput(
                f"triplet[{entry.index}] {entry.id!r}: n_topics={n}; the oracles support 2 to {ORACLE_MAX_N} topics"
            )
    rows = []
    failed = 0
    worst = 0.0
    for entry in entries:
        if entry.error:
            _diag(entry, entry.error)
            failed += 1
            continue
        t = entry.triplet
        try:
            sf = solve_sf(t, cfg)
            sep = solve_sep(sf.a_star, t.p_c, t.p_a, cfg)
            if t.n_topics == 2:
                d_or, method = grid_dmin_n2(t, ocfg), "grid"
            else:
                d_or, method = pgd_dmin(t, ocfg), "pgd"
            s_or = pgd_sep(sf.a_star, t.p_c, t.p_a, ocfg)
        except SemFaithError as exc:
            _diag(entry, str(exc))
            failed += 1
            continue
        dd = abs(sf.d_min - d_or)
        ds = abs(sep.sep_total - s_or)
        ok = dd <= args.tol and ds <= args.tol
        worst = max(worst, dd, ds)
        rows.append(dict(zip(ORACLE_HEADER, [t.id, t.n_topics, sf.d_min, d_or, dd, sep.sep_total, s_or, ds, method, ok])))
    emit(render(rows, ORACLE_HEADER, args.format, {"tol": args.tol, "units": "nats"}), args.out)
    bad = sum(not r["ok"] for r in rows)
    if bad:
        print(f"oracle-check: {bad} triplet(s) differ by more than {args.tol:g} (worst {worst:.3g})", file=sys.stderr)
        return EXIT_ORACLE_MISMATCH
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------- parser


def solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(
            tol_outer=args.tol_outer, tol_inner=args.tol_inner, max_outer_iters=args.max_iter,
            epsilon_smooth=args.epsilon, report_units=args.units,
        )
    except InvalidInput as exc:
        raise MalformedInput(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    d = SolverConfig()
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("solver and output")
    g.add_argument("--tol-outer", type=float, default=d.tol_outer, help="outer-loop objective tolerance")
    g.add_argument("--tol-inner", type=float, default=d.tol_inner, help="inner projection tolerance")
    g.add_argument("--max-iter", type=int, default=d.max_outer_iters, help="outer iteration budget")
    g.add_argument("--epsilon", type=float, default=d.epsilon_smooth, help="smoothing added to every probability")
    g.add_argument("--units", choices=("bits", "nats"), default=d.report_units, help="units for entropy columns")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--out", default=None, help="output file (score, oracle-check) or directory (synth)")
    g.add_argument("--cache", default=None, metavar="DIR", help="result cache directory (score)")
    g.add_argument("--seed", type=int, default=None, help="seed for sampling and oracle restarts")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="semfaith", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", parents=[common], help="score a TripletFile")
    s.add_argument("input")
    s.add_argument("--emit-matrices", metavar="DIR", default=None)
    s.add_argument("--figures", metavar="DIR", default=None, help="render per-triplet PNGs (needs matplotlib)")
    s.set_defaults(func=cmd_score)

    sc = SynthConfig()
    y = sub.add_parser("synth", parents=[common], help="run the seeded synthetic correlation study")
    y.add_argument("--n", type=int, default=sc.n_triplets)
    y.add_argument("--n-topics", type=int, default=sc.n_topics)
    y.add_argument("--alpha-q", type=float, default=sc.alpha_q)
    y.add_argument("--alpha-c", type=float, default=sc.alpha_c)
    y.add_argument("--alpha-a", type=float, default=sc.alpha_a)
    y.add_argument("--coupling", type=float, default=sc.context_coupling)
    y.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    y.set_defaults(func=cmd_synth)

    o = sub.add_parser("oracle-check", parents=[common], help="compare solvers with brute-force oracles (N<=5)")
    o.add_argument("input")
    o.add_argument("--tol", type=float, default=1e-3)
    o.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "score" and args.figures and not plotting.available():
        print("error: --figures needs matplotlib (pip install artifact[plot])", file=sys.stderr)
        return EXIT_MALFORMED
    try:
        return args.func(args)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
