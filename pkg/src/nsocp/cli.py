"""Command-line surface: solve problems, check qualifications, run the corpus.

Problems are JSON documents (see the fixture corpus for examples); run
logs are JSONL with a header line carrying the tool version, seed and
configuration, one line per iterate or verdict, and a footer with the
outcome.  All floats are written with 17 significant digits so replays
compare bitwise.  Exit codes: 0 success, 1 bad input or infeasible
point, 2 iteration limit, 3 divergence or infeasible subproblem, 4
expected-verdict mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import corpus as cp
from . import cq as cqmod
from . import model as md
from . import solvers as sv


# -- serialization ----------------------------------------------------------------

def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _render(obj) -> str:
    """JSON with floats at 17 significant digits (replay-stable)."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        if obj == int(obj) and abs(obj) < 1e16:
            return f"{obj:.1f}"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_render(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_line(obj) -> str:
    return _render(_to_jsonable(obj))


def _write_atomic(path: str, lines) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
    os.replace(tmp, path)


# -- shared option handling ----------------------------------------------------------

def _resolve_seed(args) -> int:
    env = os.environ.get("NSOCP_SEED")
    if env is not None:
        return int(env)
    return int(getattr(args, "seed", 0) or 0)


def _parse_x(text: str, n: int, what: str) -> np.ndarray:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as err:
        raise SystemExit(f"error: {what} is not a comma-separated float list: {err}")
    if len(vals) != n:
        raise SystemExit(f"error: {what} has {len(vals)} entries, problem needs {n}")
    return np.asarray(vals)


def _apply_config_overrides(cfg: sv.SolverConfig, pairs) -> sv.SolverConfig:
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"error: --config expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if not hasattr(cfg, key):
            raise SystemExit(f"error: unknown config key {key!r}")
        current = getattr(cfg, key)
        try:
            if isinstance(current, bool):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            else:
                value = raw
        except ValueError as err:
            raise SystemExit(f"error: bad value for {key}: {err}")
        setattr(cfg, key, value)
    return cfg


def _load_problem_or_die(path: str) -> md.ProblemSpec:
    try:
        return md.load_problem(path)
    except FileNotFoundError:
        raise SystemExit(f"error: no such file: {path}")
    except json.JSONDecodeError as err:
        raise SystemExit(f"error: {path}:{err.lineno}:{err.colno}: {err.msg}")
    except (md.ModelError, ValueError) as err:
        raise SystemExit(f"error: {path}: {err}")


def _budget_from_args(args) -> cqmod.SearchBudget:
    seed = _resolve_seed(args)
    budget = cqmod.SearchBudget(seed=seed)
    n = getattr(args, "budget", None)
    if n:
        budget.directions = int(n)
        budget.slice_points = int(n)
    return budget


# -- subcommands -----------------------------------------------------------------------

def cmd_solve(args) -> int:
    p = _load_problem_or_die(args.problem)
    cfg = sv.SolverConfig(method=args.method)
    _apply_config_overrides(cfg, args.config)
    if args.x0 is not None:
        x0 = _parse_x(args.x0, p.n, "--x0")
    else:
        x0 = np.zeros(p.n)
    seed = _resolve_seed(args)
    header = {
        "record": "header",
        "tool_version": __version__,
        "seed": seed,
        "problem": p.name,
        "config": cfg.to_json_dict(),
    }
    t0 = time.perf_counter()
    status = "kkt"
    failure = None
    logs = []
    try:
        logs = sv.solve(p, x0, cfg)
        status = sv.classify_outcome(logs, cfg)
    except (sv.DivergingIterates, sv.SubproblemInfeasible) as err:
        status = "diverged"
        failure = str(err)
    wall = time.perf_counter() - t0
    footer = {"record": "footer", "status": status, "wall_time_s": wall}
    if failure:
        footer["message"] = failure
    lines = [dumps_line(header)]
    lines.extend(dumps_line({"record": "iterate", **log.to_json_dict()}) for log in logs)
    lines.append(dumps_line(footer))
    if args.out:
        _write_atomic(args.out, lines)
    else:
        for line in lines:
            print(line)
    if logs:
        last = logs[-1]
        print(
            f"{p.name or args.problem}: {status} after {len(logs)} outer iterations; "
            f"x = {[float(v) for v in last.x]}, residuals "
            f"(stat={last.residuals.stationarity:.3e}, "
            f"feas={last.residuals.feasibility:.3e}, "
            f"compl={last.residuals.complementarity:.3e})",
            file=sys.stderr,
        )
    if failure:
        print(f"{p.name or args.problem}: {failure}", file=sys.stderr)
    if status == "multiplier-divergence":
        print(
            f"{p.name or args.problem}: multiplier norms diverging while residuals "
            "shrink; the limit point likely admits no Lagrange multiplier",
            file=sys.stderr,
        )
    if status == "kkt":
        return 0
    if status == "iteration-limit":
        return 2
    return 3


def cmd_cq(args) -> int:
    p = _load_problem_or_die(args.problem)
    if args.at is not None:
        x = _parse_x(args.at, p.n, "--at")
    elif p.points_of_interest:
        x = np.asarray(p.points_of_interest[0])
    else:
        raise SystemExit("error: no --at point and the problem lists no points of interest")
    which = [w.strip() for w in (args.which or ",".join(cqmod.CQ_NAMES)).split(",") if w.strip()]
    for name in which:
        if name not in cqmod.CQ_NAMES:
            raise SystemExit(
                f"error: unknown check {name!r}; known: {', '.join(cqmod.CQ_NAMES)}"
            )
    budget = _budget_from_args(args)
    header = {
        "record": "header",
        "tool_version": __version__,
        "seed": budget.seed,
        "problem": p.name,
        "at": [float(v) for v in x],
        "which": which,
        "budget": {"directions": budget.directions, "slice_points": budget.slice_points},
    }
    t0 = time.perf_counter()
    lines = [dumps_line(header)]
    mismatches = []
    try:
        for name in which:
            verdict = cqmod.run_check(p, x, name, budget)
            line = {"record": "verdict", "check": name, **verdict.to_json_dict()}
            lines.append(dumps_line(line))
            print(f"{name}: {verdict.status.value}")
            want = (p.expected or {}).get(name)
            if want is not None and verdict.holds() != bool(want):
                mismatches.append(name)
    except md.InfeasiblePoint as err:
        print(f"error: point infeasible in block {err.block} by {err.violation:.3e}",
              file=sys.stderr)
        return 1
    footer = {
        "record": "footer",
        "status": "mismatch" if mismatches else "ok",
        "mismatches": mismatches,
        "wall_time_s": time.perf_counter() - t0,
    }
    lines.append(dumps_line(footer))
    if args.out:
        _write_atomic(args.out, lines)
    return 4 if mismatches else 0


def cmd_corpus(args) -> int:
    if args.action == "list":
        for name in cp.names():
            doc = cp.fixture_doc(name)
            q = len(doc["constraints"])
            dims = ",".join(str(b["dim"]) for b in doc["constraints"])
            print(f"{name:14s} n={doc['n']} blocks={q} dims=[{dims}]  {doc['note']}")
        return 0
    budget = _budget_from_args(args)
    results = cp.run_corpus(args.filter, budget, solver_smoke=not args.skip_smoke)
    if not results:
        print(f"no fixtures match filter {args.filter!r}", file=sys.stderr)
        return 1
    any_bad = False
    print(f"{'fixture':14s} {'check':14s} {'expected':10s} {'got':12s} ok")
    for res in results:
        for check in sorted(res.expected):
            want = res.expected[check]
            got = res.verdicts.get(check, "-")
            ok = (check, want, got) not in [(m[0], m[1], m[2]) for m in res.mismatches]
            any_bad |= not ok
            want_str = "HOLDS" if want else "VIOLATED"
            if check == "kkt":
                want_str = "EXISTS" if want else "NONEXISTENT"
            print(f"{res.name:14s} {check:14s} {want_str:10s} {got:12s} {'yes' if ok else 'NO'}")
        for smoke_name, ok in sorted(res.smoke.items()):
            any_bad |= not ok
            print(f"{res.name:14s} {smoke_name:14s} {'pass':10s} "
                  f"{'pass' if ok else 'FAIL':12s} {'yes' if ok else 'NO'}")
    total = sum(r.seconds for r in results)
    bad = sum(len(r.mismatches) for r in results)
    print(f"-- {len(results)} fixtures, {bad} mismatches, {total:.1f}s")
    return 4 if any_bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsocp",
        description="Nonlinear second-order cone programming: solvers and "
        "constraint-qualification analysis",
    )
    parser.add_argument("--version", action="version", version=f"nsocp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run a solver on a problem file")
    p_solve.add_argument("--problem", required=True)
    p_solve.add_argument("--method", choices=sorted(sv.SOLVERS), default="auglag")
    p_solve.add_argument("--x0", help="comma-separated start point (default: zeros)")
    p_solve.add_argument("--out", help="write the JSONL run record here")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument(
        "--config", action="append", metavar="KEY=VALUE",
        help="override a solver configuration field (repeatable)",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_cq = sub.add_parser("cq", help="check constraint qualifications at a point")
    p_cq.add_argument("--problem", required=True)
    p_cq.add_argument("--at", help="comma-separated point (default: first point of interest)")
    p_cq.add_argument("--which", help=f"comma-separated subset of: {','.join(cqmod.CQ_NAMES)}")
    p_cq.add_argument("--seed", type=int, default=0)
    p_cq.add_argument("--budget", type=int, help="search effort (grid density)")
    p_cq.add_argument("--out", help="write the JSONL verdict record here")
    p_cq.set_defaults(func=cmd_cq)

    p_corpus = sub.add_parser("corpus", help="list or replay the built-in fixtures")
    p_corpus.add_argument("action", choices=("list", "run"))
    p_corpus.add_argument("--filter", help="substring filter on fixture names")
    p_corpus.add_argument("--seed", type=int, default=0)
    p_corpus.add_argument("--budget", type=int)
    p_corpus.add_argument("--skip-smoke", action="store_true",
                          help="skip the solver smoke runs")
    p_corpus.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
