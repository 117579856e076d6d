"""Command-line entry point: ``campusplan cluster | plan | study``.

Every failure prints a JSON object with a ``code`` field to stderr and exits
nonzero (2 configuration or usage error, 3 infeasible, 4 time limit without an
incumbent, 1 anything else). Report files never contain wall-clock times,
except for the ``Time`` column that the sensitivity and aggregation tables
are defined to carry.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from collections import Counter
from pathlib import Path

from . import analysis
from .config import ConfigError, RunConfig, load_config
from .domain import DomainError
from .model import Case, apply_case, build, count_model
from .solve import audit, branch_and_bound, infeasible_rows, write_mps
from .trendlab import centroids_to_branches, cluster_report, forward_ratios, kmeans, read_series

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4

STUDIES = ("sensitivity", "aggregation", "deterministic")


class CliError(Exception):
    """A failure reported as ``{"code": ..., "message": ...}``."""

    def __init__(self, code: str, message: str, exit_code: int, **extra):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code
        self.extra = extra

    def document(self) -> dict:
        return {"code": self.code, "message": str(self), "exit_code": self.exit_code, **self.extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_CONFIG)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonnegative(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be a nonnegative number")
    return value


def _blocks(text: str) -> list[int]:
    try:
        blocks = [int(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("blocks must be comma-separated integers") from None
    if not blocks or min(blocks) < 1:
        raise argparse.ArgumentTypeError("blocks must be positive integers")
    return blocks


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="campusplan", description="Stochastic clean-electricity expansion planning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cluster", help="cluster historical series into advancement branches")
    c.add_argument("--cost", type=Path, help="year,value CSV of unit prices")
    c.add_argument("--efficiency", type=Path, help="year,value CSV of efficiencies")
    c.add_argument("--k", type=_positive_int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--window", type=_positive_int, default=5, help="years between paired observations")
    c.add_argument("--labels", help="comma-separated branch labels, slowest first")
    c.add_argument("--out", type=Path, help="output JSON file (stdout when omitted)")

    def solver_flags(p):
        p.add_argument("config", type=Path)
        p.add_argument("--gap", type=_nonnegative, help="relative optimality gap in percent (default 1)")
        p.add_argument("--time-limit", type=_nonnegative, help="seconds per solve")
        p.add_argument("--seed", type=int, help="override the configuration seed")
        p.add_argument("--threads", type=_positive_int, default=1)
        p.add_argument("--case", action="append", default=[], help="kind=value modifier; repeatable")
        p.add_argument("--out", type=Path, help="output directory (default out/<name>)")

    p = sub.add_parser("plan", help="build, solve, audit and report one configuration")
    solver_flags(p)
    p.add_argument("--export-mps", type=Path, help="write the model as free MPS")
    p.add_argument("--solve", action="store_true", help="also solve when exporting")
    p.add_argument("--dry-run", action="store_true", help="only count rows and columns")

    s = sub.add_parser("study", help="run a sensitivity, aggregation or deterministic study")
    solver_flags(s)
    s.add_argument("study", choices=STUDIES)
    s.add_argument("--blocks", type=_blocks, help="aggregation blocks, e.g. 1,2,4,12")
    s.add_argument("--mode", choices=analysis.MEAN_MODES, help="averaging of branch multipliers")
    return parser


# -- helpers ------------------------------------------------------------------------


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _load(args) -> RunConfig:
    try:
        cfg = load_config(args.config, seed=args.seed)
    except FileNotFoundError as exc:
        raise CliError("config", f"{exc.filename}: not found", EXIT_CONFIG) from None
    except ConfigError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    problem = cfg.problem
    for text in args.case:
        try:
            problem = apply_case(problem, Case.parse(text))
        except (KeyError, ValueError) as exc:
            raise CliError("config", f"--case {text}: {exc}", EXIT_CONFIG) from None
    cfg.problem = problem
    return cfg


def _settings(args, cfg: RunConfig) -> tuple[float, float]:
    gap = args.gap if args.gap is not None else float(cfg.solver.get("gap", 1.0))
    if args.time_limit is not None:
        limit = args.time_limit
    else:
        raw = cfg.solver.get("time_limit")
        limit = math.inf if raw in (None, "inf") else float(raw)
    return gap, limit


def _out_dir(args, cfg: RunConfig) -> Path:
    out = args.out if args.out is not None else Path("out") / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _number(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


# -- commands ---------------------------------------------------------------------


def cmd_cluster(args) -> int:
    if args.cost is None and args.efficiency is None:
        raise CliError("usage", "give --cost and/or --efficiency", EXIT_CONFIG)
    try:
        cost = read_series(args.cost) if args.cost else None
        eff = read_series(args.efficiency) if args.efficiency else None
        points = forward_ratios(eff, cost, args.window)
        if len(points) < args.k:
            raise DomainError(f"{len(points)} ratio points cannot form {args.k} clusters")
        result = kmeans(points, args.k, args.seed)
        labels = args.labels.split(",") if args.labels else None
        if labels is not None and len(labels) != args.k:
            raise DomainError(f"--labels needs {args.k} entries")
        branches = centroids_to_branches(result, labels)
    except FileNotFoundError as exc:
        raise CliError("io", f"{exc.filename}: not found", EXIT_CONFIG) from None
    except DomainError as exc:
        raise CliError("input", str(exc), EXIT_CONFIG) from None
    doc = cluster_report(result, branches)
    doc["seed"] = args.seed
    doc["window"] = args.window
    _emit(analysis.dumps(doc), args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load(args)
    problem = cfg.problem
    if args.dry_run:
        size = count_model(problem.tree, problem.techs, problem.data)
        doc = {
            "name": cfg.name,
            "rows": size.rows,
            "continuous": size.continuous,
            "integer": size.integer,
            "rows_by_family": size.rows_by_family,
            "columns_by_kind": size.cols_by_kind,
        }
        sys.stdout.write(analysis.dumps(doc))
        return EXIT_OK

    gap, limit = _settings(args, cfg)
    built = build(problem)
    if args.export_mps is not None:
        args.export_mps.parent.mkdir(parents=True, exist_ok=True)
        write_mps(built.model, args.export_mps)
        if not args.solve:
            sys.stdout.write(analysis.dumps({"name": cfg.name, "mps": str(args.export_mps),
                                             "rows": built.model.n_rows, "columns": built.model.n_cols}))
            return EXIT_OK

    out = _out_dir(args, cfg)
    start = time.perf_counter()
    solution = branch_and_bound(built.model, gap, limit)
    elapsed = time.perf_counter() - start
    summary = {
        "name": cfg.name,
        "cases": [Case.parse(c).key for c in args.case],
        "seed": cfg.seed,
        "gap_tolerance": gap,
        "status": solution.status,
        "objective": _number(solution.objective),
        "bound": _number(solution.bound),
        "gap": _number(solution.gap),
        "nodes": solution.nodes,
        "rows": built.model.n_rows,
        "columns": built.model.n_cols,
        "integer": built.model.n_integer,
    }

    if solution.status in ("infeasible", "unbounded"):
        rows = infeasible_rows(built.model) if solution.status == "infeasible" else None
        cert = {
            "status": solution.status,
            "lp_relaxation_feasible": rows is None,
            "rows": rows or [],
            "families": dict(sorted(Counter(r.split("[")[0] for r in rows or []).items())),
        }
        (out / "summary.json").write_text(analysis.dumps(summary))
        (out / "infeasibility.json").write_text(analysis.dumps(cert))
        raise CliError(solution.status, f"model is {solution.status}", EXIT_INFEASIBLE,
                       certificate=str(out / "infeasibility.json"), rows=len(cert["rows"]))
    if not solution.has_incumbent:
        (out / "summary.json").write_text(analysis.dumps(summary))
        raise CliError("time_limit", "time limit reached without a feasible plan", EXIT_TIME_LIMIT,
                       bound=_number(solution.bound))

    report = audit(solution, problem, built.catalog, caps=built.big_m)
    summary["audit_ok"] = report.ok
    solution.to_csv(out / "solution.csv")
    (out / "audit.json").write_text(analysis.dumps(report.summary()))
    (out / "summary.json").write_text(analysis.dumps(summary))
    if not report.ok:
        raise CliError("audit_failed", "solution fails the independent audit", EXIT_FAILURE,
                       audit=str(out / "audit.json"))
    paths = analysis.decompose_costs(solution, problem, built.catalog, report)
    (out / "paths.csv").write_text(analysis.path_reports_csv(paths))
    (out / "decision_tree.json").write_text(analysis.dumps(analysis.decision_tree(solution, problem, built.catalog)))
    sys.stdout.write(analysis.dumps({**summary, "time": round(elapsed, 3), "out": str(out)}))
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _load(args)
    gap, limit = _settings(args, cfg)
    problem = cfg.problem
    settings = cfg.studies.get(args.study)
    out = _out_dir(args, cfg)
    target = out / f"{args.study}.csv"
    try:
        if args.study == "sensitivity":
            cases = settings if settings else ["none"]
            rows = analysis.run_sensitivity(problem, cases, gap, limit, workers=args.threads)
            text = analysis.table_csv(analysis.SENSITIVITY_HEADERS, [r.cells() for r in rows])
        elif args.study == "aggregation":
            blocks = args.blocks or settings
            if not blocks:
                raise CliError("config", "aggregation needs --blocks or studies.aggregation", EXIT_CONFIG)
            rows = analysis.aggregation_study(problem, blocks, gap, limit)
            text = analysis.table_csv(analysis.AGGREGATION_HEADERS, [r.cells() for r in rows])
        else:
            mode = args.mode or (settings or {}).get("mode", "mean")
            result = analysis.deterministic_audit(problem, mode, gap, limit)
            text = analysis.violation_tables_csv(result)
    except ValueError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    except RuntimeError as exc:
        raise CliError("solver", str(exc), EXIT_FAILURE) from None
    target.write_text(text)
    sys.stdout.write(analysis.dumps({"name": cfg.name, "study": args.study, "out": str(target)}))
    return EXIT_OK


COMMANDS = {"cluster": cmd_cluster, "plan": cmd_plan, "study": cmd_study}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        sys.stderr.write(json.dumps(exc.document(), sort_keys=True) + "\n")
        return exc.exit_code
    except OSError as exc:
        err = CliError("io", str(exc), EXIT_CONFIG)
        sys.stderr.write(json.dumps(err.document(), sort_keys=True) + "\n")
        return err.exit_code
    except Exception as exc:  # noqa: BLE001 - last resort keeps the error machine-readable
        err = CliError("internal", f"{type(exc).__name__}: {exc}", EXIT_FAILURE)
        sys.stderr.write(json.dumps(err.document(), sort_keys=True) + "\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
