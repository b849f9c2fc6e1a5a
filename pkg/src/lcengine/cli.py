"""Command-line front door: validate models, run analyses, report results.

Exit codes: 0 success; 1 usage or validation failure; 2 I/O or parse
failure; 3 numerical failure (non-finite result).  Diagnostics go to
stderr, data and summaries to stdout.  Set LCENGINE_LOG=debug|info|...
for logging.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .dynamic import DynamicImpactResult, run_dynamic
from .econ import ProductionSeries, discounted_cost_result
from .engine import (
    MonteCarloResult,
    UnitResult,
    run_matrix,
    run_monte_carlo,
    run_static,
)
from .errors import LcengineError, LoadError
from .io import (
    export_results,
    import_results,
    load_background_db,
    load_dcf_tables,
    load_model,
    result_set,
    sha256_file,
)
from .model import DistributionAmount, MatrixAmount, ProcessModel, validate_model

log = logging.getLogger("lcengine")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

MODES = ("static", "montecarlo", "dynamic")


@dataclass
class RunConfig:
    """Everything one ``run`` invocation needs; embedded in result metadata."""

    model: str
    db: str
    mode: str
    dcf: str | None = None
    n_runs: int | None = None
    seed: int = 0
    rate: float | None = None
    output: str | None = None
    format: str = "json"
    categories: tuple[str, ...] | None = None
    threads: int = 0  # 0 = machine parallelism

    def check(self) -> str | None:
        """Mode-specific invariants; returns a usage-error message or None."""
        if self.mode not in MODES:
            return f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}"
        if self.mode == "dynamic" and not self.dcf:
            return "--mode dynamic requires --dcf"
        if self.mode == "montecarlo":
            if self.n_runs is None:
                return "--mode montecarlo requires --n-runs"
            if self.n_runs < 2:
                return f"--n-runs must be >= 2, got {self.n_runs}"
        if self.format not in ("json", "csv"):
            return f"--format must be json or csv, got {self.format!r}"
        if self.rate is not None and self.rate < 0:
            return f"--rate must be >= 0, got {self.rate}"
        return None

    def to_meta(self) -> dict:
        d = dataclasses.asdict(self)
        d["categories"] = list(self.categories) if self.categories else None
        return d


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems are exit 1, not argparse's default 2
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="lcengine",
        description="Process-model impact and cost calculations: static, "
        "Monte Carlo, and time-resolved.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="Check a model against a background database.")
    p_val.add_argument("--model", required=True, metavar="FILE")
    p_val.add_argument("--db", required=True, metavar="CSV")

    p_run = sub.add_parser("run", help="Run an analysis and export the results.")
    p_run.add_argument("--model", required=True, metavar="FILE")
    p_run.add_argument("--db", required=True, metavar="CSV")
    p_run.add_argument("--dcf", default=None, metavar="CSV",
                       help="characterization factor tables (dynamic mode)")
    p_run.add_argument("--mode", required=True, choices=MODES)
    p_run.add_argument("--n-runs", type=int, default=None, metavar="N")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--rate", type=float, default=None,
                       help="override the model's per-period discount rate")
    p_run.add_argument("--output", default=None, metavar="PATH")
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.add_argument("--categories", default=None,
                       help="comma-separated impact categories to compute")
    p_run.add_argument("--threads", type=int, default=0,
                       help="worker threads for the matrix kernels (0 = all cores)")

    p_rep = sub.add_parser("report", help="Summarize a result file; optionally emit plot data.")
    p_rep.add_argument("result", metavar="RESULT", help="result file written by 'run'")
    p_rep.add_argument("--plot-data", default=None, metavar="DIR",
                       help="write tidy CSVs for external plotting into DIR")
    return parser


# ---------------------------------------------------------------------------
# validate

def cmd_validate(model_path: str, db_path: str) -> int:
    try:
        model = load_model(model_path)
        db = load_background_db(db_path)
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validate_model(model, db)
    for finding in report.findings:
        stream = sys.stderr if finding.severity == "error" else sys.stdout
        print(str(finding), file=stream)
    if report.is_valid:
        print("OK")
        return EXIT_OK
    return EXIT_INVALID


# ---------------------------------------------------------------------------
# run

def _scan_nonfinite(payload) -> str | None:
    """Locate the first non-finite output cell, if any."""
    if isinstance(payload, MonteCarloResult):
        payload = payload.samples
    if isinstance(payload, UnitResult):
        sections = [(f"impact[{cat}]", grid) for cat, grid in payload.impacts.items()]
        sections.append(("cost", payload.cost))
    else:
        sections = [(f"impact[{cat}]", grid) for cat, grid in payload.impacts.items()]
    for label, grid in sections:
        bad = np.argwhere(~np.isfinite(grid))
        if bad.size:
            s, t = bad[0]
            return f"{label} at scenario={s}, timestep={t} is {grid[s, t]}"
    return None


def _fmt_value(v: float) -> str:
    return f"{v:.6g}"


def _unit_totals(unit: UnitResult) -> dict[str, float]:
    """Per-category totals: summed over time, averaged over scenarios."""
    totals = {cat: float(unit.impacts[cat].sum(axis=1).mean()) for cat in unit.categories}
    totals["cost"] = float(unit.cost.sum(axis=1).mean())
    return totals


def _print_unit_summary(unit: UnitResult) -> None:
    label = "total" if unit.grid.n_scenarios == 1 else "total (scenario mean)"
    for cat, value in _unit_totals(unit).items():
        print(f"  {cat:<20} {label}: {_fmt_value(value)}")


def _print_mc_summary(mc: MonteCarloResult) -> None:
    print(f"  runs: {mc.n_runs}, seed: {mc.seed}")
    for cat in (*mc.samples.categories, "cost"):
        grid = mc.samples.cost if cat == "cost" else mc.samples.impacts[cat]
        run_totals = grid.sum(axis=1)
        lo, mid, hi = np.percentile(run_totals, [2.5, 50.0, 97.5])
        print(
            f"  {cat:<20} mean: {_fmt_value(run_totals.mean())}  "
            f"sd: {_fmt_value(run_totals.std(ddof=1))}  "
            f"[p2.5 {_fmt_value(lo)}, p50 {_fmt_value(mid)}, p97.5 {_fmt_value(hi)}]"
        )


def _print_dynamic_summary(dyn: DynamicImpactResult) -> None:
    print(f"  horizon: {dyn.t_out} periods (model window + factor tail)")
    for cat in dyn.categories:
        total = float(dyn.cumulative[cat][:, -1].mean())
        print(f"  {cat:<20} cumulative (scenario mean): {_fmt_value(total)}")


def _print_indicators(cost_grid: np.ndarray, production: np.ndarray, rate: float) -> None:
    indicators = discounted_cost_result(cost_grid, ProductionSeries(production), rate)
    if cost_grid.shape[0] == 1:
        print(
            f"  economics (rate {rate:g}): present cost {_fmt_value(indicators.npv[0])}, "
            f"MSP {_fmt_value(indicators.msp[0])}, LCOE {_fmt_value(indicators.lcoe[0])}"
        )
    else:
        for name, values in (("present cost", indicators.npv), ("MSP", indicators.msp),
                             ("LCOE", indicators.lcoe)):
            lo, hi = np.percentile(values, [2.5, 97.5])
            print(
                f"  {name} (rate {rate:g}): mean {_fmt_value(values.mean())} "
                f"[p2.5 {_fmt_value(lo)}, p97.5 {_fmt_value(hi)}]"
            )


def cmd_run(config: RunConfig) -> int:
    problem = config.check()
    if problem:
        print(f"usage error: {problem}", file=sys.stderr)
        return EXIT_INVALID

    try:
        model = load_model(config.model)
        db = load_background_db(config.db)
        dcfs = load_dcf_tables(config.dcf) if config.dcf else None
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    if config.rate is not None:
        model = dataclasses.replace(model, discount_rate=config.rate)
    categories = config.categories

    report = validate_model(model, db, require_cost=config.mode != "dynamic")
    if not report.is_valid:
        print(str(report), file=sys.stderr)
        return EXIT_INVALID
    for warning in report.warnings:
        print(str(warning), file=sys.stderr)

    threads = config.threads if config.threads > 0 else (os.cpu_count() or 1)
    log.info("mode=%s backend=%s threads=%d", config.mode, kernels.backend_name(), threads)

    try:
        if config.mode == "static":
            payload = _run_deterministic(model, db, categories, config.seed, threads)
        elif config.mode == "montecarlo":
            payload = run_monte_carlo(
                model, db, config.n_runs, config.seed,
                categories=categories, threads=threads,
            )
        else:
            payload = run_dynamic(model, db, dcfs, seed=config.seed, categories=categories)
    except LcengineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    bad_cell = _scan_nonfinite(payload)
    if bad_cell:
        print(f"numerical failure: {bad_cell}", file=sys.stderr)
        return EXIT_NUMERIC

    meta = {
        "mode": config.mode,
        "model": model.name,
        "seed": config.seed,
        "config": config.to_meta(),
        "input_sha256": _input_hashes(config),
    }
    rs = result_set(payload, meta)

    output = config.output or f"{Path(config.model).stem}_{config.mode}.{config.format}"
    try:
        export_results(rs, config.format, output)
    except OSError as exc:
        print(f"error: cannot write {output}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"model: {model.name}  mode: {config.mode}  "
          f"grid: {model.grid.n_scenarios}x{model.grid.n_timesteps} ({model.grid.step_label})")
    _print_payload_summary(payload)
    if model.production is not None:
        rate = model.discount_rate
        cost_grid = _cost_grid_for_indicators(payload, model, db, config)
        if cost_grid is not None:
            _print_indicators(cost_grid, model.production, rate)
    print(f"results written to: {output}")
    return EXIT_OK


def _run_deterministic(model: ProcessModel, db, categories, seed: int, threads: int):
    """Static mode: single-value models use the 1x1 path, matrix-valued
    models the full grid; distributions are a usage error here."""
    has_matrix = False
    for sp in model.subprocesses:
        for amount in (*(f.amount for f in sp.flows), sp.amount):
            if isinstance(amount, DistributionAmount) and amount.spec.kind != "point":
                raise ValueError(
                    "model contains distribution amounts; use --mode montecarlo"
                )
            has_matrix = has_matrix or isinstance(amount, MatrixAmount)
    if has_matrix and model.grid.shape != (1, 1):
        return run_matrix(model, db, seed=seed, categories=categories, threads=threads)
    return run_static(model, db, categories=categories)


def _cost_grid_for_indicators(payload, model, db, config) -> np.ndarray | None:
    if isinstance(payload, UnitResult):
        return payload.cost
    if isinstance(payload, MonteCarloResult):
        return payload.samples.cost
    # dynamic payload carries no costs; compute them on the model grid when possible
    try:
        unit = run_matrix(model, db, seed=config.seed, categories=())
    except (LcengineError, ValueError) as exc:
        log.info("skipping economic indicators: %s", exc)
        return None
    return unit.cost


def _input_hashes(config: RunConfig) -> dict:
    hashes = {"model": sha256_file(config.model), "db": sha256_file(config.db)}
    if config.dcf:
        hashes["dcf"] = sha256_file(config.dcf)
    return hashes


def _print_payload_summary(payload) -> None:
    if isinstance(payload, MonteCarloResult):
        _print_mc_summary(payload)
    elif isinstance(payload, UnitResult):
        _print_unit_summary(payload)
    else:
        _print_dynamic_summary(payload)


# ---------------------------------------------------------------------------
# report

def _write_csv(path: Path, header: list[str], rows) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _plot_data_unit(unit: UnitResult, out_dir: Path) -> list[Path]:
    rows = []
    for cat in unit.categories:
        grid = unit.impacts[cat]
        for s in range(grid.shape[0]):
            for t in range(grid.shape[1]):
                rows.append(["impact", cat, s, t, repr(float(grid[s, t]))])
    for s in range(unit.cost.shape[0]):
        for t in range(unit.cost.shape[1]):
            rows.append(["cost", "", s, t, repr(float(unit.cost[s, t]))])
    impact_path = out_dir / "impact_over_time.csv"
    _write_csv(impact_path, ["kind", "category", "scenario", "timestep", "value"], rows)

    contrib_rows = []
    for sp in unit.sp_unit_costs:
        for cat in unit.categories:
            grid = unit.contribution_impact(sp, cat)
            for s in range(grid.shape[0]):
                for t in range(grid.shape[1]):
                    contrib_rows.append(["impact", cat, sp, s, t, repr(float(grid[s, t]))])
        grid = unit.contribution_cost(sp)
        for s in range(grid.shape[0]):
            for t in range(grid.shape[1]):
                contrib_rows.append(["cost", "", sp, s, t, repr(float(grid[s, t]))])
    contrib_path = out_dir / "contributions.csv"
    _write_csv(
        contrib_path,
        ["kind", "category", "subprocess", "scenario", "timestep", "value"],
        contrib_rows,
    )
    return [impact_path, contrib_path]


def _plot_data_mc(mc: MonteCarloResult, out_dir: Path) -> list[Path]:
    rows = []
    stat_fields = (("mean", "mean"), ("sd", "sd"), ("p2.5", "p2_5"),
                   ("p50", "p50"), ("p97.5", "p97_5"))
    for cat in mc.samples.categories:
        stats = mc.impact_stats[cat]
        for label, attr in stat_fields:
            for t, v in enumerate(getattr(stats, attr)):
                rows.append(["impact", cat, label, t, repr(float(v))])
    for label, attr in stat_fields:
        for t, v in enumerate(getattr(mc.cost_stats, attr)):
            rows.append(["cost", "", label, t, repr(float(v))])
    impact_path = out_dir / "impact_over_time.csv"
    _write_csv(impact_path, ["kind", "category", "stat", "timestep", "value"], rows)

    hist_rows = []
    for kind, cat, grid in (
        *((("impact", c, mc.samples.impacts[c])) for c in mc.samples.categories),
        ("cost", "", mc.samples.cost),
    ):
        run_totals = grid.sum(axis=1)
        counts, edges = np.histogram(run_totals, bins=50)
        for i, count in enumerate(counts):
            hist_rows.append([kind, cat, repr(float(edges[i])), repr(float(edges[i + 1])), int(count)])
    hist_path = out_dir / "histograms.csv"
    _write_csv(hist_path, ["kind", "category", "bin_left", "bin_right", "count"], hist_rows)

    contrib_rows = []
    for sp in mc.samples.sp_unit_costs:
        for cat in mc.samples.categories:
            mean_contrib = mc.samples.contribution_impact(sp, cat).mean(axis=0)
            for t, v in enumerate(mean_contrib):
                contrib_rows.append(["impact", cat, sp, t, repr(float(v))])
        mean_cost = mc.samples.contribution_cost(sp).mean(axis=0)
        for t, v in enumerate(mean_cost):
            contrib_rows.append(["cost", "", sp, t, repr(float(v))])
    contrib_path = out_dir / "contributions.csv"
    _write_csv(
        contrib_path,
        ["kind", "category", "subprocess", "timestep", "value"],
        contrib_rows,
    )
    return [impact_path, hist_path, contrib_path]


def _plot_data_dynamic(dyn: DynamicImpactResult, out_dir: Path) -> list[Path]:
    def grid_rows(grids: dict[str, np.ndarray]):
        rows = []
        for cat, grid in grids.items():
            for s in range(grid.shape[0]):
                for t in range(grid.shape[1]):
                    rows.append([cat, s, t, repr(float(grid[s, t]))])
        return rows

    impact_path = out_dir / "impact_over_time.csv"
    _write_csv(impact_path, ["category", "scenario", "timestep", "value"],
               grid_rows(dyn.impacts))
    cum_path = out_dir / "cumulative.csv"
    _write_csv(cum_path, ["category", "scenario", "timestep", "value"],
               grid_rows(dyn.cumulative))

    contrib_rows = []
    for sub, per_cat in dyn.contributions.items():
        for cat, grid in per_cat.items():
            for s in range(grid.shape[0]):
                for t in range(grid.shape[1]):
                    contrib_rows.append([sub, cat, s, t, repr(float(grid[s, t]))])
    contrib_path = out_dir / "contributions.csv"
    _write_csv(contrib_path, ["substance", "category", "scenario", "timestep", "value"],
               contrib_rows)
    return [impact_path, cum_path, contrib_path]


def cmd_report(result_path: str, plot_data: str | None = None) -> int:
    try:
        rs = import_results(result_path)
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"result: {result_path}  payload: {rs.payload_type}")
    for key in ("model", "mode", "seed"):
        if key in rs.meta:
            print(f"  {key}: {rs.meta[key]}")
    _print_payload_summary(rs.payload)

    if plot_data:
        out_dir = Path(plot_data)
        out_dir.mkdir(parents=True, exist_ok=True)
        if isinstance(rs.payload, MonteCarloResult):
            written = _plot_data_mc(rs.payload, out_dir)
        elif isinstance(rs.payload, UnitResult):
            written = _plot_data_unit(rs.payload, out_dir)
        else:
            written = _plot_data_dynamic(rs.payload, out_dir)
        for path in written:
            print(f"plot data written to: {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("LCENGINE_LOG", "WARNING").upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        return cmd_validate(args.model, args.db)
    if args.command == "run":
        categories = None
        if args.categories:
            categories = tuple(c.strip() for c in args.categories.split(",") if c.strip())
        config = RunConfig(
            model=args.model,
            db=args.db,
            mode=args.mode,
            dcf=args.dcf,
            n_runs=args.n_runs,
            seed=args.seed,
            rate=args.rate,
            output=args.output,
            format=args.format,
            categories=categories,
            threads=args.threads,
        )
        return cmd_run(config)
    return cmd_report(args.result, args.plot_data)


if __name__ == "__main__":
    sys.exit(main())
