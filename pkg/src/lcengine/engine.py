"""Scenario x time aggregation engine.

Computes, per impact category and for cost, the unit result of the main
process: the sum over sub-processes of (sub-process unit value x
sub-process exchange amount), where each sub-process unit value is the sum
over its flows of (flow unit value x flow exchange amount).  All products
and sums are cell-wise on the scenario x time grid.

Accumulation order is canonical and fixed: per output grid, the purely
scalar terms are folded into one constant (summed in flow/sub-process
document order) and applied first, then the grid-valued terms are applied
in document order.  Every cell therefore sees one fixed operation
sequence, and results are reproducible to the bit across repeat runs,
kernel backends, thread counts and block sizes; reordering effects stay
within the documented 1e-9 accumulation tolerance.  Grids are float64,
C-contiguous, scenario rows by time columns; per-scenario work partitions
cleanly across rows, which is what the optional ``threads`` argument
exploits.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import kernels
from .errors import InvalidModelError, MissingDataError, ShapeError, StaticModeError
from .model import (
    DistributionAmount,
    FlowDefinition,
    MatrixAmount,
    ProcessModel,
    ScalarAmount,
    ScenarioGrid,
    SubProcessDefinition,
    broadcast_exchange,
    validate_model,
)
from .sampler import stream_for_flow, stream_for_subprocess

if TYPE_CHECKING:
    from .io import UnitValueTable

Grid = np.ndarray


@dataclass(eq=False)
class UnitResult:
    """Unit impacts and cost of the main process, with per-sub-process breakdowns."""

    grid: ScenarioGrid
    categories: tuple[str, ...]
    impacts: dict[str, Grid]                      # category -> (S, T)
    cost: Grid                                    # (S, T)
    sp_unit_impacts: dict[str, dict[str, Grid]]   # subprocess -> category -> (S, T)
    sp_unit_costs: dict[str, Grid]
    sp_exchange: dict[str, Grid]

    @property
    def subprocess_names(self) -> tuple[str, ...]:
        return tuple(self.sp_unit_costs)

    def contribution_impact(self, sp_name: str, category: str) -> Grid:
        """This sub-process's term of the main-process sum for one category."""
        return self.sp_unit_impacts[sp_name][category] * self.sp_exchange[sp_name]

    def contribution_cost(self, sp_name: str) -> Grid:
        return self.sp_unit_costs[sp_name] * self.sp_exchange[sp_name]


@dataclass(eq=False)
class InventoryResult:
    """Per-substance emission grids aggregated over all sub-processes and flows."""

    grid: ScenarioGrid
    emissions: dict[str, Grid]  # substance -> (S, T)


@dataclass(eq=False)
class SummaryStats:
    """Per-time-step statistics across Monte Carlo runs."""

    mean: np.ndarray
    sd: np.ndarray
    p2_5: np.ndarray
    p50: np.ndarray
    p97_5: np.ndarray


@dataclass(eq=False)
class MonteCarloResult:
    """Per-run sample grids plus summary statistics per category and for cost."""

    n_runs: int
    seed: int
    samples: UnitResult
    impact_stats: dict[str, SummaryStats]
    cost_stats: SummaryStats


# ---------------------------------------------------------------------------
# core aggregation

def _accumulate_term(acc: Grid, unit, exch) -> None:
    """acc += unit * exch with scalar/grid operands, preserving cell-wise order."""
    unit_is_grid = isinstance(unit, np.ndarray)
    exch_is_grid = isinstance(exch, np.ndarray)
    if unit_is_grid and exch_is_grid:
        kernels.add_product(acc, unit, exch)
    elif unit_is_grid:
        kernels.add_scaled(acc, float(exch), unit)
    elif exch_is_grid:
        kernels.add_scaled(acc, float(unit), exch)
    else:
        kernels.add_const(acc, float(unit) * float(exch))


def _sum_terms(terms, shape: tuple[int, int]) -> Grid:
    acc = np.zeros(shape, dtype=np.float64)
    for unit, exch in terms:
        _accumulate_term(acc, unit, exch)
    return acc


def _as_operand_pairs(unit_values, exchange_grids, what: str):
    if len(unit_values) != len(exchange_grids):
        raise ShapeError(
            f"{what}: {len(unit_values)} unit values vs "
            f"{len(exchange_grids)} exchange grids"
        )
    shape = None
    for arr in (*unit_values, *exchange_grids):
        if isinstance(arr, np.ndarray):
            if arr.ndim != 2:
                raise ShapeError(f"{what}: grids must be 2-D, got ndim={arr.ndim}")
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise ShapeError(f"{what}: mixed grid shapes {shape} and {arr.shape}")
    return shape


def subprocess_aggregate(
    sp: SubProcessDefinition,
    unit_values: Sequence[np.ndarray],
    exchange_grids: Sequence[np.ndarray],
) -> Grid:
    """Sum over the sub-process's flows of (unit value x exchange), cell-wise.

    The same formula serves impacts (per category) and costs.  Operands may
    be scalars or conforming 2-D grids; at least one grid must be present
    to fix the output shape.
    """
    shape = _as_operand_pairs(unit_values, exchange_grids, f"subprocess {sp.name!r}")
    if shape is None:
        raise ShapeError(
            f"subprocess {sp.name!r}: all operands are scalars; "
            "pass at least one grid to fix the output shape"
        )
    return _sum_terms(zip(unit_values, exchange_grids), shape)


def main_aggregate(
    unit_sp_grids: Sequence[np.ndarray],
    sp_exchange_grids: Sequence[np.ndarray],
) -> Grid:
    """Sum over sub-processes of (sub-process unit value x exchange), cell-wise."""
    if not len(unit_sp_grids):
        raise ShapeError("main_aggregate: no sub-process grids")
    shape = _as_operand_pairs(unit_sp_grids, sp_exchange_grids, "main process")
    if shape is None:
        raise ShapeError("main_aggregate: all operands are scalars")
    return _sum_terms(zip(unit_sp_grids, sp_exchange_grids), shape)


# ---------------------------------------------------------------------------
# unit value resolution

def _resolve_unit_impact(flow: FlowDefinition, category: str, db, n_timesteps: int):
    """Unit impact of one flow for one category: scalar or per-period row."""
    if flow.inline_unit_impact is not None and category in flow.inline_unit_impact:
        return flow.inline_unit_impact[category]
    row = db.rows.get(flow.background_ref) if db is not None else None
    if row is not None:
        override = row.impact_overrides.get(category)
        if override is not None:
            return np.asarray(override, dtype=np.float64)
        if category in row.impacts:
            return row.impacts[category]
    raise MissingDataError(
        f"flow {flow.name!r}: no unit impact for category {category!r}"
    )


def _resolve_unit_cost(flow: FlowDefinition, db) -> float:
    if flow.inline_unit_cost is not None:
        return float(flow.inline_unit_cost)
    row = db.rows.get(flow.background_ref) if db is not None else None
    if row is not None and row.unit_cost is not None:
        return row.unit_cost
    raise MissingDataError(f"flow {flow.name!r}: no unit cost resolvable")


def _exchange_operand(amount, grid: ScenarioGrid, stream):
    """Scalar amounts stay scalar; everything else becomes a grid."""
    if isinstance(amount, ScalarAmount):
        return amount.value
    if isinstance(amount, DistributionAmount) and amount.spec.kind == "point":
        return amount.spec.parameters[0]
    return broadcast_exchange(amount, grid, stream)


def _unit_operand(value, shape: tuple[int, int]):
    """Per-period unit rows become grids; scalars stay scalar."""
    if isinstance(value, np.ndarray):
        return np.ascontiguousarray(np.broadcast_to(value, shape))
    return value


# ---------------------------------------------------------------------------
# evaluation driver

# Target bytes of one grid's row block during plan execution.  Blocks keep
# the working set cache-resident so every grid streams from memory once per
# evaluation instead of once per accumulation step; cell values are
# unaffected because each cell still sees the same operation sequence.
_CACHE_BLOCK_BYTES = 256 * 1024


def _row_blocks(n_rows: int, n_blocks: int) -> list[slice]:
    n_blocks = max(1, min(n_blocks, n_rows))
    bounds = np.linspace(0, n_rows, n_blocks + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


class _Accumulator:
    """One output grid being summed, with scalar terms folded.

    Scalar x scalar terms collapse into one constant (summed in document
    order); grid-valued terms keep document order.  The constant is
    applied first, then the grid terms, so the per-cell operation sequence
    is fixed and identical across backends, threads and block sizes.  An
    accumulator that never receives a grid term stays virtual: its result
    is a constant broadcast view and costs no memory or passes.
    """

    __slots__ = ("shape", "const", "has_scalar_terms", "grid_terms", "_grid")

    def __init__(self, shape: tuple[int, int]):
        self.shape = shape
        self.const = 0.0
        self.has_scalar_terms = False
        self.grid_terms: list[tuple[object, object]] = []
        self._grid: Grid | None = None

    def add(self, unit, exch) -> None:
        unit_is_grid = isinstance(unit, np.ndarray)
        exch_is_grid = isinstance(exch, np.ndarray)
        if not unit_is_grid and not exch_is_grid:
            self.const += float(unit) * float(exch)
            self.has_scalar_terms = True
        else:
            self.grid_terms.append((unit, exch))

    @property
    def is_virtual(self) -> bool:
        return not self.grid_terms

    def scalar_value(self) -> float:
        return self.const

    def grid(self) -> Grid:
        """Result grid: a real accumulator array, or a constant view."""
        if self.is_virtual:
            return np.broadcast_to(np.float64(self.const), self.shape)
        if self._grid is None:
            self._grid = np.zeros(self.shape, dtype=np.float64)
        return self._grid

    def steps(self) -> list[tuple]:
        if self.is_virtual:
            return []
        acc = self.grid()
        plan: list[tuple] = []
        if self.has_scalar_terms:
            plan.append(("const", acc, self.const))
        for unit, exch in self.grid_terms:
            unit_is_grid = isinstance(unit, np.ndarray)
            exch_is_grid = isinstance(exch, np.ndarray)
            if unit_is_grid and exch_is_grid:
                plan.append(("product", acc, unit, exch))
            elif unit_is_grid:
                plan.append(("scaled", acc, float(exch), unit))
            else:
                plan.append(("scaled", acc, float(unit), exch))
        return plan


def _apply_step(step: tuple, rows: slice) -> None:
    kind = step[0]
    if kind == "const":
        kernels.add_const(step[1][rows], step[2])
    elif kind == "scaled":
        kernels.add_scaled(step[1][rows], step[2], step[3][rows])
    else:
        kernels.add_product(step[1][rows], step[2][rows], step[3][rows])


def _run_plan(plan, rows: slice, n_timesteps: int) -> None:
    """Execute the ordered steps over one range of scenario rows.

    Rows advance in cache-sized blocks; within a block every step runs in
    plan order, so accumulators that later steps read (sub-process unit
    grids feeding the main totals) are complete for those rows first.
    """
    block = max(1, _CACHE_BLOCK_BYTES // (n_timesteps * 8))
    for start in range(rows.start, rows.stop, block):
        sub = slice(start, min(start + block, rows.stop))
        for step in plan:
            _apply_step(step, sub)


def _evaluate(
    model: ProcessModel,
    db,
    grid: ScenarioGrid,
    seed: int | None,
    categories: tuple[str, ...],
    threads: int,
) -> UnitResult:
    shape = grid.shape
    kinds = (*categories, None)  # None = cost
    totals = {kind: _Accumulator(shape) for kind in kinds}
    sp_units: dict[str, dict[object, _Accumulator]] = {}
    sp_exchange: dict[str, Grid] = {}

    # Resolve operands and fold terms; all sampling happens here, on one
    # thread, so draws are deterministic regardless of threading.
    for sp in model.subprocesses:
        units = {kind: _Accumulator(shape) for kind in kinds}
        sp_units[sp.name] = units
        for flow in sp.flows:
            stream = None if seed is None else stream_for_flow(seed, sp.name, flow.name)
            x = _exchange_operand(flow.amount, grid, stream)
            for cat in categories:
                u = _unit_operand(
                    _resolve_unit_impact(flow, cat, db, grid.n_timesteps), shape
                )
                units[cat].add(u, x)
            units[None].add(_resolve_unit_cost(flow, db), x)
        sp_stream = None if seed is None else stream_for_subprocess(seed, sp.name)
        sp_x = _exchange_operand(sp.amount, grid, sp_stream)
        sp_exchange[sp.name] = (
            sp_x if isinstance(sp_x, np.ndarray)
            else np.broadcast_to(np.float64(sp_x), shape)
        )
        for kind in kinds:
            unit_acc = units[kind]
            unit_value = unit_acc.scalar_value() if unit_acc.is_virtual else unit_acc.grid()
            totals[kind].add(unit_value, sp_x)

    # sub-process unit grids first, then the main totals that read them
    plan: list[tuple] = []
    for units in sp_units.values():
        for kind in kinds:
            plan.extend(units[kind].steps())
    for kind in kinds:
        plan.extend(totals[kind].steps())

    if plan:
        ranges = _row_blocks(grid.n_scenarios, threads)
        if len(ranges) <= 1:
            _run_plan(plan, slice(0, grid.n_scenarios), grid.n_timesteps)
        else:
            with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
                futures = [
                    pool.submit(_run_plan, plan, r, grid.n_timesteps) for r in ranges
                ]
                for fut in futures:
                    fut.result()

    return UnitResult(
        grid=grid,
        categories=categories,
        impacts={cat: totals[cat].grid() for cat in categories},
        cost=totals[None].grid(),
        sp_unit_impacts={
            name: {cat: units[cat].grid() for cat in categories}
            for name, units in sp_units.items()
        },
        sp_unit_costs={name: units[None].grid() for name, units in sp_units.items()},
        sp_exchange=sp_exchange,
    )


def _select_categories(model: ProcessModel, categories) -> tuple[str, ...]:
    if categories is None:
        return model.categories
    missing = [c for c in categories if c not in model.categories]
    if missing:
        raise MissingDataError(f"categories not declared by the model: {missing}")
    return tuple(categories)


def _require_valid(model: ProcessModel, db, grid=None, require_cost=True) -> None:
    report = validate_model(model, db, grid=grid, require_cost=require_cost)
    if not report.is_valid:
        raise InvalidModelError(
            f"model {model.name!r} fails validation:\n{report}", report=report
        )


def _needs_seed(model: ProcessModel) -> bool:
    for sp in model.subprocesses:
        for amount in (*(f.amount for f in sp.flows), sp.amount):
            if isinstance(amount, DistributionAmount) and amount.spec.kind != "point":
                return True
    return False


def run_static(model: ProcessModel, db, *, categories=None) -> UnitResult:
    """Deterministic single-value calculation on a 1x1 grid.

    Requires scalar inputs (point-mass distributions count as scalars;
    matrices only when the model grid is itself 1x1).  Cell for cell, the
    result is bit-identical to ``run_matrix`` on an all-scalar model.
    """
    cats = _select_categories(model, categories)
    one = ScenarioGrid(1, 1, model.grid.step_label, model.grid.step_origin)
    for sp in model.subprocesses:
        for name, amount in [(f.name, f.amount) for f in sp.flows] + [(sp.name, sp.amount)]:
            if isinstance(amount, DistributionAmount) and amount.spec.kind != "point":
                raise StaticModeError(
                    f"{name!r} has a {amount.spec.kind} distribution; "
                    "use run_monte_carlo or run_matrix"
                )
            if isinstance(amount, MatrixAmount) and model.grid.shape != (1, 1):
                raise StaticModeError(
                    f"{name!r} is a matrix amount on a "
                    f"{model.grid.n_scenarios}x{model.grid.n_timesteps} grid; "
                    "use run_matrix"
                )
    _require_valid(model, db, grid=one if model.grid.shape != (1, 1) else None)
    return _evaluate(model, db, one, None, cats, threads=1)


def run_matrix(
    model: ProcessModel,
    db,
    *,
    seed: int | None = None,
    categories=None,
    threads: int = 1,
) -> UnitResult:
    """Full scenario x time calculation (the hot path).

    ``seed`` is required when the model carries non-degenerate
    distribution amounts; with all-scalar inputs the result is cell-wise
    constant and equals ``run_static``.
    """
    cats = _select_categories(model, categories)
    _require_valid(model, db)
    if seed is None and _needs_seed(model):
        raise ValueError("model has distribution amounts; pass seed=")
    return _evaluate(model, db, model.grid, seed, cats, threads)


def run_monte_carlo(
    model: ProcessModel,
    db,
    n_runs: int,
    seed: int,
    *,
    categories=None,
    threads: int = 1,
) -> MonteCarloResult:
    """Sample the model's distributions and evaluate one run per scenario row.

    The scenario axis becomes the run axis (n_runs rows); every
    distribution draws once per run and holds across time.  Summary
    statistics (mean, sd, and the 2.5/50/97.5 percentiles with linear
    interpolation) are computed across runs, per time step.
    """
    if n_runs < 2:
        raise ValueError(f"n_runs must be >= 2, got {n_runs}")
    cats = _select_categories(model, categories)
    if not _needs_seed(model):
        warnings.warn(
            "model has no distribution amounts; Monte Carlo is degenerate",
            stacklevel=2,
        )
    mc_grid = ScenarioGrid(n_runs, model.grid.n_timesteps,
                           model.grid.step_label, model.grid.step_origin)
    _require_valid(model, db, grid=mc_grid)
    unit = _evaluate(model, db, mc_grid, seed, cats, threads)
    impact_stats = {cat: _summary_stats(unit.impacts[cat]) for cat in cats}
    return MonteCarloResult(
        n_runs=n_runs,
        seed=seed,
        samples=unit,
        impact_stats=impact_stats,
        cost_stats=_summary_stats(unit.cost),
    )


def _summary_stats(samples: Grid) -> SummaryStats:
    pcts = np.percentile(samples, [2.5, 50.0, 97.5], axis=0, method="linear")
    return SummaryStats(
        mean=samples.mean(axis=0),
        sd=samples.std(axis=0, ddof=1),
        p2_5=pcts[0],
        p50=pcts[1],
        p97_5=pcts[2],
    )


def compute_inventory(
    model: ProcessModel,
    db,
    *,
    seed: int | None = None,
    grid: ScenarioGrid | None = None,
) -> InventoryResult:
    """Aggregate per-substance emission grids from flow amounts.

    Each flow contributes (sub-process exchange x flow exchange x per-unit
    emission) for every substance in its background inventory; a flow
    tagged with ``substance`` additionally emits one unit of that
    substance per unit of flow.  Flows without inventory data simply
    contribute nothing.
    """
    grid = grid or model.grid
    _require_valid(model, db, grid=grid if grid is not model.grid else None,
                   require_cost=False)
    if seed is None and _needs_seed(model):
        raise ValueError("model has distribution amounts; pass seed=")
    shape = grid.shape
    emissions: dict[str, Grid] = {}
    for sp in model.subprocesses:
        sp_stream = None if seed is None else stream_for_subprocess(seed, sp.name)
        sp_x = _exchange_operand(sp.amount, grid, sp_stream)
        for flow in sp.flows:
            per_unit: dict[str, float] = {}
            row = db.rows.get(flow.background_ref) if db is not None else None
            if row is not None:
                per_unit.update(row.inventory)
            if flow.substance is not None:
                per_unit[flow.substance] = per_unit.get(flow.substance, 0.0) + 1.0
            if not per_unit:
                continue
            stream = None if seed is None else stream_for_flow(seed, sp.name, flow.name)
            x = _exchange_operand(flow.amount, grid, stream)
            if isinstance(x, np.ndarray) or isinstance(sp_x, np.ndarray):
                contrib = np.asarray(x) * np.asarray(sp_x)  # broadcasts scalar side
                contrib = np.ascontiguousarray(np.broadcast_to(contrib, shape))
            else:
                contrib = float(x) * float(sp_x)
            for substance, amount_per_unit in per_unit.items():
                acc = emissions.setdefault(
                    substance, np.zeros(shape, dtype=np.float64)
                )
                if isinstance(contrib, np.ndarray):
                    kernels.add_scaled(acc, amount_per_unit, contrib)
                else:
                    kernels.add_const(acc, amount_per_unit * contrib)
    return InventoryResult(grid=grid, emissions=emissions)
