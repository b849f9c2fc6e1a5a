"""Two-level process hierarchy and the scenario/time grid it is computed on.

A ProcessModel is a main process made of sub-processes; each sub-process
carries a list of flows (its inflows and outflows).  Every quantity in the
model is an exchange amount: a scalar, a scenario x time matrix, or a
distribution to be sampled once per scenario.  All definition types are
frozen and safe to share between concurrent evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ShapeError
from .sampler import DistributionSpec, SamplerStream, sample

if TYPE_CHECKING:
    from .io import UnitValueTable

FOREGROUND = "foreground"


@dataclass(frozen=True)
class ScenarioGrid:
    """Shape of one model run: scenario rows by time-step columns.

    ``step_label`` is free text ("year", "minute", ...); the engine never
    interprets it.  ``step_origin`` is the index of the first period, so a
    grid starting in 2025 with annual steps uses step_origin=2025.
    """

    n_scenarios: int
    n_timesteps: int
    step_label: str = "year"
    step_origin: int = 0

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ShapeError(f"n_scenarios must be >= 1, got {self.n_scenarios}")
        if self.n_timesteps < 1:
            raise ShapeError(f"n_timesteps must be >= 1, got {self.n_timesteps}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_scenarios, self.n_timesteps)


@dataclass(frozen=True)
class ScalarAmount:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, eq=False)
class MatrixAmount:
    """Explicit scenario x time grid; must match the run grid exactly."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"matrix amount must be 2-D, got ndim={arr.ndim}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class DistributionAmount:
    spec: DistributionSpec


ExchangeAmount = Union[ScalarAmount, MatrixAmount, DistributionAmount]


def as_amount(value) -> ExchangeAmount:
    """Coerce a number, 2-D array, DistributionSpec or amount to an amount."""
    if isinstance(value, (ScalarAmount, MatrixAmount, DistributionAmount)):
        return value
    if isinstance(value, DistributionSpec):
        return DistributionAmount(value)
    if isinstance(value, (int, float)):
        return ScalarAmount(float(value))
    return MatrixAmount(np.asarray(value))


@dataclass(frozen=True)
class FlowDefinition:
    """An inflow or outflow of a sub-process.

    Unit values resolve either through ``background_ref`` (a key into the
    background database) or inline via ``inline_unit_impact`` /
    ``inline_unit_cost`` with ``background_ref=FOREGROUND``; exactly one
    source may be resolvable per category.  Revenues are negative unit
    costs on outflows.  ``substance`` marks the flow itself as an emission
    of that substance (1 unit of flow = 1 unit of substance) for
    time-resolved impact assessment.
    """

    name: str
    direction: str  # "inflow" | "outflow"
    amount: ExchangeAmount
    background_ref: str = FOREGROUND
    inline_unit_impact: Mapping[str, float] | None = None
    inline_unit_cost: float | None = None
    substance: str | None = None

    def __post_init__(self):
        if self.direction not in ("inflow", "outflow"):
            raise ValueError(f"flow {self.name!r}: direction must be 'inflow' or 'outflow'")
        if self.inline_unit_impact is not None:
            object.__setattr__(
                self,
                "inline_unit_impact",
                {str(k): float(v) for k, v in self.inline_unit_impact.items()},
            )


@dataclass(frozen=True)
class SubProcessDefinition:
    """A sub-process: its amount per unit of main process, plus its flows."""

    name: str
    amount: ExchangeAmount
    flows: tuple[FlowDefinition, ...]

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))


@dataclass(frozen=True)
class FunctionalUnit:
    """Reference quantity the results are expressed against (metadata only)."""

    description: str = ""
    reference_amount: float = 1.0


@dataclass(frozen=True, eq=False)
class ProcessModel:
    """The main process: named sub-processes evaluated on one grid.

    ``production`` is an optional per-period series of delivered product
    (or energy) used by the economic indicators; length n_timesteps.
    ``discount_rate`` is per grid period, not per year.
    """

    name: str
    subprocesses: tuple[SubProcessDefinition, ...]
    grid: ScenarioGrid
    categories: tuple[str, ...]
    discount_rate: float = 0.0
    functional_unit: FunctionalUnit = field(default_factory=FunctionalUnit)
    production: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "subprocesses", tuple(self.subprocesses))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.production is not None:
            prod = np.ascontiguousarray(np.asarray(self.production, dtype=np.float64))
            prod.flags.writeable = False
            object.__setattr__(self, "production", prod)

    def has_distributions(self) -> bool:
        return any(
            isinstance(a, DistributionAmount)
            for a in iter_amounts(self)
        )


def iter_amounts(model: ProcessModel) -> Iterable[ExchangeAmount]:
    """All exchange amounts in document order: per sub-process, flows first."""
    for sp in model.subprocesses:
        for flow in sp.flows:
            yield flow.amount
        yield sp.amount


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class ValidationFinding:
    severity: str  # "error" | "warning"
    location: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[ValidationFinding] = field(default_factory=list)

    @property
    def errors(self) -> list[ValidationFinding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[ValidationFinding]:
        return [f for f in self.findings if f.severity == "warning"]

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def add_error(self, location: str, message: str) -> None:
        self.findings.append(ValidationFinding("error", location, message))

    def add_warning(self, location: str, message: str) -> None:
        self.findings.append(ValidationFinding("warning", location, message))

    def __str__(self):
        if not self.findings:
            return "OK"
        return "\n".join(str(f) for f in self.findings)


def _check_amount(
    report: ValidationReport, location: str, amount: ExchangeAmount, grid: ScenarioGrid
) -> None:
    if isinstance(amount, MatrixAmount):
        if amount.values.shape != grid.shape:
            report.add_error(
                location,
                f"matrix shape {amount.values.shape[0]}x{amount.values.shape[1]} "
                f"does not match grid, expected "
                f"{grid.n_scenarios}x{grid.n_timesteps}",
            )
        elif np.any(amount.values < 0):
            report.add_warning(location, "negative exchange amounts (avoided flow?)")
        if not np.all(np.isfinite(amount.values)):
            report.add_error(location, "matrix contains non-finite values")
    elif isinstance(amount, ScalarAmount):
        if not np.isfinite(amount.value):
            report.add_error(location, f"amount {amount.value} is not finite")
        elif amount.value < 0:
            report.add_warning(location, "negative exchange amount (avoided flow?)")


def _check_flow_resolution(
    report: ValidationReport,
    location: str,
    flow: FlowDefinition,
    categories: Sequence[str],
    db: "UnitValueTable | None",
    n_timesteps: int,
    require_cost: bool,
) -> None:
    row = None
    if flow.background_ref != FOREGROUND:
        if db is None:
            return  # structural pass only, resolvability checked with a db
        row = db.rows.get(flow.background_ref)
        if row is None:
            report.add_error(
                location,
                f"background key {flow.background_ref!r} not found in database",
            )
            return
    for cat in categories:
        in_db = row is not None and row.resolves_impact(cat)
        inline = flow.inline_unit_impact is not None and cat in flow.inline_unit_impact
        if in_db and inline:
            report.add_error(
                location,
                f"unit impact for category {cat!r} is defined both inline and "
                f"in database row {flow.background_ref!r}",
            )
        elif not in_db and not inline:
            report.add_error(location, f"no unit impact resolvable for category {cat!r}")
        if row is not None:
            override = row.impact_overrides.get(cat)
            if override is not None and len(override) != n_timesteps:
                report.add_error(
                    location,
                    f"per-period unit impacts for {cat!r} have length "
                    f"{len(override)}, expected {n_timesteps}",
                )
    if require_cost:
        cost_in_db = row is not None and row.unit_cost is not None
        cost_inline = flow.inline_unit_cost is not None
        if cost_in_db and cost_inline:
            report.add_error(location, "unit cost is defined both inline and in database")
        elif not cost_in_db and not cost_inline:
            report.add_error(location, "no unit cost resolvable")


def validate_model(
    model: ProcessModel,
    db: "UnitValueTable | None" = None,
    *,
    grid: ScenarioGrid | None = None,
    require_cost: bool = True,
) -> ValidationReport:
    """Collect every problem in the model; never raises.

    With ``db=None`` only structural checks run (names, shapes, rates);
    pass the background database to also check that unit values resolve.
    ``grid`` overrides the model grid for shape conformance, which the
    Monte Carlo driver uses after swapping the scenario count for n_runs.
    Negative amounts are warnings only: avoided burdens are legitimate.
    """
    report = ValidationReport()
    grid = grid or model.grid

    if not model.subprocesses:
        report.add_error(f"model {model.name!r}", "model has no sub-processes")
    if model.discount_rate < 0:
        report.add_error(
            f"model {model.name!r}",
            f"discount_rate must be >= 0, got {model.discount_rate}",
        )
    if model.production is not None and model.production.shape != (model.grid.n_timesteps,):
        report.add_error(
            f"model {model.name!r}",
            f"production series length {model.production.shape[0]} "
            f"does not match {model.grid.n_timesteps} time steps",
        )

    seen_sp: set[str] = set()
    for sp in model.subprocesses:
        sp_loc = f"subprocess {sp.name!r}"
        if sp.name in seen_sp:
            report.add_error(sp_loc, "duplicate sub-process name")
        seen_sp.add(sp.name)
        if not sp.flows:
            report.add_error(sp_loc, "sub-process has no flows")
        _check_amount(report, sp_loc, sp.amount, grid)
        seen_flows: set[str] = set()
        for flow in sp.flows:
            loc = f"{sp_loc}, flow {flow.name!r}"
            if flow.name in seen_flows:
                report.add_error(loc, "duplicate flow name within sub-process")
            seen_flows.add(flow.name)
            _check_amount(report, loc, flow.amount, grid)
            _check_flow_resolution(
                report, loc, flow, model.categories, db, grid.n_timesteps, require_cost
            )
    return report


# ---------------------------------------------------------------------------
# broadcasting

def broadcast_exchange(
    amount: ExchangeAmount,
    grid: ScenarioGrid,
    rng_stream: SamplerStream | None = None,
) -> np.ndarray:
    """Extend an exchange amount to a full scenario x time grid.

    Scalars fill the grid; matrices pass through after a shape check
    (idempotent, no copy); distributions draw once per scenario and hold
    that value across time, so each scenario row is one realization.
    """
    if isinstance(amount, ScalarAmount):
        return np.full(grid.shape, amount.value, dtype=np.float64)
    if isinstance(amount, MatrixAmount):
        if amount.values.shape != grid.shape:
            raise ShapeError(
                f"matrix amount has shape {amount.values.shape}, "
                f"grid expects {grid.shape}"
            )
        return amount.values
    if isinstance(amount, DistributionAmount):
        if amount.spec.kind == "point":
            return np.full(grid.shape, amount.spec.parameters[0], dtype=np.float64)
        if rng_stream is None:
            raise ValueError("distribution amounts require a sampler stream")
        draws = sample(amount.spec, grid.n_scenarios, rng_stream)
        return np.ascontiguousarray(
            np.repeat(draws[:, np.newaxis], grid.n_timesteps, axis=1)
        )
    raise TypeError(f"not an exchange amount: {amount!r}")
