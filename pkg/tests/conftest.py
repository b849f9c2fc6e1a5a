import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / modelgen helpers

from lcengine import (
    BackgroundRow,
    FlowDefinition,
    ProcessModel,
    ScenarioGrid,
    SubProcessDefinition,
    UnitValueTable,
    as_amount,
    load_background_db,
    load_dcf_tables,
    load_model,
)

SAMPLES = Path(__file__).parent.parent / "sample_models"


@pytest.fixture(scope="session")
def samples_dir() -> Path:
    return SAMPLES


@pytest.fixture(scope="session")
def heatplant():
    return load_model(SAMPLES / "heatplant.model")


@pytest.fixture(scope="session")
def heatplant_uncertain():
    return load_model(SAMPLES / "heatplant_uncertain.model")


@pytest.fixture(scope="session")
def background_db():
    return load_background_db(SAMPLES / "background.csv")


@pytest.fixture(scope="session")
def dcf_tables():
    return load_dcf_tables(SAMPLES / "dcf.csv")


def simple_model(
    *,
    n_scenarios=1,
    n_timesteps=1,
    flow_amount=1.0,
    sp_amount=1.0,
    unit_impact=1.0,
    unit_cost=0.0,
    category="GWP100",
    substance=None,
    production=None,
    discount_rate=0.0,
) -> ProcessModel:
    """One sub-process, one inline flow; the smallest useful model."""
    flow = FlowDefinition(
        name="only_flow",
        direction="inflow",
        amount=as_amount(flow_amount),
        inline_unit_impact={category: unit_impact},
        inline_unit_cost=unit_cost,
        substance=substance,
    )
    sp = SubProcessDefinition(
        name="only_sp",
        amount=as_amount(sp_amount),
        flows=(flow,),
    )
    return ProcessModel(
        name="simple",
        subprocesses=(sp,),
        grid=ScenarioGrid(n_scenarios, n_timesteps),
        categories=(category,),
        discount_rate=discount_rate,
        production=production,
    )


def empty_db() -> UnitValueTable:
    return UnitValueTable(rows={})


def db_with(rows: dict[str, BackgroundRow]) -> UnitValueTable:
    return UnitValueTable(rows=rows)
