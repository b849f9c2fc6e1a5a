import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcengine import (
    BackgroundRow,
    DistributionAmount,
    DistributionSpec,
    FlowDefinition,
    InvalidModelError,
    MatrixAmount,
    ProcessModel,
    ScalarAmount,
    ScenarioGrid,
    StaticModeError,
    SubProcessDefinition,
    compute_inventory,
    main_aggregate,
    run_matrix,
    run_monte_carlo,
    run_static,
    subprocess_aggregate,
)
from lcengine.engine import _row_blocks

from conftest import db_with, empty_db, simple_model
from modelgen import random_model
from oracles import oracle_unit_result


def grid_1x1(v):
    return np.array([[float(v)]])


class TestSubprocessAggregate:
    def test_two_flow_hand_value(self):
        sp = SubProcessDefinition(
            "s", ScalarAmount(1.0),
            flows=(FlowDefinition("a", "inflow", ScalarAmount(4.0)),
                   FlowDefinition("b", "inflow", ScalarAmount(5.0))),
        )
        out = subprocess_aggregate(sp, [grid_1x1(2), grid_1x1(3)], [grid_1x1(4), grid_1x1(5)])
        assert out[0, 0] == 23.0  # 2*4 + 3*5

    def test_identity_exchange(self):
        sp = SubProcessDefinition(
            "s", ScalarAmount(1.0), flows=(FlowDefinition("a", "inflow", ScalarAmount(1.0)),)
        )
        u = np.array([[3.25]])
        out = subprocess_aggregate(sp, [u], [grid_1x1(1)])
        assert out[0, 0] == 3.25

    def test_all_ones_2x2_three_flows(self):
        sp = SubProcessDefinition(
            "s", ScalarAmount(1.0),
            flows=tuple(FlowDefinition(f"f{i}", "inflow", ScalarAmount(1.0)) for i in range(3)),
        )
        ones = np.ones((2, 2))
        out = subprocess_aggregate(sp, [ones] * 3, [ones] * 3)
        # nested-loop oracle: per cell, sum of 3 products of ones
        expected = [[sum(1.0 * 1.0 for _ in range(3)) for _ in range(2)] for _ in range(2)]
        assert np.array_equal(out, expected)

    def test_shape_mismatch(self):
        sp = SubProcessDefinition(
            "s", ScalarAmount(1.0), flows=(FlowDefinition("a", "inflow", ScalarAmount(1.0)),)
        )
        from lcengine import ShapeError
        with pytest.raises(ShapeError):
            subprocess_aggregate(sp, [np.ones((2, 2))], [np.ones((2, 3))])


class TestMainAggregate:
    def test_single_subprocess_identity(self):
        g = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = main_aggregate([g], [np.ones((2, 2))])
        assert np.array_equal(out, g)

    def test_hand_value(self):
        out = main_aggregate([grid_1x1(10), grid_1x1(20)], [grid_1x1(1), grid_1x1(0.5)])
        assert out[0, 0] == 20.0  # 10*1 + 20*0.5

    def test_empty_rejected(self):
        from lcengine import ShapeError
        with pytest.raises(ShapeError):
            main_aggregate([], [])


class TestRunStatic:
    def test_passthrough(self):
        unit = run_static(simple_model(unit_impact=7.0), empty_db())
        assert unit.impacts["GWP100"][0, 0] == 7.0

    def test_all_zero_amounts(self):
        unit = run_static(simple_model(flow_amount=0.0, unit_impact=7.0, unit_cost=3.0),
                          empty_db())
        assert unit.impacts["GWP100"][0, 0] == 0.0
        assert unit.cost[0, 0] == 0.0

    def test_matches_oracle_on_random_scalar_models(self):
        rng = random.Random(101)
        for _ in range(20):
            model, db, data = random_model(rng, max_s=1, max_t=1)
            unit = run_static(model, db)
            expected = oracle_unit_result(data, model.categories)
            for cat in model.categories:
                assert unit.impacts[cat][0, 0] == pytest.approx(
                    expected["impacts"][cat][0][0], rel=1e-9, abs=1e-12
                )
            assert unit.cost[0, 0] == pytest.approx(
                expected["cost"][0][0], rel=1e-9, abs=1e-12
            )

    def test_rejects_matrix_on_large_grid(self, heatplant, background_db):
        with pytest.raises(StaticModeError):
            run_static(heatplant, background_db)

    def test_rejects_sampling_distributions(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("uniform", (0.0, 1.0)))
        )
        with pytest.raises(StaticModeError):
            run_static(model, empty_db())

    def test_accepts_point_distributions(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("point", (2.0,))),
            unit_impact=3.0,
        )
        unit = run_static(model, empty_db())
        assert unit.impacts["GWP100"][0, 0] == 6.0

    def test_validation_gate(self):
        model = simple_model(discount_rate=-1.0)
        with pytest.raises(InvalidModelError):
            run_static(model, empty_db())


class TestRunMatrix:
    def test_broadcast_consistency_bit_exact(self):
        model = simple_model(n_scenarios=100, n_timesteps=50,
                             flow_amount=3.7, sp_amount=0.9,
                             unit_impact=0.123, unit_cost=4.56)
        static = run_static(model, empty_db())
        matrix = run_matrix(model, empty_db())
        assert np.all(matrix.impacts["GWP100"] == static.impacts["GWP100"][0, 0])
        assert np.all(matrix.cost == static.cost[0, 0])

    def test_scenario_doubling_linearity(self):
        amounts = MatrixAmount(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
        model = simple_model(n_scenarios=2, n_timesteps=3, flow_amount=amounts,
                             unit_impact=1.7, unit_cost=0.3)
        unit = run_matrix(model, empty_db())
        assert np.allclose(unit.impacts["GWP100"][1], 2.0 * unit.impacts["GWP100"][0],
                           rtol=1e-12)

    def test_3x4_distinct_cells_vs_oracle(self):
        rng = random.Random(7)
        values = [[rng.uniform(0.1, 9) for _ in range(4)] for _ in range(3)]
        model = simple_model(n_scenarios=3, n_timesteps=4,
                             flow_amount=MatrixAmount(values),
                             unit_impact=2.5, unit_cost=1.5, sp_amount=1.25)
        unit = run_matrix(model, empty_db())
        data = {
            "grid": (3, 4),
            "subprocesses": [{
                "amount": 1.25,
                "flows": [{"amount": values, "unit_impact": {"GWP100": 2.5},
                           "unit_cost": 1.5}],
            }],
        }
        expected = oracle_unit_result(data, ("GWP100",))
        assert np.allclose(unit.impacts["GWP100"], expected["impacts"]["GWP100"], rtol=1e-9)
        assert np.allclose(unit.cost, expected["cost"], rtol=1e-9)

    def test_heatplant_matches_nested_loop_oracle(self, heatplant, background_db):
        unit = run_matrix(heatplant, background_db)
        co2_matrix = [[81000.0] * 5, [81000.0, 79000.0, 77000.0, 75000.0, 73000.0]]
        data = {
            "grid": (2, 5),
            "subprocesses": [
                {"amount": 1.0, "flows": [
                    {"amount": 1755.0, "unit_cost": 28.0,
                     "unit_impact": {"GWP100": 0.23, "AP": 0.0004}},
                    {"amount": 180.0, "unit_cost": 1.1,
                     "unit_impact": {"GWP100": 0.12, "AP": 0.0005}},
                ]},
                {"amount": 1.0, "flows": [
                    {"amount": 27.0, "unit_cost": 95.0,
                     "unit_impact": {"GWP100": 0.42, "AP": 0.0008}},
                    {"amount": 4.5, "unit_cost": 120.0,
                     "unit_impact": {"GWP100": 0.05, "AP": 0.0001}},
                    {"amount": co2_matrix, "unit_cost": 0.0,
                     "unit_impact": {"GWP100": 1.0, "AP": 0.0}},
                ]},
            ],
        }
        expected = oracle_unit_result(data, ("GWP100", "AP"))
        for cat in ("GWP100", "AP"):
            np.testing.assert_allclose(unit.impacts[cat], expected["impacts"][cat],
                                       rtol=1e-9)
        np.testing.assert_allclose(unit.cost, expected["cost"], rtol=1e-9)

    def test_oracle_equivalence_random_models(self):
        rng = random.Random(2024)
        for _ in range(30):
            model, db, data = random_model(rng)
            unit = run_matrix(model, db)
            expected = oracle_unit_result(data, model.categories)
            for cat in model.categories:
                assert np.allclose(unit.impacts[cat], expected["impacts"][cat],
                                   rtol=1e-9, atol=1e-12)
            assert np.allclose(unit.cost, expected["cost"], rtol=1e-9, atol=1e-12)

    def test_breakdowns_recompose_total(self):
        rng = random.Random(55)
        model, db, _ = random_model(rng)
        unit = run_matrix(model, db)
        for cat in model.categories:
            recomposed = sum(unit.contribution_impact(sp, cat)
                             for sp in unit.subprocess_names)
            np.testing.assert_allclose(recomposed, unit.impacts[cat], rtol=1e-9)
        recomposed_cost = sum(unit.contribution_cost(sp) for sp in unit.subprocess_names)
        np.testing.assert_allclose(recomposed_cost, unit.cost, rtol=1e-9)

    def test_permutation_invariance(self):
        rng = random.Random(31)
        model, db, _ = random_model(rng, max_sp=4, max_flows=4)
        unit = run_matrix(model, db)
        shuffled_sps = list(model.subprocesses)[::-1]
        shuffled_sps = [
            SubProcessDefinition(sp.name, sp.amount, tuple(reversed(sp.flows)))
            for sp in shuffled_sps
        ]
        permuted = ProcessModel(
            name=model.name, subprocesses=tuple(shuffled_sps), grid=model.grid,
            categories=model.categories,
        )
        unit_p = run_matrix(permuted, db)
        for cat in model.categories:
            np.testing.assert_allclose(unit_p.impacts[cat], unit.impacts[cat], rtol=1e-9)
        np.testing.assert_allclose(unit_p.cost, unit.cost, rtol=1e-9)

    @given(st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
    @settings(max_examples=20, deadline=None)
    def test_scaling_one_subprocess_is_linear(self, k):
        base_flow = FlowDefinition("f", "inflow", ScalarAmount(2.0),
                                   inline_unit_impact={"c": 3.0}, inline_unit_cost=1.0)
        other = SubProcessDefinition(
            "other", ScalarAmount(1.0),
            flows=(FlowDefinition("g", "inflow", ScalarAmount(1.0),
                                  inline_unit_impact={"c": 5.0}, inline_unit_cost=2.0),),
        )

        def build(scale):
            scaled_flow = FlowDefinition("f", "inflow", ScalarAmount(2.0 * scale),
                                         inline_unit_impact={"c": 3.0}, inline_unit_cost=1.0)
            target = SubProcessDefinition("target", ScalarAmount(1.0), flows=(scaled_flow,))
            return ProcessModel("m", (target, other), ScenarioGrid(2, 2), ("c",))

        base = run_matrix(build(1.0), empty_db())
        scaled = run_matrix(build(k), empty_db())
        base_target = base.contribution_impact("target", "c")
        scaled_target = scaled.contribution_impact("target", "c")
        np.testing.assert_allclose(scaled_target, k * base_target, rtol=1e-12, atol=1e-12)

    def test_threads_do_not_change_bits(self):
        rng = random.Random(99)
        model, db, _ = random_model(rng, max_s=4, max_t=4)
        serial = run_matrix(model, db, threads=1)
        threaded = run_matrix(model, db, threads=3)
        for cat in model.categories:
            assert np.array_equal(serial.impacts[cat], threaded.impacts[cat])
        assert np.array_equal(serial.cost, threaded.cost)

    def test_seed_required_with_distributions(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("uniform", (0.0, 1.0))),
            n_scenarios=3,
        )
        with pytest.raises(ValueError):
            run_matrix(model, empty_db())

    def test_categories_filter(self):
        flow = FlowDefinition("f", "inflow", ScalarAmount(1.0),
                              inline_unit_impact={"a": 1.0, "b": 2.0}, inline_unit_cost=0.0)
        sp = SubProcessDefinition("s", ScalarAmount(1.0), flows=(flow,))
        model = ProcessModel("m", (sp,), ScenarioGrid(1, 1), ("a", "b"))
        unit = run_matrix(model, empty_db(), categories=("b",))
        assert tuple(unit.impacts) == ("b",)
        from lcengine import MissingDataError
        with pytest.raises(MissingDataError):
            run_matrix(model, empty_db(), categories=("zzz",))


class TestRowBlocks:
    def test_partition_covers_all_rows(self):
        for n_rows in (1, 2, 5, 17):
            for n_blocks in (1, 2, 4, 32):
                blocks = _row_blocks(n_rows, n_blocks)
                covered = sorted(i for b in blocks for i in range(b.start, b.stop))
                assert covered == list(range(n_rows))


class TestMonteCarlo:
    def test_degenerate_point_masses_reproduce_static(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("point", (2.0,))),
            unit_impact=3.5, unit_cost=1.25, n_timesteps=4,
        )
        static = run_static(model, empty_db())
        with pytest.warns(UserWarning, match="degenerate"):
            mc = run_monte_carlo(model, empty_db(), n_runs=50, seed=1)
        assert np.all(mc.samples.impacts["GWP100"] == static.impacts["GWP100"][0, 0])
        assert np.all(mc.impact_stats["GWP100"].sd == 0.0)
        assert np.all(mc.impact_stats["GWP100"].mean == static.impacts["GWP100"][0, 0])
        assert np.all(mc.cost_stats.sd == 0.0)

    def test_uniform_mean_within_tolerance(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("uniform", (0.0, 2.0))),
            unit_impact=1.0,
        )
        mc = run_monte_carlo(model, empty_db(), n_runs=10_000, seed=3)
        assert abs(mc.impact_stats["GWP100"].mean[0] - 1.0) < 0.05

    def test_same_seed_identical_samples(self):
        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("normal", (5.0, 2.0))),
        )
        a = run_monte_carlo(model, empty_db(), n_runs=64, seed=11)
        b = run_monte_carlo(model, empty_db(), n_runs=64, seed=11)
        assert np.array_equal(a.samples.impacts["GWP100"], b.samples.impacts["GWP100"])
        c = run_monte_carlo(model, empty_db(), n_runs=64, seed=12)
        assert not np.array_equal(a.samples.impacts["GWP100"],
                                  c.samples.impacts["GWP100"])

    def test_adding_flow_preserves_other_draws(self):
        dist = DistributionAmount(DistributionSpec("uniform", (0.0, 1.0)))
        f1 = FlowDefinition("f1", "inflow", dist,
                            inline_unit_impact={"c": 1.0}, inline_unit_cost=0.0)
        f2 = FlowDefinition("f2", "inflow", dist,
                            inline_unit_impact={"c": 0.0}, inline_unit_cost=0.0)
        sp_one = SubProcessDefinition("s", ScalarAmount(1.0), flows=(f1,))
        sp_two = SubProcessDefinition("s", ScalarAmount(1.0), flows=(f1, f2))
        m_one = ProcessModel("m", (sp_one,), ScenarioGrid(1, 1), ("c",))
        m_two = ProcessModel("m", (sp_two,), ScenarioGrid(1, 1), ("c",))
        a = run_monte_carlo(m_one, empty_db(), n_runs=32, seed=5)
        b = run_monte_carlo(m_two, empty_db(), n_runs=32, seed=5)
        # f2 has zero unit values, so any change would come from draw coupling
        assert np.array_equal(a.samples.impacts["c"], b.samples.impacts["c"])

    def test_n_runs_validation(self):
        model = simple_model()
        with pytest.raises(ValueError):
            run_monte_carlo(model, empty_db(), n_runs=1, seed=0)

    def test_percentile_interpolation_matches_oracle(self):
        from oracles import oracle_mean, oracle_percentile, oracle_sd

        model = simple_model(
            flow_amount=DistributionAmount(DistributionSpec("lognormal", (0.0, 0.5))),
        )
        mc = run_monte_carlo(model, empty_db(), n_runs=101, seed=8)
        values = mc.samples.impacts["GWP100"][:, 0].tolist()
        stats = mc.impact_stats["GWP100"]
        assert stats.mean[0] == pytest.approx(oracle_mean(values), rel=1e-12)
        assert stats.sd[0] == pytest.approx(oracle_sd(values), rel=1e-12)
        for q, got in ((2.5, stats.p2_5[0]), (50, stats.p50[0]), (97.5, stats.p97_5[0])):
            assert got == pytest.approx(oracle_percentile(values, q), rel=1e-12)


class TestInventory:
    def test_hand_product(self):
        row = BackgroundRow(flow="fuel", unit_cost=0.0, impacts={"GWP100": 0.0},
                            inventory={"CO2": 2.0})
        flow = FlowDefinition("fuel", "inflow", ScalarAmount(3.0), background_ref="fuel")
        sp = SubProcessDefinition("s", ScalarAmount(1.0), flows=(flow,))
        model = ProcessModel("m", (sp,), ScenarioGrid(1, 1), ("GWP100",))
        inv = compute_inventory(model, db_with({"fuel": row}))
        assert inv.emissions["CO2"][0, 0] == 6.0

    def test_empty_inventory_contributes_nothing(self):
        model = simple_model()
        inv = compute_inventory(model, empty_db())
        assert inv.emissions == {}

    def test_same_substance_adds_across_flows(self):
        row = BackgroundRow(flow="fuel", unit_cost=0.0, impacts={"GWP100": 0.0},
                            inventory={"CO2": 2.0})
        f1 = FlowDefinition("fuel1", "inflow", ScalarAmount(3.0), background_ref="fuel")
        f2 = FlowDefinition("fuel2", "inflow", ScalarAmount(1.0), background_ref="fuel")
        sp = SubProcessDefinition("s", ScalarAmount(1.0), flows=(f1, f2))
        model = ProcessModel("m", (sp,), ScenarioGrid(1, 1), ("GWP100",))
        inv = compute_inventory(model, db_with({"fuel": row}))
        assert inv.emissions["CO2"][0, 0] == 8.0

    def test_substance_tag_is_unit_emission(self):
        model = simple_model(flow_amount=4.0, substance="CO2")
        inv = compute_inventory(model, empty_db())
        assert inv.emissions["CO2"][0, 0] == 4.0

    def test_matches_oracle(self, heatplant, background_db):
        inv = compute_inventory(heatplant, background_db)
        data = {
            "grid": (2, 5),
            "subprocesses": [
                {"amount": 1.0, "flows": [
                    {"amount": 1755.0, "unit_impact": {}, "unit_cost": 0,
                     "inventory": {"CO2": 36.0, "CH4": 0.15}},
                    {"amount": 180.0, "unit_impact": {}, "unit_cost": 0, "inventory": {}},
                ]},
                {"amount": 1.0, "flows": [
                    {"amount": 27.0, "unit_impact": {}, "unit_cost": 0,
                     "inventory": {"CO2": 380.0, "NOx": 0.45}},
                    {"amount": 4.5, "unit_impact": {}, "unit_cost": 0, "inventory": {}},
                    {"amount": [[81000.0] * 5, [81000.0, 79000.0, 77000.0, 75000.0, 73000.0]],
                     "unit_impact": {}, "unit_cost": 0, "inventory": {"CO2": 1.0}},
                ]},
            ],
        }
        from oracles import oracle_inventory

        expected = oracle_inventory(data)
        for substance, grid in expected.items():
            np.testing.assert_allclose(inv.emissions[substance], grid, rtol=1e-9)
