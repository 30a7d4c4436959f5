import os

import numpy as np
import pytest

from gridest.datagen import ScenarioConfig, generate
from gridest.estimators import PhysParams, TrainConfig, observed_batch, train_pgnn
from gridest.grid_model import AdmittanceMatrix, ValidationError, assemble_admittance
from gridest.kron import ObservabilityMask, ReducedModel, reduce_case
from gridest.metrics_report import (
    LineCompareResult,
    MismatchResult,
    ReconError,
    RegSweepPoint,
    RegSweepResult,
    line_param_compare,
    mismatch,
    recon_error_curve,
    reg_sweep,
    relative_frobenius,
    write_fig2,
    write_fig3,
    write_fig4,
    write_table1,
)

from conftest import random_grid


class _FixedModel:
    """Predicts the stored targets plus a constant per-node offset."""

    def __init__(self, batch, offset):
        self.batch = batch
        self.offset = offset

    def predict(self, v, theta):
        return self.batch.p + self.offset, self.batch.q.copy()


@pytest.fixture(scope="module")
def batch6():
    rng = np.random.default_rng(0)
    grid = random_grid(rng, 6)
    s = generate(grid, ScenarioConfig.for_case("c1", seed=1, n_samples=10))
    return observed_batch(s, tuple(range(6)))


class TestMismatch:
    def test_perfect_predictor_zero(self, batch6):
        model = _FixedModel(batch6, np.zeros(6))
        assert mismatch(model, batch6).value == 0.0

    def test_single_node_offset_closed_form(self, batch6):
        delta = 0.3
        offset = np.zeros(6)
        offset[2] = delta
        res = mismatch(_FixedModel(batch6, offset), batch6)
        assert res.value == pytest.approx(delta**2 / 6, rel=1e-12)
        assert res.per_node[2] == pytest.approx(delta**2 / 6, rel=1e-12)

    def test_pure_function(self, batch6):
        model = _FixedModel(batch6, np.full(6, 0.1))
        assert mismatch(model, batch6).value == mismatch(model, batch6).value


class TestFrobenius:
    def test_identical_zero(self):
        y = AdmittanceMatrix(np.array([[1.0 + 1j, -1], [-1, 1 + 1j]]))
        assert relative_frobenius(y, y) == 0.0

    def test_doubled_matrix_error_one(self):
        y = AdmittanceMatrix(np.array([[2.0 - 5j, -2 + 5j], [-2 + 5j, 2 - 5j]]))
        y2 = AdmittanceMatrix(2.0 * y.entries)
        assert relative_frobenius(y2, y) == pytest.approx(1.0, rel=1e-14)


class TestReconCurve:
    def test_min_mean_max_order_and_monotone_setup(self, ieee14):
        cfg = ScenarioConfig.for_case("c5", seed=5, n_samples=10)
        tc = TrainConfig(lr=1e-2, epochs=400, init_r=1.0, init_x=1.0,
                         init_shunt_g=1.0, init_shunt_b=1.0, record_every=400)
        curve = recon_error_curve(ieee14, cfg, [5, 10], realizations=2, train_config=tc)
        for pt in curve:
            assert pt.min <= pt.mean <= pt.max
            assert len(pt.errors) == 2
            assert pt.failures == 0

    def test_spread_of_single_realization(self):
        pt_raw = ReconError(n_train=10, errors=(0.28,), failures=0, normalization="raw")
        assert pt_raw.spread == 0.0
        assert pt_raw.min == pt_raw.mean == pt_raw.max


class TestLineCompare:
    def ref_model(self, grid):
        return reduce_case(grid, ObservabilityMask.full(grid.n_bus), 1e-9)

    def test_identical_no_violations(self, ieee14):
        ref = self.ref_model(ieee14)
        by_pair = {
            (min(l.from_bus, l.to_bus), max(l.from_bus, l.to_bus)): l
            for l in ieee14.lines
        }
        params = PhysParams(
            edges=ref.edges,
            r=np.array([by_pair[e].r for e in ref.edges]),
            x=np.array([by_pair[e].x for e in ref.edges]),
            shunt_g=np.zeros(14),
            shunt_b=np.zeros(14),
        )
        cmp = line_param_compare(params, ref)
        assert len(cmp.rows) == len(ref.edges)
        assert cmp.violations() == ()
        assert cmp.fraction_physical() == 1.0
        for row in cmp.rows:
            assert row.g_est == pytest.approx(row.g_ref, abs=1e-9)
            assert row.b_est == pytest.approx(row.b_ref, abs=1e-9)
        assert cmp.susceptance_correlation() > 0.999999

    def test_negative_conductance_flagged(self, ieee14):
        ref = self.ref_model(ieee14)
        params = PhysParams.initial(ref.edges, 14, 0.01, 0.1, 0, 0)
        params.r[0] = -0.01  # forces g < 0 on that line
        cmp = line_param_compare(params, ref)
        flagged = [r.bus_pair for r in cmp.violations()]
        i, j = ref.edges[0]
        assert (min(i, j), max(i, j)) in flagged

    def test_orientation_symmetric(self, ieee14):
        ref = self.ref_model(ieee14)
        params = PhysParams.initial(ref.edges, 14, 0.01, 0.1, 0, 0)
        flipped = PhysParams(
            edges=tuple((j, i) for i, j in params.edges),
            r=params.r.copy(),
            x=params.x.copy(),
            shunt_g=params.shunt_g.copy(),
            shunt_b=params.shunt_b.copy(),
        )
        a = line_param_compare(params, ref)
        b = line_param_compare(flipped, ref)
        assert [r.bus_pair for r in a.rows] == [r.bus_pair for r in b.rows]
        assert [r.b_est for r in a.rows] == pytest.approx([r.b_est for r in b.rows])

    def test_unmatched_reported(self, ieee14):
        ref = self.ref_model(ieee14)
        params = PhysParams.initial(ref.edges[:-1] + ((0, 13),), 14, 0.01, 0.1, 0, 0)
        cmp = line_param_compare(params, ref)
        assert (0, 13) in cmp.unmatched_est or (0, 13) in {r.bus_pair for r in cmp.rows}
        assert len(cmp.unmatched_ref) >= 1


class TestRegSweep:
    def test_single_point_curve(self, ieee14):
        mask = ObservabilityMask.generators(ieee14)
        rm = reduce_case(ieee14, mask, 0.02)
        s = generate(ieee14, ScenarioConfig.for_case("c1", seed=2, n_samples=20))
        batch = observed_batch(s, mask.observed)
        tc = TrainConfig(lr=5e-3, epochs=100, use_correction=True, units_per_layer=6,
                         init_r=0.1, init_x=0.6, init_shunt_g=0.1, init_shunt_b=0.01,
                         record_every=100)
        res = reg_sweep(rm, batch, [1e-4], tc)
        assert len(res.points) == 1
        assert res.argmin_alpha() == 1e-4

    def test_repeat_alpha_deterministic(self, ieee14):
        mask = ObservabilityMask.generators(ieee14)
        rm = reduce_case(ieee14, mask, 0.02)
        s = generate(ieee14, ScenarioConfig.for_case("c1", seed=2, n_samples=20))
        batch = observed_batch(s, mask.observed)
        tc = TrainConfig(lr=5e-3, epochs=60, use_correction=True, units_per_layer=6,
                         init_r=0.1, init_x=0.6, init_shunt_g=0.1, init_shunt_b=0.01,
                         record_every=60)
        res = reg_sweep(rm, batch, [1e-3, 1e-3], tc)
        assert res.points[0].error == res.points[1].error

    def test_interior_helper(self):
        pts = tuple(
            RegSweepPoint(reg_coeff=a, error=e, data_term=0.0, diverged=False)
            for a, e in [(0.0, 0.5), (1e-4, 0.2), (1.0, 0.6)]
        )
        assert RegSweepResult(points=pts).interior_minimum()
        pts2 = tuple(
            RegSweepPoint(reg_coeff=a, error=e, data_term=0.0, diverged=False)
            for a, e in [(0.0, 0.1), (1e-4, 0.2), (1.0, 0.6)]
        )
        assert not RegSweepResult(points=pts2).interior_minimum()


class TestEmission:
    def test_files_written(self, tmp_path, ieee14):
        write_table1(
            tmp_path,
            {"pgnn": {"c1": 1e-6}, "vanilla": {"c1": 5e-6, "c6": 1.4}},
            {"pgnn": {"c1": 1e-6}, "vanilla": {"c1": 4e-6}},
        )
        curve = [ReconError(n_train=10, errors=(0.1, 0.2), failures=0, normalization="raw")]
        write_fig2(tmp_path, curve)
        ref = reduce_case(ieee14, ObservabilityMask.generators(ieee14), 0.02)
        params = PhysParams.initial(ref.edges, 5, 0.1, 0.6, 0.1, 0.01)
        write_fig3(tmp_path, line_param_compare(params, ref))
        sweep = RegSweepResult(
            points=(RegSweepPoint(reg_coeff=0.1, error=0.2, data_term=0.0, diverged=False),)
        )
        write_fig4(tmp_path, sweep)
        for name in ("table1.csv", "table1_train.csv", "fig2.csv", "fig2.gp",
                     "fig3.csv", "fig3.gp", "fig4.csv", "fig4.gp"):
            assert (tmp_path / name).exists(), name
        header = (tmp_path / "table1.csv").read_text().splitlines()[0]
        assert header == "method,c1,c2,c3,c4,c5,c6"
