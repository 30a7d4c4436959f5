import numpy as np
import pytest

from gridest.grid_model import (
    AdmittanceMatrix,
    Bus,
    BusKind,
    Line,
    GridCase,
    ValidationError,
    assemble_admittance,
)
from gridest.kron import (
    ObservabilityMask,
    SingularInteriorBlock,
    effective_injections,
    export_reduced,
    extract_reduced_graph,
    kron_reduce,
    load_reduced,
    reduce_case,
)
from gridest.powerflow import VoltageState, inverse_pf

from conftest import random_grid


def chain3():
    return GridCase(
        buses=(
            Bus(id=0, kind=BusKind.SLACK),
            Bus(id=1, kind=BusKind.PQ),
            Bus(id=2, kind=BusKind.PQ),
        ),
        lines=(Line(0, 1, r=0.0, x=0.1), Line(1, 2, r=0.0, x=0.1)),
        generators=(),
    )


def solve_ohm(y, currents):
    return np.linalg.solve(y.entries, currents)


class TestKronReduce:
    def test_full_mask_is_identity(self):
        rng = np.random.default_rng(0)
        grid = random_grid(rng, 6)
        y = assemble_admittance(grid)
        red = kron_reduce(y, ObservabilityMask.full(6))
        assert np.array_equal(red.entries, y.entries)

    def test_chain_series_combination(self):
        # eliminating the middle of two b = -10 lines in series leaves a
        # single effective b = -5 line between the end buses
        y = assemble_admittance(chain3())
        red = kron_reduce(y, ObservabilityMask(observed=(0, 2)))
        expect = np.array([[-5j, 5j], [5j, -5j]])
        assert np.abs(red.entries - expect).max() < 1e-12

    def test_ohms_law_identity_random_grids(self):
        # brute-force check: with V solving the full I = Y V, the reduced
        # currents I_o - Y_ou Y_uu^-1 I_u equal Y_red V_o
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(4, 13))
            grid = random_grid(rng, n)
            y = assemble_admittance(grid)
            n_obs = int(rng.integers(1, n))
            obs = tuple(sorted(rng.choice(n, size=n_obs, replace=False).tolist()))
            mask = ObservabilityMask(observed=obs)
            unobs = list(mask.unobserved(n))
            currents = rng.normal(size=n) + 1j * rng.normal(size=n)
            volt = solve_ohm(y, currents)
            red = kron_reduce(y, mask)
            you = y.entries[np.ix_(list(obs), unobs)]
            yuu = y.entries[np.ix_(unobs, unobs)]
            i_red = currents[list(obs)]
            if unobs:
                i_red = i_red - you @ np.linalg.solve(yuu, currents[unobs])
            assert np.abs(i_red - red.entries @ volt[list(obs)]).max() < 1e-10

    def test_sequential_equals_joint(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(5, 12))
            grid = random_grid(rng, n)
            y = assemble_admittance(grid)
            drop = rng.choice(np.arange(1, n), size=2, replace=False)
            a, b = int(drop[0]), int(drop[1])
            keep_a = tuple(i for i in range(n) if i != a)
            joint = kron_reduce(y, ObservabilityMask(observed=tuple(
                i for i in range(n) if i not in (a, b))))
            step1 = kron_reduce(y, ObservabilityMask(observed=keep_a))
            pos = {bus: k for k, bus in enumerate(keep_a)}
            step2 = kron_reduce(
                step1, ObservabilityMask(observed=tuple(
                    pos[i] for i in keep_a if i != b))
            )
            assert np.abs(step2.entries - joint.entries).max() < 1e-10

    def test_symmetry_and_row_sums_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(4, 10))
            grid = random_grid(rng, n, with_shunts=False)
            y = assemble_admittance(grid)
            red = kron_reduce(y, ObservabilityMask(observed=tuple(range(n // 2 + 1))))
            assert np.array_equal(red.entries, red.entries.T)
            assert np.abs(red.entries.sum(axis=1)).max() < 1e-10

    def test_singular_interior_block(self):
        y = np.array(
            [[1.0 + 1j, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]], dtype=complex
        )
        with pytest.raises(SingularInteriorBlock):
            kron_reduce(AdmittanceMatrix(y), ObservabilityMask(observed=(0,)))


class TestEffectiveInjections:
    def test_zero_unobserved_current_kills_mixed_term(self):
        rng = np.random.default_rng(4)
        grid = random_grid(rng, 6)
        y = assemble_admittance(grid)
        mask = ObservabilityMask(observed=(0, 2, 4))
        unobs = list(mask.unobserved(6))
        # choose voltages such that unobserved currents vanish
        currents = np.zeros(6, dtype=complex)
        currents[[0, 2, 4]] = rng.normal(size=3) + 1j * rng.normal(size=3)
        volt = solve_ohm(y, currents)
        state = VoltageState(v=np.abs(volt), theta=np.angle(volt))
        s_red, s_unobs = effective_injections(y, state, currents, mask)
        assert np.abs(s_unobs).max() < 1e-10
        s_direct = volt[[0, 2, 4]] * np.conj(currents[[0, 2, 4]])
        assert np.abs(s_red - s_direct).max() < 1e-10

    def test_two_terms_sum_to_measured_power(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(4, 10))
            grid = random_grid(rng, n)
            y = assemble_admittance(grid)
            obs = tuple(sorted(rng.choice(n, size=3, replace=False).tolist()))
            mask = ObservabilityMask(observed=obs)
            currents = rng.normal(size=n) + 1j * rng.normal(size=n)
            volt = solve_ohm(y, currents)
            state = VoltageState(v=np.abs(volt), theta=np.angle(volt))
            s_red, s_unobs = effective_injections(y, state, currents, mask)
            measured = volt[list(obs)] * np.conj(currents[list(obs)])
            assert np.abs(s_red + s_unobs - measured).max() < 1e-10

    def test_chain_with_middle_load_matches_inverse_pf(self):
        # both terms nonzero; their sum equals the observed slice of the
        # direct voltage-to-power evaluation
        grid = chain3()
        y = assemble_admittance(grid)
        v = np.array([1.0, 0.98, 1.01])
        th = np.array([0.0, -0.05, -0.1])
        state = VoltageState(v=v, theta=th)
        volt = state.phasors()
        currents = y.entries @ volt
        mask = ObservabilityMask(observed=(0, 2))
        s_red, s_unobs = effective_injections(y, state, currents, mask)
        assert np.abs(s_unobs).max() > 1e-3
        s_full = inverse_pf(y, state)
        expect = s_full.p[[0, 2]] + 1j * s_full.q[[0, 2]]
        assert np.abs(s_red + s_unobs - expect).max() < 1e-10

    def test_mask_order_does_not_matter(self):
        rng = np.random.default_rng(6)
        grid = random_grid(rng, 7)
        y = assemble_admittance(grid)
        currents = rng.normal(size=7) + 1j * rng.normal(size=7)
        volt = solve_ohm(y, currents)
        state = VoltageState(v=np.abs(volt), theta=np.angle(volt))
        a = effective_injections(y, state, currents, ObservabilityMask(observed=(5, 1, 3)))
        b = effective_injections(y, state, currents, ObservabilityMask(observed=(1, 3, 5)))
        assert np.abs(a[0] - b[0]).max() == 0
        assert np.abs(a[1] - b[1]).max() == 0


class TestReducedGraph:
    def test_tiny_threshold_keeps_all_nonzero(self):
        rng = np.random.default_rng(7)
        grid = random_grid(rng, 8)
        y = assemble_admittance(grid)
        red = kron_reduce(y, ObservabilityMask(observed=(0, 1, 2, 3)))
        model = extract_reduced_graph(red, 1e-12)
        nonzero = sum(
            1
            for i in range(4)
            for j in range(i + 1, 4)
            if abs(red.entries[i, j]) > 0
        )
        assert len(model.edges) == nonzero

    def test_chain_reduction_single_edge(self):
        y = assemble_admittance(chain3())
        red = kron_reduce(y, ObservabilityMask(observed=(0, 2)))
        model = extract_reduced_graph(red, 0.5)
        assert model.edges == ((0, 1),)
        assert model.n_components == 1

    def test_fully_observed_grid_keeps_line_set(self):
        rng = np.random.default_rng(8)
        grid = random_grid(rng, 8)
        y = assemble_admittance(grid)
        model = extract_reduced_graph(y, 1e-9, observed=tuple(range(8)))
        expect = {(min(l.from_bus, l.to_bus), max(l.from_bus, l.to_bus)) for l in grid.lines}
        assert set(model.edges) == expect

    def test_threshold_bounds_checked(self):
        y = assemble_admittance(chain3())
        with pytest.raises(ValidationError):
            extract_reduced_graph(y, 0.0)
        with pytest.raises(ValidationError):
            extract_reduced_graph(y, 1.0)

    def test_export_round_trip(self, ieee14):
        model = reduce_case(ieee14, ObservabilityMask.generators(ieee14), 0.02)
        text = export_reduced(model, ieee14)
        back = load_reduced(text)
        assert back.observed == model.observed
        assert back.edges == model.edges
        # rebuilt matrix matches on kept edges and diagonal
        for i, j in model.edges:
            assert back.y_reduced.entries[i, j] == pytest.approx(
                model.y_reduced.entries[i, j], rel=1e-9
            )
        assert np.allclose(
            np.diag(back.y_reduced.entries), np.diag(model.y_reduced.entries), rtol=1e-9
        )

    def test_reduced_file_rejected_by_grid_loader(self, ieee14):
        from gridest.grid_model import load_grid

        model = reduce_case(ieee14, ObservabilityMask.generators(ieee14), 0.02)
        with pytest.raises(ValidationError, match="reduced"):
            load_grid(export_reduced(model, ieee14))


class TestMask:
    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            ObservabilityMask(observed=())

    def test_duplicates_rejected(self):
        with pytest.raises(ValidationError):
            ObservabilityMask(observed=(1, 1))

    def test_generators_default(self, ieee14):
        assert ObservabilityMask.generators(ieee14).observed == (0, 1, 2, 5, 7)
