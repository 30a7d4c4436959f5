import numpy as np
import pytest

from gridest.grid_model import (
    AdmittanceMatrix,
    Bus,
    BusKind,
    DegenerateImpedance,
    Generator,
    GridCase,
    Line,
    ValidationError,
    assemble_admittance,
    export_grid,
    line_admittance,
    load_grid,
)

from conftest import random_grid


def two_bus(r=0.0, x=0.1, y_sh=0.0, shunts=((0.0, 0.0), (0.0, 0.0))):
    return GridCase(
        buses=(
            Bus(id=0, kind=BusKind.SLACK, shunt_g=shunts[0][0], shunt_b=shunts[0][1]),
            Bus(id=1, kind=BusKind.PQ, shunt_g=shunts[1][0], shunt_b=shunts[1][1]),
        ),
        lines=(Line(from_bus=0, to_bus=1, r=r, x=x, y_sh=y_sh),),
        generators=(Generator(bus=0, p_min=0, p_max=1, q_min=-1, q_max=1),),
    )


class TestLineAdmittance:
    def test_purely_reactive(self):
        y = line_admittance(Line(0, 1, r=0.0, x=0.1))
        assert y == pytest.approx(complex(0.0, -10.0), abs=1e-13)

    def test_hand_evaluated_mixed(self):
        # g = r/(r^2+x^2), b = -x/(r^2+x^2) at r=0.01, x=0.1
        y = line_admittance(Line(0, 1, r=0.01, x=0.1))
        assert y.real == pytest.approx(0.01 / 0.0101, rel=1e-14)
        assert y.imag == pytest.approx(-0.1 / 0.0101, rel=1e-14)
        assert y.real == pytest.approx(0.990099, abs=1e-6)
        assert y.imag == pytest.approx(-9.90099, abs=1e-5)

    def test_purely_resistive(self):
        assert line_admittance(Line(0, 1, r=1.0, x=0.0)) == pytest.approx(1.0 + 0j)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateImpedance):
            line_admittance(Line(0, 1, r=0.0, x=1e-5))

    def test_sign_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            line = Line(0, 1, r=float(rng.uniform(0, 1)), x=float(rng.uniform(1e-3, 1)))
            y = line_admittance(line)
            assert y.real >= 0.0
            assert y.imag <= 0.0


class TestAssemble:
    def test_single_line_stamp(self):
        y = assemble_admittance(two_bus()).entries
        expect = np.array([[-10j, 10j], [10j, -10j]])
        assert np.abs(y - expect).max() < 1e-12

    def test_three_bus_chain_diagonals(self):
        grid = GridCase(
            buses=(
                Bus(id=0, kind=BusKind.SLACK),
                Bus(id=1, kind=BusKind.PQ),
                Bus(id=2, kind=BusKind.PQ),
            ),
            lines=(Line(0, 1, r=0.0, x=0.1), Line(1, 2, r=0.0, x=0.1)),
            generators=(),
        )
        y = assemble_admittance(grid).entries
        assert y[0, 0] == pytest.approx(-10j)
        assert y[2, 2] == pytest.approx(-10j)
        assert y[1, 1] == pytest.approx(-20j)  # middle bus carries both lines

    def test_row_sums_zero_without_shunts(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            grid = random_grid(rng, int(rng.integers(3, 10)), with_shunts=False)
            y = assemble_admittance(grid).entries
            assert np.abs(y.sum(axis=1)).max() < 1e-12

    def test_exact_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            grid = random_grid(rng, int(rng.integers(3, 12)))
            y = assemble_admittance(grid).entries
            assert np.array_equal(y, y.T)

    def test_offdiagonal_only_on_lines(self):
        rng = np.random.default_rng(3)
        grid = random_grid(rng, 8)
        y = assemble_admittance(grid).entries
        lined = {(l.from_bus, l.to_bus) for l in grid.lines}
        lined |= {(b, a) for a, b in lined}
        for i in range(8):
            for j in range(8):
                if i != j and (i, j) not in lined:
                    assert y[i, j] == 0

    def test_entries_immutable(self):
        y = assemble_admittance(two_bus())
        with pytest.raises(ValueError):
            y.entries[0, 0] = 0


class TestAdmittanceMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            AdmittanceMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ValidationError):
            AdmittanceMatrix(np.zeros((2, 3)))


class TestCaseValidation:
    def test_two_slacks_rejected(self):
        with pytest.raises(ValidationError, match="slack"):
            GridCase(
                buses=(Bus(id=0, kind=BusKind.SLACK), Bus(id=1, kind=BusKind.SLACK)),
                lines=(Line(0, 1, 0.0, 0.1),),
                generators=(),
            )

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            GridCase(
                buses=(Bus(id=0, kind=BusKind.SLACK), Bus(id=1, kind=BusKind.PQ)),
                lines=(Line(0, 1, 0.0, 0.1), Line(1, 0, 0.01, 0.2)),
                generators=(),
            )

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError, match="self-loop"):
            GridCase(
                buses=(Bus(id=0, kind=BusKind.SLACK), Bus(id=1, kind=BusKind.PQ)),
                lines=(Line(0, 1, 0.0, 0.1), Line(1, 1, 0.0, 0.1)),
                generators=(),
            )

    def test_disconnected_rejected(self):
        with pytest.raises(ValidationError, match="connected"):
            GridCase(
                buses=(
                    Bus(id=0, kind=BusKind.SLACK),
                    Bus(id=1, kind=BusKind.PQ),
                    Bus(id=2, kind=BusKind.PQ),
                ),
                lines=(Line(0, 1, 0.0, 0.1),),
                generators=(),
            )

    def test_noncontiguous_ids_rejected(self):
        with pytest.raises(ValidationError, match="contiguous"):
            GridCase(
                buses=(Bus(id=0, kind=BusKind.SLACK), Bus(id=2, kind=BusKind.PQ)),
                lines=(Line(0, 1, 0.0, 0.1),),
                generators=(),
            )


class TestNativeFormat:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            grid = random_grid(rng, int(rng.integers(2, 9)))
            assert load_grid(export_grid(grid)) == grid

    def test_empty_buses_rejected(self):
        with pytest.raises(ValidationError):
            load_grid('{"base_mva": 100.0, "buses": [], "lines": [], "generators": []}')

    def test_error_paths_name_fields(self):
        doc = export_grid(two_bus()).replace('"kind": "slack"', '"kind": "slak"')
        with pytest.raises(ValidationError, match=r"buses\[0\].kind"):
            load_grid(doc)

    def test_missing_key_named(self):
        with pytest.raises(ValidationError, match=r"\$\.base_mva"):
            load_grid('{"buses": [], "lines": [], "generators": []}')

    def test_ieee14_round_trip_same_admittance(self, ieee14):
        back = load_grid(export_grid(ieee14))
        y0 = assemble_admittance(ieee14).entries
        y1 = assemble_admittance(back).entries
        assert np.abs(y0 - y1).max() < 1e-12

    def test_content_hash_stable(self, ieee14):
        assert ieee14.content_hash() == load_grid(export_grid(ieee14)).content_hash()
