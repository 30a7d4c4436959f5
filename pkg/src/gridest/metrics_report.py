"""Quantitative evaluations and exportable figure/table data.

Covers: mean squared injection mismatch of a trained estimator over a sample
set, admittance reconstruction error as a function of training-set size,
per-line comparison of estimated against reduced-reference parameters, and
the dependence of reconstruction quality on the correction regularizer.
Figures are emitted as CSV files plus small gnuplot scripts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datagen import SampleSet, ScenarioConfig, generate, split
from .estimators import (
    Divergence,
    ObservedBatch,
    PhysParams,
    TrainConfig,
    observed_batch,
    predict_injections,
    train_pgnn,
)
from .grid_model import AdmittanceMatrix, GridCase, ValidationError, assemble_admittance
from .kron import ReducedModel


@dataclass(frozen=True)
class MismatchResult:
    """Mean squared injection mismatch, normalized by samples * nodes."""

    value: float
    n_samples: int
    n_nodes: int
    per_node: np.ndarray  # per-node contribution, same normalization

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("mismatch cannot be negative")


def mismatch(model, batch: ObservedBatch) -> MismatchResult:
    """Average squared prediction error of nodal injections over a batch."""
    p_hat, q_hat = predict_injections(model, batch.v, batch.theta)
    se = (p_hat - batch.p) ** 2 + (q_hat - batch.q) ** 2
    norm = batch.n_samples * batch.n_nodes
    return MismatchResult(
        value=float(se.sum() / norm),
        n_samples=batch.n_samples,
        n_nodes=batch.n_nodes,
        per_node=se.sum(axis=0) / norm,
    )


@dataclass(frozen=True)
class ReconError:
    """Relative Frobenius reconstruction error over several realizations."""

    n_train: int
    errors: tuple[float, ...]
    failures: int
    normalization: str  # "raw" or "per_node"

    @property
    def min(self) -> float:
        return min(self.errors)

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def max(self) -> float:
        return max(self.errors)

    @property
    def spread(self) -> float:
        return self.max - self.min


def relative_frobenius(y_est: AdmittanceMatrix, y_ref: AdmittanceMatrix) -> float:
    if y_est.n != y_ref.n:
        raise ValidationError("matrices must have equal dimension")
    return float(
        np.linalg.norm(y_est.entries - y_ref.entries) / np.linalg.norm(y_ref.entries)
    )


def recon_error_curve(
    grid: GridCase,
    case_config: ScenarioConfig,
    sample_counts: list[int],
    realizations: int,
    train_config: TrainConfig,
    normalization: str = "raw",
) -> list[ReconError]:
    """Reconstruction error of the full admittance matrix vs training size.

    For each N, trains `realizations` times on freshly generated N-sample
    sets with distinct seeds; training divergences are recorded per point
    rather than raised. normalization "per_node" divides errors by the bus
    count (useful when comparing grids of different size).
    """
    if normalization not in ("raw", "per_node"):
        raise ValidationError("normalization must be 'raw' or 'per_node'")
    y_ref = assemble_admittance(grid)
    observed = tuple(range(grid.n_bus))
    out = []
    for n_train in sample_counts:
        errors = []
        failures = 0
        for real in range(realizations):
            seed = case_config.seed + 1000 * (real + 1) + n_train
            cfg = ScenarioConfig.from_dict({**case_config.to_dict(), "seed": seed, "n_samples": n_train})
            samples = generate(grid, cfg)
            batch = observed_batch(samples, observed)
            try:
                model, _ = train_pgnn(grid, batch, train_config)
            except Divergence:
                failures += 1
                continue
            err = relative_frobenius(model.params.assemble(), y_ref)
            if normalization == "per_node":
                err /= grid.n_bus
            errors.append(err)
        if not errors:
            raise Divergence(f"every realization diverged at N={n_train}")
        out.append(
            ReconError(
                n_train=n_train,
                errors=tuple(errors),
                failures=failures,
                normalization=normalization,
            )
        )
    return out


@dataclass(frozen=True)
class LineCompareRow:
    bus_pair: tuple[int, int]
    g_est: float
    b_est: float
    g_ref: float
    b_ref: float
    y_ref_mag: float
    violation: bool  # outside physical ranges: g < 0 or b > 0


@dataclass(frozen=True)
class LineCompareResult:
    rows: tuple[LineCompareRow, ...]
    unmatched_est: tuple[tuple[int, int], ...]
    unmatched_ref: tuple[tuple[int, int], ...]

    def violations(self) -> tuple[LineCompareRow, ...]:
        return tuple(r for r in self.rows if r.violation)

    def fraction_physical(self) -> float:
        if not self.rows:
            return 1.0
        return 1.0 - len(self.violations()) / len(self.rows)

    def susceptance_correlation(self) -> float:
        b_est = np.array([r.b_est for r in self.rows])
        b_ref = np.array([r.b_ref for r in self.rows])
        if len(self.rows) < 2 or b_est.std() == 0 or b_ref.std() == 0:
            return 1.0
        return float(np.corrcoef(b_est, b_ref)[0, 1])


def line_param_compare(est: PhysParams, ref: ReducedModel) -> LineCompareResult:
    """Align estimated effective-line parameters with the reduced reference.

    Lines are matched by unordered node pair (positions in observed order);
    unmatched pairs on either side are reported separately. Estimated lines
    with g < 0 or b > 0 are flagged as outside their physical range.
    """
    ge, be = est.edge_admittances()
    est_map = {
        (min(i, j), max(i, j)): (float(ge[k]), float(be[k]))
        for k, (i, j) in enumerate(est.edges)
    }
    y_ref = ref.y_reduced.entries
    ref_map = {
        (min(i, j), max(i, j)): (-y_ref[i, j]).real
        for i, j in ref.edges
    }
    ref_b = {
        (min(i, j), max(i, j)): (-y_ref[i, j]).imag
        for i, j in ref.edges
    }
    rows = []
    for pair in sorted(est_map):
        if pair not in ref_map:
            continue
        g_e, b_e = est_map[pair]
        rows.append(
            LineCompareRow(
                bus_pair=pair,
                g_est=g_e,
                b_est=b_e,
                g_ref=float(ref_map[pair]),
                b_ref=float(ref_b[pair]),
                y_ref_mag=float(abs(y_ref[pair[0], pair[1]])),
                violation=(g_e < 0.0) or (b_e > 0.0),
            )
        )
    unmatched_est = tuple(p for p in sorted(est_map) if p not in ref_map)
    unmatched_ref = tuple(p for p in sorted(ref_map) if p not in est_map)
    return LineCompareResult(
        rows=tuple(rows), unmatched_est=unmatched_est, unmatched_ref=unmatched_ref
    )


@dataclass(frozen=True)
class RegSweepPoint:
    reg_coeff: float
    error: float  # relative Frobenius error of the reduced matrix
    data_term: float
    diverged: bool


@dataclass(frozen=True)
class RegSweepResult:
    points: tuple[RegSweepPoint, ...]

    def argmin_alpha(self) -> float:
        ok = [p for p in self.points if not p.diverged]
        return min(ok, key=lambda p: p.error).reg_coeff

    def interior_minimum(self) -> bool:
        ok = [p for p in self.points if not p.diverged]
        best = min(range(len(ok)), key=lambda k: ok[k].error)
        return 0 < best < len(ok) - 1


def reg_sweep(
    reduced: ReducedModel,
    train: ObservedBatch,
    reg_coeffs: list[float],
    train_config: TrainConfig,
) -> RegSweepResult:
    """Reconstruction quality of the reduced matrix for each regularizer
    value; per-point training failures are recorded, not raised."""
    points = []
    for alpha in reg_coeffs:
        cfg_dict = train_config.to_dict()
        cfg_dict["reg_coeff"] = alpha
        cfg = TrainConfig(**cfg_dict)
        try:
            model, report = train_pgnn(reduced, train, cfg)
        except Divergence:
            points.append(
                RegSweepPoint(reg_coeff=alpha, error=float("inf"), data_term=float("inf"), diverged=True)
            )
            continue
        err = relative_frobenius(model.params.assemble(), reduced.y_reduced)
        points.append(
            RegSweepPoint(
                reg_coeff=alpha, error=err, data_term=report.final_data, diverged=False
            )
        )
    return RegSweepResult(points=tuple(points))


# --- file emission -------------------------------------------------------------


def _write(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def write_table1(
    out_dir,
    validation: dict[str, dict[str, float]],
    train: dict[str, dict[str, float]],
    cases: tuple[str, ...] = ("c1", "c2", "c3", "c4", "c5", "c6"),
) -> None:
    """table1.csv / table1_train.csv: method rows, case columns."""

    def table(values: dict[str, dict[str, float]]) -> str:
        lines = ["method," + ",".join(cases)]
        for method in sorted(values):
            row = [method]
            for case in cases:
                val = values[method].get(case)
                row.append("" if val is None else repr(float(val)))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    _write(os.path.join(out_dir, "table1.csv"), table(validation))
    _write(os.path.join(out_dir, "table1_train.csv"), table(train))


def write_fig2(out_dir, curve: list[ReconError]) -> None:
    """fig2.csv + fig2.gp: reconstruction error vs training-set size."""
    lines = ["n_train,err_min,err_mean,err_max,failures,normalization"]
    for pt in curve:
        lines.append(
            f"{pt.n_train},{repr(pt.min)},{repr(pt.mean)},{repr(pt.max)},"
            f"{pt.failures},{pt.normalization}"
        )
    _write(os.path.join(out_dir, "fig2.csv"), "\n".join(lines) + "\n")
    _write(
        os.path.join(out_dir, "fig2.gp"),
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'training samples'\n"
        "set ylabel 'relative Frobenius error'\n"
        "plot 'fig2.csv' skip 1 using 1:2 with points title 'min', \\\n"
        "     'fig2.csv' skip 1 using 1:3 with linespoints title 'mean', \\\n"
        "     'fig2.csv' skip 1 using 1:4 with points title 'max'\n",
    )


def write_fig3(out_dir, compare: LineCompareResult) -> None:
    """fig3.csv + fig3.gp: estimated vs reference line parameters."""
    lines = ["node_i,node_j,g_est,g_ref,b_est,b_ref,y_ref_mag,violation"]
    for r in compare.rows:
        lines.append(
            f"{r.bus_pair[0]},{r.bus_pair[1]},{repr(r.g_est)},{repr(r.g_ref)},"
            f"{repr(r.b_est)},{repr(r.b_ref)},{repr(r.y_ref_mag)},{int(r.violation)}"
        )
    _write(os.path.join(out_dir, "fig3.csv"), "\n".join(lines) + "\n")
    _write(
        os.path.join(out_dir, "fig3.gp"),
        "set datafile separator ','\n"
        "set xlabel 'reference'\n"
        "set ylabel 'estimated'\n"
        "plot 'fig3.csv' skip 1 using 4:3 with points title 'conductance', \\\n"
        "     'fig3.csv' skip 1 using 6:5 with points title 'susceptance', \\\n"
        "     x with lines notitle\n",
    )


def write_fig4(out_dir, sweep: RegSweepResult) -> None:
    """fig4.csv + fig4.gp: reconstruction quality vs regularization."""
    lines = ["reg_coeff,error,data_term,diverged"]
    for p in sweep.points:
        lines.append(f"{repr(p.reg_coeff)},{repr(p.error)},{repr(p.data_term)},{int(p.diverged)}")
    lines.append(f"# argmin_alpha = {repr(sweep.argmin_alpha())}")
    lines.append(f"# quality_metric = relative Frobenius error of the reduced admittance matrix")
    _write(os.path.join(out_dir, "fig4.csv"), "\n".join(lines) + "\n")
    _write(
        os.path.join(out_dir, "fig4.gp"),
        "set datafile separator ','\n"
        "set logscale y\n"
        "set xlabel 'regularization coefficient (index order)'\n"
        "set ylabel 'relative Frobenius error'\n"
        "plot 'fig4.csv' skip 1 using 0:2:xtic(1) with linespoints notitle\n",
    )
