"""Synthetic operating-point datasets.

Each sample is a full-grid voltage state plus the matching nodal injections,
produced by scaling the base load, optionally perturbing it, dispatching
generators by merit order and solving the power flow. Six scenario presets
(c1..c6) switch on progressively richer variability:

  c1  common load scaling factor only
  c2  c1 + multiplicative Gaussian load noise, p and q moving together
  c3  c2 but with independent noise draws for p and q
  c4  c3 + a random third of the non-slack generators removed per sample
  c5  c4 + per-sample random generator costs
  c6  c1 with a constant global phase shift added to all angles

Randomness is derived per (seed, sample index, attempt), so regeneration is
bitwise reproducible and sample-parallel generation would give identical
results. Samples whose power flow fails to converge are rejected and redrawn.
"""

from __future__ import annotations

import collections
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .grid_model import AdmittanceMatrix, GridCase, ValidationError, assemble_admittance
from .powerflow import (
    InfeasibleDispatch,
    NonConvergence,
    PFSolveOptions,
    PowerState,
    dispatch,
    injection_spec,
    inverse_pf_batch,
    solve_pf_spec,
)

CASE_IDS = ("c1", "c2", "c3", "c4", "c5", "c6")


class GenerationStalled(Exception):
    """Rejection rate exceeded 50% over the recent attempt window."""


@dataclass(frozen=True)
class ScenarioConfig:
    case_id: str
    seed: int
    n_samples: int = 2000
    scale_range: tuple[float, float] = (0.8, 1.2)
    noise_frac: float = 0.0
    pq_independent: bool = False
    gen_dropout_frac: float = 0.0
    cost_range: tuple[float, float] = (1.0, 1.0)
    phase_shift_deg: float = 0.0

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise ValidationError(f"unknown case id {self.case_id!r}")
        if self.scale_range[0] > self.scale_range[1]:
            raise ValidationError("scale_range must be ordered")
        if self.noise_frac < 0:
            raise ValidationError("noise_frac must be non-negative")
        if not 0.0 <= self.gen_dropout_frac < 1.0:
            raise ValidationError("gen_dropout_frac must lie in [0, 1)")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")

    @staticmethod
    def for_case(case_id: str, seed: int, n_samples: int = 2000, **overrides) -> "ScenarioConfig":
        """Preset knobs for the six scenario cases (see module docstring)."""
        knobs: dict = {}
        if case_id in ("c2", "c3", "c4", "c5"):
            knobs["noise_frac"] = 0.01
        if case_id in ("c3", "c4", "c5"):
            knobs["pq_independent"] = True
        if case_id in ("c4", "c5"):
            knobs["gen_dropout_frac"] = 1.0 / 3.0
        if case_id == "c5":
            knobs["cost_range"] = (0.5, 1.5)
        if case_id == "c6":
            knobs["phase_shift_deg"] = 20.0
        knobs.update(overrides)
        return ScenarioConfig(case_id=case_id, seed=seed, n_samples=n_samples, **knobs)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "scale_range": list(self.scale_range),
            "noise_frac": self.noise_frac,
            "pq_independent": self.pq_independent,
            "gen_dropout_frac": self.gen_dropout_frac,
            "cost_range": list(self.cost_range),
            "phase_shift_deg": self.phase_shift_deg,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ScenarioConfig":
        return ScenarioConfig(
            case_id=doc["case_id"],
            seed=doc["seed"],
            n_samples=doc["n_samples"],
            scale_range=tuple(doc["scale_range"]),
            noise_frac=doc["noise_frac"],
            pq_independent=doc["pq_independent"],
            gen_dropout_frac=doc["gen_dropout_frac"],
            cost_range=tuple(doc["cost_range"]),
            phase_shift_deg=doc["phase_shift_deg"],
        )


@dataclass(frozen=True)
class SampleSet:
    """N operating points over a fixed grid: (v, theta, p, q) per sample."""

    grid_hash: str
    config: ScenarioConfig
    lam: np.ndarray  # (N,) load scaling factor per sample
    v: np.ndarray  # (N, n)
    theta: np.ndarray  # (N, n)
    p: np.ndarray  # (N, n)
    q: np.ndarray  # (N, n)
    rejections: int = 0
    certificate: float = 0.0  # max |inverse_pf(Y, V) - S| at generation time

    @property
    def n_samples(self) -> int:
        return self.v.shape[0]

    @property
    def n_bus(self) -> int:
        return self.v.shape[1]

    def consistency_error(self, y: AdmittanceMatrix) -> float:
        """Max elementwise injection mismatch of the stored samples under y."""
        p, q = inverse_pf_batch(y, self.v, self.theta)
        return float(max(np.abs(p - self.p).max(), np.abs(q - self.q).max()))


def _truncated_normal(rng: np.random.Generator, size: int, bound: float = 4.0) -> np.ndarray:
    """Standard normal draws redrawn until within +-bound."""
    out = rng.standard_normal(size)
    for _ in range(100):
        bad = np.abs(out) > bound
        if not bad.any():
            return out
        out[bad] = rng.standard_normal(int(bad.sum()))
    return np.clip(out, -bound, bound)


def _sample_rng(seed: int, index: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index, attempt)))


def generate(grid: GridCase, config: ScenarioConfig, opts: PFSolveOptions | None = None) -> SampleSet:
    """Generate a SampleSet for one scenario configuration."""
    opts = opts or PFSolveOptions()
    n = grid.n_bus
    y = assemble_admittance(grid)
    base_p = grid.load_p()
    base_q = grid.load_q()
    base_costs = np.array([g.cost for g in grid.generators])
    slack_gens = [i for i, g in enumerate(grid.generators) if g.bus == grid.slack_id]
    droppable = [i for i in range(len(grid.generators)) if i not in slack_gens]
    n_drop = int(math.floor(len(grid.generators) * config.gen_dropout_frac))
    n_drop = min(n_drop, len(droppable))
    shift = math.radians(config.phase_shift_deg)

    lam = np.empty(config.n_samples)
    v = np.empty((config.n_samples, n))
    theta = np.empty((config.n_samples, n))
    p = np.empty((config.n_samples, n))
    q = np.empty((config.n_samples, n))

    rejections = 0
    window: collections.deque = collections.deque(maxlen=40)
    for idx in range(config.n_samples):
        for attempt in range(10_000):
            rng = _sample_rng(config.seed, idx, attempt)
            lam_i = rng.uniform(config.scale_range[0], config.scale_range[1])
            load_p = base_p * lam_i
            load_q = base_q * lam_i
            if config.noise_frac > 0:
                xi_p = _truncated_normal(rng, n)
                xi_q = _truncated_normal(rng, n) if config.pq_independent else xi_p
                load_p = load_p * (1.0 + config.noise_frac * xi_p)
                load_q = load_q * (1.0 + config.noise_frac * xi_q)
            pool = None
            if n_drop > 0:
                dropped = set(rng.choice(droppable, size=n_drop, replace=False).tolist())
                pool = [i for i in range(len(grid.generators)) if i not in dropped]
            costs = base_costs
            if config.cost_range != (1.0, 1.0):
                costs = base_costs * rng.uniform(
                    config.cost_range[0], config.cost_range[1], size=len(grid.generators)
                )
            try:
                disp = dispatch(
                    grid, PowerState(p=-load_p, q=-load_q), costs=costs, available=pool
                )
                sol = solve_pf_spec(y, injection_spec(grid, disp), opts)
            except (NonConvergence, InfeasibleDispatch) as exc:
                rejections += 1
                window.append(0)
                if len(window) == window.maxlen and sum(window) < window.maxlen // 2:
                    raise GenerationStalled(
                        f"rejection rate above 50% near sample {idx}"
                    ) from exc
                continue
            window.append(1)
            pw, qw = inverse_pf_batch(y, sol.v[None, :], sol.theta[None, :])
            lam[idx] = lam_i
            v[idx] = sol.v
            theta[idx] = sol.theta + shift
            p[idx] = pw[0]
            q[idx] = qw[0]
            break
        else:
            raise GenerationStalled(f"sample {idx}: attempt budget exhausted")

    sample_set = SampleSet(
        grid_hash=grid.content_hash(),
        config=config,
        lam=lam,
        v=v,
        theta=theta,
        p=p,
        q=q,
        rejections=rejections,
    )
    # certify the stored samples against the true admittance matrix (a global
    # phase shift leaves injections unchanged, so c6 certifies like c1)
    cert = sample_set.consistency_error(y)
    return replace(sample_set, certificate=cert)


def split(sample_set: SampleSet, train_fraction: float = 0.2, disjoint: bool = False):
    """Deterministic (train, validation) split.

    The training set is the leading round(N * fraction) samples; validation
    defaults to the complete set (training samples included), with a flag for
    a disjoint holdout instead.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must lie in (0, 1)")
    n = sample_set.n_samples
    k = int(round(n * train_fraction))
    if k < 1 or k >= n:
        raise ValidationError(f"split of {n} samples at {train_fraction} leaves an empty side")
    train = _slice(sample_set, slice(0, k))
    val = _slice(sample_set, slice(k, n)) if disjoint else sample_set
    return train, val


def _slice(s: SampleSet, sl: slice) -> SampleSet:
    return replace(
        s, lam=s.lam[sl], v=s.v[sl], theta=s.theta[sl], p=s.p[sl], q=s.q[sl]
    )


# --- on-disk format ----------------------------------------------------------


def save_samples(s: SampleSet, csv_path, meta_path=None) -> None:
    """Write samples as CSV (one row per sample) plus a JSON metadata sidecar.

    Columns: lambda, v_1..v_n, theta_1..theta_n, p_1..p_n, q_1..q_n; angles in
    radians, everything per-unit. Floats use repr so the round trip is exact.
    """
    n = s.n_bus
    header = (
        ["lambda"]
        + [f"v_{i+1}" for i in range(n)]
        + [f"theta_{i+1}" for i in range(n)]
        + [f"p_{i+1}" for i in range(n)]
        + [f"q_{i+1}" for i in range(n)]
    )
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(s.n_samples):
            row = [repr(float(s.lam[i]))]
            for arr in (s.v, s.theta, s.p, s.q):
                row.extend(repr(float(x)) for x in arr[i])
            fh.write(",".join(row) + "\n")
    meta = {
        "grid_hash": s.grid_hash,
        "config": s.config.to_dict(),
        "rejections": s.rejections,
        "certificate": s.certificate,
        "n_samples": s.n_samples,
        "n_bus": n,
        "generator_version": 1,
    }
    if meta_path is None:
        meta_path = str(csv_path) + ".meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_samples(csv_path, meta_path=None) -> SampleSet:
    if meta_path is None:
        meta_path = str(csv_path) + ".meta.json"
    with open(meta_path) as fh:
        meta = json.load(fh)
    n = meta["n_bus"]
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 1 + 4 * n:
        raise ValidationError(
            f"{csv_path}: expected {1 + 4 * n} columns, found {data.shape[1]}"
        )
    return SampleSet(
        grid_hash=meta["grid_hash"],
        config=ScenarioConfig.from_dict(meta["config"]),
        lam=data[:, 0],
        v=data[:, 1 : 1 + n],
        theta=data[:, 1 + n : 1 + 2 * n],
        p=data[:, 1 + 2 * n : 1 + 3 * n],
        q=data[:, 1 + 3 * n :],
        rejections=meta["rejections"],
        certificate=meta["certificate"],
    )
