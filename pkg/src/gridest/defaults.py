"""Default training hyperparameters.

Values are tabulated per (model, reference system size, observability); a
request for an unlisted size inherits the nearest listed cell by log bus
count. Anything can be overridden through TrainConfig fields.
"""

from __future__ import annotations

import math

from .estimators import TrainConfig

_REFERENCE_SIZES = (14, 118, 3809)

# (model, ref_size, observability) -> TrainConfig field overrides
_TABLE: dict[tuple[str, int, str], dict] = {
    ("vanilla", 14, "full"): dict(lr=2e-5, epochs=800_000, units_per_layer=28, n_layers=3),
    ("vanilla", 118, "full"): dict(lr=2e-5, epochs=800_000, units_per_layer=238, n_layers=3),
    ("vanilla", 3809, "full"): dict(lr=2e-5, epochs=800_000, units_per_layer=7618, n_layers=3),
    ("pgnn", 14, "full"): dict(
        lr=2e-4, epochs=30_000, init_r=1.0, init_x=1.0, init_shunt_g=1.0, init_shunt_b=1.0
    ),
    ("pgnn", 118, "full"): dict(
        lr=5e-4, epochs=50_000, init_r=1e-2, init_x=1e-1, init_shunt_g=1e-1, init_shunt_b=1e-1
    ),
    ("pgnn", 3809, "full"): dict(
        lr=2e-5, epochs=50_000, init_r=1e-2, init_x=1e-1, init_shunt_g=1e-1, init_shunt_b=1e-1
    ),
    ("pgnn", 118, "partial"): dict(
        lr=2e-5,
        epochs=20_000,
        init_r=1e-1,
        init_x=6e-1,
        init_shunt_g=1e-1,
        init_shunt_b=1e-2,
        units_per_layer=400,
        n_layers=3,
    ),
    ("pgnn", 3809, "partial"): dict(
        lr=2e-5,
        epochs=50_000,
        init_r=1e-1,
        init_x=6e-1,
        init_shunt_g=1e-1,
        init_shunt_b=1e-2,
        units_per_layer=1000,
        n_layers=3,
    ),
}


def _nearest_size(n_bus: int) -> int:
    return min(_REFERENCE_SIZES, key=lambda ref: abs(math.log(n_bus / ref)))


def default_train_config(
    model: str, n_bus: int, observability: str, seed: int = 0, **overrides
) -> TrainConfig:
    """Assemble a TrainConfig from the defaults table.

    model: "pgnn" or "vanilla"; observability: "full" or "partial".
    Unlisted (model, size, observability) combinations inherit the nearest
    listed cell; the vanilla baseline has no partial-specific cells and the
    dense width for unlisted sizes follows the 2-per-bus rule.
    """
    if model not in ("pgnn", "vanilla"):
        raise ValueError(f"unknown model {model!r}")
    if observability not in ("full", "partial"):
        raise ValueError(f"unknown observability {observability!r}")
    ref = _nearest_size(n_bus)
    key = (model, ref, observability)
    if key not in _TABLE:
        key = (model, ref, "full")  # vanilla partial inherits the full cell
        if key not in _TABLE:
            key = (model, 118, observability)
    fields = dict(_TABLE[key])
    if model == "vanilla":
        fields.setdefault("activation", "relu")
        if n_bus not in _REFERENCE_SIZES:
            fields["units_per_layer"] = 2 * n_bus
    else:
        fields.setdefault("activation", "softsign")
        fields["use_correction"] = observability == "partial"
        if observability == "partial":
            fields.setdefault("reg_coeff", 1e-4)
    fields["seed"] = seed
    fields.update(overrides)
    return TrainConfig(**fields)
