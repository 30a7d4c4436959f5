"""Command-line driver for the full pipeline.

Subcommands: import, generate, kron, train, evaluate, sweep-reg, recon-curve.
Options may come from a JSON config file (--config); explicit flags win.
stdout carries one summary line per command, diagnostics go to stderr.

Exit codes: 0 ok, 2 missing input path or usage error, 3 malformed case file,
4 stalled dataset generation, 5 training divergence, 6 singular reduction.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, defaults
from .datagen import (
    GenerationStalled,
    ScenarioConfig,
    generate,
    load_samples,
    save_samples,
    split,
)
from .estimators import (
    Divergence,
    TrainConfig,
    load_checkpoint,
    observed_batch,
    save_checkpoint,
    train_pgnn,
    train_pgnn_blind,
    train_vanilla,
)
from .grid_model import ValidationError, assemble_admittance, export_grid, load_grid
from .kron import ObservabilityMask, SingularInteriorBlock, export_reduced, reduce_case
from .matpower import ParseError, UnsupportedFeature, import_matpower
from .metrics_report import (
    mismatch,
    recon_error_curve,
    reg_sweep,
    write_fig2,
    write_fig4,
)

EXIT_USAGE = 2
EXIT_MALFORMED = 3
EXIT_STALLED = 4
EXIT_DIVERGENCE = 5
EXIT_SINGULAR = 6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


def _read_text(path) -> str:
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}", EXIT_USAGE)
    with open(path) as fh:
        return fh.read()


def _load_grid_file(path):
    text = _read_text(path)
    try:
        return load_grid(text)
    except ValidationError as exc:
        raise CliError(f"{path}: {exc}", EXIT_MALFORMED) from exc


def _observed_ids(grid, spec: str) -> tuple[int, ...]:
    if spec == "full":
        return tuple(range(grid.n_bus))
    if spec == "generators":
        return grid.generator_buses()
    try:
        ids = tuple(sorted({int(tok) for tok in spec.split(",") if tok.strip() != ""}))
    except ValueError:
        raise CliError(f"bad observability spec {spec!r}", EXIT_USAGE) from None
    if not ids or ids[0] < 0 or ids[-1] >= grid.n_bus:
        raise CliError(f"observability ids out of range: {spec!r}", EXIT_USAGE)
    return ids


def _run_id(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _merged(args: argparse.Namespace, keys: list[str]) -> dict:
    """Resolve option values: explicit flag > config file > parser default."""
    cfg = {}
    if getattr(args, "config", None):
        cfg = json.loads(_read_text(args.config))
        if not isinstance(cfg, dict):
            raise CliError("--config must hold a JSON object", EXIT_USAGE)
    out = {}
    for key in keys:
        flag_val = getattr(args, key)
        out[key] = flag_val if flag_val is not None else cfg.get(key)
    return out


def _train_config(opts: dict, model: str, n_bus: int, observability: str) -> TrainConfig:
    overrides = {
        k: opts[k]
        for k in (
            "lr",
            "epochs",
            "reg_coeff",
            "units_per_layer",
            "n_layers",
            "activation",
            "init_r",
            "init_x",
            "init_shunt_g",
            "init_shunt_b",
        )
        if opts.get(k) is not None
    }
    if opts.get("record_every") is not None:
        overrides["record_every"] = opts["record_every"]
    return defaults.default_train_config(
        model, n_bus, observability, seed=opts.get("seed") or 0, **overrides
    )


# --- subcommands ---------------------------------------------------------------


def cmd_import(args) -> int:
    opts = _merged(args, ["case_path", "output", "out"])
    text = _read_text(opts["case_path"])
    try:
        grid = import_matpower(text)
    except (ParseError, UnsupportedFeature) as exc:
        print(f"import failed: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    out_path = opts["output"]
    if out_path is None:
        base = os.path.join(opts["out"] or ".", "grid")
        os.makedirs(base, exist_ok=True)
        stem = os.path.splitext(os.path.basename(opts["case_path"]))[0]
        out_path = os.path.join(base, stem + ".json")
    with open(out_path, "w") as fh:
        fh.write(export_grid(grid))
        fh.write("\n")
    print(
        f"imported {opts['case_path']}: {grid.n_bus} buses, {len(grid.lines)} lines, "
        f"{len(grid.generators)} generators -> {out_path}"
    )
    return 0


def cmd_generate(args) -> int:
    keys = [
        "grid", "case", "n", "seed", "scale_min", "scale_max", "noise_frac",
        "dropout_frac", "cost_min", "cost_max", "phase_shift", "output", "out",
    ]
    opts = _merged(args, keys)
    if opts["grid"] is None or opts["case"] is None:
        raise CliError("generate requires --grid and --case", EXIT_USAGE)
    grid = _load_grid_file(opts["grid"])
    overrides = {}
    if opts["scale_min"] is not None or opts["scale_max"] is not None:
        lo = opts["scale_min"] if opts["scale_min"] is not None else 0.8
        hi = opts["scale_max"] if opts["scale_max"] is not None else 1.2
        overrides["scale_range"] = (lo, hi)
    if opts["noise_frac"] is not None:
        overrides["noise_frac"] = opts["noise_frac"]
    if opts["dropout_frac"] is not None:
        overrides["gen_dropout_frac"] = opts["dropout_frac"]
    if opts["cost_min"] is not None or opts["cost_max"] is not None:
        overrides["cost_range"] = (opts["cost_min"] or 1.0, opts["cost_max"] or 1.0)
    if opts["phase_shift"] is not None:
        overrides["phase_shift_deg"] = opts["phase_shift"]
    config = ScenarioConfig.for_case(
        opts["case"], seed=opts["seed"] or 0, n_samples=opts["n"] or 2000, **overrides
    )
    try:
        samples = generate(grid, config)
    except GenerationStalled as exc:
        print(f"generation stalled: {exc}", file=sys.stderr)
        return EXIT_STALLED
    out_path = opts["output"]
    if out_path is None:
        base = os.path.join(opts["out"] or ".", "data")
        os.makedirs(base, exist_ok=True)
        out_path = os.path.join(base, f"{opts['case']}.csv")
    save_samples(samples, out_path)
    print(
        f"generated {samples.n_samples} samples ({opts['case']}, seed {config.seed}, "
        f"{samples.rejections} rejected, certificate {samples.certificate:.2e}) -> {out_path}"
    )
    return 0


def cmd_kron(args) -> int:
    opts = _merged(args, ["grid", "obs", "threshold", "output", "out"])
    if opts["grid"] is None:
        raise CliError("kron requires --grid", EXIT_USAGE)
    grid = _load_grid_file(opts["grid"])
    mask = ObservabilityMask(observed=_observed_ids(grid, opts["obs"] or "generators"))
    try:
        model = reduce_case(grid, mask, opts["threshold"] if opts["threshold"] is not None else 0.02)
    except SingularInteriorBlock as exc:
        print(f"reduction failed: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    out_path = opts["output"]
    if out_path is None:
        base = os.path.join(opts["out"] or ".", "grid")
        os.makedirs(base, exist_ok=True)
        out_path = os.path.join(base, "reduced.json")
    with open(out_path, "w") as fh:
        fh.write(export_reduced(model, grid))
        fh.write("\n")
    print(
        f"reduced to {model.n} observed buses, {len(model.edges)} effective edges "
        f"({model.n_components} component(s), threshold {model.threshold_rel}) -> {out_path}"
    )
    return 0


_TRAIN_KEYS = [
    "model", "grid", "data", "obs", "topology", "threshold", "train_fraction",
    "lr", "epochs", "reg_coeff", "units_per_layer", "n_layers", "activation",
    "init_r", "init_x", "init_shunt_g", "init_shunt_b", "record_every",
    "seed", "output", "out",
]


def cmd_train(args) -> int:
    opts = _merged(args, _TRAIN_KEYS)
    for req in ("model", "grid", "data"):
        if opts[req] is None:
            raise CliError(f"train requires --{req}", EXIT_USAGE)
    grid = _load_grid_file(opts["grid"])
    if not os.path.exists(opts["data"]):
        raise CliError(f"no such file: {opts['data']}", EXIT_USAGE)
    samples = load_samples(opts["data"])
    observed = _observed_ids(grid, opts["obs"] or "full")
    full = len(observed) == grid.n_bus
    train_set, _ = split(samples, opts["train_fraction"] or 0.2)
    batch = observed_batch(train_set, observed)
    config = _train_config(opts, opts["model"], grid.n_bus, "full" if full else "partial")

    run_doc = {k: opts[k] for k in _TRAIN_KEYS if k not in ("output", "out")}
    run_doc["config"] = config.to_dict()
    run_dir = os.path.join(opts["out"] or ".", "runs", _run_id(run_doc))
    os.makedirs(run_dir, exist_ok=True)

    try:
        if opts["model"] == "pgnn":
            if full:
                topology = grid
                model, report = train_pgnn(topology, batch, config)
            elif (opts["topology"] or "reference") == "reference":
                topology = reduce_case(
                    grid,
                    ObservabilityMask(observed=observed),
                    opts["threshold"] if opts["threshold"] is not None else 0.02,
                )
                model, report = train_pgnn(topology, batch, config)
            else:
                model, report = train_pgnn_blind(
                    observed, batch, config,
                    threshold_rel=opts["threshold"] if opts["threshold"] is not None else 0.02,
                )
        elif opts["model"] == "vanilla":
            model, report = train_vanilla(observed, batch, config)
        else:
            raise CliError(f"unknown model {opts['model']!r}", EXIT_USAGE)
    except Divergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except SingularInteriorBlock as exc:
        print(f"reduction failed: {exc}", file=sys.stderr)
        return EXIT_SINGULAR

    ckpt = os.path.join(run_dir, "checkpoint.json") if opts["output"] is None else opts["output"]
    save_checkpoint(model, ckpt, extra={"grid_hash": grid.content_hash()})
    report.save_trace_csv(os.path.join(run_dir, "trace.csv"))
    with open(os.path.join(run_dir, "report.json"), "w") as fh:
        json.dump(
            {
                "final_loss": report.final_loss,
                "final_data": report.final_data,
                "final_reg": report.final_reg,
                "epochs_run": report.epochs_run,
                "config": config.to_dict(),
            },
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
    print(
        f"trained {opts['model']} on {batch.n_samples} samples: final loss "
        f"{report.final_loss:.3e} -> {ckpt}"
    )
    return 0


def cmd_evaluate(args) -> int:
    opts = _merged(args, ["model", "data", "obs", "grid"])
    for req in ("model", "data"):
        if opts[req] is None:
            raise CliError(f"evaluate requires --{req}", EXIT_USAGE)
    if not os.path.exists(opts["model"]):
        raise CliError(f"no such file: {opts['model']}", EXIT_USAGE)
    if not os.path.exists(opts["data"]):
        raise CliError(f"no such file: {opts['data']}", EXIT_USAGE)
    model = load_checkpoint(opts["model"])
    samples = load_samples(opts["data"])
    batch = observed_batch(samples, model.observed)
    res = mismatch(model, batch)
    kind = "pgnn" if hasattr(model, "params") else "vanilla"
    print(f"mismatch {res.value:.6e} over {res.n_samples} samples ({kind}, {res.n_nodes} buses)")
    return 0


def cmd_sweep_reg(args) -> int:
    opts = _merged(
        args,
        ["grid", "data", "obs", "alphas", "threshold", "train_fraction", "lr",
         "epochs", "units_per_layer", "n_layers", "activation", "seed",
         "init_r", "init_x", "init_shunt_g", "init_shunt_b", "record_every", "out"],
    )
    for req in ("grid", "data"):
        if opts[req] is None:
            raise CliError(f"sweep-reg requires --{req}", EXIT_USAGE)
    grid = _load_grid_file(opts["grid"])
    samples = load_samples(opts["data"])
    observed = _observed_ids(grid, opts["obs"] or "generators")
    reduced = reduce_case(
        grid,
        ObservabilityMask(observed=observed),
        opts["threshold"] if opts["threshold"] is not None else 0.02,
    )
    train_set, _ = split(samples, opts["train_fraction"] or 0.2)
    batch = observed_batch(train_set, observed)
    alphas = [float(tok) for tok in (opts["alphas"] or "0,1e-6,1e-4,1e-2,1").split(",")]
    config = _train_config(opts, "pgnn", grid.n_bus, "partial")
    result = reg_sweep(reduced, batch, alphas, config)
    run_dir = os.path.join(opts["out"] or ".", "runs", _run_id({**opts, "cmd": "sweep-reg"}))
    os.makedirs(run_dir, exist_ok=True)
    write_fig4(run_dir, result)
    print(
        f"sweep over {len(alphas)} values: best reg_coeff {result.argmin_alpha():g} "
        f"-> {run_dir}/fig4.csv"
    )
    return 0


def cmd_recon_curve(args) -> int:
    opts = _merged(
        args,
        ["grid", "case", "counts", "realizations", "seed", "lr", "epochs",
         "units_per_layer", "n_layers", "activation", "record_every",
         "init_r", "init_x", "init_shunt_g", "init_shunt_b", "normalization", "out"],
    )
    if opts["grid"] is None:
        raise CliError("recon-curve requires --grid", EXIT_USAGE)
    grid = _load_grid_file(opts["grid"])
    counts = [int(tok) for tok in (opts["counts"] or "10,40,100").split(",")]
    case_cfg = ScenarioConfig.for_case(
        opts["case"] or "c5", seed=opts["seed"] or 0, n_samples=max(counts)
    )
    config = _train_config(opts, "pgnn", grid.n_bus, "full")
    try:
        curve = recon_error_curve(
            grid, case_cfg, counts, opts["realizations"] or 10, config,
            normalization=opts["normalization"] or "raw",
        )
    except Divergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    run_dir = os.path.join(opts["out"] or ".", "runs", _run_id({**opts, "cmd": "recon-curve"}))
    os.makedirs(run_dir, exist_ok=True)
    write_fig2(run_dir, curve)
    bits = ", ".join(f"N={c.n_train}: {c.mean:.4f}" for c in curve)
    print(f"reconstruction error means [{bits}] -> {run_dir}/fig2.csv")
    return 0


# --- parser ----------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--reg-coeff", "--alpha", dest="reg_coeff", type=float)
    p.add_argument("--units-per-layer", "--units", dest="units_per_layer", type=int)
    p.add_argument("--n-layers", "--layers", dest="n_layers", type=int)
    p.add_argument("--activation", choices=["relu", "softsign", "identity"])
    p.add_argument("--init-r", dest="init_r", type=float)
    p.add_argument("--init-x", dest="init_x", type=float)
    p.add_argument("--init-shunt-g", dest="init_shunt_g", type=float)
    p.add_argument("--init-shunt-b", dest="init_shunt_b", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridest",
        description="Power-grid parameter/state estimation pipeline.",
    )
    ap.add_argument("--version", action="version", version=f"gridest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option defaults (flags win)")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker cap for multi-run commands")
        p.add_argument("--out", help="output directory root (default: current dir)")
        p.add_argument("-o", "--output", help="explicit output file path")

    p = sub.add_parser("import", help="convert a MATPOWER case to the native schema")
    p.add_argument("case_path")
    common(p)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("generate", help="generate an operating-point dataset")
    p.add_argument("--grid")
    p.add_argument("--case", choices=["c1", "c2", "c3", "c4", "c5", "c6"])
    p.add_argument("--n", type=int)
    p.add_argument("--scale-min", dest="scale_min", type=float)
    p.add_argument("--scale-max", dest="scale_max", type=float)
    p.add_argument("--noise-frac", dest="noise_frac", type=float)
    p.add_argument("--dropout-frac", dest="dropout_frac", type=float)
    p.add_argument("--cost-min", dest="cost_min", type=float)
    p.add_argument("--cost-max", dest="cost_max", type=float)
    p.add_argument("--phase-shift", dest="phase_shift", type=float)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("kron", help="reduce a grid onto observed buses")
    p.add_argument("--grid")
    p.add_argument("--obs")
    p.add_argument("--threshold", type=float)
    common(p)
    p.set_defaults(func=cmd_kron)

    p = sub.add_parser("train", help="train an estimator")
    p.add_argument("--model", choices=["pgnn", "vanilla"])
    p.add_argument("--grid")
    p.add_argument("--data")
    p.add_argument("--obs")
    p.add_argument("--topology", choices=["reference", "blind"])
    p.add_argument("--threshold", type=float)
    _add_train_flags(p)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="mismatch of a checkpoint on a dataset")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--obs")
    p.add_argument("--grid")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-reg", help="regularization sweep (partial observability)")
    p.add_argument("--grid")
    p.add_argument("--data")
    p.add_argument("--obs")
    p.add_argument("--alphas")
    p.add_argument("--threshold", type=float)
    _add_train_flags(p)
    common(p)
    p.set_defaults(func=cmd_sweep_reg)

    p = sub.add_parser("recon-curve", help="reconstruction error vs sample count")
    p.add_argument("--grid")
    p.add_argument("--case", choices=["c1", "c2", "c3", "c4", "c5", "c6"])
    p.add_argument("--counts")
    p.add_argument("--realizations", type=int)
    p.add_argument("--normalization", choices=["raw", "per_node"])
    _add_train_flags(p)
    common(p)
    p.set_defaults(func=cmd_recon_curve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except ValidationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
