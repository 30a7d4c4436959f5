"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the three hot kernels (batched injection evaluation, polar Jacobian
assembly, edge-network loss forward+adjoint) and one end-to-end training
epoch, at a small and a medium system size.

Run:  python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from gridest._accel import COMPILED, fallback

if COMPILED:
    from gridest._accel import _kernels as compiled
else:
    compiled = None


def timeit(fn, *args, repeat=20):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def synth(n, n_samples, n_edges, seed=0):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, n))
    g = g + g.T
    b = rng.normal(size=(n, n))
    b = b + b.T
    v = 1.0 + 0.05 * rng.random((n_samples, n))
    th = 0.2 * rng.normal(size=(n_samples, n))
    fr = rng.integers(0, n, n_edges).astype(np.int64)
    to = ((fr + 1 + rng.integers(0, n - 1, n_edges)) % n).astype(np.int64)
    ge = rng.random(n_edges)
    be = -5.0 * rng.random(n_edges)
    gsh = 0.1 * rng.normal(size=n)
    bsh = 0.1 * rng.normal(size=n)
    v2 = v * v
    vv = v[:, fr] * v[:, to]
    dth = th[:, fr] - th[:, to]
    return dict(
        g=g, b=b, v=v, th=th, fr=fr, to=to, ge=ge, be=be, gsh=gsh, bsh=bsh,
        v2=v2, vv=vv, cs=np.cos(dth), sn=np.sin(dth),
        padj=rng.normal(size=(n_samples, n)), qadj=rng.normal(size=(n_samples, n)),
    )


def bench_kernels(n, n_samples, n_edges):
    d = synth(n, n_samples, n_edges)
    rows = []
    cases = [
        ("injections_dense", lambda m: m.injections_dense(d["g"], d["b"], d["v"], d["th"])),
        ("polar_jacobian", lambda m: m.polar_jacobian(d["g"], d["b"], d["v"][0], d["th"][0])),
        (
            "edge_injections_fwd",
            lambda m: m.edge_injections_fwd(
                d["fr"], d["to"], d["ge"], d["be"], d["gsh"], d["bsh"],
                d["v2"], d["vv"], d["cs"], d["sn"],
            ),
        ),
        (
            "edge_injections_vjp",
            lambda m: m.edge_injections_vjp(
                d["fr"], d["to"], d["ge"], d["be"],
                d["v2"], d["vv"], d["cs"], d["sn"], d["padj"], d["qadj"],
            ),
        ),
    ]
    for name, call in cases:
        t_py = timeit(lambda: call(fallback))
        t_c = timeit(lambda: call(compiled)) if compiled is not None else float("nan")
        rows.append((name, t_py, t_c))
    return rows


def bench_epoch(n_bus, n_samples):
    """One full-batch training epoch of the physics-embedded estimator."""
    from gridest.estimators import ObservedBatch, TrainConfig, train_pgnn
    from gridest.kron import ReducedModel
    from gridest.grid_model import AdmittanceMatrix

    rng = np.random.default_rng(3)
    edges = tuple((i, (i + 1) % n_bus) for i in range(n_bus - 1)) + tuple(
        (i, (i + 3) % n_bus) for i in range(0, n_bus - 3, 2)
    )
    edges = tuple(sorted({(min(a, b), max(a, b)) for a, b in edges}))
    y = np.zeros((n_bus, n_bus), complex)
    for a, b in edges:
        y[a, b] = y[b, a] = -(0.5 - 3j)
        y[a, a] += 0.5 - 3j
        y[b, b] += 0.5 - 3j
    topo = ReducedModel(
        observed=tuple(range(n_bus)), y_reduced=AdmittanceMatrix(y),
        edges=edges, threshold_rel=0.02, n_components=1,
    )
    batch = ObservedBatch(
        v=1 + 0.05 * rng.random((n_samples, n_bus)),
        theta=0.2 * rng.normal(size=(n_samples, n_bus)),
        p=rng.normal(size=(n_samples, n_bus)),
        q=rng.normal(size=(n_samples, n_bus)),
    )
    cfg = TrainConfig(lr=1e-3, epochs=50, use_correction=True, units_per_layer=16,
                      record_every=50, seed=0)
    t0 = time.perf_counter()
    train_pgnn(topo, batch, cfg)
    return (time.perf_counter() - t0) / 50


def main():
    print(f"compiled extension available: {COMPILED}")
    for n, n_samples, n_edges in ((14, 400, 20), (118, 400, 186)):
        print(f"\nn={n}, batch={n_samples}, edges={n_edges}")
        print(f"  {'kernel':24s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
        for name, t_py, t_c in bench_kernels(n, n_samples, n_edges):
            ratio = t_py / t_c if t_c == t_c and t_c > 0 else float("nan")
            print(f"  {name:24s} {t_py*1e6:9.1f}us {t_c*1e6:9.1f}us {ratio:7.1f}x")
    for n in (14, 118):
        dt = bench_epoch(n, 400)
        print(f"\ntraining epoch (n={n}, batch=400, correction on): {dt*1e3:.2f} ms "
              f"[{'compiled' if COMPILED else 'numpy'} backend]")


if __name__ == "__main__":
    main()
