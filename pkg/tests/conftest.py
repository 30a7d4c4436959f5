import os

import numpy as np
import pytest

from gridest.grid_model import Bus, BusKind, Generator, GridCase, Line

CASES_DIR = os.path.join(os.path.dirname(__file__), "..", "cases")


@pytest.fixture(scope="session")
def ieee14_text():
    with open(os.path.join(CASES_DIR, "ieee14.m")) as fh:
        return fh.read()


@pytest.fixture(scope="session")
def ieee14(ieee14_text):
    from gridest.matpower import import_matpower

    return import_matpower(ieee14_text)


def random_grid(rng: np.random.Generator, n: int, with_shunts: bool = True) -> GridCase:
    """Random connected grid: spanning tree plus extra edges, modest r/x."""
    pairs = []
    for j in range(1, n):
        pairs.append((int(rng.integers(0, j)), j))
    extra = rng.integers(0, max(1, n))
    have = set(pairs)
    for _ in range(int(extra)):
        a, b = rng.integers(0, n, size=2)
        a, b = int(min(a, b)), int(max(a, b))
        if a != b and (a, b) not in have:
            have.add((a, b))
            pairs.append((a, b))
    lines = tuple(
        Line(
            from_bus=a,
            to_bus=b,
            r=float(rng.uniform(0.005, 0.08)),
            x=float(rng.uniform(0.03, 0.3)),
            y_sh=float(rng.uniform(0.0, 0.05)) if with_shunts else 0.0,
        )
        for a, b in pairs
    )
    buses = tuple(
        Bus(
            id=i,
            kind=BusKind.SLACK if i == 0 else BusKind.PQ,
            shunt_g=float(rng.uniform(0.0, 0.02)) if with_shunts else 0.0,
            shunt_b=float(rng.uniform(-0.1, 0.1)) if with_shunts else 0.0,
            base_load_p=float(rng.uniform(0.0, 0.3)) if i else 0.0,
            base_load_q=float(rng.uniform(-0.1, 0.1)) if i else 0.0,
        )
        for i in range(n)
    )
    gens = (Generator(bus=0, p_min=0.0, p_max=10.0, q_min=-10.0, q_max=10.0, v_set=1.0),)
    return GridCase(buses=buses, lines=lines, generators=gens)
