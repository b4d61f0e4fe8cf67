"""Random case generation shared by the property and acceptance tests."""
import numpy as np

from formidex import CONTROL_STRATEGIES, ConverterSpec, Device, NetworkCase, OperatingPoint

RANDOM_STRATEGIES = CONTROL_STRATEGIES + ("ideal_source", "static_admittance")


def random_op(rng) -> OperatingPoint:
    return OperatingPoint(1.0, 0.0, float(rng.uniform(0.0, 0.5)), float(rng.uniform(-0.05, 0.05)))


def random_spec(rng, strategy=None) -> ConverterSpec:
    strategy = strategy or RANDOM_STRATEGIES[rng.integers(len(RANDOM_STRATEGIES))]
    params = {"g": float(rng.uniform(0.1, 3.0))} if strategy == "static_admittance" else {}
    return ConverterSpec(strategy, params, op=random_op(rng))


def random_case(rng, n_max: int = 6, extra: bool = True, interior_max: int = 3) -> NetworkCase:
    """Connected random network: ``n <= n_max`` retained buses, an extra bus and a few interior buses."""
    n = int(rng.integers(1, n_max + 1))
    n_int = int(rng.integers(0, interior_max + 1))
    total = n + int(extra) + n_int
    buses = list(range(1, total + 1))
    order = rng.permutation(buses)
    branches = {}
    for k in range(1, total):  # random spanning tree keeps the graph connected
        a, b = int(order[k]), int(order[rng.integers(k)])
        branches[frozenset((a, b))] = (a, b)
    for _ in range(int(rng.integers(0, total))):
        a, b = (int(x) for x in rng.choice(buses, 2, replace=False))
        branches.setdefault(frozenset((a, b)), (a, b))
    br = tuple((a, b, float(rng.uniform(0.02, 0.5))) for a, b in branches.values())
    retained = tuple(buses[:n])
    devices = tuple(Device(b, random_spec(rng), float(rng.uniform(0.5, 2.0))) for b in retained)
    ext = Device(n + 1, random_spec(rng), float(rng.uniform(0.5, 2.0))) if extra else None
    return NetworkCase(tuple(buses), br, devices, retained, ext, tau=float(rng.uniform(0.0, 0.3)))


def random_freqs(rng, k: int = 20) -> np.ndarray:
    return 10.0 ** rng.uniform(-2, 3, k)
