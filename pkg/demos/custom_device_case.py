"""
Building a case by hand
=======================

A three-bus network with two retained converters and a third converter that
is absorbed into the network model. Shows the dual-form check, the strength
bounds and a custom transfer-matrix device.
"""
import numpy as np

from formidex import (
    ConverterSpec,
    Device,
    NetworkCase,
    NumericalError,
    absorb_device,
    build_susceptance,
    closed_loop,
    full_system,
    make_freq_grid,
    strength_sweep,
)

# a first-order RL-like admittance, given as a plain function of s
def my_device(s):
    return np.array([[2.0 / (1 + s / 300), 0.0], [0.0, 2.0 / (1 + s / 300)]])


case = NetworkCase(
    buses=(1, 2, 3),
    branches=((1, 2, 0.15), (2, 3, 0.1), (1, 3, 0.25)),
    devices=(Device(1, ConverterSpec("droop")), Device(2, ConverterSpec("custom", evaluator=my_device))),
    retained=(1, 2),
    extra=Device(3, ConverterSpec("vsg")),
)
print("reduced susceptance over buses 1, 2, 3:\n", np.round(build_susceptance(case).B, 4))

# absorbing bus 3 is exact: the reduced solve equals the full one
s = 2j * np.pi * 7.0
rhs = np.array([1.0, 0, 0, 0])
reduced = np.linalg.solve(closed_loop(case, s), rhs)
full = np.linalg.solve(full_system(case, s), np.r_[rhs, 0, 0])[:4]
print("max |reduced - full| =", np.abs(reduced - full).max())

sweep = strength_sweep(case, make_freq_grid(0.1, 1000, 50))
print(f"kappa range {sweep.kappa.min():.3f} .. {sweep.kappa.max():.3f}; bounds hold: "
      f"{bool(sweep.kappa_ok.all() and sweep.alpha_ok.all())}")

# a device whose response changes between evaluations breaks the two algebraic
# forms of the absorption and is caught
counter = iter(range(100))
flaky = case.with_extra(ConverterSpec("custom", evaluator=lambda s: (1 + next(counter)) * np.eye(2)))
try:
    absorb_device(build_susceptance(flaky), flaky.extra, s, flaky.tau)
except NumericalError as exc:
    print("caught:", exc)
