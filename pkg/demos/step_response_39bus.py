"""
Voltage response to a current step at bus 9
===========================================

A 1 pu current step is injected at bus 9 at t = 0.5 s. The response of every
device bus is obtained by inverting the frequency-domain solution along a
shifted Bromwich contour; the final value is checked against the DC solution
automatically.
"""
import numpy as np

from formidex import ConverterSpec, DisturbanceSpec, load_bundled, step_response

case = load_bundled()
op, filt = case.extra.spec.op, case.extra.spec.filter

for axis in ("d", "q"):
    print(f"-- {axis}-axis step --")
    for strategy in ("droop", "pll_pq"):
        c = case.with_extra(ConverterSpec(strategy, op=op, filter=filt))
        ts = step_response(c, DisturbanceSpec(bus=9, amplitude=1.0, axis=axis, t_step=0.5))
        m = ts.max_norm
        k = int(np.argmax(m))
        print(f"{strategy:>7}: peak max-over-buses |dU| = {m[k]:.5f} at t = {ts.t[k]:.3f} s, "
              f"settles at {m[-1]:.5f}; final-value check ok = {ts.final_value_ok} "
              f"(rel. error {ts.metadata['final_value_rel_error']:.1e})")

# With an infinite bus in the system, both the droop and the PQ-controlled
# converter return their active power to the set point in steady state, so for
# an active-current (d-axis) step the settled deviation is set by the network.
# The droop angle swing overshoots that level slightly; for a reactive (q-axis)
# step the droop voltage support lowers the whole response.
