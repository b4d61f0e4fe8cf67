"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run with pytest (lines appear in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import random_case, random_freqs  # noqa: E402
from formidex import (  # noqa: E402
    ConverterSpec,
    Device,
    DisturbanceSpec,
    LineParams,
    NetworkCase,
    closed_loop,
    forming_index,
    forming_index_sweep,
    full_system,
    ilt_bromwich,
    load_bundled,
    make_freq_grid,
    step_response,
    strength_point,
    strength_sweep,
)
from formidex.network import _blocks_of, dual_forms  # noqa: E402
from formidex.strength import BOUND_RTOL  # noqa: E402
from formidex.tfcore import svd_extremes  # noqa: E402

N_CASES = 200
N_FREQS = 20
SEED = 20240917


def _record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    try:
        from conftest import ACCEPTANCE_LINES

        ACCEPTANCE_LINES[number] = line
    except ImportError:
        pass
    print(line)
    return ok


@lru_cache(maxsize=1)
def random_suite():
    rng = np.random.default_rng(SEED)
    return [(random_case(rng), random_freqs(rng, N_FREQS)) for _ in range(N_CASES)]


def _below(value, bound):
    return value >= bound - BOUND_RTOL * max(1.0, abs(bound))


# -- criteria ----------------------------------------------------------------


def criterion_1():
    worst, bad, total = 0.0, 0, 0
    for case, freqs in random_suite():
        blocks = _blocks_of(case)
        for f in freqs:
            direct, factored, _ = dual_forms(blocks, case.extra, 2j * np.pi * f, case.tau, case.omega0)
            rel = np.linalg.norm(direct - factored) / np.linalg.norm(direct)
            worst = max(worst, rel)
            bad += not rel <= 1e-9
            total += 1
    return bad == 0, f"{total - bad}/{total} samples agree, worst rel. diff {worst:.2e} (rtol 1e-9)"


def criterion_2():
    viol, total, inflations, not_decreasing = 0, 0, 0, 0
    for case, freqs in random_suite():
        for f in freqs:
            s = 2j * np.pi * f
            kappa, alpha, bk, ba, sv, _ = strength_point(case, s)
            viol += not (_below(kappa, bk) and _below(alpha, ba))
            total += 1
        # inflate sigma_max(S_v) by scaling the extra device admittance
        f = freqs[0]
        s = 2j * np.pi * f
        *_, ba0, sv0, _ = strength_point(case, s)
        for c in (0.25, 0.5, 2.0, 4.0):
            scaled = case.with_extra(case.extra.spec, case.extra.rating * c)
            *_, ba1, sv1, _ = strength_point(scaled, s)
            if sv1 > sv0 * (1 + 1e-9):
                inflations += 1
                not_decreasing += not ba1 < ba0
    ok = viol == 0 and inflations > 0 and not_decreasing == 0
    return ok, (f"bounds hold at {total - viol}/{total} samples; bound_alpha fell in "
                f"{inflations - not_decreasing}/{inflations} inflations of sigma_max(S_v)")


def criterion_3():
    line = LineParams(0.3, 0.1)
    grid = make_freq_grid()
    hi = grid.points > 100.0
    notes, ok = [], True
    for strategy in ("droop", "vsg", "vfc", "pll_gfm"):
        spec = ConverterSpec(strategy)
        dc = forming_index(spec, line, 1e-4)
        fi = forming_index_sweep(spec, line, grid).values
        good = abs(dc - 1) < 1e-3 and np.all(fi[hi] < 1)
        ok &= good
        notes.append(f"{strategy} FI(1e-4Hz)={dc:.5f} max>100Hz={fi[hi].max():.3f}")
    for strategy in ("pll_pq", "pll_pv"):
        fi = forming_index_sweep(ConverterSpec(strategy), line, grid).values
        k = int(np.argmax(fi))
        good = np.all(fi > 1) and 0 < k < len(fi) - 1
        ok &= good
        notes.append(f"{strategy} min={fi.min():.4f} peak={fi[k]:.4f}@{grid.points[k]:.3g}Hz")
    fi = forming_index_sweep(ConverterSpec("voc"), line, grid).values
    low = grid.points < 1.0
    ok &= bool(np.any(fi[low] > 1))
    notes.append(f"voc max<1Hz={fi[low].max():.5f}")
    peaks = [forming_index_sweep(ConverterSpec("pll_pq"), LineParams(lg, 0.1), grid).values.max()
             for lg in (0.2, 0.4, 0.6)]
    ok &= bool(np.all(np.diff(peaks) > 0))
    notes.append("pll_pq peaks " + "<".join(f"{p:.4f}" for p in peaks))
    return bool(ok), "; ".join(notes)


def criterion_4():
    grid = make_freq_grid()
    zero = forming_index_sweep(lambda s: np.zeros((2, 2), complex), LineParams(0.3, 0.1), grid).values
    ok = bool(np.all(zero == 1.0))
    for strategy in ("droop", "vsg", "voc", "vfc", "pll_pq", "pll_pv", "pll_gfm", "ideal_source"):
        ok &= bool(np.all(forming_index_sweep(ConverterSpec(strategy), LineParams(0.0), grid).values == 1.0))
    return ok, "Y=0 and l_g=0 give FI == 1 exactly at all 400 points"


def criterion_5():
    case = NetworkCase(
        buses=(1, 2, 3),
        branches=((1, 2, 0.15), (2, 3, 0.1), (1, 3, 0.25)),
        devices=(Device(1, ConverterSpec("droop")), Device(2, ConverterSpec("pll_pq"))),
        retained=(1, 2),
        extra=Device(3, ConverterSpec("vsg")),
    )
    worst = 0.0
    for f in make_freq_grid(n_points=100):
        s = 2j * np.pi * f
        for col in range(4):
            rhs = np.zeros(4, complex)
            rhs[col] = 1.0
            reduced = np.linalg.solve(closed_loop(case, s), rhs)
            full = np.linalg.solve(full_system(case, s), np.concatenate([rhs, [0, 0]]))[:4]
            worst = max(worst, np.linalg.norm(reduced - full) / np.linalg.norm(full))
    return worst <= 1e-9, f"worst rel. diff {worst:.2e} over 100 frequencies x 4 injections (rtol 1e-9)"


def _bus9_scenarios():
    base = load_bundled()
    op, filt = base.extra.spec.op, base.extra.spec.filter
    return {k: base.with_extra(ConverterSpec(k, op=op, filter=filt)) for k in ("droop", "pll_pq")}


def criterion_6():
    t_end = 2.0
    wn = 2 * np.pi * 5
    pairs = {
        "1/(s+1)": (lambda s: 1 / (s + 1), lambda t: np.exp(-t)),
        "1/s": (lambda s: 1 / s, lambda t: np.ones_like(t)),
        "wn/(s^2+wn^2)": (lambda s: wn / (s * s + wn * wn), lambda t: np.sin(wn * t)),
    }
    notes, ok = [], True
    for name, (F, f) in pairs.items():
        res = ilt_bromwich(F, t_end)
        m = (res.t > 0) & (res.t <= 0.9 * t_end)
        err = np.abs(res.values[m] - f(res.t[m])).max()
        ok &= err < 1e-3
        notes.append(f"{name} {err:.1e}")
    single = NetworkCase.from_susceptance([[0.5]], [Device(1, ConverterSpec("static_admittance", {"g": 2.0}))])
    fixtures = [("single-bus", single, DisturbanceSpec(1, 1.0, "d", 0.2))]
    fixtures += [(f"39-bus {k}", c, DisturbanceSpec(9, 1.0, "d", 0.5)) for k, c in _bus9_scenarios().items()]
    fixtures.append(("39-bus bus3", load_bundled(), DisturbanceSpec(3, 1.0, "q", 0.5)))
    for name, case, dist in fixtures:
        ts = step_response(case, dist)
        rel = ts.metadata["final_value_rel_error"]
        ok &= rel <= 0.01
        notes.append(f"{name} final {rel:.1e}")
    return bool(ok), "; ".join(notes)


def criterion_7():
    grid = make_freq_grid()
    cases = _bus9_scenarios()
    kmin = {k: strength_sweep(c, grid).kappa.min() for k, c in cases.items()}
    peak = {k: step_response(c, DisturbanceSpec(9, 1.0, "d", 0.5)).max_norm.max() for k, c in cases.items()}
    ok_i = kmin["droop"] > kmin["pll_pq"]
    ok_ii = peak["droop"] < peak["pll_pq"]
    detail = (f"(i) min kappa droop {kmin['droop']:.4f} vs pll_pq {kmin['pll_pq']:.4f} "
              f"{'ok' if ok_i else 'NOT raised'}; (ii) peak |dU| droop {peak['droop']:.5f} vs "
              f"pll_pq {peak['pll_pq']:.5f} {'ok' if ok_ii else 'NOT lowered'}")
    return bool(ok_i and ok_ii), detail


def criterion_8():
    rng = np.random.default_rng(SEED + 8)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        H = np.block([[np.zeros((n, n)), M], [M.conj().T, np.zeros((n, n))]])
        ev = np.linalg.eigvalsh(H)  # +-sigma_i
        hi, lo = svd_extremes(M)
        worst = max(worst, abs(hi - ev[-1]) / ev[-1], abs(lo - ev[n]) / ev[n])
    gain_err = 0.0
    for case, freqs in random_suite()[:50]:
        for f in freqs[:5]:
            s = 2j * np.pi * f
            Y = closed_loop(case, s)
            kappa = svd_extremes(Y)[1]
            gain_err = max(gain_err, abs(svd_extremes(np.linalg.inv(Y))[0] * kappa - 1))
    ok = worst <= 1e-10 and gain_err <= 1e-9
    return ok, f"worst SVD vs eigen rel. diff {worst:.1e} (rtol 1e-10); |kappa * sigma_max(inv) - 1| <= {gain_err:.1e}"


CRITERIA = {
    1: ("Dual-form equivalence", criterion_1),
    2: ("Strength lower bounds", criterion_2),
    3: ("Forming Index taxonomy", criterion_3),
    4: ("Trivial identities", criterion_4),
    5: ("Kron reduction vs full solve", criterion_5),
    6: ("Inverse Laplace accuracy", criterion_6),
    7: ("39-bus scenario ordering", criterion_7),
    8: ("Singular value oracle", criterion_8),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    title, fn = CRITERIA[number]
    ok, detail = fn()
    assert _record(number, title, ok, detail), detail


if __name__ == "__main__":
    results = [_record(k, t, *fn()) for k, (t, fn) in sorted(CRITERIA.items())]
    sys.exit(0 if all(results) else 1)
