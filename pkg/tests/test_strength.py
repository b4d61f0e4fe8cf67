import numpy as np
import pytest

from helpers import random_case
from formidex import (
    ConfigError,
    ConverterSpec,
    Device,
    NetworkCase,
    closed_loop,
    compare_scenarios,
    load_bundled,
    make_freq_grid,
    prop1_check,
    strength_point,
    strength_sweep,
)
from formidex.tfcore import svd_extremes

W0 = 2 * np.pi * 60


def single_bus(g=1.5, b=4.0, tau=0.1):
    return NetworkCase.from_susceptance([[b]], [Device(1, ConverterSpec("static_admittance", {"g": g}))], tau=tau)


def test_single_bus_kappa_analytic():
    # Y_cl = g I + b (x I + J)^-1 = (g + b x / (x^2+1)) I - b / (x^2+1) J
    g, b, tau = 1.5, 4.0, 0.1
    case = single_bus(g, b, tau)
    for f in (0.01, 1.0, 60.0, 900.0):
        x = 2j * np.pi * f / W0 + tau
        a, c = g + b * x / (x * x + 1), -b / (x * x + 1)
        kappa, alpha, *_ = strength_point(case, 2j * np.pi * f)
        assert kappa == pytest.approx(min(abs(a + 1j * c), abs(a - 1j * c)), rel=1e-12)
        assert alpha == pytest.approx(b, rel=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_bounds_hold_on_random_cases(seed):
    rng = np.random.default_rng(100 + seed)
    case = random_case(rng)
    sweep = strength_sweep(case, make_freq_grid(n_points=40))
    assert np.all(sweep.kappa_ok) and np.all(sweep.alpha_ok)


def test_inverse_kappa_is_worst_case_gain():
    case = load_bundled()
    for f in (0.1, 5.0, 200.0):
        Y = closed_loop(case, 2j * np.pi * f)
        kappa = strength_point(case, 2j * np.pi * f)[0]
        assert svd_extremes(np.linalg.inv(Y))[0] * kappa == pytest.approx(1.0, abs=1e-9)


def test_prop1_report_on_bundled_case():
    report = prop1_check(load_bundled(), make_freq_grid(n_points=30))
    assert report.all_satisfied
    assert report.gfm.shape == (30,)
    assert report.bands.bands[0][0] == pytest.approx(0.01)


def test_prop1_needs_extra_device():
    with pytest.raises(ConfigError):
        prop1_check(single_bus(), make_freq_grid(n_points=5))


def test_vacuous_flag_and_columns():
    sweep = strength_sweep(load_bundled(), make_freq_grid(n_points=12))
    cols = sweep.to_columns()
    assert list(cols) == ["f_hz", "kappa", "alpha", "bound_kappa", "bound_alpha", "sv_max", "vacuous"]
    np.testing.assert_array_equal(cols["vacuous"], (sweep.bound_kappa <= 0) | (sweep.bound_alpha <= 0))


def test_sv_max_nan_without_extra():
    sweep = strength_sweep(single_bus(), make_freq_grid(n_points=5))
    assert np.all(np.isnan(sweep.sv_max))
    np.testing.assert_allclose(sweep.bound_alpha, 4.0)


def test_compare_identical_is_zero():
    grid = make_freq_grid(n_points=10)
    cmp = compare_scenarios(load_bundled(), load_bundled(), grid)
    assert np.all(cmp.d_kappa == 0) and np.all(cmp.d_alpha == 0)
    assert cmp.summary()["max_d_kappa"] == 0.0


def test_compare_requires_same_retained():
    with pytest.raises(ConfigError):
        compare_scenarios(load_bundled(), single_bus(), make_freq_grid(n_points=5))


def test_gfm_extra_device_raises_min_kappa():
    base = load_bundled()
    grid = make_freq_grid(n_points=60)
    op, filt = base.extra.spec.op, base.extra.spec.filter
    droop = base.with_extra(ConverterSpec("droop", op=op, filter=filt))
    pll = base.with_extra(ConverterSpec("pll_pq", op=op, filter=filt))
    assert strength_sweep(droop, grid).kappa.min() > strength_sweep(pll, grid).kappa.min()
