import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formidex import ConfigError, NumericalError
from formidex.tfcore import (
    I2,
    LineParams,
    FrequencyGrid,
    eval_Z,
    eval_Zinv,
    kron_block,
    make_freq_grid,
    map_points,
    svd_extremes,
    thread_count,
)

W0 = 2 * np.pi * 60


def dilation_extremes(M):
    # eigenvalues of [[0, M], [M^H, 0]] are +-sigma_i of a square M
    n = M.shape[0]
    H = np.block([[np.zeros((n, n)), M], [M.conj().T, np.zeros((n, n))]])
    ev = np.linalg.eigvalsh(H)
    return ev[-1], ev[n]


def test_z_at_dc_is_resistive_plus_coupling():
    np.testing.assert_array_equal(eval_Z(0, 0.1, W0), [[0.1, -1.0], [1.0, 0.1]])


def test_zinv_closed_form_matches_numeric_inverse():
    for s in (1j, 2j * np.pi * 50, 3 + 40j, -5 + 1e4j):
        np.testing.assert_allclose(eval_Zinv(s, 0.1, W0) @ eval_Z(s, 0.1, W0), I2, atol=1e-13)


def test_z_conjugate_symmetry():
    s = 12.0 + 345.0j
    np.testing.assert_array_equal(eval_Z(np.conj(s), 0.2, W0), np.conj(eval_Z(s, 0.2, W0)))


def test_default_grid():
    g = make_freq_grid()
    assert len(g) == 400
    assert g.points[0] == 0.01 and g.points[-1] == 1000.0
    assert np.all(np.diff(g.points) > 0)
    np.testing.assert_allclose(g.s, 2j * np.pi * g.points)


@pytest.mark.parametrize("args", [(1.0, 1.0, 10), (0.0, 10.0, 10), (1.0, 10.0, 1), (-1.0, 10.0, 5)])
def test_bad_grid(args):
    with pytest.raises(ConfigError):
        make_freq_grid(*args)


def test_grid_rejects_unsorted_points():
    with pytest.raises(ConfigError):
        FrequencyGrid(np.array([1.0, 0.5]))


def test_line_params_validation():
    assert LineParams(0.0).l_g == 0.0
    with pytest.raises(ConfigError):
        LineParams(-0.1)
    with pytest.raises(ConfigError):
        LineParams(0.3, tau=-1.0)


def test_svd_extremes_diagonal():
    assert svd_extremes(np.diag([3.0, -0.5, 2.0])) == pytest.approx((3.0, 0.5))


def test_svd_rejects_nonfinite():
    with pytest.raises(NumericalError):
        svd_extremes(np.array([[1.0, np.nan], [0.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_svd_matches_dilation_oracle(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    hi, lo = svd_extremes(M)
    ohi, olo = dilation_extremes(M)
    assert hi == pytest.approx(ohi, rel=1e-10)
    assert lo == pytest.approx(olo, rel=1e-8)


def test_kron_block_layout():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    K = kron_block(B, M)
    np.testing.assert_array_equal(K[2:, :2], 3 * M)
    np.testing.assert_array_equal(K[:2, 2:], 2 * M)


def test_map_points_keeps_order(monkeypatch):
    monkeypatch.setenv("FORMIDEX_THREADS", "4")
    assert thread_count() == 4
    assert map_points(lambda x: x * x, list(range(50))) == [x * x for x in range(50)]


def test_thread_env_validation(monkeypatch):
    monkeypatch.setenv("FORMIDEX_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("FORMIDEX_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_count()
