import numpy as np
import pytest

from semigreen.grid import Field, fft_native, ifft_native, make_grid
from semigreen.heatflow import (
    HeatSymbol,
    below_plane_mask,
    causal_filter_columns,
    causal_inverse,
    half_space_inverse,
    heat_ellipticity,
    heat_operator,
    indicator_above,
    ramp_filter_columns,
    refined_inverse,
    resolve_onset,
    steady_inverse,
    support_leak,
    validate_heat_symbol,
)
from semigreen.psido import TangSymbol, tangential_multiplier


def rel(a, b):
    return np.linalg.norm((a - b).ravel()) / np.linalg.norm(b.ravel())


@pytest.fixture(scope="module")
def grid():
    return make_grid(2, 32, np.pi, 0.35, xi_cap=0.5, max_spacing=2.0)


@pytest.fixture(scope="module")
def coords(grid):
    return np.meshgrid(grid.x1d, grid.x1d, indexing="ij")


def bracket_symbol():
    return tangential_multiplier(lambda xi: 1.0 + 0.5 * np.sqrt(1.0 + xi[0] ** 2),
                                 label="1+<xi'>/2")


def const_symbol(w0=1.3):
    return tangential_multiplier(lambda xi: w0 + 0.0 * xi[0], label="const")


def xdep_symbol():
    def fn(x, xi):
        bump = np.exp(-x[0] ** 2 / (2 * 0.8 ** 2))
        return np.sqrt(1.0 + xi[0] ** 2) * (1.0 + 0.4 * bump)

    return TangSymbol(fn, x_support=lambda x: np.abs(x[0]) < 2.8, label="xdep")


def one_sided_lump(coords):
    x, y = coords
    return (np.exp(-((y + 0.5) ** 2) / (2 * 0.3 ** 2))
            * np.exp(-(x - 0.3) ** 2 / (2 * 0.7 ** 2)) * (1.0 + 0.2j))


def test_forward_operator_is_exact_multiplier_for_frozen_damping(grid, coords):
    x, y = coords
    hs = HeatSymbol(bracket_symbol())
    op = heat_operator(grid, hs)
    m, k = 4, -7
    xi_t = grid.h * (np.pi / grid.L) * m
    xi_n = grid.h * (np.pi / grid.L) * k
    mode = np.exp(1j * (np.pi / grid.L) * (m * x + k * y))
    out = op(Field(grid, mode))
    fac = 1.0 + 0.5 * np.sqrt(1.0 + xi_t**2) + 1j * xi_n
    assert rel(out.data, fac * mode) <= 1e-12


def test_inverse_after_operator_reproduces_one_sided_field(grid, coords):
    # The causal composition: operator first, then the causal inverse.  For
    # damping frozen in x' the quantizations are exact multipliers and the
    # homogeneous correction picks up only the field's own bottom tail.
    hs = HeatSymbol(bracket_symbol())
    u = Field(grid, one_sided_lump(coords).astype(complex))
    assert np.abs(u.data[:, 0]).max() <= 1e-15  # genuinely one-sided
    w = causal_inverse(grid, hs, start_index="auto")(heat_operator(grid, hs)(u))
    assert rel(w.data, u.data) <= 1e-12


def test_inverse_after_operator_leak_below_support(grid, coords):
    hs = HeatSymbol(bracket_symbol())
    u = Field(grid, one_sided_lump(coords).astype(complex))
    w = causal_inverse(grid, hs, start_index="auto")(heat_operator(grid, hs)(u))
    low = np.zeros(grid.shape, bool)
    low[:, :4] = True
    assert support_leak(w, low) <= 1e-10


def test_single_pass_identity_defect_for_varying_damping_is_small(grid, coords):
    # With x'-dependent damping one causal pass is only a parametrix; the
    # defect is O(h) and removed by refined_inverse.
    hs = HeatSymbol(xdep_symbol())
    u = Field(grid, one_sided_lump(coords).astype(complex))
    w = causal_inverse(grid, hs, start_index="auto")(heat_operator(grid, hs)(u))
    assert rel(w.data, u.data) <= 0.1


def test_causal_single_mode_closed_form(grid, coords):
    x, y = coords
    w0 = 1.3
    hs = HeatSymbol(const_symbol(w0))
    m, k = 3, -5
    kap_m = (np.pi / grid.L) * m
    kap_k = (np.pi / grid.L) * k
    mode = np.exp(1j * kap_m * x) * np.exp(1j * kap_k * y)
    out = causal_inverse(grid, hs, start_index=0)(Field(grid, mode))
    x0 = grid.x1d[0]
    denom = w0 + 1j * grid.h * kap_k
    oracle = ((np.exp(1j * kap_k * y)
               - np.exp(-(y - x0) * w0 / grid.h) * np.exp(1j * kap_k * x0))
              / denom * np.exp(1j * kap_m * x))
    oracle[:, 0] = 0.0
    assert rel(out.data, oracle) <= 1e-12


def test_steady_inverse_is_two_sided_exact_for_frozen_damping(grid):
    rng = np.random.default_rng(11)
    hs = HeatSymbol(bracket_symbol())
    op = heat_operator(grid, hs)
    inv = steady_inverse(grid, hs)
    r = Field(grid, rng.standard_normal(grid.shape)
              + 1j * rng.standard_normal(grid.shape))
    assert rel(op(inv(r)).data, r.data) <= 1e-12
    assert rel(inv(op(r)).data, r.data) <= 1e-12


def test_half_space_inverse_exact_zeros_at_and_below_cut(grid):
    rng = np.random.default_rng(5)
    cut = 12
    hs = HeatSymbol(const_symbol())
    op = half_space_inverse(grid, hs, cut)
    r = Field(grid, rng.standard_normal(grid.shape)
              + 1j * rng.standard_normal(grid.shape))
    out = op(r)
    assert np.all(out.data[:, :cut + 1] == 0.0)
    assert support_leak(out, below_plane_mask(grid, cut)) == 0.0


def test_auto_onset_keeps_exact_zeros_below_input_support(grid, coords):
    z0 = 9
    hs = HeatSymbol(const_symbol())
    data = one_sided_lump(coords).astype(complex)
    data[:, :z0] = 0.0
    out = causal_inverse(grid, hs, start_index="auto")(Field(grid, data))
    assert np.all(out.data[:, :z0] == 0.0)


def test_causal_inverse_of_zero_field_is_zero(grid):
    hs = HeatSymbol(const_symbol())
    out = causal_inverse(grid, hs, start_index="auto")(
        Field(grid, np.zeros(grid.shape, complex)))
    assert np.all(out.data == 0.0)


def test_refined_causal_solves_one_sided_problem(grid, coords):
    x, y = coords
    z0 = 6
    hs = HeatSymbol(xdep_symbol())
    rhs_data = (np.exp(-((y - 0.2) ** 2) / (2 * 0.35 ** 2))
                * np.exp(-x**2 / (2 * 0.6 ** 2))).astype(complex)
    rhs_data[:, :z0] = 0.0
    rhs = Field(grid, rhs_data)
    res = refined_inverse(grid, hs, rhs, tol=1e-9, max_iter=200, seam="causal")
    assert res.converged
    assert res.iterations <= 80
    # independent residual check on the enforced nodes (strictly above z0)
    op = heat_operator(grid, hs)
    above = indicator_above(grid, z0 + 1)
    chk = above(op(res.field)) - above(rhs)
    assert np.linalg.norm(chk.data) / np.linalg.norm(rhs.data) <= 2e-9
    assert np.all(res.field.data[:, :z0 + 1] == 0.0)


def test_refined_steady_solves_periodic_problem(grid):
    rng = np.random.default_rng(2)
    hs = HeatSymbol(xdep_symbol())
    rhs = Field(grid, rng.standard_normal(grid.shape)
                + 1j * rng.standard_normal(grid.shape))
    res = refined_inverse(grid, hs, rhs, tol=1e-9, max_iter=100, seam="steady")
    assert res.converged
    assert res.iterations <= 30
    op = heat_operator(grid, hs)
    assert rel(op(res.field).data, rhs.data) <= 2e-9


def test_ramp_filter_single_mode_closed_form(grid, coords):
    x, y = coords
    w0 = 1.3
    m, k = 3, -5
    kap_m = (np.pi / grid.L) * m
    kap_k = (np.pi / grid.L) * k
    mode = np.exp(1j * kap_m * x) * np.exp(1j * kap_k * y)
    g_hat = fft_native(mode).reshape(grid.N, grid.N)
    w_arr = np.full(grid.N, w0, complex)
    cols = ramp_filter_columns(grid, g_hat, w_arr, 0)
    out = ifft_native(cols.reshape(grid.shape), axes=(0,))
    x0 = grid.x1d[0]
    a = w0 + 1j * grid.h * kap_k
    d = y - x0
    oracle = ((np.exp(1j * kap_k * y)
               - np.exp(-w0 * d / grid.h) * np.exp(1j * kap_k * x0)
               * (1.0 + (a / grid.h) * d)) / a**2 * np.exp(1j * kap_m * x))
    oracle[:, 0] = 0.0
    assert rel(out, oracle) <= 1e-12


def test_ramp_filter_is_confluent_limit_of_exponential_pair(grid, coords):
    # B = -d/dW of the single exponential filter; central differences in W
    # must match the ramp filter directly.
    x, y = coords
    mode = np.exp(1j * (np.pi / grid.L) * (3 * x - 5 * y))
    g_hat = fft_native(mode).reshape(grid.N, grid.N)
    w_arr = np.full(grid.N, 1.3, complex)
    delta = 1e-5
    up = causal_filter_columns(grid, g_hat, w_arr + delta, 0)
    dn = causal_filter_columns(grid, g_hat, w_arr - delta, 0)
    fd = (dn - up) / (2 * delta)
    ramp = ramp_filter_columns(grid, g_hat, w_arr, 0)
    assert np.linalg.norm(fd - ramp) / np.linalg.norm(ramp) <= 1e-8


def test_ellipticity_and_validation(grid):
    lo, hi = heat_ellipticity(
        grid, HeatSymbol(tangential_multiplier(lambda xi: np.sqrt(1 + xi[0] ** 2))))
    assert abs(lo - 1.0) <= 1e-12 and abs(hi - 1.0) <= 1e-12
    with pytest.raises(ValueError, match="not elliptic"):
        validate_heat_symbol(
            grid, HeatSymbol(tangential_multiplier(lambda xi: xi[0])))


def test_resolve_onset(grid):
    zero = Field(grid, np.zeros(grid.shape, complex))
    assert resolve_onset(grid, zero, "auto") is None
    data = np.zeros(grid.shape, complex)
    data[5, 17] = 1.0
    assert resolve_onset(grid, Field(grid, data), "auto") == 17
    assert resolve_onset(grid, zero, 3) == 3
    with pytest.raises(ValueError):
        resolve_onset(grid, zero, grid.N)


def test_support_leak_trivial_regions(grid):
    rng = np.random.default_rng(1)
    u = Field(grid, rng.standard_normal(grid.shape) + 0j)
    assert support_leak(u, np.ones(grid.shape, bool)) == pytest.approx(1.0)
    assert support_leak(u, np.zeros(grid.shape, bool)) == 0.0
