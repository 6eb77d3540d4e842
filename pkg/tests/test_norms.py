import math

import numpy as np
import pytest

from semigreen.grid import Field, make_grid
from semigreen.norms import inner, lr_norm, mixed_norm, sobolev_norm, sup_norm


def grid3():
    return make_grid(3, 16, math.pi, 0.4, xi_cap=1.5)


def test_constant_l2_norm():
    g = grid3()
    u = Field(g, np.ones(g.shape, dtype=complex), "x")
    assert lr_norm(u, 2) == pytest.approx((2 * g.L) ** (g.n / 2), rel=1e-13)


def test_lr_norm_rejects_r_at_most_one():
    g = grid3()
    u = Field(g, np.ones(g.shape, dtype=complex), "x")
    with pytest.raises(ValueError):
        lr_norm(u, 1.0)
    with pytest.raises(ValueError):
        lr_norm(u, 0.5)


def test_single_mode_sobolev_norm():
    g = grid3()
    k = (2, -1, 3)
    xi0 = np.array(k) * g.dxi
    xs = g.x_mesh()
    phase = sum(x * w for x, w in zip(xs, xi0))
    u = Field(g, np.exp(1j * phase / g.h), "x")
    bracket = math.sqrt(1.0 + float(xi0 @ xi0))
    expect = bracket * (2 * g.L) ** (g.n / 2)
    assert sobolev_norm(u, 1, 2) == pytest.approx(expect, rel=1e-12)


def test_mixed_norm_bound_on_band_limited_probe():
    # mixed_norm(u, -1, 1, 2) <= sup <xi>/<xi'> * ||u||_2, both sides computed
    # on the lattice directly.
    g = grid3()
    rng = np.random.default_rng(11)
    from semigreen.probes import band_limited_probe
    u = band_limited_probe(g, rng, band=0.8)
    lhs = mixed_norm(u, -1, 1, 2)
    # the lattice sup of <xi>/<xi'>
    xi = g.xi_mesh_native()
    full = np.sqrt(1.0 + sum(a**2 for a in xi))
    tang = np.sqrt(1.0 + sum(a**2 for a in xi[:-1]))
    c = float((full / tang).max())
    assert lhs <= c * lr_norm(u, 2) * (1 + 1e-12)


def test_mixed_norm_trivial_exponents_match_lr():
    g = grid3()
    rng = np.random.default_rng(2)
    u = Field(g, rng.standard_normal(g.shape) + 0j, "x")
    assert mixed_norm(u, 0, 0, 2) == pytest.approx(lr_norm(u, 2), rel=1e-13)


def test_region_restricted_norm_and_sup():
    g = grid3()
    xs = g.x_mesh()
    data = np.where(xs[-1] >= 0, 2.0, 1.0).astype(complex) + np.zeros(g.shape)
    u = Field(g, data, "x")
    upper = np.broadcast_to(xs[-1] >= 0, g.shape)
    assert sup_norm(u, region=~upper) == pytest.approx(1.0)
    vol_upper = (2 * g.L) ** (g.n - 1) * g.L
    assert lr_norm(u, 2, region=upper) == pytest.approx(2.0 * vol_upper**0.5, rel=1e-12)


def test_inner_product_conjugates_first_slot():
    g = grid3()
    u = Field(g, 1j * np.ones(g.shape), "x")
    v = Field(g, np.ones(g.shape, dtype=complex), "x")
    val = inner(u, v)
    assert val == pytest.approx(-1j * (2 * g.L) ** g.n)
