import math

import numpy as np
import pytest

from semigreen.grid import Field, make_grid
from semigreen.linop import (LinOp, check_adjoint, check_linearity, diagonal,
                             identity, multiplier)
from semigreen.norms import lr_norm
from semigreen.probes import op_norm_probe, standard_probe_family


def grid2():
    return make_grid(2, 16, math.pi, 0.5, xi_cap=2.0)


def test_identity_and_algebra():
    g = grid2()
    rng = np.random.default_rng(0)
    u = Field(g, rng.standard_normal(g.shape) + 0j, "x")
    A = identity()
    B = 2.0 * A
    C = B - A
    assert np.allclose(C(u).data, u.data)
    assert np.allclose((A @ B)(u).data, 2.0 * u.data)


def test_multiplier_exact_on_modes():
    g = grid2()
    m = multiplier(g, lambda x1, x2: 1.0 + x1**2 + 0 * x2, label="1+xi1^2")
    k = (4, -2)
    xs = g.x_mesh()
    xi0 = (g.dxi * k[0], g.dxi * k[1])
    u = Field(g, np.exp(1j * (xs[0] * xi0[0] + xs[1] * xi0[1]) / g.h), "x")
    v = m(u)
    expect = (1.0 + xi0[0] ** 2) * u.data
    assert np.abs(v.data - expect).max() <= 1e-12 * np.abs(expect).max()


def test_linearity_and_adjoint_checks():
    g = grid2()
    m = multiplier(g, lambda x1, x2: x1 + 1j * x2)
    assert check_linearity(m, g) <= 1e-13
    assert check_adjoint(m, g) <= 1e-13
    d = diagonal(np.linspace(0, 1, g.N**2).reshape(g.shape))
    assert check_adjoint(d, g) <= 1e-13


def test_composition_adjoint_order():
    g = grid2()
    a = multiplier(g, lambda x1, x2: 1.0 + 1j * x1)
    xs = g.x_mesh()
    b = diagonal(np.exp(-xs[0] ** 2 - xs[1] ** 2) + np.zeros(g.shape))
    assert check_adjoint(a @ b, g) <= 1e-13


def test_missing_adjoint_raises():
    A = LinOp(lambda u: u, label="bare")
    with pytest.raises(ValueError):
        A.adjoint()


def test_op_norm_probe_identity_and_scaling():
    g = grid2()
    probes = standard_probe_family(g, count=4, seed=1)
    l2 = lambda u: lr_norm(u, 2)
    rep = op_norm_probe(identity(), l2, l2, probes)
    assert rep.value == pytest.approx(1.0, rel=1e-12)
    rep2 = op_norm_probe(2.0 * identity(), l2, l2, probes)
    assert rep2.value == pytest.approx(2.0, rel=1e-12)


def test_op_norm_probe_bracket_cancellation():
    # A = <hD>^{-1} measured L2 -> H1 is exactly 1.
    from semigreen.norms import bracket_full_native, sobolev_norm
    g = grid2()
    A = multiplier(g, 1.0 / bracket_full_native(g))
    probes = standard_probe_family(g, count=4, seed=2)
    rep = op_norm_probe(A, lambda u: lr_norm(u, 2), lambda u: sobolev_norm(u, 1, 2), probes)
    assert rep.value == pytest.approx(1.0, abs=1e-10)
