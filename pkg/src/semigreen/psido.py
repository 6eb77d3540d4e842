"""Kohn-Nirenberg quantization of symbols on the periodic grid.

Symbols here come in two flavours:

* tangential symbols b(x', xi') that act along every axis except the last
  (the last axis is the distinguished direction; it rides along untouched),
* full symbols a(x', xi', xi_n) that additionally see the frequency of the
  last axis, either as a polynomial in xi_n with tangential coefficients
  (exactly separable, cheap) or as a generic function (per-slice loop).

The quantization rule is multiply-in-frequency first, then multiply by the
x'-dependent part:

    (Op(b) u)(x) = IFFT_{xi'}[ b(x, .) FFT_{xi'} u ](x),

evaluated per x'-site.  On the discrete torus this is exact for pure
frequency multipliers and for pure position multipliers alike.

Every quantized operator is split into a far-field Fourier multiplier
(the symbol frozen at a corner of the box, where compactly supported
coefficients have died off) plus a dense correction that only touches the
x'-columns named by the symbol's support mask.  Symbols without a mask are
treated as everywhere-supported, which is correct but slower.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import Field, Grid, fft_native, ifft_native
from .linop import LinOp

__all__ = [
    "TangSymbol",
    "FullSymbol",
    "SeparableFullSymbol",
    "tangential_multiplier",
    "quantize_tangential",
    "quantize_full",
    "compose_expansion",
    "ComposedPair",
]

# Central finite-difference step for symbol derivatives.  Symbols in this
# package vary on O(1) scales, so a fixed step balancing truncation against
# roundoff is appropriate.
_FD_STEP = 1e-5


def _shifted(coords, j, delta):
    out = list(coords)
    out[j] = out[j] + delta
    return tuple(out)


@dataclass(frozen=True)
class TangSymbol:
    """A tangential symbol b(x', xi').

    ``fn(x, xi)`` receives tuples of broadcastable coordinate arrays (one per
    tangential axis in each tuple) and must return the broadcast result;
    returning a scalar is fine for constant symbols.  ``x_support`` is an
    optional predicate on x'-coordinates marking the columns where the symbol
    differs from its far-field (corner) value; quantization uses it to shrink
    the dense correction.  ``dx_fns`` / ``dxi_fns`` optionally carry analytic
    first derivatives, one callable per coordinate; missing ones fall back to
    central differences.
    """

    fn: Callable
    x_support: Callable | None = None
    dx_fns: tuple | None = None
    dxi_fns: tuple | None = None
    label: str = ""

    def __call__(self, x, xi):
        return self.fn(x, xi)

    # -- calculus -------------------------------------------------------

    def dx(self, j: int) -> "TangSymbol":
        """First derivative in the j-th tangential position coordinate."""
        if self.dx_fns is not None and self.dx_fns[j] is not None:
            fn = self.dx_fns[j]
        else:
            base = self.fn

            def fn(x, xi, _j=j, _b=base):
                up = _b(_shifted(x, _j, _FD_STEP), xi)
                dn = _b(_shifted(x, _j, -_FD_STEP), xi)
                return (up - dn) / (2.0 * _FD_STEP)

        return TangSymbol(fn, x_support=self.x_support,
                          label=f"d_x{j}({self.label})")

    def dxi(self, j: int) -> "TangSymbol":
        """First derivative in the j-th tangential frequency coordinate."""
        if self.dxi_fns is not None and self.dxi_fns[j] is not None:
            fn = self.dxi_fns[j]
        else:
            base = self.fn

            def fn(x, xi, _j=j, _b=base):
                up = _b(x, _shifted(xi, _j, _FD_STEP))
                dn = _b(x, _shifted(xi, _j, -_FD_STEP))
                return (up - dn) / (2.0 * _FD_STEP)

        return TangSymbol(fn, x_support=self.x_support,
                          label=f"d_xi{j}({self.label})")

    # -- pointwise algebra (drops analytic derivatives; FD picks up) -----

    def __mul__(self, other):
        if isinstance(other, TangSymbol):
            f, g = self.fn, other.fn
            return TangSymbol(lambda x, xi: f(x, xi) * g(x, xi),
                              x_support=_union_support(self.x_support,
                                                       other.x_support),
                              label=f"({self.label})*({other.label})")
        c = complex(other)
        f = self.fn
        return TangSymbol(lambda x, xi: c * f(x, xi),
                          x_support=self.x_support,
                          label=f"{c}*({self.label})")

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, TangSymbol):
            c = complex(other)
            f = self.fn
            return TangSymbol(lambda x, xi: f(x, xi) + c,
                              label=f"({self.label})+{c}")
        f, g = self.fn, other.fn
        return TangSymbol(lambda x, xi: f(x, xi) + g(x, xi),
                          x_support=_union_support(self.x_support,
                                                   other.x_support),
                          label=f"({self.label})+({other.label})")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self


def _union_support(a, b):
    """Union of support predicates; None means everywhere."""
    if a is None or b is None:
        return None
    return lambda x: np.logical_or(a(x), b(x))


def _empty_support(x):
    shape = np.broadcast_shapes(*(np.shape(c) for c in x))
    return np.zeros(shape, dtype=bool)


def tangential_multiplier(fn: Callable, label: str = "") -> TangSymbol:
    """Symbol depending on xi' only; quantizes to a pure Fourier multiplier."""
    return TangSymbol(lambda x, xi: fn(xi), x_support=_empty_support,
                      label=label)


@dataclass(frozen=True)
class FullSymbol:
    """A generic full symbol a(x', xi', xi_n).

    ``fn(x, xi)`` gets n-1 position arrays and n frequency arrays (the last
    frequency is xi_n).  Symbols must not depend on the last position
    coordinate.  ``x_support`` plays the same role as for TangSymbol.
    """

    fn: Callable
    x_support: Callable | None = None
    label: str = ""

    def __call__(self, x, xi):
        return self.fn(x, xi)


@dataclass(frozen=True)
class SeparableFullSymbol:
    """A full symbol of the form sum_m C_m(x', xi') xi_n^m.

    ``terms`` is a tuple of (coefficient TangSymbol, integer power) pairs.
    Quantization of this form is exactly a sum of tangential operators
    composed with xi_n-monomial multipliers, with no remainder.
    """

    terms: tuple
    label: str = ""


# ---------------------------------------------------------------------------
# flattened grid geometry


@lru_cache(maxsize=16)
def _inverse_phase_matrix(N: int, tang_dims: int) -> np.ndarray:
    """E[s, f] = exp(+2 pi i m.k / N) / N^d over flattened multi-indices.

    Row-major flattening on both sides, matching ndarray.reshape.
    """
    idx = np.arange(N)
    w = np.exp(2j * np.pi / N * np.outer(idx, idx))
    e = w
    for _ in range(tang_dims - 1):
        e = np.kron(e, w)
    return e / float(N**tang_dims)


def _flat_sites(grid: Grid):
    """Tangential site coordinates, each component flattened to (S,)."""
    axes = np.meshgrid(*([grid.x1d] * (grid.n - 1)), indexing="ij")
    return tuple(a.ravel() for a in axes)


def _flat_freqs(grid: Grid):
    """Tangential native-order frequencies, each component flattened to (F,)."""
    axes = np.meshgrid(*([grid.xi1d_native] * (grid.n - 1)), indexing="ij")
    return tuple(a.ravel() for a in axes)


def _corner(grid: Grid):
    """A reference x' in the far corner, outside every compact coefficient."""
    return tuple(np.asarray(-grid.L) for _ in range(grid.n - 1))


def _eval(fn, x, xi, shape):
    out = np.asarray(fn(x, xi), dtype=complex)
    return np.broadcast_to(out, shape)


def _support_rows(grid: Grid, x_support, xs):
    s_total = grid.N ** (grid.n - 1)
    if x_support is None:
        return np.arange(s_total)
    mask = np.broadcast_to(np.asarray(x_support(xs), dtype=bool), (s_total,))
    return np.nonzero(mask)[0]


# ---------------------------------------------------------------------------
# quantization


def quantize_tangential(grid: Grid, sym: TangSymbol, label: str = "") -> LinOp:
    """Quantize a tangential symbol into a LinOp on x-space fields."""
    tang = tuple(range(grid.n - 1))
    s_total = grid.N ** (grid.n - 1)
    f_total = s_total
    z = grid.N

    xs = _flat_sites(grid)
    xifs = _flat_freqs(grid)

    far_flat = _eval(sym.fn, _corner(grid), xifs, (f_total,))
    far_grid = far_flat.reshape(grid.shape[:-1] + (1,))

    rows = _support_rows(grid, sym.x_support, xs)
    if rows.size:
        x_in = tuple(c[rows][:, None] for c in xs)
        xi_b = tuple(c[None, :] for c in xifs)
        b_in = _eval(sym.fn, x_in, xi_b, (rows.size, f_total))
        e_in = _inverse_phase_matrix(grid.N, grid.n - 1)[rows]
        m_in = (b_in - far_flat[None, :]) * e_in
    else:
        m_in = None

    def apply_fn(u: Field) -> Field:
        if u.space != "x":
            raise ValueError("tangential operators act on x-space fields")
        spec = fft_native(u.data, axes=tang)
        out = ifft_native(far_grid * spec, axes=tang)
        if m_in is not None:
            corr = m_in @ spec.reshape(f_total, z)
            out_flat = out.reshape(s_total, z)
            out_flat[rows] += corr
        return u.with_data(out)

    return LinOp(apply_fn, label=label or f"Op[{sym.label}]")


def _monomial_multiplier(grid: Grid, power: int):
    """Multiplication by xi_n^power along the last axis, in x-space."""
    last = (grid.n - 1,)
    shape = (1,) * (grid.n - 1) + (grid.N,)
    xin = grid.xi1d_native.reshape(shape) ** power

    def apply_fn(data: np.ndarray) -> np.ndarray:
        if power == 0:
            return data
        return ifft_native(xin * fft_native(data, axes=last), axes=last)

    return apply_fn


def quantize_full(grid: Grid, sym, label: str = "") -> LinOp:
    """Quantize a full symbol (separable or generic) into a LinOp."""
    if isinstance(sym, SeparableFullSymbol):
        parts = [(quantize_tangential(grid, coeff),
                  _monomial_multiplier(grid, power))
                 for coeff, power in sym.terms]

        def apply_sep(u: Field) -> Field:
            acc = np.zeros(grid.shape, dtype=complex)
            for op, mono in parts:
                acc += op(u.with_data(mono(u.data))).data
            return u.with_data(acc)

        return LinOp(apply_sep, label=label or f"Op[{sym.label}]")

    if not isinstance(sym, FullSymbol):
        raise TypeError(f"cannot quantize object of type {type(sym).__name__}")

    s_total = grid.N ** (grid.n - 1)
    f_total = s_total
    z = grid.N

    xs = _flat_sites(grid)
    xifs = _flat_freqs(grid)
    xin = grid.xi1d_native

    mesh = grid.xi_mesh_native()
    far_full = _eval(sym.fn, _corner(grid), tuple(mesh), grid.shape)

    rows = _support_rows(grid, sym.x_support, xs)
    e_in = (_inverse_phase_matrix(grid.N, grid.n - 1)[rows]
            if rows.size else None)
    far_cols = far_full.reshape(f_total, z)
    x_in = tuple(c[rows][:, None] for c in xs) if rows.size else None
    xi_b = tuple(c[None, :] for c in xifs)

    def apply_gen(u: Field) -> Field:
        if u.space != "x":
            raise ValueError("full-symbol operators act on x-space fields")
        spec = fft_native(u.data)
        out = ifft_native(far_full * spec)
        if rows.size:
            spec_cols = spec.reshape(f_total, z)
            t = np.empty((rows.size, z), dtype=complex)
            for w in range(z):
                coords = xi_b + (np.asarray(xin[w]),)
                a_w = _eval(sym.fn, x_in, coords, (rows.size, f_total))
                t[:, w] = ((a_w - far_cols[None, :, w]) * e_in) \
                    @ spec_cols[:, w]
            corr = np.fft.ifft(t, axis=1)
            out_flat = out.reshape(s_total, z)
            out_flat[rows] += corr
        return u.with_data(out)

    return LinOp(apply_gen, label=label or f"Op[{sym.label}]")


# ---------------------------------------------------------------------------
# composition expansion


@dataclass(frozen=True)
class ComposedPair:
    """Expansion data for Op(left) . Op(right).

    ``principal`` is the pointwise product symbol, ``first_order`` the
    (1/i) sum_j d_xi_j(left) d_x_j(right) transport term, ``composition``
    the actual operator product, and ``remainder`` the difference

        Op(left) Op(right) - Op(principal) - h Op(first_order),

    which contracts at second order in h for smooth bounded symbols.
    """

    principal: TangSymbol
    first_order: TangSymbol
    composition: LinOp
    remainder: LinOp


def compose_expansion(grid: Grid, left: TangSymbol,
                      right: TangSymbol) -> ComposedPair:
    principal = left * right
    first = None
    for j in range(grid.n - 1):
        term = left.dxi(j) * right.dx(j)
        first = term if first is None else first + term
    first_order = (1.0 / 1j) * first

    op_left = quantize_tangential(grid, left)
    op_right = quantize_tangential(grid, right)
    op_prod = quantize_tangential(grid, principal)
    op_first = quantize_tangential(grid, first_order)
    h = grid.h

    composition = LinOp(lambda u: op_left(op_right(u)),
                        label=f"Op[{left.label}].Op[{right.label}]")

    def rem_fn(u: Field) -> Field:
        return composition(u) - op_prod(u) - h * op_first(u)

    remainder = LinOp(rem_fn, label="composition remainder")
    return ComposedPair(principal, first_order, composition, remainder)
