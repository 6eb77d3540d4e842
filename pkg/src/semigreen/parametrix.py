"""Two-regime interior parametrix on the flattened upper half-box.

The localization cutoff rho of a FactorSet splits tangential frequencies
into an exterior regime, where the flattened symbol admits the one-sided
factorization, and an interior regime, where it is elliptic in xi_n.  Each
regime gets its own approximate inverse:

* exterior (supp(1-rho)): the causal half-space inverse of the upward
  factor is composed with the full factor and the flat free Green's
  operator,

      P_l = Op(1-rho) J+ J G_phi,

  recycling the Green's factor wholesale; the only defects are the
  single-pass J+ J seam and O(h) cutoff commutators, and the exact zeros
  of J+ below the boundary plane pass straight through the tangential
  cutoff;

* interior (supp rho): with the undamped roots b_pm of the flattened
  symbol p as a quadratic in xi_n (strictly off the real axis on supp rho
  once the tangential frequency clears the slope bound), the fraction
  rho/p is quantized directly -- and realized a second way through the
  residue form of the xi_n integral: per tangential column, a causal
  difference of two exponential flows

      i [e^{i b_-(x_n-s)/h} - e^{i b_+(x_n-s)/h}] / ((1+|K|^2)(b_+ - b_-))

  integrated upward from the onset plane of the input, with the ramp
  kernel taking over where the roots coalesce.  The flows are solved
  exactly for the trig interpolant, so the causal twin matches the
  quantization up to the causality transient while keeping exact zeros
  below the input's support -- it is the realization that carries the
  one-sided support and trace properties.

Masked by the indicator of a flattened domain in the upper half-box, the
sum is a one-sided parametrix: 1_W h^2 Lap_phi (P_l + P_s) 1_W = 1_W +
O(h) on fields supported in the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .factorization import FactorSet, build_factor_set, j_op, q_op
from .flatten import FlatteningMap, flat_conjugated_laplacian, flat_g_phi
from .grid import Field, Grid, fft_native, ifft_native, smoothstep7
from .heatflow import (_ROW_CHUNK, HeatSymbol, _column_damping,
                       causal_filter_columns, half_space_inverse,
                       ramp_filter_columns, resolve_onset)
from .linop import LinOp
from .norms import lr_norm
from .probes import NormReport
from .psido import (FullSymbol, TangSymbol, _corner, _eval, _flat_freqs,
                    quantize_full, quantize_tangential)

__all__ = [
    "ParametrixBundle",
    "boundary_plane_index",
    "undamped_roots",
    "small_symbol_split",
    "default_domain_mask",
    "build_parametrix",
    "p_l_apply",
    "p_s_apply",
    "p_s_residue_apply",
    "plane_trace",
    "parametrix_residual",
]

# Root-coalescence gap below which the two-pole kernel switches to the
# ramp flow; the direct difference still holds ~10 significant digits at
# the gap, while the exactly confluent columns (the zero mode over flat
# rows) would divide 0/0 without the switch.
_DEGENERATE_GAP = 1e-6


def boundary_plane_index(grid: Grid) -> int:
    """Node index of the boundary plane {x_n = 0} (exact on these boxes)."""
    idx = grid.N // 2
    if grid.x1d[idx] != 0.0:
        raise ValueError("grid has no exact x_n = 0 plane")
    return idx


def undamped_roots(fmap: FlatteningMap) -> tuple[TangSymbol, TangSymbol]:
    """The exact xi_n-roots b_pm of the flattened symbol, without damping.

    b_pm = i [(1 - i K.xi') +- sqrt(disc)] / (1 + |K|^2) with the principal
    square root, so Im b_plus >= Im b_minus always, and both stay positive
    wherever |xi'|^2 lies between the slope bound and 1.  Over flat rows
    they reduce to i(1 +- |xi'|).
    """
    def root_fn(x, xi, sign):
        K = fmap.grad_fn(x)
        kdot = sum(k * z for k, z in zip(K, xi))
        k2 = sum(k * k for k in K)
        t = sum(z * z for z in xi)
        disc = (1.0 - 1j * kdot) ** 2 - (1.0 - t) * (1.0 + k2)
        return 1j * ((1.0 - 1j * kdot) + sign * np.sqrt(disc)) / (1.0 + k2)

    plus = TangSymbol(lambda x, xi: root_fn(x, xi, +1.0),
                      x_support=fmap.x_support, label="b_plus")
    minus = TangSymbol(lambda x, xi: root_fn(x, xi, -1.0),
                       x_support=fmap.x_support, label="b_minus")
    return plus, minus


def _small_fraction(fs: FactorSet) -> FullSymbol:
    """rho(xi') / p(x', xi), the division masked off supp rho.

    On supp rho the flattened symbol is uniformly elliptic in xi_n (its
    sampled minimum is recorded in the factor-set constants), so no
    singular value is ever evaluated; off supp rho the value is exactly 0.
    """
    fmap = fs.fmap

    def fn(x, xi):
        tang, xin = xi[:-1], xi[-1]
        r = np.asarray(fs.rho.fn(x, tang), dtype=complex)
        K = fmap.grad_fn(x)
        shear = tuple(z - xin * k for z, k in zip(tang, K))
        p = 1.0 + 2j * xin - xin * xin - sum(s * s for s in shear)
        r, p = np.broadcast_arrays(r, p)
        live = np.abs(r) > 0.0
        return np.where(live, r / np.where(live, p, 1.0), 0.0)

    return FullSymbol(fn, x_support=fmap.x_support, label="rho/p")


def small_symbol_split(grid: Grid, fs: FactorSet):
    """The interior symbol as a compact core plus a smooth tail.

    Returns (core, tail, (r_lo, r_hi)): core carries a radial cutoff in
    |xi| that is 1 inside r_lo and 0 outside r_hi, tail the complement.
    The canonical radii (50, 100) matter only on boxes whose frequency
    range reaches them, so they shrink proportionally to the lattice cap
    when it is smaller.  The two pieces sum to rho/p exactly on every
    lattice point.
    """
    frac = _small_fraction(fs)
    r_hi = min(100.0, grid.xi_max * math.sqrt(grid.n))
    r_lo = 0.5 * r_hi

    def chi(xi):
        rad = np.sqrt(sum(np.asarray(z) ** 2 for z in xi))
        return smoothstep7((r_hi - rad) / (r_hi - r_lo))

    sup = fs.fmap.x_support
    core = FullSymbol(lambda x, xi: chi(xi) * frac.fn(x, xi),
                      x_support=sup, label="rho/p core")
    tail = FullSymbol(lambda x, xi: (1.0 - chi(xi)) * frac.fn(x, xi),
                      x_support=sup, label="rho/p tail")
    return core, tail, (r_lo, r_hi)


def _two_pole_columns(grid: Grid, g_hat: np.ndarray, w_plus, w_minus,
                      k2, z0: int) -> np.ndarray:
    """i (I_- - I_+) / ((1+|K|^2)(b_+ - b_-)) per column, ramp at coalescence.

    ``w_pm = -i b_pm`` broadcast (..., F) against ``g_hat`` (F, Z); ``k2``
    broadcasts against the leading axes.  I_pm are the causal unit flows of
    ``causal_filter_columns``, so a single xi_n-mode comes back multiplied
    by exactly 1/p(xi) -- the residue value of the interior fraction.
    """
    w_plus = np.asarray(w_plus, dtype=complex)
    w_minus = np.asarray(w_minus, dtype=complex)
    k2 = np.asarray(k2)
    i_plus = causal_filter_columns(grid, g_hat, w_plus, z0)
    i_minus = causal_filter_columns(grid, g_hat, w_minus, z0)
    gap = 1j * (w_plus - w_minus)  # = b_plus - b_minus
    scale = (1.0 + k2) * gap
    tiny = np.abs(gap) < _DEGENERATE_GAP
    if np.any(tiny):
        ramp = ramp_filter_columns(grid, g_hat, w_minus, z0)
        ramp = ramp / np.broadcast_to(1.0 + k2, gap.shape)[..., None]
        safe = np.where(tiny, 1.0, scale)
        return np.where(tiny[..., None], ramp,
                        1j * (i_minus - i_plus) / safe[..., None])
    return 1j * (i_minus - i_plus) / scale[..., None]


def _residue_op(grid: Grid, fs: FactorSet, start="auto") -> LinOp:
    """The interior operator through its causal residue flows.

    Per tangential column the xi_n-integral of rho/p collapses to the
    two-pole kernel in the undamped roots; both flows are solved exactly
    for the trig interpolant of the input, causally from the input's onset
    plane (``start``, default the lowest nonzero node), so the output is
    exactly zero at and below the support of the input.  With ``start``
    None the flows return their periodic steady solutions instead: no
    onset, no support property, but an output that must match the direct
    quantization of rho/p to rounding -- the two codepaths share nothing
    past the symbol, which makes the steady twin the agreement oracle.
    Columns off supp rho never run: their input is zeroed, and their
    roots -- which may cross the real axis out there and would overflow
    the decay profiles -- are replaced by a benign constant.
    """
    b_plus, b_minus = undamped_roots(fs.fmap)
    sup = fs.fmap.x_support
    wp = TangSymbol(lambda x, xi: -1j * b_plus.fn(x, xi), x_support=sup)
    wm = TangSymbol(lambda x, xi: -1j * b_minus.fn(x, xi), x_support=sup)
    wp_far, rows, wp_in, e_in = _column_damping(grid, wp)
    wm_far, _, wm_in, _ = _column_damping(grid, wm)

    f_total = grid.N ** (grid.n - 1)
    rho_modes = _eval(fs.rho.fn, _corner(grid), _flat_freqs(grid), (f_total,))
    kept = np.abs(rho_modes) > 0.0
    wp_far = np.where(kept, wp_far, 1.0)
    wm_far = np.where(kept, wm_far, 1.0)
    floor = min(float(np.real(wp_far[kept]).min()),
                float(np.real(wm_far[kept]).min()))
    k2_far = float(np.real(sum(k * k for k in fs.fmap.grad_fn(_corner(grid)))))
    if rows.size:
        wp_in = np.where(kept[None, :], wp_in, 1.0)
        wm_in = np.where(kept[None, :], wm_in, 1.0)
        floor = min(floor, float(np.real(wp_in[:, kept]).min()),
                    float(np.real(wm_in[:, kept]).min()))
        xs = np.meshgrid(*([grid.x1d] * (grid.n - 1)), indexing="ij")
        x_in = tuple(a.ravel()[rows] for a in xs)
        K_in = fs.fmap.grad_fn(x_in)
        k2_in = np.real(sum(k * k for k in K_in))[:, None]
    if floor <= 0.0:
        raise ValueError(
            f"undamped roots cross the real axis on supp rho (min Im "
            f"b_minus = {floor:.3e}); the causal flows would grow")

    tang = tuple(range(grid.n - 1))
    s_total = f_total

    def apply_fn(u: Field) -> Field:
        if u.space != "x":
            raise ValueError("the residue flow acts on x-space fields")
        if start is None:
            z0 = None
        else:
            z0 = resolve_onset(grid, u, start)
            if z0 is None:
                return u.with_data(np.zeros(grid.shape, dtype=complex))
        g_hat = fft_native(u.data).reshape(f_total, grid.N)
        g_hat = g_hat * rho_modes[:, None]
        far = _two_pole_columns(grid, g_hat, wp_far, wm_far, k2_far, z0)
        out = ifft_native(far.reshape(grid.shape), axes=tang)
        if rows.size:
            out_flat = out.reshape(s_total, grid.N)
            for lo in range(0, rows.size, _ROW_CHUNK):
                sl = slice(lo, lo + _ROW_CHUNK)
                block = _two_pole_columns(grid, g_hat, wp_in[sl], wm_in[sl],
                                          k2_in[sl], z0)
                block -= far[None, :, :]
                out_flat[rows[sl]] += np.einsum("rf,rfz->rz", e_in[sl], block)
        return u.with_data(out)

    return LinOp(apply_fn, label="P_s residue flow")


@dataclass(frozen=True)
class ParametrixBundle:
    """Frozen assembly of the two-regime parametrix over one flattening map.

    ``p_s`` is the interior quantization (the exact lattice symbol, split
    into core and tail); ``p_s_causal`` realizes the same operator through
    the causal residue flows and carries the one-sided support and trace
    properties.  ``omega`` is the sharp indicator of the flattened domain,
    ``cut_index`` the boundary-plane node, ``lap_flat`` the geometric
    conjugated Laplacian the parametrix inverts.  ``constants`` extends the
    factor-set record with the core/tail split radii.
    """

    fs: FactorSet
    j: LinOp
    q: LinOp
    j_plus: LinOp
    g_flat: LinOp
    p_l: LinOp
    p_s: LinOp
    p_s_causal: LinOp
    lap_flat: LinOp
    omega: np.ndarray
    cut_index: int
    constants: dict = field(default_factory=dict)


def default_domain_mask(grid: Grid, height: float | None = None,
                        halfwidth: float | None = None) -> np.ndarray:
    """Rectangular flattened domain: 0 <= x_n <= height, |x'_j| <= halfwidth.

    Defaults (height L/2, halfwidth 3L/4) keep at least L/4 of clearance to
    every box face, so windows and shears fit between the domain and the
    periodic seam.
    """
    if height is None:
        height = grid.L / 2.0
    if halfwidth is None:
        halfwidth = 3.0 * grid.L / 4.0
    mesh = grid.x_mesh()
    mask = (mesh[-1] >= 0.0) & (mesh[-1] <= height)
    for c in mesh[:-1]:
        mask = mask & (np.abs(c) <= halfwidth)
    return mask


def build_parametrix(grid: Grid, fmap: FlatteningMap,
                     omega: np.ndarray | None = None,
                     c: float | None = None,
                     c_prime: float | None = None) -> ParametrixBundle:
    """Assemble the parametrix bundle over one flattening map.

    ``omega`` is a boolean mask on the box (default the rectangular domain
    of ``default_domain_mask``); it must not dip below the boundary plane.
    Cutoff levels pass through to the factor set.
    """
    fs = build_factor_set(grid, fmap, c=c, c_prime=c_prime)
    cut = boundary_plane_index(grid)
    if omega is None:
        omega = default_domain_mask(grid)
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != grid.shape:
        raise ValueError(
            f"domain mask shape {omega.shape} does not match grid "
            f"{grid.shape}")
    if omega[..., :cut].any():
        raise ValueError("domain mask dips below the boundary plane")

    j = j_op(grid, fs)
    q = q_op(grid, fs)
    # The exterior inverse runs on the principal damping alone.  Folding
    # the order-zero corrector into the flow would make it exact against
    # the full factor, but the corrector is anti-dissipative on the
    # cutoff-transition columns and at working h it can defeat the
    # damping outright, turning the causal flow into exponential growth.
    # With the principal flow only, J+ J = 1 + O(h) and the defect lands
    # in the measured parametrix remainder, where it belongs.
    principal = HeatSymbol(damping=-1j * fs.a_plus, label="J+ flow")
    flow = half_space_inverse(grid, principal, cut)
    j_plus = LinOp(lambda u: 1j * flow(u), label="J+")
    g_flat = flat_g_phi(grid, fmap)
    outer_cut = quantize_tangential(
        grid, TangSymbol(lambda x, xi: 1.0 - np.asarray(fs.rho.fn(x, xi)),
                         label="1-rho"), label="Op(1-rho)")

    def p_l_fn(u: Field) -> Field:
        return outer_cut(j_plus(j(g_flat(u))))

    p_l = LinOp(p_l_fn, label="P_l")

    core, tail, radii = small_symbol_split(grid, fs)
    p_s = (quantize_full(grid, core, label="P_s core")
           + quantize_full(grid, tail, label="P_s tail"))
    p_s_causal = _residue_op(grid, fs)
    lap = flat_conjugated_laplacian(grid, fmap)

    constants = dict(fs.constants)
    constants["chi_radii"] = radii
    return ParametrixBundle(fs=fs, j=j, q=q, j_plus=j_plus, g_flat=g_flat,
                            p_l=p_l, p_s=p_s, p_s_causal=p_s_causal,
                            lap_flat=lap, omega=omega, cut_index=cut,
                            constants=constants)


def p_l_apply(pb: ParametrixBundle, v: Field) -> Field:
    """The exterior parametrix Op(1-rho) J+ J G_phi applied to v."""
    return pb.p_l(v)


def p_s_apply(pb: ParametrixBundle, v: Field) -> Field:
    """The interior parametrix Op(rho/p) applied to v (quantized form)."""
    return pb.p_s(v)


def p_s_residue_apply(pb: ParametrixBundle, v: Field, start="auto") -> Field:
    """The interior parametrix through its residue flows.

    With the default causal start the output is exactly zero at and below
    the onset plane of v.  With ``start=None`` the flows run in periodic
    steady mode and must reproduce the quantized form to rounding; the
    causal output differs from it by the onset transient, which at fixed N
    transports the lattice tail of the symbol and does not shrink with h.
    """
    if start == "auto":
        return pb.p_s_causal(v)
    return _residue_op(v.grid, pb.fs, start)(v)


def plane_trace(u: Field, index: int) -> float:
    """L2 norm of the restriction of u to the plane x_n = x_n[index]."""
    a = np.abs(u.data[..., index])
    return float(np.sqrt((a * a).sum()) * u.grid.dx ** ((u.grid.n - 1) / 2.0))


def parametrix_residual(pb: ParametrixBundle, v: Field
                        ) -> tuple[Field, NormReport]:
    """1_W h^2 Lap_phi (P_l + P_s) 1_W v - 1_W v, with its size report.

    The report value is the relative L2 size of the remainder against
    ||1_W v||; the rows also carry the relative boundary-plane trace of the
    parametrix output (label, in_norm, out_norm, ratio).
    """
    w = v.with_data(np.where(pb.omega, v.data, 0.0))
    nv = lr_norm(w, 2)
    if nv == 0.0:
        zero = v.with_data(np.zeros_like(w.data))
        return zero, NormReport(value=0.0, rows=[], label="parametrix rem")
    y = pb.p_l(w) + pb.p_s(w)
    lap = pb.lap_flat(y)
    rem = v.with_data(np.where(pb.omega, lap.data, 0.0) - w.data)
    rel = lr_norm(rem, 2) / nv
    tr = plane_trace(y, pb.cut_index) / nv
    rows = [("remainder", nv, lr_norm(rem, 2), rel),
            ("boundary trace", nv, plane_trace(y, pb.cut_index), tr)]
    return rem, NormReport(value=rel, rows=rows, label="parametrix rem")
