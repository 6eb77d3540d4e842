"""Free-space conjugated Laplacian and its exact multiplier inverse.

The conjugated operator e^{-x_n/h} h^2 Lap e^{x_n/h} is, on the periodic
lattice, the exact Fourier multiplier

    sigma(xi) = 1 + 2i xi_n - |xi|^2,

so its inverse is the reciprocal multiplier wherever sigma does not vanish.
sigma vanishes only on the characteristic sphere {xi_n = 0, |xi'| = 1}; a
lattice point landing there (or within reciprocal-guard distance) is a
configuration error, fixed by perturbing h or the box size L -- see
``select_detuned_box`` for the deterministic choice used by sweep configs.

Axis convention (package-wide): the distinguished direction x_n is the LAST
axis; x_1 is axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, apply_multiplier_native, smoothstep7
from .linop import LinOp, multiplier

__all__ = [
    "conjugated_symbol",
    "conjugated_laplacian",
    "adjoint_conjugated_laplacian",
    "g_phi_multiplier",
    "g_phi_apply",
    "g_phi_op",
    "g_phi_split",
    "SplitReport",
    "g_phi_shifted_check",
    "ShiftCheckReport",
    "select_detuned_box",
    "characteristic_clearance",
]

# |multiplier| beyond this means a lattice point effectively hit the
# characteristic sphere.
_GUARD = 1e12


def conjugated_symbol(grid: Grid, sign: float = 1.0) -> np.ndarray:
    """Lattice symbol 1 + sign*2i xi_n - |xi|^2 in native order.

    ``sign=+1`` is the conjugation by the growing exponential in x_n (the
    direction the Green's function inverts); ``sign=-1`` is the adjoint
    conjugation.
    """
    xin = grid.xi1d_native.reshape((1,) * (grid.n - 1) + (grid.N,))
    return 1.0 + sign * 2j * xin - grid.xi_abs2_native()


def conjugated_laplacian(grid: Grid) -> LinOp:
    """The multiplier operator with symbol 1 + 2i xi_n - |xi|^2."""
    return multiplier(grid, conjugated_symbol(grid, +1.0),
                      label="conjugated Laplacian")


def adjoint_conjugated_laplacian(grid: Grid) -> LinOp:
    """The adjoint conjugation, symbol 1 - 2i xi_n - |xi|^2."""
    return multiplier(grid, conjugated_symbol(grid, -1.0),
                      label="adjoint conjugated Laplacian")


def g_phi_multiplier(grid: Grid) -> np.ndarray:
    """Reciprocal symbol 1/(1 + 2i xi_n - |xi|^2), guarded.

    Raises ValueError when a lattice point sits on (or numerically at) the
    characteristic sphere, with the fix spelled out.
    """
    sym = conjugated_symbol(grid, +1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        recip = 1.0 / sym
    worst = float(np.abs(recip).max())
    if not np.isfinite(worst) or worst > _GUARD:
        k = np.unravel_index(int(np.abs(recip).argmax()), grid.shape)
        raise ValueError(
            "characteristic lattice hit: |1/(1+2i xi_n-|xi|^2)| = "
            f"{worst:.3e} at lattice index {k}; perturb h or the box size L "
            "(see select_detuned_box) so no lattice point lands on "
            "{xi_n = 0, |xi'| = 1}")
    return recip


def g_phi_op(grid: Grid) -> LinOp:
    """The free Green's operator: exact lattice inverse of the conjugation."""
    return multiplier(grid, g_phi_multiplier(grid), label="G_phi")


def g_phi_apply(grid: Grid, u: Field) -> Field:
    return u.with_data(apply_multiplier_native(grid, g_phi_multiplier(grid),
                                               u.data))


# ---------------------------------------------------------------------------
# characteristic splitting


@dataclass(frozen=True)
class SplitReport:
    inner_radius: float
    outer_radius: float
    rescaled: bool


def g_phi_split(grid: Grid, inner_radius: float = 2.0,
                outer_radius: float = 3.0):
    """Split G_phi into a band-limited part and a smooth remainder.

    Returns (G_band, G_smooth, report): G_band carries the reciprocal symbol
    times a radial cutoff (1 on |xi| <= inner_radius, vanishing beyond
    outer_radius) and holds all the characteristic-sphere behaviour; G_smooth
    carries the complement, whose symbol is bounded like <xi>^-2.  The two
    sum to G_phi exactly.

    On lattices too small to host the default radii both are scaled down
    proportionally (recorded in the report); scaling that would push the
    inner radius onto the characteristic sphere raises instead.
    """
    rescaled = False
    if grid.xi_max < 1.05 * outer_radius:
        scale = grid.xi_max / (1.05 * outer_radius)
        inner_radius *= scale
        outer_radius *= scale
        rescaled = True
        if inner_radius < 1.4:
            raise ValueError(
                f"lattice cap xi_max = {grid.xi_max:.3g} cannot host a "
                "characteristic split: the rescaled inner radius "
                f"{inner_radius:.3g} sits too close to the unit sphere")
    recip = g_phi_multiplier(grid)
    r = np.sqrt(grid.xi_abs2_native())
    chi = smoothstep7((outer_radius - r) / (outer_radius - inner_radius))
    report = SplitReport(inner_radius, outer_radius, rescaled)
    return (multiplier(grid, recip * chi, label="G_phi band part"),
            multiplier(grid, recip * (1.0 - chi), label="G_phi smooth part"),
            report)


# ---------------------------------------------------------------------------
# Fourier-shift identity check


@dataclass(frozen=True)
class ShiftCheckReport:
    aligned: bool
    shift_nodes: int
    max_rel_discrepancy: float | None
    masked_modes: int
    note: str


def g_phi_shifted_check(grid: Grid, seed: int = 0,
                        probes: int = 4) -> ShiftCheckReport:
    """Verify that a unit shift of xi_1 equals conjugation by e^{i x_1/h}.

    The identity is exact on the lattice only when the unit frequency is a
    whole number of lattice spacings (1/dxi integral); otherwise the check is
    skipped with a diagnostic.

    An aligned lattice necessarily contains unit tangential frequencies, i.e.
    points on the characteristic sphere where the reciprocal symbol blows up.
    Both sides of the identity act mode-diagonally, so those modes are masked
    out of the reciprocal table (their count is reported) and the identity is
    verified exactly on the complement.
    """
    steps = 1.0 / grid.dxi
    k = int(round(steps))
    if abs(steps - k) > 1e-9 or k == 0:
        return ShiftCheckReport(False, 0, None, 0,
                                f"unit frequency is {steps:.6g} lattice "
                                "spacings; shift identity only exact on "
                                "aligned grids -- skipped")
    sym = conjugated_symbol(grid, +1.0)
    singular = np.abs(sym) < 1.0 / _GUARD
    recip = np.where(singular, 0.0, 1.0 / np.where(singular, 1.0, sym))
    masked = int(singular.sum())
    # shifting the symbol argument xi -> xi + e_1 walks the stored table k
    # nodes backwards along the x_1 frequency axis (axis 0)
    shifted = np.roll(recip, -k, axis=0)

    axes_shape = [1] * grid.n
    axes_shape[0] = grid.N
    phase = np.exp(1j * grid.x1d / grid.h).reshape(axes_shape)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        u = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        lhs = apply_multiplier_native(grid, shifted, u)
        rhs = np.conj(phase) * apply_multiplier_native(grid, recip, phase * u)
        worst = max(worst, float(np.linalg.norm((lhs - rhs).ravel())
                                 / np.linalg.norm(lhs.ravel())))
    return ShiftCheckReport(True, k, worst, masked,
                            "aligned; characteristic modes masked identically "
                            "on both sides")


# ---------------------------------------------------------------------------
# characteristic-sphere detuning


def characteristic_clearance(N: int, L: float, h: float) -> float:
    """Minimum lattice distance to {xi_n=0, |xi'|=1} in units of the spacing.

    Measured as min |1 - |xi'|^2| / (2 dxi) over the tangential lattice,
    which approximates the radial distance to the unit sphere near it.
    """
    dxi = h * np.pi / L
    k = dxi * (np.arange(N) - N // 2)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    gap = np.abs(1.0 - (k1**2 + k2**2)).min()
    return float(gap / (2.0 * dxi))


def select_detuned_box(h_list, N: int, base_L: float = np.pi,
                       stretch: float = 1.05, samples: int = 201):
    """Pick a box half-size L in [base_L, stretch*base_L] clearing the sphere.

    Deterministic: scans a fixed sample of L values and maximizes the worst
    characteristic clearance over the h sweep.  Returns (L, clearance).
    """
    best_L, best_gap = base_L, -1.0
    for L in np.linspace(base_L, stretch * base_L, samples):
        gap = min(characteristic_clearance(N, L, h) for h in h_list)
        if gap > best_gap:
            best_L, best_gap = float(L), float(gap)
    return best_L, best_gap
