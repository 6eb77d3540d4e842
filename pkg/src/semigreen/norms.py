"""Quadrature L^r norms and semiclassical Sobolev norms on the box.

All norms are Riemann sums with the cell volume of the field's space (dx^n
for x-space, dxi^n for xi-space), so Parseval holds exactly for r = 2.
Sobolev norms apply the exact lattice multipliers <xi>^k (full bracket) and
<xi'>^k (tangential bracket, last axis excluded) before taking the L^r norm.
"""

from __future__ import annotations

import numpy as np

from .grid import Field, Grid, fft_native, ifft_native

__all__ = [
    "lr_norm",
    "sup_norm",
    "sobolev_norm",
    "mixed_norm",
    "inner",
    "bracket_full_native",
    "bracket_tang_native",
]


def _cell_volume(u: Field) -> float:
    g = u.grid
    step = g.dx if u.space == "x" else g.dxi
    return step**g.n


def lr_norm(u: Field, r: float, region: np.ndarray | None = None) -> float:
    """L^r norm by Riemann sum; ``region`` is an optional boolean mask."""
    if not r > 1.0:
        raise ValueError(f"r = {r} rejected; need r > 1")
    if not np.isfinite(r):
        raise ValueError("use sup_norm for r = inf")
    a = np.abs(u.data)
    if region is not None:
        a = a[region]
    return float((a**r).sum() ** (1.0 / r) * _cell_volume(u) ** (1.0 / r))


def sup_norm(u: Field, region: np.ndarray | None = None) -> float:
    a = np.abs(u.data)
    if region is not None:
        a = a[region]
    return float(a.max()) if a.size else 0.0


def inner(u: Field, v: Field) -> complex:
    """<u, v> = sum conj(u) v * cell volume (conjugation on the first slot)."""
    if u.space != v.space:
        raise ValueError("inner product needs both fields in the same space")
    return complex(np.vdot(u.data, v.data) * _cell_volume(u))


def bracket_full_native(grid: Grid) -> np.ndarray:
    """<xi> = sqrt(1 + |xi|^2) on the lattice, FFT-native order."""
    return np.sqrt(1.0 + grid.xi_abs2_native())


def bracket_tang_native(grid: Grid) -> np.ndarray:
    """<xi'> with xi' the first n-1 frequency axes, FFT-native order."""
    xs = grid.xi_mesh_native()
    out = np.ones(grid.shape)
    for a in xs[:-1]:
        out = out + a**2
    return np.sqrt(out)


def _apply_bracket(u: Field, mult: np.ndarray) -> Field:
    return Field(u.grid, ifft_native(mult * fft_native(u.data)), "x")


def sobolev_norm(u: Field, k: float, r: float,
                 region: np.ndarray | None = None) -> float:
    """|| <hD>^k u ||_{L^r}, exact lattice multiplier."""
    if u.space != "x":
        raise ValueError("sobolev_norm expects an x-space field")
    if k == 0:
        return lr_norm(u, r, region)
    w = _apply_bracket(u, bracket_full_native(u.grid) ** k)
    return lr_norm(w, r, region)


def mixed_norm(u: Field, k: float, l: float, r: float,
               region: np.ndarray | None = None) -> float:
    """|| <hD'>^k <hD>^l u ||_{L^r} with the tangential bracket on k."""
    if u.space != "x":
        raise ValueError("mixed_norm expects an x-space field")
    g = u.grid
    mult = bracket_tang_native(g) ** k if k != 0 else 1.0
    if l != 0:
        mult = mult * bracket_full_native(g) ** l
    if np.isscalar(mult):
        return lr_norm(u, r, region)
    return lr_norm(_apply_bracket(u, mult), r, region)
