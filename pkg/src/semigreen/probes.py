"""Probe families and probe-based norm/rate estimation.

Operator norms are *measured from below*: we evaluate out_norm(Au)/in_norm(u)
over a fixed, seeded probe family and take the maximum.  The family mixes
three kinds of probes so that each estimate is saturated by the right class:

* random band-limited fields (generic inputs),
* Gaussian bumps, both at fixed widths and at the h-scaled width 3h
  (the h-scaled bump saturates the L^{p'} -> L^p concentration rate),
* plane-wave packets modulated onto the characteristic sphere |xi'| = 1,
  xi_n = 0 (these saturate the 1/h amplification of the free Green's
  multiplier).

Everything is windowed by the standard margin taper, so probes are genuinely
compactly supported on the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, inverse_fourier_h, margin_window
from .linop import LinOp
from .norms import lr_norm

__all__ = [
    "NormReport",
    "ScalingReport",
    "band_limited_probe",
    "gaussian_bump_probe",
    "plane_packet_probe",
    "standard_probe_family",
    "tangential_band_probe",
    "op_norm_probe",
    "scaling_fit",
]


@dataclass
class NormReport:
    """Max probe ratio plus the per-probe table (id, in_norm, out_norm, ratio)."""

    value: float
    rows: list = field(default_factory=list)
    label: str = ""


@dataclass
class ScalingReport:
    """Least-squares slope of log(value) against log(h)."""

    slope: float
    residual: float
    intercept: float
    h_list: list = field(default_factory=list)
    values: list = field(default_factory=list)


def _normalize(g: Grid, data: np.ndarray) -> Field:
    u = Field(g, data.astype(complex), "x")
    nrm = lr_norm(u, 2)
    if nrm == 0:
        return u
    return Field(g, u.data / nrm, "x")


def band_limited_probe(grid: Grid, rng, band: float = 0.45) -> Field:
    """Random field with spectrum in |xi| <= band * xi_max, windowed."""
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    xi2 = np.zeros(grid.shape)
    ax1d = grid.xi1d  # ascending, matching the "xi" Field convention
    for axn in range(grid.n):
        shape = [1] * grid.n
        shape[axn] = grid.N
        xi2 = xi2 + (ax1d.reshape(shape)) ** 2
    spec = np.where(xi2 <= (band * grid.xi_max) ** 2, spec, 0.0)
    u = inverse_fourier_h(Field(grid, spec, "xi"))
    return _normalize(grid, u.data * margin_window(grid))


def gaussian_bump_probe(grid: Grid, width: float, center=None,
                        modulation=None) -> Field:
    """exp(-|x-c|^2 / (2 width^2)), optionally modulated by e^{i x.xi*/h}."""
    xs = grid.x_mesh()
    if center is None:
        center = (0.0,) * grid.n
    r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
    data = np.exp(-r2 / (2.0 * width**2)).astype(complex)
    if modulation is not None:
        phase = sum(x * m for x, m in zip(xs, modulation))
        data = data * np.exp(1j * phase / grid.h)
    return _normalize(grid, data * margin_window(grid))


def plane_packet_probe(grid: Grid, xi_star, width: float = 0.9) -> Field:
    """Gaussian envelope times the lattice-scale oscillation e^{i x.xi*/h}."""
    return gaussian_bump_probe(grid, width, modulation=xi_star)


def tangential_band_probe(grid: Grid, t_min: float = 0.0,
                          t_max: float = math.inf,
                          xi_n_cap: float = math.inf,
                          seed: int = 0) -> Field:
    """Random unit field with tangential spectrum in t_min <= |xi'|^2 <= t_max
    and |xi_n| <= xi_n_cap (semiclassical units).  Not windowed: the mask is
    spectral, and windowing would smear it."""
    rng = np.random.default_rng(seed)
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    kx = grid.xi1d_native
    t = np.zeros(grid.shape[:-1])
    for j in range(grid.n - 1):
        shape = [1] * (grid.n - 1)
        shape[j] = grid.N
        t = t + kx.reshape(shape) ** 2
    mask = ((t >= t_min) & (t <= t_max))[..., None] & (np.abs(kx) <= xi_n_cap)
    if not mask.any():
        raise ValueError(
            f"empty tangential band: no lattice modes with {t_min} <= |xi'|^2"
            f" <= {t_max}, |xi_n| <= {xi_n_cap} at dxi = {grid.dxi:.4f}")
    spec = np.where(mask, spec, 0.0)
    u = Field(grid, np.fft.ifftn(spec), "x")
    nrm = lr_norm(u, 2)
    return Field(grid, u.data / nrm, "x")


def _characteristic_points(n: int):
    if n == 2:
        return [(1.0, 0.0), (-1.0, 0.0)]
    s = 1.0 / math.sqrt(2.0)
    return [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (s, s, 0.0)]


def standard_probe_family(grid: Grid, count: int = 16, seed: int = 0,
                          kinds=("band", "bump", "packet"),
                          band: float = 0.45) -> list[Field]:
    """The default probe family: deterministic given (grid, count, seed)."""
    rng = np.random.default_rng(seed)
    probes: list[Field] = []
    if "band" in kinds:
        for _ in range(count):
            probes.append(band_limited_probe(grid, rng, band))
    if "bump" in kinds:
        for w in (0.6, 1.0):
            probes.append(gaussian_bump_probe(grid, w))
        w_h = max(3.0 * grid.h, 1.5 * grid.dx)  # keep the bump resolvable
        probes.append(gaussian_bump_probe(grid, w_h))
    if "packet" in kinds:
        for xi_star in _characteristic_points(grid.n):
            probes.append(plane_packet_probe(grid, xi_star))
        generic = (0.41, 0.23, 0.17)[: grid.n - 1] + (0.29,)
        probes.append(plane_packet_probe(grid, generic))
    return probes


def op_norm_probe(A: LinOp, in_norm, out_norm, probes) -> NormReport:
    """max over probes of out_norm(A u) / in_norm(u); zero-norm probes skipped."""
    if not probes:
        raise ValueError("probe family is empty")
    rows = []
    best = 0.0
    for i, u in enumerate(probes):
        nin = in_norm(u)
        if nin <= 0.0 or not np.isfinite(nin):
            continue
        nout = out_norm(A(u))
        ratio = nout / nin
        rows.append((i, nin, nout, ratio))
        best = max(best, ratio)
    if not rows:
        raise ValueError("all probes had zero input norm")
    return NormReport(value=best, rows=rows)


def scaling_fit(h_list, values) -> ScalingReport:
    """Least-squares slope of log(value) vs log(h); needs >= 4 points."""
    h = np.asarray(h_list, dtype=float)
    v = np.asarray(values, dtype=float)
    if h.size < 4:
        raise ValueError(f"scaling fit needs >= 4 points, got {h.size}")
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        raise ValueError("scaling fit needs positive finite values")
    X = np.stack([np.log(h), np.ones_like(h)], axis=1)
    y = np.log(v)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return ScalingReport(slope=float(coef[0]), residual=resid,
                         intercept=float(coef[1]),
                         h_list=list(map(float, h)), values=list(map(float, v)))
