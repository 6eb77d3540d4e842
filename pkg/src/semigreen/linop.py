"""Matrix-free linear operators on fields, with composition and adjoints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import Field, Grid, fft_native, ifft_native
from .norms import inner, lr_norm

__all__ = [
    "LinOp",
    "identity",
    "multiplier",
    "diagonal",
    "check_linearity",
    "check_adjoint",
]


@dataclass(frozen=True)
class LinOp:
    """A linear map on fields given by its action (and optionally its adjoint).

    Compose with ``@``, add with ``+``/``-``, scale with ``*``.  Adjoints
    propagate through the algebra whenever both operands carry one.
    """

    apply_fn: Callable[[Field], Field]
    adjoint_fn: Optional[Callable[[Field], Field]] = None
    label: str = ""

    def __call__(self, u: Field) -> Field:
        return self.apply_fn(u)

    apply = __call__

    @property
    def has_adjoint(self) -> bool:
        return self.adjoint_fn is not None

    def adjoint_apply(self, u: Field) -> Field:
        if self.adjoint_fn is None:
            raise ValueError(f"operator {self.label!r} has no adjoint")
        return self.adjoint_fn(u)

    def adjoint(self) -> "LinOp":
        if self.adjoint_fn is None:
            raise ValueError(f"operator {self.label!r} has no adjoint")
        return LinOp(self.adjoint_fn, self.apply_fn, f"({self.label})*")

    def __matmul__(self, other: "LinOp") -> "LinOp":
        adj = None
        if self.adjoint_fn is not None and other.adjoint_fn is not None:
            adj = lambda u: other.adjoint_fn(self.adjoint_fn(u))
        return LinOp(lambda u: self(other(u)), adj, f"{self.label}∘{other.label}")

    def __add__(self, other: "LinOp") -> "LinOp":
        adj = None
        if self.adjoint_fn is not None and other.adjoint_fn is not None:
            adj = lambda u: self.adjoint_fn(u) + other.adjoint_fn(u)
        return LinOp(lambda u: self(u) + other(u), adj, f"{self.label}+{other.label}")

    def __sub__(self, other: "LinOp") -> "LinOp":
        return self + (-1.0) * other

    def __rmul__(self, c) -> "LinOp":
        adj = None
        if self.adjoint_fn is not None:
            adj = lambda u: np.conj(c) * self.adjoint_fn(u)
        return LinOp(lambda u: c * self(u), adj, f"{c}*{self.label}")

    __mul__ = __rmul__


def identity(label: str = "I") -> LinOp:
    return LinOp(lambda u: u, lambda u: u, label)


def multiplier(grid: Grid, m, label: str = "mult") -> LinOp:
    """Fourier multiplier.  ``m`` is an array in FFT-native xi order, or a
    callable evaluated on the native frequency meshes."""
    if callable(m):
        m = m(*grid.xi_mesh_native())
    m = np.asarray(m, dtype=complex)
    mc = np.conj(m)

    def ap(u: Field) -> Field:
        return Field(u.grid, ifft_native(m * fft_native(u.data)), u.space)

    def adj(u: Field) -> Field:
        return Field(u.grid, ifft_native(mc * fft_native(u.data)), u.space)

    return LinOp(ap, adj, label)


def diagonal(values: np.ndarray, label: str = "diag") -> LinOp:
    """Pointwise multiplication by a fixed array (e.g. an indicator)."""
    vc = np.conj(values)
    return LinOp(
        lambda u: Field(u.grid, values * u.data, u.space),
        lambda u: Field(u.grid, vc * u.data, u.space),
        label,
    )


def _random_field(grid: Grid, rng) -> Field:
    a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, a, "x")


def check_linearity(A: LinOp, grid: Grid, seed: int = 0) -> float:
    """Relative defect of A(au + bv) - aAu - bAv on one random probe pair."""
    rng = np.random.default_rng(seed)
    u, v = _random_field(grid, rng), _random_field(grid, rng)
    a = complex(rng.standard_normal() + 1j * rng.standard_normal())
    b = complex(rng.standard_normal() + 1j * rng.standard_normal())
    lhs = A(a * u + b * v)
    rhs = a * A(u) + b * A(v)
    denom = lr_norm(lhs, 2) + lr_norm(rhs, 2)
    if denom == 0:
        return 0.0
    return lr_norm(lhs - rhs, 2) / denom


def check_adjoint(A: LinOp, grid: Grid, seed: int = 0) -> float:
    """Relative defect of <Au, v> - <u, A*v> on one random probe pair."""
    rng = np.random.default_rng(seed)
    u, v = _random_field(grid, rng), _random_field(grid, rng)
    lhs = inner(A(u), v)
    rhs = inner(u, A.adjoint_apply(v))
    scale = lr_norm(A(u), 2) * lr_norm(v, 2) + abs(lhs)
    if scale == 0:
        return 0.0
    return abs(lhs - rhs) / scale
