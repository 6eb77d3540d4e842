"""Damped Richardson iteration shared by the operator-inversion paths.

Everything here works on Field-valued apply callables, so it is agnostic to
how the operator and preconditioner are realized (multiplier, quantized
symbol, composite pipeline).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field

__all__ = ["SolveResult", "ConvergenceError", "richardson_solve"]


class ConvergenceError(RuntimeError):
    """Iteration failed to reach tolerance; carries the residual history."""

    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass
class SolveResult:
    field: Field
    residuals: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def _l2(u: Field) -> float:
    return float(np.linalg.norm(u.data.ravel()))


def richardson_solve(apply_op, apply_precond, rhs: Field, tol: float = 1e-8,
                     max_iter: int = 200, raise_on_fail: bool = True,
                     label: str = "", headroom: float = 1.0) -> SolveResult:
    """Solve apply_op(w) = rhs by damped preconditioned Richardson iteration.

    The update is w <- w + alpha * precond(rhs - op(w)).  The step alpha
    starts at 1 and is halved whenever a step fails to reduce the residual
    (the defect operator's norm may exceed what a unit step tolerates at
    coarse h); it recovers geometrically after successful steps.  Residuals
    are recorded relative to ``rhs``.

    ``headroom`` relaxes the acceptance test: a step is kept whenever the
    new residual is below ``headroom * min(residuals so far)``.  The default
    1.0 insists on strict decrease.  Strongly non-normal defect operators
    (causal flows at coarse h) can amplify the residual for a few plain
    Neumann steps before the geometric decay takes over; a headroom of a
    few tens lets that transient pass instead of collapsing the step size.
    """
    rhs_norm = _l2(rhs)
    if rhs_norm == 0.0:
        return SolveResult(rhs.with_data(np.zeros_like(rhs.data)), [0.0], True)

    w = rhs.with_data(np.zeros_like(rhs.data))
    defect = rhs
    res = 1.0
    best = 1.0
    residuals = [res]
    alpha = 1.0
    alpha_min = 2.0**-6

    stalled = False
    for _ in range(max_iter):
        step = apply_precond(defect)
        while True:
            w_try = w + alpha * step
            defect_try = rhs - apply_op(w_try)
            res_try = _l2(defect_try) / rhs_norm
            if res_try < max(headroom * best, tol):
                break
            if alpha <= alpha_min:
                stalled = True
                break
            alpha *= 0.5
        if stalled:
            break
        best = min(best, res_try)
        w, defect, res = w_try, defect_try, res_try
        residuals.append(res)
        alpha = min(1.0, alpha * 1.25)
        if res <= tol:
            return SolveResult(w, residuals, True)

    if raise_on_fail:
        raise ConvergenceError(
            f"richardson{' (' + label + ')' if label else ''} stalled at "
            f"relative residual {res:.3e} after {max_iter} iterations "
            f"(tolerance {tol:.1e}); the semiclassical parameter may be too "
            f"large for this operator", residuals)
    return SolveResult(w, residuals, False)
