"""Matrix-free conjugate gradients for the projected guiding-operator system.

The reconstruction solves (I - S) L u = (I - S) L x0 for a correction u that
lives in the kernel of the sampling projector S.  Starting CG from zero keeps
every iterate inside that kernel: the right-hand side and every operator
output have exact zeros at the retained pixels, so the retained coordinates of
u never receive a nonzero update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import LinearOperator, Vector, dot, norm2
from .guidance import GuidingOperator, apply_L
from .sampling import SamplingOperator

BREAKDOWN_NONE = "none"
BREAKDOWN_INDEFINITE = "indefinite"
BREAKDOWN_STAGNATION = "stagnation"

# recomputed vs recurrence residual may disagree at most this much (relative to |b|)
# before the run is flagged as stagnated
_HONESTY_TOL = 1e-8
# a search direction is "indefinite beyond roundoff" below -this * |p| * |Ap|
_INDEFINITE_SLACK = 1e-14


@dataclass(frozen=True)
class CgControls:
    max_iter: int = 100
    rel_tol: float = 1e-8
    record_history: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


@dataclass
class CgReport:
    """Outcome of a CG run.

    ``final_rel_residual`` is recomputed from the returned iterate with one
    extra operator application, never taken from the recurrence.
    """

    iterations_used: int
    final_rel_residual: float
    converged: bool
    breakdown_flag: str = BREAKDOWN_NONE
    residual_history: Optional[list[float]] = None


def cg_solve(
    op: LinearOperator,
    b: Vector,
    ctl: CgControls,
    iterate_callback: Optional[Callable[[int, Vector, float], None]] = None,
) -> tuple[Vector, CgReport]:
    """Plain CG from the zero vector on a symmetric PSD operator.

    Stops at the first of ``rel_tol`` (recurrence residual) or ``max_iter``.
    A direction with p^T A p <= 0 beyond roundoff flags an indefinite
    breakdown and returns the best iterate so far.  ``iterate_callback``
    receives (iteration, current iterate, recurrence relative residual) after
    every update, for confinement checks and residual logging.
    """
    b = np.asarray(b, dtype=np.float64)
    history: Optional[list[float]] = [] if ctl.record_history else None
    norm_b = norm2(b)
    if norm_b == 0.0:
        return np.zeros_like(b), CgReport(
            iterations_used=0,
            final_rel_residual=0.0,
            converged=True,
            residual_history=history,
        )

    u = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs_old = dot(r, r)
    breakdown = BREAKDOWN_NONE
    iterations = 0
    rel_recurrence = 1.0

    for k in range(1, ctl.max_iter + 1):
        ap = op(p)
        p_ap = dot(p, ap)
        if p_ap <= 0.0:
            if p_ap < -_INDEFINITE_SLACK * norm2(p) * norm2(ap):
                breakdown = BREAKDOWN_INDEFINITE
            break
        alpha = rs_old / p_ap
        u = u + alpha * p
        r = r - alpha * ap
        rs_new = dot(r, r)
        rel_recurrence = float(np.sqrt(rs_new)) / norm_b
        iterations = k
        if history is not None:
            history.append(rel_recurrence)
        if iterate_callback is not None:
            iterate_callback(k, u, rel_recurrence)
        if rel_recurrence < ctl.rel_tol:
            break
        p = r + (rs_new / rs_old) * p
        rs_old = rs_new

    true_rel = norm2(b - op(u)) / norm_b
    if breakdown == BREAKDOWN_NONE and abs(true_rel - rel_recurrence) > _HONESTY_TOL:
        breakdown = BREAKDOWN_STAGNATION
    return u, CgReport(
        iterations_used=iterations,
        final_rel_residual=true_rel,
        converged=true_rel < ctl.rel_tol,
        breakdown_flag=breakdown,
        residual_history=history,
    )


def projected_operator(sampling: SamplingOperator, guiding: GuidingOperator) -> LinearOperator:
    """The reconstruction system operator u -> (I - S) L u.

    Flagged symmetric: on Null(S), where CG confines its iterates, it agrees
    with the symmetric positive-semidefinite restriction (I - S) L (I - S).
    The retained-pixel outputs are zeroed by assignment, so iterates keep
    exact zeros there.
    """
    if sampling.hr_size != guiding.n:
        raise ValueError(
            f"grid mismatch: sampling acts on {sampling.hr_size} pixels, "
            f"guiding operator on {guiding.n}"
        )
    selected = sampling.selected_indices

    def apply(x: Vector) -> Vector:
        out = apply_L(guiding, x)
        out[selected] = 0.0
        return out

    return LinearOperator(dim_in=guiding.n, dim_out=guiding.n, symmetric=True, apply=apply)
