"""Block successive upper-bound minimization for the comm allocation.

The per-slot comm objective couples a sender's powers through interference and
an estimation-error penalty, and couples senders through the shared band
budget. For fixed bands the objective splits into a convex part plus a concave
part in each sender's power row; linearizing the concave part gives a convex
surrogate whose block minimizers never increase the true objective. Cycling
sender power blocks and then the band split (convex on its own) drives the
objective down monotonically until the relative change falls below
``delta0``.

The numerical work happens in a backend kernel (compiled when available, see
``platoon_offload.backend``); this module owns the public types and the
feasibility contracts.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backend as _backend
from .lyapunov import prune_links

__all__ = [
    "SolverConfig",
    "CommContext",
    "BsumResult",
    "PowerSurrogate",
    "project_box_capped_simplex",
    "dc_split_eval",
    "linearize_power_block",
    "solve_power_subproblem",
    "solve_bandwidth_subproblem",
    "even_split_init",
    "bsum",
]


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and inner-solver knobs.

    Attributes:
        delta0: relative objective-change stopping tolerance of the outer loop.
        max_outer: outer iteration cap; hitting it flags non-convergence.
        max_inner: projected-gradient iteration cap per block.
        max_backtracks: step halvings allowed per projected-gradient step.
        step_tol: inner stop when the step falls below step_tol * budget.
        step_growth: step expansion factor after an accepted iteration.
        w_floor: band floor (Hz) keeping logs finite while iterating; released
            for senders that end up with no transmit power.
        feas_tol: relative slack allowed in feasibility audits.
    """

    delta0: float = 1e-3
    max_outer: int = 60
    max_inner: int = 150
    max_backtracks: int = 40
    step_tol: float = 1e-6
    step_growth: float = 1.4
    w_floor: float = 1.0
    feas_tol: float = 1e-9

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if min(self.max_outer, self.max_inner, self.max_backtracks) <= 0:
            raise ValueError("iteration caps must be positive")


@dataclass
class CommContext:
    """Frozen slot state the comm solver works against.

    ``mask[k, n]`` marks links allowed to carry traffic (sender queue strictly
    longer); everything else is pinned to zero. ``c_sigma`` is
    ln(1/eta0) * sigma_h^2, the outage-robustness penalty per Watt.
    """

    gain: np.ndarray
    queue: np.ndarray
    mask: np.ndarray
    c_sigma: float
    noise_psd: float
    v_weight: float
    tau: float
    p_cap: float
    w_cap: float
    oma: bool = False

    @classmethod
    def from_state(cls, gain, queue, radio, est_error_var, v_weight, tau, oma=False):
        """Build from a channel realization, queues, and radio parameters."""
        gain = np.asarray(gain, dtype=float)
        queue = np.asarray(queue, dtype=float)
        return cls(
            gain=gain,
            queue=queue,
            mask=prune_links(queue),
            c_sigma=float(np.log(1.0 / radio.outage_threshold) * est_error_var),
            noise_psd=radio.noise_psd,
            v_weight=v_weight,
            tau=tau,
            p_cap=radio.max_tx_power,
            w_cap=radio.total_bandwidth,
            oma=oma,
        )

    def bandwidth_shape(self) -> tuple:
        k = self.gain.shape[0]
        return (k, k) if self.oma else (k,)


@dataclass
class BsumResult:
    power: np.ndarray
    bandwidth: np.ndarray
    trace: np.ndarray
    outer_iters: int
    converged: bool
    inner_iters: int

    @property
    def objective(self) -> float:
        return float(self.trace[-1])


@dataclass
class PowerSurrogate:
    """Convex block surrogate g_k around an expansion point.

    ``value(p_row)`` equals the full convex part at the expansion point (the
    linear correction vanishes there) and upper-bounds the comm objective's
    block restriction up to the constant concave part at the expansion point.
    """

    sender: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def _kernel(backend_name):
    return _backend.get_backend(backend_name)


def project_box_capped_simplex(x, cap: float, backend: str | None = None) -> np.ndarray:
    """Euclidean projection of x onto {y >= 0, sum(y) <= cap}."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    return _kernel(backend).project_capped_simplex(np.asarray(x, dtype=float), cap)


def dc_split_eval(ctx: CommContext, P, w, backend: str | None = None):
    """(F+, F-, O2) with F+ convex, F- concave per power block, F+ + F- = O2."""
    kern = _kernel(backend)
    fplus, fminus = kern.dc_parts(np.asarray(P, float), np.asarray(w, float), ctx)
    return fplus, fminus, kern.o2_value(np.asarray(P, float), np.asarray(w, float), ctx)


def linearize_power_block(
    ctx: CommContext, k: int, P_ref, w_ref, backend: str | None = None
) -> PowerSurrogate:
    """Surrogate for sender k's power row around (P_ref, w_ref)."""
    kern = _kernel(backend)
    P_ref = np.asarray(P_ref, dtype=float)
    w_ref = np.asarray(w_ref, dtype=float)
    fplus_all, _ = kern.dc_parts(P_ref, w_ref, ctx)
    local_ref, _ = kern.power_surrogate_eval(k, P_ref[k], P_ref, w_ref, ctx)
    const = fplus_all - local_ref

    def value(p_row) -> float:
        v, _ = kern.power_surrogate_eval(k, np.asarray(p_row, float), P_ref, w_ref, ctx)
        return v + const

    def grad(p_row) -> np.ndarray:
        _, g = kern.power_surrogate_eval(k, np.asarray(p_row, float), P_ref, w_ref, ctx)
        return g

    return PowerSurrogate(sender=k, value=value, grad=grad)


def solve_power_subproblem(
    ctx: CommContext,
    k: int,
    P_ref,
    w_ref,
    cfg: SolverConfig = SolverConfig(),
    backend: str | None = None,
):
    """Minimize sender k's surrogate over {p >= 0, p_kk = 0, sum <= P0}."""
    row, iters, converged = _kernel(backend).solve_power_block(
        k, np.asarray(P_ref, float), np.asarray(w_ref, float), ctx, cfg
    )
    return row, {"inner_iters": iters, "converged": converged}


def solve_bandwidth_subproblem(
    ctx: CommContext,
    P_ref,
    w_ref,
    cfg: SolverConfig = SolverConfig(),
    backend: str | None = None,
):
    """Minimize O2(P_ref, .) over {w >= 0, sum(w) <= W0}."""
    w, iters, converged = _kernel(backend).solve_bandwidth_block(
        np.asarray(P_ref, float), np.asarray(w_ref, float), ctx, cfg
    )
    return w, {"inner_iters": iters, "converged": converged}


def even_split_init(ctx: CommContext, backend: str | None = None):
    """The standard feasible start: budgets spread evenly over allowed links."""
    return _kernel(backend).even_split_init(ctx)


def bsum(
    ctx: CommContext,
    cfg: SolverConfig = SolverConfig(),
    P_init=None,
    w_init=None,
    backend: str | None = None,
) -> BsumResult:
    """Run the block descent from a feasible point (even split by default)."""
    P, w, trace, n_outer, converged, inner = _kernel(backend).bsum_solve(
        ctx, cfg, P_init, w_init
    )
    return BsumResult(
        power=P,
        bandwidth=w,
        trace=trace,
        outer_iters=n_outer,
        converged=converged,
        inner_iters=inner,
    )


def robust_rates(ctx: CommContext, P, w, backend: str | None = None) -> np.ndarray:
    """Scheduled rate matrix for a feasible allocation (bits/s)."""
    return _kernel(backend).rates_matrix(np.asarray(P, float), np.asarray(w, float), ctx)
