"""Drift-plus-penalty machinery for the per-slot scheduling problem.

The long-term energy problem is reduced to one slot by trading queue drift
against an energy penalty weighted by V. This module carries the pieces with
closed forms: the quadratic-drift upper bound (checked per realization), the
objective written both directly and regrouped into arrival/compute/comm terms,
the optimal CPU frequency, and the queue-ordering rules that zero out hopeless
links before the communication solver runs.
"""

from dataclasses import dataclass

import numpy as np

from .queueing import ComputeParams, SlotFlows, slot_energy, slot_flows

__all__ = [
    "Decision",
    "DriftPenaltyTerms",
    "optimal_cpu_freq",
    "prune_links",
    "drift_penalty_objective",
    "lyapunov_bound_check",
    "constraint_violation",
]


@dataclass
class Decision:
    """One slot's allocation: powers (K x K), bands, CPU frequencies (K).

    ``bandwidth`` is per sender (length K) for NOMA and local computing; the
    orthogonal baseline uses a per-pair K x K matrix instead. The bandwidth
    budget applies to the sum of all entries either way.
    """

    power: np.ndarray
    bandwidth: np.ndarray
    cpu_freq: np.ndarray

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        self.bandwidth = np.asarray(self.bandwidth, dtype=float)
        self.cpu_freq = np.asarray(self.cpu_freq, dtype=float)


@dataclass(frozen=True)
class DriftPenaltyTerms:
    """Slot objective O and its regrouped components.

    total = arrival_term + compute_term + comm_term, where the arrival term
    sum(Q * theta) does not depend on the decision.
    """

    total: float
    arrival_term: float
    compute_term: float
    comm_term: float
    weight: float


def optimal_cpu_freq(
    backlog, weight: float, energy_coeff: float, cycles_per_bit: float, max_freq: float
):
    """Closed-form minimizer of the compute term: min(sqrt(Q/(3 V xi eps)), f_m).

    Accepts a scalar or a vector of backlogs. An empty queue yields zero
    frequency; large backlogs clamp at the hardware maximum.
    """
    q = np.asarray(backlog, dtype=float)
    f = np.minimum(np.sqrt(q / (3.0 * weight * energy_coeff * cycles_per_bit)), max_freq)
    return float(f) if np.isscalar(backlog) else f


def prune_links(backlog: np.ndarray) -> np.ndarray:
    """Boolean K x K mask of links allowed to carry offload traffic.

    ``mask[k, n]`` is true iff Q_k > Q_n strictly and k != n: offloading to an
    equally or more loaded vehicle can never lower the slot objective, so such
    links are fixed to zero power. Senders whose row is all false get no band.
    """
    q = np.asarray(backlog, dtype=float)
    mask = q[:, None] > q[None, :]
    np.fill_diagonal(mask, False)
    return mask


def drift_penalty_objective(
    decision: Decision,
    backlog: np.ndarray,
    rates: np.ndarray,
    generated: np.ndarray,
    compute: ComputeParams,
    weight: float,
    slot_duration: float,
) -> DriftPenaltyTerms:
    """Evaluate the slot objective O two independent ways and cross-check.

    The direct form is sum_k Q_k (A_k - D_k) + V * E_total; the regrouped form
    splits into sum(Q * theta) plus a compute-only term and a comm-only term.
    Both are evaluated and must agree to 1e-9 relative to the term magnitudes.

    Raises:
        ArithmeticError: if the two evaluations disagree, which indicates an
            implementation inconsistency rather than a user error.
    """
    q = np.asarray(backlog, dtype=float)
    tau = slot_duration
    flows = slot_flows(rates, decision.cpu_freq, generated, compute, tau)
    _, e_total = slot_energy(decision.power, decision.cpu_freq, compute, tau)
    direct = float(q @ (flows.arrivals - flows.departures)) + weight * e_total

    arrival_term = float(q @ np.asarray(generated, dtype=float))
    f = decision.cpu_freq
    compute_term = float(
        np.sum(weight * compute.energy_coeff * f**3 * tau - q * f * tau / compute.cycles_per_bit)
    )
    diff = q[None, :] - q[:, None]
    comm_term = float(np.sum(diff * rates) * tau) + weight * tau * float(decision.power.sum())
    regrouped = arrival_term + compute_term + comm_term

    scale = (
        abs(arrival_term)
        + float(np.sum(np.abs(diff * rates))) * tau
        + weight * tau * float(decision.power.sum())
        + float(np.sum(np.abs(weight * compute.energy_coeff * f**3 * tau)))
        + float(np.sum(np.abs(q * f * tau / compute.cycles_per_bit)))
        + weight * e_total
        + 1e-300
    )
    if abs(direct - regrouped) > 1e-9 * max(abs(direct), abs(regrouped), scale):
        raise ArithmeticError(
            f"objective regrouping mismatch: direct={direct!r} regrouped={regrouped!r}"
        )
    return DriftPenaltyTerms(
        total=direct,
        arrival_term=arrival_term,
        compute_term=compute_term,
        comm_term=comm_term,
        weight=weight,
    )


def lyapunov_bound_check(
    backlog_t: np.ndarray,
    backlog_t1: np.ndarray,
    flows: SlotFlows,
    energy_total: float,
    weight: float,
) -> tuple[float, float]:
    """Per-realization quadratic drift bound for one slot.

    Returns (lhs, rhs) with
    lhs = 1/2 sum(Q(t+1)^2 - Q(t)^2) + V * E and
    rhs = 1/2 sum(D^2 + A^2) + sum Q (A - D) + V * E.
    lhs <= rhs always holds; equality requires the zero clamp to stay inactive
    and the departure/arrival cross terms to vanish.
    """
    q0 = np.asarray(backlog_t, dtype=float)
    q1 = np.asarray(backlog_t1, dtype=float)
    d = flows.departures
    a = flows.arrivals
    lhs = 0.5 * float(np.sum(q1**2 - q0**2)) + weight * energy_total
    rhs = (
        0.5 * float(np.sum(d**2 + a**2))
        + float(q0 @ (a - d))
        + weight * energy_total
    )
    return lhs, rhs


def constraint_violation(
    decision: Decision,
    max_tx_power: float,
    total_bandwidth: float,
    max_freq: float,
) -> float:
    """Largest relative violation of the power, band, and frequency caps.

    Returns 0.0 for a feasible decision; negativity and the zero diagonal are
    included in the audit.
    """
    p = decision.power
    viol = [
        (p.sum(axis=1).max() - max_tx_power) / max_tx_power,
        (decision.bandwidth.sum() - total_bandwidth) / total_bandwidth,
        (decision.cpu_freq.max() - max_freq) / max_freq,
        -p.min() / max_tx_power,
        -decision.bandwidth.min() / total_bandwidth,
        -decision.cpu_freq.min() / max_freq,
        abs(p.diagonal()).max() / max_tx_power if p.ndim == 2 else 0.0,
    ]
    return max(0.0, float(max(viol)))


def kkt_cpu_residual(
    backlog: float,
    weight: float,
    energy_coeff: float,
    cycles_per_bit: float,
    max_freq: float,
) -> float:
    """Stationarity residual |3 V xi f*^2 - Q/eps + lambda| at the optimum.

    The multiplier is zero on the interior branch and picks up the slack
    Q/eps - 3 V xi f_m^2 when the frequency cap binds.
    """
    f_star = optimal_cpu_freq(backlog, weight, energy_coeff, cycles_per_bit, max_freq)
    lam = max(0.0, backlog / cycles_per_bit - 3.0 * weight * energy_coeff * max_freq**2)
    return abs(3.0 * weight * energy_coeff * f_star**2 - backlog / cycles_per_bit + lam)
