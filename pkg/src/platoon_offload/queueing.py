"""Task arrivals, per-slot bit flows, queue evolution, and energy accounting.

Queues hold real-valued bits. A slot first serves the backlog (offload plus
local computing), clamping at zero, then adds the bits that arrived during the
slot; received offloads therefore become servable work one slot later.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArrivalConfig",
    "ComputeParams",
    "QueueState",
    "SlotFlows",
    "generate_arrivals",
    "slot_flows",
    "update_queue",
    "slot_energy",
]


@dataclass(frozen=True)
class ArrivalConfig:
    """Poisson task arrivals with uniformly distributed sizes.

    Attributes:
        arrival_rate: mean tasks per slot (lambda).
        size_min: smallest task size in bits.
        size_max: largest task size in bits.
    """

    arrival_rate: float
    size_min: float
    size_max: float

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")
        if not 0 < self.size_min <= self.size_max:
            raise ValueError("need 0 < size_min <= size_max")


@dataclass(frozen=True)
class ComputeParams:
    """On-board processor model (identical across the fleet).

    Attributes:
        max_freq: maximum clock frequency f_m in cycles/s.
        cycles_per_bit: workload epsilon in CPU cycles per input bit.
        energy_coeff: coefficient xi such that xi * f^3 * tau is Joules.
    """

    max_freq: float
    cycles_per_bit: float
    energy_coeff: float

    def __post_init__(self):
        if min(self.max_freq, self.cycles_per_bit, self.energy_coeff) <= 0:
            raise ValueError("compute parameters must be positive")


@dataclass
class QueueState:
    """Per-vehicle backlog in bits at the start of a slot."""

    backlog: np.ndarray
    slot: int = 0

    def __post_init__(self):
        self.backlog = np.asarray(self.backlog, dtype=float)
        if np.any(self.backlog < 0):
            raise ValueError("backlog must be nonnegative")


@dataclass
class SlotFlows:
    """Bit flows of one slot, per vehicle.

    departures = offloaded_out + computed_locally;
    arrivals = received + generated.
    """

    offloaded_out: np.ndarray
    computed_locally: np.ndarray
    received: np.ndarray
    generated: np.ndarray

    @property
    def departures(self) -> np.ndarray:
        return self.offloaded_out + self.computed_locally

    @property
    def arrivals(self) -> np.ndarray:
        return self.received + self.generated


def generate_arrivals(
    cfg: ArrivalConfig, vehicle_count: int, rng: np.random.Generator
) -> np.ndarray:
    """Bits generated at each vehicle in one slot.

    Each vehicle draws a Poisson task count, then sums that many uniform task
    sizes. With sparse rates (e.g. one task per 30 slots) most entries are 0.
    """
    counts = rng.poisson(cfg.arrival_rate, vehicle_count)
    bits = np.zeros(vehicle_count)
    for k in np.flatnonzero(counts):
        bits[k] = rng.uniform(cfg.size_min, cfg.size_max, counts[k]).sum()
    return bits


def slot_flows(
    rates: np.ndarray,
    cpu_freq: np.ndarray,
    generated: np.ndarray,
    compute: ComputeParams,
    slot_duration: float,
) -> SlotFlows:
    """Assemble the slot's flows from scheduled rates and CPU frequencies.

    ``rates[k, n]`` is the scheduled offload rate from k to n in bits/s with a
    zero diagonal; every offloaded bit lands in exactly one receiver's queue.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates.diagonal() != 0.0):
        raise ValueError("self-link rates must be zero")
    offloaded = rates.sum(axis=1) * slot_duration
    received = rates.sum(axis=0) * slot_duration
    local = np.asarray(cpu_freq, dtype=float) / compute.cycles_per_bit * slot_duration
    return SlotFlows(
        offloaded_out=offloaded,
        computed_locally=local,
        received=received,
        generated=np.asarray(generated, dtype=float),
    )


def update_queue(state: QueueState, flows: SlotFlows) -> QueueState:
    """Q(t+1) = max(0, Q(t) - departures) + arrivals."""
    backlog = np.maximum(state.backlog - flows.departures, 0.0) + flows.arrivals
    return QueueState(backlog=backlog, slot=state.slot + 1)


def slot_energy(
    power: np.ndarray,
    cpu_freq: np.ndarray,
    compute: ComputeParams,
    slot_duration: float,
) -> tuple[np.ndarray, float]:
    """Per-vehicle energy sum(p) * tau + xi * f^3 * tau and the platoon total."""
    tx = np.asarray(power, dtype=float).sum(axis=1) * slot_duration
    local = compute.energy_coeff * np.asarray(cpu_freq, dtype=float) ** 3 * slot_duration
    per_vehicle = tx + local
    return per_vehicle, float(per_vehicle.sum())
