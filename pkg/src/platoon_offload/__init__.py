"""NOMA cooperative computation-offloading simulator for vehicular platoons.

Per-slot pipeline: sample the channel, prune links by queue order, pick CPU
frequencies in closed form, solve the comm allocation by block descent, then
account rates, energy, and queue evolution. Three schemes are supported:
superposition offloading (noma), orthogonal per-pair bands (oma), and local
computing only.
"""

from .backend import active_name, available_backends
from .channel import ChannelParams, ChannelRealization, PlatoonConfig, idm_spacing, sample_channel
from .phy import LinkAllocation, RadioParams, achievable_rate, outage_oracle, robust_rate, sinr
from .queueing import (
    ArrivalConfig,
    ComputeParams,
    QueueState,
    SlotFlows,
    generate_arrivals,
    slot_energy,
    slot_flows,
    update_queue,
)
from .lyapunov import (
    Decision,
    DriftPenaltyTerms,
    drift_penalty_objective,
    lyapunov_bound_check,
    optimal_cpu_freq,
    prune_links,
)
from .bsum import BsumResult, CommContext, SolverConfig, bsum, project_box_capped_simplex
from .simulate import RunConfig, SchemeKind, SlotMetrics, metrics_summary, oma_rate, run, sweep

__version__ = "0.1.0"
