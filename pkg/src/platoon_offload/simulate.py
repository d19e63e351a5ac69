"""Closed-loop slot simulation of the three offloading schemes.

Each slot samples an independent channel, prunes links by queue order, picks
CPU frequencies in closed form, solves the comm allocation (superposition or
per-pair orthogonal bands), then books flows, energy, and queue evolution.
One master seed splits into separate channel and arrival streams, so runs that
differ only in scheme face identical randomness and compare pairwise.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import backend as _backend
from .bsum import SolverConfig
from .channel import ChannelParams, PlatoonConfig, mean_gain_matrix
from .phy import RadioParams
from .queueing import ArrivalConfig, ComputeParams

__all__ = [
    "SchemeKind",
    "RunConfig",
    "RunResult",
    "SlotMetrics",
    "Summary",
    "default_config",
    "run",
    "oma_rate",
    "metrics_summary",
    "sweep",
    "SweepEntry",
]

_BATCH = 4096


class SchemeKind(str, Enum):
    NOMA = "noma"
    OMA = "oma"
    LOCAL = "local"


_SCHEME_CODE = {SchemeKind.LOCAL: 0, SchemeKind.NOMA: 1, SchemeKind.OMA: 2}


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation needs, in SI units."""

    platoon: PlatoonConfig
    channel: ChannelParams
    radio: RadioParams
    arrivals: ArrivalConfig
    compute: ComputeParams
    v_weight: float
    scheme: SchemeKind
    num_slots: int
    seed: int
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if self.v_weight < 0:
            raise ValueError("v_weight must be nonnegative")


def default_config(
    scheme: SchemeKind = SchemeKind.NOMA,
    velocity_kmh: float = 108.0,
    v_weight: float = 1e12,
    num_slots: int = 100_000,
    seed: int = 1,
    est_error_var: float = 1e-8,
    outage_threshold: float = 0.1,
) -> RunConfig:
    """Stock parameter set: 8 vehicles, 20 MHz, 35 dBm, 1 ms slots."""
    return RunConfig(
        platoon=PlatoonConfig(
            vehicle_count=8,
            velocity=velocity_kmh / 3.6,
            min_spacing=3.0,
            time_headway=1.5,
            max_speed=180.0 / 3.6,
            slot_duration=1e-3,
        ),
        channel=ChannelParams(
            pathloss_factor=10.0 ** (-31.5 / 10.0),
            pathloss_exponent=2.0,
            est_error_var=est_error_var,
        ),
        radio=RadioParams(
            noise_psd=10.0 ** ((-174.0 - 30.0) / 10.0),
            total_bandwidth=20e6,
            max_tx_power=10.0 ** ((35.0 - 30.0) / 10.0),
            outage_threshold=outage_threshold,
        ),
        arrivals=ArrivalConfig(arrival_rate=1.0 / 30.0, size_min=5e5, size_max=6e5),
        compute=ComputeParams(max_freq=1e9, cycles_per_bit=40.0, energy_coeff=1e-27),
        v_weight=v_weight,
        scheme=scheme,
        num_slots=num_slots,
        seed=seed,
    )


@dataclass(frozen=True)
class SlotMetrics:
    """One slot's record: start-of-slot queues plus what the slot consumed."""

    slot: int
    queue_bits: np.ndarray
    energy_j: np.ndarray
    energy_total_j: float
    objective: float
    solver_iters: int
    solver_converged: bool
    avg_queue_bits: float
    avg_energy_j: float


@dataclass
class RunResult:
    """Struct-of-arrays record of a simulation run."""

    config: RunConfig
    queue: np.ndarray           # (T, K) start-of-slot backlog
    energy: np.ndarray          # (T, K)
    energy_total: np.ndarray    # (T,)
    objective: np.ndarray       # (T,)
    comm_objective: np.ndarray  # (T,)
    solver_outer: np.ndarray    # (T,)
    solver_converged: np.ndarray
    solver_inner: np.ndarray
    final_queue: np.ndarray
    generated_total: float
    bound_gap_min: float        # min over slots of (rhs - lhs), >= 0 when the bound holds
    constraint_violation_max: float
    identity_err_max: float

    def __len__(self) -> int:
        return self.queue.shape[0]

    @property
    def avg_queue_bits(self) -> np.ndarray:
        """Running average over slots and vehicles, one value per slot."""
        t = np.arange(1, len(self) + 1)
        return np.cumsum(self.queue.mean(axis=1)) / t

    @property
    def avg_energy_j(self) -> np.ndarray:
        t = np.arange(1, len(self) + 1)
        return np.cumsum(self.energy.mean(axis=1)) / t

    @property
    def nonconverged_slots(self) -> int:
        return int((~self.solver_converged).sum())

    def __getitem__(self, t: int) -> SlotMetrics:
        if not -len(self) <= t < len(self):
            raise IndexError(t)
        t = t % len(self)
        return SlotMetrics(
            slot=t,
            queue_bits=self.queue[t],
            energy_j=self.energy[t],
            energy_total_j=float(self.energy_total[t]),
            objective=float(self.objective[t]),
            solver_iters=int(self.solver_outer[t]),
            solver_converged=bool(self.solver_converged[t]),
            avg_queue_bits=float(self.avg_queue_bits[t]),
            avg_energy_j=float(self.avg_energy_j[t]),
        )


def _arrival_batch(rng, cfg: ArrivalConfig, slots: int, k: int) -> np.ndarray:
    counts = rng.poisson(cfg.arrival_rate, (slots, k))
    total = int(counts.sum())
    if total == 0:
        return np.zeros((slots, k))
    sizes = rng.uniform(cfg.size_min, cfg.size_max, total)
    owner = np.repeat(np.arange(slots * k), counts.ravel())
    return np.bincount(owner, weights=sizes, minlength=slots * k).reshape(slots, k)


def run(cfg: RunConfig, backend: str | None = None) -> RunResult:
    """Simulate ``cfg.num_slots`` slots; deterministic given (config, seed)."""
    kern = _backend.get_backend(backend)
    k = cfg.platoon.vehicle_count
    t_total = cfg.num_slots
    scheme_code = _SCHEME_CODE[cfg.scheme]
    mean_gain = mean_gain_matrix(cfg.platoon, cfg.channel)
    c_sigma = math.log(1.0 / cfg.radio.outage_threshold) * cfg.channel.est_error_var

    ss = np.random.SeedSequence(cfg.seed)
    rng_channel, rng_arrivals = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(2))

    queue_hist = np.empty((t_total, k))
    energy_hist = np.empty((t_total, k))
    energy_total = np.empty(t_total)
    objective = np.empty(t_total)
    comm_objective = np.empty(t_total)
    solver_outer = np.zeros(t_total, dtype=np.int32)
    solver_conv = np.ones(t_total, dtype=bool)
    solver_inner = np.zeros(t_total, dtype=np.int32)

    q = np.zeros(k)
    generated_total = 0.0
    bound_gap_min = math.inf
    viol_max = 0.0
    ident_max = 0.0

    args = (
        c_sigma,
        cfg.radio.noise_psd,
        cfg.v_weight,
        cfg.platoon.slot_duration,
        cfg.radio.max_tx_power,
        cfg.radio.total_bandwidth,
        cfg.compute.max_freq,
        cfg.compute.energy_coeff,
        cfg.compute.cycles_per_bit,
        scheme_code,
        cfg.solver,
    )

    done = 0
    while done < t_total:
        b = min(_BATCH, t_total - done)
        z = rng_channel.standard_normal((b, k, k, 2))
        gains = mean_gain[None] * (0.5 * (z[..., 0] ** 2 + z[..., 1] ** 2))
        gains = np.ascontiguousarray(gains)
        gene = _arrival_batch(rng_arrivals, cfg.arrivals, b, k)
        for i in range(b):
            t = done + i
            (
                q_next, _f, _P, _w, _rates, e_k, e_tot, obj, o2,
                n_outer, conv, inner, lhs, rhs, viol, ident,
            ) = kern.slot_step(gains[i], q, gene[i], *args)
            queue_hist[t] = q
            energy_hist[t] = e_k
            energy_total[t] = e_tot
            objective[t] = obj
            comm_objective[t] = o2
            solver_outer[t] = n_outer
            solver_conv[t] = conv
            solver_inner[t] = inner
            gap = rhs - lhs
            if gap < bound_gap_min:
                bound_gap_min = gap
            if viol > viol_max:
                viol_max = viol
            if ident > ident_max:
                ident_max = ident
            q = np.asarray(q_next, dtype=float)
        generated_total += float(gene.sum())
        done += b

    return RunResult(
        config=cfg,
        queue=queue_hist,
        energy=energy_hist,
        energy_total=energy_total,
        objective=objective,
        comm_objective=comm_objective,
        solver_outer=solver_outer,
        solver_converged=solver_conv,
        solver_inner=solver_inner,
        final_queue=q,
        generated_total=generated_total,
        bound_gap_min=float(bound_gap_min),
        constraint_violation_max=float(viol_max),
        identity_err_max=float(ident_max),
    )


def oma_rate(
    p: float,
    w: float,
    est_gain_sq: float,
    est_error_var: float,
    outage_threshold: float,
    noise_psd: float,
) -> float:
    """Outage-robust rate of an isolated link on its own band (bits/s).

    With a private band the only residual impairment besides noise is the
    sender's own estimation-error penalty, so
    R = w * log2(1 + p * g / (w * N0 + ln(1/eta0) * sigma_h^2 * p)).
    """
    if outage_threshold <= 0.0:
        raise ValueError("outage_threshold must be positive")
    if w == 0.0 or p == 0.0:
        return 0.0
    den = w * noise_psd + math.log(1.0 / outage_threshold) * est_error_var * p
    return w * math.log2(1.0 + p * est_gain_sq / den)


@dataclass(frozen=True)
class Summary:
    """Aggregates over a whole run (per-vehicle per-slot averages)."""

    avg_queue_bits: float
    avg_energy_j: float
    weighted_metric: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray


def metrics_summary(result: RunResult, hist_bins: int = 80) -> Summary:
    """Run-level averages, the queue/energy trade-off metric, and a histogram.

    The trade-off metric is half the squared average queue plus V times the
    average energy; the histogram pools every per-vehicle per-slot backlog.
    """
    avg_q = float(result.queue.mean())
    avg_e = float(result.energy.mean())
    values = result.queue.ravel()
    hi = float(values.max())
    counts, edges = np.histogram(values, bins=hist_bins, range=(0.0, hi if hi > 0 else 1.0))
    return Summary(
        avg_queue_bits=avg_q,
        avg_energy_j=avg_e,
        weighted_metric=0.5 * avg_q**2 + result.config.v_weight * avg_e,
        hist_counts=counts,
        hist_edges=edges,
    )


@dataclass(frozen=True)
class SweepEntry:
    axis_value: float
    scheme: SchemeKind
    avg_queue_bits: float
    avg_energy_j: float
    weighted_metric: float
    seeds: int
    per_seed_queue: tuple
    per_seed_energy: tuple
    per_seed_metric: tuple


def _with_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "velocity":
        return replace(cfg, platoon=replace(cfg.platoon, velocity=value))
    if axis == "weight":
        return replace(cfg, v_weight=value)
    raise ValueError(f"unknown sweep axis {axis!r} (use 'velocity' or 'weight')")


def sweep(
    cfg: RunConfig,
    axis: str,
    points,
    schemes=(SchemeKind.NOMA, SchemeKind.OMA, SchemeKind.LOCAL),
    n_seeds: int = 5,
    backend: str | None = None,
) -> list[SweepEntry]:
    """Independent seeded runs per (point, scheme); reports seed means.

    Seeds are cfg.seed + j for j < n_seeds, shared across points and schemes
    so comparisons are paired.
    """
    entries = []
    for value in points:
        base = _with_axis(cfg, axis, value)
        for scheme in schemes:
            qs, es, ms = [], [], []
            for j in range(n_seeds):
                res = run(replace(base, scheme=scheme, seed=cfg.seed + j), backend=backend)
                summ = metrics_summary(res, hist_bins=10)
                qs.append(summ.avg_queue_bits)
                es.append(summ.avg_energy_j)
                ms.append(summ.weighted_metric)
            entries.append(
                SweepEntry(
                    axis_value=float(value),
                    scheme=scheme,
                    avg_queue_bits=float(np.mean(qs)),
                    avg_energy_j=float(np.mean(es)),
                    weighted_metric=float(np.mean(ms)),
                    seeds=n_seeds,
                    per_seed_queue=tuple(qs),
                    per_seed_energy=tuple(es),
                    per_seed_metric=tuple(ms),
                )
            )
    return entries


def harvest_slot_states(cfg: RunConfig, n_states: int, warm: int = 2500, backend: str | None = None):
    """Representative (gains, queue) pairs for solver-convergence studies.

    Runs a short warm simulation, keeps every queue snapshot with at least one
    allowed link, thins them evenly to ``n_states``, and pairs each with a
    fresh independent channel draw.
    """
    warm_cfg = replace(cfg, num_slots=warm)
    res = run(warm_cfg, backend=backend)
    busy = np.flatnonzero(res.queue.max(axis=1) > res.queue.min(axis=1))
    if busy.size < n_states:
        raise RuntimeError(
            f"warm-up produced only {busy.size} states with active links; "
            f"increase the warm-up length"
        )
    picks = busy[np.linspace(0, busy.size - 1, n_states).astype(int)]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(7,))))
    mean_gain = mean_gain_matrix(cfg.platoon, cfg.channel)
    k = cfg.platoon.vehicle_count
    states = []
    for t in picks:
        z = rng.standard_normal((k, k, 2))
        gains = mean_gain * (0.5 * (z[..., 0] ** 2 + z[..., 1] ** 2))
        states.append((np.ascontiguousarray(gains), res.queue[t].copy()))
    return states
