"""Platoon geometry and per-slot Rayleigh channel sampling.

Vehicles drive in a single lane at constant speed with equal spacing given by
the intelligent-driver-model equilibrium. Channel gains between vehicles are
block fading: constant within a slot, independent across slots and links, with
an additive complex-Gaussian estimation error of variance ``est_error_var``.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PlatoonConfig",
    "ChannelParams",
    "ChannelRealization",
    "idm_spacing",
    "distance_matrix",
    "mean_gain_matrix",
    "sample_channel",
]


@dataclass(frozen=True)
class PlatoonConfig:
    """Geometry and kinematics of the platoon.

    Attributes:
        vehicle_count: number of vehicles K (>= 2).
        velocity: driving speed in m/s, 0 <= v < max_speed.
        min_spacing: minimum intra-platoon spacing d0 in meters.
        time_headway: desired time headway t0 in seconds.
        max_speed: maximum speed vm in m/s.
        slot_duration: slot length tau in seconds.
    """

    vehicle_count: int
    velocity: float
    min_spacing: float
    time_headway: float
    max_speed: float
    slot_duration: float

    def __post_init__(self):
        if self.vehicle_count < 2:
            raise ValueError(f"vehicle_count must be >= 2, got {self.vehicle_count}")
        if not 0.0 <= self.velocity < self.max_speed:
            raise ValueError(
                f"velocity must satisfy 0 <= v < max_speed "
                f"({self.velocity} vs max {self.max_speed})"
            )
        if self.min_spacing <= 0:
            raise ValueError("min_spacing must be positive")
        if self.time_headway <= 0:
            raise ValueError("time_headway must be positive")
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be positive")


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale pathloss and estimation-error statistics.

    Attributes:
        pathloss_factor: linear power gain G at 1 m (dimensionless).
        pathloss_exponent: pathloss exponent phi.
        est_error_var: variance sigma_h^2 of the complex channel estimation
            error (linear power units).
    """

    pathloss_factor: float
    pathloss_exponent: float
    est_error_var: float

    def __post_init__(self):
        if self.pathloss_factor <= 0:
            raise ValueError("pathloss_factor must be positive")
        if self.pathloss_exponent < 0:
            raise ValueError("pathloss_exponent must be nonnegative")
        if self.est_error_var < 0:
            raise ValueError("est_error_var must be nonnegative")


@dataclass(frozen=True)
class ChannelRealization:
    """One slot's estimated channel power gains.

    ``est_gain_sq[k, n]`` is |h_kn|^2 for the link from sender k to receiver n.
    Diagonal entries are zero and must never be read (self-links carry no
    traffic). ``distances[k, n]`` is |k - n| times the equilibrium spacing.
    """

    est_gain_sq: np.ndarray
    distances: np.ndarray
    slot_index: int


def idm_spacing(cfg: PlatoonConfig) -> float:
    """Equilibrium spacing (d0 + v*t0) / sqrt(1 - (v/vm)^4) in meters.

    Strictly increasing in v on [0, vm); diverges as v approaches vm.

    Raises:
        ValueError: if v >= vm (the denominator is not real-positive).
    """
    ratio = cfg.velocity / cfg.max_speed
    denom_sq = 1.0 - ratio**4
    if denom_sq <= 0.0:
        raise ValueError(
            f"velocity {cfg.velocity} m/s must stay below max_speed "
            f"{cfg.max_speed} m/s"
        )
    return (cfg.min_spacing + cfg.velocity * cfg.time_headway) / np.sqrt(denom_sq)


def distance_matrix(cfg: PlatoonConfig) -> np.ndarray:
    """K x K matrix of link distances d_kn = |k - n| * d_v."""
    idx = np.arange(cfg.vehicle_count)
    return np.abs(idx[:, None] - idx[None, :]) * idm_spacing(cfg)


def mean_gain_matrix(cfg: PlatoonConfig, params: ChannelParams) -> np.ndarray:
    """Expected estimated power gain G * d_kn^(-phi) per link, zero diagonal."""
    d = distance_matrix(cfg)
    gains = np.zeros_like(d)
    off = ~np.eye(cfg.vehicle_count, dtype=bool)
    gains[off] = params.pathloss_factor * d[off] ** (-params.pathloss_exponent)
    return gains


def sample_channel(
    cfg: PlatoonConfig,
    params: ChannelParams,
    rng: np.random.Generator,
    slot_index: int = 0,
) -> ChannelRealization:
    """Draw one slot's estimated channel gains.

    |h_kn|^2 = G * d_kn^(-phi) * |g_kn|^2 with g_kn complex Gaussian of zero
    mean and unit variance, independent across ordered pairs. Repeated calls
    on one generator produce independent slots.
    """
    k = cfg.vehicle_count
    z = rng.standard_normal((k, k, 2))
    fading = 0.5 * (z[..., 0] ** 2 + z[..., 1] ** 2)
    np.fill_diagonal(fading, 0.0)
    est_gain_sq = mean_gain_matrix(cfg, params) * fading
    return ChannelRealization(
        est_gain_sq=est_gain_sq,
        distances=distance_matrix(cfg),
        slot_index=slot_index,
    )
