"""NOMA link layer: SINR under imperfect CSI, rates, and the outage oracle.

A sender superposes signals to several receivers on its own band. Each
receiver cancels the signals aimed at strictly weaker estimated channels and
treats stronger-channel signals as interference. The scheduled ("robust") rate
is the largest rate whose outage probability equals the configured threshold;
the Monte Carlo oracle re-derives that probability from first principles and
is used only in tests.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RadioParams",
    "LinkAllocation",
    "sic_indicator",
    "sinr",
    "achievable_rate",
    "robust_rate",
    "outage_oracle",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RadioParams:
    """Shared radio constants.

    Attributes:
        noise_psd: noise power spectral density N0 in W/Hz.
        total_bandwidth: system bandwidth W0 in Hz.
        max_tx_power: per-vehicle transmit power budget P0 in W.
        outage_threshold: tolerable outage probability eta0 in (0, 1].
    """

    noise_psd: float
    total_bandwidth: float
    max_tx_power: float
    outage_threshold: float

    def __post_init__(self):
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be positive")
        if self.total_bandwidth <= 0:
            raise ValueError("total_bandwidth must be positive")
        if self.max_tx_power <= 0:
            raise ValueError("max_tx_power must be positive")
        if not 0.0 < self.outage_threshold <= 1.0:
            raise ValueError("outage_threshold must lie in (0, 1]")


@dataclass
class LinkAllocation:
    """Transmit powers and band of one sender.

    ``power[n]`` is the power aimed at receiver n (W); the sender's own entry
    must be zero. ``bandwidth`` is the sender's band in Hz.
    """

    power: np.ndarray
    bandwidth: float
    sender: int

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        if self.power.ndim != 1:
            raise ValueError("power must be a vector")
        if np.any(self.power < 0):
            raise ValueError("powers must be nonnegative")
        if self.power[self.sender] != 0.0:
            raise ValueError("self-link power must be zero")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be nonnegative")


def sic_indicator(est_gain_sq_row: np.ndarray, n: int, i: int) -> int:
    """1 if receiver n treats the signal for i as interference, else 0.

    Signals aimed at strictly stronger estimated channels survive SIC; ties
    resolve to 0 (cancelled) so behaviour is deterministic across platforms.
    """
    if i == n:
        raise ValueError("indicator is undefined for i == n")
    return int(est_gain_sq_row[i] > est_gain_sq_row[n])


def _interference(power: np.ndarray, est_gain_sq_row: np.ndarray, n: int) -> float:
    gain_n = est_gain_sq_row[n]
    stronger = est_gain_sq_row > gain_n
    stronger[n] = False
    return gain_n * float(power[stronger].sum())


def sinr(
    alloc: LinkAllocation,
    est_gain_sq_row: np.ndarray,
    err_gain_sq: float,
    params: RadioParams,
    n: int,
) -> float:
    """SINR at receiver n for one realized estimation-error power.

    Gamma = p_n |h_n|^2 / (|h_n|^2 * sum_{i != n} p_i * 1[|h_i|^2 > |h_n|^2]
    + err_gain_sq * sum_i p_i + w * N0).
    """
    denom = (
        _interference(alloc.power, est_gain_sq_row, n)
        + err_gain_sq * float(alloc.power.sum())
        + alloc.bandwidth * params.noise_psd
    )
    if denom <= 0.0:
        raise ValueError("SINR undefined: zero bandwidth and zero power")
    return float(alloc.power[n]) * float(est_gain_sq_row[n]) / denom


def achievable_rate(
    alloc: LinkAllocation,
    est_gain_sq_row: np.ndarray,
    err_gain_sq: float,
    params: RadioParams,
    n: int,
) -> float:
    """Instantaneous rate w * log2(1 + Gamma) in bits/s."""
    gamma = sinr(alloc, est_gain_sq_row, err_gain_sq, params, n)
    return alloc.bandwidth * math.log2(1.0 + gamma)


def robust_rate(
    alloc: LinkAllocation,
    est_gain_sq_row: np.ndarray,
    params: RadioParams,
    est_error_var: float,
    n: int,
) -> float:
    """Largest scheduled rate whose outage probability equals eta0.

    R = w * log2(1 + p_n |h_n|^2 / (H + ln(1/eta0) * sigma_h^2 * sum_i p_i))
    with H the SIC interference plus w * N0. Zero bandwidth or zero target
    power gives exactly zero.
    """
    if params.outage_threshold <= 0.0:
        raise ValueError("outage_threshold must be positive")
    if alloc.bandwidth == 0.0 or alloc.power[n] == 0.0:
        return 0.0
    penalty = math.log(1.0 / params.outage_threshold) * est_error_var
    denom = (
        _interference(alloc.power, est_gain_sq_row, n)
        + alloc.bandwidth * params.noise_psd
        + penalty * float(alloc.power.sum())
    )
    return alloc.bandwidth * math.log2(
        1.0 + float(alloc.power[n]) * float(est_gain_sq_row[n]) / denom
    )


def outage_oracle(
    alloc: LinkAllocation,
    est_gain_sq_row: np.ndarray,
    params: RadioParams,
    est_error_var: float,
    n: int,
    draws: int,
    rng: np.random.Generator,
) -> float:
    """Empirical Pr{achievable rate <= robust rate} over sampled errors.

    Draws the estimation error as complex Gaussian of variance
    ``est_error_var`` (so its power is exponential) and evaluates the
    achievable rate through the SINR expression; it never reuses the
    closed-form rate it is checking. Ties count as outage.
    """
    if draws < 10_000:
        raise ValueError("use at least 10^4 draws for a meaningful estimate")
    scheduled = robust_rate(alloc, est_gain_sq_row, params, est_error_var, n)
    err = rng.standard_normal((draws, 2))
    err_gain_sq = 0.5 * est_error_var * (err[:, 0] ** 2 + err[:, 1] ** 2)
    base = (
        _interference(alloc.power, est_gain_sq_row, n)
        + alloc.bandwidth * params.noise_psd
    )
    denom = base + err_gain_sq * float(alloc.power.sum())
    gamma = float(alloc.power[n]) * float(est_gain_sq_row[n]) / denom
    achieved = alloc.bandwidth * np.log2(1.0 + gamma)
    return float(np.mean(achieved <= scheduled))
