"""Downlink evaluation: effective channels, beamformed training, UE throughput.

The UE never sees g or W individually, only the scalar effective channels
a_ki = sum_m g_mk w_mi.  A short beamformed pilot phase gives it a noisy
estimate of its own a_kk; decoding quality is then scored by the instantaneous
SINR built from that estimate, the realized cross gains, and the analytic
estimation error variance.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class EffectiveChannel:
    a: np.ndarray  # (K, K) complex, a[k, i] = sum_m g_mk w_mi


@dataclass
class DownlinkEstimate:
    a_hat_kk: np.ndarray  # (K,) complex LS estimates of the diagonal
    error_var: float      # 1/(tau_b rho_b)


@dataclass
class UePerf:
    gamma_ue: np.ndarray        # (K,)
    throughput_bps: np.ndarray  # (K,)


def effective_channels(g, w) -> EffectiveChannel:
    """Combine true channels and precoder into the K x K effective channel."""
    if g.shape != w.shape:
        raise ValueError(f"shape mismatch: g {g.shape} vs w {w.shape}")
    return EffectiveChannel(a=g.T @ w)


def downlink_train(a: EffectiveChannel, tau_b: int, rho_b: float,
                   rng: np.random.Generator) -> DownlinkEstimate:
    """Least-squares estimate of each a_kk from orthogonal beamformed pilots.

    With tau_b >= K the pilots are mutually orthogonal, so cross-user terms
    cancel exactly and the estimate reduces to a_kk plus projected noise of
    variance 1/(tau_b rho_b).
    """
    num_ues = a.a.shape[0]
    if tau_b < num_ues:
        raise ValueError(f"tau_b={tau_b} < K={num_ues} breaks pilot orthogonality")
    error_var = 1.0 / (tau_b * rho_b)
    noise = (rng.standard_normal(num_ues) + 1j * rng.standard_normal(num_ues)) \
        * np.sqrt(error_var / 2.0)
    return DownlinkEstimate(a_hat_kk=np.diagonal(a.a) + noise, error_var=error_var)


def ue_sinr(estimate: DownlinkEstimate, a: EffectiveChannel, rho_d: float) -> np.ndarray:
    """Instantaneous UE-side SINR from the estimated own gain.

    gamma_k = |a_hat_kk|^2 / (error_var + sum_{i!=k} |a_ki|^2 + 1/rho_d);
    interference uses the realized cross gains of this coherence interval.
    """
    num_ues = a.a.shape[0]
    if estimate.a_hat_kk.shape != (num_ues,):
        raise ValueError("estimate/effective-channel size mismatch")
    power = np.abs(a.a) ** 2
    interference = power.sum(axis=1) - np.diagonal(power)
    return np.abs(estimate.a_hat_kk) ** 2 / (
        estimate.error_var + interference + 1.0 / rho_d)


def net_throughput(gamma_ue, bandwidth_hz: float, tau_p: int, tau_b: int,
                   tau_c: int) -> np.ndarray:
    """Per-user net rate: half-duplex split and pilot overhead scale the log rate."""
    if tau_p + tau_b >= tau_c:
        raise ValueError(f"pilot overhead tau_p+tau_b={tau_p + tau_b} >= tau_c={tau_c}")
    prefactor = 0.5 * bandwidth_hz * (1.0 - (tau_p + tau_b) / tau_c)
    return prefactor * np.log2(1.0 + np.asarray(gamma_ue, dtype=float))
