"""Network geometry, large-scale fading, and the normalized-SNR link budget.

The service area is a square with wrap-around (torus) distances.  Large-scale
fading follows a single-slope log-distance law with log-normal shadowing,

    beta_mk(dB) = -L - 10 * alpha * log10(d_mk) + z_mk,      d_mk in km,

with z_mk ~ Normal(0, shadow_std_db**2) i.i.d. per AP-UE link.  Normalized
SNRs are transmit power in watts divided by the thermal noise power
B * k_B * T0 * 10^(NF/10).
"""

from dataclasses import dataclass, fields

import numpy as np

from .units import BOLTZMANN, db_to_linear, dbm_to_watt


@dataclass
class SystemConfig:
    """Scenario constants. Defaults reproduce the reference urban setup."""

    num_aps: int = 100            # M, single-antenna APs
    num_ues: int = 40             # K, single-antenna users (K <= M)
    side_km: float = 1.0          # square side, wrap-around
    pathloss_ref_db: float = 140.72   # L, pathloss at 1 km reference
    pathloss_exp: float = 3.5
    shadow_std_db: float = 8.0    # sigma_sh
    min_distance_km: float = 0.01  # clamp: the log-distance law diverges at d -> 0
    bandwidth_hz: float = 20e6    # B
    noise_figure_db: float = 9.0
    noise_temp_k: float = 290.0   # T0
    ul_pilot_power_dbm: float = 23.0
    dl_data_power_dbm: float = 23.0
    dl_pilot_power_dbm: float = 23.0
    tau_c: int = 400              # coherence interval, symbols
    tau_p: int = 40               # uplink pilot length
    tau_b: int = 40               # downlink pilot length (>= K: no downlink contamination)
    carrier_ghz: float = 1.9      # informational only, nothing downstream uses it
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_aps < 1 or self.num_ues < 1:
            raise ValueError("num_aps and num_ues must be positive")
        if self.num_ues > self.num_aps:
            raise ValueError(f"need K <= M, got K={self.num_ues}, M={self.num_aps}")
        if self.side_km <= 0:
            raise ValueError("side_km must be positive")
        if self.min_distance_km <= 0:
            raise ValueError("min_distance_km must be positive")
        if self.bandwidth_hz <= 0 or self.noise_temp_k <= 0:
            raise ValueError("bandwidth and noise temperature must be positive")
        if min(self.tau_c, self.tau_p, self.tau_b) < 1:
            raise ValueError("tau_c, tau_p, tau_b must be positive integers")
        if self.tau_b < self.num_ues:
            raise ValueError(f"need tau_b >= K for contamination-free downlink training, "
                             f"got tau_b={self.tau_b}, K={self.num_ues}")
        if self.tau_p + self.tau_b >= self.tau_c:
            raise ValueError(f"need tau_p + tau_b < tau_c, got "
                             f"{self.tau_p} + {self.tau_b} >= {self.tau_c}")

    def rng(self):
        return np.random.default_rng(self.rng_seed)


@dataclass
class Layout:
    """AP and UE positions in [0, side_km)^2."""

    ap_positions: np.ndarray  # (M, 2) km
    ue_positions: np.ndarray  # (K, 2) km


@dataclass
class BetaMatrix:
    """Large-scale fading, linear scale, plus the shadowing realization in dB."""

    beta: np.ndarray       # (M, K), strictly positive, linear
    shadow_db: np.ndarray  # (M, K), z_mk in dB


@dataclass
class LinkBudget:
    """Noise power and the dimensionless normalized SNRs per transmit role."""

    noise_power_w: float
    rho_p: float  # uplink pilot
    rho_d: float  # downlink data
    rho_b: float  # downlink pilot


def load_config(path) -> SystemConfig:
    """Read a plain-text ``key = value`` config file; unset keys keep defaults.

    Lines that are blank or start with ``#`` are ignored.  Keys must match
    SystemConfig field names; values are parsed to the field's type.
    """
    field_types = {f.name: f.type for f in fields(SystemConfig)}
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in field_types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            kwargs[key] = int(value) if field_types[key] in ("int", int) else float(value)
    return SystemConfig(**kwargs)


def wrap_distance(p, q, side: float) -> float:
    """Torus distance between two points on the wrap-around square."""
    delta = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    delta = np.minimum(delta, side - delta)
    return float(np.hypot(delta[..., 0], delta[..., 1]))


def _wrap_distance_matrix(ap_positions, ue_positions, side):
    # (M, K) torus distances, vectorized over all AP-UE pairs
    delta = np.abs(ap_positions[:, None, :] - ue_positions[None, :, :])
    delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def draw_layout(config: SystemConfig, rng) -> Layout:
    """Place M APs and K UEs i.i.d. uniformly on the square."""
    ap = rng.uniform(0.0, config.side_km, size=(config.num_aps, 2))
    ue = rng.uniform(0.0, config.side_km, size=(config.num_ues, 2))
    return Layout(ap_positions=ap, ue_positions=ue)


def large_scale(layout: Layout, config: SystemConfig, rng) -> BetaMatrix:
    """Evaluate the log-distance pathloss with shadowing for every AP-UE pair.

    Distances below ``config.min_distance_km`` are clamped there: the model is
    not valid in the near field and diverges at d = 0.
    """
    d = _wrap_distance_matrix(layout.ap_positions, layout.ue_positions, config.side_km)
    d = np.maximum(d, config.min_distance_km)
    z = rng.normal(0.0, config.shadow_std_db, size=d.shape)
    beta_db = -config.pathloss_ref_db - 10.0 * config.pathloss_exp * np.log10(d) + z
    return BetaMatrix(beta=db_to_linear(beta_db), shadow_db=z)


def link_budget(config: SystemConfig) -> LinkBudget:
    """Noise power in watts and normalized SNRs for pilot/data/downlink-pilot power."""
    noise_w = (config.bandwidth_hz * BOLTZMANN * config.noise_temp_k
               * db_to_linear(config.noise_figure_db))
    return LinkBudget(
        noise_power_w=float(noise_w),
        rho_p=float(dbm_to_watt(config.ul_pilot_power_dbm) / noise_w),
        rho_d=float(dbm_to_watt(config.dl_data_power_dbm) / noise_w),
        rho_b=float(dbm_to_watt(config.dl_pilot_power_dbm) / noise_w),
    )
