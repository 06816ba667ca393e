"""Small-scale fading, uplink pilot transmission, and MMSE channel estimation.

True channels are g_mk = sqrt(beta_mk) * h_mk with h_mk i.i.d. circularly
symmetric complex normal, unit variance.  Each AP correlates its received
pilot block with each user's pilot sequence and forms the MMSE estimate

    g_hat_mk = sqrt(tau_p rho_p) beta_mk
               / (tau_p rho_p sum_i beta_mi |phi_k^H phi_i|^2 + 1) * phi_k^H y_m,

whose variance gamma_mk has the same denominator with beta_mk^2 on top.  The
estimation error is uncorrelated with the estimate, so its variance is exactly
delta_mk = beta_mk - gamma_mk.  With fewer pilots than users, co-pilot users
contaminate each other through the |phi_k^H phi_i|^2 = 1 terms.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class PilotBook:
    """An orthonormal pilot base plus the per-user assignment into it."""

    base: np.ndarray        # (tau_p, tau_p) complex, orthonormal columns, unit norm
    assignment: np.ndarray  # (K,) indices into base columns

    @property
    def tau_p(self) -> int:
        return self.base.shape[0]

    def sequences(self) -> np.ndarray:
        """(tau_p, K) matrix whose k-th column is user k's pilot."""
        return self.base[:, self.assignment]

    def gram(self) -> np.ndarray:
        """(K, K) matrix of |phi_k^H phi_i|^2; exactly {0, 1} for this construction."""
        seq = self.sequences()
        return np.abs(seq.conj().T @ seq) ** 2


@dataclass
class ChannelState:
    """True channels, MMSE estimates, and their second-order statistics."""

    g_hat: np.ndarray  # (M, K) complex estimates
    gamma: np.ndarray  # (M, K) Var(g_hat)
    delta: np.ndarray  # (M, K) estimation-error variance, beta - gamma
    g: np.ndarray | None = None  # (M, K) true channels, attached by the caller


@dataclass
class UplinkPilotRx:
    """Received pilot blocks, one length-tau_p row per AP."""

    y: np.ndarray  # (M, tau_p) complex


def make_pilot_book(tau_p: int, num_ues: int, rng) -> PilotBook:
    """Unit-norm DFT base; random assignment, with replacement only when forced.

    When tau_p >= K every user gets a distinct column (no contamination); when
    tau_p < K indices are drawn uniformly with replacement.
    """
    n = np.arange(tau_p)
    base = np.exp(-2j * np.pi * np.outer(n, n) / tau_p) / np.sqrt(tau_p)
    if tau_p >= num_ues:
        assignment = rng.permutation(tau_p)[:num_ues]
    else:
        assignment = rng.integers(0, tau_p, size=num_ues)
    return PilotBook(base=base, assignment=assignment)


def draw_small_scale(num_aps: int, num_ues: int, rng) -> np.ndarray:
    """(M, K) i.i.d. unit-variance circularly symmetric complex normal entries."""
    shape = (num_aps, num_ues)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def uplink_pilot_receive(g, pilots: PilotBook, rho_p: float, tau_p: int, rng,
                         noise_scale: float = 1.0) -> UplinkPilotRx:
    """Superimpose all users' pilots at each AP and add unit-variance noise.

    y_m = sqrt(tau_p rho_p) sum_k g_mk phi_k + n_m.  ``noise_scale=0`` is a
    test hook for the noiseless channel-sounding limit.
    """
    num_aps = g.shape[0]
    seq = pilots.sequences()  # (tau_p, K)
    y = np.sqrt(tau_p * rho_p) * (g @ seq.T)
    if noise_scale != 0.0:
        noise = (rng.standard_normal((num_aps, tau_p))
                 + 1j * rng.standard_normal((num_aps, tau_p))) / np.sqrt(2.0)
        y = y + noise_scale * noise
    return UplinkPilotRx(y=y)


def mmse_estimate(rx: UplinkPilotRx, pilots: PilotBook, beta, rho_p: float,
                  tau_p: int, g=None) -> ChannelState:
    """MMSE-estimate every AP-UE channel from the received pilot blocks.

    Pass ``g`` to carry the true channels through to the returned state; the
    estimator itself never looks at them.
    """
    beta = np.asarray(beta, dtype=float)
    seq = pilots.sequences()
    gram = pilots.gram()  # |phi_k^H phi_i|^2
    # denom[m, k] = tau_p rho_p sum_i beta_mi |phi_k^H phi_i|^2 + 1  (>= 1 always)
    denom = tau_p * rho_p * (beta @ gram.T) + 1.0
    projected = rx.y @ seq.conj()  # (M, K), phi_k^H y_m
    g_hat = np.sqrt(tau_p * rho_p) * beta / denom * projected
    gamma = tau_p * rho_p * beta**2 / denom
    return ChannelState(g_hat=g_hat, gamma=gamma, delta=beta - gamma, g=g)


def dump_channel_stats(beta, gamma, delta, path) -> None:
    """Debug dump of the (beta, gamma, delta) matrices to one CSV."""
    with open(path, "w") as fh:
        fh.write("ap,ue,beta,gamma,delta\n")
        num_aps, num_ues = np.asarray(beta).shape
        for m in range(num_aps):
            for k in range(num_ues):
                fh.write(f"{m},{k},{beta[m, k]:.9g},{gamma[m, k]:.9g},{delta[m, k]:.9g}\n")
