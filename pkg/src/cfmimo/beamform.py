"""Downlink precoder design against the CU-side SINR.

The CU computes, from uplink estimates g_hat and error variances delta, the
per-user SINR

    gamma_k = |g_hat_k' w_k|^2 /
              ( sum_{i!=k} |g_hat_k' w_i|^2
                + sum_m sum_i delta_mk |w_mi|^2 + 1/rho_d ),

with ' the plain (unconjugated) transpose, and designs W to maximize
min_k gamma_k under per-AP power sum_k |w_mk|^2 <= 1.  For a candidate floor
gamma0 the constraint set {min_k gamma_k >= gamma0} is a second-order cone
once each g_hat_k' w_k is rotated real-nonnegative, so the max-min optimum is
found by bisection over cone feasibility.  Zero-forcing and conjugate
beamforming fix the column directions and run the same bisection over their
nonnegative scale parameters, so all three schemes are scored by the same
SINR expression and solved by the same kernel.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .conic import (FEASIBLE, NUMERICAL_FAILURE, SocBlock, SocProgram,
                    solve_feasibility)

DEFAULT_BISECT_TOL = 1e-3
DEFAULT_FEAS_TOL = 1e-7
MAX_BISECT_STEPS = 200


class ZfRankError(RuntimeError):
    """Estimated channel matrix is column-rank deficient; caller should resample."""


class BisectionError(RuntimeError):
    """Bisection bracket could not be initialized."""


@dataclass
class Precoder:
    w: np.ndarray             # (M, K) complex beamforming matrix
    per_ap_power: np.ndarray  # (M,) row power sum_k |w_mk|^2


@dataclass
class CuSinrReport:
    gamma: np.ndarray   # (K,)
    min_gamma: float
    # diagnostics: the three SINR building blocks per user
    ds: np.ndarray = None
    mui: np.ndarray = None
    cee: np.ndarray = None


@dataclass
class BisectLog:
    iterations: list = field(default_factory=list)  # [(gamma_candidate, status)]
    gamma_star: float = 0.0
    gamma_hi: float = 0.0
    w: np.ndarray = None
    num_failures: int = 0        # candidates written off after solver breakdown
    solver_iterations: int = 0   # summed interior-point iterations


def cu_sinr(g_hat, delta, w, rho_d: float) -> CuSinrReport:
    """Evaluate the CU-side SINR of every user for a given precoder."""
    cross = g_hat.T @ w                      # cross[k, i] = g_hat_k' w_i
    ds = np.abs(np.diagonal(cross)) ** 2
    mui = np.sum(np.abs(cross) ** 2, axis=1) - ds
    row_power = np.sum(np.abs(w) ** 2, axis=1)
    cee = row_power @ delta                  # sum_m delta_mk sum_i |w_mi|^2
    gamma = ds / (mui + cee + 1.0 / rho_d)
    return CuSinrReport(gamma=gamma, min_gamma=float(gamma.min()),
                        ds=ds, mui=mui, cee=cee)


def phase_align(g_hat_k, w_k):
    """Rotate w_k so g_hat_k' w_k lands on the nonnegative real axis."""
    inner = complex(np.dot(g_hat_k, w_k))
    if inner == 0:
        return np.array(w_k, copy=True)
    return w_k * np.exp(-1j * np.angle(inner))


def sinr_upper_bound(g_hat, rho_d: float) -> float:
    """Interference-free full-power SINR cap: valid for any per-AP feasible W."""
    return float(rho_d * np.max(np.sum(np.abs(g_hat), axis=0)) ** 2)


def _w_to_x(w):
    # variable layout: x[2*(i*M + m)] = Re w_mi, x[2*(i*M + m) + 1] = Im w_mi
    stacked = np.stack([w.T.real, w.T.imag], axis=-1)  # (K, M, 2)
    return stacked.reshape(-1)


def _x_to_w(x, num_aps, num_ues):
    z = x.reshape(num_ues, num_aps, 2)
    return (z[..., 0] + 1j * z[..., 1]).T


def build_feasibility(g_hat, delta, rho_d: float, gamma0: float) -> SocProgram:
    """Cone program over the 2MK real parts of W that encodes min_k SINR >= gamma0.

    Variable layout: x[2*(i*M + m)] = Re w_mi, x[2*(i*M + m) + 1] = Im w_mi.
    Per user k one SOC block (MUI rows, estimation-error rows, one noise row)
    bounded by g_hat_k' w_k / sqrt(gamma0), one equality pinning its imaginary
    part to zero, and per AP one power cone of its row entries.
    """
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    num_aps, num_ues = g_hat.shape
    n = 2 * num_aps * num_ues
    sqrt_delta = np.sqrt(np.maximum(delta, 0.0))
    m_idx = np.arange(num_aps)
    program = SocProgram(num_vars=n)

    for k in range(num_ues):
        re_k, im_k = g_hat[:, k].real, g_hat[:, k].imag
        rows, cols, vals = [], [], []
        r = 0
        for i in range(num_ues):
            if i == k:
                continue
            re_cols = 2 * (i * num_aps + m_idx)
            # Re(g_hat_k' w_i) then Im(g_hat_k' w_i)
            rows.append(np.full(2 * num_aps, r))
            cols.append(np.concatenate([re_cols, re_cols + 1]))
            vals.append(np.concatenate([re_k, -im_k]))
            rows.append(np.full(2 * num_aps, r + 1))
            cols.append(np.concatenate([re_cols, re_cols + 1]))
            vals.append(np.concatenate([im_k, re_k]))
            r += 2
        # estimation-error rows sqrt(delta_mk) * w_mi, one per real component
        cee_cols = np.arange(n)
        rows.append(r + cee_cols)
        cols.append(cee_cols)
        vals.append(np.repeat(np.tile(sqrt_delta[:, k], num_ues), 2))
        r += n
        r += 1  # constant noise row, zero A row with b = 1/sqrt(rho_d)
        a_mat = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(r, n)).tocsr()
        b = np.zeros(r)
        b[-1] = 1.0 / np.sqrt(rho_d)
        c = np.zeros(n)
        own_cols = 2 * (k * num_aps + m_idx)
        c[own_cols] = re_k / np.sqrt(gamma0)
        c[own_cols + 1] = -im_k / np.sqrt(gamma0)
        program.soc_blocks.append(SocBlock(A=a_mat, b=b, c=c, d=0.0))

        f = np.zeros(n)
        f[own_cols] = im_k
        f[own_cols + 1] = re_k
        program.eq_constraints.append((f, 0.0))

    for m in range(num_aps):
        entry_cols = 2 * (np.arange(num_ues) * num_aps + m)
        all_cols = np.concatenate([entry_cols, entry_cols + 1])
        a_mat = sparse.coo_matrix(
            (np.ones(2 * num_ues), (np.arange(2 * num_ues), np.sort(all_cols))),
            shape=(2 * num_ues, n)).tocsr()
        program.soc_blocks.append(
            SocBlock(A=a_mat, b=np.zeros(2 * num_ues), c=np.zeros(n), d=1.0))
    return program


def _bisect_max_min(make_program, num_vars: int, gamma_hi: float,
                    bisect_tol: float, feas_tol: float) -> tuple[np.ndarray, BisectLog]:
    """Bisection over [0, gamma_hi]; zero is the always-feasible W=0 limit.

    A candidate the solver cannot resolve is written off as infeasible, which
    only ever biases the answer downward.
    """
    if not np.isfinite(gamma_hi) or gamma_hi <= 0:
        raise BisectionError(f"invalid SINR bracket cap {gamma_hi!r}")
    lo, hi = 0.0, gamma_hi
    x_best = np.zeros(num_vars)
    log = BisectLog(gamma_hi=gamma_hi)
    while hi - lo > bisect_tol * max(1.0, lo) and len(log.iterations) < MAX_BISECT_STEPS:
        mid = 0.5 * (lo + hi)
        result = solve_feasibility(make_program(mid), feas_tol=feas_tol)
        log.iterations.append((mid, result.status))
        log.solver_iterations += result.iterations
        if result.status == FEASIBLE:
            lo, x_best = mid, result.x
        else:
            if result.status == NUMERICAL_FAILURE:
                log.num_failures += 1
            hi = mid
    log.gamma_star, log.gamma_hi = lo, hi
    return x_best, log


def _finish_precoder(w, g_hat) -> Precoder:
    w = np.column_stack([phase_align(g_hat[:, k], w[:, k]) for k in range(w.shape[1])])
    power = np.sum(np.abs(w) ** 2, axis=1)
    peak = float(power.max()) if power.size else 0.0
    if peak > 1.0:  # shave off solver-tolerance-level power excess
        w = w / np.sqrt(peak)
        power = power / peak
    return Precoder(w=w, per_ap_power=power)


def maxmin_ob(g_hat, delta, rho_d: float, bisect_tol: float = DEFAULT_BISECT_TOL,
              feas_tol: float = DEFAULT_FEAS_TOL):
    """Max-min optimal beamformer via bisection over cone feasibility.

    Returns (Precoder, gamma_star, BisectLog) with gamma_star the last
    certified-feasible SINR floor.
    """
    num_aps, num_ues = g_hat.shape
    if np.any(np.all(g_hat == 0, axis=0)):
        raise ValueError("g_hat has an all-zero column; that user's SINR is pinned at 0")
    x, log = _bisect_max_min(
        lambda gamma0: build_feasibility(g_hat, delta, rho_d, gamma0),
        2 * num_aps * num_ues, sinr_upper_bound(g_hat, rho_d), bisect_tol, feas_tol)
    precoder = _finish_precoder(_x_to_w(x, num_aps, num_ues), g_hat)
    log.w = precoder.w
    return precoder, log.gamma_star, log


def _linear_block(c, d, n) -> SocBlock:
    # plain inequality c'x + d >= 0 as a degenerate one-row cone
    return SocBlock(A=np.zeros((1, n)), b=np.zeros(1), c=c, d=d)


def zf_directions(g_hat) -> np.ndarray:
    """Unit-norm pseudo-inverse columns: g_hat_k' u_i = 0 for i != k."""
    num_ues = g_hat.shape[1]
    if np.linalg.matrix_rank(g_hat) < num_ues:
        raise ZfRankError("estimated channel matrix is rank deficient")
    gram = g_hat.T @ g_hat.conj()
    u = g_hat.conj() @ np.linalg.inv(gram)
    return u / np.linalg.norm(u, axis=0, keepdims=True)


def zf_maxmin(g_hat, delta, rho_d: float, bisect_tol: float = DEFAULT_BISECT_TOL,
              feas_tol: float = DEFAULT_FEAS_TOL):
    """Zero-forcing directions with max-min power control over per-user scales."""
    num_aps, num_ues = g_hat.shape
    u = zf_directions(g_hat)
    diag_gain = np.abs(np.diagonal(g_hat.T @ u)) ** 2     # (K,)
    cee_coupling = delta.T @ (np.abs(u) ** 2)             # (K, K), delta_k vs column i
    ap_gain = np.abs(u) ** 2                              # (M, K)
    inv_rho = 1.0 / rho_d

    def make_program(gamma0):
        program = SocProgram(num_vars=num_ues)
        for k in range(num_ues):
            c = -cee_coupling[k].copy()
            c[k] += diag_gain[k] / gamma0
            program.soc_blocks.append(_linear_block(c, -inv_rho, num_ues))
        for m in range(num_aps):
            program.soc_blocks.append(_linear_block(-ap_gain[m], 1.0, num_ues))
        for k in range(num_ues):
            program.soc_blocks.append(_linear_block(np.eye(num_ues)[k], 0.0, num_ues))
        return program

    x, log = _bisect_max_min(make_program, num_ues, sinr_upper_bound(g_hat, rho_d),
                             bisect_tol, feas_tol)
    w = u * np.sqrt(np.maximum(x, 0.0))[None, :]
    precoder = _finish_precoder(w, g_hat)
    log.w = precoder.w
    return precoder, log.gamma_star, log


def zf_precoder(g_hat, delta, rho_d: float, bisect_tol: float = DEFAULT_BISECT_TOL,
                feas_tol: float = DEFAULT_FEAS_TOL) -> Precoder:
    return zf_maxmin(g_hat, delta, rho_d, bisect_tol, feas_tol)[0]


def cb_maxmin(g_hat, delta, rho_d: float, bisect_tol: float = DEFAULT_BISECT_TOL,
              feas_tol: float = DEFAULT_FEAS_TOL):
    """Conjugate directions per link with max-min control of the MK amplitudes.

    w_mk = s_mk * conj(g_hat_mk)/|g_hat_mk| with s_mk >= 0; links with a zero
    estimate keep amplitude zero.  Variable layout: s[i*M + m] = |w_mi|.
    """
    num_aps, num_ues = g_hat.shape
    mag = np.abs(g_hat)
    alive = mag > 0
    unit = np.zeros_like(g_hat)
    unit[alive] = g_hat.conj()[alive] / mag[alive]
    n = num_aps * num_ues
    sqrt_delta = np.sqrt(np.maximum(delta, 0.0))
    inv_sqrt_rho = 1.0 / np.sqrt(rho_d)
    m_idx = np.arange(num_aps)

    def make_program(gamma0):
        program = SocProgram(num_vars=n)
        for k in range(num_ues):
            rows, cols, vals = [], [], []
            r = 0
            for i in range(num_ues):
                if i == k:
                    continue
                coeff = g_hat[:, k] * unit[:, i]   # g_hat_k' w_i per-AP coefficients
                rows.append(np.full(num_aps, r))
                cols.append(i * num_aps + m_idx)
                vals.append(coeff.real)
                rows.append(np.full(num_aps, r + 1))
                cols.append(i * num_aps + m_idx)
                vals.append(coeff.imag)
                r += 2
            cee_cols = np.arange(n)
            rows.append(r + cee_cols)
            cols.append(cee_cols)
            vals.append(np.tile(sqrt_delta[:, k], num_ues))
            r += n
            r += 1  # noise row
            a_mat = sparse.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(r, n)).tocsr()
            b = np.zeros(r)
            b[-1] = inv_sqrt_rho
            c = np.zeros(n)
            c[k * num_aps + m_idx] = mag[:, k] / np.sqrt(gamma0)
            program.soc_blocks.append(SocBlock(A=a_mat, b=b, c=c, d=0.0))
        for m in range(num_aps):
            cols = np.arange(num_ues) * num_aps + m
            a_mat = sparse.coo_matrix(
                (np.ones(num_ues), (np.arange(num_ues), cols)), shape=(num_ues, n)).tocsr()
            program.soc_blocks.append(
                SocBlock(A=a_mat, b=np.zeros(num_ues), c=np.zeros(n), d=1.0))
        eye = np.eye(n)
        for j in range(n):
            program.soc_blocks.append(_linear_block(eye[j], 0.0, n))
        for j in np.flatnonzero(~alive.T.ravel()):
            program.eq_constraints.append((eye[j], 0.0))
        return program

    x, log = _bisect_max_min(make_program, n, sinr_upper_bound(g_hat, rho_d),
                             bisect_tol, feas_tol)
    s = np.maximum(x, 0.0).reshape(num_ues, num_aps).T
    precoder = _finish_precoder(unit * s, g_hat)
    log.w = precoder.w
    return precoder, log.gamma_star, log


def cb_precoder(g_hat, delta, rho_d: float, bisect_tol: float = DEFAULT_BISECT_TOL,
                feas_tol: float = DEFAULT_FEAS_TOL) -> Precoder:
    return cb_maxmin(g_hat, delta, rho_d, bisect_tol, feas_tol)[0]
