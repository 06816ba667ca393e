"""Monte Carlo experiment driver: realizations, aggregation, CSV output.

Each realization draws geometry, shadowing, pilots, and fading from
independent seed-derived substreams keyed by (seed, realization), so results
do not depend on execution order and a pilot-length sweep automatically pairs
its per-tau_p runs on common layouts and shadowing.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from itertools import repeat

import numpy as np

from .beamform import (BisectionError, ZfRankError, cb_maxmin, maxmin_ob,
                       zf_maxmin)
from .channel import (draw_small_scale, make_pilot_book, mmse_estimate,
                      uplink_pilot_receive)
from .downlink import downlink_train, effective_channels, net_throughput, ue_sinr
from .scenario import SystemConfig, draw_layout, large_scale, link_budget

BEAMFORMER_NAMES = ("ob", "zf", "cb")
_SOLVERS = {"ob": maxmin_ob, "zf": zf_maxmin, "cb": cb_maxmin}
FAILURE_ABORT_FRACTION = 0.01


@dataclass
class ExperimentSpec:
    config: SystemConfig
    beamformers: tuple = BEAMFORMER_NAMES
    num_realizations: int = 1
    pilot_sweep: list = None
    output_dir: str = None
    bisect_tol: float = 1e-3
    feas_tol: float = 1e-7
    zf_retries: int = 20
    jobs: int = 1

    def __post_init__(self):
        self.beamformers = tuple(self.beamformers)
        unknown = set(self.beamformers) - set(BEAMFORMER_NAMES)
        if unknown or not self.beamformers:
            raise ValueError(f"beamformers must be a nonempty subset of "
                             f"{BEAMFORMER_NAMES}, got {self.beamformers}")
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be >= 1")
        if self.pilot_sweep is not None:
            for tau_p in self.pilot_sweep:
                if tau_p < 1 or tau_p + self.config.tau_b >= self.config.tau_c:
                    raise ValueError(f"sweep value tau_p={tau_p} violates "
                                     f"tau_p + tau_b < tau_c")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class RunRow:
    beamformer: str
    realization: int
    user: int
    gamma_ue: float
    throughput_bps: float
    min_user: bool  # worst throughput of its (beamformer, realization) group


@dataclass
class RunResult:
    rows: list
    seed: int
    beamformers: tuple
    num_realizations: int
    failed_realizations: dict   # beamformer -> sorted excluded realization indices
    zf_resamples: int
    solver_iterations: int
    candidate_failures: int     # bisection candidates the solver broke down on
    started_at: str = ""
    finished_at: str = ""

    def samples(self, beamformer: str) -> np.ndarray:
        return np.array([row.throughput_bps for row in self.rows
                         if row.beamformer == beamformer])


@dataclass
class CdfTable:
    values: np.ndarray  # sorted ascending
    levels: np.ndarray  # i/N

    def percentile(self, p: float) -> float:
        """Smallest sample whose empirical CDF level reaches p."""
        if not 0.0 < p <= 1.0:
            raise ValueError(f"percentile level must be in (0, 1], got {p}")
        idx = min(int(np.searchsorted(self.levels, p, side="left")),
                  len(self.values) - 1)
        return float(self.values[idx])


@dataclass
class SweepRow:
    tau_p: int
    beamformer: str
    mean_bps: float      # mean over all (realization, user) samples
    min_bps: float       # global minimum sample
    mean_min_bps: float  # per-realization minimum, then averaged


@dataclass
class SweepResult:
    rows: list
    per_tau: dict  # tau_p -> RunResult


@dataclass
class _RealizationOutcome:
    realization: int
    rows: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    zf_resamples: int = 0
    solver_iterations: int = 0
    candidate_failures: int = 0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _run_realization(spec: ExperimentSpec, realization: int) -> _RealizationOutcome:
    config = spec.config
    seed = config.rng_seed
    out = _RealizationOutcome(realization=realization)

    base = np.random.SeedSequence((seed, realization))
    layout_ss, shadow_ss, pilot_ss, dl_ss = base.spawn(4)
    layout = draw_layout(config, np.random.default_rng(layout_ss))
    beta = large_scale(layout, config, np.random.default_rng(shadow_ss))
    budget = link_budget(config)
    pilots = make_pilot_book(config.tau_p, config.num_ues,
                             np.random.default_rng(pilot_ss))

    # fading is resampled (attempt-indexed streams) only if ZF needs full rank
    state = None
    zf_ok = True
    for attempt in range(spec.zf_retries + 1):
        fading_ss, ul_ss = np.random.SeedSequence((seed, realization, attempt)).spawn(2)
        g = np.sqrt(beta.beta) * draw_small_scale(
            config.num_aps, config.num_ues, np.random.default_rng(fading_ss))
        rx = uplink_pilot_receive(g, pilots, budget.rho_p, config.tau_p,
                                  np.random.default_rng(ul_ss))
        state = mmse_estimate(rx, pilots, beta.beta, budget.rho_p, config.tau_p, g=g)
        if "zf" not in spec.beamformers:
            break
        if np.linalg.matrix_rank(state.g_hat) == config.num_ues:
            break
        out.zf_resamples += 1
    else:
        zf_ok = False

    for name in spec.beamformers:
        if name == "zf" and not zf_ok:
            out.failed.append(name)
            continue
        try:
            precoder, _, log = _SOLVERS[name](
                state.g_hat, state.delta, budget.rho_d,
                bisect_tol=spec.bisect_tol, feas_tol=spec.feas_tol)
        except (BisectionError, ZfRankError, np.linalg.LinAlgError):
            out.failed.append(name)
            continue
        out.solver_iterations += log.solver_iterations
        out.candidate_failures += log.num_failures
        if log.num_failures > 0:
            # a broken candidate solve taints the bracket; keep stats honest
            out.failed.append(name)
            continue
        eff = effective_channels(state.g, precoder.w)
        estimate = downlink_train(eff, config.tau_b, budget.rho_b,
                                  np.random.default_rng(dl_ss))
        gamma_ue = ue_sinr(estimate, eff, budget.rho_d)
        throughput = net_throughput(gamma_ue, config.bandwidth_hz,
                                    config.tau_p, config.tau_b, config.tau_c)
        min_user = int(np.argmin(throughput))
        out.rows.extend(
            RunRow(beamformer=name, realization=realization, user=u,
                   gamma_ue=float(gamma_ue[u]),
                   throughput_bps=float(throughput[u]),
                   min_user=(u == min_user))
            for u in range(config.num_ues))
    return out


def run_experiment(spec: ExperimentSpec) -> RunResult:
    """Run all realizations end-to-end and collect the per-user table.

    Realizations whose solves broke down numerically are excluded from the
    table and counted; more than 1% of them failing aborts the run.
    """
    started = _now()
    indices = range(spec.num_realizations)
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outcomes = list(pool.map(_run_realization, repeat(spec), indices))
    else:
        outcomes = [_run_realization(spec, r) for r in indices]

    failed = {name: sorted(o.realization for o in outcomes if name in o.failed)
              for name in spec.beamformers}
    num_failed = len({o.realization for o in outcomes if o.failed})
    if num_failed > FAILURE_ABORT_FRACTION * spec.num_realizations:
        raise RuntimeError(
            f"{num_failed} of {spec.num_realizations} realizations hit solver "
            f"failures (excluded per beamformer: {failed}); aborting")

    rows = [row for o in outcomes for row in o.rows]
    return RunResult(
        rows=rows, seed=spec.config.rng_seed, beamformers=spec.beamformers,
        num_realizations=spec.num_realizations, failed_realizations=failed,
        zf_resamples=sum(o.zf_resamples for o in outcomes),
        solver_iterations=sum(o.solver_iterations for o in outcomes),
        candidate_failures=sum(o.candidate_failures for o in outcomes),
        started_at=started, finished_at=_now())


def empirical_cdf(samples) -> CdfTable:
    values = np.sort(np.asarray(samples, dtype=float))
    if values.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    levels = np.arange(1, values.size + 1) / values.size
    return CdfTable(values=values, levels=levels)


def pilot_sweep(spec: ExperimentSpec) -> SweepResult:
    """Re-run the experiment per tau_p on paired layout/shadowing draws."""
    if not spec.pilot_sweep:
        raise ValueError("pilot_sweep requires a nonempty sweep list")
    rows, per_tau = [], {}
    for tau_p in spec.pilot_sweep:
        sub = replace(spec, config=replace(spec.config, tau_p=tau_p),
                      pilot_sweep=None)
        result = run_experiment(sub)
        per_tau[tau_p] = result
        for name in spec.beamformers:
            samples = result.samples(name)
            mins = [min(row.throughput_bps for row in result.rows
                        if row.beamformer == name and row.realization == r)
                    for r in range(spec.num_realizations)
                    if r not in result.failed_realizations[name]]
            rows.append(SweepRow(
                tau_p=tau_p, beamformer=name,
                mean_bps=float(samples.mean()) if samples.size else 0.0,
                min_bps=float(samples.min()) if samples.size else 0.0,
                mean_min_bps=float(np.mean(mins)) if mins else 0.0))
    return SweepResult(rows=rows, per_tau=per_tau)


# ---------------------------------------------------------------------------
# output files


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_throughput_csv(result: RunResult, path) -> None:
    with open(path, "w") as fh:
        fh.write("beamformer,realization,user,gamma_ue,throughput_bps\n")
        for row in result.rows:
            fh.write(f"{row.beamformer},{row.realization},{row.user},"
                     f"{_fmt(row.gamma_ue)},{_fmt(row.throughput_bps)}\n")


def write_cdf_csv(table: CdfTable, path) -> None:
    with open(path, "w") as fh:
        fh.write("value,level\n")
        for value, level in zip(table.values, table.levels):
            fh.write(f"{_fmt(value)},{_fmt(level)}\n")


def write_sweep_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("tau_p,beamformer,mean_bps,min_bps,mean_min_bps\n")
        for row in rows:
            fh.write(f"{row.tau_p},{row.beamformer},{_fmt(row.mean_bps)},"
                     f"{_fmt(row.min_bps)},{_fmt(row.mean_min_bps)}\n")


def write_run_meta(result: RunResult, spec: ExperimentSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"seed: {result.seed}\n")
        fh.write(f"beamformers: {','.join(result.beamformers)}\n")
        fh.write(f"realizations: {result.num_realizations}\n")
        fh.write(f"started_at: {result.started_at}\n")
        fh.write(f"finished_at: {result.finished_at}\n")
        fh.write(f"solver_iterations: {result.solver_iterations}\n")
        fh.write(f"zf_resamples: {result.zf_resamples}\n")
        fh.write(f"candidate_failures: {result.candidate_failures}\n")
        for name in result.beamformers:
            excluded = result.failed_realizations.get(name, [])
            fh.write(f"excluded[{name}]: {len(excluded)} {excluded}\n")
        for key, value in asdict(spec.config).items():
            fh.write(f"config.{key}: {value}\n")


def save_results(result: RunResult, spec: ExperimentSpec, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_throughput_csv(result, os.path.join(out_dir, "throughput_samples.csv"))
    for name in result.beamformers:
        samples = result.samples(name)
        if samples.size:
            write_cdf_csv(empirical_cdf(samples),
                          os.path.join(out_dir, f"cdf_{name}.csv"))
    write_run_meta(result, spec, os.path.join(out_dir, "run_meta.txt"))


def save_sweep(sweep: SweepResult, spec: ExperimentSpec, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_sweep_csv(sweep.rows, os.path.join(out_dir, "sweep.csv"))
    for tau_p, result in sweep.per_tau.items():
        write_run_meta(result, spec,
                       os.path.join(out_dir, f"run_meta_tau{tau_p}.txt"))
