"""Cell-free massive MIMO downlink: max-min SINR beamforming and evaluation."""

from .beamform import (BisectLog, CuSinrReport, Precoder, ZfRankError,
                       build_feasibility, cb_maxmin, cb_precoder, cu_sinr,
                       maxmin_ob, phase_align, sinr_upper_bound, zf_maxmin,
                       zf_precoder)
from .channel import (ChannelState, PilotBook, UplinkPilotRx, draw_small_scale,
                      make_pilot_book, mmse_estimate, uplink_pilot_receive)
from .conic import (FEASIBLE, INFEASIBLE, NUMERICAL_FAILURE, FeasibilityResult,
                    SocBlock, SocProgram, check_point, solve_feasibility)
from .downlink import (DownlinkEstimate, EffectiveChannel, UePerf,
                       downlink_train, effective_channels, net_throughput,
                       ue_sinr)
from .harness import (CdfTable, ExperimentSpec, RunResult, RunRow, SweepRow,
                      empirical_cdf, pilot_sweep, run_experiment, save_results,
                      save_sweep)
from .scenario import (BetaMatrix, Layout, LinkBudget, SystemConfig,
                       draw_layout, large_scale, link_budget, load_config,
                       wrap_distance)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
