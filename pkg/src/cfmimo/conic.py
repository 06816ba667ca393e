"""Real second-order cone feasibility kernel.

A program collects blocks ||A x + b|| <= c'x + d plus linear equalities
f'x = e over n real variables.  Feasibility is decided by minimizing the
maximum constraint violation t:

    minimize  t   s.t.   ||A_j x + b_j|| <= c_j'x + d_j + t   for all blocks,
                         |f_i'x - e_i| <= t                   for all equalities,
                         t >= 0,

an SOCP that always has a strictly feasible point, so no solve is ever itself
infeasible.  Every constraint is normalized to unit data norm first; the
reported violation and ``feas_tol`` both refer to that scaling.  The embedded
solver is Clarabel, a sparse primal-dual interior-point method; this module
owns the problem form and the feasibility semantics, not the algorithm.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"

DEFAULT_FEAS_TOL = 1e-7
DEFAULT_MAX_ITER = 200


@dataclass
class SocBlock:
    """One cone constraint ||A x + b|| <= c'x + d.  A may be dense or scipy-sparse."""

    A: object          # (r, n), r >= 1
    b: np.ndarray      # (r,)
    c: np.ndarray      # (n,)
    d: float

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclass
class SocProgram:
    num_vars: int
    soc_blocks: list = field(default_factory=list)       # [SocBlock]
    eq_constraints: list = field(default_factory=list)   # [(f, e)]


@dataclass
class FeasibilityResult:
    status: str                    # feasible | infeasible | numerical_failure
    x: np.ndarray | None           # present iff feasible
    max_violation: float           # on the unit-normalized constraints
    solver_status: str = ""
    iterations: int = 0


def _fro(mat) -> float:
    if sparse.issparse(mat):
        return float(np.sqrt(mat.power(2).sum()))
    return float(np.linalg.norm(mat))


def _block_scale(block: SocBlock) -> float:
    s = np.sqrt(_fro(block.A) ** 2 + np.dot(block.b, block.b)
                + np.dot(block.c, block.c) + block.d**2)
    return float(s) if s > 0 else 1.0


def check_point(program: SocProgram, x) -> float:
    """Max violation of x over all constraints; zero iff x is feasible."""
    x = np.asarray(x, dtype=float)
    if x.shape != (program.num_vars,):
        raise ValueError(f"x has shape {x.shape}, program has {program.num_vars} variables")
    worst = 0.0
    for blk in program.soc_blocks:
        resid = blk.A @ x + blk.b
        gap = float(np.linalg.norm(resid) - (blk.c @ x + blk.d))
        worst = max(worst, gap)
    for f, e in program.eq_constraints:
        worst = max(worst, abs(float(f @ x - e)))
    return worst


def _normalized(program: SocProgram) -> SocProgram:
    blocks = []
    for blk in program.soc_blocks:
        s = _block_scale(blk)
        blocks.append(SocBlock(A=blk.A / s, b=blk.b / s, c=blk.c / s, d=blk.d / s))
    eqs = []
    for f, e in program.eq_constraints:
        s = np.sqrt(np.dot(f, f) + e * e)
        s = float(s) if s > 0 else 1.0
        eqs.append((f / s, e / s))
    return SocProgram(program.num_vars, blocks, eqs)


class _RowBuilder:
    """Accumulates sparse rows of the Clarabel constraint matrix A z + s = b."""

    def __init__(self, ncols):
        self.ncols = ncols
        self.rows, self.cols, self.vals, self.b = [], [], [], []
        self.nrows = 0

    def add_row(self, col_idx, values, rhs):
        self.rows.append(np.full(len(col_idx), self.nrows, dtype=np.int64))
        self.cols.append(np.asarray(col_idx, dtype=np.int64))
        self.vals.append(np.asarray(values, dtype=float))
        self.b.append(rhs)
        self.nrows += 1

    def add_matrix(self, mat, rhs):
        if sparse.issparse(mat):
            coo = mat.tocoo()
            r, c, v = coo.row, coo.col, coo.data
        else:
            mat = np.asarray(mat, dtype=float)
            r, c = np.nonzero(mat)
            v = mat[r, c]
        self.rows.append(r + self.nrows)
        self.cols.append(np.asarray(c, dtype=np.int64))
        self.vals.append(np.asarray(v, dtype=float))
        self.b.extend(np.asarray(rhs, dtype=float))
        self.nrows += mat.shape[0]

    def build(self):
        rows = np.concatenate(self.rows) if self.rows else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(self.cols) if self.cols else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(self.vals) if self.vals else np.zeros(0)
        mat = sparse.coo_matrix((vals, (rows, cols)), shape=(self.nrows, self.ncols))
        return mat.tocsc(), np.asarray(self.b, dtype=float)


def _is_zero_A(mat) -> bool:
    if sparse.issparse(mat):
        return mat.nnz == 0
    return not np.any(mat)


def solve_feasibility(program: SocProgram, feas_tol: float = DEFAULT_FEAS_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> FeasibilityResult:
    """Decide feasibility of the program and return a witness point when feasible.

    ``feasible`` guarantees the returned x violates no normalized constraint by
    more than feas_tol; ``infeasible`` means the minimum achievable violation
    provably exceeds it; an iteration cap or solver breakdown is reported as
    ``numerical_failure``, never silently as either verdict.
    """
    n = program.num_vars
    if not program.soc_blocks and not program.eq_constraints:
        return FeasibilityResult(FEASIBLE, np.zeros(n), 0.0, "trivial", 0)

    norm_prog = _normalized(program)
    nz = n + 1  # trailing variable is the violation bound t
    builder = _RowBuilder(nz)

    # nonnegative section: t >= 0, equality slacks, and zero-A blocks (plain
    # linear inequalities c'x + d + t >= ||b||)
    builder.add_row([n], [-1.0], 0.0)
    for f, e in norm_prog.eq_constraints:
        idx = np.flatnonzero(f)
        builder.add_row(np.append(idx, n), np.append(f[idx], -1.0), e)
        builder.add_row(np.append(idx, n), np.append(-f[idx], -1.0), -e)
    soc_like = []
    for blk in norm_prog.soc_blocks:
        if _is_zero_A(blk.A):
            idx = np.flatnonzero(blk.c)
            builder.add_row(np.append(idx, n), np.append(-blk.c[idx], -1.0),
                            blk.d - float(np.linalg.norm(blk.b)))
        else:
            soc_like.append(blk)
    cones = [clarabel.NonnegativeConeT(builder.nrows)]

    for blk in soc_like:
        idx = np.flatnonzero(blk.c)
        builder.add_row(np.append(idx, n), np.append(-blk.c[idx], -1.0), blk.d)
        mat = -blk.A if not sparse.issparse(blk.A) else blk.A * -1.0
        builder.add_matrix(sparse.hstack([mat, sparse.csr_matrix((blk.rows, 1))])
                           if sparse.issparse(mat)
                           else np.hstack([mat, np.zeros((blk.rows, 1))]),
                           blk.b)
        cones.append(clarabel.SecondOrderConeT(blk.rows + 1))

    a_mat, b_vec = builder.build()
    q = np.zeros(nz)
    q[n] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = 1e-9
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-9
    solver = clarabel.DefaultSolver(sparse.csc_matrix((nz, nz)), q, a_mat, b_vec,
                                    cones, settings)
    sol = solver.solve()
    status_name = str(sol.status)
    iterations = int(sol.iterations)

    x = np.asarray(sol.x[:n], dtype=float)
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        return FeasibilityResult(NUMERICAL_FAILURE, None, np.inf, status_name, iterations)
    violation = check_point(norm_prog, x)

    if violation <= feas_tol:
        return FeasibilityResult(FEASIBLE, x, violation, status_name, iterations)
    solved = sol.status in (clarabel.SolverStatus.Solved, clarabel.SolverStatus.AlmostSolved)
    if solved and float(sol.obj_val) > 0.5 * feas_tol:
        # optimum of the violation minimization exceeds tolerance: no point does better
        return FeasibilityResult(INFEASIBLE, None, violation, status_name, iterations)
    return FeasibilityResult(NUMERICAL_FAILURE, None, violation, status_name, iterations)


def format_program(program: SocProgram) -> str:
    """One constraint per line, for debugging."""
    lines = [f"SocProgram: n={program.num_vars}, {len(program.soc_blocks)} cone blocks, "
             f"{len(program.eq_constraints)} equalities"]
    for j, blk in enumerate(program.soc_blocks):
        lines.append(f"  soc[{j}]: ||A({blk.rows}x{program.num_vars}) x + b|| "
                     f"<= c'x + {blk.d:.6g}   (|A|={_fro(blk.A):.4g}, |b|={np.linalg.norm(blk.b):.4g}, "
                     f"|c|={np.linalg.norm(blk.c):.4g})")
    for i, (f, e) in enumerate(program.eq_constraints):
        lines.append(f"  eq[{i}]: f'x = {e:.6g}   (|f|={np.linalg.norm(f):.4g})")
    return "\n".join(lines)
