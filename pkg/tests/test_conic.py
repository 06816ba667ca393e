import numpy as np
import pytest

from cfmimo.beamform import build_feasibility
from cfmimo.conic import (FEASIBLE, INFEASIBLE, NUMERICAL_FAILURE, SocBlock,
                          SocProgram, check_point, format_program,
                          solve_feasibility)
from oracles import grid_maxmin_single_ap


def unit_disc_program(num_vars=2, radius=1.0):
    # ||(x1, x2)|| <= radius
    prog = SocProgram(num_vars=num_vars)
    a = np.zeros((2, num_vars))
    a[0, 0] = a[1, 1] = 1.0
    prog.soc_blocks.append(SocBlock(A=a, b=np.zeros(2), c=np.zeros(num_vars),
                                    d=radius))
    return prog


def planted_program(rng, num_vars=5, num_blocks=3, num_eqs=2, margin=0.1):
    """Random SOC program built around a known strictly feasible point."""
    x0 = rng.normal(size=num_vars)
    prog = SocProgram(num_vars=num_vars)
    for _ in range(num_blocks):
        rows = rng.integers(1, 5)
        a = rng.normal(size=(rows, num_vars))
        b = rng.normal(size=rows)
        c = rng.normal(size=num_vars)
        d = np.linalg.norm(a @ x0 + b) - c @ x0 + margin
        prog.soc_blocks.append(SocBlock(A=a, b=b, c=c, d=d))
    for _ in range(num_eqs):
        f = rng.normal(size=num_vars)
        prog.eq_constraints.append((f, float(f @ x0)))
    return prog, x0


class TestCheckPoint:
    def test_empty_program(self):
        assert check_point(SocProgram(num_vars=3), np.ones(3)) == 0.0

    def test_direct_violation(self):
        prog = SocProgram(num_vars=2)
        prog.soc_blocks.append(SocBlock(A=np.array([[1.0, 0.0]]), b=np.zeros(1),
                                        c=np.zeros(2), d=1.0))
        assert check_point(prog, np.array([2.0, 0.0])) == pytest.approx(1.0)

    def test_boundary_is_feasible(self):
        prog = unit_disc_program(num_vars=3)
        prog.soc_blocks[0].c = np.array([0.0, 0.0, 1.0])
        prog.soc_blocks[0].d = 0.0
        assert check_point(prog, np.array([3.0, 4.0, 5.0])) == 0.0

    def test_equality_violation(self):
        prog = SocProgram(num_vars=2)
        prog.eq_constraints.append((np.array([1.0, 1.0]), 1.0))
        assert check_point(prog, np.array([2.0, 1.0])) == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            check_point(SocProgram(num_vars=3), np.ones(2))


class TestSolveFeasibility:
    def test_disc_with_equality(self):
        prog = unit_disc_program()
        prog.eq_constraints.append((np.array([1.0, 0.0]), 0.9))
        res = solve_feasibility(prog)
        assert res.status == FEASIBLE
        assert res.x[0] == pytest.approx(0.9, abs=1e-6)
        assert res.max_violation <= 1e-7

    def test_planted_contradiction(self):
        prog = unit_disc_program()
        prog.eq_constraints.append((np.array([1.0, 0.0]), 2.0))
        assert solve_feasibility(prog).status == INFEASIBLE

    def test_empty_program_feasible(self):
        res = solve_feasibility(SocProgram(num_vars=4))
        assert res.status == FEASIBLE
        assert np.array_equal(res.x, np.zeros(4))

    def test_iteration_cap_reported_as_failure(self):
        prog = unit_disc_program()
        prog.eq_constraints.append((np.array([1.0, 0.0]), 0.9))
        res = solve_feasibility(prog, max_iter=1)
        assert res.status == NUMERICAL_FAILURE

    def test_beamforming_toy_against_grid(self):
        # single-AP two-user instance; feasibility threshold must match the
        # brute-force max-min over the unit power disc
        rng = np.random.default_rng(17)
        g_hat = (rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2)))
        delta = np.array([[0.05, 0.12]])
        rho_d = 40.0
        best = grid_maxmin_single_ap(g_hat, delta, rho_d, resolution=1e-3)
        low = solve_feasibility(build_feasibility(g_hat, delta, rho_d, 0.95 * best))
        high = solve_feasibility(build_feasibility(g_hat, delta, rho_d, 1.10 * best))
        assert low.status == FEASIBLE
        assert high.status == INFEASIBLE

    def test_planted_feasible_corpus(self):
        rng = np.random.default_rng(99)
        for trial in range(50):
            prog, _ = planted_program(rng)
            res = solve_feasibility(prog)
            assert res.status == FEASIBLE, f"trial {trial}: {res.solver_status}"
            # soundness: reported point really satisfies the constraints
            assert check_point(prog, res.x) <= 1e-7 * _scale(prog)

    def test_planted_contradiction_corpus(self):
        rng = np.random.default_rng(100)
        for trial in range(20):
            prog, x0 = planted_program(rng)
            f = rng.normal(size=prog.num_vars)
            prog.eq_constraints.append((f, float(f @ x0)))
            prog.eq_constraints.append((f, float(f @ x0) + 1.0))
            assert solve_feasibility(prog).status == INFEASIBLE, f"trial {trial}"

    def test_block_scaling_invariance(self):
        for scale in (1e-3, 1.0, 1e3):
            prog = unit_disc_program()
            prog.eq_constraints.append((np.array([1.0, 0.0]), 0.9))
            blk = prog.soc_blocks[0]
            prog.soc_blocks[0] = SocBlock(A=scale * blk.A, b=scale * blk.b,
                                          c=scale * blk.c, d=scale * blk.d)
            assert solve_feasibility(prog).status == FEASIBLE

            bad = unit_disc_program()
            bad.eq_constraints.append((scale * np.array([1.0, 0.0]), scale * 2.0))
            assert solve_feasibility(bad).status == INFEASIBLE

    def test_added_constraint_never_rescues(self):
        rng = np.random.default_rng(101)
        prog = unit_disc_program()
        prog.eq_constraints.append((np.array([1.0, 0.0]), 2.0))
        assert solve_feasibility(prog).status == INFEASIBLE
        for _ in range(5):
            extra = SocBlock(A=rng.normal(size=(2, 2)), b=rng.normal(size=2),
                             c=rng.normal(size=2), d=float(rng.normal()))
            prog.soc_blocks.append(extra)
            assert solve_feasibility(prog).status == INFEASIBLE


def _scale(prog):
    return max([np.abs(blk.d) + np.linalg.norm(blk.b) for blk in prog.soc_blocks]
               + [1.0])


def test_format_program_mentions_every_constraint():
    prog = unit_disc_program()
    prog.eq_constraints.append((np.array([1.0, 0.0]), 0.9))
    dump = format_program(prog)
    lines = dump.strip().splitlines()
    assert sum("soc[" in line for line in lines) == 1
    assert sum("eq[" in line for line in lines) == 1
