import itertools

import numpy as np
import pytest

from cemio.milp import MilpModel, Sense, VarKind
from cemio.solver import (
    SolveOptions,
    available_kernels,
    check_solution,
    solve_lp,
    solve_milp,
)

KERNELS = available_kernels()


def lp_vertex_oracle(c, A, senses, b, lo, hi):
    """Enumerate all basic candidate points (intersections of n active
    planes drawn from constraints and bounds), keep the feasible ones,
    return the minimal objective."""
    n = len(c)
    planes = []
    for i in range(len(A)):
        planes.append((A[i], b[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        planes.append((e, lo[j]))
        planes.append((e, hi[j]))
    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[k][0] for k in combo])
        rhs = np.array([planes[k][1] for k in combo])
        try:
            x = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
            continue
        ok = True
        for i in range(len(A)):
            lhs = A[i] @ x
            if senses[i] == -1 and lhs > b[i] + 1e-9:
                ok = False
            if senses[i] == 1 and lhs < b[i] - 1e-9:
                ok = False
            if senses[i] == 0 and abs(lhs - b[i]) > 1e-9:
                ok = False
        if ok:
            v = float(c @ x)
            if best is None or v < best:
                best = v
    return best


def build_model(c, A, senses, b, lo, hi, kinds=None):
    m = MilpModel()
    vs = [m.add_variable(f"x{i}",
                         kinds[i] if kinds else VarKind.CONTINUOUS,
                         lo[i], hi[i]) for i in range(len(c))]
    for i in range(len(A)):
        sense = {-1: Sense.LE, 0: Sense.EQ, 1: Sense.GE}[senses[i]]
        m.add_constraint([(vs[j], A[i][j]) for j in range(len(c))], sense, b[i])
    m.set_objective([(vs[j], c[j]) for j in range(len(c))])
    return m


class TestLp:
    @pytest.mark.parametrize("kernel", KERNELS)
    def test_box_minimum(self, kernel):
        m = MilpModel()
        x = m.add_variable("x", lower=0.0, upper=1.0)
        m.set_objective([(x, -1.0)])
        res = solve_lp(m, kernel=kernel)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-1.0)
        assert res.x[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_infeasible_pair(self, kernel):
        m = MilpModel()
        x = m.add_variable("x", lower=0.0, upper=10.0)
        m.add_constraint([(x, 1.0)], Sense.GE, 2.0)
        m.add_constraint([(x, 1.0)], Sense.LE, 1.0)
        m.set_objective([(x, 1.0)])
        assert solve_lp(m, kernel=kernel).status == "infeasible"

    def test_unbounded_detected(self):
        m = MilpModel()
        x = m.add_variable("x", lower=0.0, upper=float("inf"))
        m.set_objective([(x, -1.0)])
        assert solve_lp(m).status == "unbounded"

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_random_lps_match_vertex_enumeration(self, kernel, rng):
        # acceptance-grade: 50 instances within 1e-8 of the oracle
        for trial in range(50):
            n = 3
            m_rows = int(rng.integers(1, 5))
            A = rng.normal(size=(m_rows, n)).round(3)
            b = rng.normal(size=m_rows).round(3)
            c = rng.normal(size=n).round(3)
            senses = rng.choice([-1, 0, 1], size=m_rows, p=[0.6, 0.1, 0.3])
            lo = rng.uniform(-2, 0, n).round(3)
            hi = rng.uniform(0.1, 2, n).round(3)
            model = build_model(c, A, senses, b, lo, hi)
            res = solve_lp(model, kernel=kernel)
            expected = lp_vertex_oracle(c, A, senses, b, lo, hi)
            if expected is None:
                assert res.status == "infeasible", trial
            else:
                assert res.status == "optimal", trial
                assert res.objective == pytest.approx(expected, abs=1e-8), trial


class TestMilp:
    def knapsack(self):
        # maximize 3a + 4b + 5c subject to 2a + 3b + 4c <= 5 (as minimization);
        # brute force over the 8 assignments gives best value 7 at a=b=1
        m = MilpModel()
        a = m.add_variable("a", VarKind.BINARY)
        b = m.add_variable("b", VarKind.BINARY)
        c = m.add_variable("c", VarKind.BINARY)
        m.add_constraint([(a, 2.0), (b, 3.0), (c, 4.0)], Sense.LE, 5.0)
        m.set_objective([(a, -3.0), (b, -4.0), (c, -5.0)])
        return m.freeze()

    def test_knapsack_optimum(self):
        res = solve_milp(self.knapsack(), SolveOptions())
        assert res.status == "optimal"
        assert res.best_objective == pytest.approx(-7.0)
        assert res.pool[0].x[:2].tolist() == [1.0, 1.0]

    def test_unique_feasible_point_pool(self):
        m = MilpModel()
        a = m.add_variable("a", VarKind.BINARY)
        b = m.add_variable("b", VarKind.BINARY)
        m.add_constraint([(a, 1.0)], Sense.EQ, 1.0)
        m.add_constraint([(b, 1.0)], Sense.EQ, 0.0)
        m.set_objective([(a, 1.0), (b, 1.0)])
        res = solve_milp(m.freeze(), SolveOptions(pool_size=5, pool_mode="all-feasible"))
        assert len(res.pool) == 1
        assert res.pool[0].x.tolist() == [1.0, 0.0]

    def test_pool_collects_distinct_points(self):
        # feasible set has exactly five integer points; ask for three
        res = solve_milp(self.knapsack(), SolveOptions(pool_size=3, pool_mode="all-feasible"))
        assert len(res.pool) == 3
        keys = {tuple(np.round(e.x).tolist()) for e in res.pool}
        assert len(keys) == 3
        assert res.pool[0].objective <= res.pool[1].objective <= res.pool[2].objective

    def test_pool_entries_are_feasible(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 7))
            mm = int(rng.integers(1, 5))
            A = rng.normal(size=(mm, n)).round(2)
            b = (rng.normal(size=mm) + 1).round(2)
            c = rng.normal(size=n).round(2)
            senses = rng.choice([-1, 1], size=mm)
            model = build_model(c, A, senses, b, [0.0] * n, [1.0] * n,
                                kinds=[VarKind.BINARY] * n)
            model.freeze()
            res = solve_milp(model, SolveOptions(pool_size=4, pool_mode="all-feasible"))
            for entry in res.pool:
                assert check_solution(model, entry.x).feasible(1e-6)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_random_milps_match_enumeration(self, kernel, rng):
        # acceptance-grade: 50 instances with <= 12 binaries, <= 10 constraints
        for trial in range(50):
            n = int(rng.integers(2, 13))
            mm = int(rng.integers(1, 11))
            A = rng.normal(size=(mm, n)).round(2)
            b = rng.normal(scale=2, size=mm).round(2)
            c = rng.normal(size=n).round(2)
            senses = rng.choice([-1, 0, 1], size=mm, p=[0.6, 0.1, 0.3])
            model = build_model(c, A, senses, b, [0.0] * n, [1.0] * n,
                                kinds=[VarKind.BINARY] * n)
            model.freeze()
            res = solve_milp(model, SolveOptions(kernel=kernel))
            best = None
            for bits in itertools.product([0, 1], repeat=n):
                x = np.array(bits, dtype=float)
                ok = True
                for i in range(mm):
                    lhs = A[i] @ x
                    if senses[i] == -1 and lhs > b[i] + 1e-9:
                        ok = False
                    if senses[i] == 1 and lhs < b[i] - 1e-9:
                        ok = False
                    if senses[i] == 0 and abs(lhs - b[i]) > 1e-9:
                        ok = False
                if ok:
                    v = float(c @ x)
                    if best is None or v < best:
                        best = v
            if best is None:
                assert res.status == "infeasible", trial
            else:
                assert res.status == "optimal", trial
                assert res.best_objective == pytest.approx(best, abs=1e-6), trial

    def test_determinism_identical_pools(self, rng):
        n, mm = 8, 5
        A = rng.normal(size=(mm, n)).round(2)
        b = (rng.normal(size=mm) + 1).round(2)
        c = rng.normal(size=n).round(2)
        senses = rng.choice([-1, 1], size=mm)

        def run():
            model = build_model(c, A, senses, b, [0.0] * n, [1.0] * n,
                                kinds=[VarKind.BINARY] * n)
            res = solve_milp(model.freeze(), SolveOptions(pool_size=4, pool_mode="all-feasible"))
            return [(e.objective, e.x.tolist()) for e in res.pool]

        assert run() == run()

    def test_lp_bound_sandwiches_milp_optimum(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 8))
            mm = int(rng.integers(1, 5))
            A = rng.normal(size=(mm, n)).round(2)
            b = (rng.normal(size=mm) + 1).round(2)
            c = rng.normal(size=n).round(2)
            senses = rng.choice([-1, 1], size=mm)
            model = build_model(c, A, senses, b, [0.0] * n, [1.0] * n,
                                kinds=[VarKind.BINARY] * n)
            model.freeze()
            relax = solve_lp(model)
            res = solve_milp(model, SolveOptions())
            if res.status == "optimal":
                assert relax.status == "optimal"
                assert relax.objective <= res.best_objective + 1e-9

    def test_node_limit_reports_limit_status(self):
        m = MilpModel()
        vs = [m.add_variable(f"b{i}", VarKind.BINARY) for i in range(14)]
        m.add_constraint([(v, 1.0) for v in vs], Sense.EQ, 7.0)
        m.set_objective([(v, ((-1) ** i) * (1 + 0.01 * i)) for i, v in enumerate(vs)])
        m.freeze()
        res = solve_milp(m, SolveOptions(node_limit=2))
        assert res.status in ("limit", "optimal")

    def test_requires_frozen_model(self):
        m = MilpModel()
        m.add_variable("x", VarKind.BINARY)
        m.set_objective([])
        with pytest.raises(ValueError):
            solve_milp(m, SolveOptions())


class TestCheckSolution:
    def test_feasible_point_has_zero_violation(self):
        m = MilpModel()
        x = m.add_variable("x", lower=0.0, upper=2.0)
        m.add_constraint([(x, 1.0)], Sense.GE, 1.0, tag="lower")
        report = check_solution(m, np.array([1.5]))
        assert report.max_violation == pytest.approx(0.0, abs=1e-9)

    def test_violation_reported_on_tag(self):
        m = MilpModel()
        x = m.add_variable("x", lower=0.0, upper=2.0)
        m.add_constraint([(x, 1.0)], Sense.GE, 1.0, tag="lower")
        report = check_solution(m, np.array([0.0]))
        assert report.by_tag["lower"] == pytest.approx(1.0)
        assert not report.feasible()

    def test_assignment_length_checked(self):
        m = MilpModel()
        m.add_variable("x")
        with pytest.raises(ValueError):
            check_solution(m, np.array([1.0, 2.0]))


class TestOptions:
    def test_pool_size_validated(self):
        with pytest.raises(ValueError):
            SolveOptions(pool_size=0)

    def test_pool_mode_validated(self):
        with pytest.raises(ValueError):
            SolveOptions(pool_mode="everything")

    def test_verbose_log_lines(self, rng):
        import io
        stream = io.StringIO()
        m = MilpModel()
        a = m.add_variable("a", VarKind.BINARY)
        b = m.add_variable("b", VarKind.BINARY)
        m.add_constraint([(a, 1.0), (b, 1.0)], Sense.LE, 1.0)
        m.set_objective([(a, -1.0), (b, -2.0)])
        res = solve_milp(m.freeze(), SolveOptions(verbose=True, log_stream=stream))
        assert "incumbent" in stream.getvalue()
