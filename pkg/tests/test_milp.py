import numpy as np
import pytest

from cemio.milp import MilpModel, ModelError, Sense, VarKind
from cemio.solver import SolveOptions, solve_lp, solve_milp

from lp_text import parse_lp, solve_parsed


class TestConstruction:
    def test_binary_variable_bounds(self):
        m = MilpModel()
        b = m.add_variable("b", VarKind.BINARY, lower=-3, upper=7)
        assert (b.lower, b.upper) == (0.0, 1.0)
        assert b.kind is VarKind.BINARY

    def test_nan_coefficient_rejected(self):
        m = MilpModel()
        x = m.add_variable("x")
        with pytest.raises(ModelError):
            m.add_constraint([(x, float("nan"))], Sense.LE, 1.0)

    def test_unknown_variable_rejected(self):
        m = MilpModel()
        m.add_variable("x")
        with pytest.raises(ModelError):
            m.add_constraint([(5, 1.0)], Sense.LE, 1.0)

    def test_duplicate_names_allowed_ids_unique(self):
        m = MilpModel()
        a = m.add_variable("same")
        b = m.add_variable("same")
        assert a.name == b.name and a.id != b.id

    def test_bad_bounds_rejected(self):
        m = MilpModel()
        with pytest.raises(ModelError):
            m.add_variable("x", lower=2.0, upper=1.0)

    def test_frozen_model_rejects_growth(self):
        m = MilpModel()
        m.add_variable("x")
        m.freeze()
        with pytest.raises(ModelError):
            m.add_variable("y")

    def test_append_only_counts(self):
        m = MilpModel()
        x = m.add_variable("x")
        before = (len(m.variables), len(m.constraints))
        m.add_constraint([(x, 1.0)], Sense.LE, 1.0)
        after = (len(m.variables), len(m.constraints))
        assert after[0] >= before[0] and after[1] > before[1]


class TestAbsLink:
    def solve_min_aux(self, u_fix, ref, lo=0.0, hi=4.0):
        m = MilpModel()
        u = m.add_variable("u", lower=lo, upper=hi)
        a = m.add_variable("a", lower=0.0, upper=10.0)
        m.add_abs_link(u, a, ref)
        if u_fix is not None:
            m.add_constraint([(u, 1.0)], Sense.EQ, u_fix)
        m.set_objective([(a, 1.0)])
        m.freeze()
        res = solve_milp(m, SolveOptions())
        assert res.status == "optimal"
        return res.best_objective, res.pool[0].x

    def test_fixed_above_reference(self):
        obj, _ = self.solve_min_aux(3.0, 1.0)
        assert obj == pytest.approx(2.0)

    def test_identity_case(self):
        obj, _ = self.solve_min_aux(1.0, 1.0)
        assert obj == pytest.approx(0.0)

    def test_free_variable_settles_on_reference(self):
        # LP oracle: min a s.t. a >= |u - 2.5|, u in [0,4] has optimum 0 at u=2.5
        obj, x = self.solve_min_aux(None, 2.5)
        assert obj == pytest.approx(0.0, abs=1e-9)
        assert x[0] == pytest.approx(2.5)


class TestPwlPenalty:
    def build(self, breakpoints, at=None):
        m = MilpModel()
        t = m.add_variable("t", lower=-1.0, upper=1.0)
        epi = m.add_pwl_penalty(t, breakpoints)
        if at is not None:
            m.add_constraint([(t, 1.0)], Sense.EQ, at)
        m.set_objective([(epi, 1.0)])
        m.freeze()
        res = solve_milp(m, SolveOptions())
        assert res.status == "optimal"
        return res.best_objective

    def square_points(self):
        return [(v, v * v) for v in (-1.0, -0.5, 0.0, 0.5, 1.0)]

    def test_exact_at_breakpoint(self):
        assert self.build(self.square_points(), at=0.5) == pytest.approx(0.25)

    def test_chord_overestimates_between_breakpoints(self):
        # chord of t^2 between 0 and 0.5 evaluated at 0.25: 0.125 > 0.0625
        val = self.build(self.square_points(), at=0.25)
        assert val == pytest.approx(0.125)
        assert val > 0.25 ** 2

    def test_non_convex_breakpoints_rejected(self):
        m = MilpModel()
        t = m.add_variable("t", lower=0.0, upper=2.0)
        with pytest.raises(ModelError):
            m.add_pwl_penalty(t, [(0.0, 0.0), (1.0, 2.0), (2.0, 2.5)])


class TestExportLp:
    def test_basic_sections(self):
        m = MilpModel("tiny")
        x = m.add_variable("x", lower=0.0, upper=5.0)
        m.add_constraint([(x, 1.0)], Sense.GE, 1.0)
        m.set_objective([(x, 1.0)])
        text = m.export_lp()
        assert "Minimize" in text
        assert ">= 1" in text
        assert "Bounds" in text

    def test_binary_section(self):
        m = MilpModel()
        m.add_variable("flag", VarKind.BINARY)
        m.set_objective([])
        text = m.export_lp()
        assert "Binaries" in text and "flag" in text

    def test_tags_emitted_as_comments(self):
        m = MilpModel()
        x = m.add_variable("x")
        m.add_constraint([(x, 1.0)], Sense.LE, 1.0, tag="validity")
        assert "validity" in m.export_lp()

    def test_empty_model_rejected(self):
        with pytest.raises(ModelError):
            MilpModel().export_lp()

    def test_round_trip_against_external_solver(self, rng):
        # 20 random MILPs/LPs: exported text re-parsed and solved with scipy
        # must match the built-in optimum to 1e-6
        for trial in range(20):
            n = int(rng.integers(2, 6))
            m_rows = int(rng.integers(1, 5))
            m = MilpModel(f"rt{trial}")
            vs = []
            for i in range(n):
                kind = VarKind.BINARY if rng.uniform() < 0.4 else VarKind.CONTINUOUS
                vs.append(m.add_variable(f"v{i}", kind, 0.0, float(rng.uniform(0.5, 3.0))))
            for _ in range(m_rows):
                coeffs = [(v, round(float(rng.normal()), 3)) for v in vs]
                sense = (Sense.LE, Sense.GE, Sense.EQ)[int(rng.integers(0, 3))]
                m.add_constraint(coeffs, sense, round(float(rng.normal()), 3))
            m.set_objective([(v, round(float(rng.normal()), 3)) for v in vs])
            mine = solve_milp(m.freeze(), SolveOptions())
            status, obj = solve_parsed(parse_lp(m.export_lp()))
            assert status == ("optimal" if mine.status == "optimal" else status)
            if mine.status == "optimal":
                assert status == "optimal"
                assert obj == pytest.approx(mine.best_objective, abs=1e-6)
            else:
                assert mine.status == "infeasible" and status == "infeasible"
