"""Stationarity classification and multiplier-form equivalence tests."""

import numpy as np
import pytest

from mpecq import (MpecDimensions, PointEvaluation, Tolerances,
                   classify_active, classify_stationarity,
                   verify_kkt_equivalence, witness_residual, witness_satisfies)
from mpecq.fixtures import fixture_e1, fixture_e2, fixture_e3

TOL = Tolerances()


def one_pair_point(grad_f):
    """Single biactive pair with axis gradients: multipliers are unique."""
    ev = PointEvaluation(MpecDimensions(2, 0, 0, 1), np.zeros(2),
                         np.zeros(0), np.zeros(0), np.zeros(1), np.zeros(1),
                         np.zeros((0, 2)), np.zeros((0, 2)),
                         np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    return ev, classify_active(ev, TOL), np.asarray(grad_f, dtype=float)


class TestFixtureStationarity:
    def test_e1_strong_with_unit_multipliers(self):
        fx = fixture_e1()
        pattern = classify_active(fx.evaluation, TOL)
        report = classify_stationarity(fx.evaluation, pattern, fx.grad_f, TOL)
        assert report.strongest == "strong"
        w = report.witness
        assert w["gamma"]["0"] == pytest.approx(1.0, abs=1e-9)
        assert w["nu"]["0"] == pytest.approx(1.0, abs=1e-9)
        assert w["residual"] <= 1e-9

    def test_e2_strong_witness_is_valid(self):
        fx = fixture_e2()
        pattern = classify_active(fx.evaluation, TOL)
        report = classify_stationarity(fx.evaluation, pattern, fx.grad_f, TOL)
        assert report.strongest == "strong"
        assert report.classes == {"weak": "holds", "C": "holds",
                                  "M": "holds", "strong": "holds"}
        # multiple vertices solve this system; assert validity, not values
        assert report.witness["residual"] <= 1e-6
        for cls in ("strong", "M", "C", "weak"):
            assert witness_satisfies(fx.evaluation, pattern, fx.grad_f,
                                     report.witness, cls, TOL)

    def test_e3_strong(self):
        fx = fixture_e3()
        pattern = classify_active(fx.evaluation, TOL)
        report = classify_stationarity(fx.evaluation, pattern, fx.grad_f, TOL)
        assert report.strongest == "strong"


class TestClassSeparation:
    """Axis-gradient pair: gamma = grad_f[0], nu = grad_f[1], uniquely."""

    def test_strong_point(self):
        ev, pattern, gf = one_pair_point([1.0, 2.0])
        assert classify_stationarity(ev, pattern, gf, TOL).strongest == "strong"

    def test_m_but_not_strong(self):
        ev, pattern, gf = one_pair_point([-1.0, 0.0])
        report = classify_stationarity(ev, pattern, gf, TOL)
        assert report.strongest == "M"
        assert report.classes["strong"] == "fails"

    def test_c_but_not_m(self):
        ev, pattern, gf = one_pair_point([-1.0, -1.0])
        report = classify_stationarity(ev, pattern, gf, TOL)
        assert report.strongest == "C"
        assert report.classes["M"] == "fails"
        assert report.classes["weak"] == "holds"

    def test_weak_but_not_c(self):
        ev, pattern, gf = one_pair_point([-1.0, 1.0])
        report = classify_stationarity(ev, pattern, gf, TOL)
        assert report.strongest == "weak"
        assert report.classes["C"] == "fails"

    def test_not_stationary(self):
        # H = v2 active, G inactive: gamma pinned to 0, nu free, but
        # grad_f has a component outside span(grad_H)
        ev = PointEvaluation(MpecDimensions(2, 0, 0, 1), np.zeros(2),
                             np.zeros(0), np.zeros(0), np.array([1.0]),
                             np.zeros(1), np.zeros((0, 2)), np.zeros((0, 2)),
                             np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        pattern = classify_active(ev, TOL)
        report = classify_stationarity(ev, pattern, np.array([1.0, 0.0]), TOL)
        assert report.strongest == "not_stationary"
        assert set(report.classes.values()) == {"fails"}
        assert report.witness is None


class TestWitnessChecks:
    def test_residual_recomputation(self):
        fx = fixture_e1()
        pattern = classify_active(fx.evaluation, TOL)
        report = classify_stationarity(fx.evaluation, pattern, fx.grad_f, TOL)
        res = witness_residual(fx.evaluation, pattern, fx.grad_f, report.witness)
        assert res == pytest.approx(report.witness["residual"], abs=1e-12)

    def test_monotonicity_of_class_predicates(self):
        ev, pattern, gf = one_pair_point([2.0, 3.0])
        report = classify_stationarity(ev, pattern, gf, TOL)
        for cls in ("strong", "M", "C", "weak"):
            assert witness_satisfies(ev, pattern, gf, report.witness, cls, TOL)

    def test_corrupted_witness_fails_predicate(self):
        ev, pattern, gf = one_pair_point([2.0, 3.0])
        report = classify_stationarity(ev, pattern, gf, TOL)
        bad = {k: (dict(v) if isinstance(v, dict) else v)
               for k, v in report.witness.items()}
        bad["gamma"]["0"] = -5.0
        assert not witness_satisfies(ev, pattern, gf, bad, "strong", TOL)


class TestBranchCap:
    def test_cap_leaves_m_and_c_undecided(self):
        k = 13
        G = np.zeros((k, 2))
        H = np.zeros((k, 2))
        G[0] = [1.0, 0.0]
        H[0] = [0.0, 1.0]
        ev = PointEvaluation(MpecDimensions(2, 0, 0, k), np.zeros(2),
                             np.zeros(0), np.zeros(0), np.zeros(k), np.zeros(k),
                             np.zeros((0, 2)), np.zeros((0, 2)), G, H)
        pattern = classify_active(ev, TOL)
        report = classify_stationarity(ev, pattern, np.array([-1.0, 1.0]), TOL)
        assert report.classes["weak"] == "holds"
        assert report.classes["strong"] == "fails"
        assert report.classes["M"] == "undecided"
        assert report.classes["C"] == "undecided"
        assert report.strongest == "weak"


class TestKktEquivalence:
    @pytest.mark.parametrize("make", [fixture_e1, fixture_e2, fixture_e3])
    def test_fixtures_agree(self, make):
        fx = make()
        pattern = classify_active(fx.evaluation, TOL)
        out = verify_kkt_equivalence(fx.evaluation, pattern, fx.grad_f, TOL)
        assert out["agree"]
        assert out["strong_feasible"] and out["kkt_feasible"]

    def test_agreement_when_both_infeasible(self):
        ev, pattern, gf = one_pair_point([-1.0, 1.0])  # weak only
        out = verify_kkt_equivalence(ev, pattern, gf, TOL)
        assert out["agree"]
        assert not out["strong_feasible"]
        assert not out["kkt_feasible"]
