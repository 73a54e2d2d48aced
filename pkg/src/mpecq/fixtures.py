"""Hand-checkable fixture instances with frozen expected verdicts.

Each fixture is small enough that every verdict below can be rederived
with pencil and paper from the gradient rows; the expected tables are
frozen here and the suite compares live checker output against them.
All three points sit at the origin and use 0-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cq import run_all_checks
from .model import (MpecDimensions, PointEvaluation, Tolerances,
                    classify_active)
from .stationarity import classify_stationarity


@dataclass(frozen=True)
class Fixture:
    name: str
    evaluation: PointEvaluation
    grad_f: np.ndarray
    is_affine: bool
    expected_cq: dict
    expected_stationarity: str


def fixture_e1() -> Fixture:
    """One biactive pair plus two active inequalities in R^3.

    Rows (1,0,0), (1,1,0), (0,1,0), (0,0,1) are four vectors in R^3, so
    LICQ fails on dimension grounds, yet only the trivial nonnegative
    combination vanishes, so every weaker condition holds.  The
    objective gradient (0,1,1) is matched exactly by gamma = nu = 1.
    """
    dims = MpecDimensions(3, 2, 0, 1)
    ev = PointEvaluation(
        dims,
        np.zeros(3),
        np.zeros(2), np.zeros(0),
        np.zeros(1), np.zeros(1),
        np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]),
        np.zeros((0, 3)),
        np.array([[0.0, 1.0, 0.0]]),
        np.array([[0.0, 0.0, 1.0]]),
    )
    expected = {"MPEC_LICQ": "fails", "MPEC_MFCQ_TNLP": "holds",
                "MPEC_MFCQ_RNLP": "holds", "NNAMCQ": "holds",
                "MPEC_GMFCQ": "holds", "MPEC_ACQ_AFFINE": "holds"}
    return Fixture("E1", ev, np.array([0.0, 1.0, 1.0]), True, expected, "strong")


def fixture_e2() -> Fixture:
    """Tightened-NLP MFCQ failure that every relaxation-side test survives.

    With g = -v1 - v2 active and the biactive pair gradients (1,0) and
    (0,1), the combination lambda*grad_g + gamma*grad_G + nu*grad_H = 0
    has the nonzero solution (1,1,1) when gamma and nu are free, so
    MFCQ for the tightened NLP fails.  Orienting the biactive rows
    inward (relaxed NLP side) leaves only the trivial combination, and
    all three one-sign branches are clean, so MFCQ-RNLP, NNAMCQ and
    GMFCQ hold.
    """
    dims = MpecDimensions(2, 1, 0, 1)
    ev = PointEvaluation(
        dims,
        np.zeros(2),
        np.zeros(1), np.zeros(0),
        np.zeros(1), np.zeros(1),
        np.array([[-1.0, -1.0]]),
        np.zeros((0, 2)),
        np.array([[1.0, 0.0]]),
        np.array([[0.0, 1.0]]),
    )
    expected = {"MPEC_LICQ": "fails", "MPEC_MFCQ_TNLP": "fails",
                "MPEC_MFCQ_RNLP": "holds", "NNAMCQ": "holds",
                "MPEC_GMFCQ": "holds", "MPEC_ACQ_AFFINE": "holds"}
    return Fixture("E2", ev, np.array([1.0, 1.0]), True, expected, "strong")


def fixture_e3() -> Fixture:
    """Two biactive pairs with a shared gradient direction in R^3.

    grad_G1 = grad_G2 = (1,0,0), so the free-coefficient branch with
    both nu fixed to zero carries the dependence (1, 0, -1, 0) over
    (gamma_1, nu_1, gamma_2, nu_2): NNAMCQ fails.  The inward-oriented
    one-sign test still passes (all rows point into distinct negative
    orthant directions), so MFCQ-RNLP holds.  G2 = v1 - v2^2 makes the
    data non-affine, so the affine polyhedrality route is unavailable.
    """
    dims = MpecDimensions(3, 0, 0, 2)
    ev = PointEvaluation(
        dims,
        np.zeros(3),
        np.zeros(0), np.zeros(0),
        np.zeros(2), np.zeros(2),
        np.zeros((0, 3)),
        np.zeros((0, 3)),
        np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
    )
    expected = {"MPEC_LICQ": "fails", "MPEC_MFCQ_TNLP": "fails",
                "MPEC_MFCQ_RNLP": "holds", "NNAMCQ": "fails",
                "MPEC_GMFCQ": "fails", "MPEC_ACQ_AFFINE": "undecided"}
    return Fixture("E3", ev, np.array([1.0, 1.0, 1.0]), False, expected, "strong")


def all_fixtures() -> tuple:
    return (fixture_e1(), fixture_e2(), fixture_e3())


def run_fixture_suite(tol: Tolerances | None = None) -> dict:
    """Run every checker on every fixture and diff against the tables.

    Returns {"fixtures": {name: {...}}, "ok": bool}; each fixture entry
    lists computed verdicts, the expected table and any mismatches.
    """
    tol = tol or Tolerances()
    out = {}
    all_ok = True
    for fx in all_fixtures():
        pattern = classify_active(fx.evaluation, tol)
        report = run_all_checks(fx.evaluation, pattern, tol,
                                is_affine=fx.is_affine)
        stat = classify_stationarity(fx.evaluation, pattern, fx.grad_f, tol)
        computed = {name: v.status for name, v in report.verdicts.items()}
        mismatches = [
            {"check": name, "expected": want, "computed": computed.get(name)}
            for name, want in fx.expected_cq.items()
            if computed.get(name) != want
        ]
        if stat.strongest != fx.expected_stationarity:
            mismatches.append({"check": "stationarity",
                               "expected": fx.expected_stationarity,
                               "computed": stat.strongest})
        if report.implication_violations:
            mismatches.append({"check": "implication_lattice",
                               "expected": [],
                               "computed": list(report.implication_violations)})
        ok = not mismatches
        all_ok = all_ok and ok
        out[fx.name] = {"cq": computed, "stationarity": stat.strongest,
                        "expected_cq": dict(fx.expected_cq),
                        "expected_stationarity": fx.expected_stationarity,
                        "mismatches": mismatches, "ok": ok}
    return {"fixtures": out, "ok": all_ok}
