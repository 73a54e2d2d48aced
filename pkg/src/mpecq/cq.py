"""Constraint-qualification checks at a feasible MPEC point.

Six checks are provided, each returning a tri-state verdict with a
certificate whenever the verdict is "fails":

  MPEC_LICQ        active-gradient bundle linearly independent
  MPEC_MFCQ_TNLP   bundle positively linearly independent (tightened NLP)
  MPEC_MFCQ_RNLP   MFCQ of the relaxed NLP at the point
  NNAMCQ           no nonzero abnormal multiplier (full sign enumeration)
  MPEC_GMFCQ       direction-based generalized MFCQ over biactive partitions
  MPEC_ACQ_AFFINE  Abadie CQ via the affine shortcut only

"undecided" occurs only when a biactive enumeration exceeds the branch
cap, when the ACQ shortcut does not apply, or (for the model-specific
theorem checkers elsewhere) when a theorem hypothesis is not
established.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .kernels import (LinearProgram, make_query, numerical_rank,
                      signed_combination_exists)
from .model import (ActivePattern, PointEvaluation, Tolerances,
                    gradient_bundle_tnlp)

CQ_NAMES = ("MPEC_LICQ", "MPEC_MFCQ_TNLP", "MPEC_MFCQ_RNLP", "NNAMCQ",
            "MPEC_GMFCQ", "MPEC_ACQ_AFFINE")

DEFAULT_BRANCH_CAP = 12

# audited implication edges: antecedent holds => consequent cannot fail
IMPLICATION_EDGES = (
    ("MPEC_LICQ", "MPEC_MFCQ_TNLP"),
    ("MPEC_MFCQ_TNLP", "MPEC_GMFCQ"),
    ("MPEC_GMFCQ", "NNAMCQ"),
    ("NNAMCQ", "MPEC_GMFCQ"),
    ("MPEC_GMFCQ", "MPEC_MFCQ_RNLP"),
)


@dataclass(frozen=True)
class CqVerdict:
    name: str
    status: str  # "holds" | "fails" | "undecided"
    certificate: dict | None = None
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "certificate": self.certificate, "notes": list(self.notes)}


@dataclass(frozen=True)
class CqReport:
    verdicts: dict
    implication_violations: tuple

    def to_dict(self) -> dict:
        return {"verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
                "implication_violations": list(self.implication_violations)}


def _witness_cert(witness, labels) -> dict:
    coeffs = witness.coefficients
    return {
        "coefficients": [float(c) for c in coeffs],
        "labels": [list(lab) for lab in labels],
        "margin": witness.margin,
        "residual": witness.residual,
    }


def check_mpec_licq(ev: PointEvaluation, pattern: ActivePattern,
                    tol: Tolerances) -> CqVerdict:
    """Linear independence of the active gradient bundle."""
    bundle = gradient_bundle_tnlp(ev, pattern)
    nrows = bundle.rows.shape[0]
    rr = numerical_rank(bundle.rows, tol.rank_rel_tol)
    if rr.rank == nrows:
        return CqVerdict("MPEC_LICQ", "holds",
                         certificate={"rank": rr.rank, "rows": nrows})
    cert = {
        "rank": rr.rank,
        "rows": nrows,
        "null_witness": [float(w) for w in rr.null_witness],
        "labels": [list(pv) for pv in bundle.provenance],
    }
    return CqVerdict("MPEC_LICQ", "fails", certificate=cert)


def check_mpec_mfcq_t(ev: PointEvaluation, pattern: ActivePattern,
                      tol: Tolerances) -> CqVerdict:
    """Positive linear independence of the tightened-NLP bundle.

    Fails exactly when some nonzero combination with nonnegative weights
    on the active g rows and free weights on the equality-like rows
    vanishes.
    """
    bundle = gradient_bundle_tnlp(ev, pattern)
    nonneg = [bundle.rows[i] for i, c in enumerate(bundle.classes) if c == "signed"]
    free = [bundle.rows[i] for i, c in enumerate(bundle.classes) if c == "free"]
    labels = ([pv for pv, c in zip(bundle.provenance, bundle.classes) if c == "signed"]
              + [pv for pv, c in zip(bundle.provenance, bundle.classes) if c == "free"])
    query = make_query(ev.dims.n, nonneg=nonneg, free=free)
    witness = signed_combination_exists(query, rank_rel_tol=tol.rank_rel_tol,
                                        strict_margin_eps=tol.strict_margin_eps)
    if witness.exists:
        return CqVerdict("MPEC_MFCQ_TNLP", "fails",
                         certificate=_witness_cert(witness, labels))
    return CqVerdict("MPEC_MFCQ_TNLP", "holds")


def check_mpec_mfcq_r(ev: PointEvaluation, pattern: ActivePattern,
                      tol: Tolerances) -> CqVerdict:
    """MFCQ of the relaxed NLP.

    Active inequalities of the relaxed problem are g_i <= 0 and, on the
    biactive set, G_i >= 0 and H_i >= 0.  Positive linear dependence is
    tested on outward rows, which for the lower bounds are the inward
    normals -grad G_i and -grad H_i.  With no biactive pairs this is
    identical to the tightened-NLP test.
    """
    nonneg, labels = [], []
    for i in pattern.I_g:
        nonneg.append(ev.g_grads[i]); labels.append(("g", i))
    for i in pattern.I_GH:
        nonneg.append(-ev.G_grads[i]); labels.append(("G_inward", i))
    for i in pattern.I_GH:
        nonneg.append(-ev.H_grads[i]); labels.append(("H_inward", i))
    free = []
    for i in range(ev.dims.p):
        free.append(ev.h_grads[i]); labels.append(("h", i))
    for i in pattern.I_G:
        free.append(ev.G_grads[i]); labels.append(("G", i))
    for i in pattern.I_H:
        free.append(ev.H_grads[i]); labels.append(("H", i))
    query = make_query(ev.dims.n, nonneg=nonneg, free=free)
    witness = signed_combination_exists(query, rank_rel_tol=tol.rank_rel_tol,
                                        strict_margin_eps=tol.strict_margin_eps)
    if witness.exists:
        return CqVerdict("MPEC_MFCQ_RNLP", "fails",
                         certificate=_witness_cert(witness, labels))
    return CqVerdict("MPEC_MFCQ_RNLP", "holds")


def _nnamcq_branch_query(ev, pattern, branch):
    """Assemble the sign-class query for one biactive branch.

    branch[i] is 0 (both multipliers strictly positive), 1 (gamma pinned
    to zero, nu free), or 2 (nu pinned to zero, gamma free).  Multiplier
    conventions: coefficient on +grad g is lambda_g, on +grad h is
    lambda_h, on -grad G is lambda_G, on -grad H is lambda_H.
    """
    nonneg, strict, zero, free = [], [], [], []
    labels_n, labels_s, labels_z, labels_f = [], [], [], []
    for i in pattern.I_g:
        nonneg.append(ev.g_grads[i]); labels_n.append(("lambda_g", i))
    for i, choice in zip(pattern.I_GH, branch):
        if choice == 0:
            strict.append(-ev.G_grads[i]); labels_s.append(("lambda_G", i))
            strict.append(-ev.H_grads[i]); labels_s.append(("lambda_H", i))
        elif choice == 1:
            zero.append(-ev.G_grads[i]); labels_z.append(("lambda_G", i))
            free.append(-ev.H_grads[i]); labels_f.append(("lambda_H", i))
        else:
            zero.append(-ev.H_grads[i]); labels_z.append(("lambda_H", i))
            free.append(-ev.G_grads[i]); labels_f.append(("lambda_G", i))
    for j in range(ev.dims.p):
        free.append(ev.h_grads[j]); labels_f.append(("lambda_h", j))
    for i in pattern.I_G:
        free.append(-ev.G_grads[i]); labels_f.append(("lambda_G", i))
    for i in pattern.I_H:
        free.append(-ev.H_grads[i]); labels_f.append(("lambda_H", i))
    query = make_query(ev.dims.n, nonneg=nonneg, strict=strict, zero=zero, free=free)
    return query, labels_n + labels_s + labels_z + labels_f


def check_nnamcq(ev: PointEvaluation, pattern: ActivePattern, tol: Tolerances,
                 cap: int = DEFAULT_BRANCH_CAP) -> CqVerdict:
    """No nonzero abnormal multiplier condition.

    Each biactive pair allows its multiplier pair to be both strictly
    positive or to have one component pinned at zero, giving three
    branches per pair.  The condition fails as soon as one branch
    admits a nonzero multiplier vector; it holds only when every branch
    is clean.
    """
    k = len(pattern.I_GH)
    if k > cap:
        return CqVerdict("NNAMCQ", "undecided",
                         notes=(f"biactive count {k} exceeds enumeration cap {cap}",))
    for branch in itertools.product((0, 1, 2), repeat=k):
        query, labels = _nnamcq_branch_query(ev, pattern, branch)
        witness = signed_combination_exists(query, rank_rel_tol=tol.rank_rel_tol,
                                            strict_margin_eps=tol.strict_margin_eps)
        if witness.exists:
            cert = _witness_cert(witness, labels)
            cert["branch"] = {str(i): ("both_strict", "gamma_zero", "nu_zero")[c]
                              for i, c in zip(pattern.I_GH, branch)}
            cert["multipliers"] = _multipliers_from_witness(witness, labels)
            return CqVerdict("NNAMCQ", "fails", certificate=cert)
    return CqVerdict("NNAMCQ", "holds",
                     certificate={"branches_checked": 3 ** k})


def _multipliers_from_witness(witness, labels) -> dict:
    out: dict = {}
    for (kind, idx), coeff in zip(labels, witness.coefficients):
        out.setdefault(kind, {})[str(idx)] = float(coeff)
    return out


def _direction_margin(n: int, eq_rows, geq_rows, strict_row) -> float:
    """max t over directions d with eq.d = 0, geq.d >= 0, strict.d >= t.

    Always feasible (d = 0, t = 0); t is capped at 1, so the returned
    margin is in [0, 1].
    """
    lp = LinearProgram()
    dv = lp.add_vars(n, free=True)
    tv = lp.add_var()

    def row_coeffs(row, extra=None):
        coeffs = {dv[j]: float(row[j]) for j in range(n) if row[j]}
        if extra:
            coeffs.update(extra)
        return coeffs

    for row in eq_rows:
        lp.add_eq(row_coeffs(row), 0.0)
    for row in geq_rows:
        slack = lp.add_var()
        lp.add_eq(row_coeffs(row, {slack: -1.0}), 0.0)
    slack = lp.add_var()
    lp.add_eq(row_coeffs(strict_row, {tv: -1.0, slack: -1.0}), 0.0)
    feasible, _, margin = lp.solve(maximize=tv, cap=1.0)
    if not feasible:  # cannot happen: d = 0 is feasible
        raise RuntimeError("direction LP unexpectedly infeasible")
    return float(margin)


def check_mpec_gmfcq(ev: PointEvaluation, pattern: ActivePattern, tol: Tolerances,
                     cap: int = DEFAULT_BRANCH_CAP) -> CqVerdict:
    """Direction-based generalized MFCQ.

    Condition (i): every partition (P, Q, R) of the biactive set with
    R nonempty admits a direction d with grad g.d <= 0 on active g,
    grad h.d = 0, grad G.d = 0 on I_G and Q, grad H.d = 0 on I_H and P,
    grad G.d >= 0 and grad H.d >= 0 on R with at least one strict.

    Condition (ii): for every partition (P, Q) of the biactive set the
    rows {grad h, grad G on I_G+Q, grad H on I_H+P} are linearly
    independent and some direction in their null space strictly
    decreases every active g (vacuous when no g is active).
    """
    k = len(pattern.I_GH)
    if k > cap:
        return CqVerdict("MPEC_GMFCQ", "undecided",
                         notes=(f"biactive count {k} exceeds enumeration cap {cap}",))
    n = ev.dims.n
    h_rows = [ev.h_grads[j] for j in range(ev.dims.p)]
    g_neg = [-ev.g_grads[i] for i in pattern.I_g]

    for assign in itertools.product((0, 1, 2), repeat=k):
        P = [i for i, c in zip(pattern.I_GH, assign) if c == 0]
        Q = [i for i, c in zip(pattern.I_GH, assign) if c == 1]
        R = [i for i, c in zip(pattern.I_GH, assign) if c == 2]
        if not R:
            continue
        eq = (h_rows + [ev.G_grads[i] for i in pattern.I_G]
              + [ev.G_grads[i] for i in Q]
              + [ev.H_grads[i] for i in pattern.I_H]
              + [ev.H_grads[i] for i in P])
        cone = ([ev.G_grads[i] for i in R] + [ev.H_grads[i] for i in R])
        satisfied = False
        for idx in range(len(cone)):
            margin = _direction_margin(n, eq, g_neg + cone[:idx] + cone[idx + 1:],
                                       cone[idx])
            if margin >= tol.strict_margin_eps:
                satisfied = True
                break
        if not satisfied:
            return CqVerdict("MPEC_GMFCQ", "fails", certificate={
                "condition": "i", "P": P, "Q": Q, "R": R,
                "detail": "no direction enters the biactive cone strictly"})

    for assign in itertools.product((0, 1), repeat=k):
        P = [i for i, c in zip(pattern.I_GH, assign) if c == 0]
        Q = [i for i, c in zip(pattern.I_GH, assign) if c == 1]
        eq_rows = (h_rows + [ev.G_grads[i] for i in sorted(set(pattern.I_G) | set(Q))]
                   + [ev.H_grads[i] for i in sorted(set(pattern.I_H) | set(P))])
        if eq_rows:
            mat = np.vstack(eq_rows)
            rr = numerical_rank(mat, tol.rank_rel_tol)
            if rr.rank < mat.shape[0]:
                return CqVerdict("MPEC_GMFCQ", "fails", certificate={
                    "condition": "ii-independence", "P": P, "Q": Q,
                    "null_witness": [float(w) for w in rr.null_witness]})
        if pattern.I_g:
            # all active g strictly decreasing along d: fold them into one
            # margin problem per candidate is unnecessary; require the
            # minimum of -grad g . d to exceed the margin
            lp = LinearProgram()
            dv = lp.add_vars(n, free=True)
            tv = lp.add_var()
            for row in eq_rows:
                lp.add_eq({dv[j]: float(row[j]) for j in range(n) if row[j]}, 0.0)
            for i in pattern.I_g:
                slack = lp.add_var()
                coeffs = {dv[j]: float(-ev.g_grads[i][j]) for j in range(n)
                          if ev.g_grads[i][j]}
                coeffs[tv] = -1.0
                coeffs[slack] = -1.0
                lp.add_eq(coeffs, 0.0)
            feasible, _, margin = lp.solve(maximize=tv, cap=1.0)
            if not feasible or margin is None or margin < tol.strict_margin_eps:
                return CqVerdict("MPEC_GMFCQ", "fails", certificate={
                    "condition": "ii-direction", "P": P, "Q": Q,
                    "detail": "no null-space direction strictly decreases all active g"})

    return CqVerdict("MPEC_GMFCQ", "holds",
                     certificate={"partitions_i": 3 ** k - 2 ** k,
                                  "partitions_ii": 2 ** k})


def check_acq_affine(is_affine: bool | None) -> CqVerdict:
    """Abadie CQ via the affine shortcut.

    Affine constraint data makes the linearized and the actual tangent
    cone coincide, so the CQ holds at every feasible point.  For
    nonlinear or unknown instances the verdict is undecided; no tangent
    cone computation is attempted.
    """
    if is_affine is True:
        return CqVerdict("MPEC_ACQ_AFFINE", "holds",
                         notes=("all constraints affine",))
    return CqVerdict("MPEC_ACQ_AFFINE", "undecided",
                     notes=("affine shortcut not applicable",))


def audit_implications(verdicts: dict) -> tuple:
    """Check the implication lattice on decided verdicts.

    An edge is violated when the antecedent holds and the consequent
    fails; undecided verdicts never violate anything.
    """
    violations = []
    for ante, cons in IMPLICATION_EDGES:
        va = verdicts.get(ante)
        vc = verdicts.get(cons)
        if va is not None and vc is not None:
            if va.status == "holds" and vc.status == "fails":
                violations.append(f"{ante} holds but {cons} fails")
    return tuple(violations)


def run_all_checks(ev: PointEvaluation, pattern: ActivePattern, tol: Tolerances,
                   cap: int = DEFAULT_BRANCH_CAP,
                   is_affine: bool | None = None) -> CqReport:
    """Run the six checks and audit the implication lattice."""
    verdicts = {
        "MPEC_LICQ": check_mpec_licq(ev, pattern, tol),
        "MPEC_MFCQ_TNLP": check_mpec_mfcq_t(ev, pattern, tol),
        "MPEC_MFCQ_RNLP": check_mpec_mfcq_r(ev, pattern, tol),
        "NNAMCQ": check_nnamcq(ev, pattern, tol, cap),
        "MPEC_GMFCQ": check_mpec_gmfcq(ev, pattern, tol, cap),
        "MPEC_ACQ_AFFINE": check_acq_affine(is_affine),
    }
    return CqReport(verdicts, audit_implications(verdicts))
