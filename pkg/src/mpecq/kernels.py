"""Deterministic numeric kernels: rank, definiteness, and small dense LPs.

Every qualification and stationarity test in this package reduces to a
question about a finite collection of gradient rows: is the collection
linearly independent, does a sign-constrained null combination exist, is
a direction with prescribed strict margins available.  The kernels here
answer those questions with explicit certificates, and every certificate
is re-verified arithmetically before it is returned, so callers never
have to trust the solver internals.

The LP engine is a dense two-phase simplex with Bland's rule.  The
problems are tiny (tens of rows) and the priority is determinism and
witness extraction, which rules out floating pivoting heuristics and
external solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import WitnessVerificationError

# Residual slack allowed when re-verifying any returned witness.
WITNESS_RESIDUAL_SLACK = 1e-6

_PIVOT_TOL = 1e-10
_ENTER_TOL = 1e-10
_DRIVE_TOL = 1e-9


@dataclass(frozen=True)
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None


def _pivot(T: np.ndarray, z: np.ndarray | None, i: int, j: int) -> None:
    T[i] = T[i] / T[i, j]
    col = T[:, j].copy()
    col[i] = 0.0
    T -= np.outer(col, T[i])
    if z is not None:
        z -= z[j] * T[i]


def _pivot_loop(T, basis, z, max_iter):
    ncols = T.shape[1] - 1
    for _ in range(max_iter):
        cand = np.nonzero(z[:ncols] < -_ENTER_TOL)[0]
        if cand.size == 0:
            return "optimal"
        j = int(cand[0])  # Bland: smallest eligible index
        col = T[:, j]
        pos = np.nonzero(col > _PIVOT_TOL)[0]
        if pos.size == 0:
            return "unbounded"
        ratios = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * (1.0 + abs(rmin))]
        i = int(ties[np.argmin(basis[ties])])
        _pivot(T, z, i, j)
        basis[i] = j
    raise RuntimeError("simplex did not terminate within the iteration cap")


def simplex_solve(A, b, c, *, max_iter: int = 100000) -> SimplexResult:
    """Solve min c.x subject to A x = b, x >= 0.

    Dense tableau, phase 1 with artificial variables, Bland's rule in
    both phases (guarantees termination on degenerate tableaus).  Rows
    are equilibrated to unit inf-norm first; that rescaling does not
    change the feasible set.
    """
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).ravel()
    c = np.array(c, dtype=float).ravel()
    m, n = A.shape
    if b.shape[0] != m or c.shape[0] != n:
        raise ValueError("inconsistent LP dimensions")
    if m == 0:
        if np.all(c >= -_ENTER_TOL):
            return SimplexResult("optimal", np.zeros(n), 0.0)
        return SimplexResult("unbounded", None, None)

    scale = np.maximum(np.abs(A).max(axis=1, initial=0.0), np.abs(b))
    scale = np.where(scale < 1e-300, 1.0, scale)
    A = A / scale[:, None]
    b = b / scale
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = np.arange(n, n + m)
    z = np.zeros(n + m + 1)
    z[:n] = -T[:, :n].sum(axis=0)
    z[-1] = -b.sum()

    status = _pivot_loop(T, basis, z, max_iter)
    if status != "optimal":  # phase 1 is always bounded below by 0
        raise RuntimeError("phase 1 reported " + status)
    if -z[-1] > 1e-8 * max(1.0, m):
        return SimplexResult("infeasible", None, None)

    # Drive artificials out of the basis; rows that cannot pivot on an
    # original column are redundant equalities and are dropped.
    drop = []
    for i in range(m):
        if basis[i] >= n:
            row = np.abs(T[i, :n])
            cand = np.nonzero(row > _DRIVE_TOL)[0]
            if cand.size:
                _pivot(T, None, i, int(cand[0]))
                basis[i] = int(cand[0])
            else:
                drop.append(i)
    keep = [i for i in range(m) if i not in drop]
    T = np.hstack([T[keep][:, :n], T[keep][:, -1:]])
    basis = basis[keep]

    z = np.concatenate([c, [0.0]])
    for i, bi in enumerate(basis):
        z -= c[bi] * T[i]
    status = _pivot_loop(T, basis, z, max_iter)
    if status == "unbounded":
        return SimplexResult("unbounded", None, None)
    x = np.zeros(n)
    x[basis] = np.maximum(T[:, -1], 0.0)
    return SimplexResult("optimal", x, float(c @ x))


class LinearProgram:
    """Equality-form LP over named variables, nonnegative by default.

    Free variables are split into positive and negative parts
    internally; callers see a single signed value per variable.
    """

    def __init__(self):
        self._free: list[bool] = []
        self._rows: list[tuple[dict[int, float], float]] = []

    def add_var(self, free: bool = False) -> int:
        self._free.append(bool(free))
        return len(self._free) - 1

    def add_vars(self, count: int, free: bool = False) -> list[int]:
        return [self.add_var(free) for _ in range(count)]

    def add_eq(self, coeffs: dict[int, float], rhs: float) -> None:
        self._rows.append((dict(coeffs), float(rhs)))

    def solve(self, maximize: int | None = None, cap: float | None = 1.0):
        """Return (feasible, values, objective_value).

        With `maximize`, phase 2 maximizes that variable; `cap` bounds
        it by an extra slack row so the LP stays bounded.  An unbounded
        maximization (cap=None) returns values=None and objective=inf.
        """
        nvars = len(self._free)
        plus = np.zeros(nvars, dtype=int)
        minus = np.full(nvars, -1, dtype=int)
        ncols = 0
        for k in range(nvars):
            plus[k] = ncols
            ncols += 1
            if self._free[k]:
                minus[k] = ncols
                ncols += 1
        rows = list(self._rows)
        cap_slack = None
        if maximize is not None and cap is not None:
            cap_slack = ncols
            ncols += 1
        A = np.zeros((len(rows) + (1 if cap_slack is not None else 0), ncols))
        b = np.zeros(A.shape[0])
        for r, (coeffs, rhs) in enumerate(rows):
            for k, v in coeffs.items():
                A[r, plus[k]] += v
                if minus[k] >= 0:
                    A[r, minus[k]] -= v
            b[r] = rhs
        if cap_slack is not None:
            r = len(rows)
            A[r, plus[maximize]] = 1.0
            if minus[maximize] >= 0:
                A[r, minus[maximize]] = -1.0
            A[r, cap_slack] = 1.0
            b[r] = cap
        c = np.zeros(ncols)
        if maximize is not None:
            c[plus[maximize]] = -1.0
            if minus[maximize] >= 0:
                c[minus[maximize]] = 1.0
        res = simplex_solve(A, b, c)
        if res.status == "infeasible":
            return False, None, None
        if res.status == "unbounded":
            return True, None, float("inf")
        values = res.x[plus]
        has_minus = minus >= 0
        values[has_minus] -= res.x[minus[has_minus]]
        obj = values[maximize] if maximize is not None else 0.0
        return True, values, float(obj)


@dataclass(frozen=True)
class LpCertificate:
    feasible: bool
    x: np.ndarray | None
    margin: float | None


def lp_feasible(eq_matrix, eq_rhs, n_vars: int, nonneg_vars=(),
                maximize_var: int | None = None, cap: float | None = 1.0) -> LpCertificate:
    """Feasibility of {A x = b, x_i >= 0 for i in nonneg_vars}.

    Variables outside `nonneg_vars` are free.  With `maximize_var`, the
    margin of that variable is maximized (capped so the LP stays
    bounded; an uncapped unbounded ray reports margin=inf).
    """
    eq_matrix = np.array(eq_matrix, dtype=float, ndmin=2)
    eq_rhs = np.array(eq_rhs, dtype=float).ravel()
    nonneg = set(int(i) for i in nonneg_vars)
    lp = LinearProgram()
    idx = [lp.add_var(free=(k not in nonneg)) for k in range(n_vars)]
    for r in range(eq_matrix.shape[0]):
        coeffs = {idx[k]: eq_matrix[r, k] for k in range(n_vars) if eq_matrix[r, k] != 0.0}
        lp.add_eq(coeffs, eq_rhs[r])
    feasible, values, obj = lp.solve(
        maximize=None if maximize_var is None else idx[maximize_var], cap=cap)
    if not feasible:
        return LpCertificate(False, None, None)
    if values is None:
        return LpCertificate(True, None, float("inf"))
    margin = None if maximize_var is None else float(obj)
    return LpCertificate(True, values, margin)


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    null_witness: np.ndarray | None  # left-null combination over the rows


def numerical_rank(matrix, rank_rel_tol: float = 1e-12) -> RankResult:
    """SVD rank with relative threshold, plus a row-dependence witness.

    rank = #{sigma > rank_rel_tol * sigma_max * max(rows, cols)}.  When
    the rows are dependent the witness w satisfies ||w.M||_inf below the
    same threshold, has unit 1-norm, and a positive leading entry.
    """
    M = np.array(matrix, dtype=float, ndmin=2)
    k, ncol = M.shape
    if k == 0:
        return RankResult(0, np.zeros(0), None)
    if ncol == 0 or not np.any(M):
        w = np.zeros(k)
        w[0] = 1.0
        return RankResult(0, np.zeros(min(k, ncol)), w)
    U, sigma, _ = np.linalg.svd(M, full_matrices=True)
    thresh = rank_rel_tol * sigma[0] * max(k, ncol)
    rank = int(np.sum(sigma > thresh))
    witness = None
    if rank < k:
        w = U[:, rank]
        w = w / np.abs(w).sum()
        lead = np.nonzero(np.abs(w) > 1e-12)[0]
        if lead.size and w[lead[0]] < 0:
            w = -w
        resid = float(np.abs(w @ M).max())
        if resid > thresh * (1.0 + 1e-6) + 1e-15:
            raise WitnessVerificationError(
                f"null witness residual {resid:.3e} exceeds threshold {thresh:.3e}")
        witness = w
    return RankResult(rank, sigma, witness)


def is_positive_definite(matrix, pd_eps: float = 1e-10) -> bool:
    """Symmetric positive definiteness with a relative eigenvalue floor.

    The empty 0x0 matrix counts as positive definite.  Asymmetry beyond
    slack is a structural error, not a numeric verdict.
    """
    M = np.array(matrix, dtype=float, ndmin=2)
    if M.size == 0:
        return True
    if M.shape[0] != M.shape[1]:
        raise ValueError("definiteness is only defined for square matrices")
    scale = np.abs(M).max()
    if np.abs(M - M.T).max() > 1e-8 * (1.0 + scale):
        raise ValueError("matrix is not symmetric within slack")
    S = 0.5 * (M + M.T)
    eigs = np.linalg.eigvalsh(S)
    k = M.shape[0]
    return bool(eigs[0] > pd_eps * (1.0 + np.trace(S) / k))


def largest_eigenvalue(matrix, iters: int = 500, rtol: float = 1e-13) -> float:
    """Power-iteration estimate of the largest eigenvalue of a PSD matrix.

    Two deterministic start vectors guard against an unlucky start
    orthogonal to the top eigenvector.
    """
    M = np.asarray(matrix, dtype=float)
    k = M.shape[0]
    if k == 0:
        return 0.0
    best = 0.0
    starts = [np.ones(k), 1.0 + 0.01 * (np.arange(k) % 7 + 1.0)]
    for x in starts:
        x = x / np.linalg.norm(x)
        lam_prev = 0.0
        for _ in range(iters):
            y = M @ x
            norm = np.linalg.norm(y)
            if norm <= 1e-30:
                break
            x = y / norm
            lam = float(x @ (M @ x))
            if abs(lam - lam_prev) <= rtol * max(1.0, abs(lam)):
                lam_prev = lam
                break
            lam_prev = lam
        best = max(best, lam_prev)
    return best


@dataclass(frozen=True)
class SignedCombinationQuery:
    """Rows grouped by the sign class of their combination coefficient.

    nonneg: coefficient >= 0; strict: coefficient > 0 required; zero:
    fixed at zero (kept for provenance only); free: unconstrained.
    """

    nonneg: np.ndarray
    strict: np.ndarray
    zero: np.ndarray
    free: np.ndarray
    labels: tuple = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        for block in (self.nonneg, self.strict, self.zero, self.free):
            if block.shape[0]:
                return block.shape[1]
        return self.nonneg.shape[1]


def make_query(dim: int, nonneg=None, strict=None, zero=None, free=None,
               labels=()) -> SignedCombinationQuery:
    def block(rows):
        if rows is None or len(rows) == 0:
            return np.zeros((0, dim))
        out = np.array(rows, dtype=float, ndmin=2)
        if out.shape[1] != dim:
            raise ValueError("row dimension mismatch in query")
        return out

    return SignedCombinationQuery(block(nonneg), block(strict), block(zero),
                                  block(free), tuple(labels))


@dataclass(frozen=True)
class CombinationWitness:
    exists: bool
    # aligned with query rows in block order nonneg, strict, zero, free
    coefficients: np.ndarray | None
    margin: float | None
    residual: float | None


def verify_combination(query: SignedCombinationQuery, coefficients,
                       strict_margin_eps: float) -> float:
    """Re-check a combination witness arithmetically; returns the residual.

    Raises WitnessVerificationError if the coefficients violate their
    sign classes, are essentially zero, or fail to annihilate the rows.
    """
    coeffs = np.asarray(coefficients, dtype=float)
    kn, ks = query.nonneg.shape[0], query.strict.shape[0]
    kz, kf = query.zero.shape[0], query.free.shape[0]
    if coeffs.shape[0] != kn + ks + kz + kf:
        raise WitnessVerificationError("witness length does not match query")
    a = coeffs[:kn]
    s = coeffs[kn:kn + ks]
    zc = coeffs[kn + ks:kn + ks + kz]
    f = coeffs[kn + ks + kz:]
    if np.any(a < -1e-9):
        raise WitnessVerificationError("nonneg coefficient is negative")
    if ks and np.any(s < strict_margin_eps * (1.0 - 1e-9)):
        raise WitnessVerificationError("strict coefficient below margin")
    if np.any(np.abs(zc) > 1e-12):
        raise WitnessVerificationError("zero-class coefficient is nonzero")
    total = np.abs(coeffs).sum()
    if total < 0.5:
        raise WitnessVerificationError("witness is essentially zero")
    combo = np.zeros(query.dim)
    if kn:
        combo += a @ query.nonneg
    if ks:
        combo += s @ query.strict
    if kf:
        combo += f @ query.free
    residual = float(np.abs(combo).max()) if query.dim else 0.0
    if residual > WITNESS_RESIDUAL_SLACK:
        raise WitnessVerificationError(f"witness residual {residual:.3e} too large")
    return residual


def signed_combination_exists(query: SignedCombinationQuery, *,
                              rank_rel_tol: float = 1e-12,
                              strict_margin_eps: float = 1e-6) -> CombinationWitness:
    """Decide whether a nonzero sign-respecting null combination exists.

    Existence is invariant under positive rescaling of any row.  The
    returned coefficients are normalized to unit 1-norm and re-verified
    before being handed back; zero-class rows always get coefficient 0.

    Decision procedure: if the strict block is empty, a dependence among
    the free rows alone settles the question via the rank kernel (the
    only route that cannot be polluted by the split-variable artifact);
    otherwise an LP with 1-norm normalization decides, maximizing the
    common margin of the strict block when one is present.
    """
    kn, ks = query.nonneg.shape[0], query.strict.shape[0]
    kz, kf = query.zero.shape[0], query.free.shape[0]
    dim = query.dim

    def assemble(a, s, f, margin):
        coeffs = np.concatenate([a, s, np.zeros(kz), f])
        total = np.abs(coeffs).sum()
        coeffs = coeffs / total
        residual = verify_combination(query, coeffs, strict_margin_eps)
        m = None if margin is None else float(margin / total)
        return CombinationWitness(True, coeffs, m, residual)

    if kn + ks + kf == 0:
        return CombinationWitness(False, None, None, None)

    if ks == 0:
        if kf:
            rr = numerical_rank(query.free, rank_rel_tol)
            if rr.rank < kf:
                return assemble(np.zeros(kn), np.zeros(0), rr.null_witness, None)
        if kn == 0:
            return CombinationWitness(False, None, None, None)
        # free rows independent: any witness must carry nonneg mass,
        # which scales to exactly one
        lp = LinearProgram()
        av = lp.add_vars(kn)
        fv = lp.add_vars(kf, free=True)
        for col in range(dim):
            coeffs = {av[i]: query.nonneg[i, col] for i in range(kn)
                      if query.nonneg[i, col]}
            for j in range(kf):
                if query.free[j, col]:
                    coeffs[fv[j]] = query.free[j, col]
            lp.add_eq(coeffs, 0.0)
        lp.add_eq({av[i]: 1.0 for i in range(kn)}, 1.0)
        feasible, values, _ = lp.solve(maximize=None)
        if not feasible:
            return CombinationWitness(False, None, None, None)
        a = values[:kn]
        f = values[kn:kn + kf]
        return assemble(a, np.zeros(0), f, None)

    # strict block present: maximize the common margin t under the
    # 1-norm normalization (which also caps t at 1)
    lp = LinearProgram()
    av = lp.add_vars(kn)
    sv = lp.add_vars(ks)
    fp = lp.add_vars(kf)
    fm = lp.add_vars(kf)
    tv = lp.add_var()
    for col in range(dim):
        coeffs: dict[int, float] = {}
        for i in range(kn):
            if query.nonneg[i, col]:
                coeffs[av[i]] = query.nonneg[i, col]
        for i in range(ks):
            if query.strict[i, col]:
                coeffs[sv[i]] = query.strict[i, col]
        for j in range(kf):
            if query.free[j, col]:
                coeffs[fp[j]] = query.free[j, col]
                coeffs[fm[j]] = -query.free[j, col]
        lp.add_eq(coeffs, 0.0)
    norm = {v: 1.0 for v in av + sv + fp + fm}
    lp.add_eq(norm, 1.0)
    for i in range(ks):
        slack = lp.add_var()
        lp.add_eq({sv[i]: 1.0, tv: -1.0, slack: -1.0}, 0.0)
    # normalization already forces t <= 1; the explicit cap just keeps
    # phase 2 structurally bounded
    feasible, values, margin = lp.solve(maximize=tv, cap=1.0)
    if not feasible:
        return CombinationWitness(False, None, None, None)
    if values is None or margin is None or margin < strict_margin_eps:
        return CombinationWitness(False, None, None, None)
    a = values[:kn]
    s = values[kn:kn + ks]
    f = values[kn + ks:kn + ks + kf] - values[kn + ks + kf:kn + ks + 2 * kf]
    return assemble(a, s, f, margin)
