"""Point-evaluation model for MPECs.

An MPEC is

    min f(v)  s.t.  g(v) <= 0,  h(v) = 0,
                    G(v) >= 0,  H(v) >= 0,  G(v) * H(v) = 0  (componentwise),

with m inequality, p equality, and l complementarity pairs over R^n.
The toolkit never differentiates anything: callers supply values and
gradients at a single point as an evaluation record, and every verdict
is a statement about those finitely many rows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

import numpy as np

from .errors import ClassificationError, InputError


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds shared across all checks; all strictly positive.

    activity_eps    absolute activity threshold |value| <= eps
    rank_rel_tol    relative SVD cutoff for numerical rank
    pd_eps          relative eigenvalue floor for definiteness
    strict_margin_eps  acceptance margin for strict LP coefficients
    feas_eps        feasibility residual tolerance
    """

    activity_eps: float = 1e-8
    rank_rel_tol: float = 1e-12
    pd_eps: float = 1e-10
    strict_margin_eps: float = 1e-6
    feas_eps: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise InputError(f"tolerance {f.name} must be strictly positive")


@dataclass(frozen=True)
class MpecDimensions:
    n: int  # variables
    m: int  # inequalities g <= 0
    p: int  # equalities h = 0
    l: int  # complementarity pairs

    def __post_init__(self):
        if self.n < 1:
            raise InputError("n must be at least 1")
        if self.m < 0 or self.p < 0:
            raise InputError("m and p must be nonnegative")
        if self.l < 1:
            raise InputError("a genuine MPEC needs at least one pair (l >= 1)")


def _as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if rows == 0:
        arr = arr.reshape(0, cols)
    if arr.ndim == 1 and rows == 1:
        arr = arr.reshape(1, -1)
    if arr.shape != (rows, cols):
        raise InputError(f"{name} must have shape ({rows}, {cols}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _as_vector(value, length: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).ravel()
    if arr.shape != (length,):
        raise InputError(f"{name} must have length {length}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PointEvaluation:
    """Values and gradients of all constraint functions at one point."""

    dims: MpecDimensions
    point: np.ndarray
    g_vals: np.ndarray
    h_vals: np.ndarray
    G_vals: np.ndarray
    H_vals: np.ndarray
    g_grads: np.ndarray  # (m, n)
    h_grads: np.ndarray  # (p, n)
    G_grads: np.ndarray  # (l, n)
    H_grads: np.ndarray  # (l, n)

    def __post_init__(self):
        d = self.dims
        object.__setattr__(self, "point", _as_vector(self.point, d.n, "point"))
        object.__setattr__(self, "g_vals", _as_vector(self.g_vals, d.m, "g_vals"))
        object.__setattr__(self, "h_vals", _as_vector(self.h_vals, d.p, "h_vals"))
        object.__setattr__(self, "G_vals", _as_vector(self.G_vals, d.l, "G_vals"))
        object.__setattr__(self, "H_vals", _as_vector(self.H_vals, d.l, "H_vals"))
        object.__setattr__(self, "g_grads", _as_matrix(self.g_grads, d.m, d.n, "g_grads"))
        object.__setattr__(self, "h_grads", _as_matrix(self.h_grads, d.p, d.n, "h_grads"))
        object.__setattr__(self, "G_grads", _as_matrix(self.G_grads, d.l, d.n, "G_grads"))
        object.__setattr__(self, "H_grads", _as_matrix(self.H_grads, d.l, d.n, "H_grads"))

    @classmethod
    def from_dict(cls, data: dict) -> "PointEvaluation":
        try:
            dims = MpecDimensions(int(data["n"]), int(data["m"]),
                                  int(data["p"]), int(data["l"]))
        except KeyError as exc:
            raise InputError(f"evaluation record is missing key {exc}") from None
        def get(key):
            if key not in data:
                raise InputError(f"evaluation record is missing key '{key}'")
            return data[key]
        return cls(dims, get("point"), get("g_vals"), get("h_vals"),
                   get("G_vals"), get("H_vals"), get("g_grads"),
                   get("h_grads"), get("G_grads"), get("H_grads"))

    def to_dict(self) -> dict:
        d = self.dims
        return {
            "n": d.n, "m": d.m, "p": d.p, "l": d.l,
            "point": self.point.tolist(),
            "g_vals": self.g_vals.tolist(), "h_vals": self.h_vals.tolist(),
            "G_vals": self.G_vals.tolist(), "H_vals": self.H_vals.tolist(),
            "g_grads": self.g_grads.tolist(), "h_grads": self.h_grads.tolist(),
            "G_grads": self.G_grads.tolist(), "H_grads": self.H_grads.tolist(),
        }


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_violation: float
    violations: tuple  # (family, index, residual) triples

    def to_dict(self) -> dict:
        return {"feasible": self.feasible,
                "max_violation": self.max_violation,
                "violations": [[fam, int(i), float(r)]
                               for fam, i, r in self.violations]}


def check_feasibility(ev: PointEvaluation, tol: Tolerances) -> FeasibilityReport:
    """Residual test of every constraint family at the evaluated point."""
    eps = tol.feas_eps
    violations = []
    for i, val in enumerate(ev.g_vals):
        if val > eps:
            violations.append(("g", i, float(val)))
    for i, val in enumerate(ev.h_vals):
        if abs(val) > eps:
            violations.append(("h", i, float(abs(val))))
    for i, val in enumerate(ev.G_vals):
        if val < -eps:
            violations.append(("G", i, float(-val)))
    for i, val in enumerate(ev.H_vals):
        if val < -eps:
            violations.append(("H", i, float(-val)))
    prods = ev.G_vals * ev.H_vals
    for i, val in enumerate(prods):
        if abs(val) > eps:
            violations.append(("GH", i, float(abs(val))))
    worst = max((v[2] for v in violations), default=0.0)
    return FeasibilityReport(not violations, worst, tuple(violations))


@dataclass(frozen=True)
class ActivePattern:
    """Active index sets at a feasible point (0-based).

    I_G collects pairs where only G is active (G=0 < H), I_H pairs where
    only H is active, I_GH the biactive pairs.
    """

    I_g: tuple
    I_G: tuple
    I_H: tuple
    I_GH: tuple

    def to_dict(self) -> dict:
        return {"I_g": list(self.I_g), "I_G": list(self.I_G),
                "I_H": list(self.I_H), "I_GH": list(self.I_GH)}


def classify_active(ev: PointEvaluation, tol: Tolerances) -> ActivePattern:
    """Partition constraints into activity classes.

    Requires a feasible point.  A pair with both values above the
    activity threshold contradicts complementarity at the stated
    tolerances and raises ClassificationError.
    """
    eps = tol.activity_eps
    I_g = tuple(i for i, val in enumerate(ev.g_vals) if abs(val) <= eps)
    I_G, I_H, I_GH = [], [], []
    for i in range(ev.dims.l):
        g_active = abs(ev.G_vals[i]) <= eps
        h_active = abs(ev.H_vals[i]) <= eps
        if g_active and h_active:
            I_GH.append(i)
        elif g_active:
            I_G.append(i)
        elif h_active:
            I_H.append(i)
        else:
            raise ClassificationError(
                f"pair {i} has G={ev.G_vals[i]:.3e} and H={ev.H_vals[i]:.3e}, "
                "both above the activity threshold; tolerances are inconsistent "
                "with complementarity at this point")
    return ActivePattern(I_g, tuple(I_G), tuple(I_H), tuple(I_GH))


@dataclass(frozen=True)
class GradientBundle:
    """Stacked gradient rows with class and provenance labels.

    classes[i] is 'signed' or 'free'; provenance[i] is (family, index).
    """

    rows: np.ndarray
    classes: tuple
    provenance: tuple


def _stack(rows: list, n: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, n))
    return np.vstack(rows)


def gradient_bundle_tnlp(ev: PointEvaluation, pattern: ActivePattern) -> GradientBundle:
    """Active-constraint gradients of the tightened NLP.

    The tightened problem pins G and H to zero wherever they are active,
    so every biactive pair contributes both rows as equalities; only the
    active g rows keep a sign restriction.
    """
    rows, classes, prov = [], [], []
    for i in pattern.I_g:
        rows.append(ev.g_grads[i]); classes.append("signed"); prov.append(("g", i))
    for i in range(ev.dims.p):
        rows.append(ev.h_grads[i]); classes.append("free"); prov.append(("h", i))
    for i in sorted(set(pattern.I_G) | set(pattern.I_GH)):
        rows.append(ev.G_grads[i]); classes.append("free"); prov.append(("G", i))
    for i in sorted(set(pattern.I_H) | set(pattern.I_GH)):
        rows.append(ev.H_grads[i]); classes.append("free"); prov.append(("H", i))
    return GradientBundle(_stack(rows, ev.dims.n), tuple(classes), tuple(prov))


def gradient_bundle_rnlp(ev: PointEvaluation, pattern: ActivePattern) -> GradientBundle:
    """Active-constraint gradients of the relaxed NLP.

    The relaxed problem keeps G_i >= 0, H_i >= 0 as inequalities on the
    biactive set, so those rows join the sign-restricted class; G on
    I_G and H on I_H remain pinned equalities.  With no biactive pairs
    the bundle coincides with the tightened one.
    """
    rows, classes, prov = [], [], []
    for i in pattern.I_g:
        rows.append(ev.g_grads[i]); classes.append("signed"); prov.append(("g", i))
    for i in pattern.I_GH:
        rows.append(ev.G_grads[i]); classes.append("signed"); prov.append(("G", i))
    for i in pattern.I_GH:
        rows.append(ev.H_grads[i]); classes.append("signed"); prov.append(("H", i))
    for i in range(ev.dims.p):
        rows.append(ev.h_grads[i]); classes.append("free"); prov.append(("h", i))
    for i in pattern.I_G:
        rows.append(ev.G_grads[i]); classes.append("free"); prov.append(("G", i))
    for i in pattern.I_H:
        rows.append(ev.H_grads[i]); classes.append("free"); prov.append(("H", i))
    return GradientBundle(_stack(rows, ev.dims.n), tuple(classes), tuple(prov))


def canonical_json(obj) -> str:
    """Stable serialization used for digests and byte-deterministic reports."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]
