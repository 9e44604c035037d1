"""H-polytope geometry and the linear programs behind region verification.

Every activation region lives here as { theta : A theta <= b }.  The
parameter box is appended to each region polytope so all LPs are bounded.
Interior points are found by maximizing a Chebyshev-style slack margin;
points with margin below EPS count as degenerate and the region is treated
as empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, InputError, SolverError, UnboundedError

# Global strictness margin: a point is "strictly interior" when every
# normalized row has at least this much slack.
EPS = 1e-7

# Row-label convention: ReLU neuron rows carry (l, n); box rows carry
# ("box", axis, "lo"|"hi").
BOX = "box"

_lp_calls = 0


def lp_call_count() -> int:
    return _lp_calls


def reset_lp_call_count() -> None:
    global _lp_calls
    _lp_calls = 0


@dataclass(frozen=True)
class HPolytope:
    """Half-space intersection A theta <= b with one label per row."""

    A: np.ndarray
    b: np.ndarray
    row_labels: tuple

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.shape[0] or A.shape[0] != len(self.row_labels):
            raise InputError("polytope rows, offsets and labels must align")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def row(self, label) -> tuple[np.ndarray, float]:
        i = self.row_labels.index(label)
        return self.A[i], float(self.b[i])

    def contains(self, theta: np.ndarray, margin: float = 0.0) -> bool:
        """Membership check; margin > 0 demands normalized slack on every row."""
        theta = np.asarray(theta, dtype=float)
        norms = np.linalg.norm(self.A, axis=1)
        slack = self.b - self.A @ theta
        return bool(np.all(slack >= margin * np.maximum(norms, 1.0) - 1e-12))

    def stack(self, other: "HPolytope") -> "HPolytope":
        return HPolytope(
            A=np.vstack([self.A, other.A]),
            b=np.concatenate([self.b, other.b]),
            row_labels=self.row_labels + other.row_labels,
        )


def box_polytope(theta_box: np.ndarray) -> HPolytope:
    """The axis-aligned box lo_i <= theta_i <= hi_i as an HPolytope."""
    box = np.asarray(theta_box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise InputError("theta box must have shape (dim, 2)")
    if np.any(box[:, 0] > box[:, 1]):
        raise InputError("theta box has an empty interval")
    dim = box.shape[0]
    rows_A, rows_b, labels = [], [], []
    for i in range(dim):
        lo = np.zeros(dim)
        lo[i] = -1.0
        rows_A.append(lo)
        rows_b.append(-box[i, 0])
        labels.append((BOX, i, "lo"))
        hi = np.zeros(dim)
        hi[i] = 1.0
        rows_A.append(hi)
        rows_b.append(box[i, 1])
        labels.append((BOX, i, "hi"))
    return HPolytope(A=np.array(rows_A), b=np.array(rows_b), row_labels=tuple(labels))


def _run_linprog(c, A_ub, b_ub, A_eq=None, b_eq=None):
    global _lp_calls
    _lp_calls += 1
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(None, None)] * len(c),
        method="highs",
    )
    return res


def _normalized_rows(P: HPolytope):
    """Split rows into normalized nontrivial ones and the verdict of zero rows.

    Zero-gradient rows are constant constraints: one with b < 0 makes the
    polytope empty, the rest are vacuous and dropped.  Returns (A, b, keep)
    or None when a zero row is violated.
    """
    norms = np.linalg.norm(P.A, axis=1)
    zero = norms <= 1e-12
    if np.any(P.b[zero] < -1e-9):
        return None
    keep = ~zero
    A = P.A[keep] / norms[keep, None]
    b = P.b[keep] / norms[keep]
    return A, b, keep


def feasible_interior_point(P: HPolytope, eps: float = EPS):
    """A point with normalized slack > eps on every row, or None.

    Solves the Chebyshev-margin LP  max r  s.t.  A theta + r ||a_i|| <= b.
    Returns None when the polytope is empty or only degenerate (margin <= eps)
    points exist.
    """
    nz = _normalized_rows(P)
    if nz is None:
        return None
    A, b, _ = nz
    if A.shape[0] == 0:
        return np.zeros(P.dim)
    n = P.dim
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((A.shape[0], 1))])
    res = _run_linprog(c, A_ub, b)
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverError(f"interior-point LP failed: {res.message}")
    if -res.fun <= eps:
        return None
    return res.x[:n]


def interior_point_on_face(P: HPolytope, label, eps: float = EPS):
    """A point on row `label` with slack > eps on all other rows, or None.

    None means the row is not a facet of P: flipping the corresponding neuron
    leads to an empty or lower-dimensional neighbor.
    """
    idx = P.row_labels.index(label)
    a_face = P.A[idx]
    nrm = np.linalg.norm(a_face)
    if nrm <= 1e-12:
        return None
    a_face = a_face / nrm
    b_face = P.b[idx] / nrm

    others = HPolytope(
        A=np.delete(P.A, idx, axis=0),
        b=np.delete(P.b, idx),
        row_labels=P.row_labels[:idx] + P.row_labels[idx + 1 :],
    )
    nz = _normalized_rows(others)
    if nz is None:
        return None
    A, b, _ = nz
    n = P.dim
    c = np.zeros(n + 1)
    c[-1] = -1.0
    if A.shape[0]:
        A_ub = np.hstack([A, np.ones((A.shape[0], 1))])
        b_ub = b
    else:
        A_ub, b_ub = None, None
    A_eq = np.hstack([a_face, [0.0]])[None, :]
    res = _run_linprog(c, A_ub, b_ub, A_eq=A_eq, b_eq=[b_face])
    if res.status == 2:
        return None
    if res.status == 3:
        raise UnboundedError("face LP unbounded; box rows missing")
    if res.status != 0:
        raise SolverError(f"face LP failed: {res.message}")
    if -res.fun <= eps:
        return None
    return res.x[:n]


def interior_point_on_line(P: HPolytope, label, line, eps: float = EPS):
    """Where the search ray crosses face `label` inside P, or None.

    `line` is (origin, direction); the ray is origin + t * direction, t >= 0.
    The crossing must satisfy every other row with normalized slack eps.
    """
    origin, direction = (np.asarray(v, dtype=float) for v in line)
    if origin.shape != (P.dim,) or direction.shape != (P.dim,):
        raise InputError("line origin/direction must match the polytope dimension")
    idx = P.row_labels.index(label)
    a, b = P.A[idx], P.b[idx]
    denom = float(a @ direction)
    if abs(denom) <= 1e-12 * max(np.linalg.norm(a) * np.linalg.norm(direction), 1.0):
        return None
    t = (b - float(a @ origin)) / denom
    if t < -1e-12:
        return None
    point = origin + t * direction
    rest = np.delete(np.arange(P.n_rows), idx)
    norms = np.maximum(np.linalg.norm(P.A[rest], axis=1), 1e-12)
    slack = (P.b[rest] - P.A[rest] @ point) / norms
    if np.any(slack < eps):
        return None
    return point


def minimize_linear(P: HPolytope, c: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact minimum of c . theta over P, with argmin.  Negate c to maximize."""
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != P.dim:
        raise InputError("objective dimension mismatch")
    nz = _normalized_rows(P)
    if nz is None:
        raise InfeasibleError("polytope is empty (violated constant row)")
    A, b, _ = nz
    res = _run_linprog(c, A, b)
    if res.status == 2:
        raise InfeasibleError("polytope is empty")
    if res.status == 3:
        raise UnboundedError("LP unbounded; box rows missing from the polytope")
    if res.status != 0:
        raise SolverError(f"LP failed: {res.message}")
    return float(res.fun), res.x


def is_stable(halfspace: tuple[np.ndarray, float], theta_box: np.ndarray) -> bool:
    """True when a . theta - b keeps one sign on every vertex of the box.

    A linear function on a box attains its extremes at vertices, so checking
    the 2^dim corners is exact.  The zero level counts with the negative side,
    matching the inactive-at-zero pattern convention.
    """
    a, b = halfspace
    a = np.asarray(a, dtype=float).ravel()
    box = np.asarray(theta_box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    # min/max of a.theta over the box, componentwise
    vmin = float(a @ np.where(a >= 0, lo, hi)) - float(b)
    vmax = float(a @ np.where(a >= 0, hi, lo)) - float(b)
    return vmin > 0.0 or vmax <= 0.0


def simplify(P: HPolytope, fs: set) -> HPolytope:
    """Restrict P to its facet rows plus the box rows.

    `fs` holds labels confirmed as facets; all other neuron rows are redundant
    and dropped.  Box rows are always retained so the result stays bounded.
    """
    keep = [
        i
        for i, lab in enumerate(P.row_labels)
        if lab in fs or (isinstance(lab, tuple) and lab and lab[0] == BOX)
    ]
    return HPolytope(
        A=P.A[keep],
        b=P.b[keep],
        row_labels=tuple(P.row_labels[i] for i in keep),
    )


def vertices_2d(P: HPolytope, tol: float = 1e-9) -> list[np.ndarray]:
    """Counterclockwise vertex cycle of a bounded 2-D polytope.

    Vertices are intersections of row pairs that satisfy every constraint to
    1e-8; duplicates within `tol` collapse.
    """
    if P.dim != 2:
        raise InputError("vertex enumeration requires a 2-D polytope")
    norms = np.linalg.norm(P.A, axis=1)
    rows = [i for i in range(P.n_rows) if norms[i] > 1e-12]
    cands = []
    for ii, i in enumerate(rows):
        for j in rows[ii + 1 :]:
            M = np.vstack([P.A[i], P.A[j]])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) <= 1e-12 * norms[i] * norms[j]:
                continue
            v = np.linalg.solve(M, np.array([P.b[i], P.b[j]]))
            slack = P.b - P.A @ v
            if np.all(slack >= -1e-8 * np.maximum(norms, 1.0)):
                cands.append(v)
    if not cands:
        if feasible_interior_point(P) is not None:
            raise UnboundedError("2-D polytope appears unbounded")
        return []
    verts: list[np.ndarray] = []
    for v in cands:
        if all(np.linalg.norm(v - u) > tol for u in verts):
            verts.append(v)
    center = np.mean(verts, axis=0)
    verts.sort(key=lambda v: math.atan2(v[1] - center[1], v[0] - center[0]))
    return verts
