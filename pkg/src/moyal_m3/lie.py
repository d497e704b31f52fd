"""Exact arithmetic for the Euclidean motion algebra m(3) and group M(3).

Algebra elements carry exact rational coefficients over the basis
X1, X2, X3 (rotation block) and E1, E2, E3 (translation column); the
matrix realization embeds them as 4x4 matrices with a skew-symmetric
3x3 block and a translation column.  Brackets are computed from the
structure constants, with the 4x4 matrix commutator available as an
independent route for verification.

Group elements are pairs (R, r) of a rotation matrix and a translation
vector, multiplying as 4x4 block matrices.  Rotations are stored as
explicit 3x3 matrices; the one-parameter-factor form is an input
convention only.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .expr import ExprError  # noqa: F401  (re-exported error taxonomy anchor)


class LieError(ValueError):
    pass


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, float, str)):
        return Fraction(v)
    raise LieError(f"cannot coerce {v!r} to an exact rational")


# ---------------------------------------------------------------------------
# Algebra elements
# ---------------------------------------------------------------------------

class AlgebraElement:
    """A vector in m(3): x1*X1 + x2*X2 + x3*X3 + e1*E1 + e2*E2 + e3*E3."""

    __slots__ = ("x1", "x2", "x3", "e1", "e2", "e3")

    def __init__(self, x1=0, x2=0, x3=0, e1=0, e2=0, e3=0):
        self.x1, self.x2, self.x3 = _frac(x1), _frac(x2), _frac(x3)
        self.e1, self.e2, self.e3 = _frac(e1), _frac(e2), _frac(e3)

    @property
    def x(self):
        return (self.x1, self.x2, self.x3)

    @property
    def e(self):
        return (self.e1, self.e2, self.e3)

    def coefficients(self):
        return (self.x1, self.x2, self.x3, self.e1, self.e2, self.e3)

    def __eq__(self, other):
        return isinstance(other, AlgebraElement) and \
            self.coefficients() == other.coefficients()

    def __hash__(self):
        return hash(self.coefficients())

    def __add__(self, other):
        return AlgebraElement(*[a + b for a, b in
                                zip(self.coefficients(), other.coefficients())])

    def __sub__(self, other):
        return AlgebraElement(*[a - b for a, b in
                                zip(self.coefficients(), other.coefficients())])

    def __rmul__(self, scalar):
        c = _frac(scalar)
        return AlgebraElement(*[c * a for a in self.coefficients()])

    def __neg__(self):
        return AlgebraElement(*[-a for a in self.coefficients()])

    @property
    def is_zero(self):
        return all(c == 0 for c in self.coefficients())

    def __repr__(self):
        names = ("X1", "X2", "X3", "E1", "E2", "E3")
        parts = [f"{c}*{n}" for c, n in zip(self.coefficients(), names) if c != 0]
        return " + ".join(parts) if parts else "0"

    def to_matrix(self):
        """4x4 matrix realization with exact Fraction entries."""
        x1, x2, x3 = self.x1, self.x2, self.x3
        z = Fraction(0)
        return [
            [z, -x1, x2, self.e1],
            [x1, z, -x3, self.e2],
            [-x2, x3, z, self.e3],
            [z, z, z, z],
        ]

    def rotation_block_float(self) -> np.ndarray:
        m = self.to_matrix()
        return np.array([[float(m[i][j]) for j in range(3)] for i in range(3)])

    def translation_float(self) -> np.ndarray:
        return np.array([float(self.e1), float(self.e2), float(self.e3)])


def from_matrix(m) -> AlgebraElement:
    """Inverse of to_matrix; validates the skew/zero structure exactly."""
    x1, x2, x3 = _frac(m[1][0]), _frac(m[0][2]), _frac(m[2][1])
    cand = AlgebraElement(x1, x2, x3, m[0][3], m[1][3], m[2][3])
    if cand.to_matrix() != [[_frac(v) for v in row] for row in m]:
        raise LieError("matrix is not in the algebra (skew block + column)")
    return cand


def basis(i: int) -> AlgebraElement:
    """Basis element by 1-based index: 1..3 -> X_i, 4..6 -> E_{i-3}."""
    if not 1 <= i <= 6:
        raise LieError(f"basis index {i} out of range 1..6")
    coeffs = [0] * 6
    coeffs[i - 1] = 1
    return AlgebraElement(*coeffs)


BASIS_NAMES = ("X1", "X2", "X3", "E1", "E2", "E3")


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def bracket(U: AlgebraElement, T: AlgebraElement) -> AlgebraElement:
    """Lie bracket [U, T] via structure constants, exact.

    Rotation part: [X_i, X_j] = -eps_{ijk} X_k.  Translation part: the
    rotation block of U acts on T's translation vector and vice versa;
    with this basis that action is v -> (x3, x2, x1) x v.
    """
    x, y = U.x, T.x
    e, f = U.e, T.e
    rot = tuple(-c for c in _cross(x, y))
    xr = (U.x3, U.x2, U.x1)
    yr = (T.x3, T.x2, T.x1)
    trans = tuple(a - b for a, b in zip(_cross(xr, f), _cross(yr, e)))
    return AlgebraElement(rot[0], rot[1], rot[2], trans[0], trans[1], trans[2])


def _mat_mul4(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(4)) for j in range(4)]
            for i in range(4)]


def bracket_via_matrices(U: AlgebraElement, T: AlgebraElement) -> AlgebraElement:
    """[U, T] as the exact 4x4 matrix commutator; independent of bracket()."""
    a, b = U.to_matrix(), T.to_matrix()
    ab, ba = _mat_mul4(a, b), _mat_mul4(b, a)
    comm = [[ab[i][j] - ba[i][j] for j in range(4)] for i in range(4)]
    return from_matrix(comm)


# ---------------------------------------------------------------------------
# Group elements
# ---------------------------------------------------------------------------

ORTHO_TOL = 1e-8          # constructor acceptance
REPROJECT_TOL = 1e-10     # drift threshold triggering polar re-projection


def _polar_project(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


class GroupElement:
    """A rigid motion (R, r): rotation matrix plus translation vector."""

    __slots__ = ("R", "r")

    def __init__(self, R, r, validate: bool = True):
        R = np.array(R, dtype=float)
        r = np.array(r, dtype=float).reshape(3)
        if validate:
            drift = np.linalg.norm(R.T @ R - np.eye(3))
            if drift > ORTHO_TOL:
                raise LieError(f"rotation block not orthonormal (drift {drift:.2e})")
            if drift > REPROJECT_TOL:
                R = _polar_project(R)
            if np.linalg.det(R) < 0:
                raise LieError("rotation block has determinant -1")
        R.flags.writeable = False
        r.flags.writeable = False
        self.R = R
        self.r = r

    def __repr__(self):
        return f"GroupElement(R={self.R.tolist()}, r={self.r.tolist()})"

    def to_matrix4(self) -> np.ndarray:
        m = np.zeros((4, 4))
        m[:3, :3] = self.R
        m[:3, 3] = self.r
        m[3, 3] = 1.0
        return m


def identity() -> GroupElement:
    return GroupElement(np.eye(3), np.zeros(3))


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    """(R1, r1)(R2, r2) = (R1 R2, R1 r2 + r1), with drift control."""
    return GroupElement(g.R @ h.R, g.R @ h.r + g.r)


def inv(g: GroupElement) -> GroupElement:
    Rt = g.R.T
    return GroupElement(Rt, -(Rt @ g.r))


def exp_algebra(U: AlgebraElement) -> GroupElement:
    """Exponential of the 4x4 realization.

    The rotation block uses the closed form in the skew matrix A
    (angle = |(x1, x2, x3)|); the translation column is the convergent
    series sum A^k v / (k+1)! in closed form, with Taylor fallbacks for
    small angles.
    """
    A = U.rotation_block_float()
    v = U.translation_float()
    theta2 = float(U.x1) ** 2 + float(U.x2) ** 2 + float(U.x3) ** 2
    theta = math.sqrt(theta2)
    A2 = A @ A
    if theta < 1e-8:
        c1 = 1.0 - theta2 / 6.0          # sin(t)/t
        c2 = 0.5 - theta2 / 24.0         # (1-cos t)/t^2
        c3 = 1.0 / 6.0 - theta2 / 120.0  # (t - sin t)/t^3
    else:
        c1 = math.sin(theta) / theta
        c2 = (1.0 - math.cos(theta)) / theta2
        c3 = (theta - math.sin(theta)) / (theta2 * theta)
    R = np.eye(3) + c1 * A + c2 * A2
    V = np.eye(3) + c2 * A + c3 * A2
    return GroupElement(R, V @ v)


def from_factors(r, theta1: float, theta2: float, theta3: float) -> GroupElement:
    """exp(r.E) exp(theta1 X1) exp(theta2 X2) exp(theta3 X3)."""
    g = GroupElement(np.eye(3), np.array(r, dtype=float))
    for j, th in ((1, theta1), (2, theta2), (3, theta3)):
        g = mul(g, exp_algebra(float(th) * basis(j)))
    return g


def rotation_factor(j: int, theta: float) -> np.ndarray:
    """The 3x3 rotation exp(theta X_j)."""
    return exp_algebra(float(theta) * basis(j)).R


# ---------------------------------------------------------------------------
# Dual space and the coadjoint action
# ---------------------------------------------------------------------------

class DualFunctional:
    """A functional F = (mu, alpha) on m(3), identified with R^3 x R^3."""

    __slots__ = ("mu", "alpha")

    def __init__(self, mu, alpha):
        mu = np.array(mu, dtype=float).reshape(3)
        alpha = np.array(alpha, dtype=float).reshape(3)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(alpha))):
            raise LieError("functional components must be finite")
        mu.flags.writeable = False
        alpha.flags.writeable = False
        self.mu = mu
        self.alpha = alpha

    def __repr__(self):
        return f"DualFunctional(mu={self.mu.tolist()}, alpha={self.alpha.tolist()})"

    def pair(self, U: AlgebraElement) -> float:
        """The dual pairing <F, U> over the basis X1..X3, E1..E3."""
        xs = np.array([float(c) for c in U.x])
        es = np.array([float(c) for c in U.e])
        return float(self.mu @ xs + self.alpha @ es)


def coadjoint(g: GroupElement, F: DualFunctional) -> DualFunctional:
    """Coadjoint action: (R, r) . (mu, alpha) = (R mu + (R alpha) x r, R alpha)."""
    ra = g.R @ F.alpha
    return DualFunctional(g.R @ F.mu + np.cross(ra, g.r), ra)


# ---------------------------------------------------------------------------
# JSON encodings (CLI wire format)
# ---------------------------------------------------------------------------

def algebra_to_json(U: AlgebraElement) -> dict:
    return {"x": [str(c) for c in U.x], "e": [str(c) for c in U.e]}


def algebra_from_json(d: dict) -> AlgebraElement:
    return AlgebraElement(*[Fraction(s) for s in d["x"]],
                          *[Fraction(s) for s in d["e"]])


def group_to_json(g: GroupElement) -> dict:
    return {"R": [[float(v) for v in row] for row in g.R],
            "r": [float(v) for v in g.r]}


def dual_to_json(F: DualFunctional) -> dict:
    return {"mu": [float(v) for v in F.mu], "alpha": [float(v) for v in F.alpha]}
