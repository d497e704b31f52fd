"""Coadjoint-orbit geometry on the flat chart of T*S^2.

The nontrivial orbits of M(3) are spheres (vanishing translation part of
the functional) and cotangent bundles of spheres.  On the cotangent case
this module fixes the flat chart around the base point q = (L, 0, 0)
(L the orbit radius): two base coordinates t1, t2 and two fiber
coordinates s1, s2, with the chart map

    psi(s1, s2, t1, t2) = (0, s1/L^2, s2/L^2, L, L^2 t1, L^2 t2)

over the dual basis (X1*, X2*, X3*, E1*, E2*, E3*).  Energy functions
are the dual pairings of algebra elements against chart points, and the
Hamiltonian fields come from the canonical-coordinate recipe with
(s1, s2) as momenta and (t1, t2) as positions.

Index pairing.  The chart as written couples the fiber coordinates to
the rotation coefficients (x2, x3), yet the rotation X3 stabilizes the
base point q while X1 moves it, so that pairing cannot support an exact
covariance bivector at the chart origin (the solver in ``moyal``
verifies this and reports it).  The coupling (s1 <-> x2, s2 <-> x1) is
the unique assignment admitting one.  Both pairings are first-class
here: PAIRING_CHART is the literal chart convention and the default for
the verbatim operations, PAIRING_COVARIANT is what the covariance
oracle selects.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .expr import QC, Expr, Fraction as _F  # noqa: F401
from .lie import AlgebraElement, DualFunctional, LieError, bracket

CHART_VARS = ("s1", "s2", "t1", "t2")

# which rotation coefficients pair with (s1, s2)
PAIRING_CHART = (2, 3)
PAIRING_COVARIANT = (2, 1)

PAIRING_NAMES = {
    PAIRING_CHART: "chart(s1~x2, s2~x3)",
    PAIRING_COVARIANT: "covariant(s1~x2, s2~x1)",
}


def _lam(value) -> Fraction:
    lam = Fraction(value)
    if lam <= 0:
        raise ValueError(f"orbit radius must be positive, got {value}")
    return lam


# ---------------------------------------------------------------------------
# Orbit classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitKind:
    kind: str  # 'trivial-point' | 'sphere' | 'cotangent-bundle'
    radius: float | None = None


def classify(F: DualFunctional) -> OrbitKind:
    """Orbit type of a functional: depends only on mu = 0?, alpha = 0?, |alpha|."""
    mu_zero = not np.any(F.mu)
    alpha_zero = not np.any(F.alpha)
    if mu_zero and alpha_zero:
        return OrbitKind("trivial-point")
    if alpha_zero:
        return OrbitKind("sphere", float(np.linalg.norm(F.mu)))
    return OrbitKind("cotangent-bundle", float(np.linalg.norm(F.alpha)))


# ---------------------------------------------------------------------------
# Chart maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartPoint:
    s1: Fraction
    s2: Fraction
    t1: Fraction
    t2: Fraction

    @staticmethod
    def of(s1, s2, t1, t2) -> "ChartPoint":
        return ChartPoint(Fraction(s1), Fraction(s2), Fraction(t1), Fraction(t2))

    def bindings(self) -> dict:
        return {"s1": self.s1, "s2": self.s2, "t1": self.t1, "t2": self.t2}


ORIGIN = ChartPoint.of(0, 0, 0, 0)


def chart_base(t1, t2, lam) -> tuple:
    """Base-point map: (t1, t2) -> (L, L^2 t1, L^2 t2) on the flattened sphere."""
    L = _lam(lam)
    return (L, L * L * Fraction(t1), L * L * Fraction(t2))


def chart_to_functional(c: ChartPoint, lam):
    """Dual coefficients (over X1*..E3*) of a chart point, plus the functional.

    Returns (coeffs, DualFunctional): coeffs are the six exact values
    (0, s1/L^2, s2/L^2, L, L^2 t1, L^2 t2).
    """
    L = _lam(lam)
    L2 = L * L
    coeffs = (Fraction(0), c.s1 / L2, c.s2 / L2, L, L2 * c.t1, L2 * c.t2)
    functional = DualFunctional([float(v) for v in coeffs[:3]],
                                [float(v) for v in coeffs[3:]])
    return coeffs, functional


# ---------------------------------------------------------------------------
# Energy functions and Hamiltonian fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpaceFunction:
    """A chart function together with the orbit radius it lives on."""

    expression: Expr
    lam: Fraction
    pairing: tuple = PAIRING_CHART

    def at(self, c: ChartPoint) -> QC:
        return ex.evaluate_exact(self.expression, c.bindings())


def energy(U: AlgebraElement, lam, pairing=PAIRING_CHART) -> PhaseSpaceFunction:
    """Linear energy function of an algebra element on the chart.

    With pairing (a, b):  (x_a/L^2) s1 + (x_b/L^2) s2 + L e1
                          + L^2 e2 t1 + L^2 e3 t2.
    The third rotation coefficient does not appear; in particular the
    element pairing to neither fiber coordinate maps to the zero function.
    """
    L = _lam(lam)
    L2 = L * L
    a, b = pairing
    xs = {1: U.x1, 2: U.x2, 3: U.x3}
    terms = []

    def add(coeff: Fraction, name: str | None):
        if coeff == 0:
            return
        c = ex.Const(QC(coeff))
        terms.append(c if name is None else ex.Product((c, ex.Var(name))))

    add(xs[a] / L2, "s1")
    add(xs[b] / L2, "s2")
    add(L * U.e1, None)
    add(L2 * U.e2, "t1")
    add(L2 * U.e3, "t2")
    if not terms:
        e = ex.ZERO
    elif len(terms) == 1:
        e = terms[0]
    else:
        e = ex.Sum(tuple(terms))
    return PhaseSpaceFunction(e, L, pairing)


@dataclass(frozen=True)
class HamiltonianField:
    """Coefficients of a vector field over (d/ds1, d/ds2, d/dt1, d/dt2)."""

    ds1: Expr
    ds2: Expr
    dt1: Expr
    dt2: Expr
    lam: Fraction

    def components(self):
        return (self.ds1, self.ds2, self.dt1, self.dt2)

    def constant_components(self):
        """Exact values when every coefficient is constant (linear energy)."""
        return tuple(ex.evaluate_exact(c, {}) for c in self.components())


def hamiltonian_field(U: AlgebraElement, lam,
                      pairing=PAIRING_CHART) -> HamiltonianField:
    """Hamiltonian field of the energy function, canonical-coordinate recipe.

    With momenta (s1, s2) and positions (t1, t2):
        xi_H = (dH/ds1) d/dt1 + (dH/ds2) d/dt2
             - (dH/dt1) d/ds1 - (dH/dt2) d/ds2
    For basis elements this reproduces the constant coefficient pattern
    (-L^2 e2, -L^2 e3, x_a/L^2, x_b/L^2).
    """
    H = energy(U, lam, pairing).expression
    d = {v: ex.simplify(ex.differentiate(H, v)) for v in CHART_VARS}
    minus_one = ex.Const(QC(Fraction(-1)))

    def neg(e):
        return ex.ZERO if e == ex.ZERO else ex.simplify(ex.Product((minus_one, e)))

    return HamiltonianField(neg(d["t1"]), neg(d["t2"]), d["s1"], d["s2"], _lam(lam))


# ---------------------------------------------------------------------------
# Exact 4x4 matrices (bivectors and two-forms over CHART_VARS order)
# ---------------------------------------------------------------------------

Mat4 = list  # 4x4 nested lists of Fractions


def mat(rows) -> Mat4:
    return [[Fraction(v) for v in row] for row in rows]


def mat_scale(m: Mat4, c) -> Mat4:
    c = Fraction(c)
    return [[c * v for v in row] for row in m]


def mat_add(a: Mat4, b: Mat4) -> Mat4:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_mul(a: Mat4, b: Mat4) -> Mat4:
    return [[sum(a[i][k] * b[k][j] for k in range(4)) for j in range(4)]
            for i in range(4)]


def mat_transpose(m: Mat4) -> Mat4:
    return [[m[j][i] for j in range(4)] for i in range(4)]


def mat_eq(a: Mat4, b: Mat4) -> bool:
    return all(a[i][j] == b[i][j] for i in range(4) for j in range(4))


def is_antisymmetric(m: Mat4) -> bool:
    return all(m[i][j] == -m[j][i] for i in range(4) for j in range(4))


def mat_rank(m: Mat4) -> int:
    work = [row[:] for row in m]
    rank = 0
    for col in range(4):
        pivot = None
        for r in range(rank, 4):
            if work[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        lead = work[rank][col]
        for r in range(4):
            if r != rank and work[r][col] != 0:
                factor = work[r][col] / lead
                work[r] = [a - factor * b for a, b in zip(work[r], work[rank])]
        rank += 1
    return rank


def is_symplectic_matrix(m: Mat4) -> bool:
    """Antisymmetric and of full rank (the SymplecticMatrix invariants)."""
    return is_antisymmetric(m) and mat_rank(m) == 4


# the unit cross-coupling matrix: pairs (s1, t2) with -1 and (s2, t1) with +1
UNIT_COUPLING: Mat4 = mat([
    [0, 0, 0, -1],
    [0, 0, 1, 0],
    [0, -1, 0, 0],
    [1, 0, 0, 0],
])

# canonical-recipe matrix: xi = DARBOUX . grad(H) over (s1, s2, t1, t2)
DARBOUX: Mat4 = mat([
    [0, 0, -1, 0],
    [0, 0, 0, -1],
    [1, 0, 0, 0],
    [0, 1, 0, 0],
])


def form_coupling(lam) -> Mat4:
    """The orbit two-form matrix on the chart: L times the unit coupling."""
    return mat_scale(UNIT_COUPLING, _lam(lam))


@dataclass(frozen=True)
class KirillovForms:
    """Both candidate matrices for the orbit's symplectic data, plus flags."""

    form_matrix: tuple        # L-scaled coupling (the two-form as written)
    unit_matrix: tuple        # unit-entry coupling
    scale: Fraction           # factor relating them
    note: str

    def form(self) -> Mat4:
        return [list(r) for r in self.form_matrix]

    def unit(self) -> Mat4:
        return [list(r) for r in self.unit_matrix]


def kirillov_matrix(lam) -> KirillovForms:
    """Return the L-scaled two-form matrix and the unit matrix side by side.

    The two candidates differ by the scale factor L; which normalization
    feeds the bidifferential contraction is settled operationally by the
    covariance solve (see moyal.solve_bivector), not guessed here.
    """
    L = _lam(lam)
    form = form_coupling(L)
    note = ("two-form matrix carries scale L relative to the unit matrix; "
            "the covariance solve fixes the contraction normalization")
    return KirillovForms(tuple(tuple(r) for r in form),
                         tuple(tuple(r) for r in UNIT_COUPLING), L, note)


def _as_fraction(v) -> Fraction:
    if isinstance(v, QC):
        if v.im != 0:
            raise ValueError("expected a real exact value")
        return v.re
    return Fraction(v)


def form_value(omega: Mat4, u, v) -> Fraction:
    """Evaluate a two-form matrix on two exact coefficient vectors."""
    uu = [_as_fraction(x) for x in u]
    vv = [_as_fraction(x) for x in v]
    total = Fraction(0)
    for i in range(4):
        for j in range(4):
            if omega[i][j] != 0:
                total += omega[i][j] * uu[i] * vv[j]
    return total


def gradient(f: PhaseSpaceFunction):
    """Exact constant gradient of a linear chart function."""
    out = []
    for v in CHART_VARS:
        d = ex.simplify(ex.differentiate(f.expression, v))
        out.append(ex.evaluate_exact(d, {}))
    return tuple(out)
