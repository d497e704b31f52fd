"""Representation operators and their machine checks.

Three ways of acting on functions meet here and are played against each
other:

* left star-multiplication ``l_left`` on chart functions,
* its partial-Fourier conjugate, both as a discrete transform pipeline
  and as the closed-form multiplication-plus-derivative operator
  ``lhat_formula`` in the variables (eta1, eta2, t1, t2),
* the geometric operators on the sphere: multiplication generators for
  translations, rotation-flow derivatives for rotations, and their
  closed-form exponentials (phase factors and rotation pullbacks), which
  assemble into the unitary representation.

The discrete transform uses the 1/(2 pi)-normalized convention in the
two fiber variables; on the symmetric power-of-two grid the continuum
phase corrections collapse to exact sign masks, so forward-inverse
round trips are bit-clean and Parseval holds to rounding.

Convention note: the derivative written against a rotation direction is
the angular (rotation-flow) derivative about that axis, realized as
pullback differentiation along exp(-theta X_j).  A naive Cartesian
partial would not preserve the sphere.  With this reading the closed
two-term form of the conjugated operator and the derivative of the
reference representation agree, which is exactly what
``conjugation_check`` and ``infinitesimal_check`` certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .expr import QC, Expr
from .lie import (AlgebraElement, GroupElement, basis, exp_algebra,
                  from_factors, identity, inv, mul)
from .moyal import StarConfig, star
from .orbit import CHART_VARS, PAIRING_CHART, energy, form_coupling

SPHERE_VARS = ("sigma1", "sigma2", "sigma3")
ETA_T_VARS = ("eta1", "eta2", "t1", "t2")

FLOW_STEP = 1e-6  # central-difference step for black-box flow derivatives


class AliasingError(ValueError):
    """Raised when grid samples do not decay at the boundary."""


# ---------------------------------------------------------------------------
# Fourier grid and the partial transform in the fiber variables
# ---------------------------------------------------------------------------

class FourierGrid:
    """Symmetric uniform grid for the two fiber variables and their duals.

    extent L: samples cover [-L, L) with n points per axis (n a power of
    two, n >= 16); the dual grid has spacing pi/L and the same layout.
    """

    def __init__(self, extent: float = 12.0, n: int = 256):
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError("grid size must be a power of two, at least 16")
        self.extent = float(extent)
        self.n = int(n)
        self.h = 2.0 * self.extent / self.n
        k = np.arange(self.n)
        self.s_axis = -self.extent + self.h * k
        self.eta_axis = (np.pi / self.extent) * (k - self.n // 2)
        sign = (-1.0) ** k
        self._mask = np.outer(sign, sign)

    def s_mesh(self):
        return np.meshgrid(self.s_axis, self.s_axis, indexing="ij")

    def eta_mesh(self):
        return np.meshgrid(self.eta_axis, self.eta_axis, indexing="ij")

    def sample_s(self, f: Expr) -> np.ndarray:
        fn = ex.compile_evaluator(f, ("s1", "s2"))
        a, b = self.s_mesh()
        return fn(a, b)

    def sample_eta(self, f: Expr) -> np.ndarray:
        fn = ex.compile_evaluator(f, ("eta1", "eta2"))
        a, b = self.eta_mesh()
        return fn(a, b)

    def check_decay(self, values: np.ndarray, threshold: float = 1e-12):
        values = np.asarray(values)
        rim = max(np.max(np.abs(values[0, :])), np.max(np.abs(values[-1, :])),
                  np.max(np.abs(values[:, 0])), np.max(np.abs(values[:, -1])))
        scale = max(1.0, float(np.max(np.abs(values))))
        if rim > threshold * scale:
            raise AliasingError(
                f"boundary magnitude {rim:.3e} exceeds decay guard "
                f"{threshold:.0e} (relative to peak {scale:.3e})")


def partial_fourier(values: np.ndarray, grid: FourierGrid,
                    check: bool = True) -> np.ndarray:
    """Forward transform: samples on the s-grid -> samples on the dual grid.

    Approximates (1/2pi) * integral of exp(-i s.eta) f(s) ds; on this
    grid the boundary/phase bookkeeping reduces to sign masks, so the
    only numerical content is the FFT itself.
    """
    values = np.asarray(values, dtype=complex)
    if check:
        grid.check_decay(values)
    return (grid.h ** 2 / (2.0 * np.pi)) * grid._mask * \
        np.fft.fft2(grid._mask * values)


def inverse_partial_fourier(values: np.ndarray, grid: FourierGrid,
                            check: bool = True) -> np.ndarray:
    """Inverse transform: samples on the dual grid -> samples on the s-grid."""
    values = np.asarray(values, dtype=complex)
    if check:
        grid.check_decay(values)
    return (2.0 * np.pi / grid.h ** 2) * grid._mask * \
        np.fft.ifft2(grid._mask * values)


def grid_norm(values: np.ndarray, spacing: float) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * spacing ** 2))


# ---------------------------------------------------------------------------
# Left star-multiplication
# ---------------------------------------------------------------------------

def l_left(U: AlgebraElement, f: Expr, lam, cfg: StarConfig) -> Expr:
    """(1/2 nu) U~ * f; exact, the series stops at order one.

    With the default deformation scale the pointwise term carries the
    coefficient i:  l_U f = i U~ f + (1/2) P^1(U~, f).
    """
    if U.is_zero:
        return ex.ZERO
    utilde = energy(U, lam, cfg.energy_pairing).expression
    product = star(utilde, f, cfg)
    inv_two_nu = (cfg.nu * QC(Fraction(2))).inverse()
    return ex.nf_to_expr(ex.nf_scale(ex.normal_form(product.expression),
                                     inv_two_nu))


# ---------------------------------------------------------------------------
# Closed-form conjugated operator on (eta, t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartOperator:
    """Multiplication plus first-order derivative terms on (eta, t)."""

    mult: Expr
    partials: tuple  # ((QC coefficient, variable name), ...)

    def apply_to_expression(self, f: Expr) -> Expr:
        total = ex.normal_form(ex.Product((self.mult, f))) if self.mult != ex.ZERO else {}
        for coeff, name in self.partials:
            piece = ex.nf_scale(ex.normal_form(ex.differentiate(f, name)), coeff)
            total = ex.nf_add(total, piece)
        return ex.nf_to_expr(total)

    def describe(self) -> dict:
        return {"mult": str(self.mult),
                "partials": [[str(ex.Const(c)), v] for c, v in self.partials]}


def lhat_formula(U: AlgebraElement, lam) -> ChartOperator:
    """The closed two-term form of the conjugated operator.

    i L (e1 + e2 u + e3 v) - (x2 d/dv - x3 d/du), with
        u = L t1 - (L^2/2) eta2,   v = L t2 + (L^2/2) eta1,
        d/du = (1/2L) d/dt1 - (1/L^2) d/deta2,
        d/dv = (1/2L) d/dt2 + (1/L^2) d/deta1.
    The first rotation coefficient does not act.
    """
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("orbit radius must be positive")
    half_L2 = L * L / 2

    u = ex.parse(f"({L})*t1 - ({half_L2})*eta2")
    v = ex.parse(f"({L})*t2 + ({half_L2})*eta1")

    iL = QC(Fraction(0), L)
    mult_terms = []
    if U.e1 != 0:
        mult_terms.append(ex.Const(iL * QC(U.e1)))
    if U.e2 != 0:
        mult_terms.append(ex.Product((ex.Const(iL * QC(U.e2)), u)))
    if U.e3 != 0:
        mult_terms.append(ex.Product((ex.Const(iL * QC(U.e3)), v)))
    if not mult_terms:
        mult = ex.ZERO
    elif len(mult_terms) == 1:
        mult = ex.simplify(mult_terms[0])
    else:
        mult = ex.simplify(ex.Sum(tuple(mult_terms)))

    partials = []

    def add(coeff: Fraction, name: str):
        if coeff != 0:
            partials.append((QC(coeff), name))

    # -x2 d/dv
    add(-U.x2 / (2 * L), "t2")
    add(-U.x2 / (L * L), "eta1")
    # +x3 d/du
    add(U.x3 / (2 * L), "t1")
    add(-U.x3 / (L * L), "eta2")
    return ChartOperator(mult, tuple(partials))


# ---------------------------------------------------------------------------
# Conjugation check: closed form vs transform pipeline
# ---------------------------------------------------------------------------

def split_eta_t(f: Expr):
    """Write f(eta, t) as a sum of products T_j(t) * G_j(eta).

    Works termwise on the normal form; every exponential/trig factor
    must depend on only one of the two variable groups.
    """
    eta_vars = {"eta1", "eta2"}
    t_vars = {"t1", "t2"}
    groups = {}
    for (mono, atoms), coeff in ex.normal_form(f).items():
        mono_eta = tuple((n, p) for n, p in mono if n in eta_vars)
        mono_t = tuple((n, p) for n, p in mono if n in t_vars)
        if len(mono_eta) + len(mono_t) != len(mono):
            raise ValueError(f"unexpected variable in test function: {mono}")
        atoms_eta, atoms_t = [], []
        for atom in atoms:
            if atom[0] == "exp":
                # exp(A(eta) + B(t)) factors across the groups
                arg_eta, arg_t = {}, {}
                for (amono, aat), acoeff in ex.nf_thaw(atom[1]).items():
                    names = {n for n, _ in amono}
                    if aat or not (names <= eta_vars or names <= t_vars):
                        raise ValueError(
                            "test function mixes eta and t inside a phase term")
                    side = arg_t if names and names <= t_vars else arg_eta
                    side[(amono, aat)] = acoeff
                if arg_eta:
                    atoms_eta.append(("exp", ex.nf_freeze(arg_eta)))
                if arg_t:
                    atoms_t.append(("exp", ex.nf_freeze(arg_t)))
                continue
            names = set()
            for (amono, _aat) in ex.nf_thaw(atom[1]).keys():
                names.update(n for n, _ in amono)
            if names <= eta_vars:
                atoms_eta.append(atom)
            elif names <= t_vars:
                atoms_t.append(atom)
            else:
                raise ValueError("test function mixes eta and t inside a factor")
        tkey = (mono_t, tuple(sorted(atoms_t)))
        ekey = (mono_eta, tuple(sorted(atoms_eta)))
        bucket = groups.setdefault(tkey, {})
        bucket[ekey] = bucket.get(ekey, QC(Fraction(0))) + coeff
    out = []
    for tkey in sorted(groups.keys()):
        t_expr = ex.nf_to_expr({tkey: QC(Fraction(1))})
        g_expr = ex.nf_to_expr({k: v for k, v in groups[tkey].items()
                                if not v.is_zero})
        out.append((t_expr, g_expr))
    return out


DEFAULT_T_SAMPLES = ((0.0, 0.0), (0.4, -0.3), (-0.25, 0.15))


@dataclass(frozen=True)
class ConjugationResult:
    residual: float
    norm: float
    operator: dict


def conjugation_check(U: AlgebraElement, lam, testf: Expr,
                      grid: FourierGrid,
                      t_samples=DEFAULT_T_SAMPLES) -> ConjugationResult:
    """Relative L2 residual between the two conjugation routes.

    Route A applies the closed-form operator symbolically and samples
    it.  Route B transports the test function to the fiber side with
    the inverse transform, applies left star-multiplication there (the
    coupling is the form-scaled one, under which the closed form was
    derived), and transforms back.  The t-dependence stays symbolic
    throughout route B; the fiber direction is handled spectrally, so
    the two routes share no differentiation machinery.
    """
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("orbit radius must be positive")
    lamf = float(L)

    eta1, eta2 = grid.eta_mesh()
    tvals = list(t_samples)

    # Route A: closed form, symbolic
    op = lhat_formula(U, L)
    a_expr = op.apply_to_expression(testf)
    a_fn = ex.compile_evaluator(a_expr, ETA_T_VARS)
    f_fn = ex.compile_evaluator(testf, ETA_T_VARS)

    # Route B: transform pipeline
    W = form_coupling(L)
    utilde = energy(U, L, PAIRING_CHART)
    grads = []
    for vname in CHART_VARS:
        d = ex.simplify(ex.differentiate(utilde.expression, vname))
        grads.append(ex.evaluate_exact(d, {}))
    const_term = ex.evaluate_exact(utilde.expression,
                                   {v: 0 for v in CHART_VARS}).to_complex()
    # coefficient of d/d(var_j) in P^1(U~, .) is (grad U~ . W)_j
    pcoeff = []
    for j in range(4):
        total = Fraction(0)
        for i in range(4):
            if W[i][j] != 0:
                total += grads[i].re * W[i][j]
        pcoeff.append(complex(total))

    s1, s2 = grid.s_mesh()
    pieces = {}  # frozen t normal form -> accumulated s-grid array

    def deposit(t_expr: Expr, arr: np.ndarray):
        key = tuple(sorted((k, v.key())
                           for k, v in ex.normal_form(t_expr).items()))
        if key in pieces:
            pieces[key] = (pieces[key][0], pieces[key][1] + arr)
        else:
            pieces[key] = (t_expr, arr)

    for t_expr, g_expr in split_eta_t(testf):
        gvals = grid.sample_eta(g_expr)
        g_s = inverse_partial_fourier(gvals, grid)
        ds1 = inverse_partial_fourier(1j * eta1 * gvals, grid, check=False)
        ds2 = inverse_partial_fourier(1j * eta2 * gvals, grid, check=False)
        c_s1, c_s2 = grads[0].to_complex(), grads[1].to_complex()
        c_t1, c_t2 = grads[2].to_complex(), grads[3].to_complex()

        # i * U~ * (T g)
        deposit(t_expr, 1j * (c_s1 * s1 + c_s2 * s2 + const_term) * g_s)
        if c_t1 != 0:
            deposit(ex.simplify(ex.Product((ex.Var("t1"), t_expr))),
                    1j * c_t1 * g_s)
        if c_t2 != 0:
            deposit(ex.simplify(ex.Product((ex.Var("t2"), t_expr))),
                    1j * c_t2 * g_s)
        # (1/2) P^1(U~, T g)
        deposit(t_expr, 0.5 * (pcoeff[0] * ds1 + pcoeff[1] * ds2))
        for coeff, tname in ((pcoeff[2], "t1"), (pcoeff[3], "t2")):
            if coeff != 0:
                dt = ex.simplify(ex.differentiate(t_expr, tname))
                if dt != ex.ZERO:
                    deposit(dt, 0.5 * coeff * g_s)

    transformed = [(t_expr, partial_fourier(arr, grid, check=False))
                   for t_expr, arr in pieces.values()]

    num = 0.0
    den = 0.0
    for (ta, tb) in tvals:
        a_vals = a_fn(eta1, eta2, np.full_like(eta1, ta), np.full_like(eta1, tb))
        b_vals = np.zeros_like(a_vals)
        for t_expr, karr in transformed:
            tv = ex.evaluate(t_expr, {"t1": ta, "t2": tb})
            b_vals = b_vals + tv * karr
        f_vals = f_fn(eta1, eta2, np.full_like(eta1, ta), np.full_like(eta1, tb))
        num += float(np.sum(np.abs(a_vals - b_vals) ** 2))
        den += float(np.sum(np.abs(f_vals) ** 2))
    norm = math.sqrt(den) if den > 0 else 1.0
    return ConjugationResult(math.sqrt(num) / norm, norm, op.describe())


# ---------------------------------------------------------------------------
# Sphere grid (Gauss-Legendre colatitude x uniform longitude)
# ---------------------------------------------------------------------------

class QuadratureGrid:
    """Quadrature nodes and weights on the sphere of radius lam."""

    def __init__(self, n_theta: int, n_phi: int, lam: float):
        if n_theta < 2 or n_phi < 4:
            raise ValueError("quadrature grid too small")
        lam = float(lam)
        if lam <= 0:
            raise ValueError("sphere radius must be positive")
        x, w = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        sin_t = np.sqrt(1.0 - x ** 2)
        nodes = np.empty((n_theta * n_phi, 3))
        weights = np.empty(n_theta * n_phi)
        k = 0
        for i in range(n_theta):
            for j in range(n_phi):
                nodes[k] = (lam * sin_t[i] * np.cos(phi[j]),
                            lam * sin_t[i] * np.sin(phi[j]),
                            lam * x[i])
                weights[k] = lam * lam * w[i] * (2.0 * np.pi / n_phi)
                k += 1
        self.n_theta, self.n_phi, self.lam = n_theta, n_phi, lam
        self.nodes = nodes
        self.weights = weights

    def inner(self, f_vals, g_vals) -> complex:
        return complex(np.sum(self.weights * np.conj(f_vals) * g_vals))

    @staticmethod
    def for_motion(lam: float, r, base: int = 24) -> "QuadratureGrid":
        """Node heuristic for oscillatory phases: n_theta >= 24 + 4*ceil(L|r|)."""
        n_theta = base + 4 * int(math.ceil(float(lam) * float(np.linalg.norm(r))))
        return QuadratureGrid(n_theta, 2 * n_theta, lam)


# ---------------------------------------------------------------------------
# Sphere operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scale:
    value: complex


@dataclass(frozen=True)
class MulExpr:
    expression: Expr


@dataclass(frozen=True)
class Pullback:
    """f -> f(M sigma) for a rotation matrix M (stored row-major tuple)."""

    matrix: tuple

    @staticmethod
    def of(M) -> "Pullback":
        M = np.asarray(M, dtype=float)
        return Pullback(tuple(tuple(float(v) for v in row) for row in M))

    def array(self) -> np.ndarray:
        return np.array(self.matrix)


@dataclass(frozen=True)
class FlowDeriv:
    """Rotation-flow derivative: f -> d/dtheta f(exp(-theta A) sigma) at 0.

    A is the rotation block of an algebra element (exact integers times
    coefficients); symbolic application uses the chain rule, black-box
    application central differences of the pullback flow.
    """

    element: AlgebraElement

    def skew(self) -> np.ndarray:
        return self.element.rotation_block_float()


class Operator:
    """Sum of composition chains of sphere primitives; linear by design."""

    def __init__(self, chains):
        self.chains = tuple(tuple(c) for c in chains)

    @staticmethod
    def identity() -> "Operator":
        return Operator(((),))

    @staticmethod
    def zero() -> "Operator":
        return Operator(())

    def then(self, other: "Operator") -> "Operator":
        """Composition self . other (other acts first)."""
        return Operator(tuple(a + b for a in self.chains for b in other.chains))

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.chains + other.chains)

    def scaled(self, c: complex) -> "Operator":
        return Operator(tuple((Scale(c),) + chain for chain in self.chains))

    # -- symbolic application -------------------------------------------------
    def apply_to_expression(self, f: Expr) -> Expr:
        total = {}
        for chain in self.chains:
            g = f
            for prim in reversed(chain):
                g = _prim_expr(prim, g)
            total = ex.nf_add(total, ex.normal_form(g))
        return ex.nf_to_expr(total)

    # -- numeric application --------------------------------------------------
    def apply_to_callable(self, f):
        """Compose into a callable over node arrays of shape (m, 3)."""
        fns = []
        for chain in self.chains:
            g = _as_callable(f)
            for prim in reversed(chain):
                g = _prim_callable(prim, g)
            fns.append(g)
        if not fns:
            return lambda nodes: np.zeros(len(nodes), dtype=complex)

        def run(nodes):
            nodes = np.asarray(nodes, dtype=float)
            out = fns[0](nodes)
            for fn in fns[1:]:
                out = out + fn(nodes)
            return out

        return run


def _as_callable(f):
    if callable(f):
        return f
    fn = ex.compile_evaluator(f, SPHERE_VARS)

    def run(nodes):
        nodes = np.asarray(nodes, dtype=float)
        return fn(nodes[:, 0], nodes[:, 1], nodes[:, 2])

    return run


def _prim_expr(prim, f: Expr) -> Expr:
    if isinstance(prim, Scale):
        return ex.Product((ex.Const(QC.of(prim.value)), f))
    if isinstance(prim, MulExpr):
        return ex.Product((prim.expression, f))
    if isinstance(prim, Pullback):
        sub = {}
        for k in range(3):
            terms = []
            for j in range(3):
                entry = prim.matrix[k][j]
                if entry != 0.0:
                    terms.append(ex.Product((ex.const(entry),
                                             ex.Var(SPHERE_VARS[j]))))
            sub[SPHERE_VARS[k]] = ex.Sum(tuple(terms)) if terms else ex.ZERO
        return ex.substitute(f, sub)
    if isinstance(prim, FlowDeriv):
        A = prim.element.to_matrix()
        total = {}
        for k in range(3):
            # -(A sigma)_k * d f / d sigma_k
            row_terms = []
            for j in range(3):
                if A[k][j] != 0:
                    row_terms.append(ex.Product((ex.Const(QC(-A[k][j])),
                                                 ex.Var(SPHERE_VARS[j]))))
            if not row_terms:
                continue
            coeff = ex.Sum(tuple(row_terms)) if len(row_terms) > 1 else row_terms[0]
            df = ex.differentiate(f, SPHERE_VARS[k])
            if df == ex.ZERO:
                continue
            total = ex.nf_add(total, ex.normal_form(ex.Product((coeff, df))))
        return ex.nf_to_expr(total)
    raise TypeError(f"unknown primitive {prim!r}")


def _prim_callable(prim, g):
    if isinstance(prim, Scale):
        return lambda nodes: prim.value * g(nodes)
    if isinstance(prim, MulExpr):
        m = _as_callable(prim.expression)
        return lambda nodes: m(nodes) * g(nodes)
    if isinstance(prim, Pullback):
        M = prim.array()
        return lambda nodes: g(np.asarray(nodes) @ M.T)
    if isinstance(prim, FlowDeriv):
        A = prim.skew()
        h = FLOW_STEP
        rot_p = _rodrigues(-h * A)
        rot_m = _rodrigues(h * A)

        def run(nodes):
            nodes = np.asarray(nodes)
            return (g(nodes @ rot_p.T) - g(nodes @ rot_m.T)) / (2.0 * h)

        return run
    raise TypeError(f"unknown primitive {prim!r}")


def _rodrigues(A: np.ndarray) -> np.ndarray:
    theta = math.sqrt(max(0.0, 0.5 * float(np.trace(A.T @ A))))
    A2 = A @ A
    if theta < 1e-12:
        return np.eye(3) + A + 0.5 * A2
    return np.eye(3) + (math.sin(theta) / theta) * A + \
        ((1.0 - math.cos(theta)) / theta ** 2) * A2


# ---------------------------------------------------------------------------
# Generators and unitaries
# ---------------------------------------------------------------------------

def _phase_expression(lam, r) -> Expr:
    L = Fraction(lam)
    terms = []
    for k in range(3):
        coeff = QC(Fraction(0), L * Fraction(float(r[k])))
        if not coeff.is_zero:
            terms.append(ex.Product((ex.Const(coeff), ex.Var(SPHERE_VARS[k]))))
    if not terms:
        return ex.ONE
    arg = ex.Sum(tuple(terms)) if len(terms) > 1 else terms[0]
    return ex.Func("exp", arg)


def generator(U: AlgebraElement, lam) -> Operator:
    """Derived action of an algebra element on sphere functions.

    Translation directions multiply by i*lam*sigma_i; rotation directions
    differentiate along the rotation flow.  Linear in the element.
    """
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("sphere radius must be positive")
    chains = []
    coeffs = (U.e1, U.e2, U.e3)
    terms = []
    for k in range(3):
        if coeffs[k] != 0:
            terms.append(ex.Product((ex.Const(QC(Fraction(0), L * coeffs[k])),
                                     ex.Var(SPHERE_VARS[k]))))
    if terms:
        mult = ex.Sum(tuple(terms)) if len(terms) > 1 else terms[0]
        chains.append((MulExpr(ex.simplify(mult)),))
    rot = AlgebraElement(U.x1, U.x2, U.x3)
    if not rot.is_zero:
        chains.append((FlowDeriv(rot),))
    return Operator(chains)


def reference_unitary(g: GroupElement, lam) -> Operator:
    """(U f)(sigma) = exp(i lam r.sigma) f(R^{-1} sigma)."""
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("sphere radius must be positive")
    return Operator(((MulExpr(_phase_expression(L, g.r)),
                      Pullback.of(g.R.T)),))


@dataclass(frozen=True)
class FactoredElement:
    """Group element given by its one-parameter factors (r, theta1..3)."""

    r: tuple
    theta: tuple

    @staticmethod
    def of(r, theta) -> "FactoredElement":
        return FactoredElement(tuple(float(v) for v in r),
                               tuple(float(v) for v in theta))

    def group_element(self) -> GroupElement:
        return from_factors(self.r, *self.theta)


def unitary(factored: FactoredElement, lam) -> Operator:
    """Product of closed-form exponentials in the factored order.

    The phase factor realizes the exponential of the three commuting
    translation generators at once (all three translation coefficients
    are included); each rotation factor is an exact pullback, so no
    series truncation enters anywhere.
    """
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("sphere radius must be positive")
    chain = [MulExpr(_phase_expression(L, factored.r))]
    for j, th in enumerate(factored.theta, start=1):
        M = exp_algebra(Fraction(-1) * Fraction(float(th)) * basis(j)).R
        chain.append(Pullback.of(M))
    return Operator((tuple(chain),))


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def homomorphism_check(g: GroupElement, h: GroupElement, lam, testfs,
                       grid: QuadratureGrid):
    """Sup-norm of U_g U_h f - U_{gh} f per test function, on grid nodes."""
    composed = reference_unitary(g, lam).then(reference_unitary(h, lam))
    direct = reference_unitary(mul(g, h), lam)
    out = []
    for f in testfs:
        lhs = composed.apply_to_callable(f)(grid.nodes)
        rhs = direct.apply_to_callable(f)(grid.nodes)
        out.append(float(np.max(np.abs(lhs - rhs))))
    return out


def unitarity_check(g: GroupElement, lam, f: Expr, h: Expr,
                    grid: QuadratureGrid | None = None,
                    refine_tol: float = 1e-10, max_refine: int = 4):
    """|<U_g f, U_g h> - <f, h>| by quadrature, refined until stable."""
    lamf = float(lam)
    if grid is None:
        grid = QuadratureGrid.for_motion(lamf, g.r)
    op = reference_unitary(g, lam)
    prev = None
    dev = None
    for _ in range(max_refine + 1):
        fv = _as_callable(f)(grid.nodes)
        hv = _as_callable(h)(grid.nodes)
        ufv = op.apply_to_callable(f)(grid.nodes)
        uhv = op.apply_to_callable(h)(grid.nodes)
        lhs = grid.inner(ufv, uhv)
        rhs = grid.inner(fv, hv)
        dev = abs(lhs - rhs)
        if prev is not None and abs(lhs - prev) < refine_tol:
            break
        prev = lhs
        grid = QuadratureGrid(grid.n_theta * 2, grid.n_phi * 2, lamf)
    return dev, grid


def infinitesimal_check(U: AlgebraElement, lam, f: Expr,
                        grid: QuadratureGrid, t: float = 1e-4) -> float:
    """Central difference of the unitary flow vs the generator, sup-norm."""
    plus = reference_unitary(exp_algebra(Fraction(t) * U), lam)
    minus = reference_unitary(exp_algebra(Fraction(-t) * U), lam)
    nodes = grid.nodes
    fp = plus.apply_to_callable(f)(nodes)
    fm = minus.apply_to_callable(f)(nodes)
    central = (fp - fm) / (2.0 * t)
    gen_vals = _as_callable(generator(U, lam).apply_to_expression(f))(nodes)
    return float(np.max(np.abs(central - gen_vals)))


def cauchy_check(U: AlgebraElement, lam, f: Expr, grid: QuadratureGrid,
                 times=(0.2, 0.5, 0.9, 1.3, 1.7), h: float = 1e-4):
    """The one-parameter flow solves dT/dt = generator(U) T, pointwise.

    Checks d/dt U_{exp(tU)} f against generator applied to the evolved
    function at interior times, by central differences in t.
    """
    nodes = grid.nodes
    gen = generator(U, lam)
    residuals = []
    for t0 in times:
        up = reference_unitary(exp_algebra(Fraction(t0 + h) * U), lam)
        um = reference_unitary(exp_algebra(Fraction(t0 - h) * U), lam)
        u0 = reference_unitary(exp_algebra(Fraction(t0) * U), lam)
        dd = (up.apply_to_callable(f)(nodes) - um.apply_to_callable(f)(nodes)) \
            / (2.0 * h)
        evolved = u0.apply_to_expression(f)
        rhs = gen.apply_to_callable(evolved)(nodes)
        residuals.append(float(np.max(np.abs(dd - rhs))))
    return residuals


def generator_bracket_residual(i: int, j: int, lam, f: Expr,
                               symbolic: bool = True,
                               grid: QuadratureGrid | None = None) -> float:
    """Residual of [gen_i, gen_j] f = gen([U_i, U_j]) f on a test function."""
    from .lie import bracket

    gi, gj = generator(basis(i), lam), generator(basis(j), lam)
    gb = generator(bracket(basis(i), basis(j)), lam) \
        if not bracket(basis(i), basis(j)).is_zero else Operator.zero()
    comm = gi.then(gj) + gj.then(gi).scaled(-1.0)
    if symbolic:
        lhs = comm.apply_to_expression(f)
        rhs = gb.apply_to_expression(f)
        verdict = ex.is_zero(ex.simplify(lhs - rhs))
        if verdict.value and verdict.decided_by == "symbolic":
            return 0.0
        if grid is None:
            grid = QuadratureGrid(24, 48, float(lam))
        vals = _as_callable(ex.simplify(lhs - rhs))(grid.nodes)
        return float(np.max(np.abs(vals)))
    if grid is None:
        grid = QuadratureGrid(24, 48, float(lam))
    lhs = comm.apply_to_callable(f)(grid.nodes)
    rhs = gb.apply_to_callable(f)(grid.nodes)
    return float(np.max(np.abs(lhs - rhs)))


def pointwise_residual(op_a: Operator, op_b: Operator, f: Expr,
                       grid: QuadratureGrid) -> float:
    va = op_a.apply_to_callable(f)(grid.nodes)
    vb = op_b.apply_to_callable(f)(grid.nodes)
    return float(np.max(np.abs(va - vb)))


SPHERE_TEST_SET = tuple(ex.parse(s) for s in
                        ("1", "sigma1", "sigma2", "sigma3", "sigma1*sigma2"))
