"""Star-polarization: character eigenfunctions of the commuting subalgebra.

The commuting translation directions give chart energies L (a constant),
L^2 t1 and L^2 t2.  A character chi assigns them the values L, L^2 chi1,
L^2 chi2, and the polarized functions are the solutions of

    f * E~_i = chi(E~_i) f .

Because the right factor is linear the star product has exactly two
terms, and the eigenvalue equation collapses to first-order equations

    (L / 2i) df/ds2 = (t1 - chi1) f,    (L / 2i) df/ds1 = (t2 - chi2) f,

whose solutions form the family

    f_chi(s, t) = exp( (2i/L) [ s2 (t1 - chi1) + s1 (t2 - chi2) ] ) psi(t).

Coupling note: reducing the eigenvalue equation to exactly those signed
equations forces the coupling matrix entries pairing (s1, t2) and
(s2, t1) to both equal -L (``polarization_bivector``).  That differs by
one reflection from the covariance-solved coupling and by a global sign
from the form-scaled one; the three pipelines are each verified under
their own internally exact convention and the report states all three.

The chart has two fiber variables, so only the two pairings realized by
the solution family exist; a formally third index is vacuous here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .expr import QC, Expr
from .moyal import EXACT_BY_DEGREE, StarConfig, star
from .orbit import PAIRING_CHART, Mat4, energy
from .lie import basis


def _lam(value) -> Fraction:
    L = Fraction(value)
    if L <= 0:
        raise ValueError("orbit radius must be positive")
    return L


def _qc(value) -> QC:
    return QC.of(value)


@dataclass(frozen=True)
class Character:
    """Character data (chi1, chi2) on the commuting subalgebra, with radius."""

    chi1: QC
    chi2: QC
    lam: Fraction

    @staticmethod
    def of(chi1, chi2, lam) -> "Character":
        return Character(_qc(chi1), _qc(chi2), _lam(lam))

    def value_on(self, i: int) -> QC:
        """chi(E~_i): L for i=1, L^2 chi1 for i=2, L^2 chi2 for i=3."""
        L2 = QC(self.lam * self.lam)
        if i == 1:
            return QC(self.lam)
        if i == 2:
            return L2 * self.chi1
        if i == 3:
            return L2 * self.chi2
        raise ValueError(f"subalgebra index {i} out of range 1..3")


def e_tilde(i: int, lam) -> Expr:
    """Chart energy of the i-th translation direction, coefficient one.

    i=1 gives the constant L; i=2, 3 give L^2 t1 and L^2 t2 (the L^2
    factor is kept explicit rather than normalized away).
    """
    L = _lam(lam)
    if i == 1:
        return ex.const(L)
    if i == 2:
        return ex.Product((ex.const(L * L), ex.Var("t1")))
    if i == 3:
        return ex.Product((ex.const(L * L), ex.Var("t2")))
    raise ValueError(f"subalgebra index {i} out of range 1..3")


def polarization_bivector(lam) -> Mat4:
    """The coupling under which the solution family is the exact eigenfamily.

    Both cross couplings (s1, t2) and (s2, t1) carry -L; with any other
    sign assignment one of the two first-order equations flips sign and
    the family solves neither.
    """
    L = _lam(lam)
    W = [[Fraction(0)] * 4 for _ in range(4)]
    W[0][3], W[3][0] = -L, L    # (s1, t2)
    W[1][2], W[2][1] = -L, L    # (s2, t1)
    return W


def polarized_config(lam, max_order=EXACT_BY_DEGREE) -> StarConfig:
    return StarConfig.with_matrix(polarization_bivector(lam),
                                  max_order=max_order,
                                  energy_pairing=PAIRING_CHART)


@dataclass(frozen=True)
class PolarizedFunction:
    """A member of the polarized family: phase factor times a base profile."""

    expression: Expr
    psi: Expr
    character: Character

    @property
    def lam(self) -> Fraction:
        return self.character.lam


def phase_exponent(chi: Character) -> Expr:
    """(2i/L) [ s2 (t1 - chi1) + s1 (t2 - chi2) ]."""
    two_i_over_L = QC(Fraction(0), Fraction(2) / chi.lam)
    s1, s2 = ex.Var("s1"), ex.Var("s2")
    t1, t2 = ex.Var("t1"), ex.Var("t2")
    inner = ex.Sum((
        ex.Product((s2, ex.Sum((t1, ex.Product((ex.Const(QC(Fraction(-1))),
                                                ex.Const(chi.chi1))))))),
        ex.Product((s1, ex.Sum((t2, ex.Product((ex.Const(QC(Fraction(-1))),
                                                ex.Const(chi.chi2))))))),
    ))
    return ex.simplify(ex.Product((ex.Const(two_i_over_L), inner)))


def make_f_chi(chi: Character, psi: Expr) -> PolarizedFunction:
    """Build the polarized function exp(phase) * psi(t).

    psi must depend on the base variables t1, t2 only.
    """
    bad = ex.variables(psi) - {"t1", "t2"}
    if bad:
        raise ValueError(f"profile must depend on t1, t2 only, found {sorted(bad)}")
    f = ex.simplify(ex.Product((ex.Func("exp", phase_exponent(chi)), psi)))
    return PolarizedFunction(f, psi, chi)


ODE_PAIRINGS = ((1, 2), (2, 1))  # (t-index, s-index) couplings of the family


def ode_residual(f: Expr, chi: Character, pairing: tuple, lam=None) -> Expr:
    """(L/2i) df/ds_j - (t_i - chi_i) f for pairing (i, j), simplified."""
    if pairing not in ODE_PAIRINGS:
        raise ValueError(f"pairing must be one of {ODE_PAIRINGS}")
    i, j = pairing
    L = _lam(lam) if lam is not None else chi.lam
    chi_i = chi.chi1 if i == 1 else chi.chi2
    lead = QC(L) * QC(Fraction(0), Fraction(2)).inverse()  # L/(2i)
    df = ex.differentiate(f, f"s{j}")
    rhs = ex.Product((ex.Sum((ex.Var(f"t{i}"),
                              ex.Product((ex.Const(QC(Fraction(-1))),
                                          ex.Const(chi_i))))), f))
    return ex.simplify(ex.Product((ex.Const(lead), df)) - rhs)


@dataclass(frozen=True)
class EigenCheck:
    residual: Expr
    verdict: ex.ZeroVerdict


def eigen_check(f: PolarizedFunction, i: int, lam=None,
                cfg: StarConfig | None = None) -> EigenCheck:
    """Residual of f * E~_i = chi(E~_i) f, with the exact two-term product."""
    L = _lam(lam) if lam is not None else f.lam
    if cfg is None:
        cfg = polarized_config(L)
    rhs = ex.nf_scale(ex.normal_form(f.expression), f.character.value_on(i))
    result = star(f.expression, e_tilde(i, L), cfg)
    residual = ex.nf_to_expr(ex.nf_add(ex.normal_form(result.expression),
                                       ex.nf_scale(rhs, QC(Fraction(-1)))))
    return EigenCheck(residual, ex.is_zero(residual))


def strip_phase(g: Expr, chi: Character) -> Expr:
    """Divide by the family phase: g * exp(-phase), simplified."""
    neg = ex.nf_scale(ex.normal_form(phase_exponent(chi)), QC(Fraction(-1)))
    return ex.simplify(ex.Product((ex.Func("exp", ex.nf_to_expr(neg)), g)))


def is_polarized_form(g: Expr, chi: Character) -> bool:
    """Does g equal (family phase) times a profile in t1, t2 alone?"""
    quotient = strip_phase(g, chi)
    return not (ex.variables(quotient) & {"s1", "s2"})


def generator_stability(chi: Character, psi: Expr, lam=None,
                        cfg: StarConfig | None = None) -> dict:
    """Left star-multiplication by translation energies preserves the family.

    Returns the transformed profiles for E1, E2, E3 (each still a
    function of t alone when the family is stable).
    """
    from .repn import l_left

    L = _lam(lam) if lam is not None else chi.lam
    if cfg is None:
        cfg = polarized_config(L)
    f = make_f_chi(chi, psi)
    out = {}
    for i, name in ((4, "E1"), (5, "E2"), (6, "E3")):
        g = l_left(basis(i), f.expression, L, cfg)
        stable = is_polarized_form(g, chi)
        out[name] = {"stable": stable,
                     "profile": str(strip_phase(g, chi)) if stable else None}
    return out


def superposition_demo(psi: Expr, lam, box=(-1.0, 1.0), n: int = 9,
                       s_extent: float = 6.0, s_points: int = 48,
                       t_point=(0.1, -0.2)) -> dict:
    """Finite-box quadrature over characters, with a grid L2 estimate.

    Averages family members over an n x n grid of real (chi1, chi2) in
    the box and reports the squared-integral estimate of the result over
    an (s1, s2) window, demonstrating square-integrability numerically.
    The untruncated character integral is not constructed.
    """
    L = _lam(lam)
    lo, hi = box
    step = (hi - lo) / (n - 1) if n > 1 else 1.0
    axis = np.linspace(-s_extent, s_extent, s_points)
    S1, S2 = np.meshgrid(axis, axis, indexing="ij")
    total = np.zeros_like(S1, dtype=complex)
    t1v, t2v = t_point
    for a in range(n):
        for b in range(n):
            chi = Character.of(lo + a * step, lo + b * step, L)
            f = make_f_chi(chi, psi)
            fn = ex.compile_evaluator(f.expression, ("s1", "s2", "t1", "t2"))
            total += fn(S1, S2, np.full_like(S1, t1v), np.full_like(S1, t2v))
    total *= step * step
    ds = axis[1] - axis[0]
    norm_sq = float(np.sum(np.abs(total) ** 2) * ds * ds)
    peak = float(np.max(np.abs(total)))
    edge = float(max(np.max(np.abs(total[0, :])), np.max(np.abs(total[-1, :]))))
    return {"l2_squared_estimate": norm_sq, "peak": peak,
            "edge_magnitude": edge, "chi_box": [lo, hi], "chi_points": n}
