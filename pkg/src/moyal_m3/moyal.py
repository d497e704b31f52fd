"""Moyal star product on chart functions and the covariance machinery.

The star product is the formal series

    f * g = f g + sum_{r>=1} (nu^r / r!) P^r(f, g),      nu = hbar/(2i),

with constant-coefficient bidifferential contractions

    P^r(f, g) = sum over index tuples  W^{i1 j1} ... W^{ir jr}
                (iterated partial of f) (iterated partial of g)

driven by an antisymmetric coupling matrix W over (s1, s2, t1, t2).
For polynomial arguments the series terminates at the smaller total
degree and the result is exact; otherwise it truncates at a configured
order and says so.

Covariance.  The bracket (1/2 nu)(f*g - g*f) of two energy functions
should reproduce the energy function of their Lie bracket.  Whether that
can hold at the chart origin depends on which rotation coefficients pair
with the fiber coordinates and on the normalization of W; neither is
fully pinned down by the source construction, so ``solve_bivector``
derives the facts: it builds the full linear system over antisymmetric
couplings for every candidate pairing, reports which pairings admit an
exact solution (the literal chart pairing does not), and returns the
unique solved coupling W* for the covariant pairing together with the
scale relating it to the unit coupling matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import expr as ex
from .expr import QC, Expr
from .lie import AlgebraElement, basis, bracket
from .orbit import (CHART_VARS, DARBOUX, ORIGIN, PAIRING_CHART,
                    PAIRING_COVARIANT, PAIRING_NAMES, Mat4, UNIT_COUPLING,
                    energy, form_coupling, form_value, hamiltonian_field,
                    is_antisymmetric, mat_mul, mat_rank, mat_scale,
                    mat_transpose)

ORDERED_BASIS_PAIRS = tuple((i, j) for i in range(1, 7) for j in range(1, 7))


class StarError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

EXACT_BY_DEGREE = "exact-by-degree"


@dataclass(frozen=True)
class StarConfig:
    """Parameters of the star product.

    hbar: deformation scale (exact rational); nu = hbar/(2i).
    bivector: antisymmetric 4x4 coupling matrix over (s1, s2, t1, t2).
    max_order: truncation order for non-terminating series, or
        EXACT_BY_DEGREE to refuse truncation.
    energy_pairing: which rotation coefficients feed (s1, s2) when energy
        functions are built on behalf of the caller.
    """

    bivector: tuple
    hbar: Fraction = Fraction(1)
    max_order: object = 12
    energy_pairing: tuple = PAIRING_CHART

    @property
    def nu(self) -> QC:
        # hbar/(2i) = -i hbar / 2
        return QC(Fraction(0), -self.hbar / 2)

    def matrix(self) -> Mat4:
        return [list(r) for r in self.bivector]

    @staticmethod
    def with_matrix(W: Mat4, hbar=Fraction(1), max_order=12,
                    energy_pairing=PAIRING_CHART) -> "StarConfig":
        if not is_antisymmetric(W):
            raise StarError("bivector must be antisymmetric")
        nu_check = Fraction(hbar)
        return StarConfig(tuple(tuple(Fraction(v) for v in row) for row in W),
                          nu_check, max_order, energy_pairing)

    @staticmethod
    def covariant(lam, hbar=Fraction(1), max_order=12) -> "StarConfig":
        """Solved coupling W* with the covariant pairing (origin-exact)."""
        solve = solve_bivector(lam)
        return StarConfig.with_matrix(solve.matrix(), hbar, max_order,
                                      solve.pairing)

    @staticmethod
    def fourier(lam, hbar=Fraction(1), max_order=12) -> "StarConfig":
        """L-scaled unit coupling with the literal chart pairing.

        This is the convention under which the closed-form conjugated
        operator in ``repn.lhat_formula`` is the exact Fourier conjugate
        of left star-multiplication.
        """
        return StarConfig.with_matrix(form_coupling(lam), hbar, max_order,
                                      PAIRING_CHART)


# ---------------------------------------------------------------------------
# Bidifferential contractions
# ---------------------------------------------------------------------------

def _nonzero_entries(W: Mat4):
    out = []
    for i in range(4):
        for j in range(4):
            v = Fraction(W[i][j])
            if v != 0:
                out.append((i, j, v))
    return out


class _PartialCache:
    """Iterated chart-variable partials of a normal form, memoized."""

    def __init__(self, nf):
        self.cache = {(): nf}

    def get(self, alpha: tuple):
        if alpha in self.cache:
            return self.cache[alpha]
        prefix, last = alpha[:-1], alpha[-1]
        parent = self.get(prefix)
        out = ex.nf_diff(parent, CHART_VARS[last])
        self.cache[alpha] = out
        return out


def _bidiff_nf(fc: _PartialCache, gc: _PartialCache, r: int, W: Mat4):
    """P^r as a normal form, enumerating only nonzero coupling entries.

    A multiset of entries of size r contributes with the multinomial
    count of its orderings; the summation order is fixed by the sorted
    entry list, keeping results bit-reproducible.
    """
    if r <= 0:
        raise StarError(f"contraction order must be >= 1, got {r}")
    entries = _nonzero_entries(W)
    total = {}
    for combo in itertools.combinations_with_replacement(entries, r):
        counts = {}
        for item in combo:
            counts[item] = counts.get(item, 0) + 1
        mult = 1
        rem = r
        for c in counts.values():
            mult *= _binom(rem, c)
            rem -= c
        alpha_f = tuple(sorted(i for i, _, _ in combo))
        alpha_g = tuple(sorted(j for _, j, _ in combo))
        df = fc.get(alpha_f)
        if not df:
            continue
        dg = gc.get(alpha_g)
        if not dg:
            continue
        weight = Fraction(mult)
        for _, _, w in combo:
            weight *= w
        total = ex.nf_add(total, ex.nf_scale(ex.nf_mul(df, dg), QC(weight)))
    return total


def _binom(n: int, k: int) -> int:
    out = 1
    for t in range(1, k + 1):
        out = out * (n - t + 1) // t
    return out


def bidiff(f: Expr, g: Expr, r: int, W: Mat4) -> Expr:
    """The order-r bidifferential contraction P^r(f, g), simplified."""
    fc, gc = _PartialCache(ex.normal_form(f)), _PartialCache(ex.normal_form(g))
    return ex.nf_to_expr(_bidiff_nf(fc, gc, r, W))


def chart_degree(nf) -> int | None:
    """Total chart-variable degree of a normal form; None when unbounded.

    Any atom (exponential, trig, reciprocal) whose argument touches a
    chart variable makes iterated partials never vanish.
    """
    chart = set(CHART_VARS)
    best = 0
    for (mono, atoms) in nf.keys():
        for atom in atoms:
            arg = {k: v for k, v in atom[1]}
            for (amono, aatoms) in arg.keys():
                if any(name in chart for name, _ in amono):
                    return None
                for aat in aatoms:
                    return None  # nested atoms: treat as unbounded
        deg = sum(p for name, p in mono if name in chart and p > 0)
        best = max(best, deg)
    return best


# ---------------------------------------------------------------------------
# Star product and bracket
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarResult:
    expression: Expr
    exact: bool
    order: int


def star(f: Expr, g: Expr, cfg: StarConfig) -> StarResult:
    """f * g = fg + sum nu^r P^r(f,g)/r! up to the effective order.

    Terminates exactly at min(total chart degree of f, of g) when either
    side is polynomial in the chart variables; otherwise truncates at
    cfg.max_order with exact=False (or raises under EXACT_BY_DEGREE).
    """
    nf_f, nf_g = ex.normal_form(f), ex.normal_form(g)
    deg_f, deg_g = chart_degree(nf_f), chart_degree(nf_g)
    degrees = [d for d in (deg_f, deg_g) if d is not None]
    bound = min(degrees) if degrees else None

    if bound is None:
        if cfg.max_order == EXACT_BY_DEGREE:
            raise StarError("series does not terminate; set a finite max_order")
        stop, exact = int(cfg.max_order), False
    elif cfg.max_order == EXACT_BY_DEGREE:
        stop, exact = bound, True
    else:
        stop = min(bound, int(cfg.max_order))
        exact = stop == bound

    total = ex.nf_mul(nf_f, nf_g)
    fc, gc = _PartialCache(nf_f), _PartialCache(nf_g)
    W = cfg.matrix()
    nu_pow = QC(Fraction(1))
    factorial = 1
    for r in range(1, stop + 1):
        nu_pow = nu_pow * cfg.nu
        factorial *= r
        term = _bidiff_nf(fc, gc, r, W)
        if term:
            total = ex.nf_add(total, ex.nf_scale(
                term, nu_pow * QC(Fraction(1, factorial))))
    return StarResult(ex.nf_to_expr(total), exact, stop)


def moyal_bracket(f: Expr, g: Expr, cfg: StarConfig) -> Expr:
    """[f, g]_nu = (f*g - g*f) / (2 nu)."""
    fg = star(f, g, cfg)
    gf = star(g, f, cfg)
    diff = ex.nf_add(ex.normal_form(fg.expression),
                     ex.nf_scale(ex.normal_form(gf.expression),
                                 QC(Fraction(-1))))
    inv_two_nu = (cfg.nu * QC(Fraction(2))).inverse()
    return ex.nf_to_expr(ex.nf_scale(diff, inv_two_nu))


# ---------------------------------------------------------------------------
# Covariance solve
# ---------------------------------------------------------------------------

_UPPER = tuple((i, j) for i in range(4) for j in range(4) if i < j)
ALL_PAIRINGS = ((2, 3), (2, 1), (1, 2), (1, 3), (3, 1), (3, 2))


def _exact_solve(rows, rhs):
    """Gaussian elimination over Fractions.

    Returns (consistent, unique, solution or None).  The solution is a
    particular one with free variables set to zero (only reported when
    the system is consistent).
    """
    m = [row[:] + [b] for row, b in zip(rows, rhs)]
    ncols = len(rows[0])
    pivots = []
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        lead = m[rank][col]
        m[rank] = [v / lead for v in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        pivots.append(col)
        rank += 1
        if rank == len(m):
            break
    for r in range(rank, len(m)):
        if m[r][ncols] != 0:
            return False, False, None
    sol = [Fraction(0)] * ncols
    for r, col in enumerate(pivots):
        sol[col] = m[r][ncols]
    return True, rank == ncols, sol


def _pairing_system(lam: Fraction, pairing):
    """Rows (over the 6 upper-triangle unknowns) and rhs of the origin system."""
    grads = {}
    for i in range(1, 7):
        f = energy(basis(i), lam, pairing)
        g = []
        for v in CHART_VARS:
            d = ex.simplify(ex.differentiate(f.expression, v))
            g.append(ex.evaluate_exact(d, {}).re)
        grads[i] = g
    rows, rhs = [], []
    for (a, b) in ORDERED_BASIS_PAIRS:
        ga, gb = grads[a], grads[b]
        row = [ga[i] * gb[j] - ga[j] * gb[i] for (i, j) in _UPPER]
        rows.append(row)
        br = bracket(basis(a), basis(b))
        rhs.append(energy(br, lam, pairing).at(ORIGIN).re)
    return rows, rhs


@dataclass(frozen=True)
class PairingOutcome:
    pairing: tuple
    consistent: bool
    unique: bool
    matrix: tuple | None


@dataclass(frozen=True)
class BivectorSolve:
    """Result of the chart-origin covariance solve.

    pairing: the selected energy pairing (unique one admitting an exact,
        unit-coupling-proportional solution).
    scale: factor with W* = scale * UNIT_COUPLING (None if not proportional).
    permutation: coordinate relabeling needed to align with the unit
        coupling ('identity' when none).
    outcomes: solvability of every candidate pairing, chart pairing first.
    """

    lam: Fraction
    pairing: tuple
    bivector: tuple
    scale: Fraction | None
    permutation: str
    outcomes: tuple
    exact: bool

    def matrix(self) -> Mat4:
        return [list(r) for r in self.bivector]

    def describe(self) -> dict:
        return {
            "lambda": str(self.lam),
            "pairing": PAIRING_NAMES.get(self.pairing, str(self.pairing)),
            "bivector": [[str(v) for v in row] for row in self.matrix()],
            "scale_vs_unit_coupling": None if self.scale is None else str(self.scale),
            "coordinate_permutation": self.permutation,
            "exactly_solvable": self.exact,
            "pairing_outcomes": [
                {"pairing": PAIRING_NAMES.get(o.pairing, str(o.pairing)),
                 "consistent": o.consistent, "unique": o.unique}
                for o in self.outcomes],
        }


def _solution_to_matrix(sol) -> Mat4:
    W = [[Fraction(0)] * 4 for _ in range(4)]
    for val, (i, j) in zip(sol, _UPPER):
        W[i][j] = val
        W[j][i] = -val
    return W


_COORD_PERMS = (
    ("identity", (0, 1, 2, 3)),
    ("s1<->s2", (1, 0, 2, 3)),
    ("t1<->t2", (0, 1, 3, 2)),
    ("s1<->s2,t1<->t2", (1, 0, 3, 2)),
)


def _match_unit_coupling(W: Mat4):
    """Find (scale, permutation) with W = scale * P(UNIT_COUPLING)."""
    for name, perm in _COORD_PERMS:
        permuted = [[UNIT_COUPLING[perm[i]][perm[j]] for j in range(4)]
                    for i in range(4)]
        scale = None
        ok = True
        for i in range(4):
            for j in range(4):
                pv, wv = permuted[i][j], W[i][j]
                if pv == 0:
                    if wv != 0:
                        ok = False
                        break
                    continue
                ratio = wv / pv
                if scale is None:
                    scale = ratio
                elif ratio != scale:
                    ok = False
                    break
            if not ok:
                break
        if ok and scale not in (None, 0):
            return scale, name
    return None, "none"


def solve_bivector(lam) -> BivectorSolve:
    """Solve the chart-origin covariance conditions for the coupling matrix.

    For each candidate pairing of rotation coefficients with the fiber
    coordinates, sets up all 36 ordered-basis-pair conditions
    P^1(U~, T~)|origin = [U,T]~|origin as a linear system over the six
    independent entries of an antisymmetric W, and solves it exactly.

    The literal chart pairing yields an inconsistent system (reported,
    never patched): the element absent from the chart energies still has
    brackets with nonzero origin energy.  Exactly two pairings are
    consistent; the one whose unique solution is a scalar multiple of
    the unit coupling matrix (no coordinate relabeling) is selected.
    """
    L = Fraction(lam)
    if L <= 0:
        raise ValueError("orbit radius must be positive")
    outcomes = []
    candidates = []
    for pairing in ALL_PAIRINGS:
        rows, rhs = _pairing_system(L, pairing)
        consistent, unique, sol = _exact_solve(rows, rhs)
        W = _solution_to_matrix(sol) if consistent else None
        outcomes.append(PairingOutcome(
            pairing, consistent, unique,
            tuple(tuple(r) for r in W) if W else None))
        if consistent and unique:
            candidates.append((pairing, W))
    if not candidates:
        raise StarError("no pairing admits an exact covariance coupling")
    best = None
    for pairing, W in candidates:
        scale, perm = _match_unit_coupling(W)
        ranked = (0 if perm == "identity" else 1, pairing)
        if best is None or ranked < best[0]:
            best = (ranked, pairing, W, scale, perm)
    _, pairing, W, scale, perm = best
    if mat_rank(W) != 4:
        raise StarError("solved coupling is degenerate")
    return BivectorSolve(L, pairing, tuple(tuple(r) for r in W), scale, perm,
                         tuple(outcomes), True)


def consistent_form(W: Mat4) -> Mat4:
    """Two-form matrix Omega with omega(xi_f, xi_g) = P^1(f, g).

    Fields come from the canonical recipe xi = DARBOUX . grad, so Omega
    must be DARBOUX . W . DARBOUX^T (the recipe matrix is orthogonal).
    For the solved covariant coupling this lands exactly on the L-scaled
    unit coupling, tying the form normalization back to the solve.
    """
    return mat_mul(DARBOUX, mat_mul(W, mat_transpose(DARBOUX)))


# ---------------------------------------------------------------------------
# Covariance reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariancePair:
    """Residuals for one ordered basis pair (indices 1..6)."""

    pair: tuple
    bracket_minus_p1: ex.ZeroVerdict        # (a) Moyal bracket vs P^1
    p1_minus_form: ex.ZeroVerdict           # (b) P^1 vs form on fields
    p1_minus_energy: ex.ZeroVerdict         # (c) as functions
    origin_residual: QC                     # (c) at the chart origin
    residual_expression: Expr

    @property
    def origin_abs(self) -> float:
        return abs(self.origin_residual.to_complex())


def covariance_pair(a: int, b: int, lam, cfg: StarConfig) -> CovariancePair:
    """All three covariance residuals for one ordered basis pair."""
    L = Fraction(lam)
    U, T = basis(a), basis(b)
    fU = energy(U, L, cfg.energy_pairing)
    fT = energy(T, L, cfg.energy_pairing)
    W = cfg.matrix()

    p1 = bidiff(fU.expression, fT.expression, 1, W)
    mb = moyal_bracket(fU.expression, fT.expression, cfg)
    res_a = ex.is_zero(ex.simplify(mb - p1))

    xi_u = hamiltonian_field(U, L, cfg.energy_pairing).constant_components()
    xi_t = hamiltonian_field(T, L, cfg.energy_pairing).constant_components()
    omega = consistent_form(W)
    form_val = form_value(omega, xi_u, xi_t)
    res_b = ex.is_zero(ex.simplify(p1 - ex.const(form_val)))

    ebr = energy(bracket(U, T), L, cfg.energy_pairing)
    residual = ex.simplify(p1 - ebr.expression)
    res_c = ex.is_zero(residual)
    origin = ex.evaluate_exact(residual, ORIGIN.bindings())
    return CovariancePair((a, b), res_a, res_b, res_c, origin, residual)


def covariance_table(lam, cfg: StarConfig):
    """Residuals for all 36 ordered basis pairs under one configuration."""
    return [covariance_pair(a, b, lam, cfg) for (a, b) in ORDERED_BASIS_PAIRS]
