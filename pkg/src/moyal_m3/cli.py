"""Command-line verification front end.

Subcommands
    verify-algebra       bracket/Jacobi/group-law/coadjoint checks
    verify-covariance    star-product covariance residuals on one orbit
    verify-rep           Fourier conjugation + representation checks
    verify-polarization  polarized-family eigen and first-order residuals
    fourier-check        the discrete transform in isolation
    orbit                classify functionals / evaluate the chart
    star-eval            star product of two user expressions

Common flags: --out FILE (JSON to file instead of stdout), --csv FILE
(delimited grid/table dump), --figures DIR (render figures alongside the
delimited output), --seed N, --timing (include wall time; off by default
so identical runs stay byte-identical), --tol.<name> VALUE overrides.

Exit code 0 when every check passes, 1 when any check fails, 2 for
usage or precondition errors.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import lie, moyal, orbit, polarization, repn
from .report import (CheckRecord, ReportDocument, ToleranceSet, run_checks,
                     write_csv)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Seeded test-data generators
# ---------------------------------------------------------------------------

def _rand_fraction(rng, lo=-4, hi=4, den=3) -> Fraction:
    num = int(rng.integers(lo, hi + 1))
    d = int(rng.integers(1, den + 1))
    return Fraction(num, d)


def random_poly(rng, names, degree: int, terms: int) -> ex.Expr:
    monos = [()]
    for d in range(1, degree + 1):
        monos.extend(itertools.combinations_with_replacement(names, d))
    parts = []
    for _ in range(terms):
        mono = monos[int(rng.integers(0, len(monos)))]
        c = _rand_fraction(rng)
        if c == 0:
            c = Fraction(1)
        factors = [ex.const(c)] + [ex.Var(n) for n in mono]
        parts.append(ex.Product(tuple(factors)) if len(factors) > 1 else factors[0])
    return ex.simplify(ex.Sum(tuple(parts)) if len(parts) > 1 else parts[0])


def gaussian_test_family(rng, count: int):
    """Gaussian windows on both variable groups times random small polys."""
    window = ex.parse("exp(-(eta1^2+eta2^2)/2)*exp(-(t1^2+t2^2)/2)")
    out = []
    for _ in range(count):
        poly = random_poly(rng, ("eta1", "eta2", "t1", "t2"), 2, 4)
        if ex.is_zero(poly).value:
            poly = ex.ONE
        out.append(ex.simplify(ex.Product((window, poly))))
    return out


def random_factored(rng, spread=1.5) -> repn.FactoredElement:
    r = rng.uniform(-spread, spread, 3)
    th = rng.uniform(-np.pi, np.pi, 3)
    return repn.FactoredElement.of(r, th)


def sphere_gaussian_family(rng, count: int):
    """Smooth sphere functions: polynomial times exp of a linear form."""
    out = []
    for _ in range(count):
        poly = random_poly(rng, repn.SPHERE_VARS, 2, 3)
        a = [_rand_fraction(rng, -1, 1, 2) for _ in range(3)]
        arg_terms = [ex.Product((ex.const(c), ex.Var(v)))
                     for c, v in zip(a, repn.SPHERE_VARS) if c != 0]
        if arg_terms:
            window = ex.Func("exp", ex.Sum(tuple(arg_terms))
                             if len(arg_terms) > 1 else arg_terms[0])
            out.append(ex.simplify(ex.Product((window, poly))))
        else:
            out.append(poly)
    return out


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def suite_algebra(tols: ToleranceSet, seed: int):
    rng = np.random.default_rng(seed)
    records = []
    csv_rows = []

    mismatches = 0
    for i in range(1, 7):
        for j in range(1, 7):
            a = lie.bracket(lie.basis(i), lie.basis(j))
            b = lie.bracket_via_matrices(lie.basis(i), lie.basis(j))
            if a != b:
                mismatches += 1
            csv_rows.append((lie.BASIS_NAMES[i - 1], lie.BASIS_NAMES[j - 1],
                             repr(a)))
    records.append(CheckRecord.from_residual(
        "bracket-vs-matrix-commutator", "algebra/bracket", mismatches,
        tols["symbolic"], {"pairs": 36}))

    jac = 0
    for a, b, c in itertools.combinations(range(1, 7), 3):
        U, T, V = lie.basis(a), lie.basis(b), lie.basis(c)
        s = lie.bracket(U, lie.bracket(T, V)) + \
            lie.bracket(T, lie.bracket(V, U)) + \
            lie.bracket(V, lie.bracket(U, T))
        if not s.is_zero:
            jac += 1
    records.append(CheckRecord.from_residual(
        "jacobi-identity", "algebra/jacobi", jac, tols["symbolic"],
        {"triples": 20}))

    anti = 0
    for i in range(1, 7):
        for j in range(1, 7):
            if lie.bracket(lie.basis(i), lie.basis(j)) != \
                    -lie.bracket(lie.basis(j), lie.basis(i)):
                anti += 1
    records.append(CheckRecord.from_residual(
        "bracket-antisymmetry", "algebra/antisymmetry", anti,
        tols["symbolic"]))

    flat = [sum(([float(v) for v in row] for row in lie.basis(i).to_matrix()),
                []) for i in range(1, 7)]
    rank = int(np.linalg.matrix_rank(np.array(flat)))
    records.append(CheckRecord.from_residual(
        "basis-linear-independence", "algebra/basis", 6 - rank,
        tols["symbolic"]))

    worst = 0.0
    for _ in range(20):
        U = lie.AlgebraElement(*[_rand_fraction(rng) for _ in range(6)])
        g = lie.exp_algebra(U)
        a4 = np.array([[float(v) for v in row] for row in U.to_matrix()])
        # scaling-and-squaring series oracle
        squarings = max(0, int(np.ceil(np.log2(max(1.0, np.max(np.abs(a4)))))) + 2)
        small = a4 / (2 ** squarings)
        m = np.zeros((4, 4))
        term = np.eye(4)
        for k in range(1, 21):
            m += term
            term = term @ small / k
        for _ in range(squarings):
            m = m @ m
        worst = max(worst, float(np.max(np.abs(g.to_matrix4() - m))))
    records.append(CheckRecord.from_residual(
        "exponential-vs-series", "algebra/exponential", worst,
        tols["float-exact"], {"samples": 20}))

    worst = 0.0
    for _ in range(20):
        gs = [random_factored(rng).group_element() for _ in range(3)]
        lhs = lie.mul(lie.mul(gs[0], gs[1]), gs[2])
        rhs = lie.mul(gs[0], lie.mul(gs[1], gs[2]))
        oracle = gs[0].to_matrix4() @ gs[1].to_matrix4() @ gs[2].to_matrix4()
        worst = max(worst,
                    float(np.max(np.abs(lhs.to_matrix4() - rhs.to_matrix4()))),
                    float(np.max(np.abs(lhs.to_matrix4() - oracle))))
    records.append(CheckRecord.from_residual(
        "group-associativity", "group/associativity", worst,
        tols["float-exact"], {"samples": 20}))

    worst = 0.0
    for _ in range(20):
        g = random_factored(rng).group_element()
        worst = max(worst, float(np.max(np.abs(
            lie.mul(g, lie.inv(g)).to_matrix4() - np.eye(4)))))
    records.append(CheckRecord.from_residual(
        "inverse-law", "group/inverse", worst, tols["float-exact"]))

    worst = 0.0
    for _ in range(20):
        g = random_factored(rng).group_element()
        h = random_factored(rng).group_element()
        F = lie.DualFunctional(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3))
        lhs = lie.coadjoint(lie.mul(g, h), F)
        rhs = lie.coadjoint(g, lie.coadjoint(h, F))
        worst = max(worst,
                    float(np.max(np.abs(lhs.mu - rhs.mu))),
                    float(np.max(np.abs(lhs.alpha - rhs.alpha))))
    records.append(CheckRecord.from_residual(
        "coadjoint-left-action", "coadjoint/action", worst,
        tols["float-exact"], {"samples": 20}))

    worst = 0.0
    for _ in range(20):
        g = random_factored(rng).group_element()
        F = lie.DualFunctional(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3))
        moved = lie.coadjoint(g, F)
        worst = max(worst, abs(float(np.linalg.norm(moved.alpha)) -
                               float(np.linalg.norm(F.alpha))))
    records.append(CheckRecord.from_residual(
        "orbit-radius-invariance", "coadjoint/invariant", worst,
        tols["float-exact"]))

    g = lie.exp_algebra(Fraction(3, 2) * lie.basis(4))
    worst = float(np.max(np.abs(g.R - np.eye(3)))) + \
        float(np.max(np.abs(g.r - np.array([1.5, 0, 0]))))
    th = 0.7
    rot = lie.exp_algebra(Fraction(th) * lie.basis(1)).R
    expected = np.array([[np.cos(th), -np.sin(th), 0],
                         [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    worst = max(worst, float(np.max(np.abs(rot - expected))))
    records.append(CheckRecord.from_residual(
        "one-parameter-subgroups", "group/factors", worst,
        tols["float-exact"]))

    header = ("left", "right", "bracket")
    return records, header, csv_rows, None


def suite_covariance(tols: ToleranceSet, seed: int, lam: Fraction,
                     bivector: str):
    solve = moyal.solve_bivector(lam)
    if bivector == "solved":
        cfg = moyal.StarConfig.with_matrix(
            solve.matrix(), energy_pairing=solve.pairing)
    elif bivector == "eq29":
        cfg = moyal.StarConfig.with_matrix(
            [list(r) for r in moyal.UNIT_COUPLING],
            energy_pairing=orbit.PAIRING_CHART)
    else:
        raise UsageError(f"unknown bivector choice {bivector!r}")

    table = moyal.covariance_table(lam, cfg)
    records = []
    csv_rows = []
    pair_table = []
    origin_matrix = [[0.0] * 6 for _ in range(6)]
    a_fail = b_fail = 0
    c_origin_worst = 0.0
    func_level = 0
    for pair in table:
        i, j = pair.pair
        if not pair.bracket_minus_p1.value:
            a_fail += 1
        if not pair.p1_minus_form.value:
            b_fail += 1
        c_origin_worst = max(c_origin_worst, pair.origin_abs)
        origin_matrix[i - 1][j - 1] = pair.origin_abs
        if pair.p1_minus_energy.value:
            func_level += 1
        row = (lie.BASIS_NAMES[i - 1], lie.BASIS_NAMES[j - 1],
               int(pair.bracket_minus_p1.value),
               int(pair.p1_minus_form.value),
               pair.origin_abs,
               int(pair.p1_minus_energy.value))
        csv_rows.append(row)
        pair_table.append({
            "pair": f"{row[0]},{row[1]}",
            "bracket_eq_p1": bool(row[2]),
            "p1_eq_form": bool(row[3]),
            "origin_residual": pair.origin_abs,
            "function_level": bool(row[5]),
        })
    records.append(CheckRecord.from_residual(
        "moyal-bracket-equals-first-contraction", "covariance/bracket",
        a_fail, tols["symbolic"], {"pairs": 36}))
    records.append(CheckRecord.from_residual(
        "first-contraction-equals-form-on-fields", "covariance/form",
        b_fail, tols["symbolic"], {"pairs": 36}))
    records.append(CheckRecord.from_residual(
        "origin-covariance-residual", "covariance/origin",
        c_origin_worst, tols["symbolic"],
        {"pairs": 36, "function-level-pairs": func_level,
         "table": pair_table}))

    rng = np.random.default_rng(seed)
    high_order = 0
    for (a, b) in moyal.ORDERED_BASIS_PAIRS:
        fU = orbit.energy(lie.basis(a), lam, cfg.energy_pairing).expression
        fT = orbit.energy(lie.basis(b), lam, cfg.energy_pairing).expression
        for r in (2, 3):
            p = moyal.bidiff(fU, fT, r, cfg.matrix())
            if not ex.is_zero(p).value:
                high_order += 1
    records.append(CheckRecord.from_residual(
        "higher-contractions-vanish-on-linear", "covariance/linearity",
        high_order, tols["symbolic"], {"orders": [2, 3]}))

    anti = 0
    for _ in range(10):
        f = random_poly(rng, orbit.CHART_VARS, 3, 4)
        g = random_poly(rng, orbit.CHART_VARS, 3, 4)
        for r in (1, 2):
            lhs = moyal.bidiff(f, g, r, cfg.matrix())
            rhs = moyal.bidiff(g, f, r, cfg.matrix())
            sign = -1 if r % 2 else 1
            if not ex.is_zero(ex.simplify(lhs - sign * rhs)).value:
                anti += 1
    records.append(CheckRecord.from_residual(
        "contraction-parity", "covariance/parity", anti, tols["symbolic"],
        {"samples": 10}))

    config_extra = {
        "bivector": bivector,
        "solve": solve.describe(),
    }
    header = ("left", "right", "bracket_eq_p1", "p1_eq_form",
              "origin_residual", "function_level")
    figure_payload = ("covariance", origin_matrix)
    return records, header, csv_rows, (config_extra, figure_payload)


def suite_fourier(tols: ToleranceSet, seed: int, n: int, extent: float):
    grid = repn.FourierGrid(extent, n)
    records = []
    g_expr = ex.parse("exp(-(s1^2+s2^2)/2)")
    fvals = grid.sample_s(g_expr)
    tvals = repn.partial_fourier(fvals, grid)
    target_fn = ex.compile_evaluator(ex.parse("exp(-(eta1^2+eta2^2)/2)"),
                                     ("eta1", "eta2"))
    target = target_fn(*grid.eta_mesh())
    records.append(CheckRecord.from_residual(
        "gaussian-self-duality", "fourier/self-dual",
        float(np.max(np.abs(tvals - target))), tols["gaussian-self-dual"]))

    back = repn.inverse_partial_fourier(tvals, grid)
    records.append(CheckRecord.from_residual(
        "round-trip-identity", "fourier/inverse",
        float(np.max(np.abs(back - fvals))), tols["fourier-roundtrip"]))

    records.append(CheckRecord.from_residual(
        "parseval", "fourier/parseval",
        abs(repn.grid_norm(tvals, np.pi / grid.extent) -
            repn.grid_norm(fvals, grid.h)), tols["parseval"]))

    # F(s1 f) = i dF(f)/d eta1, checked against the closed-form Gaussian
    # transform derivative  i * d/deta1 exp(-|eta|^2/2) = -i eta1 exp(..)
    s1f = grid.sample_s(ex.parse("s1*exp(-(s1^2+s2^2)/2)"))
    lhs = repn.partial_fourier(s1f, grid)
    eta1, _ = grid.eta_mesh()
    rhs = -1j * eta1 * target
    records.append(CheckRecord.from_residual(
        "coordinate-multiplication-rule", "fourier/derivative-rule",
        float(np.max(np.abs(lhs - rhs))), tols["derivative-rule"]))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        poly = random_poly(rng, ("s1", "s2"), 2, 3)
        f = ex.simplify(ex.Product((poly, g_expr)))
        v = grid.sample_s(f)
        worst = max(worst, float(np.max(np.abs(
            repn.inverse_partial_fourier(repn.partial_fourier(v, grid), grid)
            - v))))
    records.append(CheckRecord.from_residual(
        "round-trip-on-family", "fourier/inverse", worst,
        tols["fourier-roundtrip"], {"samples": 3}))

    guard_ok = 0.0
    try:
        repn.partial_fourier(np.ones((grid.n, grid.n)), grid)
        guard_ok = 1.0
    except repn.AliasingError:
        pass
    records.append(CheckRecord.from_residual(
        "aliasing-guard-trips", "plumbing", guard_ok, tols["symbolic"]))

    s1m, s2m = grid.s_mesh()
    csv_rows = list(zip(np.ravel(s1m)[:: max(1, n // 32)],
                        np.ravel(s2m)[:: max(1, n // 32)],
                        np.abs(np.ravel(fvals))[:: max(1, n // 32)]))
    header = ("s1", "s2", "abs_f")
    figure_payload = ("fourier", (grid, fvals, tvals, target))
    return records, header, csv_rows, (None, figure_payload)


def suite_rep(tols: ToleranceSet, seed: int, lam: Fraction, n: int,
              extent: float, grid_spec: tuple | None):
    rng = np.random.default_rng(seed)
    records = []
    csv_rows = []

    fgrid = repn.FourierGrid(extent, n)
    family = gaussian_test_family(rng, 10)
    worst = 0.0
    for i in range(1, 7):
        for f in family:
            res = repn.conjugation_check(lie.basis(i), lam, f, fgrid)
            worst = max(worst, res.residual)
    records.append(CheckRecord.from_residual(
        "fourier-conjugation", "representation/conjugation", worst,
        tols["fft"], {"directions": 6, "test_functions": len(family)}))

    gauss = fgrid.sample_s(ex.parse("exp(-(s1^2+s2^2)/2)"))
    records.append(CheckRecord.from_residual(
        "parseval", "fourier/parseval",
        abs(repn.grid_norm(repn.partial_fourier(gauss, fgrid),
                           np.pi / fgrid.extent) -
            repn.grid_norm(gauss, fgrid.h)), tols["parseval"]))

    if grid_spec is None:
        qgrid = repn.QuadratureGrid(24, 48, float(lam))
    else:
        qgrid = repn.QuadratureGrid(grid_spec[0], grid_spec[1], float(lam))

    worst = 0.0
    for _ in range(50):
        fac = random_factored(rng)
        g = fac.group_element()
        op_a = repn.unitary(fac, lam)
        op_b = repn.reference_unitary(g, lam)
        for f in repn.SPHERE_TEST_SET:
            worst = max(worst, repn.pointwise_residual(op_a, op_b, f, qgrid))
    records.append(CheckRecord.from_residual(
        "factored-unitary-equals-reference", "representation/exponential",
        worst, tols["pointwise"], {"samples": 50}))

    worst = 0.0
    for _ in range(50):
        g = random_factored(rng).group_element()
        h = random_factored(rng).group_element()
        res = repn.homomorphism_check(g, h, lam, repn.SPHERE_TEST_SET, qgrid)
        worst = max(worst, max(res))
    records.append(CheckRecord.from_residual(
        "homomorphism", "representation/homomorphism", worst,
        tols["homomorphism"], {"samples": 50}))

    fam = sphere_gaussian_family(rng, 3)
    worst = 0.0
    for _ in range(6):
        g = random_factored(rng, spread=1.0).group_element()
        dev, _ = repn.unitarity_check(g, lam, fam[0], fam[1])
        worst = max(worst, dev)
    records.append(CheckRecord.from_residual(
        "unitarity", "representation/unitarity", worst, tols["unitarity"],
        {"samples": 6}))

    worst = 0.0
    for i in range(1, 7):
        for f in repn.SPHERE_TEST_SET:
            worst = max(worst, repn.infinitesimal_check(
                lie.basis(i), lam, f, qgrid))
    records.append(CheckRecord.from_residual(
        "infinitesimal-generators", "representation/derivative", worst,
        tols["finite-difference"], {"step": 1e-4}))

    worst = 0.0
    for i in range(1, 7):
        for j in range(i + 1, 7):
            for f in repn.SPHERE_TEST_SET:
                worst = max(worst, repn.generator_bracket_residual(
                    i, j, lam, f, symbolic=True))
    records.append(CheckRecord.from_residual(
        "generator-bracket-relations", "representation/brackets", worst,
        tols["generator-bracket"]))

    worst = 0.0
    for i in (1, 4, 5):
        res = repn.cauchy_check(lie.basis(i), lam, ex.parse("sigma3"), qgrid)
        worst = max(worst, max(res))
    records.append(CheckRecord.from_residual(
        "flow-solves-generator-equation", "representation/flow", worst,
        tols["finite-difference"]))

    for rec in records:
        csv_rows.append((rec.name, rec.residual, rec.tolerance,
                         "pass" if rec.passed else "fail"))
    header = ("check", "residual", "tolerance", "verdict")
    return records, header, csv_rows, (None, ("bars", records))


def suite_polarization(tols: ToleranceSet, seed: int, lam: Fraction,
                       chi_center):
    records = []
    csv_rows = []
    chi_offsets = (Fraction(-1, 2), Fraction(0), Fraction(1, 2))
    profiles = [ex.parse(s) for s in
                ("1", "t1", "t2", "t1^2", "t1*t2", "1 + t1 - 2*t2 + t2^2")]
    c1_0, c2_0 = chi_center

    eigen_fail = 0
    ode_fail = 0
    for d1 in chi_offsets:
        for d2 in chi_offsets:
            chi = polarization.Character.of(ex.QC.of(c1_0) + ex.QC(d1),
                                            ex.QC.of(c2_0) + ex.QC(d2), lam)
            for psi in profiles:
                f = polarization.make_f_chi(chi, psi)
                for i in (1, 2, 3):
                    chk = polarization.eigen_check(f, i)
                    symbolic_zero = chk.verdict.value and \
                        chk.verdict.decided_by == "symbolic"
                    if not symbolic_zero:
                        eigen_fail += 1
                    csv_rows.append((str(chi.chi1.re), str(chi.chi2.re),
                                     str(psi), i, int(symbolic_zero)))
                for pairing in polarization.ODE_PAIRINGS:
                    r = polarization.ode_residual(f.expression, chi, pairing)
                    v = ex.is_zero(r)
                    if not (v.value and v.decided_by == "symbolic"):
                        ode_fail += 1
    records.append(CheckRecord.from_residual(
        "eigen-equation-exact", "polarization/eigen", eigen_fail,
        tols["symbolic"],
        {"chi_grid": 9, "profiles": len(profiles)}))
    records.append(CheckRecord.from_residual(
        "first-order-equations-exact", "polarization/ode", ode_fail,
        tols["symbolic"]))

    chi = polarization.Character.of(c1_0, c2_0, lam)
    stability = polarization.generator_stability(
        chi, ex.parse("1 + t1 - t2^2"))
    unstable = sum(0 if v["stable"] else 1 for v in stability.values())
    records.append(CheckRecord.from_residual(
        "family-stable-under-translations", "polarization/stability",
        unstable, tols["symbolic"], stability))

    bad = ex.simplify(ex.Product((ex.Var("s1"), ex.parse("1 + t1"))))
    chk = polarization.eigen_check(
        polarization.PolarizedFunction(bad, ex.parse("1 + t1"), chi), 2)
    records.append(CheckRecord.from_residual(
        "non-member-detected", "polarization/eigen",
        1.0 if chk.verdict.value else 0.0, tols["symbolic"]))

    commute = 0
    cfg = polarization.polarized_config(lam)
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            br = moyal.moyal_bracket(polarization.e_tilde(i, lam),
                                     polarization.e_tilde(j, lam), cfg)
            if not ex.is_zero(br).value:
                commute += 1
    records.append(CheckRecord.from_residual(
        "subalgebra-commutes", "polarization/subalgebra", commute,
        tols["symbolic"]))

    demo = polarization.superposition_demo(ex.ONE, lam, n=17)
    records.append(CheckRecord.from_residual(
        "superposition-box-quadrature-finite", "plumbing",
        0.0 if np.isfinite(demo["l2_squared_estimate"]) else 1.0,
        tols["symbolic"], demo))

    header = ("chi1", "chi2", "psi", "subalgebra_index", "symbolic_zero")
    return records, header, csv_rows, (None, ("bars", records))


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def extract_tolerance_overrides(argv):
    """Pull --tol.<name> VALUE / --tol.<name>=VALUE pairs out of argv."""
    rest = []
    overrides = {}
    k = 0
    while k < len(argv):
        arg = argv[k]
        if arg.startswith("--tol."):
            if "=" in arg:
                key, value = arg[6:].split("=", 1)
            else:
                key = arg[6:]
                k += 1
                if k >= len(argv):
                    raise UsageError(f"missing value for --tol.{key}")
                value = argv[k]
            try:
                overrides[key] = float(value)
            except ValueError:
                raise UsageError(f"bad tolerance value {value!r}") from None
        else:
            rest.append(arg)
        k += 1
    return overrides, rest


def _parse_lambda(text: str) -> Fraction:
    try:
        lam = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad orbit radius {text!r}") from None
    if lam <= 0:
        raise UsageError(f"orbit radius must be positive, got {text}")
    return lam


def _parse_vec3(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"expected three comma-separated values, got {text!r}")
    return [float(p) for p in parts]


def _parse_complex_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected two comma-separated values, got {text!r}")
    out = []
    for p in parts:
        try:
            out.append(Fraction(p))
        except ValueError:
            try:
                out.append(complex(p.replace("i", "j")))
            except ValueError:
                raise UsageError(f"bad character value {p!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report to a file")
    common.add_argument("--csv", help="write delimited grid/table output")
    common.add_argument("--figures", metavar="DIR",
                        help="render figures into DIR alongside the output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--timing", action="store_true",
                        help="include wall time (breaks byte-identical runs)")

    p = argparse.ArgumentParser(
        prog="moyal-m3",
        description="verification suites for the star-product construction "
                    "of the motion-group representations")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("verify-algebra", parents=[common])

    pc = sub.add_parser("verify-covariance", parents=[common])
    pc.add_argument("--lambda", dest="lam", default="1")
    pc.add_argument("--bivector", choices=("eq29", "solved"),
                    default="solved")

    pr = sub.add_parser("verify-rep", parents=[common])
    pr.add_argument("--lambda", dest="lam", default="1")
    pr.add_argument("--grid", help="n_theta,n_phi quadrature sizes")
    pr.add_argument("--n", type=int, default=256)
    pr.add_argument("--extent", type=float, default=12.0)

    pp = sub.add_parser("verify-polarization", parents=[common])
    pp.add_argument("--lambda", dest="lam", default="1")
    pp.add_argument("--chi", default="0,0",
                    help="character center, two comma-separated values")

    pf = sub.add_parser("fourier-check", parents=[common])
    pf.add_argument("--n", type=int, default=256)
    pf.add_argument("--extent", type=float, default=12.0)

    po = sub.add_parser("orbit", parents=[common])
    osub = po.add_subparsers(dest="orbit_command", required=True)
    pcl = osub.add_parser("classify")
    pcl.add_argument("--mu", required=True, help="three comma-separated values")
    pcl.add_argument("--alpha", required=True)
    pch = osub.add_parser("chart")
    pch.add_argument("--lambda", dest="lam", required=True)
    pch.add_argument("--point", required=True,
                     help="s1,s2,t1,t2 (rationals accepted)")

    ps = sub.add_parser("star-eval", parents=[common])
    ps.add_argument("left")
    ps.add_argument("right")
    ps.add_argument("--lambda", dest="lam", default="1")
    ps.add_argument("--bivector", choices=("eq29", "solved"),
                    default="solved")

    return p


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _emit(doc: ReportDocument, args, csv_header=None, csv_rows=None,
          figure_payload=None) -> int:
    if args.csv and csv_rows is not None:
        write_csv(args.csv, csv_header, csv_rows)
    if args.figures and figure_payload is not None:
        from . import figures
        kind, payload = figure_payload
        if kind == "fourier":
            grid, fvals, tvals, target = payload
            figures.fourier_panels(grid, fvals, tvals, target, args.figures)
        elif kind == "covariance":
            figures.covariance_heatmap(payload, lie.BASIS_NAMES, args.figures)
        elif kind == "bars":
            figures.residual_bars(payload, args.figures,
                                  f"{doc.command.replace(' ', '_')}_residuals.png")
        if doc.checks:
            figures.residual_bars(
                doc.checks, args.figures,
                f"{doc.command.replace(' ', '_')}_checks.png")
    text = doc.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if doc.all_passed else 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        overrides, rest = extract_tolerance_overrides(argv)
        parser = build_parser()
        args = parser.parse_args(rest)
        tols = ToleranceSet(overrides)
        started = time.monotonic()

        if args.command == "orbit":
            return _run_orbit(args)
        if args.command == "star-eval":
            return _run_star_eval(args, tols)

        doc = ReportDocument(command=args.command, seed=args.seed,
                             config={"tolerances": tols.as_dict()})
        if args.command == "verify-algebra":
            records, header, rows, extra = suite_algebra(tols, args.seed)
        elif args.command == "verify-covariance":
            lam = _parse_lambda(args.lam)
            doc.config["lambda"] = str(lam)
            records, header, rows, extra = suite_covariance(
                tols, args.seed, lam, args.bivector)
        elif args.command == "verify-rep":
            lam = _parse_lambda(args.lam)
            grid_spec = None
            if args.grid:
                parts = args.grid.split(",")
                if len(parts) != 2:
                    raise UsageError("--grid expects n_theta,n_phi")
                grid_spec = (int(parts[0]), int(parts[1]))
            doc.config.update({"lambda": str(lam), "n": args.n,
                               "extent": args.extent})
            records, header, rows, extra = suite_rep(
                tols, args.seed, lam, args.n, args.extent, grid_spec)
        elif args.command == "verify-polarization":
            lam = _parse_lambda(args.lam)
            chi_center = _parse_complex_pair(args.chi)
            doc.config.update({"lambda": str(lam), "chi": args.chi})
            records, header, rows, extra = suite_polarization(
                tols, args.seed, lam, chi_center)
        elif args.command == "fourier-check":
            doc.config.update({"n": args.n, "extent": args.extent})
            records, header, rows, extra = suite_fourier(
                tols, args.seed, args.n, args.extent)
        else:  # pragma: no cover
            raise UsageError(f"unknown command {args.command!r}")

        figure_payload = None
        if extra is not None:
            config_extra, figure_payload = extra
            if config_extra:
                doc.config.update(config_extra)
        for r in records:
            doc.add(r)
        if args.timing:
            doc.wall_time = round(time.monotonic() - started, 3)
        return _emit(doc, args, header, rows, figure_payload)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, ex.ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _run_orbit(args) -> int:
    import json

    if args.orbit_command == "classify":
        F = lie.DualFunctional(_parse_vec3(args.mu), _parse_vec3(args.alpha))
        kind = orbit.classify(F)
        payload = {"kind": kind.kind, "radius": kind.radius,
                   "functional": lie.dual_to_json(F)}
    else:
        lam = _parse_lambda(args.lam)
        parts = args.point.split(",")
        if len(parts) != 4:
            raise UsageError("--point expects s1,s2,t1,t2")
        c = orbit.ChartPoint.of(*[Fraction(p) for p in parts])
        coeffs, F = orbit.chart_to_functional(c, lam)
        payload = {
            "lambda": str(lam),
            "point": {k: str(v) for k, v in c.bindings().items()},
            "dual_coefficients": [str(v) for v in coeffs],
            "functional": lie.dual_to_json(F),
            "base_point": [str(v) for v in
                           orbit.chart_base(c.t1, c.t2, lam)],
        }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _run_star_eval(args, tols: ToleranceSet) -> int:
    import json

    lam = _parse_lambda(args.lam)
    try:
        f = ex.parse(args.left)
        g = ex.parse(args.right)
    except ex.ParseError as err:
        raise UsageError(str(err)) from None
    if args.bivector == "solved":
        solve = moyal.solve_bivector(lam)
        cfg = moyal.StarConfig.with_matrix(solve.matrix(),
                                           energy_pairing=solve.pairing)
        W = solve.matrix()
    else:
        cfg = moyal.StarConfig.with_matrix(
            [list(r) for r in moyal.UNIT_COUPLING])
        W = [list(r) for r in moyal.UNIT_COUPLING]
    result = moyal.star(f, g, cfg)
    p1 = moyal.bidiff(f, g, 1, W)
    payload = {
        "left": str(ex.simplify(f)),
        "right": str(ex.simplify(g)),
        "lambda": str(lam),
        "bivector": args.bivector,
        "product": str(result.expression),
        "first_contraction": str(p1),
        "exact": result.exact,
        "order": result.order,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
