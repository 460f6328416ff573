"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before asserting.
Criteria that cannot be met at desk scale are strict xfails: the check is run as stated
and is expected to fail."""
import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from siegel_lowlying import cli, density, expsums, intlat, lattice, petersson, satake, specfun
from siegel_lowlying.density import SymmetryType
from siegel_lowlying.expsums import char_values
from siegel_lowlying.intlat import QuadForm2

from oracles import bessel_series, kloosterman_classes, kloosterman_phases
from test_cli import CHEAP

PRIMES = [2, 3, 5, 7, 13, 97]
FORMS = [(1, 0, 1), (2, 0, 2), (1, 1, 1)]
# constant of the C / log k envelope in the desk-scale density check, fixed in advance
ENVELOPE_C = 1.0


@pytest.mark.criterion(1, "u-identity suite")
def test_u_identity_suite(criterion):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    worst_u = worst_e = 0.0
    draws = [satake.tempered(rng.choice(PRIMES), rng) for _ in range(1000)]
    draws += [satake.saito_kurokawa(rng.choice(PRIMES), rng) for _ in range(100)]
    for params in draws:
        worst_u = max(worst_u, *satake.verify_lemma21(params))
        worst_e = max(worst_e, *satake.elementary_relations_check(params))
    dt = time.perf_counter() - t0
    ok = worst_u < 1e-10 and worst_e < 1e-10 and dt < 5
    criterion.report(ok, f"max u residual {worst_u:.2e}, max elementary {worst_e:.2e}, {dt:.2f} s")
    assert ok


@pytest.mark.criterion(2, "Kloosterman oracle equivalence")
def test_kloosterman_oracle(criterion):
    t0 = time.perf_counter()
    combos = worst = 0
    phases_equal = True
    for cm in itertools.product(range(-2, 3), repeat=4):
        dc = intlat.det(cm)
        if dc == 0:
            continue
        classes = kloosterman_classes(cm)
        for q, t in itertools.product(FORMS, FORMS):
            ours = sorted(Fraction(num, 2 * abs(dc)) % 1
                          for _, num in expsums.kloosterman_phase_numerators(QuadForm2(*q), QuadForm2(*t), cm))
            ref = kloosterman_phases(q, t, cm, classes)
            phases_equal &= ours == sorted(ref)
            val = expsums.sym_kloosterman(QuadForm2(*q), QuadForm2(*t), cm).value
            oracle = sum(np.exp(2j * math.pi * float(ph)) for ph in ref)
            worst = max(worst, abs(val - oracle))
            combos += 1
    bound_ok = True
    i1 = QuadForm2.scalar(1)
    for cm in itertools.product(range(-4, 5), repeat=4):
        dc = intlat.det(cm)
        if dc:
            bound_ok &= abs(expsums.sym_kloosterman_fast(i1, i1, cm)) <= abs(dc) ** 1.5 + 1e-9
    dt = time.perf_counter() - t0
    ok = phases_equal and worst < 1e-12 and bound_ok and dt < 120
    criterion.report(ok, f"{combos} (C, Q, T) combinations, phases equal {phases_equal}, "
                         f"max value diff {worst:.1e}, trivial bound {bound_ok}, {dt:.1f} s")
    assert ok


BESSEL_GRID = [(nu, x) for nu in (0.5, 1.5, 4.5, 9.5, 20.5, 49.5, 100.5, 250.5, 400.5)
               for x in (0.01, 0.5, 3.0, 9.0, 30.0, 99.0, 250.0, 1000.0, 1e4)]
PRODUCT_TRIPLES = [(v, z, w) for v in (0.5, 4.5, 8.5) for z, w in ((1.0, 1.0), (3.0, 7.0), (10.0, 2.0))]


@pytest.mark.criterion(3, "Bessel suite")
def test_bessel_suite(criterion):
    t0 = time.perf_counter()
    worst_rel = 0.0
    for nu, x in BESSEL_GRID:
        v, flag = specfun.bessel_j_half(nu, x)
        ref = bessel_series(nu, x)
        if flag:
            worst_rel = max(worst_rel, 0.0 if abs(ref) < 1e-300 else 1.0)
        else:
            worst_rel = max(worst_rel, abs(v - ref) / abs(ref))
    xs = np.linspace(1e-3, 200.0, 2001)
    bounds_ok = True
    for n in range(4, 50):
        vals = np.abs(specfun.bessel_j_half_array(n + 0.5, xs))
        env = np.exp(specfun.bessel_envelope_log(n + 0.5, xs))
        bounds_ok &= bool(np.all(vals <= 1.0) and np.all(vals <= env * (1 + 1e-12) + 1e-300))
    worst_prod = 0.0
    for v, z, w in PRODUCT_TRIPLES:
        lhs = specfun.bessel_j_half(v, z)[0] * specfun.bessel_j_half(v, w)[0]
        worst_prod = max(worst_prod, abs(specfun.bessel_product_rhs(v, z, w).value - lhs))
    dt = time.perf_counter() - t0
    ok = worst_rel < 1e-12 and bounds_ok and worst_prod < 1e-9 and dt < 30
    criterion.report(ok, f"max rel err {worst_rel:.1e} on {len(BESSEL_GRID)} points, bounds {bounds_ok}, "
                         f"product residual {worst_prod:.1e} on {len(PRODUCT_TRIPLES)} triples, {dt:.1f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="Delta_12(I, I) = 7.757 on the geometric side, far from 1")
@pytest.mark.criterion(4, "Petersson end to end")
def test_petersson_end_to_end(criterion):
    res = {}
    times = {}
    for k in (20, 16, 12, 10):
        t0 = time.perf_counter()
        res[k] = petersson.delta_k(1, 1, k, 1e-8)
        times[k] = time.perf_counter() - t0
    gaps = [abs(res[k].total - 1) for k in (10, 12, 16, 20)]
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    tails = max(res[k].tail_bound for k in res)
    ok = gaps[1] < 0.02 and decreasing and tails < 1e-4 and times[20] < 600
    criterion.report(ok, "totals " + ", ".join(f"k={k}: {res[k].total:.6g}" for k in (10, 12, 16, 20))
                     + f"; decreasing {decreasing}; max tail {tails:.1e}; k=20 in {times[20]:.0f} s")
    assert ok


@pytest.mark.criterion(5, "averaged Petersson")
def test_averaged_petersson(criterion):
    t0 = time.perf_counter()
    Ks = (16, 24, 32)
    diag = [abs(petersson.averaged_delta(1, 1, K).value - 1) for K in Ks]
    off = [abs(petersson.averaged_delta(1, 2, K).value) for K in Ks]
    dt = time.perf_counter() - t0
    ok = all(a > b for a, b in zip(diag, diag[1:])) and all(a > b for a, b in zip(off, off[1:])) and dt < 1800
    criterion.report(ok, "|avg(1,1) - 1| " + ", ".join(f"{e:.2e}" for e in diag)
                     + "; |avg(1,2)| " + ", ".join(f"{e:.2e}" for e in off) + f"; {dt:.0f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="prime sums carry a 1/log k offset: m1 is 14% off at k = 1e6")
@pytest.mark.criterion(6, "explicit-formula main terms")
def test_explicit_formula_main_terms(criterion):
    t0 = time.perf_counter()
    pr = density.fejer_pair(0.9)
    ks = (1e3, 1e4, 1e5, 1e6)
    m1 = [density.diagonal_m1_sum_spin(k, pr) for k in ks]
    m2 = [density.diagonal_m2_sum_spin(k, pr) for k in ks]
    t1, t2 = -pr.phi0, pr.phi_hat0 / 2
    e1 = [abs(x - t1) for x in m1]
    e2 = [abs(x - t2) for x in m2]
    dt = time.perf_counter() - t0
    shrink = all(a > b for a, b in zip(e1, e1[1:])) and all(a > b for a, b in zip(e2, e2[1:]))
    ok = e1[-1] < 0.1 * abs(t1) and e2[-1] < 0.1 * abs(t2) and shrink and dt < 120
    criterion.report(ok, f"k=1e6: m1 {m1[-1]:.4f} vs {t1:.4f} ({e1[-1] / abs(t1):.1%}), "
                         f"m2 {m2[-1]:.4f} vs {t2:.4f} ({e2[-1] / abs(t2):.1%}); errors shrink {shrink}; {dt:.0f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="at k <= 20 the gap to the limit exceeds the budgets plus 1 / log k")
@pytest.mark.criterion(7, "desk-scale spin density trend")
def test_desk_scale_density_trend(criterion):
    pr = density.fejer_pair(0.4)
    target = 1 / 0.4 - 0.5
    gaps, slack = [], []
    for k in (12, 16, 20):
        r = density.weighted_density_spin(k, pr, tol=1e-6)
        budget = r.omitted_tail_budget + r.omitted_pole_budget + r.delta_tail_total + r.gamma_error
        gaps.append(abs(r.total - target))
        slack.append(budget + ENVELOPE_C / math.log(k))
    bounded = all(g <= s for g, s in zip(gaps, slack))
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    criterion.report(bounded and decreasing,
                     "gaps " + ", ".join(f"{g:.3f}" for g in gaps) + " vs budget + C/log k "
                     + ", ".join(f"{s:.3f}" for s in slack) + f" (C = {ENVELOPE_C}); decreasing {decreasing}; "
                     "the limit itself is out of reach at these weights")
    assert bounded and decreasing


@pytest.mark.criterion(8, "standard m1 bracket cancellation")
def test_std_bracket_cancellation(criterion):
    bad = []
    for p in (2, 3, 5, 7, 11, 13, 97, 1009):
        mu = char_values(p).mu_p
        got = satake.diagonal_substitution(density._std_m1_expr(p))
        if got != ({2: Fraction(mu)} if mu else {}):
            bad.append(p)
    ok = not bad
    criterion.report(ok, "bracket equals mu_p / p exactly" if ok else f"mismatch at p = {bad}")
    assert ok


@pytest.mark.criterion(9, "Plancherel")
def test_plancherel(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for kind in SymmetryType:
        for v in (0.3, 0.5, 0.9):
            lhs, rhs = density.plancherel_check(density.fejer_pair(v), kind)
            worst = max(worst, abs(lhs - rhs))
    exact = all(density.plancherel_rhs_exact(v, SymmetryType.SP) == 1 / v - Fraction(1, 2)
                for v in (Fraction(3, 10), Fraction(1, 2), Fraction(9, 10)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and exact and dt < 10
    criterion.report(ok, f"max |lhs - rhs| {worst:.1e} over 5 types x 3 supports, Sp exact {exact}, {dt:.1f} s")
    assert ok


@pytest.mark.criterion(10, "non-vanishing arithmetic")
def test_nonvanishing(criterion):
    limit, root = density.nonvanishing_limit(), density.nonvanishing_root()
    ok = limit == Fraction(3, 4) and root == Fraction(2, 5) and density.nonvanishing_bound(root) == 0
    criterion.report(ok, f"limit {limit}, root {root}")
    assert ok


@pytest.mark.criterion(11, "lattice counting")
def test_lattice_counting(criterion):
    t0 = time.perf_counter()
    kappa = 0.0
    for d in range(1, 21):
        for X in (1e3, 1e4):
            c = lattice.lattice_count(d, X)
            kappa = max(kappa, abs(c.count - c.main_term) / (d ** (1 / 3) * X ** (2 / 3)))
    p12 = lattice.count_pd(1, 2)
    dt = time.perf_counter() - t0
    ok = kappa <= 50 and p12 == 4 and dt < 60
    criterion.report(ok, f"kappa {kappa:.3f}, P_1(2) = {p12}, {dt:.1f} s")
    assert ok


@pytest.mark.criterion(12, "CLI determinism")
def test_cli_determinism(criterion, tmp_path):
    differing = []
    for name in sorted(cli.COMMANDS):
        for threads in (None, "8"):
            prefix = tmp_path / f"{name}-{threads}"
            argv = [name, *CHEAP[name], "--out", str(prefix), "--seed", "7"]
            if threads:
                argv += ["--threads", threads]
            outs = []
            for _ in range(2):
                code = cli.main(argv)
                files = sorted(tmp_path.glob(f"{prefix.name}.*"))
                outs.append((code, [f.suffix for f in files], [f.read_bytes() for f in files]))
            if outs[0] != outs[1] or outs[0][0] != cli.EXIT_OK:
                differing.append((name, threads))
    ok = not differing
    criterion.report(ok, f"{len(cli.COMMANDS)} subcommands x 2 thread settings rerun byte-identical"
                     if ok else f"differences in {differing}")
    assert ok
