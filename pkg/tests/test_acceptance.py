"""Acceptance criteria 1-12; each test records one PASS/FAIL line for the terminal summary."""

import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import LINES
from oracles import arrow_exists
from rdverify.arrows import (
    ArrowCertificate,
    all_proof_arrows,
    check_certificate,
    find_arrows,
    resolve_comma_arrow,
)
from rdverify.characters import enumerate_characters
from rdverify.classnum import EXCEPTIONAL_A, class_number, direct_n_max, enumerate_family
from rdverify.sieve import (
    PLAN_DIR,
    PlanPhase,
    SievePlan,
    congruence,
    legendre_test,
    load_constraints,
    run_sieve,
)
from rdverify.zetaforms import (
    C_chi,
    G_scaled,
    G_sum,
    QuadForm,
    RDParams,
    beta_cross_check,
    g_aux,
    identity_check,
)

TESTS = Path(__file__).parent

# arrows with no witness at all; the norm oracle below confirms both are absent
UNATTAINABLE_ARROWS = {(127, 5), (9, 11)}


@contextmanager
def criterion(k, title):
    info = {}
    t0 = time.perf_counter()
    status = "FAIL"
    try:
        yield info
        status = "PASS"
    finally:
        extra = info.get("detail", "")
        LINES[k] = f"criterion {k:>2} {status}: {title} ({time.perf_counter() - t0:.1f} s){'; ' + extra if extra else ''}"
        print(LINES[k])


# 1. arrows

def _arrow_targets():
    return all_proof_arrows() + [(209, 61)]


def test_c01_arrow_suite_dual_route():
    """Every search agrees with the resultant-norm oracle and every certificate re-verifies."""
    t_suite = time.perf_counter()
    missing = []
    for q, r in _arrow_targets():
        t0 = time.perf_counter()
        certs = find_arrows(q, r)
        assert time.perf_counter() - t0 < 60, (q, r)
        assert bool(certs) == arrow_exists(q, r), (q, r)
        if certs:
            cert = certs[0]
            assert check_certificate(cert.to_json())
            assert ArrowCertificate.from_json(cert.to_json()) == cert
        else:
            missing.append((q, r))
    assert set(missing) == UNATTAINABLE_ARROWS
    comma = resolve_comma_arrow()
    assert comma.reading == "product" and comma.arrows == [(209, 61)]
    assert time.perf_counter() - t_suite < 30 * 60


@pytest.mark.xfail(strict=True, reason="127->5 and 9->11 have no witness; see the decision ledger")
def test_c01_all_named_arrows_established():
    with criterion(1, "every named arrow established with a certificate") as info:
        failed = [(q, r) for q, r in _arrow_targets() if not find_arrows(q, r)]
        info["detail"] = f"{len(_arrow_targets()) - len(failed)}/{len(_arrow_targets())} established; none for {failed}"
        assert not failed


# 2. identity

@pytest.fixture(scope="module")
def identity_results():
    out = {}
    for a, n, q in [(3, 1, 5), (3, 3, 5), (7, 1, 5), (7, 5, 95)]:
        t0 = time.perf_counter()
        p = RDParams(a, n)
        rows = [identity_check(p, chi).holds for chi in enumerate_characters(q, odd=True, primitive=True, complex=True)]
        out[(a, n, q)] = (rows, time.perf_counter() - t0)
    return out


def test_c02_identity_reproduction(identity_results):
    with criterion(2, "L(0) identity holds exactly at (3,1,5), (3,3,5), (7,1,5), (7,5,95)") as info:
        for (a, n, q), (rows, dt) in identity_results.items():
            assert rows and all(rows), (a, n, q)
            assert class_number(RDParams(a, n).d) == 1
            assert dt < (30 * 60 if q == 95 else 60)
        info["detail"] = ", ".join(f"{k}: {len(v[0])} chars" for k, v in identity_results.items())


# 3. beta

def test_c03_beta_cross_validation():
    with criterion(3, "finite beta vs L(2) series, q <= 40, tol 1e-4") as info:
        t0 = time.perf_counter()
        rows = beta_cross_check(40, 10**6)
        worst = max(r.diff for r in rows)
        info["detail"] = f"{len(rows)} characters, max diff {worst:.2e}"
        assert rows and worst <= 1e-4
        assert {r.q for r in rows} >= {5, 7, 13, 15, 35, 39}
        assert time.perf_counter() - t0 < 10 * 60


# 4. identity suite

def _residues(q):
    for a in range(q):
        for n in range(q):
            if np.gcd(2 * ((a * n) ** 2 + 4 * a), q) == 1:
                yield a, n


def test_c04_identity_suite():
    with criterion(4, "G1 = G2, C-C, C0 and the auxiliary sums vanish, q in 5..13") as info:
        t0 = time.perf_counter()
        checks = 0
        for q in (5, 7, 9, 11, 13):
            for chi in enumerate_characters(q, odd=True, primitive=True, complex=True):
                for a, n in _residues(q):
                    f1, f2 = QuadForm(a, a * n, -1), QuadForm(1, a * n, -a)
                    assert G_scaled(f1, chi) == G_scaled(f2, chi)
                    assert C_chi(a, n, chi) == (G_sum(f1, chi) * 2).scale(q)
                    checks += 2
            for chi in enumerate_characters(q, odd=True):
                for a in range(q):
                    assert C_chi(a, 0, chi).is_zero
                    for n in range(q):
                        assert C_chi(a, (q - n) % q, chi) == -C_chi(a, n, chi)
                        checks += 1
            for chi in enumerate_characters(q, complex=True):
                for a, n in _residues(q):
                    f1, f2 = QuadForm(a, a * n, -1), QuadForm(1, a * n, -a)
                    assert g_aux(chi, f2, "one").is_zero
                    assert g_aux(chi, f1, "B1").is_zero and g_aux(chi, f2, "B1").is_zero
                    assert g_aux(chi, f2, "t").is_zero
                    checks += 4
        info["detail"] = f"{checks} exact equalities"
        assert time.perf_counter() - t0 < 10 * 60


# 5-10. sieves

def _sieve(name, threads=2):
    plan = SievePlan.load(PLAN_DIR / f"{name}.json")
    constraints = load_constraints(plan)
    t0 = time.perf_counter()
    rep = run_sieve(plan, constraints, threads=threads)
    return plan, constraints, rep, time.perf_counter() - t0


def _recheck_survivors(plan, constraints, rep, limit=200):
    """Re-run the listed survivors of the last phase through the scalar exact path."""
    last = constraints[-1]
    primes = sorted({p for c in last for p in c.primes})
    for a, n in rep.survivors[:limit]:
        if n == 0 and len(constraints) > 1:
            continue  # carried from an earlier phase untested
        assert all(legendre_test(a, n, p) for p in primes)
        assert all(congruence(a, n, c) for c in last)


def _sieve_criterion(k, name, title, modulus, divisor, limit_s):
    with criterion(k, title) as info:
        plan, constraints, rep, dt = _sieve(name)
        info["detail"] = (f"{rep.total_survivors} survivors, residues n0 seen "
                          f"{sorted(rep.survivors_by_n0)[:5]}")
        assert rep.modulus == modulus
        assert rep.expectation_met
        assert all(n0 % divisor == 0 for n0 in rep.survivors_by_n0)
        _recheck_survivors(plan, constraints, rep)
        assert dt < limit_s


def test_c05_sieve_43():
    _sieve_criterion(5, "lemma62", "n = 0 mod 5*7*19*37 forces 43 | n", 1_058_015, 43, 30 * 60)


def test_c06_sieve_353():
    plan = SievePlan.load(PLAN_DIR / "lemma64.json")
    assert plan.modulus == 3 * 5 * 13 * 17 * 353 and plan.n_restriction == 3315
    _sieve_criterion(6, "lemma64", "n = 0 mod 3*5*13*17 forces 353 | n", 3 * 5 * 13 * 17 * 353, 353, 45 * 60)


def test_c07_sieve_181():
    plan = SievePlan.load(PLAN_DIR / "lemma63.json")
    assert plan.n_restriction == 137_085 and len(plan.phases) == 2
    _sieve_criterion(7, "lemma63", "n = 0 mod 3*5*13*19*37 forces 181 | n", 3 * 5 * 13 * 19 * 37 * 181, 181,
                     2 * 3600)


def test_c07_phase_order_independent():
    base = SievePlan.load(PLAN_DIR / "lemma63.json")
    swapped = SievePlan.load(PLAN_DIR / "lemma63.json")
    swapped.phases = [PlanPhase(1, "all", base.phases[1].arrows), PlanPhase(1, "exceptional", base.phases[0].arrows)]
    a = run_sieve(base, threads=2)
    b = run_sieve(swapped, threads=2)
    nz = [{k: v for k, v in r.survivors_by_n0.items() if k} for r in (a, b)]
    assert nz[0] == nz[1] and a.expectation_met and b.expectation_met


def test_c08_final17():
    plan = SievePlan.load(PLAN_DIR / "final17.json")
    assert plan.modulus == 3 * 5 * 7 * 13 * 17
    _sieve_criterion(8, "final17", "arrows 7*17 -> 3,5,13 and 13*17 -> 5 force 17 | n", plan.modulus, 17, 20 * 60)


@pytest.mark.extended
@pytest.mark.xfail(strict=True, reason="4 survivors with n0 != 0 remain, tied to d = 167; see the decision ledger")
def test_c09_two_phase_sieve():
    plan = SievePlan.load(PLAN_DIR / "lemma61.json")
    assert plan.modulus == 959_595 and plan.phase_moduli()[-1] == 959_595 * 17 * 73 * 127
    with criterion(9, "two-phase sieve leaves only n0 = 0") as info:
        _, constraints, rep, dt = _sieve("lemma61", threads=4)
        nz = {k: v for k, v in rep.survivors_by_n0.items() if k}
        info["detail"] = f"{sum(nz.values())} survivors with n0 != 0: {[s for s in rep.survivors if s[1]]}"
        assert dt < 8 * 3600
        assert rep.expectation_met and not nz


@pytest.mark.extended
def test_c10_endgames():
    with criterion(10, "endgame sieves for every exceptional a leave no survivors") as info:
        totals = {}
        t0 = time.perf_counter()
        for a in EXCEPTIONAL_A:
            _, _, rep, dt = _sieve(f"endgame_a{a}")
            totals[a] = rep.total_survivors
            assert rep.expectation_met, a
            assert rep.total_survivors == 0, a
            assert dt < (30 * 60 if a == 5 else 4 * 3600)
        info["detail"] = f"{len(totals)} values of a"
        assert time.perf_counter() - t0 < 4 * 3600


# 11. base cases

def test_c11_base_cases(base_case_report):
    with criterion(11, "h = 1 family members stop at d = 1253; analytic class numbers agree") as info:
        rows = enumerate_family(1253)
        ones = [m for m in rows if m.h == 1]
        top = max(ones, key=lambda m: m.d)
        assert (top.a, top.n, top.d) == (7, 5, 1253)
        rep = base_case_report
        assert rep.max_hit_d == 1253 and not rep.analytic_mismatches
        covered = {(m.a, m.n) for m in rep.checked}
        for a in EXCEPTIONAL_A:
            assert all((a, n) in covered for n in range(1, direct_n_max(a) + 1, 2)), a
        info["detail"] = f"{len(rep.checked)} pairs checked, {len(rep.hits)} with h = 1"


# 12. property suites

PROPERTY_TESTS = [
    "test_cyclotomic.py::test_reduce_is_ring_homomorphism",
    "test_cyclotomic.py::test_m_chi_vanishes_for_even_characters",
    "test_cyclotomic.py::test_embedding_respects_products",
    "test_cyclotomic.py::test_field_division",
    "test_sieve.py::test_legendre_shift_invariance",
    "test_sieve.py::test_legendre_kill_rate",
    "test_sieve.py::test_plan_round_trip_and_digest",
    "test_arrows.py::test_shipped_certificates_verify",
    "test_arrows.py::test_round_trip_all_mode",
    "test_arith.py",
]


def test_c12_property_suites():
    with criterion(12, "invariant property suites") as info:
        t0 = time.perf_counter()
        res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                              *(str(TESTS / t) for t in PROPERTY_TESTS)],
                             capture_output=True, text=True, cwd=TESTS.parent)
        info["detail"] = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
        assert res.returncode == 0, res.stdout[-2000:]
        assert time.perf_counter() - t0 < 15 * 60
