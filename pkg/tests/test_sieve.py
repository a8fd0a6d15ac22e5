import copy
import json
import math

import numpy as np
import pytest

from rdverify.arith import is_prime
from rdverify.arrows import ArrowCertificate
from rdverify.cyclotomic import reduce
from rdverify.errors import CertificateParseError
from rdverify.sieve import (
    CERT_DIR,
    PLAN_DIR,
    PlanArrow,
    PlanPhase,
    SievePlan,
    congruence,
    congruence_general,
    congruence_q_div_n,
    congruence_r_div_n,
    legendre_bitmap,
    legendre_test,
    load_constraints,
    precompute_constraint,
    run_sieve,
    run_sieve_naive,
    validate_plan,
)
from rdverify.zetaforms import G_scaled, QuadForm

CERTS = sorted(CERT_DIR.glob("arrow_*.json"))


def cert(q, r):
    return ArrowCertificate.load(CERT_DIR / f"arrow_{q}_{r}.json")


def plan(modulus, arrows, n_restriction=1, phases=None, a_values=None, expectation=None, name="t"):
    if phases is None:
        phases = [PlanPhase(1, "all", [PlanArrow(c, m) for c, m in arrows])]
    return SievePlan(name, modulus, n_restriction, [], phases, expectation or {}, a_values=a_values)


# Legendre filter

def test_legendre_examples():
    assert legendre_test(7, 5, 13)
    assert not legendre_test(13, 5, 13)  # a = 0 mod p makes the symbol 0
    assert not legendre_test(1, 1, 5)  # d = 5


def test_legendre_bitmap_matches_scalar():
    for p in (3, 5, 13, 37):
        bm = legendre_bitmap(p)
        for a in range(p):
            for n in range(p):
                assert bm[a, n] == legendre_test(a, n, p)


def test_family_members_with_h1_are_inert_below_an_half():
    # for h = 1 every odd prime p < an/2 other than a is inert in Q(sqrt d)
    for a, n in ((7, 5), (3, 3), (7, 1), (3, 1)):
        for p in filter(is_prime, range(3, (a * n + 1) // 2)):
            if p not in (2, a):
                assert legendre_test(a, n, p), (a, n, p)


@pytest.mark.parametrize("primes", [(3, 5), (13, 19, 37), (5, 7, 19, 37), (3, 5, 7, 13, 61)])
def test_legendre_kill_rate(primes):
    rng = np.random.default_rng(sum(primes))
    size = 10**5
    a = rng.integers(0, 10**9, size)
    n = rng.integers(0, 10**9, size)
    passed = np.ones(size, dtype=bool)
    for p in primes:
        passed &= legendre_bitmap(p)[a % p, n % p]
    # each prime keeps exactly half of the pairs with p not dividing a
    for p in primes:
        assert legendre_bitmap(p).sum() * 2 * p == (p - 1) * p * p
    density = 2.0 ** -len(primes) * math.prod(1 - 1 / p for p in primes)
    sigma = math.sqrt(density * (1 - density) / size)
    assert abs(passed.mean() - density) < 3 * sigma


def test_legendre_shift_invariance():
    rng = np.random.default_rng(7)
    for path in CERTS[:8]:
        c = precompute_constraint(ArrowCertificate.load(path), "general")
        qr = c.q * c.r
        a = rng.integers(0, qr, 125)
        n = rng.integers(0, qr, 125)
        s, t = rng.integers(1, 50, 2)
        base = c.evaluate(a, n)
        assert np.array_equal(base, c.evaluate(a + s * qr, n + t * qr))


# congruences

@pytest.mark.parametrize("path", CERTS, ids=lambda p: p.stem)
def test_positive_controls(path):
    c = precompute_constraint(ArrowCertificate.load(path), "general")
    for a, n in ((7, 5), (3, 3), (7, 1)):
        d = (a * n) ** 2 + 4 * a
        if math.gcd(c.q, 2 * d) == 1 and math.gcd(c.r, d) == 1:
            assert congruence_general(a, n, c), (c.label, a, n)
            assert c.evaluate(np.array([a]), np.array([n]))[0]


@pytest.mark.parametrize("q,r", [(95, 13), (61, 41), (215, 7)])
def test_vectorized_matches_exact(q, r):
    rng = np.random.default_rng(q * r)
    for mode in ("general", "r-divides-n", "q-divides-n"):
        c = precompute_constraint(cert(q, r), mode)
        a = rng.integers(0, q * r, 150)
        n = rng.integers(0, q * r, 150)
        if mode == "r-divides-n":
            n = n - n % r
        elif mode == "q-divides-n":
            n = n - n % q
        vec = c.evaluate(a, n)
        exact = [congruence(int(x), int(y), c) for x, y in zip(a, n)]
        assert vec.tolist() == exact


def test_mode_preconditions():
    c = precompute_constraint(cert(95, 13), "r-divides-n")
    with pytest.raises(ValueError):
        congruence_r_div_n(7, 5, c)
    with pytest.raises(ValueError):
        congruence_q_div_n(7, 5, c)
    with pytest.raises(ValueError):
        precompute_constraint(cert(95, 13), "sometimes")


def test_general_reduces_to_r_div_n():
    g = precompute_constraint(cert(95, 13), "general")
    rd = precompute_constraint(cert(95, 13), "r-divides-n")
    for a in range(1, 200, 3):
        for n in (0, 13, 26, 39 * 7):
            assert congruence_general(a, n, g) == congruence_r_div_n(a, n, rd)


def test_precompute_memo_matches_direct_reduction():
    c = precompute_constraint(cert(95, 13), "general")
    assert c.memo_size == 0
    got = c.g_residues(np.array([7]), np.array([5]))[0]
    chi, R = c.chi, c.target
    direct = reduce(G_scaled(QuadForm(7, 35, -1), chi).lift(R.N), R)
    assert got.tolist() == direct.tolist()
    assert c.memo_size == 1
    c.g_residues(np.array([7 + 95]), np.array([5 + 190]))
    assert c.memo_size == 1


# engine

def test_engine_matches_naive_exact():
    p = plan(1235, [("arrow_95_13.json", "general")], n_restriction=65)
    rep = run_sieve(p)
    naive = run_sieve_naive(p, exact=True)
    assert sum(rep.survivors_by_n0.values()) == len(naive)
    assert set(rep.survivors) == set(naive)


def test_engine_matches_naive_vectorized():
    p = plan(1235, [("arrow_95_13.json", "general")], n_restriction=5)
    rep = run_sieve(p, survivor_cap=10**6)
    naive = run_sieve_naive(p, exact=False)
    assert set(rep.survivors) == set(naive)
    counts = {}
    for _, n in naive:
        counts[n] = counts.get(n, 0) + 1
    assert rep.survivors_by_n0 == counts


def test_engine_matches_naive_two_phases():
    phases = [
        PlanPhase(1, "all", [PlanArrow("arrow_95_13.json", "general")]),
        PlanPhase(451, "exceptional", [PlanArrow("arrow_41_11.json", "general")]),
    ]
    p = plan(1235, None, phases=phases, a_values=[7, 3, 27])
    rep = run_sieve(p, survivor_cap=10**6)
    naive = run_sieve_naive(p, exact=False)
    assert set(rep.survivors) == set(naive)
    assert rep.total_survivors == len(naive)
    assert rep.phases[1].carried == sum(1 for _, n in naive if n == 0)
    # (7, 5) passes every congruence, so only the Legendre filter can remove it
    leg = all(legendre_test(7, 5, p) for p in (5, 19, 13, 41, 11))
    assert ((7, 5) in naive) == leg


def test_empty_plan_keeps_everything():
    p = plan(15, [])
    rep = run_sieve(p)
    assert rep.total_survivors == 225
    assert rep.expectation_met is None


def test_validate_plan_errors():
    ok = [PlanArrow("arrow_95_13.json", "general")]
    bad = [
        plan(1234, [("arrow_95_13.json", "general")]),
        plan(1235, [("arrow_95_13.json", "general")], n_restriction=7),
        plan(95, [("arrow_95_13.json", "general")]),
        plan(1235, [("arrow_95_13.json", "r-divides-n")]),
        plan(1235, [("arrow_95_13.json", "q-divides-n")], n_restriction=5),
        plan(1235, None, phases=[PlanPhase(1, "exceptional", ok)]),
        plan(1235, None, phases=[PlanPhase(1, "all", ok), PlanPhase(5, "exceptional", [])]),
        plan(1235, None, phases=[PlanPhase(1, "all", ok), PlanPhase(3, "all", [])]),
        plan(1235, None, phases=[]),
    ]
    for p in bad:
        with pytest.raises(ValueError):
            validate_plan(p, load_constraints(p))


def test_missing_certificate():
    p = plan(1235, [("arrow_95_999.json", "general")])
    with pytest.raises(FileNotFoundError):
        run_sieve(p)


def test_plan_round_trip_and_digest(tmp_path):
    for path in sorted(PLAN_DIR.glob("*.json")):
        p = SievePlan.load(path)
        assert p.to_json() == path.read_text()
        assert SievePlan.from_dict(json.loads(p.to_json())) == p
    p = SievePlan.load(PLAN_DIR / "lemma62.json")
    q = copy.deepcopy(p)
    q.n_restriction = 5
    assert p.digest() != q.digest()
    with pytest.raises(CertificateParseError):
        SievePlan.from_dict({"schema_version": "9"})
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(CertificateParseError):
        SievePlan.load(bad)


def test_report_determinism_and_threads():
    p = SievePlan.load(PLAN_DIR / "lemma62.json")
    r1 = run_sieve(p, threads=1)
    r2 = run_sieve(p, threads=2)
    assert r1.content_digest() == r2.content_digest()
    assert r1.expectation_met
    d = r1.to_dict()
    assert d["content_digest"] == r1.content_digest() and "wall_time_s" in d


def _n0_nonzero(rep):
    return {k: v for k, v in rep.survivors_by_n0.items() if k}


def test_lemma63_phase_order_is_irrelevant():
    base = SievePlan.load(PLAN_DIR / "lemma63.json")
    C, E = base.phases[0].arrows, base.phases[1].arrows
    swapped = copy.copy(base)
    swapped.phases = [PlanPhase(1, "all", E), PlanPhase(1, "exceptional", C)]
    merged = copy.copy(base)
    merged.phases = [PlanPhase(1, "all", C + E)]
    reps = [run_sieve(p) for p in (base, swapped, merged)]
    assert all(r.expectation_met for r in reps)
    outs = [_n0_nonzero(r) for r in reps]
    assert outs[0] == outs[1] == outs[2] == {}
