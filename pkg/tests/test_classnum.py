import math

import pytest

from rdverify.arith import is_squarefree
from rdverify.classnum import (
    EXCEPTIONAL_A,
    QuadForm,
    class_number,
    class_number_analytic,
    claim_factB_check,
    direct_check,
    direct_n_max,
    enumerate_family,
    family_csv,
    form_class_data,
    form_cycles,
    fundamental_unit,
    is_reduced,
    reduced_forms,
    rho,
    unit_norm,
)
from rdverify.errors import PreconditionError

SQUAREFREE_D = [d for d in range(5, 10**4, 4) if is_squarefree(d) and math.isqrt(d) ** 2 != d]


def brute_reduced(d):
    s = math.sqrt(d)
    out = set()
    for B in range(1, math.isqrt(d) + 1):
        if (d - B * B) % 4:
            continue
        N = (d - B * B) // 4
        for A in range(1, N + 1):
            if N % A == 0 and s - B < 2 * A < s + B:
                out.add(QuadForm(A, B, -(N // A)))
                out.add(QuadForm(-A, B, N // A))
    return out


@pytest.mark.parametrize("d,h", [(5, 1), (13, 1), (21, 1), (65, 2), (1253, 1), (85, 2), (229, 3), (469, 3)])
def test_class_number_examples(d, h):
    assert class_number(d) == h


def test_class_number_rejects_bad_d():
    for d in (45, 1252, 49, 1):
        with pytest.raises(ValueError):
            class_number(d)


def test_reduced_forms_match_bruteforce():
    for d in SQUAREFREE_D[:400]:
        forms = reduced_forms(d)
        assert set(forms) == brute_reduced(d)
        assert all(is_reduced(f, d) and f.disc == d for f in forms)


def test_principal_form_present():
    for d in SQUAREFREE_D[:500]:
        s = math.isqrt(d)
        B0 = s if s % 2 else s - 1
        assert QuadForm(1, B0, (B0 * B0 - d) // 4) in reduced_forms(d)


def test_rho_cycles_close():
    for d in SQUAREFREE_D:
        forms = set(reduced_forms(d))
        cycles = form_cycles(d)
        assert sum(len(c) for c in cycles) == len(forms)
        for c in cycles:
            for i, f in enumerate(c):
                assert rho(f, d) in forms
                assert rho(f, d) == c[(i + 1) % len(c)]


def test_form_class_data_invariants():
    for d in SQUAREFREE_D[:800]:
        data = form_class_data(d)
        if data.unit_norm == 1:
            assert data.h_plus % 2 == 0 and data.h == data.h_plus // 2
        else:
            assert data.h == data.h_plus


def test_unit_norm_matches_fundamental_unit():
    for d in SQUAREFREE_D:
        eps = fundamental_unit(d)
        assert eps.norm == unit_norm(d)
        assert eps.x > 0 and eps.y > 0
        assert (2 * eps.x).denominator == 1 and (2 * eps.y).denominator == 1


def test_analytic_agrees_below_10000():
    for d in SQUAREFREE_D:
        h = class_number(d)
        x = class_number_analytic(d)
        assert abs(x - h) < 0.1, (d, x, h)


def test_analytic_high_precision():
    assert abs(class_number_analytic(65, precision=30) - 2) < 1e-12
    assert abs(class_number_analytic(1253, precision=25) - 1) < 1e-12


def test_enumerate_family():
    rows = enumerate_family(1253)
    by_an = {(m.a, m.n): m for m in rows}
    assert by_an[(7, 5)].d == 1253 and by_an[(7, 5)].h == 1 and by_an[(7, 5)].squarefree
    assert by_an[(1, 3)].d == 13
    assert all(m.d <= 1253 for m in rows)
    assert {m.d for m in rows if m.a > 1 and m.h == 1} >= {21, 77, 93, 237, 437, 453, 1133, 1253}
    with pytest.raises(ValueError):
        enumerate_family(12)


def test_family_h1_members_and_claim():
    rows = enumerate_family(1253)
    ones = [m for m in rows if m.h == 1]
    assert max(m.d for m in ones) == 1253
    for m in ones:
        if m.a > 1:
            assert claim_factB_check(m.a, m.n, m.h)


def test_claim_examples():
    assert claim_factB_check(7, 5)
    assert claim_factB_check(3, 1)
    with pytest.raises(PreconditionError):
        claim_factB_check(7, 3)  # h(469) = 3


def test_family_csv():
    text = family_csv(enumerate_family(21))
    assert text.splitlines()[0] == "a,n,d,squarefree,h"
    assert "3,1,21,1,1" in text.splitlines()


def test_direct_check():
    rep = direct_check(7, 1)
    assert len(rep.rows) == 1 and rep.rows[0].d == 77
    with pytest.raises(ValueError):
        direct_check(4, 5)


def test_direct_n_max_covers_boundary():
    assert direct_n_max(7) == 533 and direct_n_max(5) == 745
    for a in EXCEPTIONAL_A:
        n = direct_n_max(a)
        assert n % 2 == 1 and a * n > 2 * 1861 and a * (n - 2) <= 2 * 1861


@pytest.mark.parametrize("a", [5, 7])
def test_direct_check_endgame_ranges(a):
    rep = direct_check(a, direct_n_max(a))
    assert all(m.d <= 1253 for m in rep.hits)
