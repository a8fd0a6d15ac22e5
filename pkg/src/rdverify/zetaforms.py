"""Continued fractions, the forms f1/f2, and the character sums built on them.

Everything here is exact in Q(zeta_N) with N the order of the character,
except :func:`beta_numeric`, which exists only as an independent floating
point cross-check of :func:`beta_finite`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from rdverify import kernels
from rdverify.arith import factorize, is_squarefree, jacobi, moebius
from rdverify.characters import DirichletCharacter, decompose_plus_minus, enumerate_characters
from rdverify.cyclotomic import (
    CycElement,
    L0_product_integral,
    gauss_sum_numeric,
    jacobi_sum,
    m_chi,
)
from rdverify.errors import PreconditionError


@dataclass(frozen=True)
class RDParams:
    a: int
    n: int
    fundamental: bool = False

    def __post_init__(self):
        if self.a <= 0 or self.n <= 0 or self.a % 2 == 0 or self.n % 2 == 0:
            raise ValueError(f"a and n must be odd positive integers, got a={self.a}, n={self.n}")
        if self.fundamental and not is_squarefree(self.d):
            raise ValueError(f"d={self.d} is not squarefree")

    @property
    def d(self) -> int:
        return (self.a * self.n) ** 2 + 4 * self.a


@dataclass(frozen=True)
class QuadForm:
    A: int
    B: int
    C: int

    def __call__(self, x: int, y: int) -> int:
        return self.A * x * x + self.B * x * y + self.C * y * y

    @property
    def disc(self) -> int:
        return self.B * self.B - 4 * self.A * self.C

    def __neg__(self) -> QuadForm:
        return QuadForm(-self.A, -self.B, -self.C)


@dataclass(frozen=True)
class CFExpansion:
    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    @property
    def a0(self) -> int:
        return self.preperiod[0] if self.preperiod else self.period[0]

    @property
    def length(self) -> int:
        return len(self.period)

    def terms(self, count: int) -> list[int]:
        out = list(self.preperiod)
        while len(out) < count:
            out.extend(self.period)
        return out[:count]


def _floor_quadratic(P: int, Q: int, D: int) -> int:
    # floor((P + sqrt(D)) / Q) for non-square D
    s = math.isqrt(D)
    if Q > 0:
        return (P + s) // Q
    return -((P + s) // -Q) - 1


def cf_states(P: int, Q: int, D: int):
    """Yield (P_k, Q_k, a_k) for the complete quotients (P_k + sqrt D) / Q_k."""
    s = math.isqrt(D)
    if s * s == D:
        raise ValueError(f"D={D} is a perfect square")
    if Q == 0:
        raise ValueError("Q must be nonzero")
    if (D - P * P) % Q:
        P, Q, D = P * abs(Q), Q * abs(Q), D * Q * Q
    while True:
        a = _floor_quadratic(P, Q, D)
        yield P, Q, a
        P = a * Q - P
        Q = (D - P * P) // Q


def cf_expand(P: int, Q: int, D: int) -> CFExpansion:
    """Continued fraction of (P + sqrt D) / Q; the period is found by state repetition."""
    seen: dict[tuple[int, int], int] = {}
    terms = []
    for i, (Pk, Qk, a) in enumerate(cf_states(P, Q, D)):
        if (Pk, Qk) in seen:
            start = seen[(Pk, Qk)]
            return CFExpansion(tuple(terms[:start]), tuple(terms[start:]))
        seen[(Pk, Qk)] = i
        terms.append(a)
    raise AssertionError("unreachable")


def alpha_expansion(params: RDParams) -> CFExpansion:
    """Expansion of alpha = (sqrt d - a n) / 2."""
    return cf_expand(-params.a * params.n, 2, params.d)


def forms_f(params: RDParams) -> tuple[QuadForm, QuadForm]:
    a, an = params.a, params.a * params.n
    return QuadForm(a, an, -1), QuadForm(1, an, -a)


def derive_Qj(params: RDParams) -> tuple[QuadForm, QuadForm]:
    """Q_1, Q_2 recomputed from the convergents of alpha.

    alpha_k = p_k - q_k alpha is kept as a pair (x, y) meaning x + y alpha,
    with alpha + conj(alpha) = -a n and alpha * conj(alpha) = -a.
    """
    a, an = params.a, params.a * params.n
    cf = alpha_expansion(params)
    quotients = cf.terms(3)
    # (p_{-1}, q_{-1}) = (1, 0), (p_0, q_0) = (a_0, 1)
    p = [1, quotients[0]]
    qq = [0, 1]
    for t in quotients[1:3]:
        p.append(t * p[-1] + p[-2])
        qq.append(t * qq[-1] + qq[-2])
    alphas = [(pk, -qk) for pk, qk in zip(p, qq)]  # alpha_{-1}, alpha_0, alpha_1, alpha_2

    def norm(x):
        return x[0] * x[0] - an * x[0] * x[1] - a * x[1] * x[1]

    def trace_mixed(x, y):
        # x * conj(y) + y * conj(x)
        return 2 * x[0] * y[0] - an * (x[0] * y[1] + x[1] * y[0]) - 2 * a * x[1] * y[1]

    out = []
    for j in (1, 2):
        u, w = alphas[j], alphas[j + 1]  # alpha_{j-1}, alpha_j
        out.append(QuadForm(norm(u), trace_mixed(u, w), norm(w)))
    return out[0], out[1]


# character sums over the forms

def _form_sum(f: QuadForm, chi: DirichletCharacter, weight: int) -> CycElement:
    hist = kernels.form_histogram(chi.exps, chi.modulus, chi.order, f.A, f.B, f.C, weight)
    return CycElement.from_histogram(chi.order, hist)


def G_scaled(f: QuadForm, chi: DirichletCharacter) -> CycElement:
    """q^2 G(f, chi) = sum chi(f(u, v)) u v, an element of Z[zeta_N]."""
    return _form_sum(f, chi, kernels.WEIGHT_UV)


def G_sum(f: QuadForm, chi: DirichletCharacter) -> CycElement:
    return G_scaled(f, chi) / chi.modulus**2


def C_chi(a: int, n: int, chi: DirichletCharacter) -> CycElement:
    """q (G(f1) + G(f2)) for the forms attached to the residues a, n."""
    f1 = QuadForm(a, a * n, -1)
    f2 = QuadForm(1, a * n, -a)
    return (G_scaled(f1, chi) + G_scaled(f2, chi)) / chi.modulus


def g_aux(chi: DirichletCharacter, f: QuadForm, h: str) -> CycElement:
    """sum over 1 <= m, n < q of chi(f(m, n)) h(n / q) for h in {"one", "B1", "t"}."""
    q = chi.modulus
    if h == "one":
        return _form_sum(f, chi, kernels.WEIGHT_ONE)
    if h == "t":
        return _form_sum(f, chi, kernels.WEIGHT_V) / q
    if h == "B1":
        return _form_sum(f, chi, kernels.WEIGHT_B1) / (2 * q)
    raise ValueError(f"unknown h: {h!r}")


def gamma_scaled(chi: DirichletCharacter) -> CycElement:
    """q^2 gamma_chi = sum_{n < q} chi(n)^2 n^2."""
    q, N = chi.modulus, chi.order
    n = np.arange(q, dtype=np.int64)
    exps = np.where(chi.exps >= 0, (2 * chi.exps) % N, -1)
    hist = [0] * N
    for k, w in zip(exps[exps >= 0].tolist(), (n * n)[exps >= 0].tolist()):
        hist[k] += w
    return CycElement.from_histogram(N, hist)


def gamma_chi(chi: DirichletCharacter) -> CycElement:
    return gamma_scaled(chi) / chi.modulus**2


def _geometric_inverse(p: int, k: int, N: int) -> CycElement:
    """1 / (p zeta_N^k - 1), via (p w - 1) * sum_{j<m} (p w)^j = p^m - 1 with w^m = 1."""
    m = N // math.gcd(k, N)
    hist = [0] * N
    for j in range(m):
        hist[(j * k) % N] += p**j
    return CycElement.from_histogram(N, hist) / (p**m - 1)


@dataclass(frozen=True)
class BetaParts:
    """Ingredients of the finite formula for beta_chi, all in Q(zeta_N), N = ord(chi)."""

    chi_plus: DirichletCharacter
    chi_minus: DirichletCharacter
    chi_plus_at_minus1: int
    jacobi_plus: CycElement
    gamma_scaled: CycElement
    mu_minus: int
    prod_p_minus_one: CycElement  # prod_{p | q-} (p chi+^2(p) - 1)
    prod_p2_minus_one: CycElement  # prod_{p | q-} (p^2 chi+^2(p) - 1)

    @property
    def beta(self) -> CycElement:
        N = self.gamma_scaled.N
        ratio = self.prod_p2_minus_one
        for p, _ in factorize(self.chi_minus.modulus).factors if self.chi_minus.modulus > 1 else ():
            k = 2 * self.chi_plus(p) * (N // self.chi_plus.order)
            ratio = ratio * _geometric_inverse(p, k, N)
        q = self.gamma_scaled_modulus
        return (self.jacobi_plus * self.gamma_scaled * ratio).scale(
            Fraction(self.chi_plus_at_minus1 * self.mu_minus, q * q)
        )

    @property
    def gamma_scaled_modulus(self) -> int:
        return self.chi_plus.modulus * self.chi_minus.modulus


def beta_parts(chi: DirichletCharacter) -> BetaParts:
    if chi.order <= 2:
        raise ValueError("beta_chi needs a character of order > 2")
    N = chi.order
    plus, minus = decompose_plus_minus(chi)
    step = N // plus.order
    J = jacobi_sum(plus).lift(N)
    p1 = CycElement.one(N)
    p2 = CycElement.one(N)
    for p, _ in factorize(minus.modulus).factors if minus.modulus > 1 else ():
        z = CycElement.zeta(N, 2 * plus(p) * step)
        p1 = p1 * (z.scale(p) - 1)
        p2 = p2 * (z.scale(p * p) - 1)
    return BetaParts(plus, minus, plus.parity, J, gamma_scaled(chi), moebius(minus.modulus), p1, p2)


def beta_finite(chi: DirichletCharacter) -> CycElement:
    if not chi.is_primitive:
        raise ValueError("beta_chi needs a primitive character")
    return beta_parts(chi).beta


def beta_numeric(chi: DirichletCharacter, M: int = 10**6) -> complex:
    """chi(-1) tau(chi)^2 L(2, conj(chi)^2) / pi^2 with the L-series cut after M terms."""
    q, N = chi.modulus, chi.order
    m = np.arange(1, M + 1, dtype=np.float64)
    # per residue class partial sums of 1/m^2, smallest terms first
    tails = np.bincount((np.arange(1, M + 1) % q)[::-1], weights=(1.0 / (m * m))[::-1], minlength=q)
    exps = chi.exps
    mask = exps >= 0
    vals = np.exp(-2j * np.pi * (2 * exps[mask] % N) / N)
    L2 = complex((vals * tails[mask]).sum())
    tau = gauss_sum_numeric(chi)
    return chi.parity * tau * tau * L2 / math.pi**2


def c_a(a: int, chi: DirichletCharacter) -> CycElement:
    """a + conj(chi)(a)."""
    k = chi(a)
    base = CycElement.integer(chi.order, a)
    return base if k is None else base + CycElement.zeta(chi.order, -k)


def _check_zeta_preconditions(params: RDParams, chi: DirichletCharacter) -> None:
    q = chi.modulus
    if q <= 1 or not chi.is_odd or not chi.is_primitive or not chi.is_complex:
        raise PreconditionError("needs an odd primitive complex character of modulus > 1")
    if math.gcd(q, 2 * params.d) != 1:
        raise PreconditionError(f"gcd(q={q}, 2d={2 * params.d}) > 1")
    if params.a == 1:
        raise NotImplementedError("a = 1 has period length 1 and is not handled")


def _chi_d_term(params: RDParams, chi: DirichletCharacter) -> CycElement:
    """chi(d) (d/q) as an element of Q(zeta_N)."""
    k = chi(params.d)
    return CycElement.zeta(chi.order, k).scale(jacobi(params.d, chi.modulus))


def partial_zeta_zero(params: RDParams, chi: DirichletCharacter) -> CycElement:
    """Half the partial zeta value at 0 for the principal class, period (n, a n)."""
    _check_zeta_preconditions(params, chi)
    f1, f2 = forms_f(params)
    G = G_sum(f1, chi) + G_sum(f2, chi)
    return G + _chi_d_term(params, chi) * beta_finite(chi) * c_a(params.a, chi) * Fraction(params.n, 2)


@dataclass(frozen=True)
class IdentityResult:
    holds: bool
    lhs: CycElement
    rhs: CycElement


def identity_check(params: RDParams, chi: DirichletCharacter, class_number: int | None = None) -> IdentityResult:
    """Compare -m_chi L(0, chi chi_d) with 2 C_chi(a, n) + n q chi(d) (d/q) beta_chi c_a exactly."""
    if class_number is None:
        from rdverify.classnum import class_number as compute_h

        class_number = compute_h(params.d)
    if class_number != 1:
        raise PreconditionError(f"h({params.d}) = {class_number}, the identity needs h = 1")
    _check_zeta_preconditions(params, chi)
    q = chi.modulus
    lhs = -m_chi(chi) * L0_product_integral(chi, params.d)
    rhs = C_chi(params.a, params.n, chi) * 2 + (
        _chi_d_term(params, chi) * beta_finite(chi) * c_a(params.a, chi)
    ).scale(params.n * q)
    return IdentityResult(lhs == rhs, lhs, rhs)


@dataclass(frozen=True)
class BetaComparison:
    q: int
    exponents: tuple[int, ...]
    finite: complex  # embedding 1 of the exact value
    numeric: complex
    diff: float  # at the best matching embedding
    best_embedding: int


def beta_cross_check(qmax: int, M: int = 10**6) -> list[BetaComparison]:
    """Compare beta_finite with beta_numeric for every primitive chi of order > 2, odd q <= qmax."""
    out = []
    for q in range(3, qmax + 1, 2):
        for chi in enumerate_characters(q, primitive=True, complex=True):
            exact = beta_finite(chi)
            num = beta_numeric(chi, M)
            best = min(
                (abs(exact.embed(k) - num), k) for k in range(1, chi.order + 1) if math.gcd(k, chi.order) == 1
            )
            out.append(BetaComparison(q, chi.exponents, exact.embed(1), num, best[0], best[1]))
    return out
