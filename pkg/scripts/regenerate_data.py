"""Rebuild the shipped arrow certificates and sieve plans under src/rdverify/data."""

import sys
from pathlib import Path

from rdverify.arrows import all_proof_arrows, find_arrows, resolve_comma_arrow
from rdverify.sieve import PlanArrow, PlanPhase, SievePlan

DATA = Path(__file__).resolve().parents[1] / "src" / "rdverify" / "data"
CERTS = DATA / "certificates"
PLANS = DATA / "plans"

EXCEPTIONAL_A = (3, 13, 17, 19, 37, 43, 73, 127, 181, 353)


def cert_ref(q, r):
    return f"arrow_{q}_{r}.json"


def write_certificates():
    CERTS.mkdir(parents=True, exist_ok=True)
    missing = []
    pairs = all_proof_arrows() + resolve_comma_arrow().arrows
    for q, r in pairs:
        certs = find_arrows(q, r)
        if certs:
            certs[0].save(CERTS)
        else:
            missing.append((q, r))
    return missing


def available(pairs):
    return [(q, r) for q, r in pairs if (CERTS / cert_ref(q, r)).is_file()]


_dropped: list[tuple[int, int]] = []


def arrows(pairs, mode):
    have = available(pairs)
    _dropped.extend(p for p in pairs if p not in have)
    return [PlanArrow(cert_ref(q, r), mode) for q, r in have]


def with_omissions(plan):
    """Name the requested arrows that have no witness, then reset the tracker."""
    if _dropped:
        names = ", ".join(f"{q}->{r}" for q, r in _dropped)
        plan.description += f"; omitted, no witness exists: {names}"
    _dropped.clear()
    return plan


def plans():
    base_a = [(95, 13), (133, 13), (133, 37), (247, 3), (247, 7), (285, 37), (91, 37), (111, 19),
              (185, 13), (273, 19), (273, 37)]
    base_b = [(133, 73), (247, 73), (247, 127), (285, 73), (219, 17), (119, 5), (127, 5), (127, 13),
              (381, 37)]
    yield SievePlan(
        "lemma61", 3 * 5 * 7 * 13 * 19 * 37, 1, [1, 3, 5, 7, 13, 17, 19, 37, 73, 127],
        [PlanPhase(1, "all", arrows(base_a, "general")),
         PlanPhase(17 * 73 * 127, "exceptional", arrows(base_b, "general"))],
        {"survivors_n_divisible_by": 3 * 5 * 7 * 13 * 19 * 37},
        description="two-phase sieve: arrows with qr | P first, then the rest on lifts of the exceptional pairs",
    )
    yield SievePlan(
        "lemma62", 5 * 7 * 19 * 37 * 43, 5 * 7 * 19 * 37, [1, 5, 7, 19, 37, 43],
        [PlanPhase(1, "all", arrows([(215, 7), (215, 19), (215, 37)], "r-divides-n"))],
        {"survivors_n_divisible_by": 43},
        description="n = 0 mod 5*7*19*37 forces n = 0 mod 43",
    )
    yield SievePlan(
        "lemma63", 3 * 5 * 13 * 19 * 37 * 181, 3 * 5 * 13 * 19 * 37, [1, 3, 5, 13, 19, 37, 181],
        [PlanPhase(1, "all", arrows([(181, 5), (181, 37)], "r-divides-n")),
         PlanPhase(1, "exceptional", arrows([(247, 181), (285, 181)], "q-divides-n"))],
        {"survivors_n_divisible_by": 181},
        description="n = 0 mod 3*5*13*19*37 forces n = 0 mod 181",
    )
    yield SievePlan(
        "lemma64", 3 * 5 * 13 * 17 * 353, 3 * 5 * 13 * 17, [1, 3, 5, 13, 17, 353],
        [PlanPhase(1, "all", arrows([(255, 353), (3315, 353)], "q-divides-n"))],
        {"survivors_n_divisible_by": 353},
        description="n = 0 mod 3*5*13*17 forces n = 0 mod 353",
    )
    yield SievePlan(
        "final17", 3 * 5 * 7 * 13 * 17, 3 * 5 * 7 * 13, [3, 5, 7, 13, 17],
        [PlanPhase(1, "all", arrows([(119, 3), (119, 5), (119, 13), (221, 5)], "r-divides-n"))],
        {"survivors_n_divisible_by": 17},
        description="with n = 0 mod 3*5*7*13 the arrows force 17 | n",
    )
    yield SievePlan(
        "endgame_a5", 11 * 41 * 61 * 1861, 1, [],
        [PlanPhase(1, "all", arrows([(61, 1861), (61, 41), (41, 11)], "general"))],
        {"no_survivors": True}, a_values=[5],
        description="a = 5: every n0 mod P contradicts some arrow",
    )
    a7 = [(61, 1861), (61, 41), (41, 11), *resolve_comma_arrow().arrows, (9, 11)]
    yield SievePlan(
        "endgame_a7", 9 * 11 * 19 * 41 * 61 * 1861, 1, [],
        [PlanPhase(1, "all", arrows(a7, "general"))],
        {"no_survivors": True}, a_values=[7],
        description="a = 7: every n0 mod P contradicts some arrow",
    )
    for a in EXCEPTIONAL_A:
        yield SievePlan(
            f"endgame_a{a}", 41 * 61 * 175 * 1861, 1, [],
            [PlanPhase(1, "all", arrows([(175, 1861), (175, 61), (61, 1861), (61, 41)], "general"))],
            {"no_survivors": True}, a_values=[a],
            description=f"a = {a}: every n0 mod P contradicts some arrow",
        )


def main():
    missing = write_certificates()
    for q, r in missing:
        print(f"no certificate for {q}->{r}", file=sys.stderr)
    PLANS.mkdir(parents=True, exist_ok=True)
    for plan in map(with_omissions, plans()):
        (PLANS / f"{plan.name}.json").write_text(plan.to_json(), encoding="utf-8")
        print("wrote", plan.name)


if __name__ == "__main__":
    main()
