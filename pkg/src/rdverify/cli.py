"""Command-line entry point.

Exit codes: 0 success or expectation met, 1 expectation failed, 2 usage or
precondition error.  Every command writes a run manifest into the output
directory (``--out-dir``, else ``$RDVERIFY_OUT``, else ./rdverify-out).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from rdverify import __version__
from rdverify.errors import CertificateParseError, PreconditionError

MANIFEST_SCHEMA_VERSION = "1"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

LEMMA_PLANS = {
    "lemma-6.1": "lemma61",
    "lemma-6.2": "lemma62",
    "lemma-6.3": "lemma63",
    "lemma-6.4": "lemma64",
    "final-17": "final17",
}
EXTENDED_IDS = ("lemma-6.1",)
ENDGAME_A = (3, 5, 7, 13, 17, 19, 37, 43, 73, 127, 181, 353)
EXTERNAL_AXIOM = "if 43*181*353 | n and d = (an)^2 + 4a is squarefree then h(d) > 1"


class UsageError(Exception):
    pass


def file_digest(path: Path) -> str:
    """sha256 of a file; JSON documents are hashed canonically without their wall_time_s field."""
    data = path.read_bytes()
    if path.suffix == ".json":
        try:
            doc = json.loads(data)
        except json.JSONDecodeError:
            return hashlib.sha256(data).hexdigest()
        if isinstance(doc, dict):
            doc.pop("wall_time_s", None)
        data = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: str
    arguments: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    stdout_digest: str = ""
    exit_code: int | None = None
    toolkit_version: str = __version__
    wall_time: float = 0.0

    def content_dict(self) -> dict:
        return {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "kind": "run-manifest",
            "command": self.command,
            "arguments": self.arguments,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "stdout_digest": self.stdout_digest,
            "exit_code": self.exit_code,
            "toolkit_version": self.toolkit_version,
        }

    def content_digest(self) -> str:
        return hashlib.sha256(json.dumps(self.content_dict(), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.content_dict()
        d["content_digest"] = self.content_digest()
        d["wall_time_s"] = round(self.wall_time, 3)
        return d


class Run:
    """Collects stdout and file digests for the manifest of one command invocation."""

    def __init__(self, command: str, arguments: dict, out_dir: Path):
        self.out_dir = out_dir
        self.manifest = RunManifest(command, arguments)
        self._stdout: list[str] = []
        self._t0 = time.perf_counter()

    def print(self, *parts, err: bool = False) -> None:
        text = " ".join(str(p) for p in parts)
        if err:
            print(text, file=sys.stderr)
        else:
            print(text)
            self._stdout.append(text)

    def add_input(self, path: Path) -> None:
        self.manifest.inputs[str(path)] = file_digest(path)

    def write(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.manifest.outputs[str(path)] = file_digest(path)
        return path

    def finish(self, code: int) -> Path:
        m = self.manifest
        m.exit_code = code
        m.stdout_digest = hashlib.sha256("\n".join(self._stdout).encode()).hexdigest()
        m.wall_time = time.perf_counter() - self._t0
        key = hashlib.sha256(json.dumps([m.command, m.arguments], sort_keys=True).encode()).hexdigest()[:12]
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"manifest_{m.command}_{key}.json"
        path.write_text(json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


# commands

def cmd_verify_arrow(args, run: Run) -> int:
    from rdverify.arrows import check_certificate, find_arrows

    certs = find_arrows(args.q, args.r, "all" if args.all else "first")
    if not certs:
        run.print(f"{args.q}->{args.r}: no odd primitive complex character mod {args.q} has m_chi in a prime above {args.r}")
        return EXIT_FAILED
    out = Path(args.out) if args.out else run.out_dir
    for i, cert in enumerate(certs):
        if not check_certificate(cert):
            raise RuntimeError(f"certificate {i} for {args.q}->{args.r} failed re-verification")
        name = cert.filename if i == 0 else cert.filename.replace(".json", f"_{i + 1}.json")
        path = run.write(out / name, cert.to_json())
        chi = cert.character
        run.print(f"{args.q}->{args.r}: chi exponents {list(chi.exponents)} (order {chi.order}), "
                  f"prime above {args.r} given by {list(cert.target.poly)} -> {path.name}")
    return EXIT_OK


def _run_plan(plan_path: Path, run: Run, threads: int, cap: int, report_path: Path | None) -> int:
    from rdverify.sieve import SievePlan, load_constraints, run_sieve

    plan = SievePlan.load(plan_path)
    run.add_input(plan_path)
    for ph in plan.phases:
        for a in ph.arrows:
            run.add_input(plan.resolve_certificate(a.certificate))
    constraints = load_constraints(plan)
    report = run_sieve(plan, constraints, threads=threads, survivor_cap=cap)
    target = report_path or run.out_dir / f"report_{plan.name or plan_path.stem}.json"
    run.write(target, report.to_json())
    run.print(f"plan {plan.name}: modulus {report.modulus}")
    for i, ph in enumerate(report.phases, 1):
        run.print(f"  phase {i} (mod {ph.modulus}, {ph.lift}): tested {ph.tested}, "
                  f"killed by Legendre {ph.killed_by_legendre}, killed by congruence {ph.killed_by_congruence}, "
                  f"survivors {ph.survivors}, carried {ph.carried}")
    nonzero = {k: v for k, v in report.survivors_by_n0.items() if k}
    run.print(f"  survivors: {report.total_survivors} ({len(nonzero)} residues n0 != 0)")
    if plan.a_exclusions:
        run.print(f"  a values excluded by hypothesis (not sieved): {plan.a_exclusions}")
    if report.expectation_met is None:
        run.print("  no expectation declared")
        return EXIT_OK
    run.print(f"  expectation {report.expectation}: {'met' if report.expectation_met else 'NOT met'}")
    if not report.expectation_met:
        shown = sorted(nonzero.items())[:10]
        run.print(f"  offending n0 residues (first {len(shown)}): {shown}")
    return EXIT_OK if report.expectation_met else EXIT_FAILED


def cmd_sieve(args, run: Run) -> int:
    path = Path(args.plan)
    if not path.is_file():
        raise UsageError(f"plan file {path} not found")
    return _run_plan(path, run, args.threads, args.survivor_cap, Path(args.out) if args.out else None)


def cmd_identity_check(args, run: Run) -> int:
    from rdverify.characters import enumerate_characters
    from rdverify.classnum import class_number
    from rdverify.zetaforms import RDParams, identity_check

    params = RDParams(args.a, args.n)
    h = class_number(params.d)
    if h != 1:
        raise PreconditionError(f"h({params.d}) = {h}; the identity needs h = 1")
    chars = enumerate_characters(args.q, odd=True, primitive=True, complex=True)
    if not chars:
        raise PreconditionError(f"no odd primitive complex character mod {args.q}")
    ok = True
    for chi in chars:
        res = identity_check(params, chi, class_number=h)
        ok &= res.holds
        run.print(f"chi mod {args.q}, exponents {list(chi.exponents)}, order {chi.order}:")
        run.print(f"  lhs = {res.lhs}")
        run.print(f"  rhs = {res.rhs}")
        run.print(f"  {'equal' if res.holds else 'DIFFERENT'}")
    run.print(f"d = {params.d}: identity {'holds' if ok else 'FAILS'} for {len(chars)} characters")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_beta_check(args, run: Run) -> int:
    from rdverify.zetaforms import beta_cross_check

    rows = beta_cross_check(args.qmax, args.terms)
    worst = max((r.diff for r in rows), default=0.0)
    bad = [r for r in rows if not r.diff <= args.tol]
    run.print(f"{len(rows)} characters with q <= {args.qmax}; max |finite - numeric| = {worst:.3e}; "
              f"embedding 1 matched in {sum(r.best_embedding == 1 for r in rows)} cases")
    for r in bad[:20]:
        run.print(f"  q={r.q} exponents {list(r.exponents)}: diff {r.diff:.3e} > tol {args.tol}")
    return EXIT_OK if not bad else EXIT_FAILED


def cmd_class_number(args, run: Run) -> int:
    from rdverify.classnum import class_number

    run.print(class_number(args.d))
    return EXIT_OK


def _csv_out(run: Run, text: str, out: str | None) -> None:
    if out:
        run.write(Path(out), text)
    sys.stdout.write(text)
    run._stdout.append(text)


def cmd_enumerate_family(args, run: Run) -> int:
    from rdverify.classnum import enumerate_family, family_csv

    _csv_out(run, family_csv(enumerate_family(args.max_d)), args.out)
    return EXIT_OK


def cmd_direct_check(args, run: Run) -> int:
    from rdverify.classnum import direct_check, family_csv

    report = direct_check(args.a, args.n_max)
    _csv_out(run, family_csv(list(report.rows)), args.out)
    return EXIT_OK


# reproduce

def _plan_path(name: str) -> Path:
    from rdverify.sieve import PLAN_DIR

    return PLAN_DIR / f"{name}.json"


def _reproduce_arrows(run: Run) -> tuple[int, dict]:
    from rdverify.arrows import all_proof_arrows, resolve_comma_arrow, verify_arrow_set

    report = verify_arrow_set(all_proof_arrows())
    comma = resolve_comma_arrow()
    for e in report.entries:
        if e.certificates:
            run.write(run.out_dir / "certificates" / e.certificates[0].filename, e.certificates[0].to_json())
    run.print(report.summary())
    q1, q2 = comma.moduli
    run.print(f"'{q1},{q2} -> {comma.r}': product {comma.product_status.label} "
              f"{'ok' if comma.product_status.established else 'failed'}; separately "
              + ", ".join(f"{s.label} {'ok' if s.established else 'failed'}" for s in comma.separate_status)
              + f"; reading used: {comma.reading}")
    for s in [comma.product_status, *comma.separate_status]:
        if s.established:
            run.write(run.out_dir / "certificates" / s.certificates[0].filename, s.certificates[0].to_json())
    failed = [e.label for e in report.failed]
    if comma.reading == "none":
        failed.append(f"{q1},{q2}->{comma.r}")
    total = len(report.entries) + 1
    run.print(f"{total - len(failed)} of {total} arrows established" + (f"; not established: {failed}" if failed else ""))
    return (EXIT_OK if not failed else EXIT_FAILED), {"established": total - len(failed), "total": total,
                                                      "failed": failed, "comma_reading": comma.reading}


def _reproduce_base_cases(run: Run) -> tuple[int, dict]:
    from rdverify.classnum import base_cases, family_csv

    rep = base_cases()
    run.write(run.out_dir / "base_cases.csv", family_csv(rep.checked))
    run.print(f"checked {len(rep.checked)} pairs (all a n <= {rep.an_max}, exceptional a up to a n / 2 > {rep.boundary})")
    run.print("h = 1 cases found: " + ", ".join(f"(a={m.a}, n={m.n}, d={m.d})" for m in rep.hits))
    run.print(f"largest d with h = 1: {rep.max_hit_d}; analytic mismatches: {len(rep.analytic_mismatches)}")
    info = {"checked": len(rep.checked), "max_hit_d": rep.max_hit_d,
            "hits": [[m.a, m.n, m.d] for m in rep.hits], "analytic_mismatches": len(rep.analytic_mismatches)}
    return (EXIT_OK if rep.ok else EXIT_FAILED), info


def _reproduce_plan(name: str, run: Run, threads: int) -> int:
    return _run_plan(_plan_path(name), run, threads, 1000, None)


def _reproduce_theorem(args, run: Run) -> int:
    steps = []

    def record(step: str, status: str, detail=None):
        steps.append({"step": step, "status": status, "detail": detail})
        run.print(f"[{status:>14}] {step}")

    code, info = _reproduce_arrows(run)
    record("arrow list", "VERIFIED" if code == EXIT_OK else "PARTIAL", info)
    code, info = _reproduce_base_cases(run)
    record("base cases", "VERIFIED" if code == EXIT_OK else "FAILED", info)
    for lemma, plan in LEMMA_PLANS.items():
        if lemma in EXTENDED_IDS and not args.include_extended:
            record(lemma, "NOT-RUN", "extended run; pass --include-extended")
            continue
        code = _reproduce_plan(plan, run, args.threads)
        record(lemma, "VERIFIED" if code == EXIT_OK else "FAILED")
    for a in ENDGAME_A:
        code = _reproduce_plan(f"endgame_a{a}", run, args.threads)
        record(f"endgame-a{a}", "VERIFIED" if code == EXIT_OK else "FAILED")
    record(EXTERNAL_AXIOM, "EXTERNAL-AXIOM", "assumed, not verified here")
    # the arrow list is informational: every plan re-verifies the certificates it uses
    failed = [s["step"] for s in steps if s["status"] == "FAILED"]
    not_run = [s["step"] for s in steps if s["status"] == "NOT-RUN"]
    verdict = "complete modulo the external axiom" if not failed and not not_run else "incomplete"
    ledger = {"schema_version": MANIFEST_SCHEMA_VERSION, "kind": "theorem-ledger", "steps": steps,
              "failed": failed, "not_run": not_run, "verdict": verdict}
    run.write(run.out_dir / "theorem_ledger.json", json.dumps(ledger, indent=2, sort_keys=True) + "\n")
    run.print(f"verdict: {verdict}" + (f"; failed: {failed}" if failed else "") + (f"; not run: {not_run}" if not_run else ""))
    return EXIT_OK if not failed else EXIT_FAILED


def cmd_reproduce(args, run: Run) -> int:
    target = args.target
    if target in LEMMA_PLANS:
        return _reproduce_plan(LEMMA_PLANS[target], run, args.threads)
    if target.startswith("endgame-a"):
        try:
            a = int(target[len("endgame-a"):])
        except ValueError:
            a = None
        if a not in ENDGAME_A:
            raise UsageError(f"unknown endgame {target}; known a values: {ENDGAME_A}")
        return _reproduce_plan(f"endgame_a{a}", run, args.threads)
    if target == "arrows":
        return _reproduce_arrows(run)[0]
    if target == "base-cases":
        return _reproduce_base_cases(run)[0]
    if target == "theorem":
        return _reproduce_theorem(args, run)
    raise UsageError(f"unknown reproduce target {target!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdverify", description="Class number one verification toolkit")
    p.add_argument("--version", action="version", version=f"rdverify {__version__}")
    p.add_argument("--out-dir", help="directory for manifests and outputs (default $RDVERIFY_OUT or ./rdverify-out)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify-arrow", help="search for and certify an arrow q -> r")
    s.add_argument("q", type=int)
    s.add_argument("r", type=int)
    s.add_argument("--all", action="store_true", help="emit every witness, not just the first")
    s.add_argument("--out", help="certificate directory")
    s.set_defaults(func=cmd_verify_arrow)

    s = sub.add_parser("sieve", help="run a sieve plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", help="report file")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--survivor-cap", type=int, default=1000)
    s.set_defaults(func=cmd_sieve)

    s = sub.add_parser("identity-check", help="exact check of the L(0) identity for all characters mod q")
    s.add_argument("a", type=int)
    s.add_argument("n", type=int)
    s.add_argument("q", type=int)
    s.set_defaults(func=cmd_identity_check)

    s = sub.add_parser("beta-check", help="finite beta formula against the L(2) series")
    s.add_argument("--qmax", type=int, default=40)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--terms", type=int, default=10**6)
    s.set_defaults(func=cmd_beta_check)

    s = sub.add_parser("class-number", help="class number of Q(sqrt d)")
    s.add_argument("d", type=int)
    s.set_defaults(func=cmd_class_number)

    s = sub.add_parser("enumerate-family", help="CSV of the family d = (an)^2 + 4a up to a bound")
    s.add_argument("--max-d", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_enumerate_family)

    s = sub.add_parser("direct-check", help="CSV of class numbers for fixed a and odd n <= n_max")
    s.add_argument("a", type=int)
    s.add_argument("n_max", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_direct_check)

    s = sub.add_parser("reproduce", help="re-run one step of the proof, or all of it")
    s.add_argument("target", help="lemma-6.1..lemma-6.4, final-17, endgame-a<k>, arrows, base-cases, theorem")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--include-extended", action="store_true", help="also run the extended steps in 'theorem'")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out_dir = Path(args.out_dir or os.environ.get("RDVERIFY_OUT") or "rdverify-out")
    arguments = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir")}
    run = Run(args.command, arguments, out_dir)
    try:
        code = args.func(args, run)
    except (UsageError, PreconditionError, CertificateParseError, FileNotFoundError, ValueError,
            NotImplementedError) as exc:
        run.print(f"error: {exc}", err=True)
        code = EXIT_USAGE
    run.finish(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
