"""Executable replays of the worked cases, each with its expected values."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .attack import AttackProfile, default_profile
from .information import achievable, empirical_mi, expected_errors, qber
from .montecarlo import enumerate_outcomes
from .security import (
    crossing_point,
    expected_case_threshold,
    spd_information,
    threshold_report,
    with_perfect_eve,
    worst_case_threshold,
)

EXACT_MATCH_TAGS = ("uuuu", "ssss", "suus", "susu", "ssuu", "usus", "ussu", "uuss")
ONE_ERROR_TAGS = ("uuuu", "susu", "ssuu", "ussu")


@dataclass
class CaseResult:
    name: str
    lines: list[str] = field(default_factory=list)
    passed: bool = True

    def check(self, label: str, value, ok: bool, expected: str):
        self.lines.append(f"{label}={value} expected={expected} {'ok' if ok else 'MISMATCH'}")
        self.passed &= bool(ok)

    def note(self, text: str):
        self.lines.append(f"# {text}")

    def render(self) -> str:
        return "\n".join([f"example={self.name}", *self.lines, "PASS" if self.passed else "FAIL"]) + "\n"


def empirical_1001(profile: AttackProfile) -> CaseResult:
    res = CaseResult("empirical-1001")
    i = empirical_mi("1001", "1000")
    res.check("I", f"{i:.4f}", abs(i - 0.3113) <= 5e-4, "0.3113+-5e-4")
    q = qber("1001", "1000")
    res.check("QBER", f"{q.qber}", q.qber == Fraction(1, 4), "1/4")
    for tags in ONE_ERROR_TAGS:
        p = enumerate_outcomes("1001", tags, profile).bob_prob("1000")
        res.check(f"P(bob=1000|{tags})", f"{p:.6g}", p > 0, ">0")
    return res


def exact_match_1001(profile: AttackProfile) -> CaseResult:
    res = CaseResult("exact-match-1001")
    i = empirical_mi("1001", "1001")
    res.check("I", f"{i:.4f}", i == 1.0, "1")
    q = qber("1001", "1001")
    res.check("QBER", f"{q.qber}", q.k == 0, "0")
    for tags in EXACT_MATCH_TAGS:
        p = enumerate_outcomes("1001", tags, profile).bob_prob("1001")
        res.check(f"P(bob=1001|{tags})", f"{p:.6g}", p > 0, ">0")
    return res


def integer_qber(profile: AttackProfile) -> CaseResult:
    res = CaseResult("integer-qber")
    for n, want in ((201, 50.25), (202, 50.5), (203, 50.75)):
        e = expected_errors(Fraction(1, 4), n)
        ok = e == want and not achievable(Fraction(1, 4), n)
        res.check(f"N={n} expected_errors", f"{e:.2f} achievable={str(achievable(Fraction(1, 4), n)).lower()}",
                  ok, f"{want:.2f} achievable=false")
    e = expected_errors(Fraction(1, 4), 204)
    res.check("N=204 expected_errors", f"{e:g} achievable=true", achievable(Fraction(1, 4), 204), "51 achievable=true")
    res.note("an observed run always has an integer count k; qber is k/N")
    return res


def fig4_recon(profile: AttackProfile) -> CaseResult:
    res = CaseResult("fig4-recon")
    ab0, ae0 = spd_information(profile, 0.0, "per-arrived")
    res.check("per-arrived I_AB(0)", f"{ab0:.4f}", ab0 > 0, ">0")
    res.check("per-arrived I_AE(0)", f"{ae0:.4f}", ae0 > ab0, ">I_AB(0)")
    sb0, se0 = spd_information(profile, 0.0, "per-sent")
    res.check("per-sent I_AB(0)", f"{sb0:g}", sb0 == 0.0, "0")
    res.check("per-sent I_AE(0)", f"{se0:g}", se0 == 0.0, "0")
    ab5, ae5 = spd_information(profile, 0.5, "per-arrived")
    res.check("per-arrived constant on [0,0.5]", f"{max(abs(ab5 - ab0), abs(ae5 - ae0)):.1e}",
              abs(ab5 - ab0) < 1e-9 and abs(ae5 - ae0) < 1e-9, "<1e-9")
    x = crossing_point(profile)
    res.check("crossing_eta", "none" if x is None else f"{x:.4f}",
              x is not None and abs(x - 0.5546) <= 1e-3, "0.5546+-1e-3")
    if abs(ab0 - ae0) > 1e-9:
        res.note(f"below the forking point I_AE - I_AB = {ae0 - ab0:.4f} != 0 for this profile")
    return res


def threshold_75(profile: AttackProfile) -> CaseResult:
    res = CaseResult("threshold-75")
    w = worst_case_threshold(profile)
    res.check("worst_case_eta", f"{w:g}", w == 0.75, "0.75")
    e = expected_case_threshold(profile)
    res.check("expected_case_eta", f"{e:g}", e == 0.5, "0.5")
    p = expected_case_threshold(with_perfect_eve(profile))
    res.check("perfect_eve_expected_eta", f"{p:.6g}", abs(p - 0.6) <= 1e-6, "0.6+-1e-6")
    res.note(f"profile_digest={threshold_report(profile).profile_digest}")
    return res


CASES = {
    "empirical-1001": empirical_1001,
    "exact-match-1001": exact_match_1001,
    "integer-qber": integer_qber,
    "fig4-recon": fig4_recon,
    "threshold-75": threshold_75,
}


def run_case(name: str, profile: AttackProfile | None = None) -> CaseResult:
    return CASES[name](profile or default_profile())
