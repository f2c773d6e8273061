"""Information curves over eta and the competing security thresholds.

Curves are computed per attack class. A sent bit is attacked with
probability ``f = attack_fraction(eta)``; the single-use information is

    I_AB = (1 - f) * H(A) + f * I(A; B | attacked)
    I_AE =              f * I(A; E, mode | attacked)

(``per-arrived``). The ``per-sent`` curves multiply both by the arrival rate,
which is ``eta`` by construction, so they vanish at eta = 0.

Three threshold rules are kept side by side:

``expected``   smallest eta with E[Bob correct] >= E[Eve correct] per sent
               bit, Eve credited on attacked bits only.
``worst-case`` Eve gets every attacked bit right, Bob is only guaranteed the
               unattacked ones.
``crossing``   where the per-arrived I_AB and I_AE curves cross.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .attack import (
    AttackProfile,
    arrival_rate,
    attack_fraction,
    default_profile,
    forking_eta,
    perfect_eve_profile,
    product_profile,
)
from .information import JointDistribution, entropy, mutual_information
from .montecarlo import RunConfig, _map, class_resolved_mi, derive_seed, simulate_rounds, worker_count

NORMALIZATIONS = ("per-arrived", "per-sent")
BISECT_TOL = 1e-6

EXPECTED_RULE = "expected-bob-vs-expected-eve"
WORST_CASE_RULE = "guaranteed-bob-vs-best-case-eve"
CROSSING_RULE = "i_ab-equals-i_ae"


def attacked_information(profile: AttackProfile, p_one: float = 0.5) -> tuple[float, float]:
    """``(I(A;B), I(A;E,mode))`` on a single attacked, arrived bit."""
    prior = np.array([1 - p_one, p_one])
    bob = JointDistribution(prior[:, None] * profile.bob_channel())
    eve = JointDistribution(prior[:, None] * profile.eve_channel(), (0, 1), ("u0", "u1", "s0", "s1"))
    return mutual_information(bob), mutual_information(eve)


@dataclass(frozen=True)
class SweepRow:
    eta: float
    f: float
    i_ab_spd: float
    i_ae_spd: float
    normalization: str
    i_ab_emp_mean: float | None = None
    i_ae_emp_mean: float | None = None


CSV_HEADER = "eta,f,i_ab_spd,i_ae_spd,i_ab_emp_mean,i_ae_emp_mean,normalization"


def _g(x) -> str:
    return "" if x is None else f"{x:.6g}"


def rows_to_csv(rows: list[SweepRow]) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in rows:
        out.write(
            ",".join([_g(r.eta), _g(r.f), _g(r.i_ab_spd), _g(r.i_ae_spd),
                      _g(r.i_ab_emp_mean), _g(r.i_ae_emp_mean), r.normalization]) + "\n"
        )
    return out.getvalue()


def spd_information(profile: AttackProfile, eta: float, normalization: str = "per-arrived",
                    p_one: float = 0.5) -> tuple[float, float]:
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    f = attack_fraction(eta, profile.p_loss_attacked)
    i_b, i_e = attacked_information(profile, p_one)
    i_ab = (1 - f) * entropy([1 - p_one, p_one]) + f * i_b
    i_ae = f * i_e
    if normalization == "per-sent":
        r = arrival_rate(eta, profile.p_loss_attacked)
        i_ab, i_ae = r * i_ab, r * i_ae
    return i_ab, i_ae


def info_curves(eta_grid, profile: AttackProfile | None = None, normalization: str = "per-arrived",
                trials: int = 0, n_bits: int = 1000, seed: int = 0,
                workers: int | None = None) -> list[SweepRow]:
    """Single-use information per eta, optionally with Monte Carlo means.

    With ``trials > 0`` each eta gets ``trials`` runs of ``n_bits`` and the
    class-resolved empirical information (same normalization) is averaged.
    Rows come back sorted by eta.
    """
    grid = sorted(float(x) for x in eta_grid)
    if not grid:
        raise ValueError("eta grid is empty")
    if grid[0] < 0 or grid[-1] > 1:
        raise ValueError("eta grid must lie in [0, 1]")
    profile = profile or default_profile()
    w = worker_count(workers)

    def row(idx_eta):
        idx, eta = idx_eta
        i_ab, i_ae = spd_information(profile, eta, normalization)
        emp_ab = emp_ae = None
        if trials > 0:
            sab = sae = 0.0
            any_arrived = False
            for t in range(trials):
                rounds = simulate_rounds(RunConfig(n_bits, eta, derive_seed(seed, idx, t), profile), workers=1)
                any_arrived |= bool(rounds.arrived.any())
                scale = rounds.arrived.mean() if normalization == "per-sent" else 1.0
                sab += scale * class_resolved_mi(rounds, "bob")
                sae += scale * class_resolved_mi(rounds, "eve")
            emp_ab, emp_ae = sab / trials, sae / trials
            if normalization == "per-arrived" and not any_arrived:
                # nothing to condition on
                emp_ab = emp_ae = None
        return SweepRow(eta, attack_fraction(eta, profile.p_loss_attacked), i_ab, i_ae,
                        normalization, emp_ab, emp_ae)

    return _map(row, list(enumerate(grid)), w)


def default_grid(points: int = 101) -> list[float]:
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    return [i / (points - 1) for i in range(points)]


def crossing_point(profile: AttackProfile | None = None, normalization: str = "per-arrived",
                   tol: float = BISECT_TOL) -> float | None:
    """Eta above the forking point where I_AB overtakes I_AE, by bisection.

    Returns the forking point itself when the curves already meet there, and
    None when I_AB - I_AE does not change sign on the interval.
    """
    profile = profile or default_profile()
    lo = forking_eta(profile.p_loss_attacked)
    hi = 1.0

    # per-sent scales both curves by the same positive factor above eta = 0
    def gap(eta):
        i_ab, i_ae = spd_information(profile, eta, "per-arrived")
        return i_ab - i_ae

    g_lo, g_hi = gap(lo), gap(hi)
    if abs(g_lo) <= 1e-12:
        return lo
    if abs(g_hi) <= 1e-12:
        return hi
    if g_lo > 0 or g_hi < 0:
        return None
    return bisect(gap, lo, hi, xtol=tol)


def _eta_for_fraction(f_max: float, p_loss: float) -> float:
    """Smallest eta at or above the forking point whose attack fraction is <= f_max."""
    lo = forking_eta(p_loss)
    if p_loss == 0.0:
        return 1.0 if f_max < 1.0 else lo
    return max(lo, 1.0 - p_loss * min(f_max, 1.0))


def expected_case_threshold(profile: AttackProfile | None = None, p_one: float = 0.5) -> float:
    """Smallest eta with ``(1 - f) + f c_B >= f c_E``.

    ``c_B`` and ``c_E`` are Bob's and Eve's per-attacked-bit probabilities of
    holding Alice's bit; Eve is not credited for bits she did not attack.
    """
    profile = profile or default_profile()
    c_b = profile.bob_correct(p_one)
    c_e = profile.eve_correct(p_one)
    denom = 1.0 - c_b + c_e
    f_max = math.inf if denom <= 0 else 1.0 / denom
    return _eta_for_fraction(f_max, profile.p_loss_attacked)


def worst_case_threshold(profile: AttackProfile | None = None, p_one: float = 0.5) -> float:
    """Smallest eta with ``(1 - f) N >= f N``: every attacked bit may come out right for Eve.

    Bob is only guaranteed the unattacked bits. If Eve can never be right the
    condition is vacuous and the forking point is returned.
    """
    profile = profile or default_profile()
    if profile.eve_correct(p_one) <= 0.0:
        return forking_eta(profile.p_loss_attacked)
    return _eta_for_fraction(0.5, profile.p_loss_attacked)


@dataclass(frozen=True)
class ThresholdReport:
    forking_eta: float
    crossing_eta: float | None
    expected_case_eta: float
    worst_case_eta: float
    perfect_eve_expected_eta: float
    normalization: str
    profile_digest: str

    def to_text(self) -> str:
        crossing = "none" if self.crossing_eta is None else f"{self.crossing_eta:.6g}"
        return (
            f"forking_eta={self.forking_eta:.6g}\n"
            f"crossing_eta={crossing}\n"
            f"crossing_rule={CROSSING_RULE}\n"
            f"crossing_normalization={self.normalization}\n"
            f"expected_case_eta={self.expected_case_eta:.6g}\n"
            f"expected_case_rule={EXPECTED_RULE}\n"
            f"worst_case_eta={self.worst_case_eta:.6g}\n"
            f"worst_case_rule={WORST_CASE_RULE}\n"
            f"perfect_eve_expected_eta={self.perfect_eve_expected_eta:.6g}\n"
            f"perfect_eve_rule={EXPECTED_RULE}+eve-always-correct\n"
            f"profile_digest={self.profile_digest}\n"
        )


def with_perfect_eve(profile: AttackProfile) -> AttackProfile:
    """Same Bob channel and losses, but Eve always reads Alice's bit."""
    return product_profile(profile.bob_channel(), np.eye(2), profile.p_loss_attacked, 0.0)


def threshold_report(profile: AttackProfile | None = None, normalization: str = "per-arrived") -> ThresholdReport:
    profile = profile or default_profile()
    return ThresholdReport(
        forking_eta=forking_eta(profile.p_loss_attacked),
        crossing_eta=crossing_point(profile, normalization),
        expected_case_eta=expected_case_threshold(profile),
        worst_case_eta=worst_case_threshold(profile),
        perfect_eve_expected_eta=expected_case_threshold(with_perfect_eve(profile)),
        normalization=normalization,
        profile_digest=profile.digest(),
    )


__all__ = [
    "SweepRow", "ThresholdReport", "info_curves", "spd_information", "attacked_information",
    "crossing_point", "expected_case_threshold", "worst_case_threshold", "threshold_report",
    "rows_to_csv", "default_grid", "perfect_eve_profile",
]
