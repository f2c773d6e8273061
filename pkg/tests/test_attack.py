from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pplab.attack import (
    AttackProfile,
    AttackTag,
    ProfileError,
    RoundRecord,
    arrival_rate,
    attack_fraction,
    bsc,
    default_profile,
    extra_loss,
    parse_profile,
    product_profile,
    sample_round,
    spd_joint,
)
from pplab.montecarlo import RunConfig, simulate_rounds


def default_joint_oracle(a, b, e):
    """Bob through BSC(1/4), Eve learns a w.p. 1/2 and writes 0 otherwise; exact rationals."""
    p_b = Fraction(3, 4) if b == a else Fraction(1, 4)
    if a == 0:
        p_e = Fraction(1) if e == 0 else Fraction(0)
    else:
        p_e = Fraction(1, 2)
    return p_b * p_e


class TestAttackFraction:
    def test_saturation_and_lossless(self):
        assert attack_fraction(0.5) == 1.0
        assert attack_fraction(1.0) == 0.0

    def test_three_quarters(self):
        # f/2 + (1 - f) = 3/4  =>  f = 1/2
        f = Fraction(1, 2)
        assert f * Fraction(1, 2) + (1 - f) == Fraction(3, 4)
        assert attack_fraction(0.75) == 0.5

    def test_general_loss(self):
        assert attack_fraction(0.8, p_loss_attacked=1.0) == pytest.approx(0.2)

    @pytest.mark.parametrize("eta", [-0.01, 1.01])
    def test_out_of_range(self, eta):
        with pytest.raises(ValueError):
            attack_fraction(eta)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_non_increasing(self, x, y):
        lo, hi = min(x, y), max(x, y)
        assert attack_fraction(lo) >= attack_fraction(hi)

    @given(st.floats(0, 0.5))
    def test_saturated_below_half(self, eta):
        assert attack_fraction(eta) == 1.0

    @given(st.floats(0, 1), st.floats(0.01, 1))
    def test_arrival_matches_eta(self, eta, p):
        assert arrival_rate(eta, p) == pytest.approx(eta, abs=1e-12)


class TestDefaultProfile:
    def test_joint_u_matches_oracle(self, profile):
        for a, b, e in product((0, 1), repeat=3):
            assert profile.joint_u[a, b, e] == pytest.approx(float(default_joint_oracle(a, b, e)), abs=1e-15)

    def test_a1_cells(self, profile):
        ju = profile.joint_u[1]
        assert (ju[1, 1], ju[1, 0], ju[0, 1], ju[0, 0]) == (3 / 8, 3 / 8, 1 / 8, 1 / 8)

    def test_bob_error_quarter(self, profile):
        assert profile.bob_error() == 0.25
        assert _bob_error_oracle(profile.joint_s) == 0.25

    def test_eve_correct_three_quarters(self, profile):
        oracle = sum(Fraction(1, 2) * default_joint_oracle(a, b, a) for a in (0, 1) for b in (0, 1))
        assert oracle == Fraction(3, 4)
        assert profile.eve_correct() == 0.75

    def test_modes_identical_for_eve(self, profile):
        np.testing.assert_array_equal(profile.joint_u.sum(axis=1), profile.joint_s.sum(axis=1))

    def test_parameters(self, profile):
        assert profile.p_loss_attacked == 0.5
        assert profile.p_symmetrize == 0.5


def _bob_error_oracle(joint):
    return sum(0.5 * joint[a, b, e] for a, b, e in product((0, 1), repeat=3) if a != b)


class TestValidation:
    def test_rejects_qber_change(self):
        with pytest.raises(ProfileError, match="QBER"):
            AttackProfile(0.5, product_profile(bsc(0.25), np.eye(2)).joint_u,
                          product_profile(bsc(0.1), np.eye(2)).joint_u, 0.5)

    def test_rejects_bad_row(self):
        ju = default_profile().joint_u.copy()
        ju[0, 0, 0] += 0.1
        with pytest.raises(ProfileError, match="row a=0"):
            AttackProfile(0.5, ju, ju, 0.5)

    def test_rejects_probability_range(self):
        p = default_profile()
        with pytest.raises(ProfileError, match="p_loss_attacked"):
            AttackProfile(1.5, p.joint_u, p.joint_s)

    def test_symmetrization_may_change_eve_only_if_bob_error_kept(self):
        # mode 's' scrambles which error pattern Bob sees but keeps its rate
        bob_s = np.array([[0.75, 0.25], [0.25, 0.75]])
        prof = product_profile(bsc(0.25), np.eye(2), eve_s=np.eye(2))
        AttackProfile(0.5, prof.joint_u, product_profile(bob_s, np.eye(2)).joint_u)


PROFILE_TEXT = default_profile().to_text()


class TestProfileFile:
    def test_round_trip(self):
        p = parse_profile(PROFILE_TEXT)
        np.testing.assert_array_equal(p.joint_u, default_profile().joint_u)
        assert p.digest() == default_profile().digest()

    def test_fractions_and_comments(self):
        text = "# default\n" + PROFILE_TEXT.replace("ju_a1_b1_e1=0.375", "ju_a1_b1_e1 = 3/8  # cell")
        assert parse_profile(text).joint_u[1, 1, 1] == 0.375

    def test_missing_key(self):
        text = "\n".join(line for line in PROFILE_TEXT.splitlines() if not line.startswith("js_a1_b1_e1"))
        with pytest.raises(ProfileError, match="js_a1_b1_e1"):
            parse_profile(text)

    def test_unknown_key(self):
        with pytest.raises(ProfileError, match="unknown key"):
            parse_profile(PROFILE_TEXT + "jx_a0_b0_e0=0\n")

    def test_first_violation_reported(self):
        text = PROFILE_TEXT.replace("ju_a0_b0_e0=0.75", "ju_a0_b0_e0=-0.25")
        with pytest.raises(ProfileError, match="ju_a0_b0_e0=-0.25 is negative"):
            parse_profile(text)

    def test_bad_number(self):
        with pytest.raises(ProfileError, match="cannot parse"):
            parse_profile(PROFILE_TEXT.replace("p_symmetrize=0.5", "p_symmetrize=half"))


class TestSampleRound:
    def test_honest_passthrough(self, profile):
        rec = sample_round(1, AttackTag.NONE, profile, np.random.default_rng(0))
        assert rec == RoundRecord(1, AttackTag.NONE, True, 1, None)

    def test_attacked_record_shape(self, profile):
        rng = np.random.default_rng(1)
        for _ in range(200):
            rec = sample_round(1, AttackTag.S, profile, rng)
            assert rec.eve_bit is not None
            assert rec.eve_view[0] == AttackTag.S
            assert (rec.bob_bit is None) == (not rec.arrived)

    def test_arrival_and_error_rates(self, profile):
        # vectorized path shares resolve_rounds with sample_round
        n = 10**6
        rounds = simulate_rounds(RunConfig(n, 0.5, 3, profile, alice_bits="1" * n, tag_string="u" * n))
        assert rounds.arrived.mean() == pytest.approx(0.5, abs=0.002)
        arrived_bob = rounds.bob[rounds.arrived]
        assert np.mean(arrived_bob == 0) == pytest.approx(0.25, abs=0.002)

    def test_scalar_sampler_rates(self, profile):
        rng = np.random.default_rng(11)
        recs = [sample_round(1, AttackTag.U, profile, rng) for _ in range(20_000)]
        arrived = [r for r in recs if r.arrived]
        assert len(arrived) / len(recs) == pytest.approx(0.5, abs=0.02)
        assert np.mean([r.bob_bit == 0 for r in arrived]) == pytest.approx(0.25, abs=0.02)

    def test_lost_bits_give_eve_her_marginal(self, profile):
        n = 400_000
        r = simulate_rounds(RunConfig(n, 0.5, 9, profile, alice_bits="1" * n, tag_string="u" * n))
        lost = ~r.arrived
        assert np.mean(r.eve[lost] == 1) == pytest.approx(0.5, abs=0.005)

    @pytest.mark.parametrize("eta", [0.55, 0.7, 0.9, 1.0])
    def test_undetectable_arrival_rate(self, profile, eta):
        r = simulate_rounds(RunConfig(200_000, eta, 4, profile))
        assert r.arrived.mean() == pytest.approx(eta, abs=0.005)

    @pytest.mark.parametrize("eta", [0.0, 0.2, 0.4])
    def test_extra_loss_below_forking(self, profile, eta):
        assert extra_loss(eta) == pytest.approx(1 - 2 * eta)
        r = simulate_rounds(RunConfig(200_000, eta, 4, profile))
        assert r.arrived.mean() == pytest.approx(eta, abs=0.005)

    def test_rejects_bad_bit(self, profile):
        with pytest.raises(ValueError):
            sample_round(2, AttackTag.U, profile, np.random.default_rng(0))


class TestSpdJoint:
    def test_honest_limit(self, profile):
        j = spd_joint(profile, 1.0, "bob", "per-arrived")
        np.testing.assert_allclose(j.table, [[0.5, 0], [0, 0.5]], atol=1e-15)

    def test_fully_attacked(self, profile):
        j = spd_joint(profile, 0.5, "bob", "per-arrived")
        np.testing.assert_allclose(j.table, [[3 / 8, 1 / 8], [1 / 8, 3 / 8]], atol=1e-15)

    def test_nothing_arrives(self, profile):
        j = spd_joint(profile, 0.0, "bob", "per-sent")
        assert j.prob(0, "-") == j.prob(1, "-") == 0.5
        assert j.table[:, :2].sum() == 0.0

    def test_mixture_oracle(self, profile):
        # eta = 0.75: f = 1/2, arrived = 1/4 attacked + 1/2 honest
        w = Fraction(1, 4) / Fraction(3, 4)
        want = [[float(Fraction(1, 2) * ((1 - w) + w * Fraction(3, 4))), float(Fraction(1, 2) * w / 4)]] * 2
        want[1] = want[1][::-1]
        np.testing.assert_allclose(spd_joint(profile, 0.75, "bob").table, want, atol=1e-15)

    def test_eve_columns_carry_mode(self, profile):
        j = spd_joint(profile, 0.5, "eve", "per-sent")
        assert j.col_labels == ("u0", "u1", "s0", "s1", "-")
        assert j.prob(0, "u1") == 0.0
        assert j.prob(1, "s1") == pytest.approx(0.5 * 0.5 * 0.5)

    @given(st.floats(0, 1), st.sampled_from(["bob", "eve"]), st.sampled_from(["per-arrived", "per-sent"]))
    def test_normalized(self, eta, party, norm):
        j = spd_joint(default_profile(), eta, party, norm)
        assert abs(j.table.sum() - 1) < 1e-12
        np.testing.assert_allclose(j.row_marginal, [0.5, 0.5], atol=1e-12)

    def test_non_uniform_prior(self, profile):
        j = spd_joint(profile, 1.0, "bob", p_one=0.2)
        np.testing.assert_allclose(j.row_marginal, [0.8, 0.2])
