import warnings
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pplab.protocol import (
    PSI_MINUS,
    OutOfSpanWarning,
    StateVector,
    bell_decode,
    encode,
    prepare_bell,
)

finite = st.floats(-1, 1, allow_nan=False)


@st.composite
def normalized_states(draw):
    re = np.array([draw(finite) for _ in range(4)])
    im = np.array([draw(finite) for _ in range(4)])
    amps = re + 1j * im
    norm = np.linalg.norm(amps)
    if norm < 1e-3:
        amps = np.array([1, 0, 0, 0], dtype=complex)
        norm = 1.0
    return StateVector(amps / norm)


class TestPrepareBell:
    def test_amplitudes(self):
        np.testing.assert_allclose(prepare_bell().amplitudes, [0, 1 / sqrt(2), 1 / sqrt(2), 0], atol=1e-15)

    def test_normalized(self):
        assert abs(prepare_bell().norm - 1) < 1e-12

    def test_orthogonal_to_singlet(self):
        assert abs(prepare_bell().overlap(PSI_MINUS)) < 1e-15


class TestEncode:
    def test_zero_is_identity(self):
        assert encode(prepare_bell(), 0).allclose(prepare_bell())

    def test_one_gives_psi_minus(self):
        # equal up to a global phase of -1
        out = encode(prepare_bell(), 1)
        assert abs(abs(out.overlap(StateVector([0, 1 / sqrt(2), -1 / sqrt(2), 0]))) - 1) < 1e-12
        assert abs(out.overlap(prepare_bell())) < 1e-15

    def test_phase_flip_acts_on_travel_qubit(self):
        s = StateVector(np.full(4, 0.5))
        np.testing.assert_allclose(encode(s, 1).amplitudes, [0.5, -0.5, 0.5, -0.5])

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            encode(StateVector([1, 1, 0, 0]), 1)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            encode(prepare_bell(), 2)

    @given(normalized_states())
    def test_preserves_norm(self, s):
        assert abs(encode(s, 1).norm - 1) < 1e-12

    @given(normalized_states())
    def test_involution(self, s):
        assert encode(encode(s, 1), 1).allclose(s)


class TestDecode:
    @pytest.mark.parametrize("bit", [0, 1])
    def test_round_trip(self, bit):
        got, conf = bell_decode(encode(prepare_bell(), bit))
        assert got == bit
        assert abs(conf - 1.0) < 1e-12

    def test_psi_minus(self):
        assert bell_decode(PSI_MINUS) == (1, pytest.approx(1.0, abs=1e-12))

    def test_out_of_span_flagged(self):
        s = StateVector([1 / sqrt(2), 1 / sqrt(2), 0, 0])
        with pytest.warns(OutOfSpanWarning):
            bit, conf = bell_decode(s)
        # weight 1/2 in span, split evenly: tie goes to 0
        assert bit == 0
        assert conf == pytest.approx(0.25)

    def test_in_span_not_flagged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            bell_decode(prepare_bell())

    @settings(max_examples=50)
    @given(normalized_states(), st.sampled_from([0, 1]))
    def test_confidence_bounded(self, s, bit):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutOfSpanWarning)
            _, conf = bell_decode(encode(s, bit))
        assert 0.0 <= conf <= 1.0 + 1e-12
