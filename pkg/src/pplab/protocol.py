"""Honest ping-pong protocol at two-qubit scale.

Basis ordering is |home, travel> over {00, 01, 10, 11}. Bob keeps the home
qubit, Alice phase-encodes on the travel qubit and Bob decodes with a
measurement restricted to the span of psi+ and psi-.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import sqrt

import numpy as np

NORM_TOL = 1e-12
SPAN_TOL = 1e-9

_PHASE_FLIP_TRAVEL = np.array([1, -1, 1, -1], dtype=complex)


class OutOfSpanWarning(UserWarning):
    """The decoded state carries weight outside span{psi+, psi-}."""


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (4,):
            raise ValueError(f"expected 4 amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm**2 - 1.0) <= tol

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <other|self>."""
        return complex(np.vdot(other.amplitudes, self.amplitudes))

    def allclose(self, other: "StateVector", atol: float = NORM_TOL) -> bool:
        return bool(np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol))

    def __repr__(self):
        return f"StateVector({np.array2string(self.amplitudes, precision=6)})"


PSI_PLUS = StateVector([0, 1 / sqrt(2), 1 / sqrt(2), 0])
PSI_MINUS = StateVector([0, 1 / sqrt(2), -1 / sqrt(2), 0])


def _check_bit(bit) -> int:
    if bit not in (0, 1):
        raise ValueError(f"message bit must be 0 or 1, got {bit!r}")
    return int(bit)


def _require_normalized(state: StateVector):
    if not state.is_normalized():
        raise ValueError(f"state is not normalized (norm={state.norm!r})")


def prepare_bell() -> StateVector:
    """Return the triplet Bell state (|01> + |10>)/sqrt(2)."""
    return PSI_PLUS


def encode(state: StateVector, bit: int) -> StateVector:
    """Alice's encoding: identity for 0, Z on the travel qubit for 1."""
    _require_normalized(state)
    if _check_bit(bit) == 0:
        return state
    return StateVector(state.amplitudes * _PHASE_FLIP_TRAVEL)


def bell_decode(state: StateVector) -> tuple[int, float]:
    """Decode a bit from the psi+/psi- measurement.

    Returns ``(bit, confidence)`` where confidence is the larger squared
    overlap. Ties go to 0. If less than ``1 - 1e-9`` of the state's weight
    lies in span{psi+, psi-} an :class:`OutOfSpanWarning` is emitted; the
    confidence then reflects only the in-span weight.
    """
    _require_normalized(state)
    p_plus = abs(state.overlap(PSI_PLUS)) ** 2
    p_minus = abs(state.overlap(PSI_MINUS)) ** 2
    if p_plus + p_minus < 1.0 - SPAN_TOL:
        warnings.warn(
            f"in-span weight {p_plus + p_minus:.12g} < 1; decoding is lossy",
            OutOfSpanWarning,
            stacklevel=2,
        )
    if p_plus >= p_minus:
        return 0, p_plus
    return 1, p_minus


def round_trip(bit: int) -> tuple[int, float]:
    return bell_decode(encode(prepare_bell(), bit))
