"""Entropy, mutual information and integer-count QBER.

Two kinds of distribution pass through here and are kept apart by how
they are built, not by type: asymptotic single-use joints (constructed from
an attack profile) and empirical joints (relative frequencies of a finite
run). Both are :class:`JointDistribution` and share one plug-in MI formula.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table over (row symbol, column symbol)."""

    table: np.ndarray
    row_labels: tuple = (0, 1)
    col_labels: tuple = (0, 1)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("joint table must be two-dimensional")
        rows, cols = tuple(self.row_labels), tuple(self.col_labels)
        if t.shape != (len(rows), len(cols)):
            raise ValueError(f"table shape {t.shape} does not match labels {len(rows)}x{len(cols)}")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("joint table has negative or non-finite entries")
        if abs(t.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"joint table sums to {t.sum()!r}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @property
    def row_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def prob(self, row, col) -> float:
        return float(self.table[self.row_labels.index(row), self.col_labels.index(col)])

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.table.T, self.col_labels, self.row_labels)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("row,col,prob\n")
        for i, r in enumerate(self.row_labels):
            for j, c in enumerate(self.col_labels):
                out.write(f"{r},{c},{self.table[i, j]:.6g}\n")
        return out.getvalue()

    @classmethod
    def from_mapping(cls, probs: dict, row_labels=(0, 1), col_labels=(0, 1)) -> "JointDistribution":
        t = np.zeros((len(row_labels), len(col_labels)))
        for (r, c), p in probs.items():
            t[row_labels.index(r), col_labels.index(c)] += p
        return cls(t, row_labels, col_labels)


@dataclass(frozen=True)
class ErrorCount:
    """``k`` differing positions out of ``n`` compared. Both integers, always."""

    k: int
    n: int

    def __post_init__(self):
        if not all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in (self.k, self.n)):
            raise TypeError("error counts must be integers")
        if self.n < 1 or not 0 <= self.k <= self.n:
            raise ValueError(f"invalid error count k={self.k}, n={self.n}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "n", int(self.n))

    @property
    def qber(self) -> Fraction:
        return Fraction(self.k, self.n)

    def __str__(self):
        return f"{self.k}/{self.n}"


def as_bits(bits) -> np.ndarray:
    """Coerce ``'1001'``, a list of ints or an array to a validated int8 array."""
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        return arr.astype(np.int8)
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("bit sequence must be one-dimensional and non-empty")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit sequence contains non-binary symbols")
    return arr.astype(np.int8)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits))


def _paired(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x, y = as_bits(xs), as_bits(ys)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def entropy(probs) -> float:
    """Shannon entropy in bits of a probability vector, 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(joint: JointDistribution) -> float:
    """Plug-in mutual information in bits; zero cells contribute nothing."""
    t = joint.table
    rows, cols = np.nonzero(t > 0)
    p = t[rows, cols]
    # difference of logs: px * py can underflow for tiny cells
    log_ratio = np.log2(p) - np.log2(t.sum(axis=1)[rows]) - np.log2(t.sum(axis=0)[cols])
    mi = float(np.sum(p * log_ratio))
    # rounding can leave -1e-17 on independent tables
    return max(mi, 0.0)


def empirical_joint(xs, ys) -> JointDistribution:
    """Relative-frequency table of paired bits (the run's own distribution)."""
    x, y = _paired(xs, ys)
    counts = np.zeros((2, 2))
    np.add.at(counts, (x, y), 1)
    return JointDistribution(counts / x.size)


def empirical_joint_symbols(xs: Sequence[Hashable], ys: Sequence[Hashable]) -> JointDistribution:
    """Like :func:`empirical_joint` over arbitrary symbol alphabets."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if not xs:
        raise ValueError("empty sequences")
    rows = tuple(sorted(set(xs), key=repr))
    cols = tuple(sorted(set(ys), key=repr))
    counts = np.zeros((len(rows), len(cols)))
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: j for j, c in enumerate(cols)}
    for a, b in zip(xs, ys):
        counts[ri[a], ci[b]] += 1
    return JointDistribution(counts / len(xs), rows, cols)


def empirical_mi(xs, ys) -> float:
    return mutual_information(empirical_joint(xs, ys))


def qber(xs, ys) -> ErrorCount:
    x, y = _paired(xs, ys)
    return ErrorCount(int(np.count_nonzero(x != y)), int(x.size))


def expected_errors(rate: float, n: int) -> float:
    """Expected number of wrong bits, ``rate * n``.

    This is an expectation, not a count: for rate 1/4 and n = 201 it is
    50.25, which no run can produce. See :func:`achievable`.
    """
    if not 0 <= rate <= 1:
        raise ValueError(f"rate out of range: {rate!r}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n!r}")
    return float(Fraction(rate) * n)


def achievable(rate: float, n: int) -> bool:
    """True iff ``rate * n`` is an integer, i.e. some run has exactly that many errors."""
    return (Fraction(rate) * n).denominator == 1
