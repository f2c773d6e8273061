"""Eve's loss-mimicking attack as a stochastic channel.

An attacked bit is lost with probability ``p_loss_attacked``; if it gets
through, Bob's and Eve's bits are drawn jointly from ``P(b, e | a)`` for the
attack mode in use ('u' plain, 's' symmetrized). Eve always knows which mode
she applied. Unattacked bits pass through Eve's perfect line untouched.

Joint tables are arrays indexed ``[a, b, e]``.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .information import JointDistribution

PROB_TOL = 1e-12
QBER_TOL = 1e-9

# one row of uniforms per round; sample_round and the vectorized simulator share it
U_ALICE, U_ATTACK, U_MODE, U_ARRIVE, U_EXTRA, U_OUTCOME = range(6)
N_UNIFORMS = 6

ABSENT = -1


class ProfileError(ValueError):
    """An attack profile violates one of its constraints."""


class AttackTag(enum.IntEnum):
    NONE = 0
    U = 1
    S = 2

    @property
    def char(self) -> str:
        return "nus"[self]

    @classmethod
    def from_char(cls, c: str) -> "AttackTag":
        try:
            return cls("nus".index(c.lower()))
        except ValueError:
            raise ValueError(f"unknown attack tag {c!r} (expected n, u or s)") from None


def parse_tags(tags) -> np.ndarray:
    """Tag string such as ``'susu'`` (``n`` = not attacked) to an int8 array."""
    if isinstance(tags, str):
        return np.array([AttackTag.from_char(c) for c in tags], dtype=np.int8)
    arr = np.asarray(tags, dtype=np.int8)
    if np.any((arr < 0) | (arr > 2)):
        raise ValueError("tag values must be 0 (none), 1 (u) or 2 (s)")
    return arr


def tags_to_str(tags) -> str:
    return "".join("nus"[t] for t in np.asarray(tags))


@dataclass(frozen=True)
class RoundRecord:
    """One protocol use. ``bob_bit`` is None iff lost, ``eve_bit`` None iff not attacked."""

    alice_bit: int
    tag: AttackTag
    arrived: bool
    bob_bit: int | None
    eve_bit: int | None

    def __post_init__(self):
        if (self.bob_bit is None) == self.arrived:
            raise ValueError("bob_bit must be present exactly when the bit arrived")
        if (self.eve_bit is None) != (self.tag == AttackTag.NONE):
            raise ValueError("eve_bit must be present exactly when the bit was attacked")

    @property
    def eve_view(self) -> tuple[AttackTag, int] | None:
        """What Eve holds for this round: her mode and her bit."""
        if self.tag == AttackTag.NONE:
            return None
        return self.tag, self.eve_bit


def _bob_error(joint: np.ndarray) -> float:
    bob = joint.sum(axis=2)
    return 0.5 * (bob[0, 1] + bob[1, 0])


@dataclass(frozen=True, eq=False)
class AttackProfile:
    p_loss_attacked: float = 0.5
    joint_u: np.ndarray = field(default=None)
    joint_s: np.ndarray = field(default=None)
    p_symmetrize: float = 0.5

    def __post_init__(self):
        for name in ("joint_u", "joint_s"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (2, 2, 2):
                raise ProfileError(f"{name} must have shape (2, 2, 2) indexed [a, b, e]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "p_loss_attacked", float(self.p_loss_attacked))
        object.__setattr__(self, "p_symmetrize", float(self.p_symmetrize))
        self.validate()

    def validate(self):
        """Raise :class:`ProfileError` naming the first violated constraint."""
        for name in ("p_loss_attacked", "p_symmetrize"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ProfileError(f"{name}={v!r} is outside [0, 1]")
        for name, prefix in (("joint_u", "ju"), ("joint_s", "js")):
            arr = getattr(self, name)
            for a, b, e in np.ndindex(2, 2, 2):
                if not arr[a, b, e] >= 0.0:
                    raise ProfileError(f"{prefix}_a{a}_b{b}_e{e}={float(arr[a, b, e])!r} is negative")
            for a in (0, 1):
                total = arr[a].sum()
                if abs(total - 1.0) > PROB_TOL:
                    raise ProfileError(f"{name} row a={a} sums to {float(total)!r}, not 1")
        eu, es = float(_bob_error(self.joint_u)), float(_bob_error(self.joint_s))
        if abs(eu - es) > QBER_TOL:
            raise ProfileError(
                f"Bob's error rate differs between modes (u: {eu!r}, s: {es!r}); "
                "symmetrization must leave the QBER unchanged"
            )

    def joint(self, tag: AttackTag) -> np.ndarray:
        if tag == AttackTag.U:
            return self.joint_u
        if tag == AttackTag.S:
            return self.joint_s
        raise ValueError("unattacked rounds have no attack joint")

    # per-attacked-bit channels, uniform Alice unless a prior is given

    def bob_channel(self) -> np.ndarray:
        """``P(b | a)`` on attacked, arrived bits; Bob cannot tell the modes apart."""
        ps = self.p_symmetrize
        return (1 - ps) * self.joint_u.sum(axis=2) + ps * self.joint_s.sum(axis=2)

    def eve_channel(self) -> np.ndarray:
        """``P(mode, e | a)`` as a 2x4 array, columns u0, u1, s0, s1."""
        ps = self.p_symmetrize
        return np.hstack([(1 - ps) * self.joint_u.sum(axis=1), ps * self.joint_s.sum(axis=1)])

    def bob_correct(self, p_one: float = 0.5) -> float:
        ch = self.bob_channel()
        return (1 - p_one) * ch[0, 0] + p_one * ch[1, 1]

    def eve_correct(self, p_one: float = 0.5) -> float:
        ch = self.eve_channel()
        return (1 - p_one) * (ch[0, 0] + ch[0, 2]) + p_one * (ch[1, 1] + ch[1, 3])

    def bob_error(self) -> float:
        return _bob_error(self.joint_u)

    def to_text(self) -> str:
        lines = [f"p_loss_attacked={self.p_loss_attacked!r}", f"p_symmetrize={self.p_symmetrize!r}"]
        for prefix, arr in (("ju", self.joint_u), ("js", self.joint_s)):
            for a, b, e in np.ndindex(2, 2, 2):
                lines.append(f"{prefix}_a{a}_b{b}_e{e}={float(arr[a, b, e])!r}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


PROFILE_KEYS = ("p_loss_attacked", "p_symmetrize") + tuple(
    f"{p}_a{a}_b{b}_e{e}" for p in ("ju", "js") for a, b, e in np.ndindex(2, 2, 2)
)


def _parse_number(key: str, text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ProfileError(f"{key}: cannot parse {text!r} as a number") from None


def parse_profile(text: str) -> AttackProfile:
    """Parse the flat ``key=value`` profile format.

    Blank lines and ``#`` comments are ignored. Values may be decimals or
    fractions (``3/8``). Every key in :data:`PROFILE_KEYS` is required.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProfileError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PROFILE_KEYS:
            raise ProfileError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ProfileError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_number(key, val)
    missing = [k for k in PROFILE_KEYS if k not in values]
    if missing:
        raise ProfileError(f"missing key {missing[0]!r}")
    ju = np.zeros((2, 2, 2))
    js = np.zeros((2, 2, 2))
    for a, b, e in np.ndindex(2, 2, 2):
        ju[a, b, e] = values[f"ju_a{a}_b{b}_e{e}"]
        js[a, b, e] = values[f"js_a{a}_b{b}_e{e}"]
    return AttackProfile(values["p_loss_attacked"], ju, js, values["p_symmetrize"])


def load_profile(path) -> AttackProfile:
    return parse_profile(Path(path).read_text())


def product_profile(bob, eve, p_loss_attacked=0.5, p_symmetrize=0.5, eve_s=None) -> AttackProfile:
    """Profile with Bob and Eve conditionally independent given Alice's bit.

    ``bob`` and ``eve`` are 2x2 ``P(x | a)`` matrices; ``eve_s`` optionally
    gives Eve a different channel in mode 's'.
    """
    bob = np.asarray(bob, dtype=float)
    eve = np.asarray(eve, dtype=float)
    eve_s = eve if eve_s is None else np.asarray(eve_s, dtype=float)
    ju = bob[:, :, None] * eve[:, None, :]
    js = bob[:, :, None] * eve_s[:, None, :]
    return AttackProfile(p_loss_attacked, ju, js, p_symmetrize)


def bsc(p: float) -> np.ndarray:
    return np.array([[1 - p, p], [p, 1 - p]])


# Eve's conclusive/inconclusive measurement: she learns a half the time and
# writes 0 otherwise, so a=0 is never misread.
Z_CHANNEL = np.array([[1.0, 0.0], [0.5, 0.5]])
IDENTITY = np.eye(2)
BLIND = np.full((2, 2), 0.5)
INVERTED = np.array([[0.0, 1.0], [1.0, 0.0]])


def default_profile() -> AttackProfile:
    """Bob sees BSC(1/4) in both modes; Eve sees the one-sided channel in both modes."""
    return product_profile(bsc(0.25), Z_CHANNEL)


def perfect_eve_profile() -> AttackProfile:
    return product_profile(bsc(0.25), IDENTITY)


def mirrored_eve_profile() -> AttackProfile:
    """Eve's channel equals Bob's, BSC(1/4)."""
    return product_profile(bsc(0.25), bsc(0.25))


def blind_eve_profile() -> AttackProfile:
    """Eve's bit is independent of Alice's."""
    return product_profile(bsc(0.25), BLIND)


def honest_profile() -> AttackProfile:
    """Attack that leaves Bob's bits intact and gives Eve nothing."""
    return product_profile(IDENTITY, BLIND)


def attack_fraction(eta: float, p_loss_attacked: float = 0.5) -> float:
    """Largest share of bits Eve can attack while the observed loss stays ``1 - eta``.

    Solves ``f * (1 - p_loss) + (1 - f) = eta`` and saturates at 1. With a
    loss-free attack there is no budget to respect and every bit is attacked.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta={eta!r} is outside [0, 1]")
    if p_loss_attacked == 0.0:
        return 1.0
    return min(1.0, (1.0 - eta) / p_loss_attacked)


def forking_eta(p_loss_attacked: float = 0.5) -> float:
    """Transmission efficiency below which every bit can be attacked."""
    return max(0.0, 1.0 - p_loss_attacked)


def extra_loss(eta: float, p_loss_attacked: float = 0.5) -> float:
    """Additional drop rate on attacked bits needed below the forking point.

    With every bit attacked the arrival rate is ``1 - p_loss``; to look like
    an even worse channel Eve discards a further share of the survivors.
    """
    if attack_fraction(eta, p_loss_attacked) < 1.0 or p_loss_attacked >= 1.0:
        return 0.0
    return max(0.0, 1.0 - eta / (1.0 - p_loss_attacked))


def arrival_rate(eta: float, p_loss_attacked: float = 0.5) -> float:
    f = attack_fraction(eta, p_loss_attacked)
    q = extra_loss(eta, p_loss_attacked)
    return f * (1 - p_loss_attacked) * (1 - q) + (1 - f)


def resolve_rounds(alice, tags, profile: AttackProfile, uniforms: np.ndarray, extra: float = 0.0):
    """Turn per-round uniforms into (arrived, bob, eve) arrays.

    ``uniforms`` has one row per round; only the arrival, extra-loss and
    outcome columns are read here. Absent symbols are encoded as -1.
    """
    alice = np.asarray(alice, dtype=np.int8)
    tags = np.asarray(tags, dtype=np.int8)
    attacked = tags != AttackTag.NONE
    arrived = ~attacked | (
        (uniforms[:, U_ARRIVE] >= profile.p_loss_attacked) & (uniforms[:, U_EXTRA] >= extra)
    )
    # cumulative over (b, e) cells in order 00, 01, 10, 11, per (mode, a)
    cum = np.stack([profile.joint_u.reshape(2, 4), profile.joint_s.reshape(2, 4)]).cumsum(axis=2)
    mode = np.where(tags == AttackTag.S, 1, 0)
    rows = cum[mode, alice]
    cell = np.minimum((uniforms[:, U_OUTCOME][:, None] >= rows).sum(axis=1), 3)
    b, e = cell // 2, cell % 2
    bob = np.where(arrived, np.where(attacked, b, alice), ABSENT).astype(np.int8)
    eve = np.where(attacked, e, ABSENT).astype(np.int8)
    return arrived, bob, eve


def sample_round(a: int, tag: AttackTag, profile: AttackProfile, rng: np.random.Generator,
                 extra: float = 0.0) -> RoundRecord:
    """Draw one protocol use.

    Unattacked bits always arrive intact. Attacked bits are lost with
    probability ``p_loss_attacked`` (and additionally ``extra``); Eve gets a
    symbol either way, from the same joint, so on lost bits she sees her
    marginal.
    """
    if a not in (0, 1):
        raise ValueError(f"alice bit must be 0 or 1, got {a!r}")
    tag = AttackTag(tag)
    u = rng.random(N_UNIFORMS)[None, :]
    arrived, bob, eve = resolve_rounds([a], [tag], profile, u, extra)
    return RoundRecord(
        alice_bit=int(a),
        tag=tag,
        arrived=bool(arrived[0]),
        bob_bit=int(bob[0]) if arrived[0] else None,
        eve_bit=int(eve[0]) if tag != AttackTag.NONE else None,
    )


BOB_ARRIVED_COLS = (0, 1)
BOB_SENT_COLS = (0, 1, "-")
EVE_COLS = ("u0", "u1", "s0", "s1", "-")


def attacked_share(eta: float, p_loss_attacked: float) -> float:
    """Share of arrived bits that were attacked."""
    f = attack_fraction(eta, p_loss_attacked)
    if f >= 1.0:
        return 1.0
    att = f * (1 - p_loss_attacked)
    return att / (att + 1 - f)


def spd_joint(profile: AttackProfile, eta: float, party: str = "bob",
              normalization: str = "per-arrived", p_one: float = 0.5) -> JointDistribution:
    """Single-use joint ``P(a, x)`` of Alice's bit with Bob's or Eve's symbol.

    ``per-arrived`` conditions on the bit reaching Bob. ``per-sent`` covers
    every sent bit; for Bob lost bits go to a ``'-'`` column (so at eta = 0 all
    mass is there), for Eve her symbol on lost attacked bits is kept. Eve's
    columns carry the mode she used (``u0 .. s1``) and ``'-'`` marks rounds
    she did not attack.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta={eta!r} is outside [0, 1]")
    if normalization not in ("per-arrived", "per-sent"):
        raise ValueError(f"unknown normalization {normalization!r}")
    prior = np.array([1 - p_one, p_one])
    party = party.lower()
    p = profile.p_loss_attacked
    if party == "bob":
        w = attacked_share(eta, p)
        cond = (1 - w) * IDENTITY + w * profile.bob_channel()
        table = prior[:, None] * cond
        if normalization == "per-arrived":
            return JointDistribution(table, (0, 1), BOB_ARRIVED_COLS)
        r = arrival_rate(eta, p)
        table = np.hstack([r * table, (1 - r) * prior[:, None]])
        return JointDistribution(table, (0, 1), BOB_SENT_COLS)
    if party == "eve":
        if normalization == "per-arrived":
            w = attacked_share(eta, p)
        else:
            w = attack_fraction(eta, p)
        cond = np.hstack([w * profile.eve_channel(), (1 - w) * np.ones((2, 1))])
        return JointDistribution(prior[:, None] * cond, (0, 1), EVE_COLS)
    raise ValueError(f"unknown party {party!r} (expected bob or eve)")
