"""Finite-N protocol runs and the exact enumeration oracle.

Random numbers come in blocks of :data:`BLOCK` rounds. Block ``k`` of a run
with seed ``s`` is drawn from ``SeedSequence(s, spawn_key=(k,))``, so round
``i`` always sees the same uniforms no matter how blocks are spread across
worker threads.
"""
from __future__ import annotations

import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .attack import (
    ABSENT,
    N_UNIFORMS,
    U_ALICE,
    U_ARRIVE,
    U_ATTACK,
    U_EXTRA,
    U_MODE,
    AttackProfile,
    AttackTag,
    RoundRecord,
    attack_fraction,
    default_profile,
    extra_loss,
    parse_tags,
    resolve_rounds,
    spd_joint,
    tags_to_str,
)
from .information import (
    ErrorCount,
    as_bits,
    bits_to_str,
    empirical_joint_symbols,
    empirical_mi,
    mutual_information,
)

BLOCK = 4096
MAX_ENUM_BITS = 16
MAX_ATLAS_ENTRIES = 2_000_000


def worker_count(requested: int | None = None) -> int:
    """Worker threads to use; ``PPLAB_THREADS`` caps whatever is requested."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("PPLAB_THREADS")
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a sub-stream identified by ``keys``."""
    words = np.random.SeedSequence(seed, spawn_key=keys).generate_state(2, np.uint32)
    return (int(words[0]) << 31) ^ int(words[1])


def block_uniforms(seed: int, block: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    return rng.random((BLOCK, N_UNIFORMS))


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass
class RunConfig:
    n_bits: int
    eta: float
    seed: int = 0
    profile: AttackProfile = field(default_factory=default_profile)
    alice_bits: str | None = None
    tag_string: str | None = None

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError(f"n_bits must be positive, got {self.n_bits}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta={self.eta!r} is outside [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.alice_bits is not None and len(as_bits(self.alice_bits)) != self.n_bits:
            raise ValueError("alice_bits length differs from n_bits")
        if self.tag_string is not None and len(parse_tags(self.tag_string)) != self.n_bits:
            raise ValueError("tag_string length differs from n_bits")


@dataclass(eq=False)
class Rounds:
    """Column store of round records; absent symbols are -1."""

    alice: np.ndarray
    tags: np.ndarray
    arrived: np.ndarray
    bob: np.ndarray
    eve: np.ndarray

    def __len__(self):
        return len(self.alice)

    def __getitem__(self, i: int) -> RoundRecord:
        return RoundRecord(
            alice_bit=int(self.alice[i]),
            tag=AttackTag(int(self.tags[i])),
            arrived=bool(self.arrived[i]),
            bob_bit=None if self.bob[i] == ABSENT else int(self.bob[i]),
            eve_bit=None if self.eve[i] == ABSENT else int(self.eve[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, Rounds):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("alice", "tags", "arrived", "bob", "eve")
        )

    @property
    def attacked(self) -> np.ndarray:
        return self.tags != AttackTag.NONE

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("round,alice,tag,arrived,bob,eve\n")
        sym = {-1: "", 0: "0", 1: "1"}
        for i in range(len(self)):
            out.write(
                f"{i},{self.alice[i]},{'nus'[self.tags[i]]},{int(self.arrived[i])},"
                f"{sym[int(self.bob[i])]},{sym[int(self.eve[i])]}\n"
            )
        return out.getvalue()

    @classmethod
    def concat(cls, parts: list["Rounds"]) -> "Rounds":
        return cls(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("alice", "tags", "arrived", "bob", "eve")))


@dataclass(frozen=True)
class RunStats:
    n_bits: int
    arrived: int
    attacked: int
    bob_errors: ErrorCount | None
    eve_errors: ErrorCount | None
    i_ab_emp: float
    i_ae_emp: float
    bob_exact_match: bool
    eve_exact_match: bool

    def to_text(self) -> str:
        def err(ec):
            return ("none", "none") if ec is None else (str(ec.k), f"{ec.k}/{ec.n}")

        bk, bq = err(self.bob_errors)
        ek, eq = err(self.eve_errors)
        return (
            f"n_bits={self.n_bits}\narrived={self.arrived}\nattacked={self.attacked}\n"
            f"bob_errors_k={bk}\nbob_qber={bq}\neve_errors_k={ek}\neve_qber={eq}\n"
            f"i_ab_emp={self.i_ab_emp:.6g}\ni_ae_emp={self.i_ae_emp:.6g}\n"
            f"bob_exact_match={str(self.bob_exact_match).lower()}\n"
            f"eve_exact_match={str(self.eve_exact_match).lower()}\n"
        )


def run_stats(rounds: Rounds) -> RunStats:
    n = len(rounds)
    arr = rounds.arrived
    att = rounds.attacked
    n_arr, n_att = int(arr.sum()), int(att.sum())
    bob_errors = eve_errors = None
    i_ab = i_ae = 0.0
    if n_arr:
        a, b = rounds.alice[arr], rounds.bob[arr]
        bob_errors = ErrorCount(int(np.count_nonzero(a != b)), n_arr)
        i_ab = empirical_mi(a, b)
    if n_att:
        a, e = rounds.alice[att], rounds.eve[att]
        eve_errors = ErrorCount(int(np.count_nonzero(a != e)), n_att)
        i_ae = empirical_mi(a, e)
    return RunStats(
        n_bits=n,
        arrived=n_arr,
        attacked=n_att,
        bob_errors=bob_errors,
        eve_errors=eve_errors,
        i_ab_emp=i_ab,
        i_ae_emp=i_ae,
        bob_exact_match=n_arr == n and bob_errors.k == 0,
        eve_exact_match=n_att > 0 and eve_errors.k == 0,
    )


def _simulate_block(config: RunConfig, alice, tags, block: int) -> Rounds:
    start = block * BLOCK
    stop = min(start + BLOCK, config.n_bits)
    u = block_uniforms(config.seed, block)[: stop - start]
    profile = config.profile
    if alice is None:
        a = (u[:, U_ALICE] < 0.5).astype(np.int8)
    else:
        a = alice[start:stop]
    if tags is None:
        f = attack_fraction(config.eta, profile.p_loss_attacked)
        hit = u[:, U_ATTACK] < f
        sym = u[:, U_MODE] < profile.p_symmetrize
        t = np.where(hit, np.where(sym, AttackTag.S, AttackTag.U), AttackTag.NONE).astype(np.int8)
    else:
        t = tags[start:stop]
    extra = extra_loss(config.eta, profile.p_loss_attacked)
    arrived, bob, eve = resolve_rounds(a, t, profile, u, extra)
    return Rounds(a, t, arrived, bob, eve)


def simulate_rounds(config: RunConfig, workers: int | None = None) -> Rounds:
    alice = None if config.alice_bits is None else as_bits(config.alice_bits)
    tags = None if config.tag_string is None else parse_tags(config.tag_string)
    blocks = list(range(math.ceil(config.n_bits / BLOCK)))
    parts = _map(lambda k: _simulate_block(config, alice, tags, k), blocks, worker_count(workers))
    return Rounds.concat(parts)


def simulate_run(config: RunConfig, workers: int | None = None) -> tuple[Rounds, RunStats]:
    """Simulate ``config.n_bits`` protocol uses; deterministic for a fixed seed."""
    rounds = simulate_rounds(config, workers)
    return rounds, run_stats(rounds)


def find_seed(config: RunConfig, predicate, max_seeds: int = 10**6, start: int = 0) -> int | None:
    """First seed in ``[start, start + max_seeds)`` whose run satisfies ``predicate(rounds, stats)``."""
    for seed in range(start, start + max_seeds):
        cfg = RunConfig(config.n_bits, config.eta, seed, config.profile, config.alice_bits, config.tag_string)
        rounds, stats = simulate_run(cfg, workers=1)
        if predicate(rounds, stats):
            return seed
    return None


@dataclass(frozen=True)
class AtlasEntry:
    bob: str
    eve: str
    tags: str
    probability: float


@dataclass
class OutcomeAtlas:
    """Every (bob, eve, tags) outcome with its exact probability.

    Strings use ``'-'`` for absent symbols: a lost bit in ``bob``, an
    unattacked position in ``eve``. Tags use ``n``/``u``/``s``.
    """

    alice: str
    condition: str
    entries: list[AtlasEntry]

    @property
    def total_probability(self) -> float:
        return math.fsum(e.probability for e in self.entries)

    def prob(self, predicate) -> float:
        return math.fsum(e.probability for e in self.entries if predicate(e))

    def bob_prob(self, bits: str) -> float:
        return self.prob(lambda e: e.bob == bits)

    def as_dict(self) -> dict[tuple[str, str, str], float]:
        return {(e.bob, e.eve, e.tags): e.probability for e in self.entries}

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("bob,eve,tags,probability\n")
        for e in self.entries:
            out.write(f"{e.bob},{e.eve},{e.tags},{e.probability:.6g}\n")
        return out.getvalue()


def _bit_branches(a: int, tag_probs, profile: AttackProfile, condition: str, extra: float):
    """Per-bit outcome branches ``(tag, bob, eve, prob)`` with zero cells pruned."""
    p_arrive = (1 - profile.p_loss_attacked) * (1 - extra)
    branches = []
    for tag, w in tag_probs:
        if w <= 0:
            continue
        if tag == AttackTag.NONE:
            branches.append(("n", str(a), "-", w))
            continue
        joint = profile.joint(tag)[a]
        for b, e in itertools.product((0, 1), repeat=2):
            p = w * p_arrive * joint[b, e]
            if p > 0:
                branches.append((tag.char, str(b), str(e), p))
        if condition == "unconditional":
            for e in (0, 1):
                p = w * (1 - p_arrive) * joint[:, e].sum()
                if p > 0:
                    branches.append((tag.char, "-", str(e), p))
    if condition == "all-arrived":
        total = math.fsum(br[3] for br in branches)
        if total <= 0:
            raise ValueError("arrival is impossible under this profile; cannot condition on it")
        branches = [(t, b, e, p / total) for t, b, e, p in branches]
    return branches


def enumerate_outcomes(alice_bits, tag_string=None, profile: AttackProfile | None = None,
                       condition: str = "all-arrived", attack_fraction: float = 1.0,
                       extra: float = 0.0) -> OutcomeAtlas:
    """Exact outcome distribution by brute force over every per-bit branch.

    Without ``tag_string`` each bit is attacked with probability
    ``attack_fraction`` (1 by default, i.e. all 2^N u/s strings) in mode 's'
    with probability ``p_symmetrize``.
    """
    profile = profile or default_profile()
    if condition not in ("all-arrived", "unconditional"):
        raise ValueError(f"unknown condition {condition!r}")
    alice = as_bits(alice_bits)
    n = alice.size
    if n > MAX_ENUM_BITS:
        raise ValueError(f"enumeration is limited to {MAX_ENUM_BITS} bits, got {n}")
    if tag_string is not None:
        tags = parse_tags(tag_string)
        if tags.size != n:
            raise ValueError("tag_string length differs from alice_bits")
        per_bit_tags = [[(AttackTag(t), 1.0)] for t in tags]
    else:
        ps, f = profile.p_symmetrize, attack_fraction
        dist = [(AttackTag.NONE, 1 - f), (AttackTag.U, f * (1 - ps)), (AttackTag.S, f * ps)]
        per_bit_tags = [dist] * n
    branches = [_bit_branches(int(a), tp, profile, condition, extra) for a, tp in zip(alice, per_bit_tags)]
    size = math.prod(len(b) for b in branches)
    if size > MAX_ATLAS_ENTRIES:
        raise ValueError(f"outcome space has {size} entries; limit is {MAX_ATLAS_ENTRIES}")
    entries = []
    for combo in itertools.product(*branches):
        tags_s = "".join(c[0] for c in combo)
        bob_s = "".join(c[1] for c in combo)
        eve_s = "".join(c[2] for c in combo)
        entries.append(AtlasEntry(bob_s, eve_s, tags_s, math.prod(c[3] for c in combo)))
    return OutcomeAtlas(bits_to_str(alice), condition, entries)


def rounds_to_outcome_keys(rounds: Rounds, n: int) -> list[tuple[str, str, str]]:
    """Split a long run into consecutive n-round outcomes keyed like atlas entries."""
    sym = np.array(["-", "0", "1"])
    bob = sym[rounds.bob.astype(int) + 1].reshape(-1, n)
    eve = sym[rounds.eve.astype(int) + 1].reshape(-1, n)
    tags = np.array(list("nus"))[rounds.tags.astype(int)].reshape(-1, n)
    join = lambda m: ["".join(r) for r in m]  # noqa: E731
    return list(zip(join(bob), join(eve), join(tags)))


@dataclass(frozen=True)
class MatchProbability:
    value: float
    ci_low: float
    ci_high: float
    exact: bool

    def __float__(self):
        return self.value


def _eve_matches(alice: str, eve: str, tags: str) -> bool:
    pos = [i for i, t in enumerate(tags) if t != "n"]
    return bool(pos) and all(eve[i] == alice[i] for i in pos)


def prob_exact_match(alice_bits, party: str = "bob", profile: AttackProfile | None = None,
                     eta: float | None = None, tag_string: str | None = None,
                     condition: str = "all-arrived", samples: int = 200_000,
                     seed: int = 0) -> MatchProbability:
    """Probability that Bob's (or Eve's) bits equal Alice's.

    Bob matches when every bit arrived and agrees. Eve is compared on the
    positions she attacked only and cannot match if she attacked none.
    Without explicit tags, bits are attacked at ``attack_fraction(eta)``
    (every bit when ``eta`` is None). Exact for N <= 16, otherwise a Monte
    Carlo estimate with a 95% Clopper-Pearson interval.
    """
    profile = profile or default_profile()
    party = party.lower()
    if party not in ("bob", "eve"):
        raise ValueError(f"unknown party {party!r}")
    alice = bits_to_str(as_bits(alice_bits))
    f = 1.0 if eta is None else attack_fraction(eta, profile.p_loss_attacked)
    extra = 0.0 if eta is None else extra_loss(eta, profile.p_loss_attacked)
    if len(alice) <= MAX_ENUM_BITS:
        p = min(_exact_match_probability(alice, party, profile, tag_string, condition, f, extra), 1.0)
        return MatchProbability(p, p, p, True)
    hits = _mc_matches(alice, party, profile, f, extra, tag_string, condition, samples, seed)
    ci = binomtest(hits, samples).proportion_ci(0.95)
    return MatchProbability(hits / samples, ci.low, ci.high, False)


def _exact_match_probability(alice: str, party, profile, tag_string, condition, f, extra) -> float:
    """Sum of the atlas entries that match, without materializing the atlas.

    Both match events are products over bits of per-bit branch events, so the
    atlas sum factorizes. For Eve, "every attacked bit right" minus "nothing
    attacked" (she cannot match on an empty comparison).
    """
    if tag_string is not None:
        tags = parse_tags(tag_string)
        if tags.size != len(alice):
            raise ValueError("tag_string length differs from alice_bits")
        per_bit_tags = [[(AttackTag(t), 1.0)] for t in tags]
    else:
        ps = profile.p_symmetrize
        per_bit_tags = [[(AttackTag.NONE, 1 - f), (AttackTag.U, f * (1 - ps)), (AttackTag.S, f * ps)]] * len(alice)
    match = none = 1.0
    for a, tp in zip(alice, per_bit_tags):
        branches = _bit_branches(int(a), tp, profile, condition, extra)
        if party == "bob":
            match *= math.fsum(p for _, b, _, p in branches if b == a)
        else:
            match *= math.fsum(p for t, _, e, p in branches if t == "n" or e == a)
            none *= math.fsum(p for t, _, _, p in branches if t == "n")
    return match if party == "bob" else max(match - none, 0.0)


def _mc_matches(alice: str, party, profile, f, extra, tag_string, condition, samples, seed) -> int:
    a = as_bits(alice)
    n = a.size
    rng = np.random.default_rng(seed)
    ps = profile.p_symmetrize
    p_arrive = (1 - profile.p_loss_attacked) * (1 - extra)
    hits = 0
    chunk = max(1, 1_000_000 // n)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        u = rng.random((m * n, N_UNIFORMS))
        if tag_string is not None:
            t = np.tile(parse_tags(tag_string), m)
        else:
            w = np.array([1 - f, f * (1 - ps), f * ps])
            if condition == "all-arrived":
                w = w * np.array([1.0, p_arrive, p_arrive])
                w = w / w.sum()
            cum = np.cumsum(w)
            t = np.minimum((u[:, U_ATTACK][:, None] >= cum[None, :2]).sum(axis=1), 2).astype(np.int8)
        if condition == "all-arrived":
            # attacked bits condition on arrival: force the loss draws to pass
            u[:, U_ARRIVE] = 1.0
            u[:, U_EXTRA] = 1.0
        arrived, bob, eve = resolve_rounds(np.tile(a, m), t, profile, u, extra)
        aa = np.tile(a, m).reshape(m, n)
        if party == "bob":
            ok = np.all(bob.reshape(m, n) == aa, axis=1)
        else:
            att = t.reshape(m, n) != AttackTag.NONE
            good = (eve.reshape(m, n) == aa) | ~att
            ok = np.all(good, axis=1) & att.any(axis=1)
        hits += int(ok.sum())
        done += m
    return hits


def class_resolved_mi(rounds: Rounds, party: str = "bob") -> float:
    """Empirical per-sent-bit information split by attack class.

    Bob: ``sum_c (n_c / N) * I_emp(A; B | class c, arrived)``. Eve:
    ``(n_att / N) * I_emp(A; (mode, E) | attacked)``. The finite-N counterpart
    of the swept curves.
    """
    n = len(rounds)
    att = rounds.attacked
    if party == "eve":
        if not att.any():
            return 0.0
        sym = rounds.tags[att].astype(np.int64) * 2 + rounds.eve[att]
        j = empirical_joint_symbols(rounds.alice[att].tolist(), sym.tolist())
        return att.sum() / n * mutual_information(j)
    total = 0.0
    for cls_mask in (~att, att):
        sel = cls_mask & rounds.arrived
        if sel.any():
            total += cls_mask.sum() / n * empirical_mi(rounds.alice[sel], rounds.bob[sel])
    return total


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mean_abs_dev: float
    trials: int


def convergence_experiment(Ns, eta: float, profile: AttackProfile | None = None, trials: int = 100,
                           seed: int = 0, workers: int | None = None) -> list[ConvergenceRow]:
    """Mean ``|i_ab_emp - I_spd|`` per run length.

    ``I_spd`` is the information of the single-use arrived-bit joint, which
    is what a run's empirical joint converges to. Trial ``t`` uses a stream
    derived from ``(seed, t, N)``; results do not depend on ``workers``.
    """
    if trials < 30:
        raise ValueError("convergence_experiment needs at least 30 trials")
    profile = profile or default_profile()
    target = mutual_information(spd_joint(profile, eta, "bob", "per-arrived"))
    rows = []
    w = worker_count(workers)
    for n in Ns:
        def one(t, n=n):
            cfg = RunConfig(n, eta, derive_seed(seed, t, n), profile)
            return abs(run_stats(simulate_rounds(cfg, workers=1)).i_ab_emp - target)

        devs = _map(one, list(range(trials)), w)
        rows.append(ConvergenceRow(int(n), math.fsum(devs) / trials, trials))
    return rows


__all__ = [
    "RunConfig", "Rounds", "RunStats", "OutcomeAtlas", "AtlasEntry", "MatchProbability",
    "simulate_run", "simulate_rounds", "run_stats", "find_seed", "enumerate_outcomes",
    "prob_exact_match", "convergence_experiment", "class_resolved_mi", "tags_to_str",
    "rounds_to_outcome_keys", "derive_seed", "block_uniforms", "BLOCK",
]
