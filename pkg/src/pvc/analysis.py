"""Statistical and cryptanalytic instrumentation for the cipher.

Entropy, avalanche, FIPS-style bit tests, operation counting, a
known-plaintext probe and tamper-detection coverage.  Every routine takes an
explicit ``random.Random`` so runs are reproducible.
"""
from __future__ import annotations

import math
import random
import threading
from collections import Counter
from dataclasses import dataclass, field

from scipy.special import erfc
from scipy.stats import chi2

from . import cipher
from .codec import plan_indices
from .errors import (
    EmptyInput, InsufficientBits, IntegrityError, NonCanonicalElement,
    OverlapMismatch, ParseError, SingularSystem,
)
from .field import FieldCtx
from .kdfstream import column_offset, derive_keys
from .keyexchange import SharedVector, generate_ephemeral, derive_shared
from .matrixcore import build_key_matrices, det, mat_inv, mat_mul

DEFAULT_P = 12347
DEFAULT_G = (2, 5, 6)


# reports ---------------------------------------------------------------

@dataclass
class Metric:
    name: str
    value: object
    threshold: str = ""
    passed: bool | None = None


@dataclass
class Report:
    title: str
    metrics: list = field(default_factory=list)

    def add(self, name, value, threshold="", passed=None):
        self.metrics.append(Metric(name, value, threshold, passed))
        return self

    @property
    def ok(self) -> bool:
        return all(m.passed is not False for m in self.metrics)

    def kv_lines(self) -> list[str]:
        lines = []
        for m in self.metrics:
            status = {True: "PASS", False: "FAIL", None: "INFO"}[m.passed]
            value = f"{m.value:.6g}" if isinstance(m.value, float) else str(m.value)
            lines.append(f"{m.name}\t{value}\t{m.threshold or '-'}\t{status}")
        return lines

    def render(self) -> str:
        return "\n".join([f"# {self.title}"] + self.kv_lines())


# operation counting ----------------------------------------------------

class OpCounters:
    """Thread-safe tallies of field multiplications, additions and HMAC calls."""

    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        self.field_mults = 0
        self.field_adds = 0
        self.hmac_calls = 0

    def add(self, field_mults=0, field_adds=0, hmac_calls=0):
        with self._lock:
            self.field_mults += field_mults
            self.field_adds += field_adds
            self.hmac_calls += hmac_calls

    def as_tuple(self):
        return (self.field_mults, self.field_adds, self.hmac_calls)

    def __repr__(self):
        return "OpCounters(field_mults=%d, field_adds=%d, hmac_calls=%d)" % self.as_tuple()


def _fixed_session(ctx, g=DEFAULT_G):
    a = generate_ephemeral(g, ctx, secret=3)
    b = generate_ephemeral(g, ctx, secret=7)
    return a, derive_shared(a, b.public, ctx)


def count_ops(m: int, n: int, ctx: FieldCtx | None = None) -> OpCounters:
    """Instrumented dry-run encryption of an empty message.

    Per block: 27 + 9 multiplications and 18 + 9 + 9 additions (block
    product, delta-U term charged uniformly, column offsets) and one HMAC per
    ciphertext element.  Mask generation and key derivation are not counted.
    """
    ctx = ctx or FieldCtx(DEFAULT_P)
    a, shared = _fixed_session(ctx)
    counters = OpCounters()
    cipher.encrypt(b"", ctx=ctx, g=DEFAULT_G, sender_public=a.public, shared=shared,
                   m=m, n=n, salt=bytes(32), nonce=bytes(16), counter=counters)
    return counters


# entropy ---------------------------------------------------------------

@dataclass(frozen=True)
class EntropyReport:
    n_values: int
    h_bits: float
    h_max: float
    distinct_count: int


def entropy(values) -> EntropyReport:
    """Plug-in Shannon entropy of the empirical value distribution."""
    values = list(values)
    if not values:
        raise EmptyInput("entropy of an empty sample")
    n = len(values)
    counts = Counter(values)
    if len(counts) == n:
        h = math.log2(n)
    else:
        h = -sum(c / n * math.log2(c / n) for c in counts.values())
        h = max(h, 0.0)
    return EntropyReport(n, h, math.log2(n), len(counts))


def expected_uniform_entropy(n: int, support: int) -> float:
    """Expected plug-in entropy of ``n`` i.i.d. uniform draws over ``support`` values."""
    q = 1.0 / support
    total = 0.0
    for k in range(1, n + 1):
        # expected number of symbols seen exactly k times
        log_pk = (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                  + k * math.log(q) + (n - k) * math.log1p(-q))
        expected = support * math.exp(log_pk)
        if expected < 1e-300:
            if k > 2:
                break
            continue
        total -= expected * (k / n) * math.log2(k / n)
    return total


def random_session(ctx: FieldCtx, rng: random.Random, g=DEFAULT_G):
    a = generate_ephemeral(g, ctx, rng)
    b = generate_ephemeral(g, ctx, rng)
    return a, b, derive_shared(a, b.public, ctx)


def _randbytes(rng, k):
    return bytes(rng.getrandbits(8) for _ in range(k))


def entropy_sessions(m: int, n: int, sessions: int, ctx: FieldCtx, rng: random.Random,
                     msg: bytes = b"Peace at home, peace in the world.", start=(1, 1)):
    """Entropy reports of the ciphertext elements over independent sessions."""
    out = []
    for _ in range(sessions):
        a, _b, shared = random_session(ctx, rng)
        ct = cipher.encrypt(msg, ctx=ctx, g=DEFAULT_G, sender_public=a.public, shared=shared,
                            m=m, n=n, start=start, salt=_randbytes(rng, 32), nonce=_randbytes(rng, 16))
        out.append(entropy(ct.elements()))
    return out


# avalanche -------------------------------------------------------------

@dataclass
class AvalancheTrial:
    cell: tuple
    blocks_hit: int
    changed: int
    rows_touched: int
    whole_rows: bool
    within_row: bool

    @property
    def rate(self) -> float:
        return self.changed / (9 * self.blocks_hit)

    @property
    def row_rate(self) -> float:
        return self.rows_touched / (3 * self.blocks_hit)


@dataclass
class AvalancheResult:
    trials: list

    @property
    def mean(self) -> float:
        return sum(t.rate for t in self.trials) / len(self.trials)

    @property
    def mean_row_rate(self) -> float:
        return sum(t.row_rate for t in self.trials) / len(self.trials)

    @property
    def all_whole_rows(self) -> bool:
        return all(t.whole_rows for t in self.trials)

    @property
    def all_within_row(self) -> bool:
        return all(t.within_row for t in self.trials)


def avalanche(trials: int, m: int, n: int, ctx: FieldCtx, rng: random.Random) -> AvalancheResult:
    """Single-cell plaintext flips under fixed keys, salt and nonce.

    For each trial a random full-matrix message is encrypted, one byte is
    changed, and the message is re-encrypted.  The rate counts changed
    ciphertext elements over the 9 elements of every block whose footprint
    holds the flipped cell.  ``within_row`` records that all changes stay in
    the block row holding the cell; ``whole_rows`` that every element of that
    row changed.
    """
    plan = plan_indices(m, n)
    a, _b, shared = random_session(ctx, rng)
    salt, nonce = _randbytes(rng, 32), _randbytes(rng, 16)

    def enc(msg):
        return cipher.encrypt(msg, ctx=ctx, g=DEFAULT_G, sender_public=a.public, shared=shared,
                              m=m, n=n, salt=salt, nonce=nonce).columns

    out = []
    for _ in range(trials):
        msg = bytearray(_randbytes(rng, m * n))
        base = enc(bytes(msg))
        r, c = rng.randrange(m), rng.randrange(n)
        msg[r * n + c] = (msg[r * n + c] + rng.randrange(1, 256)) % 256
        flipped = enc(bytes(msg))
        hit = plan.blocks_covering(r + 1, c + 1)
        changed = rows = 0
        whole = inside = True
        for k in hit:
            i, _j = plan.order[k - 1]
            target = r + 1 - i
            cols = range(3 * (k - 1), 3 * k)
            diff = {(row, ell) for ell in cols for row in range(3) if base[ell][row] != flipped[ell][row]}
            changed += len(diff)
            rows += len({row for row, _ in diff})
            inside &= all(row == target for row, _ in diff)
            whole &= diff == {(target, ell) for ell in cols}
        out.append(AvalancheTrial((r + 1, c + 1), len(hit), changed, rows, whole, inside))
    return AvalancheResult(out)


# randomness tests ------------------------------------------------------

MIN_BITS = 2000


def _bits(bits):
    if isinstance(bits, str):
        bits = [1 if ch == "1" else 0 for ch in bits if ch in "01"]
    bits = list(bits)
    if len(bits) < MIN_BITS:
        raise InsufficientBits(f"need at least {MIN_BITS} bits, got {len(bits)}")
    return bits


def monobit(bits) -> float:
    bits = _bits(bits)
    s = sum(2 * b - 1 for b in bits)
    return float(erfc(abs(s) / math.sqrt(len(bits)) / math.sqrt(2)))


def runs(bits) -> float:
    """NIST SP 800-22 runs test."""
    bits = _bits(bits)
    n = len(bits)
    pi = sum(bits) / n
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return 0.0
    v = 1 + sum(bits[k] != bits[k + 1] for k in range(n - 1))
    num = abs(v - 2 * n * pi * (1 - pi))
    return float(erfc(num / (2 * math.sqrt(2 * n) * pi * (1 - pi))))


def poker(bits, m: int = 4) -> float:
    """FIPS 140-2 poker statistic with ``m``-bit hands, upper-tail chi-square p-value."""
    bits = _bits(bits)
    k = len(bits) // m
    counts = Counter(
        int("".join(map(str, bits[t * m:(t + 1) * m])), 2) for t in range(k)
    )
    x = (2 ** m / k) * sum(c * c for c in counts.values()) - k
    return float(chi2.sf(x, 2 ** m - 1))


@dataclass(frozen=True)
class RandomnessResult:
    p_monobit: float
    p_runs: float
    p_poker4: float

    def passes(self, alpha: float = 0.01) -> bool:
        return min(self.p_monobit, self.p_runs, self.p_poker4) > alpha


def randomness_suite(bits) -> RandomnessResult:
    bits = _bits(bits)
    return RandomnessResult(monobit(bits), runs(bits), poker(bits, 4))


def keystream_bits(offsets, ctx: FieldCtx, packing: str = "radix") -> list[int]:
    """Bitstream derived from a sequence of offset vectors, MSB first.

    ``"octets"`` concatenates fixed-width encodings of every element; its
    high-order bits are constant whenever p is far below a power of 256.
    ``"radix"`` reads the elements as base-p digits of one integer N and keeps
    the low ``floor(count * log2 p) - 64`` bits of N, which are within 2**-64
    of uniform when the elements are.
    """
    values = [x for vec in offsets for x in vec]
    if packing == "octets":
        W = ctx.octet_len
        return [int(b) for x in values for b in format(x, f"0{8 * W}b")]
    if packing != "radix":
        raise ValueError(f"unknown packing {packing!r}")
    N = 0
    for x in values:
        N = N * ctx.p + x
    width = int(len(values) * math.log2(ctx.p)) - 64
    if width <= 0:
        raise InsufficientBits("too few elements for radix packing")
    N &= (1 << width) - 1
    return [int(b) for b in format(N, f"0{width}b")]


def session_offsets(m: int, n: int, ctx: FieldCtx, rng: random.Random):
    """All r_ell vectors of one fresh session of shape m x n."""
    _a, _b, shared = random_session(ctx, rng)
    keys = derive_keys(shared, _randbytes(rng, 32), ctx)
    nonce = _randbytes(rng, 16)
    B = plan_indices(m, n).B
    return [column_offset(keys, nonce, ell, ctx) for ell in range(1, 3 * B + 1)]


def duplicate_scan(vectors) -> list[tuple[int, int]]:
    """All 1-based index pairs (a, b), a < b, holding identical vectors."""
    seen: dict[tuple, list[int]] = {}
    for idx, v in enumerate(vectors, 1):
        seen.setdefault(tuple(v), []).append(idx)
    pairs = []
    for idxs in seen.values():
        pairs.extend((x, y) for t, x in enumerate(idxs) for y in idxs[t + 1:])
    return sorted(pairs)


def expected_collisions(count: int, space: int) -> float:
    """Birthday estimate of colliding pairs among ``count`` uniform draws."""
    return count * (count - 1) / (2 * space)


# known-plaintext probe -------------------------------------------------

@dataclass
class KpaResult:
    verdict: str            # "recovered", "failed" or "not attempted"
    recovered: bool
    pairs_used: int
    residual_entropy: float | None = None
    residual_reference: float | None = None
    residual_count: int = 0


def _known_rows(ctx, shared, g_pub, count, offsets, rng, m=8, n=10):
    """(plaintext row, ciphertext row) pairs from delta-free blocks.

    Plaintext here is the masked block content, i.e. the attacker is granted
    the mask.  Several messages are encrypted under the same shared vector
    with fresh salt and nonce until enough rows are collected.
    """
    pairs = []
    while len(pairs) < count:
        trace = []
        ct = cipher.encrypt(_randbytes(rng, m * n), ctx=ctx, g=DEFAULT_G, sender_public=g_pub,
                            shared=shared, m=m, n=n, salt=_randbytes(rng, 32),
                            nonce=_randbytes(rng, 16), offsets=offsets, trace=trace)
        for rec in trace:
            if rec["i"] == rec["j"]:
                continue
            k = rec["k"]
            cols = ct.columns[3 * (k - 1):3 * k]
            for row in range(3):
                pairs.append((rec["S"][row], tuple(cols[r][row] for r in range(3))))
    rng.shuffle(pairs)
    return pairs[:count]


def solve_v(pairs, ctx: FieldCtx, rng: random.Random | None = None, attempts: int = 50):
    """Solve ``c = s V`` from three stacked rows with an invertible plaintext stack."""
    rng = rng or random.Random(0)
    if len(pairs) < 3:
        raise SingularSystem("need at least three pairs")
    idx = list(range(len(pairs)))
    for attempt in range(attempts):
        pick = idx[:3] if attempt == 0 else rng.sample(idx, 3)
        S = tuple(pairs[t][0] for t in pick)
        if det(S, ctx) == 0:
            continue
        C = tuple(pairs[t][1] for t in pick)
        return mat_mul(mat_inv(S, ctx), C, ctx), pick
    raise SingularSystem("no invertible plaintext stack found")


def kpa_probe(num_pairs: int, with_offsets: bool, ctx: FieldCtx, rng: random.Random,
              mask_known: bool = True, resamples: int = 20) -> KpaResult:
    """Classical Hill-cipher known-plaintext attack against one session."""
    if num_pairs < 3:
        raise ValueError("num_pairs must be at least 3")
    if not mask_known:
        return KpaResult("not attempted", False, 0)
    a, _b, shared = random_session(ctx, rng)
    V = build_key_matrices(shared, ctx).V
    # a singular plaintext stack (e.g. a row shared by two overlapping blocks) is
    # answered by collecting fresh pairs, as a real attacker would
    for _ in range(resamples):
        pairs = _known_rows(ctx, shared, a.public, num_pairs, with_offsets, rng)
        try:
            V_guess, pick = solve_v(pairs, ctx, rng)
            break
        except SingularSystem:
            continue
    else:
        raise SingularSystem(f"no invertible plaintext stack in {resamples} draws")
    recovered = V_guess == V
    rest = [pr for t, pr in enumerate(pairs) if t not in pick]
    residuals = []
    for s, c in rest:
        predicted = mat_mul((s, (0, 0, 0), (0, 0, 0)), V_guess, ctx)[0]
        residuals.extend((x - y) % ctx.p for x, y in zip(c, predicted))
    result = KpaResult("recovered" if recovered else "failed", recovered, len(pairs))
    if residuals:
        result.residual_count = len(residuals)
        result.residual_entropy = entropy(residuals).h_bits
        result.residual_reference = expected_uniform_entropy(len(residuals), ctx.p)
    return result


# integrity coverage ----------------------------------------------------

@dataclass
class IntegrityResult:
    injections: int = 0
    overlap_injections: int = 0
    overlap_detected: int = 0
    overlap_in_range: int = 0
    overlap_in_range_mismatch: int = 0
    detected: int = 0
    outcomes: Counter = field(default_factory=Counter)

    @property
    def coverage(self) -> float:
        return self.detected / self.injections if self.injections else 0.0


def integrity_coverage(m: int, n: int, ctx: FieldCtx, rng: random.Random,
                       msg: bytes = b"Peace at home, peace in the world.", start=(2, 3)) -> IntegrityResult:
    """Flip every bit of every serialized column element once and decrypt.

    An injection is "overlap-checked" when the block row it disturbs contains
    a cell covered by at least two blocks.
    """
    plan = plan_indices(m, n)
    a, b, shared = random_session(ctx, rng)
    ct = cipher.encrypt(msg, ctx=ctx, g=DEFAULT_G, sender_public=a.public, shared=shared,
                        m=m, n=n, start=start, salt=_randbytes(rng, 32), nonce=_randbytes(rng, 16))
    blob = bytearray(cipher.serialize(ct))
    W = ctx.octet_len
    res = IntegrityResult()
    for ell in range(1, 3 * plan.B + 1):
        k = (ell - 1) // 3 + 1
        i, j = plan.order[k - 1]
        for row in range(3):
            cells = [(i + row, j + t) for t in range(3)]
            in_overlap = any(plan.coverage[r - 1][c - 1] >= 2 for r, c in cells)
            off = cipher.column_offset_in_bytes(ct.header, ell, row + 1)
            for bit in range(8 * W):
                pos = off + bit // 8
                blob[pos] ^= 0x80 >> (bit % 8)
                outcome = _decrypt_outcome(bytes(blob), b.secret, msg)
                blob[pos] ^= 0x80 >> (bit % 8)
                res.injections += 1
                res.outcomes[outcome] += 1
                detected = outcome not in ("undetected", "unchanged")
                res.detected += detected
                if in_overlap:
                    res.overlap_injections += 1
                    res.overlap_detected += detected
                    if outcome != "NonCanonicalElement":
                        res.overlap_in_range += 1
                        res.overlap_in_range_mismatch += outcome == "OverlapMismatch"
    return res


def _decrypt_outcome(blob: bytes, secret: int, msg: bytes) -> str:
    try:
        pt = cipher.decrypt(cipher.deserialize(blob), secret=secret)
    except (IntegrityError, ParseError) as exc:
        return type(exc).__name__
    return "unchanged" if pt == msg else "undetected"
