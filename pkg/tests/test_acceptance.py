"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary block at
the end of the session lists every criterion.
"""
import random
import sys
import time

import pytest

from pvc import analysis, worked_example as ex
from pvc.cipher import Ciphertext, decrypt, encrypt
from pvc.codec import plan_indices
from pvc.errors import HandshakeError
from pvc.field import FieldCtx, random_prime
from pvc.keyexchange import (
    HmacSigner, Initiator, PrimitiveVector, Responder, channel_pair, derive_shared,
    generate_ephemeral, sts_handshake,
)
from pvc.matrixcore import IDENTITY, KeyMatrices, build_key_matrices, det, encrypt_block, mat_inv, mat_mul

pytestmark = pytest.mark.acceptance

P = 12347
CTX = FieldCtx(P)
G = (2, 5, 6)


def test_c01_shared_vector(criterion):
    g = PrimitiveVector(*G).validate(CTX)
    a = generate_ephemeral(g, CTX, secret=3)
    b = generate_ephemeral(g, CTX, secret=7)
    t0 = time.perf_counter()
    shared = derive_shared(a, b.public, CTX)
    elapsed = time.perf_counter() - t0
    ok = tuple(shared) == (10509, 11849, 10836) and elapsed < 1e-3
    criterion(1, ok, f"G={tuple(shared)} in {elapsed * 1e3:.3f} ms (< 1 ms)")
    assert ok


def test_c02_table_fixtures(criterion):
    t0 = time.perf_counter()
    km = KeyMatrices(ex.V, ex.U, mat_inv(ex.V, CTX))
    equal = anchor = 0
    for (i, j), (S, C) in ex.BLOCKS.items():
        got = encrypt_block(S, i, j, km, CTX)
        equal += sum(got[r][c] == C[r][c] for r in range(3) for c in range(3))
        if (i, j) == (1, 1):
            anchor = got[0][0]
    elapsed = time.perf_counter() - t0
    ok = equal == 108 and anchor == 2091 and elapsed < 0.010
    criterion(2, ok, f"{equal}/108 recorded entries reproduced, anchor C11[1,1]={anchor}, "
                     f"{elapsed * 1e3:.2f} ms (< 10 ms)")
    assert anchor == 2091
    assert equal == 108


def test_c03_key_matrix_identity(criterion):
    rng = random.Random(3)
    bad = 0
    t0 = time.perf_counter()
    for _ in range(10_000):
        ctx = FieldCtx(random_prime(rng.randrange(30, 61), rng))
        k = tuple(rng.randrange(1, ctx.p) for _ in range(3))
        km = build_key_matrices(k, ctx)
        if det(km.V, ctx) != 2 * k[0] * k[1] * k[2] % ctx.p or mat_mul(km.V, km.V_inv, ctx) != IDENTITY:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 5.0
    criterion(3, ok, f"{bad} violations over 10^4 (p, G), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_c04_index_plans(criterion):
    expect = {(5, 7): (2, 3, 54), (8, 10): (3, 4, 108), (12, 23): (4, 8, 288)}
    got = {}
    for shape in expect:
        plan = plan_indices(*shape)
        got[shape] = (len(plan.I), len(plan.J), 9 * plan.B)
    uncovered = [
        (m, n) for m in range(3, 41) for n in range(3, 41)
        if any(c == 0 for row in plan_indices(m, n).coverage for c in row)
    ]
    ok = got == expect and not uncovered
    criterion(4, ok, f"plans {list(got.values())}, {len(uncovered)} shapes with uncovered cells")
    assert ok


def test_c05_round_trip(criterion):
    rng = random.Random(5)
    shapes = [(5, 7), (8, 10), (12, 23), (3, 3)]
    failures = 0
    for t in range(1000):
        m, n = shapes[t % 4]
        a, b, shared = analysis.random_session(CTX, rng)
        L = rng.randrange(m * n + 1)
        first = rng.randrange(m * n - max(L, 1) + 1)
        start = (first // n + 1, first % n + 1)
        msg = rng.randbytes(L)
        ct = encrypt(msg, ctx=CTX, g=G, sender_public=a.public, shared=shared, m=m, n=n, start=start,
                     salt=rng.randbytes(32), nonce=rng.randbytes(16))
        failures += decrypt(ct, secret=b.secret) != msg
    criterion(5, failures == 0, f"{failures} failures over 1000 messages")
    assert failures == 0


def test_c06_entropy(criterion):
    rng = random.Random(6)
    details, ok = [], True
    for shape in [(5, 7), (8, 10), (12, 23)]:
        reps = analysis.entropy_sessions(*shape, 20, CTX, rng)
        floor = reps[0].h_max - 0.15
        ok &= all(r.h_bits >= floor for r in reps)
        ok &= all(abs(r.h_bits - r.h_max) <= 1e-12 for r in reps if r.distinct_count == r.n_values)
        details.append(f"{shape[0]}x{shape[1]} min H={min(r.h_bits for r in reps):.4f} "
                       f">= {floor:.4f}")
    criterion(6, ok, "; ".join(details))
    assert ok


def test_c07_avalanche(criterion):
    t0 = time.perf_counter()
    res = analysis.avalanche(1000, 8, 10, CTX, random.Random(7))
    elapsed = time.perf_counter() - t0
    in_band = 0.320 <= res.mean <= 0.347
    ok = in_band and res.all_whole_rows and elapsed < 10.0
    criterion(7, ok, f"mean diffusion {res.mean:.2%} (band 32.0%-34.7%), whole rows changed: "
                     f"{res.all_whole_rows}, changes confined to the row: {res.all_within_row}, "
                     f"{elapsed:.2f} s (< 10 s)")
    whole_rows = res.all_whole_rows
    assert elapsed < 10.0
    assert whole_rows, "a single-cell change never alters a whole block row"
    assert in_band, f"mean diffusion {res.mean:.4f}"


def test_c08_op_counts(criterion):
    got = [analysis.count_ops(*s).as_tuple() for s in [(5, 7), (8, 10), (12, 23)]]
    ok = got == [(216, 216, 54), (432, 432, 108), (1152, 1152, 288)]
    criterion(8, ok, f"{got}")
    assert ok


def test_c09_keystream(criterion):
    rng = random.Random(9)
    dups = radix_pass = octet_pass = 0
    for _ in range(50):
        offs = analysis.session_offsets(12, 23, CTX, rng)
        dups += len(analysis.duplicate_scan(offs))
        radix_pass += analysis.randomness_suite(analysis.keystream_bits(offs, CTX)).passes(0.01)
        octet_pass += analysis.randomness_suite(
            analysis.keystream_bits(offs, CTX, packing="octets")).passes(0.01)
    ok = dups == 0 and radix_pass >= 48
    criterion(9, ok, f"{dups} duplicate offsets, {radix_pass}/50 sessions pass (>= 48) "
                     f"[fixed-width octet packing, informational: {octet_pass}/50]")
    assert ok


class _FlipOnce:
    def __init__(self, inner, which, bit):
        self.inner, self.which, self.bit, self.sent = inner, which, bit, 0

    def send(self, data):
        if data and self.sent == self.which:
            data = bytearray(data)
            pos = self.bit % (8 * len(data))
            data[pos // 8] ^= 0x80 >> (pos % 8)
            data = bytes(data)
        self.sent += 1
        self.inner.send(data)

    def recv(self):
        return self.inner.recv()


def test_c10_sts_tamper(criterion):
    rng = random.Random(10)
    g = PrimitiveVector(*G).validate(CTX)
    si, sr = HmacSigner(b"alice", rng.randbytes(32)), HmacSigner(b"bob", rng.randbytes(32))
    aborted = silent = 0
    for _ in range(1000):
        ini = Initiator(CTX, g, si, sr, rng=rng)
        res = Responder(CTX, g, sr, si, rng=rng)
        ep_i, ep_r = channel_pair(timeout=5.0)
        # messages 1 and 3 leave the initiator, message 2 the responder
        msg = rng.choice((1, 2, 3))
        bit = rng.randrange(1 << 16)
        if msg == 2:
            ep_r = _FlipOnce(ep_r, 0, bit)
        else:
            ep_i = _FlipOnce(ep_i, 0 if msg == 1 else 1, bit)
        try:
            sts_handshake(ini, res, (ep_i, ep_r))
        except HandshakeError:
            aborted += 1
            continue
        silent += 1
    ok = aborted == 1000 and silent == 0
    criterion(10, ok, f"{aborted}/1000 corrupted handshakes aborted, {silent} silent agreements")
    assert ok


def test_c11_kpa(criterion):
    rng = random.Random(11)
    plain = [analysis.kpa_probe(3, False, CTX, rng) for _ in range(100)]
    layered = [analysis.kpa_probe(100, True, CTX, rng) for _ in range(100)]
    hit_plain = sum(r.recovered for r in plain)
    hit_layered = sum(r.recovered for r in layered)
    gap = max(abs(r.residual_entropy - r.residual_reference) for r in layered)
    ok = hit_plain >= 95 and hit_layered == 0 and gap <= 0.1
    criterion(11, ok, f"offsets off: {hit_plain}/100 recovered (>= 95); offsets on: {hit_layered}/100 "
                      f"recovered, max residual entropy gap {gap:.4f} bit (<= 0.1)")
    assert ok


def test_c12_integrity(criterion):
    res = analysis.integrity_coverage(8, 10, CTX, random.Random(12))
    ok = (res.overlap_detected == res.overlap_injections
          and res.overlap_in_range_mismatch == res.overlap_in_range)
    criterion(12, ok, f"overlap-checked flips detected {res.overlap_detected}/{res.overlap_injections}, "
                      f"in-range ones raising OverlapMismatch {res.overlap_in_range_mismatch}/"
                      f"{res.overlap_in_range}; overall coverage {res.coverage:.2%} of "
                      f"{res.injections} flips {dict(res.outcomes)}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
