import hashlib
import hmac
import random
import struct

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from pvc.errors import (
    HandshakeError, InvalidParameters, InvalidPeerPublic, MacInvalid, MalformedMessage, SignatureInvalid,
)
from pvc.field import FieldCtx
from pvc.keyexchange import (
    Ed25519Signer, HmacSigner, Initiator, PrimitiveVector, Responder, channel_pair, decode_msg,
    derive_shared, encode_msg, generate_ephemeral, sts_handshake, transcript_bytes,
)


def test_example_publics(ctx, g):
    assert generate_ephemeral(g, ctx, secret=3).public == (8, 125, 216)
    assert generate_ephemeral(g, ctx, secret=7).public == (128, 78125 % 12347, 6 ** 7 % 12347)


def test_example_shared(example_session):
    a, b, shared = example_session
    assert tuple(shared) == (10509, 11849, 10836)
    assert tuple(shared) == tuple(pow(x, 21, 12347) for x in (2, 5, 6))


def test_shared_agrees(ctx, g, rng):
    for _ in range(200):
        a = generate_ephemeral(g, ctx, rng)
        b = generate_ephemeral(g, ctx, rng)
        assert 1 <= a.secret <= ctx.p - 2
        if min(a.public + b.public) < 2 or max(a.public + b.public) > ctx.p - 2:
            continue
        assert tuple(derive_shared(a, b.public, ctx)) == tuple(derive_shared(b, a.public, ctx))


def test_secret_repr_redacted(example_session):
    a, _b, shared = example_session
    assert "10509" not in repr(shared)
    assert "secret=3" not in repr(a)


@pytest.mark.parametrize("bad", [0, 1, 12346, 12347, -5])
def test_reject_degenerate_peer(ctx, g, bad):
    a = generate_ephemeral(g, ctx, secret=3)
    with pytest.raises(InvalidPeerPublic):
        derive_shared(a, (bad, 125, 216), ctx)


def test_random_ephemeral_never_degenerate(ctx, g):
    class Stuck:
        # first draw is (p-1)/2, whose public vector is (p-1, p-1, p-1)
        def __init__(self):
            self.values = [(ctx.p - 1) // 2, 5]

        def randrange(self, lo, hi):
            return self.values.pop(0)

    assert generate_ephemeral(g, ctx, secret=(ctx.p - 1) // 2).public == (ctx.p - 1,) * 3
    kp = generate_ephemeral(g, ctx, Stuck())
    assert kp.secret == 5


def test_reject_bad_secret(ctx, g):
    for s in (0, ctx.p - 1, ctx.p):
        with pytest.raises(InvalidParameters):
            generate_ephemeral(g, ctx, secret=s)


def test_primitive_vector_validation(ctx):
    PrimitiveVector(2, 5, 6).validate(ctx)
    with pytest.raises(InvalidParameters):
        PrimitiveVector(2, 4, 6).validate(ctx)  # 4 is a square


def _parties(ctx, g, a=3, b=7, signer_i=None, signer_r=None):
    si = signer_i or HmacSigner(b"alice", b"A" * 32)
    sr = signer_r or HmacSigner(b"bob", b"B" * 32)
    ini = Initiator(ctx, g, si, sr, keypair=generate_ephemeral(g, ctx, secret=a))
    res = Responder(ctx, g, sr, si, keypair=generate_ephemeral(g, ctx, secret=b))
    return ini, res


def test_honest_handshake(ctx, g):
    ini, res = _parties(ctx, g)
    (gi, ti), (gr, tr) = sts_handshake(ini, res)
    assert tuple(gi) == tuple(gr) == (10509, 11849, 10836)
    assert ti == tr


def test_ed25519_handshake(ctx, g, rng):
    si, sr = Ed25519Signer(b"alice"), Ed25519Signer(b"bob")
    ini = Initiator(ctx, g, si, sr.verifier(), rng=rng)
    res = Responder(ctx, g, sr, si.verifier(), rng=rng)
    (gi, _), (gr, _) = sts_handshake(ini, res)
    assert tuple(gi) == tuple(gr)


def _hkdf(ikm, salt, info):
    return HKDF(hashes.SHA256(), 32, salt, info).derive(ikm)


def test_mac_input_encoding(ctx, g):
    """Rebuild MSG2's MAC from first principles."""
    ini, res = _parties(ctx, g)
    msg1 = ini.start()
    msg2 = res.respond(msg1)
    pub_i, sig_i, _ = decode_msg(msg1, ctx, with_mac=False)
    pub_r, sig_r, mac_r = decode_msg(msg2, ctx, with_mac=True)
    enc = lambda v: b"".join(x.to_bytes(2, "big") for x in v)  # noqa: E731
    lp = lambda b: struct.pack(">I", len(b)) + b  # noqa: E731
    t = enc(pub_i) + enc(pub_r) + lp(sig_i) + lp(sig_r)
    assert transcript_bytes(pub_i, pub_r, sig_i, sig_r, ctx) == t
    salt = hashlib.sha256(b"PVC/sts/salt" + enc(pub_i) + enc(pub_r)).digest()
    k_mac = _hkdf(enc((10509, 11849, 10836)), salt, b"PVC/mac")
    k_r = hmac.new(k_mac, b"responder", hashlib.sha256).digest()
    assert hmac.new(k_r, t, hashlib.sha256).digest() == mac_r
    k_i = hmac.new(k_mac, b"initiator", hashlib.sha256).digest()
    assert ini.finish(msg2) == hmac.new(k_i, t, hashlib.sha256).digest()
    # signature input for the initiator binds its public vector and the peer id
    signed = b"alice\x00" + b"PVC/sts/I" + enc(pub_i) + lp(b"bob")
    assert sig_i == hmac.new(b"A" * 32, signed, hashlib.sha256).digest()


def _flip(data, pos):
    out = bytearray(data)
    out[pos] ^= 0x01
    return bytes(out)


def test_tampered_msg1_public(ctx, g):
    ini, res = _parties(ctx, g)
    with pytest.raises(SignatureInvalid):
        res.respond(_flip(ini.start(), 8))


def test_tampered_msg2(ctx, g):
    ini, res = _parties(ctx, g)
    msg2 = res.respond(ini.start())
    other = _parties(ctx, g, a=5)[0]
    with pytest.raises(HandshakeError):
        other.finish(msg2)
    other.start()
    with pytest.raises(SignatureInvalid):
        other.finish(msg2)  # responder signed a different g^a
    with pytest.raises(SignatureInvalid):
        ini.finish(_flip(msg2, 8))
    with pytest.raises(MacInvalid):
        ini.finish(_flip(msg2, len(msg2) - 1))
    assert ini.shared is None


def test_tampered_msg3(ctx, g):
    ini, res = _parties(ctx, g)
    msg3 = ini.finish(res.respond(ini.start()))
    with pytest.raises(MacInvalid):
        res.finish(_flip(msg3, 0))
    assert res.shared is None


def test_malformed_messages(ctx, g):
    ini, res = _parties(ctx, g)
    msg1 = ini.start()
    with pytest.raises(MalformedMessage):
        res.respond(msg1[:5])
    with pytest.raises(MalformedMessage):
        res.respond(b"XXXXXX" + msg1[6:])
    with pytest.raises(MalformedMessage):
        res.respond(msg1 + b"\x00")


def test_wrong_identity_rejected(ctx, g):
    si = HmacSigner(b"alice", b"A" * 32)
    sr = HmacSigner(b"bob", b"B" * 32)
    mallory = HmacSigner(b"mallory", b"A" * 32)
    ini = Initiator(ctx, g, si, mallory, keypair=generate_ephemeral(g, ctx, secret=3))
    res = Responder(ctx, g, sr, si, keypair=generate_ephemeral(g, ctx, secret=7))
    with pytest.raises(SignatureInvalid):
        res.respond(ini.start())


class _Tamper:
    """Endpoint wrapper flipping one bit of the n-th outgoing message."""

    def __init__(self, inner, which, pos):
        self.inner, self.which, self.pos, self.count = inner, which, pos, 0

    def send(self, data):
        if data and self.count == self.which:
            data = _flip(data, self.pos)
        self.count += 1
        self.inner.send(data)

    def recv(self):
        return self.inner.recv()


@pytest.mark.parametrize("side, which, pos, exc", [
    ("i", 0, 10, SignatureInvalid),
    ("r", 0, -1, MacInvalid),
    ("i", 1, 3, MacInvalid),
])
def test_handshake_aborts_on_tamper(ctx, g, side, which, pos, exc):
    ini, res = _parties(ctx, g)
    ep_i, ep_r = channel_pair(timeout=2.0)
    if side == "i":
        ep_i = _Tamper(ep_i, which, pos)
    else:
        ep_r = _Tamper(ep_r, which, pos)
    with pytest.raises(exc):
        sts_handshake(ini, res, (ep_i, ep_r))
    assert issubclass(exc, HandshakeError)


def test_encode_msg_roundtrip(ctx):
    msg = encode_msg((8, 125, 216), b"sig", ctx, b"m" * 32)
    assert decode_msg(msg, ctx, with_mac=True) == ((8, 125, 216), b"sig", b"m" * 32)


def test_handshake_random_primes():
    from pvc.field import is_primitive_root, random_prime
    rnd = random.Random(7)
    for _ in range(5):
        ctx = FieldCtx(random_prime(40, rnd))
        gens = [x for x in range(2, 500) if is_primitive_root(x, ctx)][:3]
        g = PrimitiveVector(*gens).validate(ctx)
        ini = Initiator(ctx, g, HmacSigner(b"a", b"1" * 32), HmacSigner(b"b", b"2" * 32), rng=rnd)
        res = Responder(ctx, g, HmacSigner(b"b", b"2" * 32), HmacSigner(b"a", b"1" * 32), rng=rnd)
        (gi, _), (gr, _) = sts_handshake(ini, res)
        assert tuple(gi) == tuple(gr)
