"""Vector Diffie-Hellman over (F_p^*)^3 with station-to-station authentication.

Three messages::

    MSG1  I -> R   "PVCSTS" 0x01 | g^a | len | sig_I
    MSG2  R -> I   "PVCSTS" 0x01 | g^b | len | sig_R | mac_R
    MSG3  I -> R   mac_I

``sig_I`` covers the initiator's public vector and the responder's identity
(the initiator cannot know g^b yet); ``sig_R`` covers ``(g^b, g^a)`` and the
initiator's identity.  Both MACs are taken over the same canonical transcript
with direction-specific keys derived from K_mac, so each side proves it
derived G.  The initiator's commitment to g^b is carried by its MAC.

Signers are pluggable.  :class:`HmacSigner` is a symmetric, desk-scale
stand-in; :class:`Ed25519Signer` wraps a real signature scheme.
"""
from __future__ import annotations

import hashlib
import hmac
import queue
import secrets
import struct
import threading
from dataclasses import dataclass
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .errors import (
    HandshakeError, InvalidParameters, InvalidPeerPublic, MacInvalid,
    MalformedMessage, SignatureInvalid,
)
from .field import FieldCtx, i2osp, is_primitive_root, os2ip
from .kdfstream import derive_keys

MAGIC = b"PVCSTS"
VERSION = 0x01
MAC_LEN = 32


@dataclass(frozen=True)
class PrimitiveVector:
    g1: int
    g2: int
    g3: int

    def __iter__(self):
        return iter((self.g1, self.g2, self.g3))

    def validate(self, ctx: FieldCtx) -> "PrimitiveVector":
        comps = tuple(self)
        if len(set(comps)) != 3:
            raise InvalidParameters("primitive vector components must be distinct")
        for idx, g in enumerate(comps, 1):
            if not is_primitive_root(g, ctx):
                raise InvalidParameters(f"g{idx} = {g} is not a primitive root mod {ctx.p}")
        return self


@dataclass(frozen=True)
class EphemeralKeypair:
    secret: int
    public: tuple[int, int, int]

    def __repr__(self):
        return f"EphemeralKeypair(secret=<redacted>, public={self.public})"


@dataclass(frozen=True)
class SharedVector:
    k1: int
    k2: int
    k3: int

    def __iter__(self):
        return iter((self.k1, self.k2, self.k3))

    def __repr__(self):
        return "SharedVector(<redacted>)"


@dataclass
class StsTranscript:
    initiator_public: tuple
    responder_public: tuple
    sig_initiator: bytes
    sig_responder: bytes
    mac_responder: bytes
    mac_initiator: bytes

    def __post_init__(self):
        if len(self.mac_responder) != MAC_LEN or len(self.mac_initiator) != MAC_LEN:
            raise MalformedMessage("MAC tags are 32 octets")


def generate_ephemeral(g, ctx: FieldCtx, rng=None, *, secret: int | None = None) -> EphemeralKeypair:
    """Fresh exponent in [1, p-2] and its component-wise public vector.

    ``rng`` needs a ``randrange`` method; defaults to the ``secrets`` module.
    ``secret`` pins the exponent (demos and tests).
    """
    if secret is not None:
        if not 1 <= secret <= ctx.p - 2:
            raise InvalidParameters("secret exponent must lie in [1, p-2]")
        return EphemeralKeypair(secret, tuple(pow(gi, secret, ctx.p) for gi in g))
    rng = rng or secrets.SystemRandom()
    while True:
        # (p-1)/2 would publish p-1, which every peer rejects; draw again
        secret = rng.randrange(1, ctx.p - 1)
        public = tuple(pow(gi, secret, ctx.p) for gi in g)
        if all(2 <= x <= ctx.p - 2 for x in public):
            return EphemeralKeypair(secret, public)


def check_peer_public(peer_public, ctx: FieldCtx) -> tuple[int, int, int]:
    peer_public = tuple(peer_public)
    if len(peer_public) != 3:
        raise InvalidPeerPublic("peer public vector must have 3 components")
    for x in peer_public:
        if not isinstance(x, int) or not 2 <= x <= ctx.p - 2:
            raise InvalidPeerPublic(f"peer public component {x} outside [2, p-2]")
    return peer_public


def derive_shared(own: EphemeralKeypair, peer_public, ctx: FieldCtx) -> SharedVector:
    peer_public = check_peer_public(peer_public, ctx)
    return SharedVector(*(pow(x, own.secret, ctx.p) for x in peer_public))


# signers ---------------------------------------------------------------

class Signer(Protocol):
    identity: bytes

    def sign(self, message: bytes) -> bytes: ...


class Verifier(Protocol):
    identity: bytes

    def verify(self, message: bytes, signature: bytes) -> bool: ...


class HmacSigner:
    """Deterministic test signer keyed by a pre-shared 32-octet secret.

    Acts as its own verifier, so the peer must hold a copy of the key.
    """

    def __init__(self, identity: bytes, key: bytes):
        if len(key) != 32:
            raise InvalidParameters("HmacSigner key must be 32 octets")
        self.identity = bytes(identity)
        self._key = bytes(key)

    def sign(self, message: bytes) -> bytes:
        return hmac.new(self._key, self.identity + b"\x00" + message, hashlib.sha256).digest()

    def verify(self, message: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(self.sign(message), bytes(signature))


class Ed25519Verifier:
    def __init__(self, identity: bytes, public_key):
        self.identity = bytes(identity)
        self.public_key = public_key

    def verify(self, message: bytes, signature: bytes) -> bool:
        try:
            self.public_key.verify(bytes(signature), message)
        except InvalidSignature:
            return False
        return True


class Ed25519Signer:
    def __init__(self, identity: bytes, private_key=None):
        self.identity = bytes(identity)
        self._key = private_key or Ed25519PrivateKey.generate()

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)

    def verifier(self) -> Ed25519Verifier:
        return Ed25519Verifier(self.identity, self._key.public_key())


# wire encoding ---------------------------------------------------------

def encode_vector(vec, ctx: FieldCtx) -> bytes:
    return b"".join(i2osp(x, ctx.octet_len) for x in vec)


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def transcript_bytes(initiator_public, responder_public, sig_i: bytes, sig_r: bytes, ctx) -> bytes:
    """Canonical MAC input: g^a | g^b | len|sig_I | len|sig_R."""
    return (encode_vector(initiator_public, ctx) + encode_vector(responder_public, ctx)
            + _lp(sig_i) + _lp(sig_r))


def _sig_input_initiator(pub_i, responder_id: bytes, ctx) -> bytes:
    return b"PVC/sts/I" + encode_vector(pub_i, ctx) + _lp(responder_id)


def _sig_input_responder(pub_r, pub_i, initiator_id: bytes, ctx) -> bytes:
    return b"PVC/sts/R" + encode_vector(pub_r, ctx) + encode_vector(pub_i, ctx) + _lp(initiator_id)


def handshake_salt(pub_i, pub_r, ctx) -> bytes:
    return hashlib.sha256(b"PVC/sts/salt" + encode_vector(pub_i, ctx) + encode_vector(pub_r, ctx)).digest()


def _mac_keys(shared, pub_i, pub_r, ctx):
    k_mac = derive_keys(shared, handshake_salt(pub_i, pub_r, ctx), ctx).k_mac
    k_r = hmac.new(k_mac, b"responder", hashlib.sha256).digest()
    k_i = hmac.new(k_mac, b"initiator", hashlib.sha256).digest()
    return k_i, k_r


def _mac(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


def encode_msg(public, signature: bytes, ctx, mac: bytes | None = None) -> bytes:
    out = MAGIC + bytes([VERSION]) + encode_vector(public, ctx) + _lp(signature)
    if mac is not None:
        out += mac
    return out


def decode_msg(data: bytes, ctx: FieldCtx, *, with_mac: bool):
    """Parse MSG1 (``with_mac=False``) or MSG2.  Returns (public, sig, mac)."""
    data = bytes(data)
    head = len(MAGIC) + 1
    vec_len = 3 * ctx.octet_len
    if len(data) < head + vec_len + 4:
        raise MalformedMessage("handshake message truncated")
    if data[:len(MAGIC)] != MAGIC or data[len(MAGIC)] != VERSION:
        raise MalformedMessage("bad magic or version")
    off = head
    public = tuple(os2ip(data[off + t * ctx.octet_len: off + (t + 1) * ctx.octet_len]) for t in range(3))
    off += vec_len
    (sig_len,) = struct.unpack(">I", data[off:off + 4])
    off += 4
    expected = off + sig_len + (MAC_LEN if with_mac else 0)
    if len(data) != expected:
        raise MalformedMessage("handshake message has the wrong length")
    sig = data[off:off + sig_len]
    mac = data[off + sig_len:] if with_mac else None
    return public, sig, mac


# state machines --------------------------------------------------------

class Initiator:
    """Initiator side.  ``start()`` -> MSG1; ``finish(MSG2)`` -> MSG3."""

    def __init__(self, ctx: FieldCtx, g, signer, peer: Verifier, keypair: EphemeralKeypair | None = None, rng=None):
        self.ctx = ctx
        self.g = g
        self.signer = signer
        self.peer = peer
        self.keypair = keypair or generate_ephemeral(g, ctx, rng)
        self.shared = None
        self.transcript = None
        self._sig = None

    def start(self) -> bytes:
        self._sig = self.signer.sign(_sig_input_initiator(self.keypair.public, self.peer.identity, self.ctx))
        return encode_msg(self.keypair.public, self._sig, self.ctx)

    def finish(self, msg2: bytes) -> bytes:
        if self._sig is None:
            raise HandshakeError("finish() called before start()")
        ctx = self.ctx
        pub_i = self.keypair.public
        pub_r, sig_r, mac_r = decode_msg(msg2, ctx, with_mac=True)
        if not self.peer.verify(_sig_input_responder(pub_r, pub_i, self.signer.identity, ctx), sig_r):
            raise SignatureInvalid("responder signature rejected")
        shared = derive_shared(self.keypair, pub_r, ctx)
        k_i, k_r = _mac_keys(shared, pub_i, pub_r, ctx)
        t = transcript_bytes(pub_i, pub_r, self._sig, sig_r, ctx)
        if not hmac.compare_digest(_mac(k_r, t), mac_r):
            raise MacInvalid("responder MAC rejected")
        mac_i = _mac(k_i, t)
        self.shared = shared
        self.transcript = StsTranscript(pub_i, pub_r, self._sig, sig_r, mac_r, mac_i)
        return mac_i


class Responder:
    """Responder side.  ``respond(MSG1)`` -> MSG2; ``finish(MSG3)``."""

    def __init__(self, ctx: FieldCtx, g, signer, peer: Verifier, keypair: EphemeralKeypair | None = None, rng=None):
        self.ctx = ctx
        self.g = g
        self.signer = signer
        self.peer = peer
        self.keypair = keypair or generate_ephemeral(g, ctx, rng)
        self.shared = None
        self.transcript = None
        self._pending = None

    def respond(self, msg1: bytes) -> bytes:
        ctx = self.ctx
        pub_i, sig_i, _ = decode_msg(msg1, ctx, with_mac=False)
        if not self.peer.verify(_sig_input_initiator(pub_i, self.signer.identity, ctx), sig_i):
            raise SignatureInvalid("initiator signature rejected")
        pub_r = self.keypair.public
        shared = derive_shared(self.keypair, pub_i, ctx)
        sig_r = self.signer.sign(_sig_input_responder(pub_r, pub_i, self.peer.identity, ctx))
        k_i, k_r = _mac_keys(shared, pub_i, pub_r, ctx)
        t = transcript_bytes(pub_i, pub_r, sig_i, sig_r, ctx)
        mac_r = _mac(k_r, t)
        self._pending = (shared, pub_i, sig_i, sig_r, mac_r, _mac(k_i, t))
        return encode_msg(pub_r, sig_r, ctx, mac_r)

    def finish(self, msg3: bytes) -> None:
        if self._pending is None:
            raise HandshakeError("finish() called before respond()")
        shared, pub_i, sig_i, sig_r, mac_r, expected = self._pending
        self._pending = None
        if len(msg3) != MAC_LEN:
            raise MalformedMessage("MSG3 must be exactly 32 octets")
        if not hmac.compare_digest(expected, bytes(msg3)):
            raise MacInvalid("initiator MAC rejected")
        self.shared = shared
        self.transcript = StsTranscript(pub_i, self.keypair.public, sig_i, sig_r, mac_r, bytes(msg3))


# channel-driven runner -------------------------------------------------

class _Endpoint:
    def __init__(self, inbox, outbox, timeout):
        self._inbox, self._outbox, self._timeout = inbox, outbox, timeout

    def send(self, data: bytes) -> None:
        self._outbox.put(bytes(data))

    def recv(self) -> bytes:
        try:
            return self._inbox.get(timeout=self._timeout)
        except queue.Empty:
            raise HandshakeError("channel timed out") from None


def channel_pair(timeout: float = 5.0):
    """Two connected in-process endpoints with ``send``/``recv``."""
    a, b = queue.Queue(), queue.Queue()
    return _Endpoint(a, b, timeout), _Endpoint(b, a, timeout)


def _abort(endpoint):
    # empty message tells the peer to stop waiting
    endpoint.send(b"")


def run_initiator(party: Initiator, endpoint):
    try:
        endpoint.send(party.start())
        msg2 = endpoint.recv()
        if not msg2:
            raise HandshakeError("peer aborted")
        endpoint.send(party.finish(msg2))
    except HandshakeError:
        _abort(endpoint)
        raise
    return party.shared, party.transcript


def run_responder(party: Responder, endpoint):
    try:
        msg1 = endpoint.recv()
        if not msg1:
            raise HandshakeError("peer aborted")
        endpoint.send(party.respond(msg1))
        msg3 = endpoint.recv()
        if not msg3:
            raise HandshakeError("peer aborted")
        party.finish(msg3)
    except HandshakeError:
        _abort(endpoint)
        raise
    return party.shared, party.transcript


def sts_handshake(initiator: Initiator, responder: Responder, channel=None):
    """Run both parties on their own threads over a duplex channel.

    Returns ``(initiator_result, responder_result)``, each a
    ``(SharedVector, StsTranscript)`` pair.  If either side aborts, the first
    HandshakeError raised is re-raised and no key material is returned.
    """
    ep_i, ep_r = channel or channel_pair()
    results, errors = {}, {}

    def run(name, fn, party, ep):
        try:
            results[name] = fn(party, ep)
        except HandshakeError as exc:
            errors[name] = exc

    threads = [
        threading.Thread(target=run, args=("i", run_initiator, initiator, ep_i)),
        threading.Thread(target=run, args=("r", run_responder, responder, ep_r)),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        # prefer the root cause over the "peer aborted" echo
        for exc in errors.values():
            if str(exc) != "peer aborted":
                raise exc
        raise next(iter(errors.values()))
    return results["i"], results["r"]
