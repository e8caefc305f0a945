"""Key derivation (HKDF-SHA-256) and the counter-mode keystreams.

Every stream in the cipher is built from one primitive: HMAC-SHA-256 keyed by
a 32-octet derived key, evaluated over a big-endian counter.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from .errors import InvalidParameters, OutLenTooLarge
from .field import FieldCtx, i2osp, os2ip

HASH_LEN = 32
SALT_LEN = 32
NONCE_LEN = 16

LABEL_MASK = b"PVC/mask"
LABEL_COLS = b"PVC/cols"
LABEL_MAC = b"PVC/mac"
LABEL_PAD = b"PVC/pad"


def _hmac(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


def hkdf_extract(salt: bytes, ikm: bytes) -> bytes:
    # an empty salt is equivalent to HashLen zero octets (RFC 5869)
    return _hmac(salt or bytes(HASH_LEN), ikm)


def hkdf_expand(prk: bytes, info: bytes | str, out_len: int) -> bytes:
    if isinstance(info, str):
        info = info.encode()
    if out_len > 255 * HASH_LEN:
        raise OutLenTooLarge(f"HKDF cannot produce {out_len} octets")
    okm, block = b"", b""
    counter = 1
    while len(okm) < out_len:
        block = _hmac(prk, block + info + bytes([counter]))
        okm += block
        counter += 1
    return okm[:out_len]


@dataclass(frozen=True)
class DerivedKeys:
    prk: bytes
    k_mask: bytes
    k_cols: bytes
    k_mac: bytes
    k_pad: bytes

    def __repr__(self):
        return "DerivedKeys(<redacted>)"


@dataclass(frozen=True)
class SessionParams:
    """Per-message public values carried in the ciphertext header."""

    salt: bytes
    nonce: bytes
    m: int
    n: int
    msg_len: int

    def __post_init__(self):
        if len(self.salt) != SALT_LEN:
            raise InvalidParameters(f"salt must be {SALT_LEN} octets")
        if len(self.nonce) != NONCE_LEN:
            raise InvalidParameters(f"nonce must be {NONCE_LEN} octets")
        if self.m < 3 or self.n < 3:
            raise InvalidParameters("shape must be at least 3x3")
        if not 0 <= self.msg_len <= self.m * self.n:
            raise InvalidParameters("message length does not fit the shape")


def encode_shared(shared, ctx: FieldCtx) -> bytes:
    """Fixed-width concatenation of the shared vector's three components."""
    return b"".join(i2osp(k, ctx.octet_len) for k in shared)


def derive_keys(shared, salt: bytes, ctx: FieldCtx) -> DerivedKeys:
    prk = hkdf_extract(salt, encode_shared(shared, ctx))
    return DerivedKeys(
        prk=prk,
        k_mask=hkdf_expand(prk, LABEL_MASK, HASH_LEN),
        k_cols=hkdf_expand(prk, LABEL_COLS, HASH_LEN),
        k_mac=hkdf_expand(prk, LABEL_MAC, HASH_LEN),
        k_pad=hkdf_expand(prk, LABEL_PAD, HASH_LEN),
    )


def ctr_stream(key: bytes, length: int) -> bytes:
    """HMAC(key, I2OSP(t, 8)) for t = 0, 1, ... truncated to ``length`` octets."""
    out = bytearray()
    t = 0
    while len(out) < length:
        out += _hmac(key, i2osp(t, 8))
        t += 1
    return bytes(out[:length])


class _CtrReader:
    def __init__(self, key: bytes):
        self.key = key
        self.t = 0
        self.buf = b""

    def read(self, k: int) -> bytes:
        while len(self.buf) < k:
            self.buf += _hmac(self.key, i2osp(self.t, 8))
            self.t += 1
        out, self.buf = self.buf[:k], self.buf[k:]
        return out


def mask_matrix(keys: DerivedKeys, m: int, n: int, ctx: FieldCtx, *, strict: bool = False):
    """The m x n mask R as a list of rows.

    Default mode reduces each ``octet_len``-octet chunk modulo p, exactly as
    the scheme prescribes (slightly biased when p is small).  ``strict=True``
    rejects chunks at or above the largest multiple of p instead, which is
    unbiased but consumes a variable amount of stream and is NOT
    interoperable with the default mode.
    """
    L = ctx.octet_len
    count = m * n
    if strict:
        limit = (1 << (8 * L)) // ctx.p * ctx.p
        reader = _CtrReader(keys.k_mask)
        flat = []
        while len(flat) < count:
            v = os2ip(reader.read(L))
            if v < limit:
                flat.append(v % ctx.p)
    else:
        stream = ctr_stream(keys.k_mask, count * L)
        flat = [os2ip(stream[i * L:(i + 1) * L]) % ctx.p for i in range(count)]
    return [flat[r * n:(r + 1) * n] for r in range(m)]


def column_offset(keys: DerivedKeys, nonce: bytes, ell: int, ctx: FieldCtx) -> tuple[int, int, int]:
    """Keystream vector r_ell added to global ciphertext column ``ell`` (1-based)."""
    if ell < 1:
        raise InvalidParameters("column index is 1-based")
    prefix = nonce + i2osp(ell, 8)
    return tuple(os2ip(_hmac(keys.k_cols, prefix + i2osp(j, 1))) % ctx.p for j in (1, 2, 3))


def padding_bytes(keys: DerivedKeys, count: int) -> bytes:
    if count < 0:
        raise ValueError("count must be non-negative")
    return ctr_stream(keys.k_pad, count)
