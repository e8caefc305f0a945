"""End-to-end encryption, decryption and the ``.pvc`` wire format.

Layout (all integers big-endian, W = octet length of p)::

    "PVC1" | version:1 | p:8 | g:3W | g^a:3W | salt:32 | nonce:16
    | m:2 | n:2 | L:4 | start_row:2 | start_col:2 | rule:1
    [rule 0x02: |I|:2 I:2*|I| |J|:2 J:2*|J|]
    | 3B columns, each 3W, in global column order
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass

from .codec import (
    RULE_EXPLICIT, RULE_STRIDE3, SsmIndexPlan, _capacity, embed, explicit_plan,
    extract_block, extract_message, plan_indices, reassemble,
)
from .errors import (
    HeaderMalformed, InvalidParameters, NonCanonicalElement, PaddingMismatch, ParseError,
)
from .field import FieldCtx, i2osp, is_primitive_root, os2ip
from .kdfstream import NONCE_LEN, SALT_LEN, column_offset, derive_keys, mask_matrix, padding_bytes
from .keyexchange import SharedVector, check_peer_public
from .matrixcore import build_key_matrices, decrypt_block, encrypt_block

MAGIC = b"PVC1"
VERSION = 0x01


@dataclass(frozen=True)
class Header:
    p: int
    g: tuple
    sender_public: tuple
    salt: bytes
    nonce: bytes
    m: int
    n: int
    msg_len: int
    start_row: int = 1
    start_col: int = 1
    indexing_rule: int = RULE_STRIDE3
    I: tuple = ()
    J: tuple = ()
    version: int = VERSION

    def plan(self) -> SsmIndexPlan:
        if self.indexing_rule == RULE_STRIDE3:
            return plan_indices(self.m, self.n)
        if self.indexing_rule == RULE_EXPLICIT:
            return explicit_plan(self.m, self.n, self.I, self.J)
        raise HeaderMalformed(f"unknown indexing rule 0x{self.indexing_rule:02x}")


@dataclass(frozen=True)
class Ciphertext:
    header: Header
    columns: tuple  # tuple of 3-tuples, global column order

    @property
    def B(self) -> int:
        return len(self.columns) // 3

    def elements(self) -> list[int]:
        return [x for col in self.columns for x in col]


def _check_shared(shared, ctx):
    shared = tuple(shared)
    if len(shared) != 3 or not all(isinstance(k, int) and 1 <= k < ctx.p for k in shared):
        raise InvalidParameters("shared vector components must lie in [1, p-1]")
    return shared


def _process_block(args):
    k, (i, j), Mp, km, ctx, keys, nonce, offsets, counter, trace = args
    S = extract_block(Mp, i, j)
    C = encrypt_block(S, i, j, km, ctx, counter)
    cols = []
    for r in range(3):
        col = (C[0][r], C[1][r], C[2][r])
        if offsets:
            ell = 3 * (k - 1) + r + 1
            off = column_offset(keys, nonce, ell, ctx)
            col = tuple((a + b) % ctx.p for a, b in zip(col, off))
            if counter is not None:
                counter.add(field_adds=3, hmac_calls=3)
        cols.append(col)
    if trace is not None:
        trace.append({"k": k, "i": i, "j": j, "S": S, "C": C, "columns": tuple(cols)})
    return cols


def encrypt(msg: bytes, *, ctx: FieldCtx, g, sender_public, shared, m: int, n: int,
            start=(1, 1), salt: bytes | None = None, nonce: bytes | None = None,
            plan: SsmIndexPlan | None = None, offsets: bool = True, strict_mask: bool = False,
            executor=None, counter=None, trace: list | None = None) -> Ciphertext:
    """Encrypt ``msg`` into an m x n master matrix.

    ``shared`` is the authenticated shared vector G and ``sender_public`` the
    sender's ephemeral public vector g^a (placed in the header so the receiver
    can rederive G).  Fresh salt and nonce are drawn from ``os.urandom`` unless
    given.

    ``executor`` (a ``concurrent.futures`` executor) processes blocks
    concurrently; output is identical to sequential processing.  ``offsets``
    switches off the per-column keystream and exists for layer-separation
    tests and the known-plaintext probe.  ``counter`` receives operation
    tallies, ``trace`` collects per-block S/C records.
    """
    shared = _check_shared(shared, ctx)
    sender_public = check_peer_public(sender_public, ctx)
    start_row, start_col = start
    salt = os.urandom(SALT_LEN) if salt is None else bytes(salt)
    nonce = os.urandom(NONCE_LEN) if nonce is None else bytes(nonce)
    if len(salt) != SALT_LEN or len(nonce) != NONCE_LEN:
        raise InvalidParameters("salt must be 32 octets and nonce 16 octets")
    plan = plan or plan_indices(m, n)
    if (plan.m, plan.n) != (m, n):
        raise InvalidParameters("index plan shape does not match the matrix shape")

    keys = derive_keys(shared, salt, ctx)
    km = build_key_matrices(shared, ctx)
    M, L = embed(msg, m, n, start_row, start_col, keys)
    R = mask_matrix(keys, m, n, ctx, strict=strict_mask)
    p = ctx.p
    Mp = [[(a + b) % p for a, b in zip(rm, rr)] for rm, rr in zip(M, R)]

    jobs = [(k, ij, Mp, km, ctx, keys, nonce, offsets, counter, trace)
            for k, ij in enumerate(plan.order, 1)]
    if executor is None:
        per_block = [_process_block(job) for job in jobs]
    else:
        per_block = list(executor.map(_process_block, jobs))
    if trace is not None:
        trace.sort(key=lambda rec: rec["k"])

    header = Header(
        p=p, g=tuple(g), sender_public=sender_public, salt=salt, nonce=nonce,
        m=m, n=n, msg_len=L, start_row=start_row, start_col=start_col,
        indexing_rule=plan.rule,
        I=plan.I if plan.rule == RULE_EXPLICIT else (),
        J=plan.J if plan.rule == RULE_EXPLICIT else (),
    )
    return Ciphertext(header, tuple(col for cols in per_block for col in cols))


def _validate_header(h: Header, ctx: FieldCtx):
    if h.version != VERSION:
        raise HeaderMalformed(f"unsupported version {h.version}")
    if len(set(h.g)) != 3 or not all(is_primitive_root(x, ctx) for x in h.g):
        raise HeaderMalformed("header primitive vector is invalid")
    if h.m < 3 or h.n < 3:
        raise HeaderMalformed("shape must be at least 3x3")
    try:
        cap = _capacity(h.m, h.n, h.start_row, h.start_col)
    except IndexError as exc:
        raise HeaderMalformed(str(exc)) from None
    if h.msg_len > cap:
        raise HeaderMalformed("message length exceeds the matrix capacity")


def decrypt(ct: Ciphertext, *, secret: int | None = None, shared=None,
            offsets: bool = True, strict_mask: bool = False, executor=None) -> bytes:
    """Recover the plaintext.

    Give the receiver's ephemeral ``secret`` b (G is rederived from the
    header's g^a) or the ``shared`` vector directly.  Raises an
    IntegrityError subclass when overlapping blocks disagree, a padding cell
    differs from the regenerated padding, or a message cell is not a byte.
    """
    h = ct.header
    try:
        ctx = FieldCtx(h.p)
    except InvalidParameters as exc:
        raise HeaderMalformed(str(exc)) from None
    _validate_header(h, ctx)
    try:
        plan = h.plan()
    except InvalidParameters as exc:
        raise HeaderMalformed(str(exc)) from None
    if len(ct.columns) != 3 * plan.B:
        raise HeaderMalformed(f"expected {3 * plan.B} columns, got {len(ct.columns)}")

    if shared is None:
        if secret is None:
            raise InvalidParameters("decrypt needs the receiver secret or the shared vector")
        if not 1 <= secret <= ctx.p - 2:
            raise InvalidParameters("secret exponent must lie in [1, p-2]")
        pub = check_peer_public(h.sender_public, ctx)
        shared = SharedVector(*(pow(x, secret, ctx.p) for x in pub))
    shared = _check_shared(shared, ctx)

    keys = derive_keys(shared, h.salt, ctx)
    km = build_key_matrices(shared, ctx)
    R = mask_matrix(keys, h.m, h.n, ctx, strict=strict_mask)
    p = ctx.p

    def undo(k_ij):
        k, (i, j) = k_ij
        cols = []
        for r in range(3):
            ell = 3 * (k - 1) + r + 1
            col = ct.columns[ell - 1]
            if offsets:
                off = column_offset(keys, h.nonce, ell, ctx)
                col = tuple((a - b) % p for a, b in zip(col, off))
            cols.append(col)
        C = tuple(tuple(cols[r][row] for r in range(3)) for row in range(3))
        return i, j, decrypt_block(C, i, j, km, ctx)

    items = list(enumerate(plan.order, 1))
    blocks = list(map(undo, items)) if executor is None else list(executor.map(undo, items))
    Mp = reassemble(blocks, h.m, h.n)
    M = [[(a - b) % p for a, b in zip(rm, rr)] for rm, rr in zip(Mp, R)]

    first = (h.start_row - 1) * h.n + (h.start_col - 1)
    pad = iter(padding_bytes(keys, h.m * h.n - h.msg_len))
    for idx in range(h.m * h.n):
        if first <= idx < first + h.msg_len:
            continue
        if M[idx // h.n][idx % h.n] != next(pad):
            raise PaddingMismatch(f"padding cell {divmod(idx, h.n)} was altered")
    return extract_message(M, h.msg_len, h.start_row, h.start_col)


# serialization ---------------------------------------------------------

def serialize(ct: Ciphertext) -> bytes:
    h = ct.header
    ctx_len = (h.p.bit_length() + 7) // 8
    vec = lambda v: b"".join(i2osp(x, ctx_len) for x in v)  # noqa: E731
    out = bytearray(MAGIC)
    out.append(h.version)
    out += i2osp(h.p, 8) + vec(h.g) + vec(h.sender_public) + h.salt + h.nonce
    out += struct.pack(">HHIHHB", h.m, h.n, h.msg_len, h.start_row, h.start_col, h.indexing_rule)
    if h.indexing_rule == RULE_EXPLICIT:
        for labels in (h.I, h.J):
            out += struct.pack(">H", len(labels))
            out += b"".join(struct.pack(">H", t) for t in labels)
    for col in ct.columns:
        out += vec(col)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, k: int, what: str) -> bytes:
        if self.off + k > len(self.data):
            raise ParseError(f"truncated while reading {what}", self.off)
        out = self.data[self.off:self.off + k]
        self.off += k
        return out

    def uint(self, k: int, what: str) -> int:
        return os2ip(self.take(k, what))


def deserialize(data: bytes) -> Ciphertext:
    data = bytes(data)
    rd = _Reader(data)
    if rd.take(4, "magic") != MAGIC:
        raise ParseError("bad magic", 0)
    version = rd.uint(1, "version")
    if version != VERSION:
        raise HeaderMalformed(f"unsupported version {version}", 4)
    p_off = rd.off
    p = rd.uint(8, "p")
    try:
        ctx = FieldCtx(p)
    except InvalidParameters as exc:
        raise HeaderMalformed(str(exc), p_off) from None
    W = ctx.octet_len

    def element(what):
        off = rd.off
        x = rd.uint(W, what)
        if x >= p:
            raise NonCanonicalElement(f"{what} = {x} is not reduced mod p", off)
        return x

    g = tuple(element("g") for _ in range(3))
    pub = tuple(element("sender public") for _ in range(3))
    salt = rd.take(SALT_LEN, "salt")
    nonce = rd.take(NONCE_LEN, "nonce")
    m, n, L, sr, sc, rule = struct.unpack(">HHIHHB", rd.take(13, "shape fields"))
    I = J = ()
    if rule == RULE_EXPLICIT:
        I = tuple(rd.uint(2, "I") for _ in range(rd.uint(2, "|I|")))
        J = tuple(rd.uint(2, "J") for _ in range(rd.uint(2, "|J|")))
    elif rule != RULE_STRIDE3:
        raise HeaderMalformed(f"unknown indexing rule 0x{rule:02x}", rd.off - 1)
    header = Header(p, g, pub, salt, nonce, m, n, L, sr, sc, rule, I, J, version)
    try:
        plan = header.plan()
    except InvalidParameters as exc:
        raise HeaderMalformed(str(exc), rd.off) from None
    columns = tuple(tuple(element("column element") for _ in range(3)) for _ in range(3 * plan.B))
    if rd.off != len(data):
        raise ParseError(f"{len(data) - rd.off} trailing octets", rd.off)
    return Ciphertext(header, columns)


def column_offset_in_bytes(header: Header, ell: int, j: int = 1) -> int:
    """Byte offset of element ``j`` (1-based) of column ``ell`` in the serialized form."""
    W = (header.p.bit_length() + 7) // 8
    size = 4 + 1 + 8 + 6 * W + SALT_LEN + NONCE_LEN + 13
    if header.indexing_rule == RULE_EXPLICIT:
        size += 4 + 2 * (len(header.I) + len(header.J))
    return size + ((ell - 1) * 3 + (j - 1)) * W
