"""3x3 matrix algebra over F_p and the secret key matrices V, U.

Blocks are tuples of three row tuples.  Row-vector convention: a block S is
encrypted as ``S @ V + delta @ U``, so S multiplies from the left.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateKey, InvalidParameters, Singular
from .field import FieldCtx

Block = tuple  # tuple[tuple[int, int, int], ...] of length 3

IDENTITY = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
ZERO = ((0, 0, 0), (0, 0, 0), (0, 0, 0))


def as_block(rows, ctx: FieldCtx | None = None) -> Block:
    rows = tuple(tuple(int(x) for x in r) for r in rows)
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise InvalidParameters("a block is exactly 3x3")
    if ctx is not None:
        rows = tuple(tuple(x % ctx.p for x in r) for r in rows)
    return rows


def mat_mul(A: Block, B: Block, ctx: FieldCtx, counter=None) -> Block:
    p = ctx.p
    if counter is not None:
        counter.add(field_mults=27, field_adds=18)
    return tuple(
        tuple((A[i][0] * B[0][j] + A[i][1] * B[1][j] + A[i][2] * B[2][j]) % p for j in range(3))
        for i in range(3)
    )


def mat_add(A: Block, B: Block, ctx: FieldCtx) -> Block:
    return tuple(tuple((a + b) % ctx.p for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mat_sub(A: Block, B: Block, ctx: FieldCtx) -> Block:
    return tuple(tuple((a - b) % ctx.p for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def transpose(A: Block) -> Block:
    return tuple(zip(*A))


def det(A: Block, ctx: FieldCtx) -> int:
    (a, b, c), (d, e, f), (g, h, i) = A
    return (a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)) % ctx.p


def mat_inv(A: Block, ctx: FieldCtx) -> Block:
    """Inverse via the adjugate: ``adj(A) / det(A)``."""
    p = ctx.p
    d = det(A, ctx)
    if d == 0:
        raise Singular("matrix is singular mod p")
    inv_d = pow(d, -1, p)
    (a, b, c), (d_, e, f), (g, h, i) = A
    adj = (
        (e * i - f * h, c * h - b * i, b * f - c * e),
        (f * g - d_ * i, a * i - c * g, c * d_ - a * f),
        (d_ * h - e * g, b * g - a * h, a * e - b * d_),
    )
    return tuple(tuple(x * inv_d % p for x in row) for row in adj)


def delta(i: int, j: int) -> Block:
    """Identity when the block's top-left row and column labels coincide."""
    return IDENTITY if i == j else ZERO


@dataclass(frozen=True)
class KeyMatrices:
    V: Block
    U: Block
    V_inv: Block

    def __repr__(self):
        return "KeyMatrices(<redacted>)"


def key_matrix_v(shared) -> Block:
    k1, k2, k3 = shared
    return ((0, k1, k1), (k2, 0, k2), (k3, k3, 0))


def key_matrix_u(shared) -> Block:
    k1, k2, k3 = shared
    return ((k1, 0, 0), (0, k2, 0), (0, 0, k3))


def build_key_matrices(shared, ctx: FieldCtx) -> KeyMatrices:
    k1, k2, k3 = shared
    if not all(1 <= k < ctx.p for k in shared):
        raise InvalidParameters("shared vector components must lie in [1, p-1]")
    V = key_matrix_v(shared)
    d = det(V, ctx)
    if d == 0 or d != 2 * k1 * k2 * k3 % ctx.p:
        raise DegenerateKey("det(V) must equal 2*k1*k2*k3 and be nonzero")
    return KeyMatrices(V=V, U=key_matrix_u(shared), V_inv=mat_inv(V, ctx))


def encrypt_block(S: Block, i: int, j: int, km: KeyMatrices, ctx: FieldCtx, counter=None) -> Block:
    """``S @ V + delta(i, j) @ U``."""
    C = mat_mul(S, km.V, ctx, counter)
    if counter is not None:
        # delta @ U is charged as 9 multiply-accumulates whether or not delta is zero
        counter.add(field_mults=9, field_adds=9)
    if i == j:
        C = mat_add(C, km.U, ctx)
    return C


def decrypt_block(C: Block, i: int, j: int, km: KeyMatrices, ctx: FieldCtx) -> Block:
    """``(C - delta(i, j) @ U) @ V^-1``."""
    if i == j:
        C = mat_sub(C, km.U, ctx)
    return mat_mul(C, km.V_inv, ctx)
