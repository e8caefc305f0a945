"""Plaintext <-> master matrix embedding and shifting-submatrix bookkeeping.

All positions here are 1-based (row, column), matching the block labels used
for the delta rule.  Matrices are lists of row lists of ints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import (
    BadLength, ByteRangeViolation, InvalidParameters, MessageTooLong, OutOfBounds, OverlapMismatch,
)
from .kdfstream import DerivedKeys, padding_bytes

RULE_STRIDE3 = 0x01
RULE_EXPLICIT = 0x02


def _stride_labels(size: int) -> tuple[int, ...]:
    last = size - 2
    labels = list(range(1, last + 1, 3))
    if labels[-1] != last:
        labels.append(last)
    return tuple(labels)


@dataclass(frozen=True)
class SsmIndexPlan:
    """Top-left labels of the 3x3 blocks and their enumeration order.

    Blocks are enumerated row-major over ``I x J``; block ``k`` (1-based)
    contributes global ciphertext columns ``3(k-1)+1 .. 3(k-1)+3``.
    """

    m: int
    n: int
    I: tuple[int, ...]
    J: tuple[int, ...]
    rule: int = RULE_STRIDE3

    def __post_init__(self):
        if self.m < 3 or self.n < 3:
            raise InvalidParameters("shape must be at least 3x3")
        for name, labels, size in (("I", self.I, self.m), ("J", self.J, self.n)):
            if not labels or list(labels) != sorted(set(labels)):
                raise InvalidParameters(f"{name} must be a non-empty strictly increasing list")
            if labels[0] < 1 or labels[-1] > size - 2:
                raise InvalidParameters(f"{name} labels must lie in [1, {size - 2}]")
            covered = set()
            for t in labels:
                covered.update((t, t + 1, t + 2))
            if len(covered) != size:
                raise InvalidParameters(f"{name} leaves some lines uncovered")

    @property
    def B(self) -> int:
        return len(self.I) * len(self.J)

    @cached_property
    def order(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i in self.I for j in self.J)

    def column_index(self, k: int, r: int) -> int:
        """Global 1-based column index of local column ``r`` of block ``k``."""
        return 3 * (k - 1) + r

    def block_of_column(self, ell: int) -> tuple[int, int]:
        k, r = divmod(ell - 1, 3)
        return k + 1, r + 1

    def blocks_covering(self, row: int, col: int) -> list[int]:
        """1-based block numbers whose footprint contains (row, col)."""
        return [
            k for k, (i, j) in enumerate(self.order, 1)
            if i <= row <= i + 2 and j <= col <= j + 2
        ]

    @cached_property
    def coverage(self) -> list[list[int]]:
        """Number of blocks covering each cell."""
        cov = [[0] * self.n for _ in range(self.m)]
        for i, j in self.order:
            for a in range(i - 1, i + 2):
                for b in range(j - 1, j + 2):
                    cov[a][b] += 1
        return cov


def plan_indices(m: int, n: int) -> SsmIndexPlan:
    """Stride-3 labels from 1, plus the last admissible label if missing."""
    if m < 3 or n < 3:
        raise InvalidParameters("shape must be at least 3x3")
    return SsmIndexPlan(m, n, _stride_labels(m), _stride_labels(n), RULE_STRIDE3)


def explicit_plan(m: int, n: int, I, J) -> SsmIndexPlan:
    return SsmIndexPlan(m, n, tuple(I), tuple(J), RULE_EXPLICIT)


def _capacity(m, n, start_row, start_col):
    if not (1 <= start_row <= m and 1 <= start_col <= n):
        raise OutOfBounds(f"start position ({start_row}, {start_col}) outside {m}x{n}")
    return m * n - ((start_row - 1) * n + (start_col - 1))


def embed(msg: bytes, m: int, n: int, start_row: int, start_col: int, keys: DerivedKeys):
    """Place ``msg`` row-major from the start cell; pad every other cell.

    Returns ``(M, L)``.  Padding comes from the session's padding stream, in
    row-major order over the cells not occupied by the message.
    """
    msg = bytes(msg)
    if len(msg) > _capacity(m, n, start_row, start_col):
        raise MessageTooLong(
            f"{len(msg)} bytes do not fit a {m}x{n} matrix from ({start_row}, {start_col})"
        )
    first = (start_row - 1) * n + (start_col - 1)
    pad = iter(padding_bytes(keys, m * n - len(msg)))
    flat = [0] * (m * n)
    for idx in range(m * n):
        if first <= idx < first + len(msg):
            flat[idx] = msg[idx - first]
        else:
            flat[idx] = next(pad)
    return [flat[r * n:(r + 1) * n] for r in range(m)], len(msg)


def extract_message(M, L: int, start_row: int, start_col: int) -> bytes:
    m, n = len(M), len(M[0])
    if L < 0 or L > _capacity(m, n, start_row, start_col):
        raise BadLength(f"length {L} exceeds the cells available from the start position")
    first = (start_row - 1) * n + (start_col - 1)
    out = bytearray()
    for idx in range(first, first + L):
        v = M[idx // n][idx % n]
        if not 0 <= v <= 255:
            raise ByteRangeViolation(f"cell {divmod(idx, n)} does not hold a byte value ({v})")
        out.append(v)
    return bytes(out)


def extract_block(Mp, i: int, j: int):
    m, n = len(Mp), len(Mp[0])
    if not (1 <= i <= m - 2 and 1 <= j <= n - 2):
        raise OutOfBounds(f"block ({i}, {j}) does not fit a {m}x{n} matrix")
    return tuple(tuple(Mp[a][j - 1:j + 2]) for a in range(i - 1, i + 2))


def reassemble(blocks, m: int, n: int):
    """Inverse of block extraction; overlapping cells must agree exactly.

    ``blocks`` is an iterable of ``(i, j, block)``.  Raises OverlapMismatch on
    the first disagreeing cell (1-based coordinates).
    """
    out = [[None] * n for _ in range(m)]
    for i, j, S in blocks:
        if not (1 <= i <= m - 2 and 1 <= j <= n - 2):
            raise OutOfBounds(f"block ({i}, {j}) does not fit a {m}x{n} matrix")
        for a in range(3):
            row = out[i - 1 + a]
            for b in range(3):
                v = S[a][b]
                cur = row[j - 1 + b]
                if cur is None:
                    row[j - 1 + b] = v
                elif cur != v:
                    raise OverlapMismatch((i + a, j + b), (cur, v))
    for r, row in enumerate(out, 1):
        for c, v in enumerate(row, 1):
            if v is None:
                raise InvalidParameters(f"cell ({r}, {c}) is not covered by any block")
    return out
