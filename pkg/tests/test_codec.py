import random

import pytest
from hypothesis import given, settings, strategies as st

from pvc import worked_example as ex
from pvc.codec import (
    RULE_EXPLICIT, embed, explicit_plan, extract_block, extract_message, plan_indices, reassemble,
)
from pvc.errors import (
    BadLength, ByteRangeViolation, InvalidParameters, MessageTooLong, OutOfBounds, OverlapMismatch,
)
from pvc.kdfstream import derive_keys, padding_bytes


@pytest.fixture(scope="module")
def keys(ctx):
    return derive_keys(ex.SHARED, bytes(32), ctx)


@pytest.mark.parametrize("shape, I, J, B", [
    ((8, 10), (1, 4, 6), (1, 4, 7, 8), 12),
    ((5, 7), (1, 3), (1, 4, 5), 6),
    ((12, 23), (1, 4, 7, 10), (1, 4, 7, 10, 13, 16, 19, 21), 32),
    ((3, 3), (1,), (1,), 1),
    ((6, 9), (1, 4), (1, 4, 7), 6),
])
def test_plan_examples(shape, I, J, B):
    plan = plan_indices(*shape)
    assert (plan.I, plan.J, plan.B) == (I, J, B)
    assert plan.order[0] == (I[0], J[0])


def test_every_cell_covered():
    for m in range(3, 41):
        for n in range(3, 41):
            plan = plan_indices(m, n)
            assert all(c >= 1 for row in plan.coverage for c in row)
            # stride 3 means at most two blocks per axis touch any line
            assert max(max(row) for row in plan.coverage) <= 4


def test_overlap_cells_8x10():
    plan = plan_indices(8, 10)
    assert plan.blocks_covering(1, 1) == [1]
    assert plan.blocks_covering(6, 9) == [7, 8, 11, 12]
    # row 6 is shared by I=4 and I=6; columns 8, 9 by J=7 and J=8
    assert sum(1 for row in plan.coverage for c in row if c > 1) == 10 + 7 * 2


def test_column_bijection():
    plan = plan_indices(12, 23)
    seen = set()
    for k in range(1, plan.B + 1):
        for r in (1, 2, 3):
            ell = plan.column_index(k, r)
            assert plan.block_of_column(ell) == (k, r)
            seen.add(ell)
    assert seen == set(range(1, 3 * plan.B + 1))


def test_plan_rejects_small_or_uncovered():
    with pytest.raises(InvalidParameters):
        plan_indices(2, 5)
    with pytest.raises(InvalidParameters):
        explicit_plan(8, 10, (1, 6), (1, 4, 7, 8))
    with pytest.raises(InvalidParameters):
        explicit_plan(8, 10, (1, 4, 7), (1, 4, 7, 8))
    plan = explicit_plan(8, 10, (1, 3, 6), (1, 2, 5, 8))
    assert plan.rule == RULE_EXPLICIT and plan.B == 12


def test_embed_reference_start(keys):
    M, L = embed(ex.MESSAGE, 8, 10, 2, 3, keys)
    assert L == 34
    assert M[1][2] == ord("P") == 80
    assert M[1][3:10] == list(b"eace at")
    assert extract_message(M, L, 2, 3) == ex.MESSAGE
    # padding cells come from the padding stream in row-major order
    pad = padding_bytes(keys, 80 - 34)
    flat = [v for row in M for v in row]
    assert flat[:12] == list(pad[:12])
    assert flat[12 + 34:] == list(pad[12:])


def test_embed_capacity(keys):
    embed(bytes(80), 8, 10, 1, 1, keys)
    embed(bytes(1), 8, 10, 8, 10, keys)
    with pytest.raises(MessageTooLong):
        embed(bytes(81), 8, 10, 1, 1, keys)
    with pytest.raises(MessageTooLong):
        embed(bytes(2), 8, 10, 8, 10, keys)
    with pytest.raises(OutOfBounds):
        embed(b"x", 8, 10, 9, 1, keys)


def test_extract_rejects(keys):
    M, _ = embed(b"hi", 3, 3, 1, 1, keys)
    with pytest.raises(BadLength):
        extract_message(M, 10, 1, 1)
    M[0][0] = 300
    with pytest.raises(ByteRangeViolation):
        extract_message(M, 2, 1, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 15), st.integers(3, 15), st.data())
def test_split_reassemble_roundtrip(m, n, data):
    rnd = random.Random(data.draw(st.integers(0, 2**32)))
    M = [[rnd.randrange(12347) for _ in range(n)] for _ in range(m)]
    plan = plan_indices(m, n)
    blocks = [(i, j, extract_block(M, i, j)) for i, j in plan.order]
    assert reassemble(blocks, m, n) == M


def test_reassemble_detects_overlap_disagreement():
    M = [[r * 10 + c for c in range(10)] for r in range(8)]
    plan = plan_indices(8, 10)
    blocks = [[i, j, [list(row) for row in extract_block(M, i, j)]] for i, j in plan.order]
    # block (1, 7) local (0, 2) is cell (1, 9), also covered by block (1, 8)
    blocks[2][2][0][2] += 1
    with pytest.raises(OverlapMismatch) as info:
        reassemble(blocks, 8, 10)
    assert info.value.cell == (1, 9)


def test_reassemble_missing_cells():
    M = [[0] * 5 for _ in range(5)]
    with pytest.raises(InvalidParameters):
        reassemble([(1, 1, extract_block(M, 1, 1))], 5, 5)


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=0, max_size=80), st.integers(1, 8), st.integers(1, 10))
def test_embed_extract_roundtrip(msg, r, c):
    keys = derive_keys((1, 2, 3), b"s" * 32, __import__("pvc").FieldCtx(12347))
    cap = 80 - ((r - 1) * 10 + c - 1)
    if len(msg) > cap:
        with pytest.raises(MessageTooLong):
            embed(msg, 8, 10, r, c, keys)
        return
    M, L = embed(msg, 8, 10, r, c, keys)
    assert extract_message(M, L, r, c) == msg
