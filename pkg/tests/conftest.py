import random

import pytest

from pvc.field import FieldCtx
from pvc.keyexchange import PrimitiveVector, derive_shared, generate_ephemeral


@pytest.fixture(scope="session")
def ctx():
    return FieldCtx(12347)


@pytest.fixture(scope="session")
def g(ctx):
    return PrimitiveVector(2, 5, 6).validate(ctx)


@pytest.fixture(scope="session")
def example_session(ctx, g):
    """Sender keypair, receiver keypair and shared vector for a=3, b=7."""
    a = generate_ephemeral(g, ctx, secret=3)
    b = generate_ephemeral(g, ctx, secret=7)
    return a, b, derive_shared(a, b.public, ctx)


@pytest.fixture
def rng():
    return random.Random(20261018)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        store[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
