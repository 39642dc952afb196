import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from qbnf.families import builtin_frequencies
from qbnf.symbol import SymbolSpace, Symbol, hermitian_part

settings.register_profile(
    "qbnf", max_examples=120, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("qbnf")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden_space():
    return SymbolSpace(builtin_frequencies("golden_1x2"), [[0.5]])


@pytest.fixture(scope="session")
def golden2_space():
    return SymbolSpace(builtin_frequencies("golden_2x2"), [[0.5, 0.0], [0.0, 0.5]])


def random_symbol(rng, space, n_atoms=5, pmax=2, qmax=2, hermitian=False, scale=1.0):
    atoms = []
    for _ in range(n_atoms):
        p = rng.integers(-pmax, pmax + 1, space.s)
        q = rng.integers(-qmax, qmax + 1, space.l)
        c = scale * complex(rng.normal(), rng.normal())
        atoms.append((p, q, c))
    F = space.from_atoms(atoms)
    return hermitian_part(F) if hermitian else F


@st.composite
def symbols(draw, space, max_atoms=6, pmax=3, qmax=3, q_zero=False):
    """Random finite symbols over ``space``."""
    n = draw(st.integers(1, max_atoms))
    ints = st.integers(-pmax, pmax)
    qints = st.integers(-qmax, qmax)
    mag = st.floats(-1.0, 1.0, allow_nan=False)
    atoms = []
    for _ in range(n):
        p = draw(st.lists(ints, min_size=space.s, max_size=space.s))
        q = [0] * space.l if q_zero else draw(st.lists(qints, min_size=space.l, max_size=space.l))
        atoms.append((p, q, complex(draw(mag), draw(mag))))
    return space.from_atoms(atoms)


def interior_block(op, width):
    mask = np.abs(op.basis).max(axis=1) <= op.N - width
    return mask
