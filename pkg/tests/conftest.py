import numpy as np
import pytest

from statenet import numerics as nm
from statenet.crf import LatticeScores


def make_lattice(rng, T, N, scale=1.0, tape=None):
    """Random raw lattice; wraps leaves on `tape` when given."""
    em = rng.uniform(-scale, scale, (T, N))
    tr = rng.uniform(-scale, scale, (N, N))
    st = rng.uniform(-scale, scale, N)
    if tape is None:
        return LatticeScores(nm.constant(em), nm.constant(tr), nm.constant(st))
    return LatticeScores(
        tape.leaf(em, name="emission"), tape.leaf(tr, name="transition"), tape.leaf(st, name="start")
    )


def constant_lattice(T, N, value=0.0):
    return LatticeScores(
        nm.constant(np.full((T, N), value)),
        nm.constant(np.full((N, N), value)),
        nm.constant(np.full(N, value)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
