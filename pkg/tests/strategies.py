"""Shared hypothesis strategies."""
import numpy as np
from hypothesis import strategies as st

from entropyctl import qcore

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def density_matrices(draw, rank=None):
    rng = np.random.default_rng(draw(seeds))
    r = draw(st.integers(1, 4)) if rank is None else rank
    return qcore.random_density_matrix(rng, 4, r)


@st.composite
def hermitian(draw):
    rng = np.random.default_rng(draw(seeds))
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return a + a.conj().T


controls3 = st.tuples(
    st.floats(-30, 30), st.floats(0, 10), st.floats(0, 10)
)
