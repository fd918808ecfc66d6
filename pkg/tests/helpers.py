"""Small models and strategies shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

from ionscope.grid import ParameterAxis, ParameterGrid, make_grid


class TableModel:
    """p(1) given node by node: prob_one ignores xi unless `table` is callable."""

    kind = "table"
    design_dim = 1

    def __init__(self, table, names=("t",)):
        self.table = table
        self.param_names = tuple(names)

    def prob_one(self, theta, xi):
        if callable(self.table):
            return self.table(theta, xi)
        return np.asarray(self.table, dtype=float)


class ConstantModel(TableModel):
    def __init__(self, p, names=("t",)):
        super().__init__(lambda theta, xi: np.full(np.broadcast(*theta).shape, p), names)


def random_grid(rng, ndim=None, max_count=9, spiky=False) -> ParameterGrid:
    ndim = ndim or int(rng.integers(1, 4))
    axes = []
    for k in range(ndim):
        lo = float(rng.uniform(-5, 5))
        axes.append(ParameterAxis(f"p{k}", lo, lo + float(rng.uniform(0.1, 10)), int(rng.integers(2, max_count + 1))))
    g = make_grid(axes)
    w = rng.random(g.shape) ** (8 if spiky else 1)
    if spiky:
        w[rng.random(g.shape) < 0.3] = 0.0
        w.flat[rng.integers(w.size)] = 1.0
    return g.with_weights(w / np.sum(w * g.volumes))


@st.composite
def grids(draw, ndim=None, max_count=7):
    seed = draw(st.integers(0, 2**32 - 1))
    spiky = draw(st.booleans())
    return random_grid(np.random.default_rng(seed), ndim, max_count, spiky)


def synthetic_edge_data(seed, n=10_000, theta=(0.0, 11.0, 0.95), span=44.0, designs=201):
    """Edge outcomes at `n` probes drawn from `designs` fixed positions in [-span, span]."""
    from ionscope.estimation import Dataset
    from ionscope.models import EdgeModel

    rng = np.random.default_rng([seed, 11])
    xis = rng.choice(np.linspace(-span, span, designs), n)
    p = EdgeModel().prob_one_data(theta, xis)
    return Dataset(xis, (rng.random(n) < p).astype(np.int64))
