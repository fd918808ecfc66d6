"""Joint parameter densities on regular grids.

A :class:`ParameterGrid` stores density values (not probability masses) at
the nodes of an equidistant lattice with one to three axes.  The density is
normalized with trapezoidal node volumes, ``sum(weights * volumes) == 1``
(interior nodes own a full cell, nodes on a face of the box own the matching
fraction), so a uniform density on an axis of length L has weight 1/L and the
entropy reported by :func:`entropy` is a differential entropy whose value
does not drift with the grid resolution.

Grids are treated as immutable values: :func:`bayes_update` and
:func:`condition` return new instances and never touch their input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

EVIDENCE_FLOOR = 1e-300


class DegenerateEvidenceError(ValueError):
    """The observed outcome has (numerically) zero marginal probability."""

    def __init__(self, evidence: float, iteration: int | None = None):
        self.evidence = evidence
        self.iteration = iteration
        where = "" if iteration is None else f" at iteration {iteration}"
        super().__init__(f"marginal evidence {evidence:.3e} below {EVIDENCE_FLOOR:g}{where}")


@dataclass(frozen=True)
class ParameterAxis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        problems = axis_problems(self.name, self.lo, self.hi, self.count)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @cached_property
    def values(self) -> np.ndarray:
        v = np.linspace(self.lo, self.hi, self.count)
        v.setflags(write=False)
        return v

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def quadrature(self) -> np.ndarray:
        """Trapezoid weights of the nodes."""
        w = np.full(self.count, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    def to_dict(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "count": self.count}


def axis_problems(name, lo, hi, count) -> list[str]:
    """Return human-readable violations for an axis definition (empty if valid)."""
    problems = []
    if not (math.isfinite(lo) and math.isfinite(hi)):
        problems.append(f"axis {name!r}: bounds must be finite")
    elif not hi > lo:
        problems.append(f"axis {name!r}: hi > lo required (got lo={lo}, hi={hi})")
    if int(count) != count or count < 2:
        problems.append(f"axis {name!r}: count ≥ 2 required (got {count})")
    return problems


@dataclass(frozen=True)
class UniformPrior:
    pass


@dataclass(frozen=True)
class GaussianPrior:
    """Independent per-axis normal marginals, truncated to the axis range.

    An infinite std leaves that axis flat.
    """

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "std", tuple(math.inf if v is None else float(v) for v in self.std))
        if len(self.mean) != len(self.std):
            raise ValueError("mean and std must have one entry per axis")
        for s in self.std:
            if not s > 0:
                raise ValueError(f"Gaussian prior std must be positive (got {s})")


@dataclass(frozen=True, eq=False)
class ParameterGrid:
    axes: tuple[ParameterAxis, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(ax.count for ax in self.axes)
        if not 1 <= len(self.axes) <= 3:
            raise ValueError("a grid has between one and three axes")
        if self.weights.shape != shape:
            raise ValueError(f"weights shape {self.weights.shape} != axes shape {shape}")
        self.weights.setflags(write=False)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(ax.name for ax in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def cell_volume(self) -> float:
        """Volume of an interior cell."""
        return float(np.prod([ax.step for ax in self.axes]))

    @cached_property
    def volumes(self) -> np.ndarray:
        """Trapezoidal volume owned by each node."""
        return _outer([ax.quadrature for ax in self.axes])

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (sparse meshgrid)."""
        return tuple(np.meshgrid(*[ax.values for ax in self.axes], indexing="ij", sparse=True))

    def box_nodes(self, box: tuple[slice, ...]) -> tuple[np.ndarray, ...]:
        """Sparse coordinate arrays restricted to an index box."""
        return tuple(
            np.meshgrid(*[ax.values[b] for ax, b in zip(self.axes, box)], indexing="ij", sparse=True)
        )

    def masses(self) -> np.ndarray:
        return self.weights * self.volumes

    def total_mass(self) -> float:
        return float(np.sum(self.weights * self.volumes))

    def axis_index(self, name: str) -> int:
        return self.names.index(name)

    def with_weights(self, weights: np.ndarray) -> "ParameterGrid":
        return ParameterGrid(self.axes, np.ascontiguousarray(weights, dtype=float))

    def support_box(self, mass_tol: float = 1e-12) -> tuple[slice, ...]:
        """Smallest index box whose complement holds at most `mass_tol` of the mass.

        Each axis gives up at most ``mass_tol / (2 * ndim)`` on either side,
        judged on its marginal.
        """
        m = self.masses()
        budget = mass_tol / (2 * m.ndim)
        box = []
        for k in range(m.ndim):
            marg = m.sum(axis=tuple(j for j in range(m.ndim) if j != k))
            cum = np.cumsum(marg)
            lo = int(np.searchsorted(cum, budget, side="right"))
            tail = np.cumsum(marg[::-1])
            hi = marg.size - int(np.searchsorted(tail, budget, side="right"))
            lo = min(lo, marg.size - 1)
            hi = max(hi, lo + 1)
            box.append(slice(lo, hi))
        return tuple(box)

    def to_json(self) -> str:
        return json.dumps(
            {"axes": [ax.to_dict() for ax in self.axes], "weights": self.weights.ravel().tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "ParameterGrid":
        raw = json.loads(text)
        axes = tuple(ParameterAxis(**a) for a in raw["axes"])
        w = np.asarray(raw["weights"], dtype=float).reshape([a.count for a in axes])
        return cls(axes, w)


@dataclass(frozen=True)
class PosteriorSummary:
    names: tuple[str, ...]
    mean: tuple[float, ...]
    std: tuple[float, ...]
    ci95: tuple[tuple[float, float], ...]
    ci_method: str = "central 95%, node-midpoint CDF with linear interpolation"

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": list(self.mean),
            "std": list(self.std),
            "ci95": [list(c) for c in self.ci95],
            "ci_method": self.ci_method,
        }

    def __getitem__(self, name: str) -> tuple[float, float]:
        k = self.names.index(name)
        return self.mean[k], self.std[k]


def _outer(vectors) -> np.ndarray:
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


def make_grid(axes: Sequence[ParameterAxis], prior=UniformPrior()) -> ParameterGrid:
    axes = tuple(axes)
    if isinstance(prior, UniformPrior):
        w = np.ones([ax.count for ax in axes])
    elif isinstance(prior, GaussianPrior):
        if len(prior.mean) != len(axes):
            raise ValueError("Gaussian prior needs one (mean, std) per axis")
        w = _outer([np.exp(-0.5 * ((ax.values - mu) / sd) ** 2)
                    for ax, mu, sd in zip(axes, prior.mean, prior.std)])
    else:
        raise TypeError(f"unsupported prior {prior!r}")
    grid = ParameterGrid(axes, w)
    total = grid.total_mass()
    if not total > 0:
        raise ValueError("prior has no mass on the grid")
    return grid.with_weights(w / total)


def _likelihood(grid: ParameterGrid, model, xi, y: int) -> np.ndarray:
    p1 = np.broadcast_to(model.prob_one(grid.nodes, xi), grid.shape)
    return p1 if y == 1 else 1.0 - p1


def marginal_evidence(grid: ParameterGrid, model, xi, y: int) -> float:
    """Probability of outcome ``y`` at design ``xi`` under the grid density."""
    lik = _likelihood(grid, model, xi, y)
    return float(np.sum(lik * grid.masses()))


def bayes_update(grid: ParameterGrid, model, xi, y: int) -> ParameterGrid:
    if y not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {y!r}")
    post = _likelihood(grid, model, xi, y) * grid.weights
    evidence = float(np.sum(post * grid.volumes))
    if not evidence >= EVIDENCE_FLOOR:
        raise DegenerateEvidenceError(evidence)
    return grid.with_weights(post / evidence)


def condition(grid: ParameterGrid, model, dataset) -> ParameterGrid:
    """Posterior after all outcomes in `dataset` at once.

    Mathematically identical to chaining :func:`bayes_update` over the
    dataset in any order; works in log space so that thousands of outcomes
    do not underflow.
    """
    loglik = np.zeros(grid.shape)
    for xi, n1, n0 in dataset.groups():
        p1 = np.broadcast_to(model.prob_one(grid.nodes, xi), grid.shape)
        with np.errstate(divide="ignore"):
            if n1:
                loglik = loglik + n1 * np.log(p1)
            if n0:
                loglik = loglik + n0 * np.log1p(-p1)
    with np.errstate(divide="ignore"):
        logpost = loglik + np.log(grid.weights)
    top = logpost.max()
    if not np.isfinite(top):
        raise DegenerateEvidenceError(0.0)
    post = np.exp(logpost - top)
    return grid.with_weights(post / np.sum(post * grid.volumes))


def entropy(grid: ParameterGrid) -> float:
    """Differential entropy in nats, with 0 ln 0 taken as 0."""
    w = grid.weights
    pos = w > 0
    return float(-np.sum((w * grid.volumes)[pos] * np.log(w[pos])))


def _quantile(values: np.ndarray, mass: np.ndarray, level: float) -> float:
    cdf = np.cumsum(mass) - 0.5 * mass
    return float(np.interp(level, cdf, values))


def summarize(grid: ParameterGrid, level: float = 0.95) -> PosteriorSummary:
    m = grid.masses()
    m = m / m.sum()
    means, stds, cis = [], [], []
    for k, ax in enumerate(grid.axes):
        marg = m.sum(axis=tuple(j for j in range(m.ndim) if j != k))
        x = ax.values
        mu = float(marg @ x)
        sd = math.sqrt(max(float(marg @ (x - mu) ** 2), 0.0))
        lo = _quantile(x, marg, (1 - level) / 2)
        hi = _quantile(x, marg, (1 + level) / 2)
        means.append(mu)
        stds.append(sd)
        cis.append((min(lo, mu), max(hi, mu)))
    return PosteriorSummary(grid.names, tuple(means), tuple(stds), tuple(cis))
