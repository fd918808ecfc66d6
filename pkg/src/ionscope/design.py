"""Expected information gain and adaptive probe selection.

The loop implemented by :func:`run_experiment` is::

    repeat
        choose xi maximizing the expected entropy drop of the grid density
        fire one probe at xi, observe y in {0, 1}
        grid <- bayes_update(grid, model, xi, y)
    until the stop rule fires
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import (
    DegenerateEvidenceError,
    ParameterGrid,
    PosteriorSummary,
    bayes_update,
    entropy,
    marginal_evidence,
    summarize,
)
from .models import binary_entropy

OUTCOME_FLOOR = 1e-15


@dataclass(frozen=True)
class DesignWindow:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    candidates: int = 21
    levels: int = 5

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.ravel(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.ravel(self.hi)))
        problems = window_problems(self.lo, self.hi, self.candidates, self.levels)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, xi) -> bool:
        xi = np.ravel(xi)
        return all(l <= v <= h for l, v, h in zip(self.lo, xi, self.hi))


def window_problems(lo, hi, candidates, levels) -> list[str]:
    problems = []
    if len(lo) != len(hi) or len(lo) not in (1, 2):
        problems.append("design window needs matching lo/hi with 1 or 2 entries")
    else:
        for k, (l, h) in enumerate(zip(lo, hi)):
            if not (math.isfinite(l) and math.isfinite(h) and h > l):
                problems.append(f"design window dimension {k}: hi > lo required")
    if int(candidates) != candidates or candidates < 3:
        problems.append(f"candidates per level must be an integer ≥ 3 (got {candidates})")
    if int(levels) != levels or levels < 1:
        problems.append(f"levels must be an integer ≥ 1 (got {levels})")
    return problems


@dataclass(frozen=True)
class StopRule:
    max_probes: int
    target_std: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.max_probes) != self.max_probes or self.max_probes < 1:
            raise ValueError(f"max_probes must be an integer ≥ 1 (got {self.max_probes})")
        for name, v in self.target_std.items():
            if not v > 0:
                raise ValueError(f"target std for {name!r} must be positive")

    def reached(self, summary: PosteriorSummary) -> bool:
        if not self.target_std:
            return False
        return all(summary[name][1] <= tol for name, tol in self.target_std.items())


def _as_design(xi, dim):
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != dim or not np.all(np.isfinite(xi)):
        raise ValueError(f"design must be {dim} finite coordinate(s), got {xi}")
    return xi[0] if dim == 1 else xi


def utility(grid: ParameterGrid, model, xi) -> float:
    """Expected drop in differential entropy from one probe at `xi` (nats).

    Outcomes with marginal probability below 1e-15 are skipped.
    """
    xi = _as_design(xi, model.design_dim)
    h_prior = entropy(grid)
    total = 0.0
    informative = False
    for y in (0, 1):
        ev = marginal_evidence(grid, model, xi, y)
        if ev < OUTCOME_FLOOR:
            continue
        informative = True
        total += ev * (h_prior - entropy(bayes_update(grid, model, xi, y)))
    if not informative:
        raise DegenerateEvidenceError(0.0)
    return total


def gain_scorer(grid: ParameterGrid, model, mass_tol: float = 1e-9,
                exact: bool = False) -> Callable:
    """Return ``score(xis)``, the expected information gain of each design.

    Uses the identity "expected entropy drop = mutual information between
    outcome and parameters", which on a grid equals
    ``H(sum q p) - sum q H(p)`` with node masses q and H the Bernoulli
    entropy.  Nodes outside the box holding all but ``mass_tol / 2`` of the
    mass are skipped, and so are nodes inside it lighter than
    ``mass_tol / (2 n)``; the dropped mass is at most `mass_tol`, which
    bounds the error by ``mass_tol * ln 2`` nats.

    Models may supply a compiled ``gain_scorer``; its default path can
    be approximate (see the model), ``exact=True`` asks for full accuracy.
    The pruned grid is prepared once, so one scorer can serve all levels of
    :func:`optimize_design`.
    """
    box = grid.support_box(mass_tol / 2)
    nodes = grid.box_nodes(box)
    q = grid.masses()[box]
    q = q / q.sum()
    wmin = mass_tol / (2 * q.size)
    dim = model.design_dim
    if hasattr(model, "gain_scorer"):
        return model.gain_scorer(nodes, q, wmin=wmin, exact=exact)

    keep = q >= wmin
    qk = q[keep]

    def score(xis):
        xis = np.asarray(xis, dtype=float).reshape(-1, dim)
        out = np.empty(len(xis))
        for c, xi in enumerate(xis):
            p = np.broadcast_to(model.prob_one(nodes, _as_design(xi, dim)), q.shape)[keep]
            out[c] = binary_entropy(float(qk @ p)) - float(qk @ binary_entropy(p))
        return out
    return score


def information_gain(grid: ParameterGrid, model, xis, mass_tol: float = 1e-9,
                     exact: bool = False) -> np.ndarray:
    """Expected information gain (nats) for each row of `xis`; see :func:`gain_scorer`."""
    return gain_scorer(grid, model, mass_tol, exact)(xis)


def _lattice(lo, hi, k):
    axes = [np.linspace(l, h, k) for l, h in zip(lo, hi)]
    # itertools.product keeps lexicographic order (first coordinate slowest)
    return np.array(list(itertools.product(*axes))), axes


def optimize_design(grid: ParameterGrid, model, window: DesignWindow,
                    score: Callable | None = None) -> tuple:
    """Recursive lattice search for the design with the largest utility.

    Level one scores a ``K^dim`` lattice over the window; every further
    level re-centres on the incumbent and shrinks each side to twice the
    current spacing, clamped to the window.  Ties go to the
    lexicographically smallest design.  Returns ``(xi_star, u_star)``.

    `score` maps an ``(n, dim)`` array of designs to utilities and defaults
    to :func:`gain_scorer` on `grid`.
    """
    if score is None:
        score = gain_scorer(grid, model)
    lo = np.array(window.lo)
    hi = np.array(window.hi)
    best_xi, best_u = None, -math.inf
    cur_lo, cur_hi = lo.copy(), hi.copy()
    for _ in range(window.levels):
        pts, axes = _lattice(cur_lo, cur_hi, window.candidates)
        u = np.asarray(score(pts), dtype=float)
        k = int(np.argmax(u))
        if u[k] > best_u or (u[k] == best_u and tuple(pts[k]) < tuple(best_xi)):
            best_xi, best_u = pts[k], float(u[k])
        spacing = np.array([a[1] - a[0] for a in axes])
        cur_lo = np.maximum(best_xi - spacing, lo)
        cur_hi = np.minimum(best_xi + spacing, hi)
        if np.any(cur_hi <= cur_lo):
            break
    xi = float(best_xi[0]) if window.dim == 1 else (float(best_xi[0]), float(best_xi[1]))
    return xi, best_u


@dataclass
class RunLog:
    header: dict
    records: list[dict] = field(default_factory=list)

    def append(self, xi, u, y, summary: PosteriorSummary):
        self.records.append({
            "i": len(self.records) + 1,
            "xi": [float(v) for v in np.ravel(xi)],
            "u": float(u),
            "y": int(y),
            "mean": list(summary.mean),
            "std": list(summary.std),
        })

    def to_jsonl(self) -> str:
        lines = [json.dumps({"header": self.header}, sort_keys=True)]
        lines += [json.dumps(r) for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "RunLog":
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        if not lines or "header" not in lines[0]:
            raise ValueError("run log must start with a header line")
        return cls(lines[0]["header"], lines[1:])

    @classmethod
    def read(cls, path) -> "RunLog":
        with open(path) as fh:
            return cls.from_jsonl(fh.read())

    def designs(self) -> np.ndarray:
        return np.array([r["xi"] for r in self.records])

    def outcomes(self) -> np.ndarray:
        return np.array([r["y"] for r in self.records], dtype=int)


class ExperimentError(RuntimeError):
    """A run aborted part-way; `log` holds the records written so far."""

    def __init__(self, cause: Exception, iteration: int, log: RunLog):
        self.cause = cause
        self.iteration = iteration
        self.log = log
        super().__init__(f"iteration {iteration}: {cause}")


def run_experiment(prior: ParameterGrid, model, window: DesignWindow, stop: StopRule,
                   truth: Callable, seed: int, header: dict | None = None):
    """Adaptive measurement loop.

    `truth(xi, rng)` returns the observed outcome; for simulations it is a
    :class:`ionscope.source.SimulatedSample`.  Randomness comes only from
    ``numpy.random.default_rng(seed)`` handed to `truth`, so equal seeds
    give identical logs.

    Candidates are ranked with the fast gain; the utility logged for the
    chosen probe is recomputed with ``exact=True``.
    """
    if tuple(prior.names) != tuple(model.param_names):
        raise ValueError(f"grid axes {prior.names} do not match model parameters {model.param_names}")
    if window.dim != model.design_dim:
        raise ValueError("design window dimension does not match the model")
    rng = np.random.default_rng(seed)
    head = {"seed": int(seed), "stop": {"max_probes": stop.max_probes, "target_std": dict(stop.target_std)}}
    head.update(header or {})
    log = RunLog(head)
    grid = prior
    for i in range(1, stop.max_probes + 1):
        try:
            xi, u = optimize_design(grid, model, window)
            u = float(information_gain(grid, model, [xi], exact=True)[0])
            y = int(truth(xi, rng))
            grid = bayes_update(grid, model, xi, y)
        except DegenerateEvidenceError as exc:
            exc.iteration = i
            raise ExperimentError(exc, i, log) from exc
        summary = summarize(grid)
        log.append(xi, u, y, summary)
        if stop.reached(summary):
            break
    return grid, log
