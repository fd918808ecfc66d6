"""Offline maximum-likelihood fits of recorded probe data.

Used to cross-check the grid posterior: the same outcomes, fitted in one
go by a bounded Nelder-Mead search with a few restarts, with standard
errors from the observed information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True, eq=False)
class Dataset:
    """Probe designs (n, dim) and binary outcomes (n,)."""

    xis: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xis = np.asarray(self.xis, dtype=float)
        if xis.ndim == 1:
            xis = xis[:, None]
        ys = np.asarray(self.ys)
        if ys.ndim != 1 or len(ys) != len(xis):
            raise ValueError("need one outcome per design")
        if not np.all((ys == 0) | (ys == 1)):
            raise ValueError("outcomes must be 0 or 1")
        ys = ys.astype(np.int64)
        # read-only copies, since the pooled counts are cached
        xis = xis.copy()
        xis.flags.writeable = ys.flags.writeable = False
        object.__setattr__(self, "xis", xis)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_pairs(cls, pairs) -> "Dataset":
        pairs = list(pairs)
        if not pairs:
            return cls(np.empty((0, 1)), np.empty(0, dtype=np.int64))
        xis = np.array([np.ravel(xi) for xi, _ in pairs], dtype=float)
        return cls(xis, np.array([y for _, y in pairs]))

    @classmethod
    def from_runlog(cls, log) -> "Dataset":
        return cls(log.designs(), log.outcomes())

    def __len__(self):
        return len(self.ys)

    @property
    def dim(self) -> int:
        return self.xis.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.xis, other.xis]), np.concatenate([self.ys, other.ys]))

    @cached_property
    def _pooled(self):
        designs, inv = np.unique(self.xis, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        n1 = np.bincount(inv, weights=self.ys, minlength=len(designs)).astype(np.int64)
        n = np.bincount(inv, minlength=len(designs))
        for a in (designs, n1, n):
            a.flags.writeable = False
        return designs, n1, n - n1

    def unique(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct designs in lexicographic order with their (n1, n0) counts."""
        return self._pooled

    def groups(self):
        """Yield (xi, n1, n0) per distinct design; xi is a float for 1D data."""
        designs, n1, n0 = self.unique()
        for d, a, b in zip(designs, n1, n0):
            yield (float(d[0]) if self.dim == 1 else tuple(float(v) for v in d)), int(a), int(b)


def log_likelihood(data: Dataset, model, theta) -> float:
    """Sum of ln p(y_i | theta, xi_i); -inf if any observed outcome is impossible.

    Identical designs are pooled and the terms are added with ``math.fsum``
    in design order, so the value does not depend on the order of the data.
    """
    if len(data) == 0:
        raise ValueError("log-likelihood of an empty dataset")
    designs, n1, n0 = data.unique()
    th = tuple(np.asarray(v, dtype=float) for v in theta)
    p = np.asarray(model.prob_one_data(th, designs if data.dim > 1 else designs[:, 0]), dtype=float)
    if np.any(((n1 > 0) & (p <= 0)) | ((n0 > 0) & (p >= 1))):
        return -math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(n1 > 0, n1 * np.log(p), 0.0)
        t0 = np.where(n0 > 0, n0 * np.log1p(-p), 0.0)
    return math.fsum(np.concatenate([t1, t0]))


@dataclass(frozen=True)
class FitResult:
    names: tuple[str, ...]
    theta_hat: tuple[float, ...]
    std_errors: tuple[float, ...]
    log_likelihood: float
    converged: bool
    at_bound: tuple[str, ...] = ()
    std_errors_available: bool = True
    starts: list[dict] = field(default_factory=list, compare=False)

    def as_dict(self) -> dict:
        se = [None if not math.isfinite(v) else v for v in self.std_errors]
        return {
            "names": list(self.names),
            "theta_hat": list(self.theta_hat),
            "std_errors": se,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "at_bound": list(self.at_bound),
            "std_errors_available": self.std_errors_available,
            "starts": self.starts,
        }


class FitError(RuntimeError):
    pass


def _hessian(f, x, h):
    """Central-difference Hessian of f at x with per-coordinate steps h."""
    n = len(x)
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = h[i]
        H[i, i] = (f(x + e_i) - 2 * f0 + f(x - e_i)) / h[i] ** 2
        for j in range(i):
            e_j = np.zeros(n)
            e_j[j] = h[j]
            H[i, j] = H[j, i] = (f(x + e_i + e_j) - f(x + e_i - e_j)
                                 - f(x - e_i + e_j) + f(x - e_i - e_j)) / (4 * h[i] * h[j])
    return H


def mle_fit(data: Dataset, model, theta0, bounds, n_perturbed: int = 5, seed: int = 0,
            spread: float = 0.1, xtol: float = 1e-8, max_iter: int = 20000) -> FitResult:
    """Maximum-likelihood estimate with bounded Nelder-Mead and restarts.

    The search runs in coordinates scaled to the unit box, starting from
    `theta0` and from `n_perturbed` points jittered around it (normal, sd
    `spread` box widths, clipped).  A start has converged when the simplex
    diameter is below `xtol` box widths.  The best log-likelihood wins,
    ties going to the earlier start.

    Standard errors come from the inverse of the observed information,
    differenced with steps of 1e-4 box widths.  Parameters that end within
    that step of a bound are reported in `at_bound`, get NaN errors and are
    held fixed for the others.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    width = hi - lo
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != lo.shape or not np.all(width > 0):
        raise ValueError("need one (lo, hi) bound with hi > lo per parameter")
    if np.any(theta0 < lo) or np.any(theta0 > hi):
        raise ValueError("theta0 must lie within the bounds")
    names = tuple(model.param_names)

    def nll_scaled(u):
        v = log_likelihood(data, model, lo + u * width)
        return -v if math.isfinite(v) else 1e300

    rng = np.random.default_rng(seed)
    u0 = (theta0 - lo) / width
    starts = [u0] + [np.clip(u0 + rng.normal(0, spread, u0.size), 0, 1) for _ in range(n_perturbed)]
    runs = []
    for k, u in enumerate(starts):
        res = minimize(nll_scaled, u, method="Nelder-Mead", bounds=[(0, 1)] * u.size,
                       options={"xatol": xtol, "fatol": math.inf, "maxiter": max_iter,
                                "maxfev": 4 * max_iter})
        runs.append({"start": k, "theta": list(lo + res.x * width), "log_likelihood": -float(res.fun),
                     "converged": bool(res.success)})
    ok = [r for r in runs if r["converged"]]
    if not ok:
        raise FitError("no start of the simplex search converged")
    best = max(ok, key=lambda r: (r["log_likelihood"], -r["start"]))
    theta = np.array(best["theta"])

    step = 1e-4 * width
    edge = (theta - lo < step) | (hi - theta < step)
    free = np.flatnonzero(~edge)
    se = np.full(theta.size, math.nan)
    available = True
    if free.size:
        def ll_free(z):
            t = theta.copy()
            t[free] = z
            return log_likelihood(data, model, t)
        info = -_hessian(ll_free, theta[free], step[free])
        try:
            cov = np.linalg.inv(info)
            var = np.diag(cov)
            if np.all(np.isfinite(var)) and np.all(var > 0) and np.all(np.linalg.eigvalsh(info) > 0):
                se[free] = np.sqrt(var)
            else:
                available = False
        except np.linalg.LinAlgError:
            available = False
    return FitResult(names, tuple(float(v) for v in theta), tuple(float(v) for v in se),
                     float(best["log_likelihood"]), True,
                     tuple(n for n, e in zip(names, edge) if e), available, runs)
