"""Particle sources, detectors and counting statistics.

A deterministic source emits exactly ``n`` particles per shot, so with a
detector of efficiency ``a`` the detected count is Binomial(n, a) and the
signal-to-noise ratio mean/std is ``sqrt(n a / (1 - a))``.  A Poissonian
source with mean ``lam`` stays Poissonian after thinning, giving
``sqrt(lam a)``.  For the same mean flux the deterministic source always
wins, and by more the fewer particles are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np


class InfiniteSNRError(ValueError):
    pass


class ZeroSignalError(ValueError):
    pass


@dataclass(frozen=True)
class Deterministic:
    n: int = 1
    kind = "deterministic"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"deterministic source needs an integer n ≥ 1 (got {self.n})")

    def emit(self, rng, size=None):
        return np.full(size, self.n, dtype=np.int64) if size is not None else self.n


@dataclass(frozen=True)
class Poissonian:
    lam: float
    kind = "poissonian"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Poissonian source needs lambda > 0 (got {self.lam})")

    def emit(self, rng, size=None):
        return rng.poisson(self.lam, size)


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 1.0
    dark_prob: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError(f"detector efficiency must lie in [0, 1] (got {self.efficiency})")
        if not 0 <= self.dark_prob < 1:
            raise ValueError(f"dark count probability must lie in [0, 1) (got {self.dark_prob})")


@dataclass(frozen=True)
class ProbeOutcome:
    emitted: int
    transmitted: int
    detected: int

    @property
    def y(self) -> int:
        return int(self.detected >= 1)


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Generator for `seed`, or for child stream `stream` of it.

    Child streams use ``SeedSequence(seed, spawn_key=(stream,))``, the same
    derivation as ``SeedSequence.spawn``, so they are independent of each
    other and of the parent.
    """
    key = () if stream is None else (int(stream),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def sample_counts(source, det: DetectorSpec, p_transmit, rng):
    """Vectorized shot simulation: arrays (emitted, transmitted, detected)."""
    p = np.asarray(p_transmit, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("transmission probabilities must lie in [0, 1]")
    emitted = np.asarray(source.emit(rng, p.shape), dtype=np.int64)
    transmitted = rng.binomial(emitted, p)
    detected = rng.binomial(transmitted, det.efficiency)
    if det.dark_prob > 0:
        detected = detected + (rng.random(p.shape) < det.dark_prob)
    return emitted, transmitted, detected


def sample_probe(source, det: DetectorSpec, p_transmit: float, rng) -> ProbeOutcome:
    e, t, d = sample_counts(source, det, p_transmit, rng)
    return ProbeOutcome(int(e), int(t), int(d))


@dataclass(frozen=True)
class SimulatedSample:
    """Stand-in for the apparatus: fires `source` at a structure and reports y.

    `transmission(xi)` is the fraction of the beam passing the structure at
    design `xi` (detector efficiency excluded; that is applied by `detector`).
    """

    transmission: Callable
    source: object = Deterministic(1)
    detector: DetectorSpec = DetectorSpec()

    def __call__(self, xi, rng) -> int:
        return sample_probe(self.source, self.detector, self.transmission(xi), rng).y


def snr_deterministic(n: int, a: float) -> float:
    if a >= 1:
        raise InfiniteSNRError("a perfect detector gives zero variance (infinite SNR)")
    if a <= 0:
        raise ZeroSignalError("detector efficiency 0 gives no signal")
    if n < 1:
        raise ValueError("n must be ≥ 1")
    return math.sqrt(n * a / (1 - a))


def snr_poisson(lam: float, a: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < a <= 1:
        raise ValueError("efficiency must lie in (0, 1]")
    return math.sqrt(lam * a)


def compactify(f: float) -> float:
    """Map [0, inf] onto [0, 1] via f / (f + 1)."""
    if f < 0 or math.isnan(f):
        raise ValueError(f"compactify needs f ≥ 0 (got {f})")
    if math.isinf(f):
        return 1.0
    return f / (f + 1.0)


def snr_curve(kind: str, a_values: Iterable[float], n_values: Iterable[float]) -> list[dict]:
    """Rows (n, a, source_kind, snr, snr_compactified) for SNR-vs-exposure plots.

    For the Poissonian source `n` is the mean number of particles per shot.
    A perfect detector on a deterministic source yields snr = inf.
    """
    if kind not in ("deterministic", "poissonian"):
        raise ValueError(f"unknown source kind {kind!r}")
    rows = []
    for a in a_values:
        for n in n_values:
            if kind == "deterministic":
                try:
                    snr = snr_deterministic(int(n), a)
                except InfiniteSNRError:
                    snr = math.inf
            else:
                snr = snr_poisson(n, a)
            rows.append({"n": n, "a": a, "source_kind": kind, "snr": snr,
                         "snr_compactified": compactify(snr)})
    return rows
