"""Raster-scan transmission imaging.

The sample is stepped through the beam focus; at every pixel a fixed number
of shots is fired and the detected particles are counted.  Pixel (i, j)
(column i, row j) is centred at ``origin + ((i + 0.5) dx, (j + 0.5) dy)``
and pixels are visited row by row, which fixes the order in which random
numbers are drawn.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .models import (
    BitmapMask,
    DiscMask,
    EdgeMask,
    RectMask,
    disc_containment,
    edge_transmission,
    mask_transmission,
)
from .source import DetectorSpec, Deterministic

INFINITE_SNR = math.inf


@dataclass(frozen=True)
class ScanConfig:
    origin: tuple[float, float] = (0.0, 0.0)
    pixel: tuple[float, float] = (25.0, 25.0)
    pixels: tuple[int, int] = (16, 16)
    ions_per_pixel: int = 1
    beam_sigma: float = 0.0
    bitmap_offsets: int = 64

    def __post_init__(self):
        for name in ("origin", "pixel", "pixels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = scan_problems(self)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (ny, nx)."""
        return self.pixels[1], self.pixels[0]

    def centres(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.pixels
        x = self.origin[0] + (np.arange(nx) + 0.5) * self.pixel[0]
        y = self.origin[1] + (np.arange(ny) + 0.5) * self.pixel[1]
        return np.meshgrid(x, y)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


def scan_problems(scan: ScanConfig) -> list[str]:
    problems = []
    if len(scan.pixel) != 2 or not all(d > 0 for d in scan.pixel):
        problems.append("pixel size: dx, dy > 0 required")
    if len(scan.pixels) != 2 or not all(int(n) == n and n >= 1 for n in scan.pixels):
        problems.append("pixels: nx, ny ≥ 1 required")
    if int(scan.ions_per_pixel) != scan.ions_per_pixel or scan.ions_per_pixel < 1:
        problems.append("ions_per_pixel must be an integer ≥ 1")
    if not scan.beam_sigma >= 0:
        problems.append("beam_sigma must be ≥ 0")
    if int(scan.bitmap_offsets) != scan.bitmap_offsets or scan.bitmap_offsets < 1:
        problems.append("bitmap_offsets must be an integer ≥ 1")
    return problems


@dataclass(frozen=True, eq=False)
class Image:
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.size == 0:
            raise ValueError("image counts must be a non-empty 2D array")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(c == np.round(c)):
                raise ValueError("image counts must be integers")
        if np.any(c < 0):
            raise ValueError("image counts must be ≥ 0")
        object.__setattr__(self, "counts", c.astype(np.int64))

    def __eq__(self, other):
        return (isinstance(other, Image) and self.counts.shape == other.counts.shape
                and np.array_equal(self.counts, other.counts) and self.metadata == other.metadata)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


def _gauss_interval(lo, hi, centre, sigma):
    return ndtr((hi - centre) / sigma) - ndtr((lo - centre) / sigma)


def beam_transmission(mask, scan: ScanConfig) -> np.ndarray:
    """Per-particle transmission probability at every pixel centre.

    Analytic beam convolution for edge, disc and rectangle masks; bitmap
    masks need per-particle sampling (see :func:`raster_scan`) and are only
    point-sampled here.
    """
    x, y = scan.centres()
    s = scan.beam_sigma
    if s == 0 or isinstance(mask, BitmapMask):
        return mask_transmission(mask, x, y) * np.ones(scan.shape)
    if isinstance(mask, EdgeMask):
        # open side x > x0: 0.5 erfc((x0 - x) / (s sqrt 2))
        return edge_transmission(x, s, mask.x0) * np.ones(scan.shape)
    if isinstance(mask, DiscMask):
        return np.asarray(disc_containment(np.hypot(x - mask.cx, y - mask.cy), mask.radius, s))
    if isinstance(mask, RectMask):
        return _gauss_interval(mask.x0, mask.x1, x, s) * _gauss_interval(mask.y0, mask.y1, y, s)
    raise TypeError(f"unknown mask {mask!r}")


def _bitmap_particles(mask: BitmapMask, scan: ScanConfig, emitted: np.ndarray, rng):
    # one row of `bitmap_offsets` beam offsets per emitted particle, in scan order
    x, y = scan.centres()
    owner = np.repeat(np.arange(emitted.size), emitted.ravel())
    k = scan.bitmap_offsets
    off = rng.normal(0.0, scan.beam_sigma, size=(owner.size, k, 2))
    px = x.ravel()[owner][:, None] + off[..., 0]
    py = y.ravel()[owner][:, None] + off[..., 1]
    p = np.asarray(mask_transmission(mask, px, py)).reshape(owner.size, k).mean(axis=1)
    passed = rng.random(owner.size) < p
    return np.bincount(owner, weights=passed, minlength=emitted.size).astype(np.int64).reshape(emitted.shape)


def raster_scan(mask, scan: ScanConfig, source=Deterministic(1), det: DetectorSpec = DetectorSpec(),
                rng=None, seed: int | None = None) -> Image:
    """Simulate one image frame.

    Every pixel gets `scan.ions_per_pixel` shots from `source`.  Emitted
    particles pass the mask independently with the beam-convolved
    transmission, transmitted particles are detected with probability
    ``det.efficiency``, and each shot can add one dark count.  With a beam
    of nonzero width a bitmap mask is handled per particle: each particle
    draws `scan.bitmap_offsets` beam offsets and passes with the mean gray
    level seen at those offsets.

    Pass either a generator `rng` or a `seed`; the seed is recorded in the
    metadata.
    """
    if rng is None:
        if seed is None:
            raise ValueError("raster_scan needs rng or seed")
        rng = np.random.default_rng(seed)
    shots = scan.ions_per_pixel
    shape = scan.shape + (shots,)
    emitted = np.asarray(source.emit(rng, shape), dtype=np.int64)
    emitted_px = emitted.sum(axis=2)
    if isinstance(mask, BitmapMask) and scan.beam_sigma > 0:
        transmitted = _bitmap_particles(mask, scan, emitted_px, rng)
    else:
        transmitted = rng.binomial(emitted_px, beam_transmission(mask, scan))
    detected = rng.binomial(transmitted, det.efficiency)
    if det.dark_prob > 0:
        detected = detected + (rng.random(shape) < det.dark_prob).sum(axis=2)
    meta = {"scan": scan.to_dict(), "scan_order": "row-major from origin"}
    if seed is not None:
        meta["seed"] = int(seed)
    return Image(detected, meta)


def empirical_snr(images, region=None) -> tuple[float, float, float]:
    """Pooled (mean, std, mean / std) of the counts in `region` over all frames.

    `region` is a boolean (ny, nx) mask or an index expression; None means
    the whole frame.  Zero spread gives ``snr = inf``.
    """
    images = list(images)
    if len(images) < 2:
        raise ValueError("empirical SNR needs at least two frames")
    ref = images[0]
    for im in images[1:]:
        if im.shape != ref.shape or im.metadata.get("scan") != ref.metadata.get("scan"):
            raise ValueError("frames were taken with different scan configurations")
    stack = np.stack([im.counts for im in images]).astype(float)
    vals = stack.reshape(len(images), -1) if region is None else stack[:, region]
    if vals.size == 0:
        raise ValueError("region selects no pixels")
    mean = float(vals.mean())
    std = float(vals.std(ddof=1))
    return mean, std, (mean / std if std > 0 else INFINITE_SNR)


# -- file formats ---------------------------------------------------------------


def format_image(image: Image, fmt: str) -> str:
    c = image.counts
    if fmt == "csv":
        return "".join(",".join(str(v) for v in row) + "\n" for row in c)
    if fmt == "pgm":
        lines = ["P2", "# ionscope " + json.dumps(image.metadata, sort_keys=True)]
        lines.append(f"{c.shape[1]} {c.shape[0]}")
        lines.append(str(max(int(c.max()), 1)))
        lines += [" ".join(str(v) for v in row) for row in c]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown image format {fmt!r}")


def parse_image(text: str, fmt: str) -> Image:
    if fmt == "csv":
        rows = [[int(v) for v in line.split(",")] for line in text.splitlines() if line.strip()]
        return Image(np.array(rows, dtype=np.int64))
    if fmt == "pgm":
        meta = {}
        tokens = []
        for line in text.splitlines():
            if line.startswith("#"):
                if line.startswith("# ionscope "):
                    meta = json.loads(line[len("# ionscope "):])
                continue
            tokens += line.split()
        if not tokens or tokens[0] != "P2":
            raise ValueError("not a plain PGM (P2) file")
        nx, ny = int(tokens[1]), int(tokens[2])
        body = np.array([int(v) for v in tokens[4:]], dtype=np.int64)
        if body.size != nx * ny:
            raise ValueError(f"PGM body has {body.size} values, expected {nx * ny}")
        return Image(body.reshape(ny, nx), meta)
    raise ValueError(f"unknown image format {fmt!r}")


def _format_of(path, fmt):
    if fmt is not None:
        return fmt
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix not in ("csv", "pgm"):
        raise ValueError(f"cannot tell image format from {path!s}")
    return suffix


def write_image(image: Image, path, fmt: str | None = None) -> Path:
    path = Path(path)
    path.write_text(format_image(image, _format_of(path, fmt)))
    return path


def read_image(path, fmt: str | None = None) -> Image:
    return parse_image(Path(path).read_text(), _format_of(path, fmt))
