"""Bayesian adaptive probing of transmissive structures with single particles.

Grid posteriors (:mod:`ionscope.grid`), edge and hole measurement models
(:mod:`ionscope.models`), information-optimal probe selection
(:mod:`ionscope.design`), source and detector statistics
(:mod:`ionscope.source`), raster imaging (:mod:`ionscope.imaging`) and
maximum-likelihood cross-checks (:mod:`ionscope.estimation`).
"""

from .design import DesignWindow, RunLog, StopRule, information_gain, optimize_design, run_experiment, utility
from .estimation import Dataset, FitResult, log_likelihood, mle_fit
from .grid import (
    DegenerateEvidenceError,
    GaussianPrior,
    ParameterAxis,
    ParameterGrid,
    UniformPrior,
    bayes_update,
    condition,
    entropy,
    make_grid,
    summarize,
)
from .imaging import Image, ScanConfig, empirical_snr, raster_scan, read_image, write_image
from .models import (
    BeamSpec,
    BitmapMask,
    DiscMask,
    EdgeMask,
    EdgeModel,
    EdgeParams,
    HoleModel,
    HoleParams,
    RectMask,
    disc_containment,
    edge_likelihood,
    hole_likelihood,
)
from .source import (
    DetectorSpec,
    Deterministic,
    Poissonian,
    SimulatedSample,
    compactify,
    make_rng,
    sample_probe,
    snr_curve,
    snr_deterministic,
    snr_poisson,
)

__version__ = "0.1.0"
