"""JSON run configurations: schema, defaults, overrides and object builders.

A config is a JSON object whose ``mode`` selects one of the CLI
subcommands.  Missing optional sections are filled from :data:`DEFAULTS`,
``--set a.b.c=value`` style overrides patch dotted paths (list items by
index), and :func:`validate` reports every problem at once as
``(field path, message)`` pairs.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .design import DesignWindow, StopRule, window_problems
from .grid import GaussianPrior, ParameterAxis, UniformPrior, axis_problems, make_grid
from .imaging import ScanConfig
from .models import BeamSpec, BitmapMask, DiscMask, EdgeMask, EdgeModel, EdgeParams, HoleModel, HoleParams, RectMask
from .source import DetectorSpec, Deterministic, Poissonian, SimulatedSample

MODES = ("profile-edge", "locate-hole", "raster", "snr", "fit")
STOCHASTIC = ("profile-edge", "locate-hole", "raster")
SEED_MAX = 2**64 - 1

_number = {"type": "number"}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

_AXIS = {
    "type": "object",
    "required": ["name", "lo", "hi", "count"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "lo": _number,
        "hi": _number,
        "count": {"type": "integer"},
    },
}

_PRIOR = {
    "type": "object",
    "description": "grid prior over the model parameters",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["uniform", "gaussian"], "description": "uniform, or truncated Gaussian per axis"},
        "axes": {"type": "array", "items": _AXIS, "minItems": 1, "maxItems": 3,
                 "description": "grid axes [{name, lo, hi, count}] in model parameter order"},
        "mean": {"type": "array", "items": _number, "description": "Gaussian prior means, one per axis"},
        "std": {"type": "array", "items": {"type": ["number", "null"]},
                "description": "Gaussian prior stds, one per axis (null: flat axis)"},
    },
}

_DESIGN = {
    "type": "object",
    "description": "design window and lattice search",
    "additionalProperties": False,
    "properties": {
        "lo": {"type": "array", "items": _number, "description": "window lower corner (nm)"},
        "hi": {"type": "array", "items": _number, "description": "window upper corner (nm)"},
        "candidates": {"type": "integer", "description": "lattice points per axis and level (K)"},
        "levels": {"type": "integer", "description": "recursion levels of the lattice search"},
    },
}

_STOP = {
    "type": "object",
    "description": "stop rule",
    "additionalProperties": False,
    "properties": {
        "max_probes": {"type": "integer", "description": "probe budget"},
        "target_std": {"type": "object", "additionalProperties": _number,
                       "description": "stop early once every listed posterior std is reached"},
    },
}

_SOURCE = {
    "type": "object",
    "description": "particle source",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["deterministic", "poissonian"], "description": "source statistics"},
        "n": {"type": "integer", "description": "particles per shot (deterministic)"},
        "lambda": {"type": "number", "description": "mean particles per shot (poissonian)"},
    },
}

_DETECTOR = {
    "type": "object",
    "description": "detector",
    "additionalProperties": False,
    "properties": {
        "efficiency": {"type": "number", "description": "detection probability a of a transmitted particle"},
        "dark_prob": {"type": "number", "description": "dark count probability per shot"},
    },
}

_SEED = {"type": "integer", "minimum": 0, "maximum": SEED_MAX, "description": "RNG seed (64-bit unsigned)"}
_OUT = {"type": ["string", "null"], "description": "output directory (default: $IONSCOPE_OUTPUT_DIR or ./ionscope-runs)"}


def _obj(props: dict, required=(), description=None) -> dict:
    out = {"type": "object", "additionalProperties": False, "properties": props, "required": list(required)}
    if description:
        out["description"] = description
    return out


SCHEMAS = {
    "profile-edge": _obj({
        "mode": {"const": "profile-edge"},
        "seed": _SEED,
        "output_dir": _OUT,
        "truth": _obj({"x0": {"type": "number", "description": "beam position (nm)"},
                       "sigma": {"type": "number", "description": "beam 1-sigma radius (nm)"}},
                      description="simulated beam; its efficiency is detector.efficiency"),
        "prior": _PRIOR,
        "design": _DESIGN,
        "stop": _STOP,
        "source": _SOURCE,
        "detector": _DETECTOR,
    }, required=("mode", "seed")),
    "locate-hole": _obj({
        "mode": {"const": "locate-hole"},
        "seed": _SEED,
        "output_dir": _OUT,
        "model": _obj({"beam_sigma": {"type": "number", "description": "known beam 1-sigma radius (nm)"},
                       "efficiency": {"type": "number", "description": "known detector efficiency a"}},
                      description="fixed beam parameters assumed by the hole model"),
        "truth": _obj({"cx": {"type": "number", "description": "hole centre x (nm)"},
                       "cy": {"type": "number", "description": "hole centre y (nm)"},
                       "radius": {"type": "number", "description": "hole radius (nm)"}},
                      description="simulated hole"),
        "prior": _PRIOR,
        "design": _DESIGN,
        "stop": _STOP,
        "source": _SOURCE,
        "detector": _DETECTOR,
    }, required=("mode", "seed")),
    "raster": _obj({
        "mode": {"const": "raster"},
        "seed": _SEED,
        "output_dir": _OUT,
        "mask": {
            "type": "object",
            "description": "sample structure",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["edge", "disc", "rect", "bitmap", "open"], "description": "mask type"},
                "x0": {"type": "number", "description": "edge position, or rect lower x (nm)"},
                "y0": {"type": "number", "description": "rect lower y (nm)"},
                "x1": {"type": "number", "description": "rect upper x (nm)"},
                "y1": {"type": "number", "description": "rect upper y (nm)"},
                "cx": {"type": "number", "description": "disc centre x (nm)"},
                "cy": {"type": "number", "description": "disc centre y (nm)"},
                "radius": {"type": "number", "description": "disc radius (nm)"},
                "levels": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}},
                           "description": "bitmap gray levels, rows from origin"},
                "path": {"type": "string", "description": "bitmap gray levels from a plain PGM file"},
                "pitch": {"type": "number", "description": "bitmap pixel pitch (nm)"},
                "origin": {**_pair, "description": "bitmap corner (nm)"},
            },
        },
        "scan": _obj({
            "origin": {**_pair, "description": "scan corner (nm)"},
            "pixel": {**_pair, "description": "pixel size dx, dy (nm)"},
            "pixels": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2,
                       "description": "pixel counts nx, ny"},
            "ions_per_pixel": {"type": "integer", "description": "shots per pixel"},
            "beam_sigma": {"type": "number", "description": "beam 1-sigma radius (nm), 0 for a point beam"},
            "bitmap_offsets": {"type": "integer", "description": "beam offsets sampled per particle on bitmap masks"},
        }, description="raster geometry"),
        "frames": {"type": "integer", "description": "number of frames to record"},
        "format": {"enum": ["pgm", "csv"], "description": "image file format"},
        "source": _SOURCE,
        "detector": _DETECTOR,
    }, required=("mode", "seed")),
    "snr": _obj({
        "mode": {"const": "snr"},
        "output_dir": _OUT,
        "source_kind": {"enum": ["deterministic", "poissonian", "both"], "description": "which curves to tabulate"},
        "a_values": {"type": "array", "items": _number, "minItems": 1, "description": "detector efficiencies"},
        "n_values": {"type": "array", "items": _number, "minItems": 1,
                     "description": "particles per pixel (mean number for the Poissonian source)"},
    }, required=("mode",)),
    "fit": _obj({
        "mode": {"const": "fit"},
        "seed": {**_SEED, "description": "seed for the perturbed starts"},
        "output_dir": _OUT,
        "input": {"type": "string", "description": "run log (JSONL) with the probe data"},
        "model": _obj({"kind": {"enum": ["edge", "hole"], "description": "model to fit (default: from the log)"},
                       "beam_sigma": {"type": "number", "description": "hole model beam sigma (nm)"},
                       "efficiency": {"type": "number", "description": "hole model efficiency"}},
                      description="measurement model"),
        "theta0": {"type": "array", "items": _number, "description": "start point (default: final posterior mean)"},
        "bounds": {"type": "array", "items": _pair, "description": "[lo, hi] per parameter (default: prior grid range)"},
        "starts": {"type": "integer", "description": "number of perturbed restarts"},
    }, required=("mode", "input")),
}

DEFAULTS = {
    "profile-edge": {
        "output_dir": None,
        "truth": {"x0": 0.0, "sigma": 11.0},
        "prior": {"kind": "uniform", "axes": [
            {"name": "x0", "lo": -6.0, "hi": 6.0, "count": 25},
            {"name": "sigma", "lo": 7.0, "hi": 17.0, "count": 21},
            {"name": "a", "lo": 0.88, "hi": 1.0, "count": 13}]},
        "design": {"lo": [-40.0], "hi": [40.0], "candidates": 21, "levels": 5},
        "stop": {"max_probes": 1000, "target_std": {}},
        "source": {"kind": "deterministic", "n": 1},
        "detector": {"efficiency": 0.95, "dark_prob": 0.0},
    },
    "locate-hole": {
        "output_dir": None,
        "model": {"beam_sigma": 25.0, "efficiency": 0.95},
        "truth": {"cx": 0.0, "cy": 0.0, "radius": 814.1},
        "prior": {"kind": "gaussian", "axes": [
            {"name": "cx", "lo": -30.0, "hi": 30.0, "count": 31},
            {"name": "cy", "lo": -30.0, "hi": 30.0, "count": 31},
            {"name": "radius", "lo": 800.0, "hi": 830.0, "count": 21}],
            "mean": [0.0, 0.0, 815.0], "std": [10.0, 10.0, None]},
        "design": {"lo": [-900.0, -900.0], "hi": [900.0, 900.0], "candidates": 7, "levels": 5},
        "stop": {"max_probes": 572, "target_std": {}},
        "source": {"kind": "deterministic", "n": 1},
        "detector": {"efficiency": 0.95, "dark_prob": 0.0},
    },
    "raster": {
        "output_dir": None,
        "mask": {"kind": "disc", "cx": 200.0, "cy": 200.0, "radius": 75.0},
        "scan": {"origin": [0.0, 0.0], "pixel": [25.0, 25.0], "pixels": [16, 16],
                 "ions_per_pixel": 1, "beam_sigma": 0.0, "bitmap_offsets": 64},
        "frames": 1,
        "format": "pgm",
        "source": {"kind": "deterministic", "n": 1},
        "detector": {"efficiency": 0.95, "dark_prob": 0.0},
    },
    "snr": {
        "output_dir": None,
        "source_kind": "both",
        "a_values": [0.5, 0.9, 0.96, 1.0],
        "n_values": [1, 2, 5, 10, 20, 50, 100],
    },
    "fit": {
        "output_dir": None,
        "seed": 0,
        "model": {},
        "starts": 5,
    },
}

PARAMS = {"profile-edge": ("x0", "sigma", "a"), "locate-hole": ("cx", "cy", "radius")}


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def as_dict(self) -> dict:
        return {"path": self.path, "message": self.message}

    def __str__(self):
        return f"{self.path or '<root>'}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Set a dotted path, e.g. ``design.levels=5`` or ``prior.axes.0.count=41``.

    The value is parsed as JSON when possible and kept as a string otherwise.
    """
    if "=" not in assignment:
        raise ConfigError([Violation(assignment, "override must look like path=value")])
    path, value = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = cfg
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            if not key.isdigit() or int(key) >= len(node):
                raise ConfigError([Violation(".".join(keys[:i + 1]), "no such list item")])
            key = int(key)
        elif not isinstance(node, dict):
            raise ConfigError([Violation(".".join(keys[:i]), "cannot descend into a scalar")])
        if last:
            node[key] = _parse_value(value)
        else:
            if isinstance(node, dict) and key not in node:
                node[key] = {}
            node = node[key]
    return cfg


def resolve(raw: dict, mode: str | None = None, overrides=()) -> dict:
    """Defaults, then the file contents, then ``--set`` overrides (not validated).

    A section whose ``kind`` differs from the default starts afresh instead
    of inheriting kind-specific defaults; a prior keeps the default axes
    unless it brings its own.
    """
    if not isinstance(raw, dict):
        raise ConfigError([Violation("", "config must be a JSON object")])
    mode = mode or raw.get("mode")
    if mode not in MODES:
        raise ConfigError([Violation("mode", f"mode must be one of {', '.join(MODES)} (got {mode!r})")])
    if raw.get("mode", mode) != mode:
        raise ConfigError([Violation("mode", f"config is for {raw['mode']!r}, not {mode!r}")])
    base = copy.deepcopy(DEFAULTS[mode])
    for section in ("prior", "source", "mask"):
        top = raw.get(section)
        if isinstance(top, dict) and section in base and top.get("kind", base[section].get("kind")) != base[section].get("kind"):
            dropped = base.pop(section)
            if section == "prior":
                base["prior"] = {"axes": dropped["axes"]}
    if isinstance(raw.get("prior"), dict) and "axes" in raw["prior"] and "prior" in base:
        base["prior"] = {"kind": "uniform"}
    cfg = _merge(base, raw)
    cfg["mode"] = mode
    for o in overrides:
        apply_override(cfg, o)
    if cfg["mode"] != mode:
        raise ConfigError([Violation("mode", "mode cannot be overridden")])
    return cfg


def load(path, mode: str | None = None, overrides=()) -> dict:
    """Read, resolve and validate a config file; raises ConfigError."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([Violation("", f"cannot read {path}: {exc.strerror or exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([Violation("", f"invalid JSON: {exc}")]) from exc
    cfg = resolve(raw, mode, overrides)
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _path(parts) -> str:
    return ".".join(str(p) for p in parts)


def validate(cfg: dict) -> list[Violation]:
    """Schema and cross-field checks; returns every violation found."""
    mode = cfg.get("mode")
    if mode not in SCHEMAS:
        return [Violation("mode", f"mode must be one of {', '.join(MODES)} (got {mode!r})")]
    out = []
    validator = Draft202012Validator(SCHEMAS[mode])
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path))):
        path = _path(err.absolute_path)
        if err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else err.message
            path = _path(list(err.absolute_path) + [missing])
            out.append(Violation(path, "required field is missing"))
        else:
            out.append(Violation(path, err.message))
    if out:
        return out
    if mode in PARAMS:
        out += _check_experiment(cfg, mode)
    elif mode == "raster":
        out += _check_raster(cfg)
    elif mode == "snr":
        out += _check_snr(cfg)
    elif mode == "fit":
        out += _check_fit(cfg)
    return out


def _check_source_detector(cfg) -> list[Violation]:
    out = []
    src = cfg["source"]
    if src["kind"] == "deterministic" and src.get("n", 1) < 1:
        out.append(Violation("source.n", "deterministic source needs n ≥ 1"))
    if src["kind"] == "poissonian" and not src.get("lambda", 0) > 0:
        out.append(Violation("source.lambda", "Poissonian source needs lambda > 0"))
    det = cfg["detector"]
    if not 0 <= det["efficiency"] <= 1:
        out.append(Violation("detector.efficiency", "efficiency must lie in [0, 1]"))
    if not 0 <= det["dark_prob"] < 1:
        out.append(Violation("detector.dark_prob", "dark_prob must lie in [0, 1)"))
    return out


def _check_experiment(cfg, mode) -> list[Violation]:
    out = _check_source_detector(cfg)
    names = PARAMS[mode]
    prior = cfg["prior"]
    axes = prior["axes"]
    if tuple(a["name"] for a in axes) != names:
        out.append(Violation("prior.axes", f"axes must be named {list(names)} in that order"))
    for i, a in enumerate(axes):
        for msg in axis_problems(a["name"], a["lo"], a["hi"], a["count"]):
            field_name = "count" if "count" in msg else "hi"
            out.append(Violation(f"prior.axes.{i}.{field_name}", msg))
    if prior["kind"] == "gaussian":
        for key in ("mean", "std"):
            if len(prior.get(key, [])) != len(axes):
                out.append(Violation(f"prior.{key}", "Gaussian prior needs one entry per axis"))
        for i, s in enumerate(prior.get("std", [])):
            if s is not None and not s > 0:
                out.append(Violation(f"prior.std.{i}", "std must be positive"))
    design = cfg["design"]
    dim = 1 if mode == "profile-edge" else 2
    if len(design["lo"]) != dim or len(design["hi"]) != dim:
        out.append(Violation("design", f"window needs {dim} coordinate(s) for {mode}"))
    else:
        for msg in window_problems(design["lo"], design["hi"], design["candidates"], design["levels"]):
            key = next((k for k in ("candidates", "levels") if k in msg), None)
            out.append(Violation(f"design.{key}" if key else "design", msg))
        # probes must be able to reach every position the prior allows
        pos = {a["name"]: a for a in axes}
        for k, name in enumerate(("x0",) if dim == 1 else ("cx", "cy")):
            a = pos.get(name)
            if a and (a["lo"] < design["lo"][k] or a["hi"] > design["hi"][k]):
                out.append(Violation(f"design.lo.{k}",
                                     f"window [{design['lo'][k]}, {design['hi'][k]}] does not cover the "
                                     f"{name} prior support [{a['lo']}, {a['hi']}]"))
    stop = cfg["stop"]
    if stop["max_probes"] < 1:
        out.append(Violation("stop.max_probes", "max_probes must be ≥ 1"))
    for k, v in stop["target_std"].items():
        if k not in names:
            out.append(Violation(f"stop.target_std.{k}", f"unknown parameter (expected one of {list(names)})"))
        elif not v > 0:
            out.append(Violation(f"stop.target_std.{k}", "target std must be positive"))
    truth = cfg["truth"]
    if mode == "profile-edge" and not truth["sigma"] > 0:
        out.append(Violation("truth.sigma", "beam sigma must be positive"))
    if mode == "locate-hole":
        if not truth["radius"] > 0:
            out.append(Violation("truth.radius", "radius must be positive"))
        if not cfg["model"]["beam_sigma"] > 0:
            out.append(Violation("model.beam_sigma", "beam sigma must be positive"))
        if not 0 < cfg["model"]["efficiency"] <= 1:
            out.append(Violation("model.efficiency", "efficiency must lie in (0, 1]"))
        if axes and len(axes) == 3 and axes[2]["lo"] <= 0:
            out.append(Violation("prior.axes.2.lo", "radius grid must be positive"))
    if mode == "profile-edge" and len(axes) == 3:
        if axes[1]["lo"] <= 0:
            out.append(Violation("prior.axes.1.lo", "sigma grid must be positive"))
        if axes[2]["lo"] < 0 or axes[2]["hi"] > 1:
            out.append(Violation("prior.axes.2", "efficiency grid must lie in [0, 1]"))
    return out


def _check_raster(cfg) -> list[Violation]:
    out = _check_source_detector(cfg)
    try:
        ScanConfig(**cfg["scan"])
    except ValueError as exc:
        out += [Violation("scan", m) for m in str(exc).split("; ")]
    if cfg["frames"] < 1:
        out.append(Violation("frames", "frames must be ≥ 1"))
    m = cfg["mask"]
    need = {"edge": ("x0",), "disc": ("cx", "cy", "radius"), "rect": ("x0", "y0", "x1", "y1"),
            "bitmap": ("pitch",), "open": ()}[m["kind"]]
    for key in need:
        if key not in m:
            out.append(Violation(f"mask.{key}", f"required for {m['kind']} masks"))
    if m["kind"] == "disc" and m.get("radius", 1) <= 0:
        out.append(Violation("mask.radius", "radius must be positive"))
    if m["kind"] == "rect" and "x1" in m and "y1" in m and not (m["x1"] > m["x0"] and m["y1"] > m["y0"]):
        out.append(Violation("mask", "rect needs x1 > x0 and y1 > y0"))
    if m["kind"] == "bitmap":
        if ("levels" in m) == ("path" in m):
            out.append(Violation("mask", "bitmap needs exactly one of levels or path"))
        if m.get("pitch", 1) <= 0:
            out.append(Violation("mask.pitch", "pitch must be positive"))
        lv = m.get("levels")
        if lv is not None and (not lv or len({len(r) for r in lv}) != 1 or not lv[0]):
            out.append(Violation("mask.levels", "levels must be a non-empty rectangular array"))
    return out


def _check_snr(cfg) -> list[Violation]:
    out = []
    for i, a in enumerate(cfg["a_values"]):
        if not 0 < a <= 1:
            out.append(Violation(f"a_values.{i}", "efficiency must lie in (0, 1]"))
    for i, n in enumerate(cfg["n_values"]):
        if not n > 0:
            out.append(Violation(f"n_values.{i}", "n must be positive"))
        elif cfg["source_kind"] != "poissonian" and int(n) != n:
            out.append(Violation(f"n_values.{i}", "deterministic n must be an integer"))
    return out


def _check_fit(cfg) -> list[Violation]:
    out = []
    if cfg["starts"] < 0:
        out.append(Violation("starts", "starts must be ≥ 0"))
    if "bounds" in cfg:
        for i, (lo, hi) in enumerate(cfg["bounds"]):
            if not hi > lo:
                out.append(Violation(f"bounds.{i}", "hi > lo required"))
        if "theta0" in cfg:
            if len(cfg["theta0"]) != len(cfg["bounds"]):
                out.append(Violation("theta0", "need one start value per bound"))
            else:
                for i, (t, (lo, hi)) in enumerate(zip(cfg["theta0"], cfg["bounds"])):
                    if not lo <= t <= hi:
                        out.append(Violation(f"theta0.{i}", "start value outside its bounds"))
    return out


# -- builders -------------------------------------------------------------------


def build_prior(cfg: dict):
    p = cfg["prior"]
    axes = [ParameterAxis(a["name"], float(a["lo"]), float(a["hi"]), int(a["count"])) for a in p["axes"]]
    prior = UniformPrior() if p["kind"] == "uniform" else GaussianPrior(tuple(p["mean"]), tuple(p["std"]))
    return make_grid(axes, prior)


def build_model(cfg: dict):
    if cfg["mode"] == "profile-edge":
        return EdgeModel()
    m = cfg["model"]
    return HoleModel(BeamSpec(float(m["beam_sigma"]), float(m["efficiency"])))


def build_window(cfg: dict) -> DesignWindow:
    d = cfg["design"]
    return DesignWindow(tuple(d["lo"]), tuple(d["hi"]), int(d["candidates"]), int(d["levels"]))


def build_stop(cfg: dict) -> StopRule:
    s = cfg["stop"]
    return StopRule(int(s["max_probes"]), {k: float(v) for k, v in s["target_std"].items()})


def build_source(cfg: dict):
    s = cfg["source"]
    if s["kind"] == "deterministic":
        return Deterministic(int(s.get("n", 1)))
    return Poissonian(float(s["lambda"]))


def build_detector(cfg: dict) -> DetectorSpec:
    d = cfg["detector"]
    return DetectorSpec(float(d["efficiency"]), float(d["dark_prob"]))


def build_truth(cfg: dict, model) -> SimulatedSample:
    """Simulated sample for an adaptive mode; the edge efficiency is the detector's."""
    src, det = build_source(cfg), build_detector(cfg)
    t = cfg["truth"]
    if cfg["mode"] == "profile-edge":
        theta = EdgeParams(float(t["x0"]), float(t["sigma"]), det.efficiency)
    else:
        theta = HoleParams(float(t["cx"]), float(t["cy"]), float(t["radius"]))
    return SimulatedSample(lambda xi: model.transmission(theta, xi), src, det)


def build_mask(cfg: dict):
    m = cfg["mask"]
    kind = m["kind"]
    if kind == "open":
        return RectMask(-math.inf, -math.inf, math.inf, math.inf)
    if kind == "edge":
        return EdgeMask(float(m["x0"]))
    if kind == "disc":
        return DiscMask(float(m["cx"]), float(m["cy"]), float(m["radius"]))
    if kind == "rect":
        return RectMask(float(m["x0"]), float(m["y0"]), float(m["x1"]), float(m["y1"]))
    if "path" in m:
        from .imaging import parse_image

        text = Path(m["path"]).read_text()
        levels = parse_image(text, "pgm").counts
        # gray levels are relative to the file's maxval, not to the brightest pixel
        header = [t for line in text.splitlines() if not line.startswith("#") for t in line.split()]
        maxval = int(header[3])
    else:
        levels, maxval = np.asarray(m["levels"]), None
    return BitmapMask(levels, float(m["pitch"]), tuple(m.get("origin", (0.0, 0.0))), maxval)


def build_scan(cfg: dict) -> ScanConfig:
    return ScanConfig(**cfg["scan"])


def echo(cfg: dict) -> dict:
    """Config as recorded in artifacts: everything except the output location."""
    return {k: v for k, v in cfg.items() if k != "output_dir"}


# -- help text --------------------------------------------------------------------


def _walk(schema: dict, defaults, prefix: str):
    props = schema.get("properties", {})
    for key, sub in props.items():
        path = f"{prefix}{key}"
        dflt = defaults.get(key, None) if isinstance(defaults, dict) else None
        if sub.get("type") == "object" and "properties" in sub:
            yield path, sub.get("description", ""), None, True
            yield from _walk(sub, dflt or {}, path + ".")
        else:
            yield path, sub.get("description", ""), dflt, False


def field_help(mode: str) -> str:
    """One line per config field honoured by `mode`, with its default."""
    lines = ["config fields (set in the JSON file or with --set path=value):"]
    required = set(SCHEMAS[mode].get("required", []))
    for path, desc, dflt, is_section in _walk(SCHEMAS[mode], DEFAULTS[mode], ""):
        if path == "mode":
            continue
        if is_section:
            lines.append(f"  {path}: {desc}")
            continue
        tail = " [required]" if path in required else ("" if dflt is None else f" [default: {json.dumps(dflt)}]")
        lines.append(f"  {path}: {desc}{tail}")
    return "\n".join(lines)
