"""Command-line entry point: ``ionscope <subcommand> [config.json] [--set path=value ...]``.

Exit status 0 on success, 2 for configuration errors and 3 for runtime
errors; failures also print a JSON object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as C
from .design import ExperimentError, RunLog, run_experiment
from .estimation import Dataset, FitError, mle_fit
from .grid import summarize
from .imaging import empirical_snr, raster_scan, write_image
from .models import EdgeModel, HoleModel, BeamSpec
from .source import make_rng, snr_curve

ENV_OUTPUT_DIR = "IONSCOPE_OUTPUT_DIR"
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class RuntimeFailure(RuntimeError):
    def __init__(self, message: str, **extra):
        super().__init__(message)
        self.extra = extra


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


def output_dir(cfg: dict, override: str | None) -> Path:
    path = override or cfg.get("output_dir") or os.environ.get(ENV_OUTPUT_DIR) or "ionscope-runs"
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- modes ---------------------------------------------------------------------------


def run_adaptive(cfg: dict, out: Path) -> dict:
    model = C.build_model(cfg)
    prior = C.build_prior(cfg)
    header = {"mode": cfg["mode"], "config": C.echo(cfg)}
    try:
        grid, log = run_experiment(prior, model, C.build_window(cfg), C.build_stop(cfg),
                                   C.build_truth(cfg, model), cfg["seed"], header=header)
    except ExperimentError as exc:
        exc.log.write(out / "runlog.jsonl")
        raise RuntimeFailure(str(exc), iteration=exc.iteration, partial_log=str(out / "runlog.jsonl")) from exc
    log.write(out / "runlog.jsonl")
    (out / "posterior.json").write_text(grid.to_json() + "\n")
    s = summarize(grid)
    summary = {"mode": cfg["mode"], "seed": cfg["seed"], "probes": len(log.records), **s.as_dict()}
    (out / "summary.json").write_text(_dump(summary))
    return summary


def run_raster(cfg: dict, out: Path) -> dict:
    mask, scan = C.build_mask(cfg), C.build_scan(cfg)
    src, det = C.build_source(cfg), C.build_detector(cfg)
    frames = cfg["frames"]
    fmt = cfg["format"]
    t0 = time.perf_counter()
    images = []
    for k in range(frames):
        # frame k draws from child stream k of the seed
        img = raster_scan(mask, scan, src, det, rng=make_rng(cfg["seed"], k))
        img.metadata.update({"seed": cfg["seed"], "frame": k, "config": C.echo(cfg)})
        name = f"image.{fmt}" if frames == 1 else f"frame_{k:04d}.{fmt}"
        write_image(img, out / name, fmt)
        images.append(img)
    wall = time.perf_counter() - t0
    (out / "image.json").write_text(_dump({"config": C.echo(cfg), "seed": cfg["seed"], "wall_time_s": wall}))
    counts = np.stack([im.counts for im in images])
    summary = {"mode": "raster", "seed": cfg["seed"], "frames": frames,
               "shape": list(counts.shape[1:]), "mean_count": float(counts.mean()),
               "total_count": int(counts.sum())}
    if frames >= 2:
        mean, std, snr = empirical_snr(images)
        summary.update({"pooled_mean": mean, "pooled_std": std, "empirical_snr": _finite(snr)})
    (out / "summary.json").write_text(_dump(summary))
    return summary


def format_snr_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["n", "a", "source_kind", "snr", "snr_compactified"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def run_snr(cfg: dict, out: Path) -> dict:
    kinds = ["deterministic", "poissonian"] if cfg["source_kind"] == "both" else [cfg["source_kind"]]
    rows = []
    for kind in kinds:
        rows += snr_curve(kind, cfg["a_values"], cfg["n_values"])
    (out / "snr.csv").write_text(format_snr_csv(rows))
    return {"mode": "snr", "rows": len(rows), "file": str(out / "snr.csv")}


def run_fit(cfg: dict, out: Path) -> dict:
    try:
        log = RunLog.read(cfg["input"])
    except (OSError, ValueError) as exc:
        raise C.ConfigError([C.Violation("input", f"cannot read run log: {exc}")]) from exc
    src_cfg = log.header.get("config", {})
    kind = cfg["model"].get("kind") or {"profile-edge": "edge", "locate-hole": "hole"}.get(src_cfg.get("mode"))
    if kind is None:
        raise C.ConfigError([C.Violation("model.kind", "cannot tell the model from the run log; set it")])
    if kind == "edge":
        model = EdgeModel()
    else:
        m = {**src_cfg.get("model", {}), **cfg["model"]}
        if "beam_sigma" not in m or "efficiency" not in m:
            raise C.ConfigError([C.Violation("model", "hole fits need beam_sigma and efficiency")])
        model = HoleModel(BeamSpec(float(m["beam_sigma"]), float(m["efficiency"])))
    if not log.records:
        raise C.ConfigError([C.Violation("input", "run log holds no probes")])
    data = Dataset.from_runlog(log)
    bounds = cfg.get("bounds")
    if bounds is None:
        axes = src_cfg.get("prior", {}).get("axes")
        if not axes:
            raise C.ConfigError([C.Violation("bounds", "no bounds given and none in the run log")])
        bounds = [[a["lo"], a["hi"]] for a in axes]
    theta0 = cfg.get("theta0", log.records[-1]["mean"])
    if len(theta0) != len(model.param_names) or len(bounds) != len(model.param_names):
        raise C.ConfigError([C.Violation("theta0", f"need {len(model.param_names)} parameters")])
    try:
        res = mle_fit(data, model, theta0, bounds, n_perturbed=cfg["starts"], seed=cfg["seed"])
    except FitError as exc:
        raise RuntimeFailure(str(exc)) from exc
    result = res.as_dict()
    result["log_likelihood"] = _finite(result["log_likelihood"])
    for s in result["starts"]:
        s["log_likelihood"] = _finite(s["log_likelihood"])
    result.update({"input": str(cfg["input"]), "probes": len(data)})
    (out / "fit.json").write_text(_dump(result))
    return result


RUNNERS = {"profile-edge": run_adaptive, "locate-hole": run_adaptive, "raster": run_raster,
           "snr": run_snr, "fit": run_fit}

DESCRIPTIONS = {
    "profile-edge": "adaptive knife-edge scan of a simulated beam (x0, sigma, a)",
    "locate-hole": "adaptive search for the centre and radius of a simulated circular hole",
    "raster": "raster-scan image of a mask, one or more frames",
    "snr": "table of SNR against particles per pixel for both source types",
    "fit": "maximum-likelihood fit of the probes in a run log",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionscope", description="Adaptive single-particle transmission measurements.")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in C.MODES:
        p = sub.add_parser(mode, help=DESCRIPTIONS[mode], description=DESCRIPTIONS[mode],
                           epilog=C.field_help(mode), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", nargs="?", help="JSON config file (defaults are used for missing fields)"
                       + ("; a run log (.jsonl) is taken as the input" if mode == "fit" else ""))
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config field by dotted path, e.g. design.levels=5")
        if mode in C.STOCHASTIC or mode == "fit":
            p.add_argument("--seed", type=int, help="same as --set seed=SEED")
        p.add_argument("--out", help=f"output directory (overrides output_dir and ${ENV_OUTPUT_DIR})")
    p = sub.add_parser("validate", help="check a config without running it",
                       description="Report every schema and cross-field violation of a config.")
    p.add_argument("config", help="JSON config file")
    p.add_argument("--mode", choices=C.MODES, help="mode to validate against (default: the file's mode)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE")
    return parser


def _fail(kind: str, code: int, **payload) -> int:
    sys.stderr.write(json.dumps({"error": kind, **payload}, sort_keys=True, ensure_ascii=False) + "\n")
    return code


def _read_raw(path):
    if path is None:
        return {}
    if str(path).endswith(".jsonl"):
        # a run log given straight to `fit`
        return {"input": str(path)}
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise C.ConfigError([C.Violation("", f"cannot read {path}: {exc.strerror or exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise C.ConfigError([C.Violation("", f"invalid JSON in {path}: {exc}")]) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _read_raw(args.config)
        if args.command == "validate":
            cfg = C.resolve(raw, args.mode, args.overrides)
            problems = C.validate(cfg)
            report = {"mode": cfg["mode"], "valid": not problems, "violations": [v.as_dict() for v in problems]}
            sys.stdout.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
            return 0 if not problems else EXIT_CONFIG
        overrides = list(args.overrides)
        if getattr(args, "seed", None) is not None:
            overrides.append(f"seed={args.seed}")
        cfg = C.resolve(raw, args.command, overrides)
        problems = C.validate(cfg)
        if problems:
            raise C.ConfigError(problems)
        out = output_dir(cfg, args.out)
        summary = RUNNERS[args.command](cfg, out)
    except C.ConfigError as exc:
        return _fail("config", EXIT_CONFIG, violations=[v.as_dict() for v in exc.violations])
    except RuntimeFailure as exc:
        return _fail("runtime", EXIT_RUNTIME, message=str(exc), **exc.extra)
    except (OSError, ValueError, ArithmeticError) as exc:
        return _fail("runtime", EXIT_RUNTIME, message=f"{type(exc).__name__}: {exc}")
    sys.stdout.write(json.dumps({"output_dir": str(out), **{k: v for k, v in summary.items()
                                                             if k in ("mode", "seed", "probes", "mean", "std", "rows", "frames", "theta_hat", "std_errors")}}) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
