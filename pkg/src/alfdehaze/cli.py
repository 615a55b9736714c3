"""Command-line entry point: ``alfdehaze {dehaze,synthesize,eval}``.

Configuration precedence is command-line flag > ``--config`` TOML file >
built-in defaults.  Every run writes a ``manifest.json`` listing the
resolved configuration and a SHA-256 of each input and output file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .basis import AirlightField, write_weights_csv
from .energy import Hyperparameters
from .metrics import EvalReport, evaluate
from .raster import load_image, load_scalar_map, save_image, save_scalar_map
from .scatter import (
    DEFAULT_OMEGA,
    DEFAULT_PATCH,
    DEFAULT_T0,
    SceneSpecError,
    dark_channel_t,
    estimate_constant_airlight,
    load_scene_config,
    recover_direct,
    synthesize,
)
from .solver import NonFiniteEnergyError, SolverConfig, energy_trace_csv, run

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger("alfdehaze")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NONFINITE = 0, 1, 2, 3

DEHAZE_DEFAULTS = {
    "mode": "alf",
    "order": 2,
    "cross_terms": False,
    "lambda1": 0.1,
    "lambda2": 0.0001,
    "lambda3": 1.0,
    "lambda4": 0.1,
    "step": 0.1,
    "step_j": None,
    "iters": 200,
    "tol": 1e-5,
    "t0": DEFAULT_T0,
    "omega": DEFAULT_OMEGA,
    "patch": DEFAULT_PATCH,
    "residual": "eq14",
    "weight_update": "joint",
    "airlight": None,
    "no_clamp": False,
}


class UsageError(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, inputs, outputs, seed, started: float) -> Path:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "duration_s": round(time.perf_counter() - started, 3),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _resolve_config(args, defaults: dict) -> dict:
    resolved = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            file_cfg = tomllib.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        resolved.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _parse_rgb(text: str) -> list[float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected r,g,b or a single value")
    return parts


def _solver_config(cfg: dict) -> SolverConfig:
    try:
        hp = Hyperparameters(float(cfg["lambda1"]), float(cfg["lambda2"]), float(cfg["lambda3"]),
                             float(cfg["lambda4"]), cfg["residual"])
        return SolverConfig(
            hp=hp, mode=cfg["mode"], basis_order=int(cfg["order"]),
            include_cross_terms=bool(cfg["cross_terms"]), step_size=float(cfg["step"]),
            step_size_J=None if cfg["step_j"] is None else float(cfg["step_j"]),
            max_iters=int(cfg["iters"]), convergence_tol=float(cfg["tol"]),
            clamp_iterates=not cfg["no_clamp"], weight_update=cfg["weight_update"],
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def cmd_dehaze(args) -> int:
    started = time.perf_counter()
    cfg = _resolve_config(args, DEHAZE_DEFAULTS)
    if cfg["mode"] not in ("alf", "cbr", "dcp"):
        raise UsageError(f"unknown mode {cfg['mode']!r}")
    if cfg["mode"] != "dcp":
        _solver_config(cfg)  # validate before touching any file
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hazy = load_image(args.input)
    h, w = hazy.shape[:2]
    outputs = []

    if cfg["mode"] == "dcp":
        rgb = cfg["airlight"] if cfg["airlight"] is not None else estimate_constant_airlight(hazy, int(cfg["patch"]))
        airlight = AirlightField.constant(np.asarray(rgb, dtype=np.float64), h, w)
        t = dark_channel_t(hazy, airlight, float(cfg["omega"]), int(cfg["patch"]))
        dehazed = recover_direct(hazy, t, airlight, float(cfg["t0"]))
    else:
        solver_cfg = _solver_config(cfg)
        result = run(hazy, solver_cfg, workers=args.threads)
        t, dehazed, airlight = result.transmission, result.dehazed, result.airlight
        energy_path = out_dir / "energy.csv"
        energy_trace_csv(result, energy_path)
        outputs.append(energy_path)

    paths = {
        "dehazed": out_dir / "dehazed.png",
        "t_pfm": out_dir / "transmission.pfm",
        "t_png": out_dir / "transmission.png",
        "airlight": out_dir / "airlight.png",
        "weights": out_dir / "weights.csv",
    }
    if not (np.all(np.isfinite(dehazed)) and np.all(np.isfinite(t))):
        log.error("non-finite output; nothing written")
        return EXIT_NONFINITE
    save_image(dehazed, paths["dehazed"])
    save_scalar_map(t, paths["t_pfm"])
    save_scalar_map(np.clip(t, 0.0, 1.0), paths["t_png"])
    save_image(airlight.values(), paths["airlight"])
    write_weights_csv(airlight, paths["weights"])
    outputs = list(paths.values()) + outputs
    config_out = {k: v for k, v in cfg.items()}
    config_out["threads"] = args.threads
    inputs = [Path(args.input)] + ([Path(args.config)] if args.config else [])
    write_manifest(out_dir, "dehaze", config_out, inputs, outputs, args.seed, started)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    started = time.perf_counter()
    try:
        spec = load_scene_config(args.scene)
    except (SceneSpecError, KeyError, TypeError) as exc:
        log.error("invalid scene spec: %s", exc)
        return EXIT_USAGE
    if args.seed is not None:
        spec.seed = args.seed
    try:
        hazy, t = synthesize(spec)
    except SceneSpecError as exc:
        log.error("invalid scene spec: %s", exc)
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [out_dir / "hazy.png", out_dir / "truth_t.pfm", out_dir / "truth_t.npy",
               out_dir / "truth_airlight.png", out_dir / "truth_weights.csv"]
    save_image(hazy, outputs[0])
    save_scalar_map(t, outputs[1])
    np.save(outputs[2], t)
    save_image(spec.airlight.values(), outputs[3])
    write_weights_csv(spec.airlight, outputs[4])
    config = {"scene": str(args.scene), "beta": spec.beta, "noise_sigma": spec.noise_sigma,
              "quantize": spec.quantize}
    inputs = [Path(args.scene)] + list(spec.sources.values())
    write_manifest(out_dir, "synthesize", config, inputs, outputs, spec.seed, started)
    return EXIT_OK


def _load_map_or_image(path):
    path = Path(path)
    if path.suffix.lower() in (".pfm",):
        return load_scalar_map(path)
    if path.suffix.lower() == ".npy":
        return np.load(path)
    return load_image(path)


def cmd_eval(args) -> int:
    pred = load_image(args.pred)
    truth = load_image(args.truth)
    t_pred = load_scalar_map(args.t_pred) if args.t_pred else None
    t_truth = load_scalar_map(args.t_truth) if args.t_truth else None
    a_pred = _load_map_or_image(args.a_pred) if args.a_pred else None
    a_truth = _load_map_or_image(args.a_truth) if args.a_truth else None
    mask = load_scalar_map(args.mask) if args.mask else None
    try:
        report = evaluate(pred, truth, t_pred, t_truth, a_pred, a_truth, mask)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    print(report.table())
    if args.out:
        Path(args.out).write_text(EvalReport.HEADER + "\n" + report.csv_line() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alfdehaze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dehaze", help="remove haze from one image")
    d.add_argument("input")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--config", help="TOML file with any of the options below")
    d.add_argument("--mode", choices=("alf", "cbr", "dcp"))
    d.add_argument("--order", type=int)
    d.add_argument("--cross-terms", dest="cross_terms", action="store_const", const=True)
    d.add_argument("--lambda1", type=float)
    d.add_argument("--lambda2", type=float)
    d.add_argument("--lambda3", type=float)
    d.add_argument("--lambda4", type=float)
    d.add_argument("--step", type=float)
    d.add_argument("--step-j", dest="step_j", type=float)
    d.add_argument("--iters", type=int)
    d.add_argument("--tol", type=float)
    d.add_argument("--t0", type=float)
    d.add_argument("--omega", type=float)
    d.add_argument("--patch", type=int)
    d.add_argument("--residual", choices=("eq13", "eq14"))
    d.add_argument("--weight-update", dest="weight_update", choices=("joint", "coordinate"))
    d.add_argument("--airlight", type=_parse_rgb, help="fixed r,g,b airlight for --mode dcp")
    d.add_argument("--no-clamp", dest="no_clamp", action="store_const", const=True)
    d.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    d.add_argument("--seed", type=int, default=0, help="recorded in the manifest; dehazing draws no random numbers")
    d.set_defaults(func=cmd_dehaze)

    s = sub.add_parser("synthesize", help="haze a clear image from a scene description")
    s.add_argument("scene", help="TOML scene file")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synthesize)

    e = sub.add_parser("eval", help="compare a result against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--t-pred")
    e.add_argument("--t-truth")
    e.add_argument("--a-pred")
    e.add_argument("--a-truth")
    e.add_argument("--mask")
    e.add_argument("--out", help="write the report as CSV")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        log.error("%s", exc)
        return EXIT_USAGE
    except NonFiniteEnergyError as exc:
        log.error("%s", exc)
        return EXIT_NONFINITE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
