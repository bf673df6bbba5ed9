"""Batch experiment driver.

Commands: ``generate`` (synthetic datasets to DTF + sidecar), ``select``
(fit one method, write score artifacts), ``grid`` (regularization grid
search with metrics), ``evaluate`` (metrics for an existing selection), and
``report`` (CSV summary from grid reports).

Every command accepts ``--config FILE`` (JSON) with command-line flags
taking precedence; unknown config keys are rejected.  Exit codes: 0 success,
2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import subprocess
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, synthdata
from .dtf import atomic_write_bytes, read_dataset, write_dataset
from .evaluation import (
    DEFAULT_GRID,
    METHODS,
    ORBIT_GRID,
    GridSpec,
    clustering_scores,
    feature_matrix,
    fit_and_score,
    grid_run,
    poc,
    potc,
)
from .tensor import centralize

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ValidationError(Exception):
    pass


def build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"stpca-{__version__}"


def _load_config(path: Optional[str], allowed: set[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON in {path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"config root must be an object, got {type(raw).__name__}")
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _merge(config: dict, args: argparse.Namespace, keys: Sequence[str]) -> dict:
    """Config-file values overridden by explicitly set command-line flags."""
    merged = dict(config)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _resolved_json(resolved: dict) -> dict:
    return {"config": resolved, "build": build_id(), "version": __version__}


def _write_json(path, payload: dict) -> None:
    atomic_write_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _pgm_bytes(score_map: np.ndarray) -> bytes:
    """8-bit binary PGM, row-major, max-score-normalized."""
    m = np.asarray(score_map, dtype=np.float64)
    top = m.max()
    scaled = (m / top * 255.0).round() if top > 0 else np.zeros_like(m)
    pixels = scaled.astype(np.uint8)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    return header + pixels.tobytes(order="C")


# ---------------------------------------------------------------- generate

_GENERATE_KEYS = {
    "family", "n", "case", "seed", "out", "samples", "series_len", "radii",
    "noise_sigma", "snr_db", "error_pattern", "error_units", "doas",
}


def cmd_generate(args: argparse.Namespace) -> int:
    config = _merge(_load_config(args.config, _GENERATE_KEYS), args,
                    ["family", "n", "case", "seed", "out", "samples", "noise_sigma",
                     "snr_db", "error_pattern", "error_units"])
    family = config.get("family")
    if family not in ("orbit", "array"):
        raise ValidationError(f"family must be 'orbit' or 'array', got {family!r}")
    seed = int(config.get("seed", 0))
    out = config.get("out") or f"{family}-{seed}"
    try:
        if family == "orbit":
            spec = synthdata.OrbitSpec(
                ambient_dim=int(config.get("n", 3)),
                series_len=int(config.get("series_len", 41)),
                samples=int(config.get("samples", 100)),
                radii=tuple(config.get("radii", (4.0, 5.0))),
                noise_sigma=float(config.get("noise_sigma", 1.0)),
                seed=seed,
            )
            dataset = synthdata.gen_orbit(spec)
        else:
            doas = config.get("doas")
            spec = synthdata.ArraySignalSpec(
                case=int(config.get("case", 1)),
                samples=int(config.get("samples", 800)),
                doas=tuple(tuple(d) for d in doas) if doas else None,
                error_pattern=config.get("error_pattern",
                                         "none" if int(config.get("case", 1)) == 1 else "random"),
                error_units=int(config.get("error_units", 4)),
                snr_db=float(config.get("snr_db", 20.0)),
                seed=seed,
            )
            dataset = synthdata.gen_array_signal(spec)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    dtf_path, side_path = write_dataset(out, dataset)
    print(f"wrote {dtf_path} ({'x'.join(str(d) for d in dataset.tensor.shape)}) and {side_path}")
    return EXIT_OK


# ------------------------------------------------------------------ select

_SELECT_KEYS = {"data", "method", "lam", "eta", "h", "seed", "out", "scenario"}


def cmd_select(args: argparse.Namespace) -> int:
    config = _merge(_load_config(args.config, _SELECT_KEYS), args,
                    ["data", "method", "lam", "eta", "h", "seed", "out", "scenario"])
    for key in ("data", "method"):
        if not config.get(key):
            raise ValidationError(f"missing required option: {key}")
    method = config["method"]
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    dataset = read_dataset(Path(config["data"]).with_suffix(""))
    scenario = config.get("scenario") or dataset.scenario
    if scenario not in ("slice-wise", "tube-wise"):
        raise ValidationError(f"scenario must be slice-wise or tube-wise, got {scenario!r}")
    if method in ("dp-1sd",) and scenario == "tube-wise":
        print("warning: per-dimension method on tube-wise data scores mode-1 dimensions only",
              file=sys.stderr)
    lam = float(config.get("lam", 1.0))
    eta = float(config.get("eta", 1.0))
    h = int(config.get("h", max(1, dataset.true_features.size)))
    seed = int(config.get("seed", 0))
    out_dir = Path(config.get("out") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    data = centralize(dataset.tensor, sample_mode=dataset.tensor.order)
    _, smap = fit_and_score(data, method, lam, eta, scenario, seed=seed)

    flat = smap.scores if smap.scores.ndim == 1 else smap.scores.flatten(order="F")
    rank_of = np.empty(len(smap.ranking), dtype=np.int64)
    rank_of[smap.ranking] = np.arange(len(smap.ranking))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["feature_index", "score", "rank"])
    for j in range(flat.size):
        writer.writerow([j, f"{flat[j]:.12g}", int(rank_of[j])])
    atomic_write_bytes(out_dir / "scores.csv", buf.getvalue().encode("ascii"))

    selection = [int(v) for v in smap.top(h)]
    _write_json(out_dir / "selection.json", {
        "method": method, "lambda": lam, "eta": eta, "h": h,
        "selection": selection, **_resolved_json({"data": str(config["data"]),
                                                  "scenario": scenario, "seed": seed}),
    })
    if smap.scores.ndim == 2:
        atomic_write_bytes(out_dir / "scoremap.pgm", _pgm_bytes(smap.scores))
    print(f"selected {selection} -> {out_dir}")
    return EXIT_OK


# -------------------------------------------------------------------- grid

_GRID_KEYS = {"data", "method", "lam_grid", "eta_grid", "h", "seed", "out",
              "clustering", "repeats", "workers"}


def cmd_grid(args: argparse.Namespace) -> int:
    config = _merge(_load_config(args.config, _GRID_KEYS), args,
                    ["data", "method", "h", "seed", "out", "clustering", "repeats", "workers"])
    for key in ("data", "method"):
        if not config.get(key):
            raise ValidationError(f"missing required option: {key}")
    method = config["method"]
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    dataset = read_dataset(Path(config["data"]).with_suffix(""))
    default_grid = ORBIT_GRID if dataset.spec.get("kind") == "orbit" else DEFAULT_GRID
    lam_grid = tuple(float(v) for v in config.get("lam_grid", default_grid))
    eta_grid = tuple(float(v) for v in config.get("eta_grid", default_grid))
    h = int(config.get("h", max(1, dataset.true_features.size)))
    try:
        grid = GridSpec(lam_grid, eta_grid, h)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    result = grid_run(
        dataset, method, grid,
        seed=int(config.get("seed", 0)),
        with_clustering=bool(config.get("clustering", not dataset.true_features.size)),
        repeats=int(config.get("repeats", 30)),
        workers=int(config["workers"]) if config.get("workers") is not None else None,
    )
    result.update(_resolved_json({
        "data": str(config["data"]), "method": method, "lam_grid": list(lam_grid),
        "eta_grid": list(eta_grid), "h": h, "seed": int(config.get("seed", 0)),
    }))
    out = Path(config.get("out") or "grid-report.json")
    _write_json(out, result)
    summary = {k: v for k, v in result.items() if k in ("poc", "potc", "acc_mean", "nmi_mean")}
    print(f"grid {method} g={result['g']} -> {out} {summary}")
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

_EVALUATE_KEYS = {"data", "selection", "seed", "repeats", "out"}


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _merge(_load_config(args.config, _EVALUATE_KEYS), args,
                    ["data", "selection", "seed", "repeats", "out"])
    for key in ("data", "selection"):
        if not config.get(key):
            raise ValidationError(f"missing required option: {key}")
    dataset = read_dataset(Path(config["data"]).with_suffix(""))
    sel_path = config["selection"]
    with open(sel_path, "r", encoding="utf-8") as fh:
        try:
            sel_doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"malformed selection JSON in {sel_path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(sel_doc, dict) or "selection" not in sel_doc:
        raise ValidationError("selection file must be an object with a 'selection' array")
    selection = sel_doc["selection"]
    if (not isinstance(selection, list) or not selection
            or not all(isinstance(v, int) for v in selection)):
        raise ValidationError("'selection' must be a nonempty array of integers")

    metrics: dict = {"h": len(selection), "selection": selection}
    if dataset.true_features.size:
        metrics["poc"] = poc([selection], dataset.true_features, len(selection))
        metrics["potc"] = potc([selection], dataset.true_features)
    points = feature_matrix(dataset.tensor.data, selection, dataset.scenario)
    metrics.update(clustering_scores(points, dataset.labels, dataset.n_classes,
                                     repeats=int(config.get("repeats", 30)),
                                     seed=int(config.get("seed", 0))))
    metrics.update(_resolved_json({"data": str(config["data"]), "selection_file": str(sel_path)}))
    out = config.get("out")
    if out:
        _write_json(out, metrics)
    print(json.dumps({k: v for k, v in metrics.items()
                      if k in ("poc", "potc", "acc_mean", "acc_std", "nmi_mean", "nmi_std")},
                     sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ report

_REPORT_KEYS = {"inputs", "out"}


def cmd_report(args: argparse.Namespace) -> int:
    config = _merge(_load_config(args.config, _REPORT_KEYS), args, ["out"])
    inputs = list(args.inputs or config.get("inputs") or [])
    if not inputs:
        raise ValidationError("report needs at least one grid-report JSON file")
    rows = []
    for path in inputs:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(
                    f"malformed JSON in {path}: line {exc.lineno}: {exc.msg}") from exc
        for rec in doc.get("records", []):
            rows.append({
                "source": str(path),
                "method": rec.get("method", doc.get("method", "")),
                "variant": rec.get("variant", ""),
                "lambda": rec.get("lambda", ""),
                "eta": rec.get("eta", ""),
                "h": rec.get("h", doc.get("h", "")),
                "selection": ";".join(str(v) for v in rec.get("selection", [])),
                "acc_mean": rec.get("acc_mean", ""),
                "acc_std": rec.get("acc_std", ""),
                "nmi_mean": rec.get("nmi_mean", ""),
                "nmi_std": rec.get("nmi_std", ""),
                "poc": rec.get("poc", ""),
                "potc": rec.get("potc", ""),
                "wall_time_s": rec.get("wall_time_s", ""),
                "error": rec.get("error", ""),
            })
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else
                            ["source", "method", "variant", "lambda", "eta", "h", "selection",
                             "acc_mean", "acc_std", "nmi_mean", "nmi_std", "poc",
                             "potc", "wall_time_s", "error"])
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    out = config.get("out") or "report.csv"
    atomic_write_bytes(out, buf.getvalue().encode())
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


# -------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stpca", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"stpca {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("family", nargs="?", choices=["orbit", "array"])
    g.add_argument("--config")
    g.add_argument("--n", type=int, help="orbit ambient dimension (3, 4 or 5)")
    g.add_argument("--case", type=int, help="array signal case (1 or 2)")
    g.add_argument("--samples", type=int)
    g.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    g.add_argument("--snr-db", dest="snr_db", type=float)
    g.add_argument("--error-pattern", dest="error_pattern",
                   choices=["random", "horizontal", "vertical", "rectangular"])
    g.add_argument("--error-units", dest="error_units", type=int, choices=[4, 5])
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output prefix (writes <out>.dtf and <out>.json)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="fit one method and write score artifacts")
    s.add_argument("--config")
    s.add_argument("--data", help="DTF file (sidecar JSON expected alongside)")
    s.add_argument("--method", choices=list(METHODS))
    s.add_argument("--lam", type=float)
    s.add_argument("--eta", type=float)
    s.add_argument("--h", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--scenario", choices=["slice-wise", "tube-wise"])
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_select)

    r = sub.add_parser("grid", help="regularization grid search with metrics")
    r.add_argument("--config")
    r.add_argument("--data")
    r.add_argument("--method", choices=list(METHODS))
    r.add_argument("--h", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--clustering", action="store_const", const=True)
    r.add_argument("--repeats", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", help="report JSON path")
    r.set_defaults(func=cmd_grid)

    e = sub.add_parser("evaluate", help="metrics for an existing selection file")
    e.add_argument("--config")
    e.add_argument("--data")
    e.add_argument("--selection", help="selection.json path")
    e.add_argument("--seed", type=int)
    e.add_argument("--repeats", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("report", help="CSV summary from grid reports")
    c.add_argument("inputs", nargs="*")
    c.add_argument("--config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
