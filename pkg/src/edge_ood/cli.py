"""Command-line surface: reproducible experiments plus report emission.

Commands: synth, train, score, eval, select-oe, sweep. Every
artifact-producing command writes exactly one manifest.json next to its
outputs; reruns with identical inputs are byte-identical except for the
manifest's duration_seconds field. Failures print a machine-readable error
JSON to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import MultiLabelDataset, format_float, load_dataset, save_dataset
from .errors import ConfigError, EdgeOodError
from .losses import EdgeWeights  # noqa: F401  (re-exported surface)
from .metrics import (
    detection_report,
    mean_average_precision,
    save_report,
    save_tail_curve_csv,
    tail_curve,
)
from .model import (
    EdgeConfig,
    load_checkpoint,
    save_checkpoint,
    save_history,
    train_edge,
)
from .oesel import DilationReport, mean_dilation, save_reports, select_oe
from .scoring import (
    ScoreKind,
    load_scores,
    save_histogram,
    save_scores,
    score_dataset,
    score_histogram,
)
from .synth import SynthSpec, generate, spec_to_meta

__all__ = ["main"]


def _load_json(path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return payload


def _coerce_config(payload: dict, cls, source: str):
    """Build a config dataclass, rejecting unknown keys and bad types."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - set(fields))
    if unknown:
        raise ConfigError(
            f"{source}: unknown config keys {unknown}; "
            f"valid keys: {sorted(fields)}"
        )
    coerced = {}
    for name, value in payload.items():
        declared = str(fields[name].type)
        if isinstance(value, bool):
            raise ConfigError(f"{source}: key '{name}' must be a number")
        if "int" in declared:
            if not isinstance(value, int):
                raise ConfigError(f"{source}: key '{name}' must be an integer")
            coerced[name] = value
        elif "float" in declared:
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{source}: key '{name}' must be a number")
            coerced[name] = float(value)
        else:
            coerced[name] = value
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _load_config(path, cls):
    return _coerce_config(_load_json(path), cls, str(path))


def _write_manifest(out_dir: Path, command: str, config, seeds: dict, inputs, outputs, started: float):
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": sorted(str(p) for p in outputs),
        "tool_version": __version__,
        "duration_seconds": time.perf_counter() - started,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_kinds(spec: str) -> list[ScoreKind]:
    kinds = []
    for token in spec.split(","):
        token = token.strip()
        try:
            kinds.append(ScoreKind(token))
        except ValueError:
            valid = ", ".join(k.value for k in ScoreKind)
            raise ConfigError(f"unknown score kind '{token}'; valid kinds: {valid}")
    return kinds


def cmd_synth(args) -> None:
    started = time.perf_counter()
    spec = _load_config(args.config, SynthSpec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = _out_dir(args)
    datasets = generate(spec)
    outputs = []
    for ds, sub in zip(datasets, ("in_train", "in_test", "oe", "ood")):
        save_dataset(ds, out / sub, extra_meta=spec_to_meta(spec))
        outputs.append(out / sub)
    _write_manifest(
        out, "synth", asdict(spec), {"root": spec.seed}, [args.config], outputs, started
    )


def cmd_train(args) -> None:
    started = time.perf_counter()
    cfg = _load_config(args.config, EdgeConfig)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    d_in = load_dataset(args.id_train)
    d_oe = load_dataset(args.oe)
    out = _out_dir(args)
    model, history = train_edge(d_in, d_oe, cfg)
    ckpt = out / "checkpoint.json"
    hist = out / "history.csv"
    save_checkpoint(model, cfg, ckpt)
    save_history(history, hist)
    _write_manifest(
        out,
        "train",
        asdict(cfg),
        {"root": cfg.seed},
        [args.config, args.id_train, args.oe],
        [ckpt, hist],
        started,
    )


def _save_logits(logits: np.ndarray, path: Path):
    header = ",".join(f"l{j}" for j in range(logits.shape[1]))
    lines = [header]
    for row in logits:
        lines.append(",".join(format_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_score(args) -> None:
    started = time.perf_counter()
    model, cfg = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset)
    kinds = _parse_kinds(args.scores)
    out = _out_dir(args)
    _, logits = model.forward(ds.features)
    outputs = [out / "logits.csv"]
    _save_logits(logits, out / "logits.csv")
    for kind in kinds:
        sv = score_dataset(logits, kind, source=ds.name)
        score_path = out / f"scores_{kind.value}.csv"
        hist_path = out / f"histogram_{kind.value}.csv"
        save_scores(sv, score_path)
        edges, counts = score_histogram(sv, args.bins)
        save_histogram(edges, counts, hist_path)
        outputs += [score_path, hist_path]
    _write_manifest(
        out,
        "score",
        {"scores": [k.value for k in kinds], "bins": args.bins},
        {"model_seed": cfg.seed},
        [args.checkpoint, args.dataset],
        outputs,
        started,
    )


def cmd_eval(args) -> None:
    started = time.perf_counter()
    ids = load_scores(args.id_scores)
    oods = load_scores(args.ood_scores)
    d_test = load_dataset(args.id_test)
    train_counts = None
    if args.id_train:
        train_set = load_dataset(args.id_train)
        if train_set.labels is None:
            raise ConfigError(f"--id-train dataset {args.id_train} has no labels")
        train_counts = train_set.class_counts
    out = _out_dir(args)
    report = detection_report(ids, oods, score_kind=args.kind, tpr_target=args.tpr)
    curve = tail_curve(
        d_test, ids, oods, steps=args.steps, train_class_counts=train_counts,
        tpr_target=args.tpr,
    )
    extra = {"tail_curve": [asdict(p) for p in curve.points]}
    if args.id_logits:
        logits = np.loadtxt(args.id_logits, delimiter=",", skiprows=1, ndmin=2)
        extra["id_map"] = mean_average_precision(logits, d_test.labels)
    report_path = out / "report.json"
    curve_path = out / "tail_curve.csv"
    save_report(report, report_path, extra=extra)
    save_tail_curve_csv(curve, curve_path)
    inputs = [args.id_scores, args.ood_scores, args.id_test]
    if args.id_train:
        inputs.append(args.id_train)
    if args.id_logits:
        inputs.append(args.id_logits)
    _write_manifest(
        out,
        "eval",
        {"steps": args.steps, "tpr": args.tpr, "kind": args.kind},
        {},
        inputs,
        [report_path, curve_path],
        started,
    )


def cmd_select_oe(args) -> None:
    started = time.perf_counter()
    out = _out_dir(args)
    inputs = []
    if args.precomputed:
        payload = _load_json(args.precomputed)
        reports = [
            DilationReport(
                candidate=name,
                distances=[],
                mean_distance=float(value),
                k_svd=0,
                batch_size=0,
                num_batches=0,
                feature_model="precomputed",
            )
            for name, value in payload.items()
        ]
        inputs.append(args.precomputed)
        seeds = {}
    else:
        if not (args.checkpoint and args.id_train and args.candidates):
            raise ConfigError(
                "select-oe needs either --precomputed or all of "
                "--checkpoint, --id-train and --candidates"
            )
        model, _ = load_checkpoint(args.checkpoint)
        id_set = load_dataset(args.id_train)
        reports = []
        for cand in args.candidates.split(","):
            cand = cand.strip()
            reports.append(
                mean_dilation(
                    id_set,
                    load_dataset(cand),
                    model,
                    batch_size=args.batch_size,
                    num_batches=args.batches,
                    k_svd=args.k_svd,
                    seed=args.seed if args.seed is not None else 0,
                    feature_model=str(args.checkpoint),
                )
            )
            inputs.append(cand)
        inputs += [args.checkpoint, args.id_train]
        seeds = {"root": args.seed if args.seed is not None else 0}
    winner = select_oe(reports)
    reports_path = out / "dilation_reports.json"
    winner_path = out / "winner.json"
    save_reports(reports, reports_path)
    winner_path.write_text(json.dumps({"selected": winner}, indent=2) + "\n")
    _write_manifest(
        out,
        "select-oe",
        {"k_svd": args.k_svd, "batches": args.batches, "batch_size": args.batch_size},
        seeds,
        inputs,
        [reports_path, winner_path],
        started,
    )


def _grid_cells(grid: dict) -> list[dict]:
    keys = sorted(grid)
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid key '{key}' must map to a non-empty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def cmd_sweep(args) -> None:
    started = time.perf_counter()
    base = _load_config(args.config, EdgeConfig)
    grid = _load_json(args.grid)
    valid_keys = {f.name for f in dataclasses.fields(EdgeConfig)}
    unknown = sorted(set(grid) - valid_keys)
    if unknown:
        raise ConfigError(f"{args.grid}: grid keys {unknown} are not EdgeConfig fields")
    cells = _grid_cells(grid)
    d_in = load_dataset(args.id_train)
    d_oe = load_dataset(args.oe)
    d_test = load_dataset(args.id_test)
    d_ood = load_dataset(args.ood)
    out = _out_dir(args)

    swept_keys = sorted(grid)
    summary = ["cell," + ",".join(swept_keys) + ",fpr95,auroc,aupr"]
    outputs = []
    for i, cell in enumerate(cells):
        cfg = _coerce_config({**asdict(base), **cell}, EdgeConfig, f"cell {i}")
        cell_dir = out / f"cell_{i:03d}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        model, history = train_edge(d_in, d_oe, cfg)
        save_checkpoint(model, cfg, cell_dir / "checkpoint.json")
        save_history(history, cell_dir / "history.csv")
        (cell_dir / "cell_config.json").write_text(
            json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n"
        )
        _, test_logits = model.forward(d_test.features)
        _, ood_logits = model.forward(d_ood.features)
        id_scores = score_dataset(test_logits, ScoreKind.JOINT_ENERGY).values
        ood_scores = score_dataset(ood_logits, ScoreKind.JOINT_ENERGY).values
        report = detection_report(
            id_scores, ood_scores, score_kind=ScoreKind.JOINT_ENERGY.value,
            tpr_target=args.tpr,
        )
        save_report(report, cell_dir / "report.json")
        cell_values = ",".join(format_float(cell[k]) if isinstance(cell[k], float)
                               else str(cell[k]) for k in swept_keys)
        summary.append(
            f"{i},{cell_values},{format_float(report.fpr95)},"
            f"{format_float(report.auroc)},{format_float(report.aupr)}"
        )
        outputs.append(cell_dir)
    summary_path = out / "summary.csv"
    summary_path.write_text("\n".join(summary) + "\n")
    outputs.append(summary_path)
    _write_manifest(
        out,
        "sweep",
        {"base": asdict(base), "grid": grid},
        {"root": base.seed},
        [args.config, args.grid, args.id_train, args.oe, args.id_test, args.ood],
        outputs,
        started,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edge-ood",
        description="Energy-gap OOD detection toolkit: synthetic benchmarks, "
        "unknown-aware training, scoring and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the four synthetic dataset splits")
    p.add_argument("--config", required=True, help="SynthSpec JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model with the combined objective")
    p.add_argument("--config", required=True, help="EdgeConfig JSON file")
    p.add_argument("--id-train", required=True, help="labeled ID dataset directory")
    p.add_argument("--oe", required=True, help="outlier-exposure dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with one or more score functions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument(
        "--scores",
        default="joint_energy",
        help="comma list of kinds: " + ",".join(k.value for k in ScoreKind),
    )
    p.add_argument("--bins", type=int, default=20, help="histogram bins")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="detection report plus head-removal tail curve")
    p.add_argument("--id-scores", required=True, help="scores CSV for ID samples")
    p.add_argument("--ood-scores", required=True, help="scores CSV for OOD samples")
    p.add_argument("--id-test", required=True, help="labeled ID test dataset directory")
    p.add_argument("--id-train", default=None,
                   help="ID train directory for head-class ranking (default: test counts)")
    p.add_argument("--id-logits", default=None,
                   help="logits CSV for the ID test set; adds mAP to the report")
    p.add_argument("--steps", type=int, default=10, help="tail-curve points after x=0")
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--kind", default="unspecified", help="score kind label for the report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select-oe", help="rank candidate OE sets by dilation distance")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--id-train", default=None)
    p.add_argument("--candidates", default=None, help="comma list of dataset directories")
    p.add_argument("--precomputed", default=None,
                   help="JSON of {candidate: mean_distance} to rank directly")
    p.add_argument("--k-svd", dest="k_svd", type=int, default=None)
    p.add_argument("--batches", type=int, default=16)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_oe)

    p = sub.add_parser("sweep", help="train/eval every cell of a hyper-parameter grid")
    p.add_argument("--config", required=True, help="base EdgeConfig JSON file")
    p.add_argument("--grid", required=True, help="JSON of {field: [values, ...]}")
    p.add_argument("--id-train", required=True)
    p.add_argument("--oe", required=True)
    p.add_argument("--id-test", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except EdgeOodError as exc:
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(
            json.dumps({"error": {"type": "IOError", "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
