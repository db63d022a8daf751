"""Command-line surface for the permeability pipeline.

Subcommands cover the full workflow: generate a synthetic dataset, train one
of the three variants, predict on the held-out wells, evaluate against the
measured logs, dump checkpoint error curves, run the inverse-distance
baseline, and plot any of the emitted CSVs as an SVG line chart.

Exit codes: 0 success, 1 usage error, 2 data or config validation error,
3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import html
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataio, evaluation, network, training
from .dataio import ValidationError
from .evaluation import FaciesWeighting
from .training import NumericFailure, PredictedWell, TrainConfig

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures exit 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated integers, got '{text}'"
        )
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer triple: '{text}'")


def _float_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated numbers, got '{text}'"
        )
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number triple: '{text}'")


def _write_manifest(out_dir, command: str, payload: dict) -> None:
    blob = {"command": command, "package_version": __version__}
    blob.update(payload)
    (Path(out_dir) / "run.json").write_text(json.dumps(blob, indent=2) + "\n")


def _load_dataset(data_path, split_path):
    wells = dataio.load_wells_csv(data_path)
    split = dataio.load_split_csv(split_path)
    return dataio.partition_wells(wells, split)


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    cfg = dataio.SyntheticConfig(
        seed=args.seed, wells_per_facies=tuple(args.wells_per_facies)
    )
    wells = dataio.generate_synthetic(cfg)
    split = dataio.allocate_split(
        wells, tuple(args.test_per_facies), np.random.default_rng(args.seed)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_wells_csv(wells, out / "wells.csv")
    dataio.write_split_csv(split, out / "split.csv")
    n_test = sum(1 for role in split.values() if role == "test")
    _write_manifest(
        out,
        "generate",
        {
            "config": dataclasses.asdict(cfg),
            "test_per_facies": list(args.test_per_facies),
            "wells": len(wells),
            "train": len(wells) - n_test,
            "test": n_test,
        },
    )
    print(f"wrote {len(wells)} wells ({len(wells) - n_test} train / {n_test} test) to {out}")
    return 0


# ------------------------------------------------------------------- train


def cmd_train(args) -> int:
    train_wells, test_wells = _load_dataset(args.data, args.split)
    if args.variant == "lstma" and args.qubits is not None:
        print("warning: --qubits has no effect with --variant lstma", file=sys.stderr)
    cfg = TrainConfig(
        variant=args.variant,
        n_qubits=args.qubits if args.qubits is not None else 4,
        n_layers=args.vqc_layers,
        epochs=args.epochs,
        checkpoint_every=args.checkpoint_every,
        runs=args.runs,
        seed=args.seed,
        lr=args.lr,
        dropout=args.dropout,
        huber_delta=args.delta,
        hidden=args.hidden,
        timesteps=args.timesteps,
        average_domain=args.average_domain,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = training.multi_run(cfg, train_wells, test_wells, out_dir=out, jobs=args.jobs)
    _write_manifest(
        out,
        "train",
        {
            "config": dataclasses.asdict(cfg),
            "run_seeds": [cfg.seed + r for r in range(cfg.runs)],
            "data": str(args.data),
            "split": str(args.split),
            "train_wells": len(train_wells),
            "test_wells": len(test_wells),
        },
    )
    for r, run in enumerate(result.runs):
        print(f"run {r} (seed {cfg.seed + r}): final loss {run.loss_trace[-1]:.6f}")
    print(f"wrote {cfg.runs} run(s) to {out}")
    return 0


# ----------------------------------------------------------------- predict


def _run_dirs(model_dir: Path) -> list[Path]:
    dirs = [p for p in model_dir.glob("run_*") if p.is_dir()]
    if not dirs:
        raise ValidationError(f"no run_* directories under {model_dir}")
    return sorted(dirs, key=lambda p: int(p.name.split("_", 1)[1]))


def _manifest_domain(model_dir: Path) -> str:
    manifest = model_dir / "run.json"
    if manifest.exists():
        blob = json.loads(manifest.read_text())
        return blob.get("config", {}).get("average_domain", "md")
    return "md"


def write_predictions_csv(path, averaged, per_run) -> None:
    """Emit averaged curves, plus one column per run when there are several."""
    many = len(per_run) > 1
    header = ["well_id", "depth", "perm_md_pred"]
    if many:
        header += [f"run_{i}" for i in range(len(per_run))]
    lines = [",".join(header)]
    for idx, pw in enumerate(averaged):
        for j, depth in enumerate(pw.depth_grid):
            row = [pw.well_id, repr(float(depth)), repr(float(pw.perm_md[j]))]
            if many:
                row += [repr(float(runs[idx].perm_md[j])) for runs in per_run]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions_csv(path) -> list[PredictedWell]:
    """Read the averaged column of a predictions CSV back into curves."""
    order: list[str] = []
    depths: dict[str, list[float]] = {}
    preds: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["well_id", "depth", "perm_md_pred"]:
            raise ValidationError(f"{path}: not a predictions CSV")
        for lineno, row in enumerate(reader, start=2):
            if len(row) < 3:
                raise ValidationError(f"{path} line {lineno}: too few columns")
            well_id = row[0]
            try:
                depth, pred = float(row[1]), float(row[2])
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: non-numeric value")
            if well_id not in preds:
                order.append(well_id)
                depths[well_id] = []
                preds[well_id] = []
            depths[well_id].append(depth)
            preds[well_id].append(pred)
    if not order:
        raise ValidationError(f"{path}: no prediction rows")
    return [
        PredictedWell(w, np.array(depths[w]), np.array(preds[w])) for w in order
    ]


def cmd_predict(args) -> int:
    _, test_wells = _load_dataset(args.data, args.split)
    model_dir = Path(args.model_dir)
    per_run = []
    for rd in _run_dirs(model_dir):
        ckpt = training.load_checkpoint(rd / "checkpoint_final.json")
        per_run.append(training.predict(ckpt, test_wells))
    domain = args.average_domain or _manifest_domain(model_dir)
    averaged = training.average_curves(per_run, domain)
    write_predictions_csv(args.out, averaged, per_run)
    print(f"wrote predictions for {len(averaged)} wells ({len(per_run)} runs) to {args.out}")
    return 0


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    truth = dataio.load_wells_csv(args.data)
    preds = read_predictions_csv(args.pred)
    metadata = {}
    if args.model_dir:
        manifest = Path(args.model_dir) / "run.json"
        if manifest.exists():
            cfg = json.loads(manifest.read_text()).get("config", {})
            metadata = {
                k: cfg.get(k) for k in ("variant", "n_qubits", "runs") if k in cfg
            }
    report = evaluation.facies_report(preds, truth, metadata)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_metrics_csv(report, out / "metrics.csv")
    evaluation.write_metrics_json(report, out / "metrics.json")
    _write_manifest(
        out,
        "evaluate",
        {"pred": str(args.pred), "data": str(args.data), "metadata": metadata},
    )
    m, s = report.overall_avg
    print(f"overall average: MAE {m:.4f} mD, RMSE {s:.4f} mD ({len(report.wells)} wells)")
    return 0


# ------------------------------------------------------------------ curves


def cmd_curves(args) -> int:
    _, test_wells = _load_dataset(args.data, args.split)
    points = evaluation.error_evolution(args.run_dir, test_wells)
    evaluation.write_curves_csv(points, args.out)
    print(f"scored {len(points)} checkpoints to {args.out}")
    return 0


# ---------------------------------------------------------------- baseline


def cmd_baseline(args) -> int:
    train_wells, test_wells = _load_dataset(args.data, args.split)
    weighting = FaciesWeighting(power=args.power, similarity=tuple(args.similarity))
    lines = ["well_id,depth,perm_md_pred"]
    for well in test_wells:
        curve = evaluation.idw_facies_baseline(
            train_wells, well.x, well.y, well.facies, weighting, n_points=args.points
        )
        grid = np.linspace(well.depths[0], well.depths[-1], args.points)
        for depth, pred in zip(grid, curve):
            lines.append(f"{well.well_id},{float(depth)!r},{float(pred)!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote baseline curves for {len(test_wells)} wells to {args.out}")
    return 0


# -------------------------------------------------------------------- plot


def _fmt(v: float) -> str:
    return f"{v:g}"


def line_chart_svg(
    series,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_y: bool = False,
    width: int = 720,
    height: int = 440,
) -> str:
    """Render named (xs, ys) series as a standalone SVG line chart.

    With log_y the y axis is log10-scaled and every value must be positive.
    """
    if not series:
        raise ValidationError("nothing to plot")
    prepared = []
    for name, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size == 0 or xs.shape != ys.shape:
            raise ValidationError(f"series '{name}' is empty or ragged")
        if log_y:
            if np.any(ys <= 0):
                raise ValidationError(
                    f"series '{name}' has non-positive values; log axis impossible"
                )
            ys = np.log10(ys)
        prepared.append((name, xs, ys))

    x_lo = min(xs.min() for _, xs, _ in prepared)
    x_hi = max(xs.max() for _, xs, _ in prepared)
    y_lo = min(ys.min() for _, _, ys in prepared)
    y_hi = max(ys.max() for _, _, ys in prepared)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    left, right, top, bottom = 64, 18, 36, 48
    plot_w = width - left - right
    plot_h = height - top - bottom

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return top + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-size="14">{html.escape(title)}</text>'
        )

    for i in range(5):
        f = i / 4
        gx = left + f * plot_w
        gy = top + f * plot_h
        parts.append(
            f'<line x1="{gx:.1f}" y1="{top}" x2="{gx:.1f}" y2="{top + plot_h}" '
            f'stroke="#ddd"/>'
        )
        parts.append(
            f'<line x1="{left}" y1="{gy:.1f}" x2="{left + plot_w}" y2="{gy:.1f}" '
            f'stroke="#ddd"/>'
        )
        xv = x_lo + f * (x_hi - x_lo)
        yv = y_hi - f * (y_hi - y_lo)
        y_text = _fmt(10.0**yv) if log_y else _fmt(yv)
        parts.append(
            f'<text x="{gx:.1f}" y="{top + plot_h + 16}" '
            f'text-anchor="middle">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{gy + 4:.1f}" text-anchor="end">{y_text}</text>'
        )

    parts.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333"/>'
    )
    if x_label:
        parts.append(
            f'<text x="{left + plot_w / 2:.1f}" y="{height - 10}" '
            f'text-anchor="middle">{html.escape(x_label)}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="14" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + plot_h / 2:.1f})">{html.escape(y_label)}</text>'
        )

    for i, (name, xs, ys) in enumerate(prepared):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        ly = top + 14 + 16 * i
        parts.append(
            f'<line x1="{left + plot_w - 110}" y1="{ly - 4}" '
            f'x2="{left + plot_w - 90}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 84}" y="{ly}">{html.escape(str(name))}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _read_table(path) -> tuple[list[str], dict[str, list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValidationError(f"{path}: empty file")
        columns: dict[str, list[float]] = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path} line {lineno}: ragged row")
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"{path} line {lineno}: non-numeric cell '{cell}' "
                        f"in column '{name}'"
                    )
    return header, columns


def cmd_plot(args) -> int:
    header, columns = _read_table(args.input)
    x_col = args.x or header[0]
    if x_col not in columns:
        raise ValidationError(f"no column '{x_col}' in {args.input}")
    if args.y:
        y_cols = args.y.split(",")
    else:
        y_cols = [name for name in header if name != x_col]
    series = []
    for name in y_cols:
        if name not in columns:
            raise ValidationError(f"no column '{name}' in {args.input}")
        series.append((name, columns[x_col], columns[name]))
    svg = line_chart_svg(
        series,
        title=args.title or Path(args.input).stem,
        x_label=x_col,
        y_label=y_cols[0] if len(y_cols) == 1 else "",
        log_y=args.log_y,
    )
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    parser = _Parser(prog="qlstma", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"qlstma {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="write a synthetic wells.csv and split.csv")
    p.add_argument("--wells-per-facies", type=_int_triple, default=(34, 17, 12),
                   metavar="A,B,C", help="total wells per facies (default 34,17,12)")
    p.add_argument("--test-per-facies", type=_int_triple, default=(5, 3, 2),
                   metavar="A,B,C", help="held-out wells per facies (default 5,3,2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one variant over several seeded runs")
    p.add_argument("--data", required=True, help="wells CSV")
    p.add_argument("--split", required=True, help="split CSV")
    p.add_argument("--variant", choices=list(network.VARIANTS), default="lstma")
    p.add_argument("--qubits", type=int, choices=(4, 6, 8), default=None,
                   help="VQC width for quantum variants (default 4)")
    p.add_argument("--vqc-layers", type=int, default=1)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--checkpoint-every", type=int, default=10)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=1.0, help="Huber loss threshold")
    p.add_argument("--hidden", type=int, default=64, help="hidden state width")
    p.add_argument("--timesteps", type=int, default=100, help="resampled curve length")
    p.add_argument("--average-domain", choices=("md", "log"), default="md")
    p.add_argument("--jobs", type=int, default=1, help="parallel training runs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="average per-run predictions on the test wells")
    p.add_argument("--model-dir", required=True, help="train output directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--average-domain", choices=("md", "log"), default=None,
                   help="override the domain recorded at training time")
    p.add_argument("--out", required=True, help="predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a predictions CSV against the logs")
    p.add_argument("--pred", required=True, help="predictions CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model-dir", default=None,
                   help="optional train directory; copies variant/runs into metadata")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="test-set error of every intermediate checkpoint")
    p.add_argument("--run-dir", required=True, help="one run's checkpoint directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True, help="curves CSV")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("baseline", help="facies-weighted inverse-distance prediction")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--similarity", type=_float_triple, default=(1.0, 0.5, 0.25),
                   metavar="S0,S1,S2", help="weight per facies distance")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", required=True, help="baseline CSV")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("plot", help="render a CSV as an SVG line chart")
    p.add_argument("--input", required=True, help="CSV with a header row")
    p.add_argument("--x", default=None, help="x column (default: first)")
    p.add_argument("--y", default=None, help="comma-separated y columns (default: rest)")
    p.add_argument("--log-y", action="store_true")
    p.add_argument("--title", default=None)
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args) or 0
    except NumericFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
