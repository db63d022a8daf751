"""Prediction quality metrics and the facies-aware inverse-distance baseline.

Metrics are always computed on permeability curves in mD. Truth curves come
from the same spline resampling the training pipeline uses, so predicted and
measured values are compared on identical depth grids.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataio, training
from .dataio import ValidationError, Well
from .training import PredictedWell

_CHECKPOINT_NAME = re.compile(r"^checkpoint_epoch_(\d+)\.json$")


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error between two equally long curves."""
    pred, truth = _paired(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared error between two equally long curves."""
    pred, truth = _paired(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def _paired(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(
            f"curve lengths differ: {pred.shape[0]} vs {truth.shape[0]}"
        )
    if pred.size == 0:
        raise ValueError("cannot score empty curves")
    return pred, truth


@dataclass(frozen=True)
class WellMetrics:
    """Per-well error summary, in mD."""

    well_id: str
    facies: int
    mae_md: float
    rmse_md: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-well rows plus facies and overall averages.

    Averages are unweighted means of the per-well values, so a facies with
    more test wells does not dominate the overall row beyond its well count.
    """

    wells: tuple[WellMetrics, ...]
    facies_avg: dict[int, tuple[float, float]]
    overall_avg: tuple[float, float]
    metadata: dict = field(default_factory=dict)


def truth_curve_md(well: Well, n_points: int) -> np.ndarray:
    """Resample a well's measured permeability onto a uniform grid, in mD."""
    _, log_vals = dataio.resample_spline(well, n_points)
    return dataio.log_inverse(log_vals)


def facies_report(
    predicted: Sequence[PredictedWell],
    truth_wells: Sequence[Well],
    metadata: dict | None = None,
) -> MetricsReport:
    """Score predicted curves against measured wells.

    Every predicted well must have a truth counterpart with the same id; the
    truth log is resampled onto a grid of the prediction's length before
    scoring.

    Raises
    ------
    ValidationError
        If a predicted well has no matching truth well.
    """
    by_id = {w.well_id: w for w in truth_wells}
    rows = []
    for pw in predicted:
        well = by_id.get(pw.well_id)
        if well is None:
            raise ValidationError(f"no truth well matches prediction '{pw.well_id}'")
        truth = truth_curve_md(well, len(pw.perm_md))
        rows.append(
            WellMetrics(
                well_id=pw.well_id,
                facies=well.facies,
                mae_md=mae(pw.perm_md, truth),
                rmse_md=rmse(pw.perm_md, truth),
            )
        )
    if not rows:
        raise ValidationError("no predictions to score")

    facies_avg = {}
    for code in sorted({r.facies for r in rows}):
        group = [r for r in rows if r.facies == code]
        facies_avg[code] = (
            float(np.mean([r.mae_md for r in group])),
            float(np.mean([r.rmse_md for r in group])),
        )
    overall = (
        float(np.mean([r.mae_md for r in rows])),
        float(np.mean([r.rmse_md for r in rows])),
    )
    return MetricsReport(
        wells=tuple(rows),
        facies_avg=facies_avg,
        overall_avg=overall,
        metadata=dict(metadata or {}),
    )


def write_metrics_csv(report: MetricsReport, path) -> None:
    """Emit per-well rows followed by facies_avg rows and the overall_avg row."""
    lines = ["well_id,facies,mae_md,rmse_md"]
    for r in report.wells:
        lines.append(f"{r.well_id},{r.facies},{r.mae_md!r},{r.rmse_md!r}")
    for code, (m, s) in report.facies_avg.items():
        lines.append(f"facies_avg,{code},{m!r},{s!r}")
    m, s = report.overall_avg
    lines.append(f"overall_avg,,{m!r},{s!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_json(report: MetricsReport, path) -> None:
    blob = {
        "wells": [asdict(r) for r in report.wells],
        "facies_avg": {
            str(code): {"mae_md": m, "rmse_md": s}
            for code, (m, s) in report.facies_avg.items()
        },
        "overall_avg": {
            "mae_md": report.overall_avg[0],
            "rmse_md": report.overall_avg[1],
        },
        "metadata": report.metadata,
    }
    Path(path).write_text(json.dumps(blob, indent=2) + "\n")


@dataclass(frozen=True)
class EvolutionPoint:
    """Test-set error of one intermediate checkpoint."""

    epoch: int
    mae_md: float
    rmse_md: float


def error_evolution(checkpoint_dir, wells: Sequence[Well]) -> list[EvolutionPoint]:
    """Score every intermediate checkpoint in a run directory on `wells`.

    Files named checkpoint_epoch_NNNNNN.json are evaluated; anything else in
    the directory (final checkpoint, loss trace) is ignored. Rows come back
    sorted by epoch, one per checkpoint.
    """
    checkpoint_dir = Path(checkpoint_dir)
    found = []
    for entry in checkpoint_dir.iterdir():
        m = _CHECKPOINT_NAME.match(entry.name)
        if m:
            found.append((int(m.group(1)), entry))
    if not found:
        raise ValidationError(f"no intermediate checkpoints in {checkpoint_dir}")

    points = []
    for epoch, path in sorted(found):
        try:
            ckpt = training.load_checkpoint(path)
            preds = training.predict(ckpt, wells)
        except (OSError, ValueError) as err:
            raise training.CheckpointFormatError(
                f"checkpoint for epoch {epoch} unusable: {err}"
            ) from err
        report = facies_report(preds, wells)
        points.append(EvolutionPoint(epoch, *report.overall_avg))
    return points


def write_curves_csv(points: Sequence[EvolutionPoint], path) -> None:
    lines = ["epoch,mae_md,rmse_md"]
    for p in points:
        lines.append(f"{p.epoch},{p.mae_md!r},{p.rmse_md!r}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class FaciesWeighting:
    """Inverse-distance weighting with a facies similarity taper.

    `similarity` maps facies-succession distance 0, 1, 2 to a multiplicative
    weight; entries must be positive and non-increasing so that same-facies
    wells always weigh the most.
    """

    power: float = 2.0
    similarity: tuple[float, float, float] = (1.0, 0.5, 0.25)

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("power must be positive")
        if len(self.similarity) != 3:
            raise ValueError("similarity needs one weight per facies distance 0..2")
        sim = tuple(float(s) for s in self.similarity)
        if any(s <= 0 for s in sim):
            raise ValueError("similarity weights must be positive")
        if not (sim[0] >= sim[1] >= sim[2]):
            raise ValueError("similarity must be non-increasing in facies distance")


def facies_distance(a: int, b: int) -> int:
    """Distance along the cyclic facies succession channel-sand-mud-sand.

    Sand sits between channel and mud in the depositional cycle, so channel
    and mud are two steps apart while every other distinct pair is adjacent.
    """
    for code in (a, b):
        if code not in dataio.FACIES_CODES:
            raise ValidationError(f"unknown facies code {code!r}")
    if a == b:
        return 0
    if {a, b} == {0, 2}:
        return 2
    return 1


def idw_facies_baseline(
    train_wells: Sequence[Well],
    x: float,
    y: float,
    facies: int,
    weighting: FaciesWeighting | None = None,
    n_points: int = 100,
) -> np.ndarray:
    """Predict a permeability curve at (x, y) by facies-weighted IDW.

    Each training well contributes its resampled log-permeability curve with
    weight similarity(facies distance) / distance**power; the weighted mean is
    taken per grid index in log domain and exponentiated back to mD. A query
    coincident with a training well returns that well's curve exactly (the
    first such well in input order, regardless of facies).
    """
    if not train_wells:
        raise ValidationError("idw baseline needs at least one training well")
    weighting = weighting or FaciesWeighting()

    curves = np.empty((len(train_wells), n_points))
    for i, well in enumerate(train_wells):
        _, curves[i] = dataio.resample_spline(well, n_points)

    dists = np.array(
        [np.hypot(x - w.x, y - w.y) for w in train_wells]
    )
    hits = np.flatnonzero(dists == 0.0)
    if hits.size:
        return dataio.log_inverse(curves[hits[0]])

    sims = np.array(
        [weighting.similarity[facies_distance(facies, w.facies)] for w in train_wells]
    )
    weights = sims / dists**weighting.power
    log_pred = weights @ curves / weights.sum()
    return dataio.log_inverse(log_pred)
