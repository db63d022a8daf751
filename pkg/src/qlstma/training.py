"""Training loop, checkpointing and multi-run prediction averaging.

One Adam step consumes the whole training set: losses and gradients are
averaged over every training well each epoch (the sets involved are tens
of wells, so there is no point in mini-batching). A run is pinned by its
seed, which drives initialization and the dropout stream, so rerunning a
configuration reproduces the loss trace bit for bit.

The evaluation protocol trains ``runs`` independent models from seeds
``seed + run_index`` and averages their predicted curves pointwise in mD
space (a log-domain geometric mean is available behind
``average_domain="log"``). Checkpoints are written every
``checkpoint_every`` epochs so error evolution can be traced afterwards.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio, network, nncore
from .dataio import NormalizationStats, ResampledWell, Well

CHECKPOINT_VERSION = 1


class NumericFailure(ArithmeticError):
    """Training produced a non-finite quantity."""


class CheckpointFormatError(ValueError):
    """Checkpoint file is missing keys or has wrong tensor shapes."""


class UnsupportedCheckpointVersion(ValueError):
    """Checkpoint was written by an incompatible format version."""


@dataclass
class TrainConfig:
    variant: str = "lstma"
    n_qubits: int = 4
    n_layers: int = 1
    epochs: int = 1000
    checkpoint_every: int = 10
    runs: int = 5
    seed: int = 0
    lr: float = 1e-3
    dropout: float = 0.5
    huber_delta: float = 1.0
    hidden: int = 64
    timesteps: int = 100
    dense: int = 32
    average_domain: str = "md"

    def __post_init__(self) -> None:
        if self.variant not in network.VARIANTS:
            raise ValueError(
                f"variant must be one of {network.VARIANTS}, got '{self.variant}'"
            )
        if self.variant != "lstma" and self.n_qubits not in (4, 6, 8):
            raise ValueError(f"n_qubits must be 4, 6 or 8, got {self.n_qubits}")
        if self.epochs < 1 or self.runs < 1 or self.checkpoint_every < 1:
            raise ValueError("epochs, runs and checkpoint_every must be positive")
        if self.epochs % self.checkpoint_every != 0:
            raise ValueError(
                f"checkpoint_every ({self.checkpoint_every}) must divide "
                f"epochs ({self.epochs})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr < 0 or self.huber_delta <= 0:
            raise ValueError("lr must be non-negative and huber_delta positive")
        if self.hidden < 1 or self.timesteps < 2 or self.dense < 1:
            raise ValueError("hidden, timesteps and dense are too small")
        if self.n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        if self.average_domain not in ("md", "log"):
            raise ValueError(
                f"average_domain must be 'md' or 'log', got '{self.average_domain}'"
            )


def checkpoint_epochs(epochs: int, every: int) -> list[int]:
    """Epochs at which intermediate checkpoints are taken."""
    return list(range(every, epochs + 1, every))


@dataclass
class Checkpoint:
    version: int
    variant: str
    n_qubits: int | None
    hidden: int
    seed: int
    epoch: int
    config: dict
    stats: NormalizationStats
    params: dict[str, np.ndarray]


def _template_from_config(cfg_dict: dict) -> network.ModelParams:
    variant = cfg_dict["variant"]
    return network.init_model_params(
        variant,
        np.random.default_rng(0),
        d_in=4,
        d_h=int(cfg_dict["hidden"]),
        dense=int(cfg_dict.get("dense", 32)),
        n_qubits=None if variant == "lstma" else int(cfg_dict["n_qubits"]),
        n_layers=int(cfg_dict.get("n_layers", 1)),
    )


def params_from_checkpoint(ckpt: Checkpoint) -> network.ModelParams:
    try:
        template = _template_from_config(ckpt.config)
        return network.unflatten_params(template, ckpt.params)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(str(exc)) from exc


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    blob = {
        "version": ckpt.version,
        "variant": ckpt.variant,
        "n_qubits": ckpt.n_qubits,
        "hidden": ckpt.hidden,
        "seed": ckpt.seed,
        "epoch": ckpt.epoch,
        "config": ckpt.config,
        "stats": ckpt.stats.to_json(),
        "params": {name: arr.tolist() for name, arr in ckpt.params.items()},
    }
    with open(path, "w") as fh:
        json.dump(blob, fh)


_CHECKPOINT_KEYS = (
    "version",
    "variant",
    "n_qubits",
    "hidden",
    "seed",
    "epoch",
    "config",
    "stats",
    "params",
)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        try:
            blob = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(blob, dict) or "version" not in blob:
        raise CheckpointFormatError(f"{path}: missing key 'version'")
    if blob["version"] != CHECKPOINT_VERSION:
        raise UnsupportedCheckpointVersion(
            f"{path}: version {blob['version']} is not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    for key in _CHECKPOINT_KEYS:
        if key not in blob:
            raise CheckpointFormatError(f"{path}: missing key '{key}'")
    extra = sorted(set(blob) - set(_CHECKPOINT_KEYS))
    if extra:
        warnings.warn(f"{path}: ignoring unknown checkpoint keys {extra}", stacklevel=2)
    params = {
        name: np.asarray(values, dtype=np.float64)
        for name, values in blob["params"].items()
    }
    ckpt = Checkpoint(
        version=blob["version"],
        variant=blob["variant"],
        n_qubits=blob["n_qubits"],
        hidden=blob["hidden"],
        seed=blob["seed"],
        epoch=blob["epoch"],
        config=blob["config"],
        stats=NormalizationStats.from_json(blob["stats"]),
        params=params,
    )
    params_from_checkpoint(ckpt)  # validates names and shapes early
    return ckpt


@dataclass
class TrainRunResult:
    final: Checkpoint
    intermediates: list[Checkpoint]
    loss_trace: list[float]


def _snapshot(
    cfg: TrainConfig,
    run_seed: int,
    epoch: int,
    stats: NormalizationStats,
    flat: dict[str, np.ndarray],
) -> Checkpoint:
    return Checkpoint(
        version=CHECKPOINT_VERSION,
        variant=cfg.variant,
        n_qubits=None if cfg.variant == "lstma" else cfg.n_qubits,
        hidden=cfg.hidden,
        seed=run_seed,
        epoch=epoch,
        config=dataclasses.asdict(cfg),
        stats=stats,
        params={name: arr.copy() for name, arr in flat.items()},
    )


def train_one_run(
    cfg: TrainConfig,
    run_seed: int,
    train_wells: list[ResampledWell],
    stats: NormalizationStats,
    out_dir: Path | str | None = None,
) -> TrainRunResult:
    """Train one model from one seed over the full training set.

    When ``out_dir`` is given, every checkpoint and the loss trace are
    written there as they appear (checkpoint_epoch_NNNNNN.json,
    checkpoint_final.json, loss.csv).
    """
    if not train_wells:
        raise dataio.ValidationError("no training wells")
    for rw in train_wells:
        if rw.features.shape != (cfg.timesteps, 4):
            raise dataio.ValidationError(
                f"well '{rw.well_id}': features shaped {rw.features.shape}, "
                f"expected ({cfg.timesteps}, 4)"
            )
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(run_seed)
    params = network.init_model_params(
        cfg.variant,
        rng,
        d_in=4,
        d_h=cfg.hidden,
        dense=cfg.dense,
        n_qubits=None if cfg.variant == "lstma" else cfg.n_qubits,
        n_layers=cfg.n_layers,
    )
    flat = network.flatten_params(params)
    adam_state = nncore.adam_init(flat)
    n_wells = len(train_wells)
    trace: list[float] = []
    intermediates: list[Checkpoint] = []
    for epoch in range(1, cfg.epochs + 1):
        total_loss = 0.0
        grads_acc = {name: np.zeros_like(arr) for name, arr in flat.items()}
        for rw in train_wells:
            try:
                pred, cache = network.model_forward(
                    rw.features,
                    params,
                    mode="train",
                    rng=rng,
                    dropout_rate=cfg.dropout,
                )
            except FloatingPointError as exc:
                raise NumericFailure(
                    f"epoch {epoch}, well '{rw.well_id}': {exc}"
                ) from exc
            loss, dpred = nncore.huber_loss(rw.target, pred, delta=cfg.huber_delta)
            total_loss += loss
            for name, g in network.model_backward(cache, dpred).items():
                grads_acc[name] += g
        mean_loss = total_loss / n_wells
        if not np.isfinite(mean_loss):
            raise NumericFailure(f"non-finite loss at epoch {epoch}")
        for name in grads_acc:
            grads_acc[name] /= n_wells
        try:
            flat, adam_state = nncore.adam_step(flat, grads_acc, adam_state, lr=cfg.lr)
        except FloatingPointError as exc:
            raise NumericFailure(f"epoch {epoch}: {exc}") from exc
        params = network.unflatten_params(params, flat)
        trace.append(mean_loss)
        if epoch % cfg.checkpoint_every == 0:
            ckpt = _snapshot(cfg, run_seed, epoch, stats, flat)
            intermediates.append(ckpt)
            if out_path is not None:
                save_checkpoint(ckpt, out_path / f"checkpoint_epoch_{epoch:06d}.json")
    final = _snapshot(cfg, run_seed, cfg.epochs, stats, flat)
    if out_path is not None:
        save_checkpoint(final, out_path / "checkpoint_final.json")
        write_loss_trace(trace, out_path / "loss.csv")
    return TrainRunResult(final, intermediates, trace)


def write_loss_trace(trace: list[float], path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(trace, start=1):
            fh.write(f"{epoch},{loss!r}\n")


@dataclass
class PredictedWell:
    well_id: str
    depth_grid: np.ndarray
    perm_md: np.ndarray


def predict(ckpt: Checkpoint, wells: list[Well]) -> list[PredictedWell]:
    """Predict permeability curves in mD on each well's own depth grid."""
    params = params_from_checkpoint(ckpt)
    n_points = int(ckpt.config["timesteps"])
    out = []
    for well in wells:
        rw = dataio.build_features(well, ckpt.stats, n_points=n_points)
        pred_norm, _ = network.model_forward(rw.features, params, mode="eval")
        log_vals = dataio.minmax_inverse(pred_norm, ckpt.stats.target)
        out.append(PredictedWell(well.well_id, rw.depth_grid, dataio.log_inverse(log_vals)))
    return out


def average_curves(
    per_run: list[list[PredictedWell]], domain: str = "md"
) -> list[PredictedWell]:
    """Pointwise mean of per-run curves; geometric mean when domain='log'."""
    if domain not in ("md", "log"):
        raise ValueError(f"average domain must be 'md' or 'log', got '{domain}'")
    if not per_run:
        return []
    averaged = []
    for idx, first in enumerate(per_run[0]):
        stack = np.stack([runs[idx].perm_md for runs in per_run])
        if domain == "log":
            mean = dataio.log_inverse(dataio.log_transform(stack).mean(axis=0))
        else:
            mean = stack.mean(axis=0)
        averaged.append(PredictedWell(first.well_id, first.depth_grid, mean))
    return averaged


@dataclass
class MultiRunResult:
    averaged: list[PredictedWell]
    per_run: list[list[PredictedWell]]
    runs: list[TrainRunResult]


def _run_job(args) -> tuple[TrainRunResult, list[PredictedWell]]:
    cfg, run_seed, train_wells, stats, test_wells, run_dir = args
    result = train_one_run(cfg, run_seed, train_wells, stats, out_dir=run_dir)
    return result, predict(result.final, test_wells)


def multi_run(
    cfg: TrainConfig,
    train_wells: list[Well],
    test_wells: list[Well],
    out_dir: Path | str | None = None,
    jobs: int = 1,
) -> MultiRunResult:
    """Train cfg.runs models from consecutive seeds and average test curves.

    Run r uses seed ``cfg.seed + r``. Runs are independent, so ``jobs > 1``
    executes them in separate processes; results are identical either way.
    """
    stats = dataio.fit_stats(train_wells, n_points=cfg.timesteps)
    resampled = [
        dataio.build_features(w, stats, n_points=cfg.timesteps) for w in train_wells
    ]
    out_path = Path(out_dir) if out_dir is not None else None
    job_args = []
    for r in range(cfg.runs):
        run_dir = None if out_path is None else out_path / f"run_{r}"
        job_args.append((cfg, cfg.seed + r, resampled, stats, test_wells, run_dir))
    results: list[tuple[TrainRunResult, list[PredictedWell]]] = []
    if jobs > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, cfg.runs)) as pool:
            futures = [pool.submit(_run_job, args) for args in job_args]
            for r, future in enumerate(futures):
                try:
                    results.append(future.result())
                except NumericFailure as exc:
                    raise NumericFailure(f"run {r} (seed {cfg.seed + r}): {exc}") from exc
    else:
        for r, args in enumerate(job_args):
            try:
                results.append(_run_job(args))
            except NumericFailure as exc:
                raise NumericFailure(f"run {r} (seed {cfg.seed + r}): {exc}") from exc
    run_results = [r for r, _ in results]
    per_run = [p for _, p in results]
    averaged = average_curves(per_run, domain=cfg.average_domain)
    return MultiRunResult(averaged, per_run, run_results)
