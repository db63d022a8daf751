"""Well data model, preprocessing transforms, resampling and synthesis.

The feature pipeline, in order:

1. permeability is moved to log space, ln(y + 1e-6), so the spread of
   several decades becomes comparable in scale;
2. a natural cubic spline fitted to the log values resamples every well
   onto a uniform grid over its own depth range (splining in log space
   keeps the inverted curve positive, where a raw-space spline could
   overshoot below zero);
3. each channel is min-max normalized with statistics fitted on training
   wells only. The facies channel uses the fixed range [0, 2] so the three
   codes always map to 0, 0.5 and 1.

Feature rows are [x*, y*, z*, facies*] and the target is the normalized
log permeability on the same grid.

Facies codes: 0 = channel, 1 = sand, 2 = mud. Depositionally the facies
succeed each other cyclically as channel, sand, mud, sand, which is also
the layout the synthetic generator uses and the distance the baseline
weighting is built on.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

LOG_OFFSET = 1e-6
FACIES_CODES = (0, 1, 2)
FACIES_NAMES = {0: "channel", 1: "sand", 2: "mud"}

WELLS_CSV_HEADER = ["well_id", "x", "y", "facies", "depth", "permeability_md"]
SPLIT_CSV_HEADER = ["well_id", "role"]


class ValidationError(ValueError):
    """Raised when input data breaks a documented rule."""


@dataclass
class Well:
    well_id: str
    x: float
    y: float
    facies: int
    depths: np.ndarray
    perm_md: np.ndarray

    def __post_init__(self) -> None:
        self.depths = np.asarray(self.depths, dtype=np.float64)
        self.perm_md = np.asarray(self.perm_md, dtype=np.float64)

    def validate(self) -> None:
        if self.facies not in FACIES_CODES:
            raise ValidationError(
                f"well '{self.well_id}': facies must be one of {FACIES_CODES}, "
                f"got {self.facies}"
            )
        if self.depths.size == 0:
            raise ValidationError(f"well '{self.well_id}': no samples")
        if self.depths.size != self.perm_md.size:
            raise ValidationError(f"well '{self.well_id}': depth/value length mismatch")
        if not np.all(np.isfinite(self.depths)) or not np.all(np.isfinite(self.perm_md)):
            raise ValidationError(f"well '{self.well_id}': non-finite sample")
        if np.any(np.diff(self.depths) <= 0):
            raise ValidationError(
                f"well '{self.well_id}': depths must be strictly increasing "
                "(duplicates are not allowed)"
            )
        if np.any(self.perm_md < 0):
            raise ValidationError(f"well '{self.well_id}': negative permeability")


# ---------------------------------------------------------------------------
# CSV interfaces


def load_wells_csv(path) -> list[Well]:
    """Read the wells table, grouping rows by well and sorting by depth.

    Raises ValidationError naming the offending line or well.
    """
    groups: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != WELLS_CSV_HEADER:
            raise ValidationError(
                f"bad header: expected {','.join(WELLS_CSV_HEADER)}, got "
                f"{','.join(header) if header else 'empty file'}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ValidationError(f"line {lineno}: expected 6 fields, got {len(row)}")
            well_id = row[0]
            try:
                x, y = float(row[1]), float(row[2])
                facies = int(row[3])
                depth, perm = float(row[4]), float(row[5])
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            if math.isnan(perm) or math.isnan(depth):
                raise ValidationError(f"line {lineno}: NaN value")
            g = groups.setdefault(
                well_id, {"x": x, "y": y, "facies": facies, "rows": []}
            )
            if (g["x"], g["y"], g["facies"]) != (x, y, facies):
                raise ValidationError(
                    f"line {lineno}: well '{well_id}' has conflicting location or facies"
                )
            g["rows"].append((depth, perm))
    if not groups:
        raise ValidationError("no wells in file")
    wells = []
    for well_id, g in groups.items():
        rows = sorted(g["rows"])
        depths = np.array([r[0] for r in rows])
        perms = np.array([r[1] for r in rows])
        well = Well(well_id, g["x"], g["y"], g["facies"], depths, perms)
        well.validate()
        wells.append(well)
    return wells


def write_wells_csv(wells: list[Well], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(WELLS_CSV_HEADER)
        for w in wells:
            for depth, perm in zip(w.depths, w.perm_md):
                writer.writerow([w.well_id, repr(w.x), repr(w.y), w.facies, repr(float(depth)), repr(float(perm))])


def load_split_csv(path) -> dict[str, str]:
    """Read the train/test assignment, one role per well."""
    split: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPLIT_CSV_HEADER:
            raise ValidationError(
                f"bad header: expected {','.join(SPLIT_CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"line {lineno}: expected 2 fields")
            well_id, role = row
            if role not in ("train", "test"):
                raise ValidationError(
                    f"line {lineno}: role must be 'train' or 'test', got '{role}'"
                )
            if well_id in split:
                raise ValidationError(f"line {lineno}: duplicate well '{well_id}'")
            split[well_id] = role
    if not split:
        raise ValidationError("empty split file")
    return split


def write_split_csv(split: dict[str, str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPLIT_CSV_HEADER)
        for well_id, role in split.items():
            writer.writerow([well_id, role])


def partition_wells(
    wells: list[Well], split: dict[str, str]
) -> tuple[list[Well], list[Well]]:
    """Apply a split, insisting that wells and split cover each other."""
    by_id = {w.well_id: w for w in wells}
    missing = sorted(set(split) - set(by_id))
    if missing:
        raise ValidationError(f"split references unknown wells: {missing}")
    uncovered = sorted(set(by_id) - set(split))
    if uncovered:
        raise ValidationError(f"wells missing from split: {uncovered}")
    train = [w for w in wells if split[w.well_id] == "train"]
    test = [w for w in wells if split[w.well_id] == "test"]
    return train, test


# ---------------------------------------------------------------------------
# transforms


def log_transform(y):
    """ln(y + 1e-6); rejects negative permeability."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("permeability must be non-negative")
    return np.log(y + LOG_OFFSET)


def log_inverse(y_ln):
    """exp(v) - 1e-6, clamped at zero."""
    return np.maximum(np.exp(np.asarray(y_ln, dtype=np.float64)) - LOG_OFFSET, 0.0)


@dataclass(frozen=True)
class ChannelStats:
    min: float
    max: float


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel min-max ranges, frozen after fitting on training wells."""

    c: float
    x: ChannelStats
    y: ChannelStats
    z: ChannelStats
    facies: ChannelStats
    target: ChannelStats

    def to_json(self) -> dict:
        def ch(s: ChannelStats) -> dict:
            return {"min": s.min, "max": s.max}

        return {
            "c": self.c,
            "channels": {
                "x": ch(self.x),
                "y": ch(self.y),
                "z": ch(self.z),
                "facies": ch(self.facies),
                "target": ch(self.target),
            },
        }

    @classmethod
    def from_json(cls, blob: dict) -> "NormalizationStats":
        try:
            channels = blob["channels"]
            return cls(
                c=float(blob["c"]),
                x=ChannelStats(**channels["x"]),
                y=ChannelStats(**channels["y"]),
                z=ChannelStats(**channels["z"]),
                facies=ChannelStats(**channels["facies"]),
                target=ChannelStats(**channels["target"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad stats blob: {exc}") from exc


def minmax_normalize(value, ch: ChannelStats):
    return (np.asarray(value, dtype=np.float64) - ch.min) / (ch.max - ch.min)


def minmax_inverse(value, ch: ChannelStats):
    return np.asarray(value, dtype=np.float64) * (ch.max - ch.min) + ch.min


# ---------------------------------------------------------------------------
# natural cubic spline


class NaturalCubicSpline:
    """Interpolating cubic with zero second derivative at both ends.

    The knot second derivatives solve a tridiagonal system (Thomas
    elimination); evaluation is the standard piecewise cubic in terms of
    those second derivatives.
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2:
            raise ValueError("need at least two knots")
        if xs.shape != ys.shape:
            raise ValueError("knot arrays must have matching shape")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.xs = xs
        self.ys = ys
        self.second_derivs = self._solve(xs, ys)

    @staticmethod
    def _solve(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        m = xs.size
        m2 = np.zeros(m)
        if m == 2:
            return m2
        h = np.diff(xs)
        # Interior rows of the tridiagonal system.
        lower = h[:-1] / 6.0
        diag = (h[:-1] + h[1:]) / 3.0
        upper = h[1:] / 6.0
        rhs = np.diff(ys)[1:] / h[1:] - np.diff(ys)[:-1] / h[:-1]
        n = m - 2
        c_prime = np.zeros(n)
        d_prime = np.zeros(n)
        c_prime[0] = upper[0] / diag[0]
        d_prime[0] = rhs[0] / diag[0]
        for k in range(1, n):
            denom = diag[k] - lower[k] * c_prime[k - 1]
            c_prime[k] = upper[k] / denom
            d_prime[k] = (rhs[k] - lower[k] * d_prime[k - 1]) / denom
        m2[n] = d_prime[n - 1]
        for k in range(n - 2, -1, -1):
            m2[k + 1] = d_prime[k] - c_prime[k] * m2[k + 2]
        return m2

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        i = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)
        h = self.xs[i + 1] - self.xs[i]
        t0 = self.xs[i + 1] - x
        t1 = x - self.xs[i]
        m2 = self.second_derivs
        return (
            m2[i] * t0**3 / (6.0 * h)
            + m2[i + 1] * t1**3 / (6.0 * h)
            + (self.ys[i] / h - m2[i] * h / 6.0) * t0
            + (self.ys[i + 1] / h - m2[i + 1] * h / 6.0) * t1
        )


def resample_spline(well: Well, n_points: int = 100):
    """Spline the well's log permeability onto a uniform depth grid.

    Returns (depth_grid, log_perm_grid), both length n_points. The grid
    spans the well's own depth range, endpoints included.
    """
    if n_points < 2:
        raise ValueError("need at least two grid points")
    if well.depths.size < 4:
        raise ValidationError(
            f"well '{well.well_id}': need at least 4 samples to resample, "
            f"got {well.depths.size}"
        )
    spline = NaturalCubicSpline(well.depths, log_transform(well.perm_md))
    grid = np.linspace(well.depths[0], well.depths[-1], n_points)
    return grid, spline(grid)


# ---------------------------------------------------------------------------
# normalization statistics and feature assembly


def fit_stats(wells: list[Well], n_points: int = 100) -> NormalizationStats:
    """Fit per-channel ranges on training wells only.

    The target range is taken from the resampled log curves, i.e. from the
    values training actually sees. The facies range is pinned to [0, 2]
    regardless of which codes appear.
    """
    if not wells:
        raise ValidationError("cannot fit stats on an empty well list")
    xs = np.array([w.x for w in wells])
    ys = np.array([w.y for w in wells])
    z_min = min(w.depths[0] for w in wells)
    z_max = max(w.depths[-1] for w in wells)
    targets = np.concatenate([resample_spline(w, n_points)[1] for w in wells])

    def channel(name: str, lo: float, hi: float) -> ChannelStats:
        if hi <= lo:
            raise ValidationError(f"degenerate range for channel '{name}': [{lo}, {hi}]")
        return ChannelStats(float(lo), float(hi))

    return NormalizationStats(
        c=LOG_OFFSET,
        x=channel("x", xs.min(), xs.max()),
        y=channel("y", ys.min(), ys.max()),
        z=channel("z", z_min, z_max),
        facies=ChannelStats(0.0, 2.0),
        target=channel("target", targets.min(), targets.max()),
    )


@dataclass
class ResampledWell:
    well_id: str
    features: np.ndarray  # (n_points, 4): x*, y*, z*, facies*
    target: np.ndarray  # (n_points,) normalized log permeability
    depth_grid: np.ndarray
    facies: int


def build_features(well: Well, stats: NormalizationStats, n_points: int = 100) -> ResampledWell:
    """Resample one well and normalize every channel with frozen stats.

    Test wells outside the training ranges extrapolate beyond [0, 1]; that
    is allowed but flagged with a warning.
    """
    well.validate()
    grid, log_vals = resample_spline(well, n_points)
    features = np.column_stack(
        [
            np.full(n_points, minmax_normalize(well.x, stats.x)),
            np.full(n_points, minmax_normalize(well.y, stats.y)),
            minmax_normalize(grid, stats.z),
            np.full(n_points, minmax_normalize(well.facies, stats.facies)),
        ]
    )
    target = minmax_normalize(log_vals, stats.target)
    if np.any(features < -1e-12) or np.any(features > 1 + 1e-12):
        warnings.warn(
            f"well '{well.well_id}': features outside [0, 1], extrapolating",
            stacklevel=2,
        )
    return ResampledWell(well.well_id, features, target, grid, well.facies)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticConfig:
    """Knobs for the synthetic field generator.

    Defaults lay out 63 wells (34 channel, 17 sand, 12 mud) whose per-facies
    permeability medians sit near 327, 2.6 and 0.12 mD, with the sand facies
    given the widest log-space spread.
    """

    seed: int = 0
    wells_per_facies: tuple[int, int, int] = (34, 17, 12)
    median_md: tuple[float, float, float] = (326.94, 2.56, 0.12)
    spread: tuple[float, float, float] = (0.8, 1.6, 0.5)
    noise: float = 0.2
    area: tuple[float, float] = (2000.0, 2000.0)
    depth_range: tuple[float, float] = (2500.0, 2600.0)
    samples_range: tuple[int, int] = (40, 80)

    def __post_init__(self) -> None:
        if any(n < 1 for n in self.wells_per_facies):
            raise ValueError("need at least one well per facies")
        if any(s <= 0 for s in self.spread) or any(m <= 0 for m in self.median_md):
            raise ValueError("spreads and medians must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.samples_range[0] < 4 or self.samples_range[1] < self.samples_range[0]:
            raise ValueError("samples_range must be (lo, hi) with 4 <= lo <= hi")


_FACIES_PREFIX = {0: "CH", 1: "SD", 2: "MD"}
# Band order across the area follows the depositional cycle.
_BAND_FACIES = (0, 1, 2, 1)


def generate_synthetic(cfg: SyntheticConfig) -> list[Well]:
    """Deterministic synthetic wells on a banded facies map.

    The area splits into four strips ordered channel, sand, mud, sand. Each
    well's log-permeability curve is its facies base level plus a smooth
    field (a handful of low-frequency sinusoids in x, y and depth, shared
    by all wells) plus independent Gaussian noise.
    """
    rng = np.random.default_rng(cfg.seed)
    lx, ly = cfg.area
    z0, z1 = cfg.depth_range
    n_waves = 4
    wave_amp = rng.uniform(0.2, 0.5, size=n_waves)
    wave_freq = rng.uniform(0.5, 2.0, size=(n_waves, 3))
    wave_phase = rng.uniform(0.0, 2.0 * np.pi, size=n_waves)

    def smooth_field(x, y, z):
        total = 0.0
        for k in range(n_waves):
            arg = (
                wave_freq[k, 0] * x / lx
                + wave_freq[k, 1] * y / ly
                + wave_freq[k, 2] * (z - z0) / (z1 - z0)
            )
            total = total + wave_amp[k] * np.sin(2.0 * np.pi * arg + wave_phase[k])
        return total

    bands_for = {
        f: [b for b, bf in enumerate(_BAND_FACIES) if bf == f] for f in FACIES_CODES
    }
    band_width = lx / len(_BAND_FACIES)
    wells = []
    counters = {f: 0 for f in FACIES_CODES}
    for facies in FACIES_CODES:
        base = np.log(cfg.median_md[facies])
        spread = cfg.spread[facies]
        for k in range(cfg.wells_per_facies[facies]):
            band = bands_for[facies][k % len(bands_for[facies])]
            x = rng.uniform(band * band_width, (band + 1) * band_width)
            y = rng.uniform(0.0, ly)
            n_samples = int(rng.integers(cfg.samples_range[0], cfg.samples_range[1] + 1))
            depths = np.linspace(z0, z1, n_samples)
            jitter = rng.uniform(-0.3, 0.3, size=n_samples) * (depths[1] - depths[0])
            jitter[0] = jitter[-1] = 0.0
            depths = depths + jitter
            log_perm = (
                base
                + spread * smooth_field(x, y, depths)
                + cfg.noise * rng.normal(size=n_samples)
            )
            counters[facies] += 1
            well = Well(
                f"{_FACIES_PREFIX[facies]}-{counters[facies]:03d}",
                float(x),
                float(y),
                facies,
                depths,
                np.exp(log_perm),
            )
            well.validate()
            wells.append(well)
    return wells


def allocate_split(
    wells: list[Well], test_per_facies: tuple[int, int, int], rng: np.random.Generator
) -> dict[str, str]:
    """Pick test wells per facies (seeded), everything else trains."""
    split = {w.well_id: "train" for w in wells}
    for facies in FACIES_CODES:
        ids = [w.well_id for w in wells if w.facies == facies]
        want = test_per_facies[facies]
        if want > len(ids):
            raise ValidationError(
                f"cannot hold out {want} test wells from {len(ids)} "
                f"{FACIES_NAMES[facies]} wells"
            )
        for well_id in rng.choice(ids, size=want, replace=False):
            split[str(well_id)] = "test"
    return split


def save_stats(stats: NormalizationStats, path) -> None:
    with open(path, "w") as fh:
        json.dump(stats.to_json(), fh, indent=2)


def load_stats(path) -> NormalizationStats:
    with open(path) as fh:
        return NormalizationStats.from_json(json.load(fh))
