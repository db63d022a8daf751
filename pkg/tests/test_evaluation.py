"""Metric definitions, report assembly, checkpoint curves, and the IDW baseline."""

import json

import numpy as np
import pytest

from qlstma import dataio, evaluation, training
from qlstma.dataio import ValidationError, Well
from qlstma.evaluation import FaciesWeighting
from qlstma.training import PredictedWell


def flat_well(well_id, perm_md, facies=0, x=0.0, y=0.0, n=8):
    """A well whose measured permeability is constant at `perm_md`."""
    depths = np.linspace(2500.0, 2600.0, n)
    return Well(well_id, x, y, facies, depths, np.full(n, perm_md))


class TestPointMetrics:
    def test_identical_curves_score_zero(self):
        v = np.array([1.0, 2.0, 3.0])
        assert evaluation.mae(v, v) == 0.0
        assert evaluation.rmse(v, v) == 0.0

    def test_hand_arithmetic(self):
        pred = np.array([1.0, 2.0])
        truth = np.array([1.0, 4.0])
        assert evaluation.mae(pred, truth) == pytest.approx(1.0)
        assert evaluation.rmse(pred, truth) == pytest.approx(np.sqrt(2.0))

    def test_rmse_dominates_mae(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = rng.integers(1, 40)
            a, b = rng.normal(size=(2, n)) * rng.uniform(0.1, 100)
            assert evaluation.rmse(a, b) >= evaluation.mae(a, b) - 1e-15

    def test_zero_only_for_identical(self):
        a = np.array([1.0, 2.0])
        b = np.array([1.0, 2.0 + 1e-9])
        assert evaluation.rmse(a, b) > 0
        assert evaluation.mae(a, b) > 0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="lengths differ"):
            evaluation.mae(np.zeros(3), np.zeros(4))

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            evaluation.rmse(np.zeros(0), np.zeros(0))


class TestFaciesReport:
    def predictions_for(self, wells, offsets, n=10):
        preds = []
        for well, off in zip(wells, offsets):
            truth = evaluation.truth_curve_md(well, n)
            grid = np.linspace(well.depths[0], well.depths[-1], n)
            preds.append(PredictedWell(well.well_id, grid, truth + off))
        return preds

    def test_perfect_predictions_score_zero(self):
        wells = [flat_well("A", 10.0, facies=0), flat_well("B", 2.0, facies=1)]
        preds = self.predictions_for(wells, [0.0, 0.0])
        report = evaluation.facies_report(preds, wells)
        assert report.overall_avg == (pytest.approx(0.0, abs=1e-9),) * 2
        for row in report.wells:
            assert row.mae_md == pytest.approx(0.0, abs=1e-9)

    def test_facies_average_is_mean_of_wells(self):
        wells = [flat_well("A", 10.0, facies=2), flat_well("B", 10.0, facies=2)]
        preds = self.predictions_for(wells, [1.0, 3.0])
        report = evaluation.facies_report(preds, wells)
        assert report.facies_avg[2][0] == pytest.approx(2.0, rel=1e-9)
        assert report.overall_avg[0] == pytest.approx(2.0, rel=1e-9)

    def test_overall_is_mean_of_per_well_column(self):
        rng = np.random.default_rng(4)
        wells = [
            flat_well(f"W{i}", float(p), facies=i % 3)
            for i, p in enumerate(rng.uniform(1, 100, size=5))
        ]
        preds = self.predictions_for(wells, rng.uniform(-0.5, 0.5, size=5))
        report = evaluation.facies_report(preds, wells)
        assert report.overall_avg[0] == pytest.approx(
            np.mean([r.mae_md for r in report.wells]), abs=1e-12
        )
        assert report.overall_avg[1] == pytest.approx(
            np.mean([r.rmse_md for r in report.wells]), abs=1e-12
        )

    def test_rmse_at_least_mae_per_row(self):
        rng = np.random.default_rng(5)
        wells = [flat_well(f"W{i}", 5.0, facies=0) for i in range(3)]
        preds = []
        for well in wells:
            truth = evaluation.truth_curve_md(well, 10)
            noise = rng.normal(scale=0.3, size=10)
            preds.append(PredictedWell(well.well_id, np.zeros(10), truth + noise))
        report = evaluation.facies_report(preds, wells)
        for row in report.wells:
            assert row.rmse_md >= row.mae_md >= 0

    def test_missing_truth_named(self):
        wells = [flat_well("A", 10.0)]
        preds = self.predictions_for(wells, [0.0])
        ghost = PredictedWell("GHOST", np.zeros(10), np.ones(10))
        with pytest.raises(ValidationError, match="GHOST"):
            evaluation.facies_report(preds + [ghost], wells)

    def test_metadata_passthrough(self):
        wells = [flat_well("A", 10.0)]
        preds = self.predictions_for(wells, [0.0])
        report = evaluation.facies_report(preds, wells, metadata={"variant": "lstma"})
        assert report.metadata == {"variant": "lstma"}


class TestReportEmission:
    @pytest.fixture()
    def report(self):
        wells = [flat_well("A", 10.0, facies=0), flat_well("B", 3.0, facies=1)]
        preds = []
        for well, off in zip(wells, [1.0, 2.0]):
            truth = evaluation.truth_curve_md(well, 6)
            preds.append(PredictedWell(well.well_id, np.zeros(6), truth + off))
        return evaluation.facies_report(preds, wells, metadata={"runs": 5})

    def test_csv_layout(self, report, tmp_path):
        path = tmp_path / "metrics.csv"
        evaluation.write_metrics_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "well_id,facies,mae_md,rmse_md"
        assert lines[1].startswith("A,0,")
        assert lines[2].startswith("B,1,")
        assert lines[3].startswith("facies_avg,0,")
        assert lines[4].startswith("facies_avg,1,")
        assert lines[5].startswith("overall_avg,,")
        cells = lines[5].split(",")
        assert float(cells[2]) == report.overall_avg[0]

    def test_json_mirrors_report(self, report, tmp_path):
        path = tmp_path / "metrics.json"
        evaluation.write_metrics_json(report, path)
        blob = json.loads(path.read_text())
        assert blob["wells"][0]["well_id"] == "A"
        assert blob["facies_avg"]["0"]["mae_md"] == report.facies_avg[0][0]
        assert blob["overall_avg"]["rmse_md"] == report.overall_avg[1]
        assert blob["metadata"] == {"runs": 5}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, tiny_wells):
    cfg = training.TrainConfig(
        variant="lstma",
        epochs=6,
        checkpoint_every=2,
        runs=1,
        seed=0,
        hidden=4,
        timesteps=12,
        dense=6,
        dropout=0.0,
    )
    stats = dataio.fit_stats(tiny_wells, n_points=cfg.timesteps)
    resampled = [
        dataio.build_features(w, stats, n_points=cfg.timesteps) for w in tiny_wells
    ]
    out = tmp_path_factory.mktemp("run")
    training.train_one_run(cfg, 0, resampled, stats, out_dir=out)
    return out


class TestErrorEvolution:
    def test_one_row_per_checkpoint_sorted(self, run_dir, tiny_wells):
        points = evaluation.error_evolution(run_dir, tiny_wells[:2])
        assert [p.epoch for p in points] == [2, 4, 6]
        for p in points:
            assert p.rmse_md >= p.mae_md >= 0

    def test_unreadable_checkpoint_names_epoch(self, run_dir, tiny_wells, tmp_path):
        broken = tmp_path / "broken"
        broken.mkdir()
        for entry in run_dir.glob("checkpoint_epoch_*.json"):
            (broken / entry.name).write_text(entry.read_text())
        (broken / "checkpoint_epoch_000004.json").write_text("{ not json")
        with pytest.raises(training.CheckpointFormatError, match="epoch 4"):
            evaluation.error_evolution(broken, tiny_wells[:2])

    def test_final_checkpoint_ignored(self, run_dir, tiny_wells):
        points = evaluation.error_evolution(run_dir, tiny_wells[:1])
        assert len(points) == 3  # final and loss.csv do not add rows

    def test_empty_directory_rejected(self, tmp_path, tiny_wells):
        with pytest.raises(ValidationError, match="no intermediate checkpoints"):
            evaluation.error_evolution(tmp_path, tiny_wells)

    def test_curves_csv(self, run_dir, tiny_wells, tmp_path):
        points = evaluation.error_evolution(run_dir, tiny_wells[:2])
        path = tmp_path / "curves.csv"
        evaluation.write_curves_csv(points, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,mae_md,rmse_md"
        assert len(lines) == 4
        assert lines[1].split(",")[0] == "2"


class TestFaciesWeighting:
    def test_defaults_valid(self):
        w = FaciesWeighting()
        assert w.power == 2.0
        assert w.similarity == (1.0, 0.5, 0.25)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"power": 0.0},
            {"power": -1.0},
            {"similarity": (1.0, 0.5)},
            {"similarity": (0.5, 1.0, 0.25)},
            {"similarity": (1.0, 0.5, -0.1)},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FaciesWeighting(**kwargs)

    def test_distance_table(self):
        expected = {
            (0, 0): 0, (1, 1): 0, (2, 2): 0,
            (0, 1): 1, (1, 0): 1, (1, 2): 1, (2, 1): 1,
            (0, 2): 2, (2, 0): 2,
        }
        for (a, b), d in expected.items():
            assert evaluation.facies_distance(a, b) == d

    def test_unknown_code_rejected(self):
        with pytest.raises(ValidationError, match="3"):
            evaluation.facies_distance(0, 3)


class TestIdwBaseline:
    def test_single_well_returned_exactly(self):
        well = flat_well("A", 42.0, x=100.0, y=100.0)
        pred = evaluation.idw_facies_baseline([well], 0.0, 0.0, 0, n_points=10)
        np.testing.assert_allclose(pred, 42.0, rtol=1e-9)

    def test_coincident_query_returns_that_well(self):
        wells = [
            flat_well("A", 5.0, x=10.0, y=10.0),
            flat_well("B", 500.0, x=300.0, y=300.0),
        ]
        pred = evaluation.idw_facies_baseline(wells, 10.0, 10.0, 0, n_points=10)
        np.testing.assert_allclose(pred, 5.0, rtol=1e-9)

    def test_equidistant_same_facies_average_in_log_domain(self):
        wells = [
            flat_well("A", 1.0, facies=1, x=-50.0, y=0.0),
            flat_well("B", 100.0, facies=1, x=50.0, y=0.0),
        ]
        pred = evaluation.idw_facies_baseline(wells, 0.0, 0.0, 1, n_points=10)
        logs = np.stack(
            [dataio.resample_spline(w, 10)[1] for w in wells]
        )
        np.testing.assert_allclose(pred, dataio.log_inverse(logs.mean(0)), rtol=1e-12)

    def test_facies_similarity_tilts_the_mean(self):
        # Equidistant channel and mud wells seen from a channel query: the
        # mud well sits two steps away so its weight drops to 0.25.
        wells = [
            flat_well("CH", 100.0, facies=0, x=-50.0, y=0.0),
            flat_well("MD", 1.0, facies=2, x=50.0, y=0.0),
        ]
        pred = evaluation.idw_facies_baseline(wells, 0.0, 0.0, 0, n_points=5)
        logs = np.stack([dataio.resample_spline(w, 5)[1] for w in wells])
        expect = dataio.log_inverse((1.0 * logs[0] + 0.25 * logs[1]) / 1.25)
        np.testing.assert_allclose(pred, expect, rtol=1e-12)

    def test_convex_combination_bound(self):
        rng = np.random.default_rng(9)
        wells = []
        for i in range(6):
            n = 8
            depths = np.sort(rng.uniform(2500, 2600, size=n))
            perms = rng.uniform(0.1, 1000, size=n)
            wells.append(
                Well(f"W{i}", rng.uniform(0, 2000), rng.uniform(0, 2000),
                     int(rng.integers(0, 3)), depths, perms)
            )
        pred = evaluation.idw_facies_baseline(wells, 777.0, 555.0, 1, n_points=20)
        logs = np.stack([dataio.resample_spline(w, 20)[1] for w in wells])
        log_pred = dataio.log_transform(pred)
        assert np.all(log_pred <= logs.max(0) + 1e-9)
        assert np.all(log_pred >= logs.min(0) - 1e-9)

    def test_invariant_to_uniform_distance_scaling(self):
        wells = [
            flat_well("A", 3.0, facies=0, x=10.0, y=0.0),
            flat_well("B", 30.0, facies=2, x=0.0, y=25.0),
        ]
        base = evaluation.idw_facies_baseline(wells, 2.0, 2.0, 0, n_points=6)
        scaled_wells = [
            Well(w.well_id, w.x * 7, w.y * 7, w.facies, w.depths, w.perm_md)
            for w in wells
        ]
        scaled = evaluation.idw_facies_baseline(scaled_wells, 14.0, 14.0, 0, n_points=6)
        np.testing.assert_allclose(scaled, base, rtol=1e-12)

    def test_nearer_well_dominates(self):
        wells = [
            flat_well("NEAR", 100.0, facies=1, x=1.0, y=0.0),
            flat_well("FAR", 0.1, facies=1, x=1000.0, y=0.0),
        ]
        pred = evaluation.idw_facies_baseline(wells, 0.0, 0.0, 1, n_points=4)
        assert np.all(pred > 99.0)

    def test_no_training_wells_rejected(self):
        with pytest.raises(ValidationError, match="at least one"):
            evaluation.idw_facies_baseline([], 0.0, 0.0, 0)
