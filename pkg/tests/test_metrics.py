import csv
import json

import numpy as np
import pytest

from cdseg.errors import PipelineError
from cdseg.metrics import (
    CaseResult,
    EvalReport,
    dsc,
    error_rate,
    jaccard,
    prf,
    run_benchmark,
)


class TestErrorRate:
    def test_hand_example(self):
        output = np.array(
            [
                [1, 1, 0, 0],
                [1, 1, 0, 0],
                [0, 0, 0, 0],
                [0, 0, 0, 1],
            ],
            dtype=bool,
        )
        gt = np.array(
            [
                [1, 0, 0, 0],
                [1, 1, 0, 0],
                [0, 0, 0, 0],
                [0, 0, 0, 0],
            ],
            dtype=bool,
        )
        # two mismatches over the full 16-pixel window
        assert error_rate(output, gt, (0, 0, 3, 3)) == 2 / 16
        # top-left 2x2 window sees exactly one of them
        assert error_rate(output, gt, (0, 0, 1, 1)) == 1 / 4
        assert error_rate(output, gt, (0, 2, 3, 3)) == 1 / 8

    def test_box_clipped_to_image(self):
        output = np.zeros((4, 4), dtype=bool)
        gt = np.ones((4, 4), dtype=bool)
        assert error_rate(output, gt, (-10, -10, 99, 99)) == 1.0

    def test_empty_window_rejected(self):
        masks = np.zeros((4, 4), dtype=bool)
        with pytest.raises(PipelineError):
            error_rate(masks, masks, (10, 10, 20, 20))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(PipelineError):
            error_rate(np.zeros((3, 3), dtype=bool), np.zeros((4, 4), dtype=bool), (0, 0, 2, 2))


class TestOverlapScores:
    def test_hand_examples(self):
        output = np.array([[1, 1], [0, 0]], dtype=bool)
        gt = np.array([[1, 0], [0, 0]], dtype=bool)
        assert jaccard(output, gt) == 0.5
        assert dsc(output, gt) == pytest.approx(2 / 3)

    def test_perfect_and_disjoint(self):
        a = np.eye(3, dtype=bool)
        assert jaccard(a, a) == 1.0
        assert dsc(a, a) == 1.0
        b = ~a
        assert jaccard(a, b) == 0.0
        assert dsc(a, b) == 0.0

    def test_both_empty_warns_one(self):
        empty = np.zeros((3, 3), dtype=bool)
        with pytest.warns(RuntimeWarning, match="both masks empty"):
            assert jaccard(empty, empty) == 1.0
        with pytest.warns(RuntimeWarning, match="both masks empty"):
            assert dsc(empty, empty) == 1.0

    def test_dice_jaccard_identity(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            a = rng.random((8, 8)) > rng.random()
            b = rng.random((8, 8)) > rng.random()
            if not (a.any() or b.any()):
                continue
            j = jaccard(a, b)
            d = dsc(a, b)
            assert d == pytest.approx(2 * j / (1 + j))
            assert j <= d + 1e-12


class TestPRF:
    def test_hand_example(self):
        output = np.array([[1, 1], [0, 0]], dtype=bool)
        gt = np.array([[1, 0], [0, 0]], dtype=bool)
        p, r, f = prf(output, gt)
        assert p == 0.5
        assert r == 1.0
        assert f == pytest.approx(1.3 * 0.5 / (0.3 * 0.5 + 1.0))

    def test_weighting_favors_precision(self):
        # gamma^2 = 0.3 weighs precision above recall
        p, r, f_low_p = prf(
            np.array([[1, 1, 1, 0]], dtype=bool), np.array([[1, 0, 0, 0]], dtype=bool)
        )
        p2, r2, f_low_r = prf(
            np.array([[1, 0, 0, 0]], dtype=bool), np.array([[1, 1, 1, 0]], dtype=bool)
        )
        assert (p, r) == (r2, p2)
        assert f_low_r > f_low_p

    def test_f_of_mean_p_r_pitfall(self):
        # averaging P and R across images then combining is NOT the mean F:
        # the combined value for the documented mean operating point
        p_bar, r_bar = 0.7076, 0.8208
        f_of_means = 1.3 * p_bar * r_bar / (0.3 * p_bar + r_bar)
        assert f_of_means == pytest.approx(0.7309, abs=5e-4)
        assert abs(f_of_means - 0.7140) > 0.01

    def test_degenerate_masks(self):
        empty = np.zeros((2, 2), dtype=bool)
        full = np.ones((2, 2), dtype=bool)
        assert prf(empty, full) == (0.0, 0.0, 0.0)
        p, r, f = prf(full, empty)
        assert (p, r, f) == (0.0, 0.0, 0.0)

    def test_f_between_precision_and_recall(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            a = rng.random((10, 10)) > rng.random()
            b = rng.random((10, 10)) > rng.random()
            p, r, f = prf(a, b)
            if p > 0 and r > 0:
                assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12


class TestEvalReport:
    def make_report(self):
        report = EvalReport()
        report.cases.append(
            CaseResult(name="a", status="ok", jaccard=0.8, precision=0.9, recall=0.5,
                       f_measure=0.7, runtime_s=1.0)
        )
        report.cases.append(
            CaseResult(name="b", status="ok", jaccard=0.6, precision=0.5, recall=0.9,
                       f_measure=0.6, runtime_s=3.0)
        )
        report.cases.append(CaseResult(name="c", status="failed", message="boom"))
        report.finalize()
        return report

    def test_aggregates_average_per_case_f(self):
        report = self.make_report()
        agg = report.aggregates
        assert (agg["cases"], agg["ok"], agg["failed"]) == (3, 2, 1)
        assert agg["mean_jaccard"] == pytest.approx(0.7)
        assert agg["mean_f_measure"] == pytest.approx(0.65)
        # never the F of the mean P/R operating point
        p_bar, r_bar = agg["mean_precision"], agg["mean_recall"]
        f_of_means = 1.3 * p_bar * r_bar / (0.3 * p_bar + r_bar)
        assert abs(agg["mean_f_measure"] - f_of_means) > 0.01

    def test_json_and_csv_written(self, tmp_path):
        report = self.make_report()
        report.write(tmp_path / "out")
        loaded = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(loaded["cases"]) == 3
        assert loaded["aggregates"]["ok"] == 2
        with open(tmp_path / "out" / "report.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["name"] for r in rows] == ["a", "b", "c"]
        assert rows[2]["status"] == "failed"


def _write_two_tone(dirpath):
    from cdseg.images import save_image_png, save_mask_png

    img = np.tile(np.array([0.1, 0.2, 0.7]), (48, 48, 1))
    img[16:32, 16:32] = np.array([0.85, 0.25, 0.15])
    rng = np.random.default_rng(7)
    img = np.clip(img + rng.normal(0, 0.002, img.shape), 0, 1)
    gt = np.zeros((48, 48), dtype=bool)
    gt[16:32, 16:32] = True
    save_image_png(img, dirpath / "img.png")
    save_mask_png(gt, dirpath / "gt.png")


class TestRunBenchmark:
    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]")
        report = run_benchmark(path)
        assert report.cases == []
        assert report.aggregates["cases"] == 0

    def test_manifest_must_be_list(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x"}')
        with pytest.raises(PipelineError):
            run_benchmark(path)

    def test_modes_strategies_and_isolation(self, tmp_path):
        _write_two_tone(tmp_path)
        base = {"image": "img.png", "gt": "gt.png", "superpixels": "grid:36", "texture": False}
        cases = [
            {**base, "name": "scrib", "strategy": "single:0.15", "mode": "scribble",
             "annotation": {"fg": [[24, 24]]}},
            {**base, "name": "box-loose", "strategy": "single:0.15", "mode": "bbox",
             "annotation": {"box": [15, 15, 32, 32]}, "looseness": 120},
            {**base, "name": "et", "strategy": "single:0.15", "mode": "scribble-et",
             "annotation": {"fg": [[24, 24]], "bg": [[4, 4]]}},
            {**base, "name": "best", "strategy": "best", "mode": "scribble",
             "annotation": {"fg": [[24, 24]]}},
            {**base, "name": "broken", "image": "missing.png", "mode": "scribble",
             "annotation": {"fg": [[24, 24]]}},
        ]
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps(cases))
        report = run_benchmark(manifest, out_dir=tmp_path / "out")

        by_name = {c.name: c for c in report.cases}
        assert by_name["scrib"].jaccard == 1.0
        assert by_name["box-loose"].jaccard == 1.0
        assert by_name["box-loose"].error_rate == 0.0
        assert by_name["et"].jaccard == 1.0
        assert by_name["best"].jaccard == 1.0
        assert by_name["best"].sigma is not None
        assert by_name["broken"].status == "failed"
        assert "FileNotFoundError" in by_name["broken"].message
        assert report.aggregates["ok"] == 4
        assert report.aggregates["failed"] == 1
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "report.csv").exists()

    def test_best_strategy_requires_gt(self, tmp_path):
        _write_two_tone(tmp_path)
        cases = [
            {"name": "no-gt", "image": "img.png", "superpixels": "grid:36",
             "strategy": "best", "mode": "scribble", "annotation": {"fg": [[24, 24]]}}
        ]
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps(cases))
        report = run_benchmark(manifest)
        assert report.cases[0].status == "failed"
        assert "gt" in report.cases[0].message
