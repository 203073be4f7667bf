import json

import numpy as np
import pytest

from conftest import coseg_pair, coseg_scribbles, ring_blob_map, toy_affinity

from cdseg.cli import build_parser, main
from cdseg.images import load_mask_png, save_image_png, save_label_png, save_mask_png
from cdseg.metrics import jaccard


def write_two_tone(dirpath):
    img = np.tile(np.array([0.1, 0.2, 0.7]), (48, 48, 1))
    img[16:32, 16:32] = np.array([0.85, 0.25, 0.15])
    rng = np.random.default_rng(7)
    img = np.clip(img + rng.normal(0, 0.002, img.shape), 0, 1)
    gt = np.zeros((48, 48), dtype=bool)
    gt[16:32, 16:32] = True
    save_image_png(img, dirpath / "img.png")
    save_mask_png(gt, dirpath / "gt.png")
    return gt


class TestExtract:
    def run_on(self, graph_path, out_path, *extra):
        args = ["extract", "--graph", str(graph_path), "--constraints", "1",
                "--out", str(out_path), *extra]
        assert main(args) == 0
        return json.loads(out_path.read_text())

    def test_formats_agree(self, tmp_path):
        from cdseg.graph import save_affinity_edges, save_affinity_text

        a = toy_affinity()
        save_affinity_text(a, tmp_path / "toy.txt")
        save_affinity_edges(a, tmp_path / "toy.edges")
        np.save(tmp_path / "toy.npy", a)
        outs = [
            self.run_on(tmp_path / name, tmp_path / f"{name}.json")
            for name in ("toy.txt", "toy.edges", "toy.npy")
        ]
        for out in outs:
            assert [c["support"] for c in out["clusters"]] == [[0, 1, 2]]
        assert outs[0] == outs[1] == outs[2]

    def test_report_fields(self, tmp_path):
        from cdseg.graph import save_affinity_text

        save_affinity_text(toy_affinity(), tmp_path / "toy.txt")
        out = self.run_on(tmp_path / "toy.txt", tmp_path / "o.json", "--multi-start", "4")
        assert out["n"] == 8
        assert out["constraints"] == [1]
        assert len(out["alphas"]) >= 1
        cluster = out["clusters"][0]
        assert len(cluster["characteristic"]) == 8
        assert cluster["kkt"] <= 1e-6
        assert 1 in cluster["contains_constraints"]

    def test_fixed_alpha_flag(self, tmp_path):
        from cdseg.graph import save_affinity_text

        save_affinity_text(toy_affinity(), tmp_path / "toy.txt")
        out = self.run_on(tmp_path / "toy.txt", tmp_path / "o.json", "--alpha", "50.0")
        assert out["alphas"] == [50.0]

    def test_bad_constraint_token(self, tmp_path, capsys):
        from cdseg.graph import save_affinity_text

        save_affinity_text(toy_affinity(), tmp_path / "toy.txt")
        rc = main(["extract", "--graph", str(tmp_path / "toy.txt"),
                   "--constraints", "1,x", "--out", str(tmp_path / "o.json")])
        assert rc == 2
        assert "comma list" in capsys.readouterr().err

    def test_missing_graph_file(self, tmp_path, capsys):
        rc = main(["extract", "--graph", str(tmp_path / "nope.txt"),
                   "--constraints", "0", "--out", str(tmp_path / "o.json")])
        assert rc == 2


class TestSegment:
    def test_scribble_mask_and_report(self, tmp_path):
        gt = write_two_tone(tmp_path)
        (tmp_path / "ann.json").write_text(json.dumps({"fg": [[24, 24]]}))
        rc = main([
            "segment", "--image", str(tmp_path / "img.png"), "--superpixels", "grid:36",
            "--mode", "scribble", "--ann", str(tmp_path / "ann.json"),
            "--sigma", "single:0.15", "--no-texture", "--gt", str(tmp_path / "gt.png"),
            "--out-mask", str(tmp_path / "mask.png"),
            "--out-report", str(tmp_path / "report.json"),
        ])
        assert rc == 0
        assert jaccard(load_mask_png(tmp_path / "mask.png"), gt) == 1.0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["mode"] == "foreground"
        assert report["jaccard"] == 1.0
        assert report["selected_regions"] == [14, 15, 20, 21]

    def test_loose_box_with_best_sigma(self, tmp_path):
        gt = write_two_tone(tmp_path)
        (tmp_path / "ann.json").write_text(json.dumps({"box": [15, 15, 32, 32]}))
        rc = main([
            "segment", "--image", str(tmp_path / "img.png"), "--superpixels", "grid:36",
            "--mode", "bbox", "--ann", str(tmp_path / "ann.json"), "--looseness", "120",
            "--sigma", "best", "--gt", str(tmp_path / "gt.png"),
            "--out-mask", str(tmp_path / "mask.png"),
            "--out-report", str(tmp_path / "report.json"),
        ])
        assert rc == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["mode"] == "background"
        assert report["sigma"] > 0
        assert jaccard(load_mask_png(tmp_path / "mask.png"), gt) == 1.0

    def test_error_tolerant_mode(self, tmp_path):
        gt = write_two_tone(tmp_path)
        (tmp_path / "ann.json").write_text(json.dumps({"fg": [[24, 24]], "bg": [[4, 4]]}))
        rc = main([
            "segment", "--image", str(tmp_path / "img.png"), "--superpixels", "grid:36",
            "--mode", "scribble-et", "--ann", str(tmp_path / "ann.json"),
            "--sigma", "single:0.15", "--no-texture",
            "--out-mask", str(tmp_path / "mask.png"),
        ])
        assert rc == 0
        assert jaccard(load_mask_png(tmp_path / "mask.png"), gt) == 1.0

    def test_best_sigma_needs_gt(self, tmp_path, capsys):
        write_two_tone(tmp_path)
        (tmp_path / "ann.json").write_text(json.dumps({"fg": [[24, 24]]}))
        rc = main([
            "segment", "--image", str(tmp_path / "img.png"), "--superpixels", "grid:36",
            "--mode", "scribble", "--ann", str(tmp_path / "ann.json"),
            "--sigma", "best", "--out-mask", str(tmp_path / "mask.png"),
        ])
        assert rc == 2
        assert "--gt" in capsys.readouterr().err

    def test_unknown_sigma_token(self, tmp_path, capsys):
        write_two_tone(tmp_path)
        (tmp_path / "ann.json").write_text(json.dumps({"fg": [[24, 24]]}))
        rc = main([
            "segment", "--image", str(tmp_path / "img.png"), "--superpixels", "grid:36",
            "--mode", "scribble", "--ann", str(tmp_path / "ann.json"),
            "--sigma", "tuned", "--out-mask", str(tmp_path / "mask.png"),
        ])
        assert rc == 2
        assert "sigma" in capsys.readouterr().err


class TestCoseg:
    def test_interactive_pair_outputs(self, tmp_path):
        images, maps, gt = coseg_pair(seed=1)
        save_image_png(images[0], tmp_path / "a.png")
        save_image_png(images[1], tmp_path / "b.png")
        save_label_png(ring_blob_map().labels, tmp_path / "labels.png")
        fg, bg = coseg_scribbles(gt)
        (tmp_path / "scr.json").write_text(
            json.dumps([{"image": 0, "fg": fg.tolist(), "bg": bg.tolist()}])
        )
        rc = main([
            "coseg", "--images", f"{tmp_path}/a.png,{tmp_path}/b.png",
            "--scribbles", str(tmp_path / "scr.json"),
            "--superpixels", str(tmp_path / "labels.png"),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert rc == 0
        for stem in ("00_a", "01_b"):
            mask = load_mask_png(tmp_path / "out" / f"{stem}_mask.png")
            assert jaccard(mask, gt) >= 0.9
            regions = json.loads((tmp_path / "out" / f"{stem}_regions.json").read_text())
            assert len(regions["regions"]) == 80
            flagged = {r["id"] for r in regions["regions"] if r["foreground"]}
            pixel_flagged = {r for r in range(80) if mask[maps[0].labels == r].all()}
            assert flagged == pixel_flagged

    def test_unsupervised_needs_two_images(self, tmp_path, capsys):
        images, maps, _ = coseg_pair(seed=1)
        save_image_png(images[0], tmp_path / "a.png")
        save_label_png(ring_blob_map().labels, tmp_path / "labels.png")
        rc = main([
            "coseg", "--images", f"{tmp_path}/a.png",
            "--superpixels", str(tmp_path / "labels.png"),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert rc == 2
        assert "2 images" in capsys.readouterr().err

    def test_missing_descriptor_dir_entry(self, tmp_path, capsys):
        images, _, _ = coseg_pair(seed=1)
        save_image_png(images[0], tmp_path / "a.png")
        save_image_png(images[1], tmp_path / "b.png")
        (tmp_path / "desc").mkdir()
        rc = main([
            "coseg", "--images", f"{tmp_path}/a.png,{tmp_path}/b.png",
            "--superpixels", "grid:80", "--descriptors", str(tmp_path / "desc"),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert rc == 2
        assert "descriptor" in capsys.readouterr().err


class TestBench:
    def test_green_manifest_exit_zero(self, tmp_path):
        write_two_tone(tmp_path)
        cases = [{"name": "s", "image": "img.png", "gt": "gt.png", "superpixels": "grid:36",
                  "strategy": "single:0.15", "mode": "scribble",
                  "annotation": {"fg": [[24, 24]]}, "texture": False}]
        (tmp_path / "m.json").write_text(json.dumps(cases))
        rc = main(["bench", "--manifest", str(tmp_path / "m.json"),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "report.csv").exists()

    def test_failing_case_exit_nonzero(self, tmp_path):
        write_two_tone(tmp_path)
        cases = [{"name": "broken", "image": "absent.png", "superpixels": "grid:36",
                  "mode": "scribble", "annotation": {"fg": [[24, 24]]}}]
        (tmp_path / "m.json").write_text(json.dumps(cases))
        rc = main(["bench", "--manifest", str(tmp_path / "m.json"),
                   "--out", str(tmp_path / "out")])
        assert rc == 1


class TestParser:
    def test_serve_defaults_read_env(self, monkeypatch):
        monkeypatch.setenv("CDS_PORT", "9123")
        monkeypatch.setenv("CDS_STORE", "/tmp/cds-store")
        args = build_parser().parse_args(["serve"])
        assert args.port == 9123
        assert args.store_dir == "/tmp/cds-store"
        assert args.max_upload_mb == 32.0

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])
