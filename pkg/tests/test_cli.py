import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from flowroi.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from flowroi.sequence import read_pbm


def run(*argv):
    return main([str(a) for a in argv])


def tree(path):
    path = Path(path)
    return {str(p.relative_to(path)): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    assert run("synth", out, "--cells", 5, "--frames", 6, "--width", 128, "--height", 128, "--seed", 4) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def compressed(dataset, tmp_path_factory):
    base = tmp_path_factory.mktemp("comp")
    report = base / "report.json"
    assert run("compress", dataset, base / "froi", "--report-out", report) == EXIT_OK
    return base / "froi", json.loads(report.read_text())


# synth


def test_synth_is_byte_identical(tmp_path):
    args = ["--cells", 3, "--frames", 4, "--width", 96, "--height", 80, "--seed", 9]
    assert run("synth", tmp_path / "a", *args) == EXIT_OK
    assert run("synth", tmp_path / "b", *args) == EXIT_OK
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert {"manifest.txt", "trajectories.csv", "frames/0000.pgm", "truth/0003.pbm"} <= set(a)
    assert a == b


def test_synth_from_manifest_reproduces(dataset, tmp_path):
    assert run("synth", tmp_path / "again", "--spec", dataset / "manifest.txt") == EXIT_OK
    assert tree(tmp_path / "again") == tree(dataset)


def test_synth_without_cells(tmp_path):
    assert run("synth", tmp_path / "bg", "--cells", 0, "--frames", 3, "--width", 64, "--height", 64) == EXIT_OK
    masks = [read_pbm(p) for p in sorted((tmp_path / "bg" / "truth").glob("*.pbm"))]
    assert len(masks) == 3 and not any(m.any() for m in masks)


# compress / decompress


def test_compress_report_and_budgets(compressed):
    out, report = compressed
    assert len(list(out.glob("*.froi"))) == 6
    assert report["command"] == "compress"
    assert "workers" not in report["config"]["values"]
    assert len(report["config"]["digest"]) == 16
    for row in report["frames"]:
        assert row["bytes"] <= row["budget"]
        assert row["bytes"] == (out / f"{row['frame']:04d}.froi").stat().st_size
    assert "coverage" in report and "timing" not in report


def test_lossless_and_rate_conflict(dataset, tmp_path):
    code = run("compress", dataset, tmp_path / "x", "--compression-rate", "1.01", "--lossless")
    assert code == EXIT_USAGE
    assert not (tmp_path / "x").exists()


def test_unknown_flag_and_bad_config(dataset, tmp_path):
    assert run("compress", dataset, tmp_path / "x", "--no-such-flag") == EXIT_USAGE
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key=3\n")
    assert run("compress", dataset, tmp_path / "x", "--config", cfg) == EXIT_USAGE


def test_missing_input_is_data_error(tmp_path):
    assert run("compress", tmp_path / "nothing", tmp_path / "x") == EXIT_DATA


def test_lossless_cli_round_trip(dataset, tmp_path):
    assert run("compress", dataset, tmp_path / "f", "--lossless", "--report-out", tmp_path / "r.json") == EXIT_OK
    assert run("decompress", tmp_path / "f", tmp_path / "d") == EXIT_OK
    raw = tree(dataset / "frames")
    assert tree(tmp_path / "d" / "frames") == raw


def test_decoded_masks_match_extracted(dataset, compressed, tmp_path):
    out, _ = compressed
    assert run("extract-roi", dataset, tmp_path / "m", "--report-out", tmp_path / "r.json") == EXIT_OK
    assert run("decompress", out, tmp_path / "d") == EXIT_OK
    for p in sorted((tmp_path / "m").glob("*.pbm")):
        assert np.array_equal(read_pbm(p), read_pbm(tmp_path / "d" / "masks" / p.name))


def test_truncated_stream_reported_and_rest_decoded(compressed, tmp_path, capsys):
    out, _ = compressed
    src = tmp_path / "streams"
    src.mkdir()
    for p in out.glob("*.froi"):
        (src / p.name).write_bytes(p.read_bytes())
    bad = src / "0002.froi"
    bad.write_bytes(bad.read_bytes()[:40])
    code = run("decompress", src, tmp_path / "d", "--report-out", tmp_path / "r.json")
    assert code == EXIT_DATA
    assert "0002.froi" in capsys.readouterr().err
    decoded = sorted(p.name for p in (tmp_path / "d" / "frames").glob("*.pgm"))
    assert decoded == ["0000.pgm", "0001.pgm", "0003.pgm", "0004.pgm", "0005.pgm"]
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["decoded"] == 5 and report["failed"][0]["file"] == "0002.froi"


def test_config_file_then_flags(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("roi_threshold=0.3\nscaling_factor=3\n")
    rep = tmp_path / "r.json"
    assert run("extract-roi", dataset, tmp_path / "m", "--config", cfg, "--roi-threshold", 0.1, "--report-out", rep) == 0
    values = json.loads(rep.read_text())["config"]["values"]
    assert values["roi_threshold"] == 0.1 and values["scaling_factor"] == 3


def test_worker_count_leaves_bytes_alone(dataset, compressed, tmp_path):
    out, report = compressed
    rep = tmp_path / "r.json"
    assert run("compress", dataset, tmp_path / "w3", "--workers", 3, "--report-out", rep) == EXIT_OK
    assert tree(tmp_path / "w3") == tree(out)
    assert json.loads(rep.read_text()) == report


def test_timing_only_on_request(dataset, tmp_path):
    rep = tmp_path / "r.json"
    assert run("compress", dataset, tmp_path / "f", "--timing", "--report-out", rep) == EXIT_OK
    timing = json.loads(rep.read_text())["timing"]
    assert timing["fps"] > 0 and set(timing["stages"]) == {"denoise", "flow", "roi", "encode"}


def test_flow_dump(dataset, tmp_path):
    assert run("extract-roi", dataset, tmp_path / "m", "--flow-out", tmp_path / "flo", "--report-out", tmp_path / "r") == 0
    flows = sorted((tmp_path / "flo").glob("*.flo"))
    assert len(flows) == 5 and flows[0].read_bytes()[:4] == b"FLO1"


def test_threshold_flag_sets_mask_fraction(tmp_path):
    ds = tmp_path / "big"
    assert run("synth", ds, "--frames", 12, "--seed", 7) == EXIT_OK
    rep = tmp_path / "r.json"
    assert run("extract-roi", ds, tmp_path / "m", "--roi-threshold", 0.2, "--report-out", rep) == EXIT_OK
    frac = json.loads(rep.read_text())["masks"]["mean_pixel_fraction"]
    assert 0.15 <= frac <= 0.25


# evaluate


def test_evaluate_identical_is_infinite(dataset, tmp_path, capsys):
    assert run("evaluate", dataset, dataset) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    rows = report["quality"]["frames"]
    assert len(rows) == 6 and all(r["psnr_global"] == "inf" for r in rows)
    assert report["roi_region"] == "ground_truth"


def test_evaluate_without_truth(dataset, compressed, tmp_path, capsys):
    out, _ = compressed
    assert run("decompress", out, tmp_path / "d") == EXIT_OK
    assert run("evaluate", dataset / "frames", tmp_path / "d", "--streams", out) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert "coverage" not in report
    assert report["roi_region"] == "pipeline_mask"
    assert all(r["achieved_ratio"] >= 40 for r in report["quality"]["frames"])


def test_evaluate_frame_count_mismatch(dataset, tmp_path):
    (tmp_path / "d").mkdir()
    assert run("evaluate", dataset, tmp_path / "d") == EXIT_DATA


# sweep / plot


def test_sweep_refuses_huge_grid(dataset, tmp_path):
    many = ",".join(str(0.01 * i) for i in range(1, 60))
    rates = ",".join(str(2 + i) for i in range(60))
    code = run("sweep", dataset, tmp_path / "s.csv", "--roi-threshold", many, "--compression-rate", rates, "--scaling-factor", "1,2,3")
    assert code == EXIT_USAGE
    assert not (tmp_path / "s.csv").exists()


def test_sweep_resume_and_infeasible(dataset, tmp_path, capsys):
    out = tmp_path / "s.csv"
    args = ["sweep", dataset, out, "--roi-threshold", "0.1,0.2", "--compression-rate", "20,5000"]
    assert run(*args, "--report-out", tmp_path / "r1.json") == EXIT_OK
    assert "infeasible" in capsys.readouterr().err
    first = json.loads((tmp_path / "r1.json").read_text())
    assert first["infeasible"] == 2 and first["resumed_skipped"] == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 4 and {r["method"] for r in rows} == {"flowroi", "uniform"}
    log = (tmp_path / "s.csv.log").read_text().splitlines()
    assert log[0].startswith("# input ") and len(log) == 5
    before = out.read_bytes()
    assert run(*args, "--report-out", tmp_path / "r2.json") == EXIT_OK
    second = json.loads((tmp_path / "r2.json").read_text())
    assert second["resumed_skipped"] == 4
    assert out.read_bytes() == before


def test_plot_is_deterministic(dataset, tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", dataset, out, "--compression-rate", "10,20", "--report-out", tmp_path / "r.json") == EXIT_OK
    assert run("plot", out, tmp_path / "a.svg") == EXIT_OK
    assert run("plot", out, tmp_path / "b.svg", "--metric", "psnr_global") == EXIT_OK
    assert run("plot", out, tmp_path / "c.svg") == EXIT_OK
    a = (tmp_path / "a.svg").read_bytes()
    assert a.startswith(b"<?xml") and a == (tmp_path / "c.svg").read_bytes()


def test_console_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "flowroi.cli", "--help"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    for name in ("synth", "extract-roi", "compress", "decompress", "evaluate", "sweep", "plot"):
        assert name in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "flowroi.cli"], capture_output=True, text=True, env=env)
    assert proc.returncode == EXIT_USAGE
