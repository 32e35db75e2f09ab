import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowroi import (
    Frame,
    PipelineConfig,
    Sequence,
    SequenceError,
    SyntheticSpec,
    generate_synthetic,
)
from flowroi.metrics import (
    coverage,
    mse,
    psnr,
    quality_report,
    rate_curve,
    throughput,
    to_json,
    write_rate_csv,
)


def _pair(seed, shape=(32, 32)):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, size=shape).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-9, 10, size=shape), 0, 255).astype(np.uint8)
    return Frame(a, 8), Frame(b, 8)


def test_identical_frames_are_infinite():
    a, _ = _pair(0)
    assert psnr(a, a) == math.inf


def test_off_by_one_everywhere():
    a = Frame(np.full((16, 16), 100, dtype=np.uint8), 8)
    b = Frame(np.full((16, 16), 101, dtype=np.uint8), 8)
    assert psnr(a, b) == pytest.approx(20 * math.log10(255), abs=0.01)
    assert psnr(a, b) == pytest.approx(48.13, abs=0.01)


def test_region_restricted_values():
    a = np.full((20, 20), 50, dtype=np.uint8)
    m = np.zeros((20, 20), dtype=bool)
    m[5:12, 3:9] = True
    b = a.copy()
    b[m] += 2
    assert psnr(a, b, m) == pytest.approx(42.11, abs=0.01)
    assert psnr(a, b, ~m) == math.inf


def test_sixteen_bit_peak():
    a = Frame(np.full((8, 8), 1000, dtype=np.uint16), 16)
    b = Frame(np.full((8, 8), 1001, dtype=np.uint16), 16)
    assert psnr(a, b) == pytest.approx(20 * math.log10(65535), abs=1e-9)


def test_empty_region_rejected():
    a, b = _pair(1)
    with pytest.raises(ValueError):
        psnr(a, b, np.zeros(a.shape, dtype=bool))


@given(st.integers(0, 2**31))
def test_psnr_symmetric_and_permutation_invariant(seed):
    a, b = _pair(seed)
    assert psnr(a, b) == psnr(b, a)
    perm = np.random.default_rng(seed).permutation(a.pixels.size)
    pa = a.pixels.ravel()[perm].reshape(a.shape)
    pb = b.pixels.ravel()[perm].reshape(b.shape)
    assert psnr(pa, pb) == pytest.approx(psnr(a, b), rel=1e-12)


@given(
    arrays(np.uint8, (24, 24)),
    arrays(np.uint8, (24, 24)),
    arrays(np.bool_, (24, 24)),
)
def test_mse_splits_by_region(a, b, m):
    if not m.any() or m.all():
        return
    f = m.mean()
    whole = mse(a, b)
    parts = f * mse(a, b, m) + (1 - f) * mse(a, b, ~m)
    assert parts == pytest.approx(whole, rel=1e-9, abs=1e-12)


def test_quality_report_rows_and_aggregates():
    pairs = [_pair(s) for s in range(3)]
    region = np.zeros((32, 32), dtype=bool)
    region[:8] = True
    rep = quality_report(
        [p[0] for p in pairs], [p[1] for p in pairs], regions=[region] * 3, masks=[region] * 3, sizes=[64, 128, 256]
    )
    assert [r.achieved_ratio for r in rep.rows] == [16.0, 8.0, 4.0]
    agg = rep.aggregates()
    assert agg["achieved_ratio"]["min"] == 4.0
    assert agg["mask_fraction"]["mean"] == pytest.approx(0.25)
    with pytest.raises(SequenceError):
        quality_report([pairs[0][0]], [])


def test_coverage_full_empty_and_mismatch(small_dataset):
    _, truth = small_dataset
    full = [np.ones(truth.masks[0].shape, dtype=bool)] * truth.n_frames
    empty = [np.zeros(truth.masks[0].shape, dtype=bool)] * truth.n_frames
    rep = coverage(full, truth)
    assert rep.coverage_rate == 1.0 and rep.cells_covered == rep.cells_total > 0
    rep = coverage(empty, truth)
    assert rep.coverage_rate == 0.0 and rep.cells_covered == 0
    assert len(rep.missed_cell_log) == rep.cells_total
    with pytest.raises(SequenceError):
        coverage(full[:-1], truth)


def test_coverage_logs_contrast_of_missed_cells(small_dataset):
    _, truth = small_dataset
    masks = [m.copy() for m in truth.masks]
    masks[2][:] = False
    rep = coverage(masks, truth)
    assert rep.cells_total - rep.cells_covered == len(rep.missed_cell_log)
    assert {f for f, _, _ in rep.missed_cell_log} == {2}
    for _, cell, contrast in rep.missed_cell_log:
        assert contrast == pytest.approx(truth.contrasts[cell])


def test_rate_curve_empty_masks_match_uniform(small_dataset):
    seq, truth = small_dataset
    empty = [np.zeros(seq.shape, dtype=bool)] * len(seq)
    rows = rate_curve(seq, PipelineConfig(), [8, 16], masks=empty, truth=truth)
    for roi, uni in zip(rows[::2], rows[1::2]):
        assert (roi.method, uni.method) == ("flowroi", "uniform")
        assert (roi.psnr_global, roi.psnr_roi, roi.psnr_background, roi.mean_bytes) == (
            uni.psnr_global,
            uni.psnr_roi,
            uni.psnr_background,
            uni.mean_bytes,
        )


def test_rate_curve_is_reproducible(small_dataset):
    seq, truth = small_dataset
    a = rate_curve(seq, PipelineConfig(), [10, 20], truth=truth)
    b = rate_curve(seq, PipelineConfig(), [10, 20], truth=truth)
    assert a == b


@pytest.mark.parametrize("rates", [[40, 20], [1.0, 10], [0.5]])
def test_rate_curve_rejects_bad_rates(small_dataset, rates):
    seq, _ = small_dataset
    with pytest.raises(ValueError):
        rate_curve(seq, PipelineConfig(), rates, masks=[np.zeros(seq.shape, bool)] * len(seq))


def test_benchmark_rate_curve_monotone(benchmark, benchmark_masks):
    seq, truth = benchmark
    rows = rate_curve(seq, PipelineConfig(), [40, 80, 120], masks=benchmark_masks, truth=truth)
    for method in ("flowroi", "uniform"):
        series = [r for r in rows if r.method == method]
        for field in ("psnr_global", "psnr_roi"):
            values = [getattr(r, field) for r in series]
            assert all(a >= b for a, b in zip(values, values[1:]))


def test_roi_coding_at_double_rate_holds_cell_quality(benchmark, benchmark_masks):
    seq, truth = benchmark
    roi = rate_curve(seq, PipelineConfig(), [80], masks=benchmark_masks, truth=truth, methods=("flowroi",))[0]
    uni = rate_curve(seq, PipelineConfig(), [40], masks=benchmark_masks, truth=truth, methods=("uniform",))[0]
    assert roi.psnr_roi >= uni.psnr_roi - 0.5


def test_throughput_report_and_stage_bookkeeping():
    seq, _ = generate_synthetic(SyntheticSpec(n_cells=4, n_frames=10, width=128, height=128, seed=2))
    rep = throughput(seq, PipelineConfig(), worker_counts=[1, 2])
    assert rep["frames"] == 10 and rep["host_cpu"]
    single = rep["runs"][0]
    assert single["workers"] == 1 and single["fps"] > 0
    assert set(single["stages"]) == {"denoise", "flow", "roi", "encode"}
    assert sum(single["stages"].values()) <= single["seconds"] * 1.05
    assert rep["runs"][1]["fps"] > 0
    with pytest.raises(SequenceError):
        throughput(Sequence(tuple(seq)[:9]), PipelineConfig())


def test_json_infinity_is_a_string():
    text = to_json({"psnr": math.inf, "rows": [np.float64(1.5), np.int64(3)]})
    data = json.loads(text)
    assert data["psnr"] == "inf"
    assert data["rows"] == [1.5, 3]
    assert data["schema_version"] == 1
    assert "Infinity" not in text


def test_rate_csv(tmp_path, small_dataset):
    seq, truth = small_dataset
    rows = rate_curve(seq, PipelineConfig(), [10], truth=truth)
    path = tmp_path / "r.csv"
    write_rate_csv(rows, path, extra={"roi_threshold": 0.2})
    write_rate_csv(rows, path, extra={"roi_threshold": 0.3}, append=True)
    table = list(csv.DictReader(open(path)))
    assert len(table) == 4
    assert table[0]["method"] == "flowroi" and table[1]["method"] == "uniform"
    assert [r["roi_threshold"] for r in table] == ["0.2", "0.2", "0.3", "0.3"]
