"""Record parsing, segmentation and normalization."""

import numpy as np
import numpy.testing as npt
import pytest

from ecgnet.ingest import (
    MIT_BIH,
    EcgRecord,
    LabelScheme,
    NormStats,
    Segment,
    ZeroVarianceError,
    compute_norm_stats,
    load_record,
    normalize,
    read_manifest,
    segment,
)


def write_record(path, rec_id, rate, samples, declared=None):
    lines = [f"id,{rec_id}", f"rate,{rate}", f"n,{declared if declared is not None else len(samples)}"]
    lines += [str(v) for v in samples]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- load_record ---


def test_load_record_echoes_header(tmp_path):
    path = tmp_path / "rec.csv"
    write_record(path, "rec1", 4, [0.5 * i for i in range(8)])
    rec = load_record(path)
    assert rec.record_id == "rec1"
    assert rec.sampling_rate_hz == 4
    assert rec.samples.shape == (8,)
    npt.assert_allclose(rec.samples, [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5])


def test_load_record_sample_count_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    write_record(path, "bad", 10, list(range(9)), declared=10)
    with pytest.raises(ValueError, match="sample count mismatch"):
        load_record(path)


def test_load_record_malformed_header(tmp_path):
    path = tmp_path / "noheader.csv"
    path.write_text("1.0\n2.0\n3.0\n4.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed header"):
        load_record(path)


def test_load_record_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_record(tmp_path / "absent.csv")


def test_load_record_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="format"):
        load_record(tmp_path / "x.csv", fmt="wfdb")


def test_load_record_mitbih_scale_fixture(tmp_path):
    # full-length record: 360 Hz, 650000 samples
    path = tmp_path / "mit.csv"
    samples = np.round(np.sin(np.arange(650000) * 0.01), 6)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,100\nrate,360\nn,650000\n")
        fh.write("\n".join(map(str, samples)))
    rec = load_record(path)
    assert rec.sampling_rate_hz == 360
    assert rec.samples.shape == (650000,)


# --- segment ---


def test_segment_len_is_rate_times_window():
    rec = EcgRecord("r", 360, np.arange(3600 * 2 + 100, dtype=float))
    segs = segment(rec, 10.0)
    assert len(segs) == 2
    assert all(s.values.shape == (3600,) for s in segs)


def test_segment_exact_tiling():
    rec = EcgRecord("r", 5, np.arange(20, dtype=float))
    segs = segment(rec, 2.0)  # window of 10 samples
    assert len(segs) == 2
    npt.assert_array_equal(np.concatenate([s.values for s in segs]), rec.samples)


def test_segment_drops_remainder():
    rec = EcgRecord("r", 4, np.arange(10, dtype=float))  # 2.5 windows of 4
    segs = segment(rec, 1.0)
    assert len(segs) == 2
    npt.assert_array_equal(segs[-1].values, [4.0, 5.0, 6.0, 7.0])


def test_segment_short_record_gives_empty():
    rec = EcgRecord("r", 10, np.arange(5, dtype=float))
    assert segment(rec, 1.0) == []


def test_segment_windows_disjoint_and_ordered():
    rng = np.random.default_rng(0)
    rec = EcgRecord("r", 7, rng.standard_normal(100))
    segs = segment(rec, 1.0)
    window = 7
    assert len(segs) == 100 // window
    emitted = np.concatenate([s.values for s in segs])
    npt.assert_array_equal(emitted, rec.samples[: len(segs) * window])


def test_segment_label_from_record_track():
    rec = EcgRecord("r", 4, np.arange(8, dtype=float), label_track="V")
    segs = segment(rec, 1.0, scheme=MIT_BIH)
    assert all(s.label == MIT_BIH.class_id("V") for s in segs)


# --- normalization stats ---


def test_norm_stats_hand_case():
    stats = compute_norm_stats([Segment("a", np.array([1.0, 2.0, 3.0]))])
    assert stats.mean == 2.0
    npt.assert_allclose(stats.std, 0.816496580927726, rtol=1e-12)


def test_norm_stats_constant_signal():
    stats = compute_norm_stats([Segment("a", np.full(6, 5.0))])
    assert stats.mean == 5.0
    assert stats.std == 0.0


def test_norm_stats_pools_across_segments():
    stats = compute_norm_stats(
        [Segment("a", np.array([0.0, 0.0])), Segment("b", np.array([2.0, 2.0]))]
    )
    assert stats.mean == 1.0
    assert stats.std == 1.0


def test_norm_stats_empty_input():
    with pytest.raises(ValueError):
        compute_norm_stats([])


# --- normalize ---


def test_normalize_hand_case():
    seg = normalize(Segment("a", np.array([1.0, 2.0, 3.0])), NormStats(2.0, 0.816496580927726))
    npt.assert_allclose(seg.values, [-1.224744871391589, 0.0, 1.224744871391589], rtol=1e-9)
    assert seg.normalized


def test_normalize_centering():
    seg = normalize(Segment("a", np.full(4, 3.5)), NormStats(3.5, 2.0))
    npt.assert_array_equal(seg.values, np.zeros(4))


def test_normalize_zero_variance():
    with pytest.raises(ZeroVarianceError):
        normalize(Segment("a", np.array([1.0, 1.0])), NormStats(1.0, 0.0))


def test_normalize_rejects_double_normalization():
    seg = normalize(Segment("a", np.array([1.0, 2.0])), NormStats(1.5, 0.5))
    with pytest.raises(ValueError, match="already normalized"):
        normalize(seg, NormStats(0.0, 1.0))


def test_normalize_preserves_label_and_length():
    label = MIT_BIH.class_id("N")
    seg = normalize(Segment("a", np.arange(5, dtype=float), label=label), NormStats(2.0, 1.0))
    assert seg.label == label
    assert seg.values.shape == (5,)


def test_normalize_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(10):
        values = rng.standard_normal(50) * rng.uniform(0.5, 20) + rng.uniform(-5, 5)
        seg = Segment("a", values.copy())
        stats = compute_norm_stats([seg])
        out = normalize(seg, stats)
        npt.assert_allclose(out.values * stats.std + stats.mean, values, rtol=1e-9, atol=1e-9)


def test_normalized_pool_has_zero_mean_unit_std():
    rng = np.random.default_rng(2)
    segs = [Segment(f"s{i}", rng.standard_normal(40) * 3 + 1) for i in range(5)]
    stats = compute_norm_stats(segs)
    normed = np.concatenate([normalize(s, stats).values for s in segs])
    assert abs(normed.mean()) < 1e-9
    assert abs(np.sqrt(np.mean((normed - normed.mean()) ** 2)) - 1.0) < 1e-9


# --- schemes and manifest ---


def test_label_scheme_lookup():
    assert MIT_BIH.k == 5
    assert MIT_BIH.class_id("A").index == 4
    with pytest.raises(ValueError, match="unknown label code"):
        MIT_BIH.class_id("X")


def test_label_scheme_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        LabelScheme(("N", "N"))


def test_read_manifest(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text(
        "record_path,segment_index,label_code\nrec1.csv,0,N\nrec1.csv,1,V\n", encoding="utf-8"
    )
    rows = read_manifest(path)
    assert len(rows) == 2
    assert rows[1].record_path == "rec1.csv"
    assert rows[1].segment_index == 1
    assert rows[1].label_code == "V"


def test_read_manifest_bad_header(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("path,idx,label\nrec1.csv,0,N\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        read_manifest(path)


def test_record_invariants():
    with pytest.raises(ValueError, match="positive"):
        EcgRecord("r", 0, np.arange(4.0))
    with pytest.raises(ValueError, match="non-empty"):
        EcgRecord("r", 10, np.array([]))
