"""
Tests for outage aggregation, confidence intervals and result files
"""
import json
import warnings
from datetime import datetime, timedelta, timezone

import numpy as np
import pandas as pd
import pytest

from src.harness.reporting import (
    OutageAccumulator,
    OutageReport,
    build_manifest,
    device_outage_difference,
    difference_interval,
    emit_results,
    mean_interval,
    paired_difference_interval,
    system_outage_difference,
    wilson_interval,
)


def _accumulator(K=2, reservoir_size=1000, seed=0):
    return OutageAccumulator(K, 1, "mr", "equal", gamma_threshold=1.0,
                             reservoir_size=reservoir_size, reservoir_seed=seed)


def _report(samples=(-3.2, -0.2, 0.1, 0.4, 1.2)):
    acc = _accumulator(K=len(samples))
    acc.add(10 ** (np.asarray(samples) / 10), np.ones(len(samples)), "d0")
    return acc.finalize()


def test_wilson_interval():
    lo, hi = wilson_interval(5, 100)
    assert lo == pytest.approx(0.0215, abs=1e-3)
    assert hi == pytest.approx(0.1118, abs=1e-3)
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_wilson_interval_brackets_estimate():
    for hits in range(0, 21):
        lo, hi = wilson_interval(hits, 20)
        assert lo <= hits / 20 <= hi


def test_mean_interval():
    mean, lo, hi = mean_interval([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert lo < 2.0 < hi
    assert hi - 2.0 == pytest.approx(1.959964 * 1.0 / np.sqrt(3), rel=1e-5)
    assert mean_interval([4.0]) == (4.0, 4.0, 4.0)


def test_outage_counting():
    acc = _accumulator()
    acc.add(np.array([0.5, 2.0]), np.array([0.1, 0.9]), "d0")
    acc.add(np.array([2.0, 3.0]), np.array([0.9, 1.5]), "d1")
    report = acc.finalize()

    assert report.n_deployments == 2
    assert report.device_outage == pytest.approx(0.25)
    assert report.system_outage == pytest.approx(0.5)
    assert report.system_outage >= report.device_outage
    assert report.sum_se_mean == pytest.approx(1.7)
    assert report.device_ci[0] <= 0.25 <= report.device_ci[1]
    np.testing.assert_allclose(np.sort(report.sinr_samples_db),
                               np.sort(10 * np.log10([0.5, 2.0, 2.0, 3.0])))


def test_zero_sinr_is_floored():
    acc = _accumulator()
    acc.add(np.array([0.0, 2.0]), np.ones(2), "d0")
    report = acc.finalize()
    assert report.device_outage == 0.5
    assert np.all(np.isfinite(report.sinr_samples_db))


def test_reservoir_is_bounded_and_reproducible():
    def run(seed):
        acc = _accumulator(reservoir_size=5, seed=seed)
        for i in range(10):
            acc.add(np.array([1.0 + i, 20.0 + i]), np.ones(2), f"d{i}")
        return acc.finalize()

    a, b = run(3), run(3)
    assert a.sinr_samples_db.size == 5
    np.testing.assert_array_equal(a.sinr_samples_db, b.sinr_samples_db)


def test_digest_depends_on_deployment_order():
    one, two = _accumulator(), _accumulator()
    one.add(np.ones(2), np.ones(2), "a")
    one.add(np.ones(2), np.ones(2), "b")
    two.add(np.ones(2), np.ones(2), "b")
    two.add(np.ones(2), np.ones(2), "a")
    assert one.finalize().deployment_digest != two.finalize().deployment_digest


def test_finalize_needs_data():
    with pytest.raises(ValueError):
        _accumulator().finalize()


def test_sinr_histogram():
    report = _report((-0.2, 0.1, 0.4, 1.2))
    edges, counts = report.sinr_histogram(0.5)
    np.testing.assert_allclose(edges, [-0.5, 0.0, 0.5, 1.0, 1.5])
    np.testing.assert_array_equal(counts, [1, 2, 0, 1])
    assert counts.sum() == report.sinr_samples_db.size

    centers, density = report.sinr_density(0.5)
    assert np.sum(density) * 0.5 == pytest.approx(1.0)
    np.testing.assert_allclose(centers, [-0.25, 0.25, 0.75, 1.25])


def test_report_serialization_is_lossless():
    report = _report()
    restored = OutageReport.from_dict(json.loads(json.dumps(report.to_dict())))
    np.testing.assert_array_equal(restored.sinr_samples_db, report.sinr_samples_db)
    assert restored.cell == report.cell
    assert restored.device_ci == report.device_ci
    assert restored.deployment_digest == report.deployment_digest


def test_emit_results(tmp_path):
    reports = [_report(), _report((0.3, 5.0))]
    manifest = build_manifest({"seed": 1, "K": 5}, {"K_values": [5]})
    written = emit_results(reports, tmp_path / "out", manifest)

    assert set(written) == {"sum_se.csv", "outage.csv", "sinr_pdf.csv", "manifest.json"}
    se = pd.read_csv(written["sum_se.csv"])
    assert list(se.columns) == ["K", "f", "precoder", "strategy",
                                "sum_se_mean", "sum_se_ci_lo", "sum_se_ci_hi"]
    outage = pd.read_csv(written["outage.csv"])
    assert list(outage.columns) == ["K", "f", "precoder", "strategy", "device_outage",
                                    "device_ci_lo", "device_ci_hi", "system_outage",
                                    "system_ci_lo", "system_ci_hi", "n_deployments"]
    assert len(outage) == 2
    pdf = pd.read_csv(written["sinr_pdf.csv"])
    assert list(pdf.columns) == ["K", "f", "precoder", "strategy", "bin_lo_db", "bin_hi_db", "count"]
    assert pdf.groupby("K")["count"].sum().to_dict() == {5: 5, 2: 2}

    saved = json.loads(written["manifest.json"].read_text())
    assert saved["seed"] == 1
    assert saved["sweep"] == {"K_values": [5]}
    assert saved["manifest"]["failures"] == []


def test_emit_results_is_byte_stable(tmp_path):
    reports = [_report()]
    first = emit_results(reports, tmp_path / "a")
    second = emit_results(reports, tmp_path / "b")
    for name in ("sum_se.csv", "outage.csv", "sinr_pdf.csv"):
        assert first[name].read_bytes() == second[name].read_bytes()


def test_emit_results_reports_bad_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit_results([_report()], blocker)


def test_manifest_timestamp_is_timezone_aware_utc():
    with warnings.catch_warnings():
        warnings.simplefilter("error", DeprecationWarning)
        manifest = build_manifest({"seed": 3}, {"K_values": [2]})
    stamp = manifest["manifest"]["generated_at"]
    assert stamp.endswith("Z")
    parsed = datetime.strptime(stamp, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    assert abs(datetime.now(timezone.utc) - parsed) < timedelta(minutes=5)


def test_difference_interval_matches_hybrid_score_reference():
    diff, lo, hi = difference_interval(56, 70, 48, 80)
    assert diff == pytest.approx(0.2)
    assert lo == pytest.approx(0.0524, abs=1e-3)
    assert hi == pytest.approx(0.3339, abs=1e-3)


def test_paired_difference_interval():
    diff, lo, hi = paired_difference_interval(8, 0, 1000)
    assert diff == pytest.approx(0.008)
    assert lo == pytest.approx(0.0028095, rel=1e-4)
    assert hi == pytest.approx(0.008)
    # three discordant trials are not enough to exclude zero
    assert paired_difference_interval(3, 0, 1000)[1] < 0
    assert paired_difference_interval(0, 0, 1000) == (0.0, 0.0, 0.0)


def test_outage_deployments_are_recorded_by_index():
    acc = _accumulator()
    acc.add(np.array([0.5, 2.0]), np.ones(2), "d0", index=10)
    acc.add(np.array([2.0, 3.0]), np.ones(2), "d1", index=11)
    acc.add(np.array([0.1, 0.2]), np.ones(2), "d2", index=12)
    report = acc.finalize()
    assert report.outage_deployments == (10, 12)
    assert report.device_hits == 3
    assert report.system_outage == pytest.approx(2 / 3)

    restored = OutageReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert restored.outage_deployments == (10, 12)
    assert restored.device_hits == 3


def _cell(rows, strategy, digests=None):
    acc = OutageAccumulator(2, 1, "mr", strategy, gamma_threshold=1.0,
                            reservoir_size=10, reservoir_seed=0)
    for i, gamma in enumerate(rows):
        acc.add(np.asarray(gamma, dtype=float), np.ones(2), (digests or "x" * len(rows))[i])
    return acc.finalize()


def test_system_outage_difference_is_paired_within_a_cell():
    equal_rows = [[0.5, 2.0]] * 5 + [[2.0, 2.0]] * 995
    fair_rows = [[1.5, 1.5]] * 5 + [[2.0, 2.0]] * 995
    equal, fair = _cell(equal_rows, "equal"), _cell(fair_rows, "maxmin")
    assert equal.deployment_digest == fair.deployment_digest

    diff, lo, hi = system_outage_difference(equal, fair)
    assert diff == pytest.approx(0.005)
    assert lo > 0
    # the marginal Wilson intervals of the two cells still overlap
    assert equal.system_ci[0] <= fair.system_ci[1]


def test_outage_difference_across_cells_is_unpaired():
    one = _cell([[0.5, 2.0]] * 30 + [[2.0, 2.0]] * 70, "equal", "a" * 100)
    two = _cell([[0.5, 2.0]] * 10 + [[2.0, 2.0]] * 90, "equal", "b" * 100)
    diff, lo, hi = system_outage_difference(one, two)
    assert (diff, lo, hi) == pytest.approx(difference_interval(30, 100, 10, 100))
    assert lo > 0

    diff, lo, hi = device_outage_difference(one, two)
    assert diff == pytest.approx(0.1)
    assert (lo, hi) == pytest.approx(difference_interval(30, 200, 10, 200)[1:])
