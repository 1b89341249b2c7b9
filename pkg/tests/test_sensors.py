"""Field-data pipeline: CSV ingest, alignment, smoothing, loss curves."""

import json
import math
from collections import Counter
from datetime import datetime, timedelta, timezone

import pytest

from voss.estimator import CorrectionParams, SegmentVoltages, voss_corrected
from voss.feeder import bundled_feeder_path
from voss.sensors import (
    FLAG_CORRECTION_RANGE,
    FLAG_GAP,
    FLAG_NEGATIVE_DROP,
    FLAG_POWER_SUSPECT,
    CurvePoint,
    LossCurve,
    SensorChain,
    SensorFormatError,
    VoltageSeries,
    align,
    curve_filename,
    ingest_csv,
    loss_curve,
    parse_chain_config,
    rolling_median,
    write_loss_curve_csv,
)

UTC = timezone.utc
T0 = datetime(2024, 3, 12, 0, 0, tzinfo=UTC)  # epoch is a multiple of 120 s


def series(sensor_id, values, start=T0, step_s=120.0, **kwargs):
    samples = tuple(
        (start + timedelta(seconds=i * step_s), float(v))
        for i, v in enumerate(values)
        if v is not None
    )
    return VoltageSeries(sensor_id, samples, **kwargs)


def write_readings(path, rows):
    lines = ["sensor_id,timestamp,voltage_v"]
    lines += [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- ingest


def test_ingest_groups_and_sorts_regardless_of_row_order(tmp_path):
    rows = [
        ("s2", "2024-03-12T00:04:00Z", 229.0),
        ("s1", "2024-03-12T00:02:00Z", 231.5),
        ("s2", "2024-03-12T00:00:00Z", 230.0),
        ("s1", "2024-03-12T00:00:00Z", 232.0),
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_readings(a, rows)
    write_readings(b, rows[::-1])
    got = ingest_csv(a)
    assert [s.sensor_id for s in got] == ["s1", "s2"]
    assert [v for _, v in got[0].samples] == [232.0, 231.5]
    assert all(ts.tzinfo is not None for s in got for ts, _ in s.samples)
    assert got == ingest_csv(b)


def test_ingest_keeps_first_reading_on_duplicate_timestamp(tmp_path):
    path = tmp_path / "dup.csv"
    write_readings(
        path,
        [
            ("s1", "2024-03-12T00:00:00Z", 230.0),
            ("s1", "2024-03-12T00:00:00Z", 999.0),
            ("s1", "2024-03-12T00:02:00Z", 231.0),
        ],
    )
    (got,) = ingest_csv(path)
    assert [v for _, v in got.samples] == [230.0, 231.0]
    assert got.duplicates_dropped == 1


def test_ingest_applies_nominal_and_calibration(tmp_path):
    path = tmp_path / "cal.csv"
    write_readings(path, [("s1", "2024-03-12T00:00:00Z", 230.0)])
    (got,) = ingest_csv(path, nominal_voltage=240.0, calibration={"s1": 1.02})
    assert got.nominal_voltage == 240.0
    assert got.calibration == 1.02


def test_naive_timestamps_are_read_as_utc(tmp_path):
    path = tmp_path / "naive.csv"
    write_readings(path, [("s1", "2024-03-12T00:00:00", 230.0)])
    (got,) = ingest_csv(path)
    assert got.samples[0][0] == T0


@pytest.mark.parametrize(
    "text,line,needle",
    [
        ("", 1, "empty file"),
        ("id,time,volts\ns1,2024-03-12T00:00:00Z,230\n", 1, "expected header"),
        ("sensor_id,timestamp,voltage_v\ns1,2024-03-12T00:00:00Z\n", 2, "3 fields"),
        (
            "sensor_id,timestamp,voltage_v\ns1,2024-03-12T00:00:00Z,230\n"
            "s1,not-a-time,230\n",
            3,
            "timestamp",
        ),
        ("sensor_id,timestamp,voltage_v\ns1,2024-03-12T00:00:00Z,volts\n", 2, "voltage"),
        ("sensor_id,timestamp,voltage_v\ns1,2024-03-12T00:00:00Z,-4\n", 2, ">= 0"),
        ("sensor_id,timestamp,voltage_v\n,2024-03-12T00:00:00Z,230\n", 2, "sensor_id"),
    ],
)
def test_ingest_failures_carry_line_numbers(tmp_path, text, line, needle):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(SensorFormatError) as err:
        ingest_csv(path)
    assert err.value.line == line
    assert f"line {line}:" in str(err.value)
    assert needle in str(err.value)


# ----------------------------------------------------- series and chains


def test_series_rejects_disordered_or_bad_samples():
    with pytest.raises(ValueError, match="strictly increasing"):
        VoltageSeries("s", ((T0, 230.0), (T0, 231.0)))
    with pytest.raises(ValueError, match="naive"):
        VoltageSeries("s", ((datetime(2024, 3, 12), 230.0),))
    with pytest.raises(ValueError, match="bad voltage"):
        VoltageSeries("s", ((T0, -1.0),))
    with pytest.raises(ValueError, match="nominal_voltage"):
        VoltageSeries("s", (), nominal_voltage=0.0)


def test_chain_defaults_and_validation():
    chain = SensorChain(("a", "b", "c"))
    assert chain.rho_s == (None, None)
    assert chain.pairs() == [("a", "b", None), ("b", "c", None)]
    assert SensorChain(("a", "b"), (0.75,)).pairs() == [("a", "b", 0.75)]
    with pytest.raises(ValueError, match="two sensors"):
        SensorChain(("a",))
    with pytest.raises(ValueError, match="duplicate"):
        SensorChain(("a", "a"))
    with pytest.raises(ValueError, match="rho_s entries"):
        SensorChain(("a", "b", "c"), (0.5,))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        SensorChain(("a", "b"), (1.2,))


# ------------------------------------------------------------- alignment


def test_align_pairs_offset_samples_within_tolerance():
    a = series("a", [230.0, 231.0, 232.0, 233.0])
    b = series("b", [228.0, 229.0, 230.0], start=T0 + timedelta(seconds=30))
    # overlap is [T0+30, T0+270]; grid multiples inside it are 120 and 240
    points = align(a, b)
    assert [p.timestamp for p in points] == [
        T0 + timedelta(seconds=120),
        T0 + timedelta(seconds=240),
    ]
    # each b sample sits 30 s off its nearest grid point, well within 60 s
    assert [p.v_b for p in points] == [229.0, 230.0]
    assert [p.v_a for p in points] == [231.0, 232.0]


def test_align_tie_prefers_earlier_sample():
    a = series("a", [230.0, 230.0, 230.0])
    b = VoltageSeries(
        "b",
        (
            (T0 + timedelta(seconds=60), 201.0),
            (T0 + timedelta(seconds=180), 202.0),
        ),
    )
    points = align(a, b)
    mid = next(p for p in points if p.timestamp == T0 + timedelta(seconds=120))
    assert mid.v_b == 201.0


def test_align_leaves_gaps_beyond_tolerance():
    a = series("a", [230.0] * 5)
    b = VoltageSeries(
        "b",
        ((T0, 228.0), (T0 + timedelta(seconds=480), 229.0)),
    )
    points = align(a, b)
    assert [p.v_b for p in points] == [228.0, None, None, None, 229.0]


def test_align_errors_on_disjoint_or_tiny_overlap():
    a = series("a", [230.0, 230.0])
    late = series("b", [228.0, 228.0], start=T0 + timedelta(hours=2))
    with pytest.raises(ValueError, match="do not overlap"):
        align(a, late)
    shifted = VoltageSeries(
        "a", ((T0 + timedelta(seconds=20), 230.0), (T0 + timedelta(seconds=90), 230.0))
    )
    other = VoltageSeries(
        "b", ((T0 + timedelta(seconds=25), 228.0), (T0 + timedelta(seconds=85), 228.0))
    )
    with pytest.raises(ValueError, match="no grid point"):
        align(shifted, other)


# ------------------------------------------------------------- smoothing


def test_rolling_median_is_identity_below_sampling_interval():
    samples = [(i * 120.0, float(v)) for i, v in enumerate([230, 10, 240, 0, 230])]
    assert rolling_median(samples, window_s=60.0) == [230.0, 10.0, 240.0, 0.0, 230.0]


def test_rolling_median_swallows_single_sample_glitch():
    samples = [(i * 120.0, v) for i, v in enumerate([230.0, 230.0, 400.0, 230.0, 230.0])]
    assert rolling_median(samples, window_s=600.0) == [230.0] * 5


def test_rolling_median_window_is_centered_and_inclusive():
    samples = [(0.0, 1.0), (100.0, 3.0), (200.0, 5.0)]
    # half window 100 s reaches both neighbours exactly
    assert rolling_median(samples, window_s=200.0) == [2.0, 3.0, 4.0]


# ------------------------------------------------------------ loss curves


def chain_curves(up_vals, down_vals, rho_s=None, window_s=60.0, **series_kw):
    chain = SensorChain(("up", "down"), (rho_s,))
    data = {
        "up": series("up", up_vals, **series_kw),
        "down": series("down", down_vals, **series_kw),
    }
    return loss_curve(chain, data, window_s=window_s)


def test_identical_series_give_exactly_zero():
    (curve,) = chain_curves([230.0, 231.0, 229.5], [230.0, 231.0, 229.5])
    assert [p.loss_fraction for p in curve.points] == [0.0, 0.0, 0.0]
    assert all(p.flags == () for p in curve.points)


def test_constant_ratio_matches_hand_arithmetic():
    (curve,) = chain_curves([240.0] * 4, [228.0] * 4)
    for p in curve.points:
        assert abs(p.loss_fraction - 0.05) < 1e-12


def test_known_power_ratio_applies_correction():
    (curve,) = chain_curves([240.0] * 3, [228.0] * 3, rho_s=0.8)
    expected = voss_corrected(
        SegmentVoltages(240.0, 228.0),
        CorrectionParams(rho_s=0.8, rho_v=228.0 / 240.0),
    ).loss_fraction
    assert expected < 1.0 - 228.0 / 240.0
    for p in curve.points:
        assert p.loss_fraction == expected
        assert p.flags == ()


def test_voltage_rise_is_reported_negative_and_flagged():
    (curve,) = chain_curves([228.0] * 3, [240.0] * 3)
    for p in curve.points:
        assert p.loss_fraction < 0.0
        assert FLAG_NEGATIVE_DROP in p.flags


def test_correction_out_of_band_is_flagged():
    # power ratio far above the voltage ratio pushes the estimated leak
    # fraction negative and the correction above 1
    (curve,) = chain_curves([240.0] * 3, [220.0] * 3, rho_s=1.0)
    for p in curve.points:
        assert FLAG_CORRECTION_RANGE in p.flags


def test_dropout_produces_gap_points():
    down = [228.0] * 30 + [None] * 10 + [228.0] * 20
    (curve,) = chain_curves([240.0] * 60, down)
    gaps = [p for p in curve.points if FLAG_GAP in p.flags]
    assert len(gaps) == 10
    assert all(math.isnan(p.loss_fraction) for p in gaps)
    start = T0 + timedelta(seconds=30 * 120)
    assert [p.timestamp for p in gaps] == [
        start + timedelta(seconds=120 * k) for k in range(10)
    ]


def test_outage_reading_is_quarantined_before_smoothing():
    down = [228.0] * 10
    down[4] = 80.0  # below half of nominal 230
    (curve,) = chain_curves([240.0] * 10, down, window_s=600.0)
    flagged = curve.points[4]
    assert set(flagged.flags) == {FLAG_GAP, FLAG_POWER_SUSPECT}
    assert math.isnan(flagged.loss_fraction)
    # neighbours keep the clean ratio: the 80 V reading never enters the median
    for k, p in enumerate(curve.points):
        if k != 4:
            assert abs(p.loss_fraction - 0.05) < 1e-12


def test_scaling_data_and_nominal_by_powers_of_two_is_bit_identical():
    up = [240.0, 239.5, 238.0, 80.0, 241.0, 240.5]
    down = [228.0, 227.0, None, 226.5, 227.5, 228.5]
    base = chain_curves(up, down, rho_s=0.7, nominal_voltage=230.0)[0]
    for alpha in (2.0, 0.25, 1024.0):
        scaled = chain_curves(
            [None if v is None else v * alpha for v in up],
            [None if v is None else v * alpha for v in down],
            rho_s=0.7,
            nominal_voltage=230.0 * alpha,
        )[0]
        for p, q in zip(base.points, scaled.points):
            assert p.flags == q.flags
            if math.isnan(p.loss_fraction):
                assert math.isnan(q.loss_fraction)
            else:
                assert p.loss_fraction == q.loss_fraction


def test_smooth_daily_profile_reproduces_pointwise_ratio():
    ratio = 0.97
    up = [240.0 + 3.0 * math.sin(2 * math.pi * i / 48) for i in range(48)]
    down = [v * ratio for v in up]
    (curve,) = chain_curves(up, down)
    for p in curve.points:
        assert abs(p.loss_fraction - (1.0 - ratio)) < 1e-14


def test_missing_series_error_names_the_sensor():
    chain = SensorChain(("a", "b", "c"))
    data = {"a": series("a", [230.0] * 2), "b": series("b", [230.0] * 2)}
    with pytest.raises(ValueError, match=r"missing from series map: \['c'\]"):
        loss_curve(chain, data)


def test_all_suspect_series_is_an_error():
    with pytest.raises(ValueError, match="no usable samples"):
        chain_curves([240.0] * 3, [10.0, 20.0, 30.0])


# ----------------------------------------------------------- chain config


def good_config():
    return {
        "sensors": ["a", "b", "c"],
        "pairs": [{"upstream": "a", "downstream": "b", "rho_s": 0.8}],
        "nominal_voltage_v": 230.0,
        "calibration": {"b": 1.01},
        "grid_step_s": 120,
        "tolerance_s": 60,
        "smoothing_window_s": 600,
    }


def write_config(tmp_path, doc):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(doc))
    return path


def test_chain_config_round_trip(tmp_path):
    cfg = parse_chain_config(write_config(tmp_path, good_config()))
    assert cfg.chain.sensor_ids == ("a", "b", "c")
    assert cfg.chain.rho_s == (0.8, None)
    assert cfg.calibration == {"b": 1.01}
    assert (cfg.grid_step_s, cfg.tolerance_s, cfg.smoothing_window_s) == (
        120.0,
        60.0,
        600.0,
    )


@pytest.mark.parametrize(
    "edit,needle",
    [
        (lambda d: d.update({"extra": 1}), "unknown keys"),
        (lambda d: d.update({"sensors": []}), "nonempty list"),
        (
            lambda d: d.update({"sensors": ["a"], "pairs": [], "calibration": {}}),
            "two sensors",
        ),
        (
            lambda d: d["pairs"].append(
                {"upstream": "a", "downstream": "c", "rho_s": 0.5}
            ),
            "not an adjacent pair",
        ),
        (
            lambda d: d["pairs"].append(
                {"upstream": "a", "downstream": "b", "rho_s": 0.5}
            ),
            "duplicate pair",
        ),
        (lambda d: d["pairs"][0].update({"rho_s": "high"}), "must be a number"),
        (lambda d: d["pairs"][0].update({"rho_s": 1.4}), r"\[0, 1\]"),
        (lambda d: d.update({"calibration": {"zz": 1.0}}), "unknown sensor"),
        (lambda d: d.update({"calibration": {"a": 0.0}}), "positive"),
        (lambda d: d.update({"grid_step_s": -120}), "positive number"),
        (lambda d: d["pairs"][0].pop("rho_s"), "must be a number"),
        (lambda d: d["pairs"][0].update({"note": "x"}), "needs keys"),
    ],
)
def test_chain_config_rejects_bad_documents(tmp_path, edit, needle):
    doc = good_config()
    edit(doc)
    with pytest.raises(SensorFormatError, match=needle):
        parse_chain_config(write_config(tmp_path, doc))


def test_chain_config_reports_json_location(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text('{\n  "sensors": }\n')
    with pytest.raises(SensorFormatError, match="line 2"):
        parse_chain_config(path)


# -------------------------------------------------------------- curve CSV


def test_curve_csv_golden():
    curve = LossCurve(
        upstream="up",
        downstream="down",
        points=(
            CurvePoint(T0, 0.05, ()),
            CurvePoint(T0 + timedelta(seconds=120), math.nan, (FLAG_GAP,)),
            CurvePoint(
                T0 + timedelta(seconds=240),
                -0.015625,
                (FLAG_NEGATIVE_DROP,),
            ),
        ),
        window_s=600.0,
        grid_step_s=120.0,
        tolerance_s=60.0,
        rho_s=None,
    )
    import tempfile

    with tempfile.TemporaryDirectory() as out:
        path = write_loss_curve_csv(curve, out)
        assert path.name == "loss_curve_up_down.csv"
        assert curve_filename(curve) == path.name
        assert path.read_text() == (
            "timestamp,loss_fraction,flags\n"
            "2024-03-12T00:00:00Z,0.05,\n"
            "2024-03-12T00:02:00Z,nan,Gap\n"
            "2024-03-12T00:04:00Z,-0.015625,NegativeDrop\n"
        )


def test_bundled_sample_day_pipeline():
    cfg = parse_chain_config(bundled_feeder_path("sample_chain.json"))
    got = ingest_csv(
        bundled_feeder_path("sample_day.csv"),
        nominal_voltage=cfg.nominal_voltage_v,
        calibration=cfg.calibration,
    )
    data = {s.sensor_id: s for s in got}
    assert sorted(data) == ["sensor-03", "sensor-17", "sensor-22"]
    assert data["sensor-17"].duplicates_dropped == 1
    curves = loss_curve(
        cfg.chain,
        data,
        window_s=cfg.smoothing_window_s,
        grid_step_s=cfg.grid_step_s,
        tolerance_s=cfg.tolerance_s,
    )
    assert [(c.upstream, c.downstream) for c in curves] == [
        ("sensor-03", "sensor-17"),
        ("sensor-17", "sensor-22"),
    ]
    assert all(len(c.points) == 720 for c in curves)
    first = Counter(f for p in curves[0].points for f in p.flags)
    second = Counter(f for p in curves[1].points for f in p.flags)
    assert first[FLAG_GAP] == 30  # one-hour dropout of the middle sensor
    assert second[FLAG_GAP] == 37
    assert second[FLAG_POWER_SUSPECT] == 7  # evening outage readings
