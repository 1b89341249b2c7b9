"""Loss-fraction time series from field voltage sensors.

Pole-mounted sensors report a voltage magnitude every couple of minutes.
Pairs of sensors along a feeder are aligned onto a common time grid,
median-smoothed, and fed to the magnitude-only estimator, giving a
fractional loss curve for each sensed span.  A constant transformer
turns ratio between sensor and conductor cancels in the voltage ratio,
so readings are used as reported; explicit per-sensor calibration
factors are available for known ratio offsets, but there is no implicit
normalization (that would erase the very drop being measured).

Scaling both series of a pair by the same factor leaves the curve
unchanged; for power-of-two factors the output is bit-identical, since
every step (calibration, median, ratio) then commutes exactly with the
scaling.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from .estimator import (
    CorrectionParams,
    EstimateFlag,
    SegmentVoltages,
    voss_corrected,
    voss_single,
)
from .ioutil import format_float, write_csv

CSV_HEADER = ["sensor_id", "timestamp", "voltage_v"]
CURVE_HEADER = ["timestamp", "loss_fraction", "flags"]

GRID_STEP_S = 120.0
PAIR_TOLERANCE_S = 60.0
SMOOTHING_WINDOW_S = 600.0

# Samples below this fraction of nominal voltage are outage readings,
# not grid state; they are flagged and kept out of the loss curve.
POWER_SUSPECT_FRACTION = 0.5

FLAG_GAP = "Gap"
FLAG_POWER_SUSPECT = "PowerStateSuspect"
FLAG_NEGATIVE_DROP = EstimateFlag.NEGATIVE_DROP.value
FLAG_CORRECTION_RANGE = EstimateFlag.CORRECTION_OUT_OF_RANGE.value


class SensorFormatError(ValueError):
    """Malformed sensor CSV or chain configuration."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class VoltageSeries:
    """Sorted voltage-magnitude samples from one sensor.

    samples holds (UTC timestamp, volts) pairs with strictly increasing
    timestamps; gaps are simply missing entries.  calibration multiplies
    readings before any use and defaults to 1.
    """

    sensor_id: str
    samples: tuple
    nominal_voltage: float = 230.0
    calibration: float = 1.0
    duplicates_dropped: int = 0

    def __post_init__(self) -> None:
        if not self.sensor_id:
            raise ValueError("sensor_id must be nonempty")
        if not (self.nominal_voltage > 0.0):
            raise ValueError(f"nominal_voltage must be > 0, got {self.nominal_voltage}")
        if not (self.calibration > 0.0):
            raise ValueError(f"calibration must be > 0, got {self.calibration}")
        prev = None
        for ts, volts in self.samples:
            if ts.tzinfo is None:
                raise ValueError(f"{self.sensor_id}: naive timestamp {ts}")
            if prev is not None and ts <= prev:
                raise ValueError(
                    f"{self.sensor_id}: timestamps not strictly increasing at {ts}"
                )
            if volts < 0.0 or not math.isfinite(volts):
                raise ValueError(f"{self.sensor_id}: bad voltage {volts} at {ts}")
            prev = ts

    def span(self) -> tuple:
        if not self.samples:
            raise ValueError(f"{self.sensor_id}: empty series")
        return self.samples[0][0], self.samples[-1][0]


@dataclass(frozen=True)
class SensorChain:
    """Sensors in feeder order with a power-ratio estimate per span.

    rho_s has one entry per adjacent pair.  None means no engineering
    estimate is available and that span uses the raw uncorrected
    estimate.
    """

    sensor_ids: tuple
    rho_s: tuple = ()

    def __post_init__(self) -> None:
        if len(self.sensor_ids) < 2:
            raise ValueError("a chain needs at least two sensors")
        if len(set(self.sensor_ids)) != len(self.sensor_ids):
            raise ValueError("duplicate sensor ids in chain")
        if not self.rho_s:
            object.__setattr__(self, "rho_s", (None,) * (len(self.sensor_ids) - 1))
        if len(self.rho_s) != len(self.sensor_ids) - 1:
            raise ValueError(
                f"need {len(self.sensor_ids) - 1} rho_s entries "
                f"(one per adjacent pair), got {len(self.rho_s)}"
            )
        for value in self.rho_s:
            if value is not None and not (0.0 <= value <= 1.0):
                raise ValueError(f"rho_s must lie in [0, 1], got {value}")

    def pairs(self) -> list:
        """(upstream, downstream, rho_s) per adjacent pair, feeder order."""
        return [
            (self.sensor_ids[i], self.sensor_ids[i + 1], self.rho_s[i])
            for i in range(len(self.sensor_ids) - 1)
        ]


@dataclass(frozen=True)
class AlignedPoint:
    """One grid timestamp with the nearest sample from each series.

    A None side means no sample landed within tolerance: a gap.  Values
    are never interpolated across gaps.
    """

    timestamp: datetime
    v_a: Optional[float]
    v_b: Optional[float]


@dataclass(frozen=True)
class CurvePoint:
    timestamp: datetime
    loss_fraction: float  # nan when the point is a gap or outage-suspect
    flags: tuple = ()


@dataclass(frozen=True)
class LossCurve:
    """Loss-fraction estimates for one sensed span on the aligned grid."""

    upstream: str
    downstream: str
    points: tuple
    window_s: float
    grid_step_s: float
    tolerance_s: float
    rho_s: Optional[float] = None


def _parse_timestamp(text: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise SensorFormatError(f"bad timestamp {text!r}: {exc}", line=line_no) from None
    if ts.tzinfo is None:
        # bare timestamps are taken as UTC
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def ingest_csv(path, nominal_voltage: float = 230.0, calibration=None) -> list:
    """Read sensor_id,timestamp,voltage_v rows into per-sensor series.

    Rows may arrive in any order; each series comes back sorted.  A
    repeated timestamp within one sensor keeps the first reading seen in
    the file and counts the rest in duplicates_dropped.  Any malformed
    row fails with its line number.  Returns series sorted by sensor id.
    """
    calibration = calibration or {}
    per_sensor: Dict[str, dict] = {}
    dropped: Dict[str, int] = {}
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SensorFormatError("empty file, expected header", line=1) from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise SensorFormatError(
                f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}",
                line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SensorFormatError(
                    f"expected 3 fields, got {len(row)}", line=line_no
                )
            sensor_id = row[0].strip()
            if not sensor_id:
                raise SensorFormatError("empty sensor_id", line=line_no)
            ts = _parse_timestamp(row[1], line_no)
            try:
                volts = float(row[2])
            except ValueError:
                raise SensorFormatError(
                    f"bad voltage {row[2]!r}", line=line_no
                ) from None
            if volts < 0.0 or not math.isfinite(volts):
                raise SensorFormatError(
                    f"voltage must be finite and >= 0, got {row[2]}", line=line_no
                )
            bucket = per_sensor.setdefault(sensor_id, {})
            if ts in bucket:
                dropped[sensor_id] = dropped.get(sensor_id, 0) + 1
            else:
                bucket[ts] = volts
    return [
        VoltageSeries(
            sensor_id=sensor_id,
            samples=tuple(sorted(per_sensor[sensor_id].items())),
            nominal_voltage=nominal_voltage,
            calibration=calibration.get(sensor_id, 1.0),
            duplicates_dropped=dropped.get(sensor_id, 0),
        )
        for sensor_id in sorted(per_sensor)
    ]


def _nearest(epochs: Sequence, values: Sequence, t: float, tol: float):
    """Value of the sample nearest t within tol; ties go to the earlier one."""
    idx = bisect_left(epochs, t)
    best_v = None
    best_dt = math.inf
    for j in (idx - 1, idx):
        if 0 <= j < len(epochs):
            dt = abs(epochs[j] - t)
            if dt < best_dt:
                best_v, best_dt = values[j], dt
    return best_v if best_dt <= tol else None


def _grid(start: float, end: float, step: float) -> list:
    # Grid points sit at absolute multiples of the step (UTC epoch), so
    # runs over different but overlapping files share timestamps.
    k0 = math.ceil(start / step - 1e-9)
    k1 = math.floor(end / step + 1e-9)
    return [k * step for k in range(k0, k1 + 1)]


def align(
    series_a: VoltageSeries,
    series_b: VoltageSeries,
    grid_step_s: float = GRID_STEP_S,
    tolerance_s: float = PAIR_TOLERANCE_S,
) -> list:
    """Pair two series onto a shared time grid.

    The grid spans the overlap of the two series.  Each point takes the
    nearest stored sample within tolerance_s from each side; a side with
    none stays None (a gap).  Raises when the series do not overlap or
    the overlap contains no grid point.
    """
    if not series_a.samples or not series_b.samples:
        raise ValueError("align needs two nonempty series")
    a0, a1 = series_a.span()
    b0, b1 = series_b.span()
    start = max(a0.timestamp(), b0.timestamp())
    end = min(a1.timestamp(), b1.timestamp())
    if start > end:
        raise ValueError(
            f"series {series_a.sensor_id!r} and {series_b.sensor_id!r} do not overlap"
        )
    grid = _grid(start, end, grid_step_s)
    if not grid:
        raise ValueError(
            f"overlap of {series_a.sensor_id!r} and {series_b.sensor_id!r} "
            f"contains no grid point at step {grid_step_s} s"
        )
    ea = [ts.timestamp() for ts, _ in series_a.samples]
    va = [v for _, v in series_a.samples]
    eb = [ts.timestamp() for ts, _ in series_b.samples]
    vb = [v for _, v in series_b.samples]
    return [
        AlignedPoint(
            timestamp=datetime.fromtimestamp(t, tz=timezone.utc),
            v_a=_nearest(ea, va, t, tolerance_s),
            v_b=_nearest(eb, vb, t, tolerance_s),
        )
        for t in grid
    ]


def rolling_median(samples: Sequence, window_s: float = SMOOTHING_WINDOW_S) -> list:
    """Centered time-windowed median, one output per (epoch_s, value) input.

    The value at time t is the median of all samples within window_s/2
    of t (inclusive), so a window shorter than the sampling interval is
    the identity.  Median rather than mean keeps single-sample telemetry
    glitches out of the curve.
    """
    out = []
    lo = 0
    hi = 0
    n = len(samples)
    half = window_s / 2.0
    for i in range(n):
        t = samples[i][0]
        while lo < n and samples[lo][0] < t - half:
            lo += 1
        if hi < i + 1:
            hi = i + 1
        while hi < n and samples[hi][0] <= t + half:
            hi += 1
        out.append(statistics.median(v for _, v in samples[lo:hi]))
    return out


def _split_suspect(series: VoltageSeries) -> tuple:
    """(clean calibrated samples, suspect epoch list) for one series."""
    cutoff = POWER_SUSPECT_FRACTION * series.nominal_voltage
    clean = []
    suspect = []
    for ts, volts in series.samples:
        if volts < cutoff:
            suspect.append(ts.timestamp())
        else:
            clean.append((ts, volts * series.calibration))
    return clean, suspect


def _has_within(epochs: Sequence, t: float, tol: float) -> bool:
    idx = bisect_left(epochs, t)
    for j in (idx - 1, idx):
        if 0 <= j < len(epochs) and abs(epochs[j] - t) <= tol:
            return True
    return False


def _pair_curve(
    up: VoltageSeries,
    down: VoltageSeries,
    rho_s: Optional[float],
    window_s: float,
    grid_step_s: float,
    tolerance_s: float,
) -> LossCurve:
    clean_up, sus_up = _split_suspect(up)
    clean_down, sus_down = _split_suspect(down)
    if not clean_up or not clean_down:
        raise ValueError(
            f"no usable samples for pair {up.sensor_id!r}->{down.sensor_id!r}"
        )
    sm_up = rolling_median([(ts.timestamp(), v) for ts, v in clean_up], window_s)
    sm_down = rolling_median([(ts.timestamp(), v) for ts, v in clean_down], window_s)
    smoothed_up = replace(
        up, samples=tuple((ts, m) for (ts, _), m in zip(clean_up, sm_up))
    )
    smoothed_down = replace(
        down, samples=tuple((ts, m) for (ts, _), m in zip(clean_down, sm_down))
    )
    points = []
    for pt in align(smoothed_up, smoothed_down, grid_step_s, tolerance_s):
        flags = []
        if pt.v_a is None or pt.v_b is None:
            flags.append(FLAG_GAP)
            t = pt.timestamp.timestamp()
            if _has_within(sus_up, t, tolerance_s) or _has_within(
                sus_down, t, tolerance_s
            ):
                flags.append(FLAG_POWER_SUSPECT)
            points.append(CurvePoint(pt.timestamp, math.nan, tuple(flags)))
            continue
        seg = SegmentVoltages(v_start=pt.v_a, v_end=pt.v_b)
        if rho_s is None:
            value = voss_single(seg)
            if value < 0.0:
                flags.append(FLAG_NEGATIVE_DROP)
        else:
            est = voss_corrected(
                seg, CorrectionParams(rho_s=rho_s, rho_v=pt.v_b / pt.v_a)
            )
            value = est.loss_fraction
            if est.has_flag(EstimateFlag.NEGATIVE_DROP):
                flags.append(FLAG_NEGATIVE_DROP)
            if est.has_flag(EstimateFlag.CORRECTION_OUT_OF_RANGE):
                flags.append(FLAG_CORRECTION_RANGE)
        points.append(CurvePoint(pt.timestamp, value, tuple(flags)))
    return LossCurve(
        upstream=up.sensor_id,
        downstream=down.sensor_id,
        points=tuple(points),
        window_s=window_s,
        grid_step_s=grid_step_s,
        tolerance_s=tolerance_s,
        rho_s=rho_s,
    )


def loss_curve(
    chain: SensorChain,
    series: dict,
    window_s: float = SMOOTHING_WINDOW_S,
    grid_step_s: float = GRID_STEP_S,
    tolerance_s: float = PAIR_TOLERANCE_S,
) -> list:
    """One LossCurve per adjacent sensor pair of the chain.

    Per pair: outage-suspect samples (below POWER_SUSPECT_FRACTION of
    nominal) are set aside, the remaining calibrated magnitudes are
    median-smoothed and aligned, and each paired grid point yields one
    estimate (corrected when the pair has a rho_s, raw otherwise).
    Grid points lost to an outage reading carry PowerStateSuspect;
    unpaired points carry Gap; negative drops are reported and flagged,
    never clamped.
    """
    missing = [sid for sid in chain.sensor_ids if sid not in series]
    if missing:
        raise ValueError(f"sensors missing from series map: {missing}")
    return [
        _pair_curve(series[up], series[dn], rho_s, window_s, grid_step_s, tolerance_s)
        for up, dn, rho_s in chain.pairs()
    ]


def _format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def curve_filename(curve: LossCurve) -> str:
    return f"loss_curve_{curve.upstream}_{curve.downstream}.csv"


def write_loss_curve_csv(curve: LossCurve, out_dir) -> Path:
    """One row per grid point: timestamp,loss_fraction,flags (';'-joined)."""
    path = Path(out_dir) / curve_filename(curve)
    write_csv(
        path,
        CURVE_HEADER,
        [
            (
                _format_timestamp(p.timestamp),
                format_float(p.loss_fraction),
                ";".join(p.flags),
            )
            for p in curve.points
        ],
    )
    return path


CHAIN_KEYS = {
    "sensors",
    "pairs",
    "nominal_voltage_v",
    "calibration",
    "grid_step_s",
    "tolerance_s",
    "smoothing_window_s",
}


@dataclass(frozen=True)
class ChainConfig:
    """Parsed chain configuration: who to pair and with what settings."""

    chain: SensorChain
    nominal_voltage_v: float = 230.0
    calibration: dict = field(default_factory=dict)
    grid_step_s: float = GRID_STEP_S
    tolerance_s: float = PAIR_TOLERANCE_S
    smoothing_window_s: float = SMOOTHING_WINDOW_S


def _positive_number(data: dict, key: str, default: float, context: str) -> float:
    value = data.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise SensorFormatError(f"{context}: {key!r} must be a positive number")
    return float(value)


def parse_chain_config(path) -> ChainConfig:
    """Read a JSON chain config (schema in docs/sensor_chain_schema.md)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SensorFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    context = str(path)
    if not isinstance(data, dict):
        raise SensorFormatError(f"{context}: top level must be an object")
    unknown = sorted(set(data) - CHAIN_KEYS)
    if unknown:
        raise SensorFormatError(f"{context}: unknown keys {unknown}")
    sensors = data.get("sensors")
    if (
        not isinstance(sensors, list)
        or not sensors
        or not all(isinstance(s, str) and s for s in sensors)
    ):
        raise SensorFormatError(
            f"{context}: 'sensors' must be a nonempty list of sensor ids"
        )
    adjacent = {
        (sensors[i], sensors[i + 1]): i for i in range(max(len(sensors) - 1, 0))
    }
    rho_s: list = [None] * max(len(sensors) - 1, 0)
    pairs = data.get("pairs", [])
    if not isinstance(pairs, list):
        raise SensorFormatError(f"{context}: 'pairs' must be a list")
    seen = set()
    for entry in pairs:
        if not isinstance(entry, dict) or set(entry) - {
            "upstream",
            "downstream",
            "rho_s",
        }:
            raise SensorFormatError(
                f"{context}: each pair needs keys upstream, downstream, rho_s"
            )
        key = (entry.get("upstream"), entry.get("downstream"))
        if key not in adjacent:
            raise SensorFormatError(
                f"{context}: pair {key[0]!r}->{key[1]!r} is not an adjacent "
                f"pair of the sensor list"
            )
        if key in seen:
            raise SensorFormatError(
                f"{context}: duplicate pair entry {key[0]!r}->{key[1]!r}"
            )
        seen.add(key)
        value = entry.get("rho_s")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SensorFormatError(
                f"{context}: rho_s for {key[0]!r}->{key[1]!r} must be a number"
            )
        rho_s[adjacent[key]] = float(value)
    calibration = data.get("calibration", {})
    if not isinstance(calibration, dict):
        raise SensorFormatError(f"{context}: 'calibration' must be an object")
    for sid, factor in calibration.items():
        if sid not in sensors:
            raise SensorFormatError(
                f"{context}: calibration for unknown sensor {sid!r}"
            )
        if (
            not isinstance(factor, (int, float))
            or isinstance(factor, bool)
            or factor <= 0
        ):
            raise SensorFormatError(
                f"{context}: calibration for {sid!r} must be a positive number"
            )
    try:
        chain = SensorChain(tuple(sensors), tuple(rho_s))
    except ValueError as exc:
        raise SensorFormatError(f"{context}: {exc}") from None
    return ChainConfig(
        chain=chain,
        nominal_voltage_v=_positive_number(data, "nominal_voltage_v", 230.0, context),
        calibration={sid: float(f) for sid, f in calibration.items()},
        grid_step_s=_positive_number(data, "grid_step_s", GRID_STEP_S, context),
        tolerance_s=_positive_number(data, "tolerance_s", PAIR_TOLERANCE_S, context),
        smoothing_window_s=_positive_number(
            data, "smoothing_window_s", SMOOTHING_WINDOW_S, context
        ),
    )
