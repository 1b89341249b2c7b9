"""Per-line and per-path comparison of voltage-only loss estimates
against simulated true losses on a solved feeder.

The studies solve the feeder with distributed loads split half-and-half
onto their segment end nodes (the convention of the reference
distribution simulators), which keeps every line internally tap-free.
On a tap-free line the per-phase true loss fraction equals the phasor
voltage-drop fraction exactly, so the single-segment study's errors are
governed purely by the small-angle bound.

Multi-segment paths apply the correction factor built from the power
ratio rho_s (simulated by default, or a supplied engineering estimate)
and the voltage ratio rho_v.  The implied leaked-current fraction is
clamped into [0, 1] before evaluating the correction: angle effects on
extraction-free paths land it epsilon-negative, and the clamp turns
those into an exact factor of 1 instead of a factor slightly above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .estimator import (
    EstimateFlag,
    clamp_rho,
    correction_factor,
    rho_from_ratios,
    small_angle_error_bound,
)
from .feeder import FeederModel, SegmentKind, split_distributed_loads_to_ends
from .ioutil import format_float, write_csv
from .powerflow import (
    NEAR_ZERO_POWER_FRACTION,
    PowerFlowSolution,
    SolveOptions,
    path_segment_ids,
    solve,
    true_loss_fractions,
)

REASON_NEAR_ZERO = "NearZeroPower"
REASON_NEGATIVE_DROP = "NegativeDrop"

COMPARISON_HEADER = [
    "feeder",
    "line_or_path",
    "phase",
    "voss_single",
    "c_hat",
    "voss_corrected",
    "true_loss",
    "abs_error",
    "angle_bound",
    "rho_s",
    "rho_v",
    "excluded",
    "reason",
]


@dataclass(frozen=True)
class RhoSource:
    """Where the power ratio rho_s for a path comes from."""

    kind: str  # "simulated" | "estimate"
    value: Optional[float] = None

    @staticmethod
    def simulated() -> "RhoSource":
        return RhoSource("simulated")

    @staticmethod
    def estimate(value: float) -> "RhoSource":
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"rho_s estimate must be in [0, 1], got {value}")
        return RhoSource("estimate", value)

    @staticmethod
    def parse(text: str) -> "RhoSource":
        if text == "simulated":
            return RhoSource.simulated()
        if text.startswith("estimate:"):
            return RhoSource.estimate(float(text.split(":", 1)[1]))
        raise ValueError(
            f"unknown rho_s source {text!r} (use 'simulated' or 'estimate:<value>')"
        )


@dataclass(frozen=True)
class ComparisonRow:
    feeder: str
    line_or_path: str
    phase: str
    voss_single: float
    c_hat: float
    voss_corrected: float
    true_loss: float
    abs_error: float
    angle_bound: float
    rho_s: float
    rho_v: float
    excluded: bool
    reason: str = ""


def _row_reason(excluded: bool, voss: float) -> str:
    # A rising endpoint voltage (capacitor support, light phase) makes the
    # single-reading estimate negative; the small-angle error bound is only
    # valid for non-rising pairs, so such rows carry an annotation.
    if excluded:
        return REASON_NEAR_ZERO
    if voss < 0.0:
        return REASON_NEGATIVE_DROP
    return ""


def _corrected(voss: float, rho_s: float, rho_v: float) -> tuple:
    """(c_hat, corrected estimate) with the leak fraction clamped to [0, 1]."""
    rho = clamp_rho(rho_from_ratios(rho_s, rho_v))
    c_hat = correction_factor(rho)
    return c_hat, c_hat * voss


def _solved(model: FeederModel, options: SolveOptions) -> PowerFlowSolution:
    return solve(split_distributed_loads_to_ends(model), options)


def run_single_segment_study(
    model: FeederModel,
    options: SolveOptions = SolveOptions(),
    near_zero_fraction: float = NEAR_ZERO_POWER_FRACTION,
    solution: Optional[PowerFlowSolution] = None,
) -> list:
    """One ComparisonRow per phase of every line segment.

    Rows whose phase carries input power below the near-zero threshold
    are marked excluded; their loss columns are reported (NaN when the
    input power is exactly zero) but carry no meaning.
    """
    sol = solution if solution is not None else _solved(model, options)
    rows = []
    for seg in model.segments:
        if seg.kind != SegmentKind.LINE:
            continue
        flow = sol.segment_flows[seg.id]
        for k, ph in enumerate(seg.phases):
            v1, v2 = flow.v_from[k], flow.v_to[k]
            voss = 1.0 - abs(v2) / abs(v1)
            rho_v = abs(v2) / abs(v1)
            bound = small_angle_error_bound(v1, v2)
            est = true_loss_fractions(sol, [seg.id], ph, near_zero_fraction)
            excluded = est.has_flag(EstimateFlag.NEAR_ZERO_POWER)
            s_in = flow.s_from[k]
            s_out = flow.s_to[k]
            if excluded and s_in.real == 0.0:
                rho_s = math.nan
                c_hat = math.nan
                corrected = math.nan
            else:
                rho_s = s_out.real / s_in.real
                c_hat, corrected = _corrected(voss, max(rho_s, 0.0), rho_v)
            abs_error = (
                math.nan if excluded else abs(corrected - est.loss_fraction)
            )
            rows.append(
                ComparisonRow(
                    feeder=model.name,
                    line_or_path=seg.id,
                    phase=ph,
                    voss_single=voss,
                    c_hat=c_hat,
                    voss_corrected=corrected,
                    true_loss=est.loss_fraction,
                    abs_error=abs_error,
                    angle_bound=bound,
                    rho_s=rho_s,
                    rho_v=rho_v,
                    excluded=excluded,
                    reason=_row_reason(excluded, voss),
                )
            )
    return rows


def run_multi_segment_study(
    model: FeederModel,
    paths: Sequence,
    rho_source: RhoSource = RhoSource("simulated"),
    options: SolveOptions = SolveOptions(),
    near_zero_fraction: float = NEAR_ZERO_POWER_FRACTION,
    solution: Optional[PowerFlowSolution] = None,
) -> list:
    """ComparisonRows for downstream node-pair paths (head, tail).

    Endpoint voltage magnitudes give the uncorrected estimate; rho_s per
    the source choice and rho_v from the same endpoints give the
    correction.  True loss counts only series dissipation on the path,
    not power delivered to intermediate taps.
    """
    sol = solution if solution is not None else _solved(model, options)
    rows = []
    for head, tail in paths:
        seg_ids = path_segment_ids(model, head, tail)
        segs = [model.segment(sid) for sid in seg_ids]
        shared = [p for p in "ABC" if all(p in s.phases for s in segs)]
        if not shared:
            raise ValueError(f"path {head}-{tail} has no common phase")
        for ph in shared:
            v1 = sol.voltage(head, ph)
            v2 = sol.voltage(tail, ph)
            voss = 1.0 - abs(v2) / abs(v1)
            rho_v = abs(v2) / abs(v1)
            est = true_loss_fractions(sol, seg_ids, ph, near_zero_fraction)
            excluded = est.has_flag(EstimateFlag.NEAR_ZERO_POWER)
            if rho_source.kind == "estimate":
                rho_s = rho_source.value
            else:
                first = sol.segment_flows[seg_ids[0]]
                last = sol.segment_flows[seg_ids[-1]]
                p_in = first.s_from[segs[0].phases.index(ph)].real
                p_out = last.s_to[segs[-1].phases.index(ph)].real
                rho_s = math.nan if p_in == 0.0 else p_out / p_in
            if math.isnan(rho_s):
                c_hat = math.nan
                corrected = math.nan
            else:
                c_hat, corrected = _corrected(voss, max(rho_s, 0.0), rho_v)
            abs_error = (
                math.nan if excluded else abs(corrected - est.loss_fraction)
            )
            rows.append(
                ComparisonRow(
                    feeder=model.name,
                    line_or_path=f"{head}-{tail}",
                    phase=ph,
                    voss_single=voss,
                    c_hat=c_hat,
                    voss_corrected=corrected,
                    true_loss=est.loss_fraction,
                    abs_error=abs_error,
                    angle_bound=small_angle_error_bound(v1, v2),
                    rho_s=rho_s,
                    rho_v=rho_v,
                    excluded=excluded,
                    reason=_row_reason(excluded, voss),
                )
            )
    return rows


def excluded_lines(rows: Sequence) -> list:
    """Lines whose every phase row is excluded (the "~0 input power" set)."""
    by_line: dict = {}
    for row in rows:
        by_line.setdefault(row.line_or_path, []).append(row.excluded)
    return sorted(k for k, v in by_line.items() if all(v))


def write_comparison_csv(rows: Sequence, path) -> None:
    out = []
    for r in rows:
        out.append(
            [
                r.feeder,
                r.line_or_path,
                r.phase,
                format_float(r.voss_single),
                format_float(r.c_hat),
                format_float(r.voss_corrected),
                format_float(r.true_loss),
                format_float(r.abs_error),
                format_float(r.angle_bound),
                format_float(r.rho_s),
                format_float(r.rho_v),
                "true" if r.excluded else "false",
                r.reason,
            ]
        )
    write_csv(path, COMPARISON_HEADER, out)


def write_plot_long_csv(rows: Sequence, path) -> None:
    """Long-format series for external plotting tools."""
    out = []
    for r in rows:
        for series, value in (
            ("voss_single", r.voss_single),
            ("voss_corrected", r.voss_corrected),
            ("true_loss", r.true_loss),
        ):
            out.append(
                [
                    r.feeder,
                    r.line_or_path,
                    r.phase,
                    series,
                    format_float(value),
                    "true" if r.excluded else "false",
                ]
            )
    write_csv(
        path,
        ["feeder", "line_or_path", "phase", "series", "value", "excluded"],
        out,
    )
