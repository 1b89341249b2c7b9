"""Small shared helpers for deterministic CSV output."""

from __future__ import annotations

import csv


def format_float(x: float) -> str:
    """Shortest round-trippable-ish decimal form, stable across runs."""
    return format(x, ".12g")


def write_csv(path, header, rows) -> None:
    """Write rows of already-stringified cells with a fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
