"""Residual tables shared by the candidate and verification checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ResidualTable:
    """Per-sample residuals of a set of named checks."""

    name: str
    columns: list[str]
    tol: float
    points: list[tuple[float, float]] = field(default_factory=list)
    values: list[list[float]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    symbolic_zero: dict[str, bool] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, point, vals) -> None:
        self.points.append((float(point.x1), float(point.x2)))
        self.values.append([float(v) for v in vals])

    def column_max(self) -> dict[str, float]:
        out = {}
        for k, col in enumerate(self.columns):
            vs = [abs(row[k]) for row in self.values]
            out[col] = max(vs) if vs else math.nan
        return out

    @property
    def max(self) -> float:
        vals = [abs(v) for row in self.values for v in row]
        return max(vals) if vals else math.nan

    @property
    def verified(self) -> bool:
        if not self.values:
            return False
        m = self.max
        return math.isfinite(m) and m < self.tol

    def summary(self) -> dict:
        return {
            "check": self.name,
            "verified": self.verified,
            "tolerance": self.tol,
            "max_residual": self.max,
            "column_max": self.column_max(),
            "samples": len(self.values),
            "skipped": len(self.warnings),
        }
