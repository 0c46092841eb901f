"""
Parameter sweeps over Gaussian CIFC-CCM instances.

A SweepSpec (JSON, validated by pydantic) lists the values of a, b, P1
and P2; the sweep runs over their Cartesian product and, per point,
measures the additive gap between the outer region and the best inner
region and the multiplicative gap between the outer region and the hull
of scheme E with time division.
"""

import csv
import io
import json
import math
import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import get_config, ordered_map
from gaussian_ccm import (
    GaussianChannelParams, best_inner_region, inner_region, outer_region,
    parse_complex, time_division_region,
)
from rate_region import contains, format_number, max_gap, max_ratio, union_hull


logger = logging.getLogger(__name__)

# Complex values are a bare number or an [re, im] pair
ComplexValue = Union[float, List[float]]

SWEEP_COLUMNS = ("a_re", "a_im", "b_re", "b_im", "p1", "p2", "gap_bits", "ratio")


class RegimeMapSpec(BaseModel):
    """Grid of the regime map: a in [0, a_max], b in [0, b_max]."""
    model_config = ConfigDict(extra="forbid")

    a_max: float = Field(default=3.0, gt=0.0)
    b_max: float = Field(default=3.0, gt=0.0)
    cells: int = Field(default=60, ge=2)
    p1: float = Field(default=1.0, ge=0.0)
    p2: float = Field(default=1.0, ge=0.0)


class SweepSpec(BaseModel):
    """Sweep ranges, grid densities, output location and seed."""
    model_config = ConfigDict(extra="forbid")

    a: List[ComplexValue] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 5.0, 10.0], min_length=1)
    b: List[ComplexValue] = Field(default_factory=lambda: [1.1, 1.5, 2.0, 5.0, 10.0], min_length=1)
    p1: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0], min_length=1)
    p2: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0], min_length=1)
    alpha_steps: Optional[int] = Field(default=None, ge=2)
    tau_steps: Optional[int] = Field(default=None, ge=2)
    seed: int = 20110501
    output_dir: Optional[str] = None
    regime_map: RegimeMapSpec = Field(default_factory=RegimeMapSpec)

    @field_validator("a", "b")
    @classmethod
    def validate_complex(cls, values):
        for v in values:
            if isinstance(v, list) and len(v) != 2:
                raise ValueError("complex values must be a number or an [re, im] pair")
        return values

    @field_validator("p1", "p2")
    @classmethod
    def validate_powers(cls, values):
        if any(p < 0.0 or not math.isfinite(p) for p in values):
            raise ValueError("powers must be finite and nonnegative")
        return values

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SweepSpec":
        with open(path, "r") as f:
            return cls.model_validate(json.load(f))

    def resolved_alpha_steps(self) -> int:
        return self.alpha_steps or get_config().grids.alpha_steps

    def resolved_tau_steps(self) -> int:
        return self.tau_steps or get_config().grids.tau_steps

    def points(self) -> List[GaussianChannelParams]:
        """Cartesian product in (a, b, p1, p2) order."""
        return [
            GaussianChannelParams(parse_complex(a), parse_complex(b), p1, p2)
            for a, b, p1, p2 in product(self.a, self.b, self.p1, self.p2)
        ]

    def canonical(self) -> Dict[str, Any]:
        """Spec with defaults filled in, for digests and reports."""
        data = self.model_dump()
        data["alpha_steps"] = self.resolved_alpha_steps()
        data["tau_steps"] = self.resolved_tau_steps()
        data.pop("output_dir", None)
        return data


@dataclass
class SweepRow:
    params: GaussianChannelParams
    gap_bits: float
    ratio: float
    contained: bool

    def values(self) -> List[float]:
        p = self.params
        return [p.a.real, p.a.imag, p.b.real, p.b.imag, p.p1, p.p2, self.gap_bits, self.ratio]


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)

    @property
    def max_gap_row(self) -> Optional[SweepRow]:
        return max(self.rows, key=lambda r: r.gap_bits, default=None)

    @property
    def max_ratio_row(self) -> Optional[SweepRow]:
        return max(self.rows, key=lambda r: r.ratio, default=None)

    @property
    def max_gap(self) -> float:
        row = self.max_gap_row
        return row.gap_bits if row else 0.0

    @property
    def max_ratio(self) -> float:
        row = self.max_ratio_row
        return row.ratio if row else 1.0

    @property
    def all_contained(self) -> bool:
        return all(r.contained for r in self.rows)

    def within_bounds(self, gap_bound: float, ratio_bound: float) -> bool:
        return self.all_contained and self.max_gap <= gap_bound and self.max_ratio <= ratio_bound

    def to_csv(self, digits: int = 12) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            writer.writerow([format_number(v, digits) for v in row.values()])
        writer.writerow(["max", "", "", "", "", "",
                         format_number(self.max_gap, digits), format_number(self.max_ratio, digits)])
        return buffer.getvalue()

    def argmax(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        if self.max_gap_row:
            out["gap"] = {"value": self.max_gap, "params": self.max_gap_row.params.to_dict()}
        if self.max_ratio_row:
            out["ratio"] = {"value": self.max_ratio, "params": self.max_ratio_row.params.to_dict()}
        return out


def evaluate_point(params: GaussianChannelParams, alpha_steps: int, tau_steps: int) -> SweepRow:
    """Gap against the best inner region; ratio against scheme E with time division."""
    tol = get_config().tolerances.containment
    outer = outer_region(params, alpha_steps)
    best = best_inner_region(params, alpha_steps, tau_steps)
    shared = union_hull([inner_region(params, alpha_steps), time_division_region(params, tau_steps)])

    if not (contains(outer, best, tol) and contains(outer, shared, tol)):
        logger.warning(f"inner region exceeds outer region at {params}")
        return SweepRow(params, math.inf, math.inf, False)

    accuracy = get_config().tolerances.gap_accuracy
    return SweepRow(params, max_gap(outer, best, accuracy, tol), max_ratio(outer, shared, accuracy, tol), True)


def run_sweep(spec: SweepSpec, threads: Optional[int] = None) -> SweepResult:
    points = spec.points()
    alpha_steps, tau_steps = spec.resolved_alpha_steps(), spec.resolved_tau_steps()
    logger.info(f"sweep: {len(points)} parameter sets, alpha grid {alpha_steps}, tau grid {tau_steps}")
    rows = ordered_map(lambda p: evaluate_point(p, alpha_steps, tau_steps), points, threads)
    result = SweepResult(rows)
    logger.info(f"sweep done: max gap {result.max_gap:.6f} bits, max ratio {result.max_ratio:.6f}")
    return result
