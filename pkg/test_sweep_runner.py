"""
Unit tests for parameter sweeps.

Validates:
- SweepSpec validation, defaults and Cartesian expansion
- Per-point gap and ratio stay within 1.87 bits and factor 2
- Row order is independent of the thread count
- CSV layout with the trailing max row
"""

import json
import math
import logging
from pathlib import Path

import pytest
from pydantic import ValidationError

from gaussian_ccm import GaussianChannelParams
from sweep_runner import SWEEP_COLUMNS, SweepResult, SweepSpec, evaluate_point, run_sweep

logger = logging.getLogger(__name__)

SMOKE_SPEC = Path(__file__).parent / "sweeps" / "smoke_sweep.json"
STEPS = 201


@pytest.fixture
def smoke_spec():
    return SweepSpec.load(SMOKE_SPEC)


class TestSweepSpec:
    """Loading and validating sweep specs."""

    def test_default_grid(self):
        spec = SweepSpec()
        assert len(spec.points()) == 6 * 5 * 4 * 4

    def test_smoke_spec_points(self, smoke_spec):
        points = smoke_spec.points()
        assert len(points) == 8
        assert points[0] == GaussianChannelParams(0.0, 1.5, 1.0, 10.0)
        assert points[-1].a == complex(1.0, 1.0)
        assert points[-1].b == complex(0.0, 2.0)

    def test_canonical_fills_steps_and_drops_output(self, smoke_spec):
        spec = smoke_spec.model_copy(update={"output_dir": "somewhere"})
        canonical = spec.canonical()
        assert canonical["alpha_steps"] == 101
        assert "output_dir" not in canonical

    def test_rejects_bad_complex(self):
        with pytest.raises(ValidationError, match="re, im"):
            SweepSpec(a=[[1.0, 2.0, 3.0]])

    def test_rejects_negative_power(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            SweepSpec(p1=[-1.0])

    def test_rejects_unknown_field(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"a": [0], "gains": [1]}))
        with pytest.raises(ValidationError):
            SweepSpec.load(path)


class TestEvaluatePoint:
    """Single-point gap and ratio."""

    @pytest.mark.parametrize("params", [
        GaussianChannelParams(0.0, 2.0, 10.0, 10.0),
        GaussianChannelParams(1.0, 1.5, 100.0, 1.0),
        GaussianChannelParams(complex(0.5, 0.5), complex(0.0, 5.0), 10.0, 1000.0),
    ])
    def test_within_bounds(self, params):
        row = evaluate_point(params, STEPS, STEPS)
        assert row.contained
        assert 0.0 <= row.gap_bits <= 1.87
        assert 1.0 <= row.ratio <= 2.0 + 1e-6

    def test_zero_power_point(self):
        row = evaluate_point(GaussianChannelParams(1.0, 2.0, 0.0, 0.0), STEPS, STEPS)
        assert row.contained
        assert row.gap_bits == pytest.approx(0.0, abs=1e-9)
        assert row.ratio == pytest.approx(1.0)

    @pytest.mark.parametrize("b", [5.0, 10.0])
    def test_large_power_corner_contained(self, b):
        # dense alpha grid, P1 = 1000, P2 = 1: short frontier edges at a large scale
        row = evaluate_point(GaussianChannelParams(2.0, b, 1000.0, 1.0), 1001, 1001)
        assert row.contained
        assert math.isfinite(row.gap_bits) and row.gap_bits <= 1.87
        assert math.isfinite(row.ratio) and row.ratio <= 2.0 + 1e-6


class TestRunSweep:
    """Whole sweeps."""

    @pytest.mark.timeout(120)
    def test_smoke_sweep(self, smoke_spec):
        result = run_sweep(smoke_spec, threads=1)
        assert [r.params for r in result.rows] == smoke_spec.points()
        assert result.within_bounds(1.87, 2.0 + 1e-6)
        logger.info(f"✅ Smoke sweep: max gap {result.max_gap:.4f}, max ratio {result.max_ratio:.4f}")

    @pytest.mark.timeout(120)
    def test_thread_count_does_not_change_rows(self, smoke_spec):
        serial = run_sweep(smoke_spec, threads=1)
        parallel = run_sweep(smoke_spec, threads=4)
        assert serial.to_csv() == parallel.to_csv()

    @pytest.mark.timeout(600)
    def test_default_grid_large_p1_slice(self):
        spec = SweepSpec(p1=[1000.0], p2=[1.0], alpha_steps=1001, tau_steps=1001)
        result = run_sweep(spec, threads=1)
        assert len(result.rows) == 30
        assert all(row.contained for row in result.rows)
        assert result.within_bounds(1.87, 2.0 + 1e-6)

    def test_csv_layout(self, smoke_spec):
        spec = smoke_spec.model_copy(update={"a": [0.0], "b": [1.5], "p1": [1.0]})
        csv_text = run_sweep(spec, threads=1).to_csv()
        lines = csv_text.splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 3
        assert lines[1].startswith("0,0,1.5,0,1,10,")
        assert lines[2].startswith("max,,,,,,")

    def test_empty_result(self):
        result = SweepResult()
        assert result.max_gap == 0.0
        assert result.max_ratio == 1.0
        assert result.argmax() == {}
