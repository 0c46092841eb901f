"""
End-to-end verification run (verify-all).

Each check records its case count, failures, worst deviation and the
tolerance it was held to; failures are reported, never raised. The
report itself contains no timing so reruns are byte-identical.
"""

import cmath
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import CcmConfig, get_config
from dmc_channel import (
    outer_bound_region, random_semideterministic_channel, semidet_capacity_region, verify_semidet,
)
from fme_symbolic import SymbolicSystemError, derive_th2, TH2_ELIMINATION_ORDER
from gaussian_ccm import (
    GaussianChannelParams, SchemeEAssignment, best_inner_region, cap, f_term, gaussian_mi_oracle,
    inner_bounds_scheme_e, inner_region, is_very_strong, lambda_costa, outer_region,
)
from artifact_writer import input_digest
from rate_region import RateRegion, contains, max_gap
from regime_map import build_regime_map
from sweep_runner import SweepResult, SweepSpec, run_sweep


logger = logging.getLogger(__name__)

CHECK_NAMES = (
    "fme_inner_bound", "semidet_capacity", "oracle_agreement", "pdc_capacity", "vsi_capacity",
    "constant_gap", "constant_factor", "containment", "regime_map",
)

QUICK_ALPHA_STEPS = 201
QUICK_GRID_STEPS = 6


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    failures: int
    worst_deviation: float
    tolerance: float
    worst_case: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "failures": self.failures,
            "worst_deviation": self.worst_deviation,
            "tolerance": self.tolerance,
            "worst_case": self.worst_case,
            "details": self.details,
        }


@dataclass
class RunReport:
    command: str
    input_digest: str
    checks: List[CheckResult] = field(default_factory=list)
    argmax: Dict[str, Any] = field(default_factory=dict)
    quick: bool = False
    wall_clock_seconds: Optional[float] = None

    @property
    def all_passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            "command": self.command,
            "input_digest": self.input_digest,
            "quick": self.quick,
            "all_passed": self.all_passed,
            "checks": {c.name: c.to_dict() for c in self.checks},
            "argmax": self.argmax,
        }
        if include_timing:
            data["wall_clock_seconds"] = self.wall_clock_seconds
        return data

    def summary(self) -> str:
        failed = [c.name for c in self.checks if not c.passed]
        status = "all checks passed" if not failed else f"failed: {', '.join(failed)}"
        return f"{len(self.checks)} checks, {status}"


class _Tracker:
    """Worst-case bookkeeping for one check."""

    def __init__(self, tolerance: float):
        self.tolerance = tolerance
        self.cases = 0
        self.failures = 0
        self.worst = 0.0
        self.worst_case: Optional[Dict[str, Any]] = None

    def record(self, deviation: float, case: Dict[str, Any], ok: Optional[bool] = None) -> None:
        self.cases += 1
        if ok is None:
            ok = deviation <= self.tolerance
        if not ok:
            self.failures += 1
        if self.worst_case is None or deviation > self.worst:
            self.worst = deviation
            self.worst_case = case

    def result(self, name: str, **details) -> CheckResult:
        return CheckResult(name, self.failures == 0 and self.cases > 0, self.cases, self.failures,
                           self.worst, self.tolerance, self.worst_case, details)


def region_deviation(a: RateRegion, b: RateRegion) -> float:
    """Largest mutual containment violation between two regions (0 when equal)."""
    va = np.array([p.as_tuple() for p in a.vertices()])
    vb = np.array([p.as_tuple() for p in b.vertices()])
    return max(a.max_violation(vb), b.max_violation(va), 0.0)


def random_gaussian_params(rng: np.random.Generator, max_gain: float = 3.0, max_power: float = 20.0,
                           b_max: Optional[float] = None) -> GaussianChannelParams:
    """Complex gains of modulus up to max_gain (|b| up to b_max) with uniform phase; powers in [0, max_power]."""
    b_limit = max_gain if b_max is None else b_max
    a = rng.uniform(0.0, max_gain) * cmath.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    b = rng.uniform(0.0, b_limit) * cmath.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    return GaussianChannelParams(a, b, rng.uniform(0.0, max_power), rng.uniform(0.0, max_power))


class AcceptanceRun:
    """Runs every check for a sweep spec; containment results accumulate across checks."""

    def __init__(self, spec: SweepSpec, quick: bool = False, config: Optional[CcmConfig] = None,
                 threads: Optional[int] = None):
        self.spec = spec
        self.quick = quick
        self.config = config or get_config()
        self.threads = threads
        self.rng = np.random.default_rng(spec.seed)
        self.containment = _Tracker(self.config.tolerances.containment)
        self.sweep: Optional[SweepResult] = None

        acceptance = self.config.acceptance
        shrink = (lambda n: max(4, n // 10)) if quick else (lambda n: n)
        self.oracle_draws = shrink(acceptance.oracle_draws)
        self.pdc_draws = shrink(acceptance.pdc_draws)
        self.vsi_draws = shrink(acceptance.vsi_draws)
        self.semidet_channels = shrink(acceptance.semidet_channels)
        self.alpha_steps = QUICK_ALPHA_STEPS if quick else spec.resolved_alpha_steps()
        self.tau_steps = QUICK_ALPHA_STEPS if quick else spec.resolved_tau_steps()
        self.grid_steps = QUICK_GRID_STEPS if quick else self.config.grids.dmc_grid_steps

    # ------------------------------------------------------------------

    def _contain(self, outer: RateRegion, inner: RateRegion, case: Dict[str, Any]) -> bool:
        va = np.array([p.as_tuple() for p in inner.vertices()])
        violation = max(outer.max_violation(va), 0.0)
        ok = contains(outer, inner, self.containment.tolerance)
        self.containment.record(violation, case, ok)
        return ok

    def check_fme(self) -> CheckResult:
        tracker = _Tracker(0.0)
        bounds: List[str] = []
        for order in (TH2_ELIMINATION_ORDER, tuple(reversed(TH2_ELIMINATION_ORDER))):
            try:
                system = derive_th2(order)
            except SymbolicSystemError as e:
                logger.warning(f"derivation with order {order} failed: {e}")
                tracker.record(1.0, {"order": list(order), "error": str(e)}, ok=False)
                continue
            tracker.record(0.0, {"order": list(order)})
            bounds = bounds or [str(i) for i in system.inequalities]
        return tracker.result("fme_inner_bound", inequalities=bounds)

    def check_semidet(self) -> CheckResult:
        identity = self.config.tolerances.identity
        tracker = _Tracker(identity)
        region_worst = 0.0
        rng = np.random.default_rng(self.spec.seed + 1)
        for index in range(self.semidet_channels):
            y2_size = 2 + index % 2
            channel = random_semideterministic_channel(rng, y2_size=y2_size)
            report = verify_semidet(channel, self.grid_steps, identity, self.threads)
            semidet = semidet_capacity_region(channel, self.grid_steps, self.threads)
            outer = outer_bound_region(channel, self.grid_steps, self.threads)
            deviation = region_deviation(semidet, outer)
            region_worst = max(region_worst, deviation)
            ok = report.all_passed and deviation <= self.config.tolerances.containment
            tracker.record(report.worst_deviation, {"channel": index, "y2_size": y2_size,
                                                    "report": report.to_dict(),
                                                    "region_deviation": deviation}, ok)
        return tracker.result("semidet_capacity", grid_steps=self.grid_steps, worst_region_deviation=region_worst)

    def check_oracle(self) -> CheckResult:
        tracker = _Tracker(self.config.tolerances.containment)
        identity = self.config.tolerances.identity
        worst_f = 0.0
        f_failures = 0
        for _ in range(self.oracle_draws):
            params = random_gaussian_params(self.rng)
            alpha = float(self.rng.uniform())
            assignment = SchemeEAssignment.costa(params, alpha)
            oracle = gaussian_mi_oracle(params, assignment)
            closed = inner_bounds_scheme_e(params, assignment)
            case = {"params": params.to_dict(), "alpha": alpha}

            r1_expected = cap(alpha * min(1.0, params.abs_b ** 2) * params.p1)
            deviation = max(abs(oracle.r1 - r1_expected), abs(oracle.sum_b - closed.sum_b),
                            abs(oracle.sum_a - closed.sum_a))

            h1 = params.a + assignment.superposition_gain
            f_value = f_term(h1, 1.0, lambda_costa(h1, 1.0, alpha, params.p1), alpha, params)
            f_dev = abs(f_value - math.log2(1.0 + alpha * params.p1))
            worst_f = max(worst_f, f_dev)
            f_failures += f_dev > identity
            tracker.record(deviation, case, deviation <= tracker.tolerance and f_dev <= identity)

            # per-alpha pentagons nest, so their hulls nest
            slack = max(oracle.r1 - closed.r1, oracle.sum_a - closed.sum_b, 0.0)
            self.containment.record(slack, {"check": "oracle_agreement", **case})
        return tracker.result("oracle_agreement", worst_f_deviation=worst_f, f_failures=f_failures)

    def _tight(self, name: str, draws: int, sample: Callable[[], GaussianChannelParams],
               inner: Callable[[GaussianChannelParams], RateRegion]) -> CheckResult:
        tracker = _Tracker(self.config.acceptance.regime_gap_bits)
        accuracy = self.config.tolerances.gap_accuracy
        for _ in range(draws):
            params = sample()
            outer = outer_region(params, self.alpha_steps)
            region = inner(params)
            case = {"check": name, "params": params.to_dict()}
            if not self._contain(outer, region, case):
                tracker.record(math.inf, case, ok=False)
                continue
            tracker.record(max_gap(outer, region, accuracy, self.containment.tolerance), case)
        return tracker.result(name, alpha_steps=self.alpha_steps)

    def check_pdc(self) -> CheckResult:
        return self._tight("pdc_capacity", self.pdc_draws,
                           lambda: random_gaussian_params(self.rng, b_max=1.0),
                           lambda p: inner_region(p, self.alpha_steps))

    def check_vsi(self) -> CheckResult:
        def sample() -> GaussianChannelParams:
            while True:
                params = random_gaussian_params(self.rng)
                if is_very_strong(params):
                    return params

        return self._tight("vsi_capacity", self.vsi_draws, sample,
                           lambda p: best_inner_region(p, self.alpha_steps, self.tau_steps))

    def run_sweep(self) -> SweepResult:
        spec = self.spec.model_copy(update={"alpha_steps": self.alpha_steps, "tau_steps": self.tau_steps})
        self.sweep = run_sweep(spec, self.threads)
        for row in self.sweep.rows:
            self.containment.record(0.0 if row.contained else math.inf,
                                    {"check": "sweep", "params": row.params.to_dict()}, row.contained)
        return self.sweep

    def check_gap(self) -> CheckResult:
        tracker = _Tracker(self.config.acceptance.gap_bound_bits)
        for row in self.sweep.rows:
            tracker.record(row.gap_bits, {"params": row.params.to_dict()})
        return tracker.result("constant_gap", points=len(self.sweep.rows))

    def check_ratio(self) -> CheckResult:
        acceptance = self.config.acceptance
        tracker = _Tracker(acceptance.ratio_bound + acceptance.ratio_slack)
        for row in self.sweep.rows:
            tracker.record(row.ratio, {"params": row.params.to_dict()})
        return tracker.result("constant_factor", points=len(self.sweep.rows))

    def check_regime_map(self) -> CheckResult:
        settings = self.spec.regime_map
        regime_map = build_regime_map(settings.a_max, settings.b_max, settings.cells, settings.p1, settings.p2)
        weak = regime_map.weak_rows_primary_decodes()
        non_monotone = regime_map.non_monotone_rows()
        tracker = _Tracker(0.0)
        for j, b in enumerate(regime_map.b_values):
            bad = j in weak or j in non_monotone
            tracker.record(1.0 if bad else 0.0, {"row": j, "b": float(b)}, not bad)
        return tracker.result("regime_map", counts=regime_map.counts(),
                              weak_rows_not_pdc=weak, non_monotone_rows=non_monotone)

    def run(self) -> RunReport:
        report = RunReport("verify-all", input_digest(self.spec.canonical()), quick=self.quick)
        steps = [
            ("fme_inner_bound", self.check_fme),
            ("semidet_capacity", self.check_semidet),
            ("oracle_agreement", self.check_oracle),
            ("pdc_capacity", self.check_pdc),
            ("vsi_capacity", self.check_vsi),
        ]
        for name, step in steps:
            logger.info(f"running {name}")
            report.checks.append(step())

        logger.info("running constant-gap sweep")
        self.run_sweep()
        report.checks.append(self.check_gap())
        report.checks.append(self.check_ratio())
        report.argmax = self.sweep.argmax()
        report.checks.append(self.containment.result("containment"))
        report.checks.append(self.check_regime_map())

        for check in report.checks:
            log = logger.info if check.passed else logger.warning
            log(f"{check.name}: {'pass' if check.passed else 'FAIL'} "
                f"({check.cases} cases, worst {check.worst_deviation:.3e})")
        return report


def verify_all(spec: Optional[SweepSpec] = None, quick: bool = False,
               config: Optional[CcmConfig] = None, threads: Optional[int] = None) -> RunReport:
    """Run every acceptance check; the report lists each check once."""
    return AcceptanceRun(spec or SweepSpec(), quick, config, threads).run()
