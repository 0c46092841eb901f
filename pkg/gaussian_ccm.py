"""
Gaussian CIFC-CCM in standard form:

    Y1 = X1 + a X2 + Z1
    Y2 = X2 + |b| X1 + Z2,    Z1, Z2 ~ CN(0, 1),  E|Xi|^2 <= Pi

Outer bound, the superposition/dirty-paper inner bound (closed form and
log-det oracle), scheme D for very strong interference, time division,
and the regime predicates. Unions over the power split alpha and the
time-division fraction tau are taken on uniform grids and convexified.

Assignment used throughout:
    X1  = Xh + g X2,              g  = sqrt((1 - alpha) P1 / P2)
    U1c = Xh + lam h1 X2,          h1 = a + g,  lam = alpha P1 / (alpha P1 + 1)
with Xh independent of X2 and of power alpha P1.
"""

import cmath
import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from config import get_config
from gaussian_mi import check_psd, conditional_mutual_information
from rate_region import RateRegion, hull_of_points, union_hull


logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12

ComplexLike = Union[complex, float, int, Sequence[float]]


class GaussianModelError(ValueError):
    """Invalid parameters or assignments, negative cap() arguments, undefined pre-coding ratios."""


def parse_complex(value: ComplexLike) -> complex:
    """Accept a number or an [re, im] pair."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise GaussianModelError(f"complex value must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


# ============================================================================
# TYPES
# ============================================================================

@dataclass(frozen=True)
class GaussianChannelParams:
    """Gains a, b (complex) and powers p1, p2; unit noise."""
    a: complex
    b: complex
    p1: float
    p2: float

    def __post_init__(self):
        a, b = parse_complex(self.a), parse_complex(self.b)
        p1, p2 = float(self.p1), float(self.p2)
        if not (cmath.isfinite(a) and cmath.isfinite(b)):
            raise GaussianModelError("channel gains must be finite")
        if not (math.isfinite(p1) and math.isfinite(p2)) or p1 < 0.0 or p2 < 0.0:
            raise GaussianModelError(f"powers must be finite and nonnegative, got p1={p1}, p2={p2}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def abs_b(self) -> float:
        return abs(self.b)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": [self.a.real, self.a.imag],
            "b": [self.b.real, self.b.imag],
            "p1": self.p1,
            "p2": self.p2,
        }


def superposition_gain(params: GaussianChannelParams, alpha: float) -> float:
    """sqrt((1 - alpha) P1 / P2); zero when X2 is silent."""
    if params.p2 == 0.0:
        return 0.0
    return math.sqrt(max(1.0 - alpha, 0.0) * params.p1 / params.p2)


@dataclass(frozen=True)
class SchemeEAssignment:
    """Power split alpha, dirty-paper scaling lam and the X2 coefficient inside X1."""
    alpha: float
    lam: float
    superposition_gain: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise GaussianModelError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.superposition_gain < 0.0:
            raise GaussianModelError("superposition gain must be nonnegative")

    @classmethod
    def costa(cls, params: GaussianChannelParams, alpha: float) -> "SchemeEAssignment":
        q = alpha * params.p1
        return cls(alpha, q / (q + 1.0), superposition_gain(params, alpha))

    def validate(self, params: GaussianChannelParams) -> None:
        """The X1 power budget is met exactly (X2 silent excepted)."""
        if params.p2 == 0.0:
            if self.superposition_gain != 0.0:
                raise GaussianModelError("superposition gain must be 0 when P2 = 0")
            return
        used = self.superposition_gain ** 2 * params.p2
        target = (1.0 - self.alpha) * params.p1
        if abs(used - target) > IDENTITY_TOL * max(1.0, params.p1):
            raise GaussianModelError(f"gain^2 P2 = {used!r} differs from (1 - alpha) P1 = {target!r}")


@dataclass(frozen=True)
class SchemeERates:
    """Right-hand sides R1 <= r1, R1 + R2 <= sum_a = min(sum_y1, sum_b)."""
    r1: float
    sum_a: float
    sum_b: float
    sum_y1: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.r1, self.sum_a, self.sum_b


class RegimeLabel(str, Enum):
    VERY_STRONG = "VERY_STRONG"
    PDC = "PDC"
    BOTH = "BOTH"
    GAP_ONLY = "GAP_ONLY"


# ============================================================================
# CLOSED FORMS
# ============================================================================

def cap(x: float) -> float:
    """log2(1 + x)."""
    if x < 0.0:
        raise GaussianModelError(f"cap() argument must be nonnegative, got {x!r}")
    return math.log2(1.0 + x)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise GaussianModelError(f"alpha must lie in [0, 1], got {alpha}")


def _grid(steps: Optional[int], default: int, name: str) -> np.ndarray:
    steps = default if steps is None else steps
    if steps < 2:
        raise GaussianModelError(f"{name} must be at least 2")
    return np.linspace(0.0, 1.0, steps)


def alpha_grid(alpha_steps: Optional[int] = None) -> np.ndarray:
    return _grid(alpha_steps, get_config().grids.alpha_steps, "alpha_steps")


def tau_grid(tau_steps: Optional[int] = None) -> np.ndarray:
    return _grid(tau_steps, get_config().grids.tau_steps, "tau_steps")


def outer_bounds(params: GaussianChannelParams, alpha: float) -> Tuple[float, float]:
    """(C(alpha min(1,|b|^2) P1), C(P2 + |b|^2 P1 + 2 sqrt((1-alpha)|b|^2 P1 P2)))."""
    _check_alpha(alpha)
    b2 = params.abs_b ** 2
    r1_max = cap(alpha * min(1.0, b2) * params.p1)
    sum_max = cap(params.p2 + b2 * params.p1 + 2.0 * math.sqrt((1.0 - alpha) * b2 * params.p1 * params.p2))
    return r1_max, sum_max


def _outer_arrays(params: GaussianChannelParams, alphas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    b2 = params.abs_b ** 2
    r1 = np.log2(1.0 + alphas * min(1.0, b2) * params.p1)
    total = np.log2(1.0 + params.p2 + b2 * params.p1
                    + 2.0 * np.sqrt(np.clip(1.0 - alphas, 0.0, None) * b2 * params.p1 * params.p2))
    return r1, total


def pentagon_union(r1: np.ndarray, total: np.ndarray) -> RateRegion:
    """Hull of the regions {R1 <= r1[i], R1 + R2 <= total[i]}."""
    r1, total = np.asarray(r1, float), np.asarray(total, float)
    if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(total))):
        raise GaussianModelError("pentagon rates must be finite")
    r1, total = np.maximum(r1, 0.0), np.maximum(total, 0.0)
    corner = np.minimum(r1, total)
    points = np.concatenate([
        np.stack([corner, total - corner], axis=1),
        np.stack([np.zeros_like(total), total], axis=1),
    ])
    return hull_of_points(points)


def outer_region(params: GaussianChannelParams, alpha_steps: Optional[int] = None) -> RateRegion:
    alphas = alpha_grid(alpha_steps)
    return pentagon_union(*_outer_arrays(params, alphas))


def lambda_costa(h: complex, sigma2: float, alpha: float, p1: float) -> complex:
    """alpha P1 h / (alpha P1 + sigma2)."""
    if sigma2 <= 0.0:
        raise GaussianModelError("noise variance must be positive")
    q = alpha * p1
    return q * h / (q + sigma2)


def f_term(h: complex, sigma2: float, lam: complex, alpha: float, params: GaussianChannelParams) -> float:
    """
    Dirty-paper expression in its usual closed form
        log2((s + Q) / (s + [Q|h|^2 P2 / (Q|h|^2 P2 + s)] |lam / lam_costa - 1|^2)),  Q = alpha P1.
    Exact only at lam = lam_costa; dpc_rate() is the exact rate elsewhere.
    """
    q = alpha * params.p1
    costa = lambda_costa(h, sigma2, alpha, params.p1)
    if costa == 0:
        if lam != 0:
            raise GaussianModelError("pre-coding ratio undefined: lambda_costa is 0 but lambda is not")
        mismatch = 0.0
    else:
        mismatch = abs(lam / costa - 1.0) ** 2
    power = q * abs(h) ** 2 * params.p2
    weight = power / (power + sigma2)
    return math.log2((sigma2 + q) / (sigma2 + weight * mismatch))


def _dpc_general(x_gain: complex, s_gain: complex, sigma2: float, q: float, mu: complex, p2: float) -> float:
    """
    I(Y;U) - I(U;S) for Y = x_gain Xh + s_gain S + Z, U = Xh + mu S,
    Xh ~ CN(0, q), S ~ CN(0, p2), Z ~ CN(0, sigma2).
    """
    if q <= 0.0:
        if mu != 0 and p2 > 0.0:
            raise GaussianModelError("dirty-paper rate undefined: U is a function of S")
        return 0.0
    var_y = abs(x_gain) ** 2 * q + abs(s_gain) ** 2 * p2 + sigma2
    var_u = q + abs(mu) ** 2 * p2
    cov_uy = np.conj(x_gain) * q + mu * np.conj(s_gain) * p2
    residual = var_u * var_y - abs(cov_uy) ** 2
    return math.log2(q * var_y / residual)


def dpc_rate(h: complex, sigma2: float, lam: complex, alpha: float, params: GaussianChannelParams) -> float:
    """
    Exact dirty-paper rate for Y = Xh + h S + Z with U = Xh + lam S:
        log2((s + Q) / (s + [Q|h|^2 P2 / (Q + |h|^2 P2 + s)] |lam / lam_costa - 1|^2)).
    """
    if sigma2 <= 0.0:
        raise GaussianModelError("noise variance must be positive")
    return _dpc_general(1.0, h, sigma2, alpha * params.p1, lam, params.p2)


def literal_sum_rate(params: GaussianChannelParams, assignment: SchemeEAssignment) -> Optional[float]:
    """
    The Y1 sum-rate bound with the f arguments taken literally
    (alpha inside the square roots, 1/|b|^2 offsets, scalar lambda).
    None where the literal expression is undefined.
    """
    if params.p2 == 0.0 or params.abs_b == 0.0:
        return None
    alpha = assignment.alpha
    root = math.sqrt(alpha * params.p1 / params.p2)
    inv_b2 = 1.0 / params.abs_b ** 2
    try:
        sum_b = outer_bounds(params, alpha)[1]
        return (sum_b + f_term(params.a + root, 1.0, assignment.lam, alpha, params)
                - f_term(inv_b2 + root, inv_b2, assignment.lam, alpha, params))
    except (GaussianModelError, ZeroDivisionError, ValueError):
        return None


def inner_bounds_scheme_e(params: GaussianChannelParams, assignment: SchemeEAssignment) -> SchemeERates:
    """
    Closed-form scheme E rates:
        r1     = C(alpha min(1,|b|^2) P1)
        sum_b  = C(|b|^2 P1 + P2 + 2 sqrt((1-alpha)|b|^2 P1 P2))
        sum_y1 = sum_b + dpc(h1, 1) - dpc(1/|b| + g, 1/|b|^2)
    where both dirty-paper terms use U1c = Xh + lam h1 X2.
    """
    assignment.validate(params)
    alpha, g = assignment.alpha, assignment.superposition_gain
    r1_max, sum_b = outer_bounds(params, alpha)
    h1 = params.a + g
    mu = assignment.lam * h1
    at_y1 = dpc_rate(h1, 1.0, mu, alpha, params)
    abs_b = params.abs_b
    if abs_b > 0.0:
        at_y2 = dpc_rate(1.0 / abs_b + g, 1.0 / abs_b ** 2, mu, alpha, params)
    else:
        at_y2 = _dpc_general(0.0, 1.0, 1.0, alpha * params.p1, mu, params.p2)
    sum_y1 = sum_b + at_y1 - at_y2

    literal = literal_sum_rate(params, assignment)
    if literal is not None and abs(literal - sum_y1) > 1e-9:
        logger.debug(f"literal sum-rate expression gives {literal:.12g}, exact {sum_y1:.12g} "
                     f"(alpha={alpha:.6g}, a={params.a}, |b|={abs_b:.6g})")
    return SchemeERates(r1_max, min(sum_y1, sum_b), sum_b, sum_y1)


# ============================================================================
# LOG-DET ORACLE
# ============================================================================

XH, X2, U1C, X1, Y1, Y2 = range(6)
ORACLE_NAMES = ("Xh1", "X2", "U1c", "X1", "Y1", "Y2")


def _mixing(params: GaussianChannelParams, gain: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Rows (Xh1, X2, U1c, X1, Y1, Y2) over sources (Xh1, X2, Z1, Z2)."""
    n = gain.shape[0]
    m = np.zeros((n, 6, 4), dtype=complex)
    m[:, XH, 0] = 1.0
    m[:, X2, 1] = 1.0
    m[:, U1C, 0] = 1.0
    m[:, U1C, 1] = mu
    m[:, X1, 0] = 1.0
    m[:, X1, 1] = gain
    m[:, Y1, 0] = 1.0
    m[:, Y1, 1] = params.a + gain
    m[:, Y1, 2] = 1.0
    m[:, Y2, 0] = params.abs_b
    m[:, Y2, 1] = 1.0 + params.abs_b * gain
    m[:, Y2, 3] = 1.0
    return m


def scheme_e_factor(params: GaussianChannelParams, alphas: np.ndarray, lams: np.ndarray,
                    gains: np.ndarray) -> np.ndarray:
    """Square-root factors of the (Xh1, X2, U1c, X1, Y1, Y2) covariances, one per assignment."""
    alphas, lams, gains = (np.atleast_1d(np.asarray(v, float)) for v in (alphas, lams, gains))
    mu = lams * (params.a + gains)
    scales = np.stack([
        np.sqrt(alphas * params.p1),
        np.full_like(alphas, math.sqrt(params.p2)),
        np.ones_like(alphas),
        np.ones_like(alphas),
    ], axis=1)
    return _mixing(params, gains, mu) * scales[:, None, :]


def scheme_e_covariance(params: GaussianChannelParams, assignment: SchemeEAssignment) -> np.ndarray:
    factor = scheme_e_factor(params, [assignment.alpha], [assignment.lam], [assignment.superposition_gain])[0]
    return factor @ factor.conj().T


def _oracle_arrays(params: GaussianChannelParams, factor: np.ndarray) -> Dict[str, np.ndarray]:
    check_psd(factor @ np.conj(np.swapaxes(factor, -1, -2)))
    i_y1_u = conditional_mutual_information(factor, Y1, U1C)
    i_u_x2 = conditional_mutual_information(factor, U1C, X2)
    i_y2_x1 = conditional_mutual_information(factor, Y2, X1, X2)
    i_y2_x2_u = conditional_mutual_information(factor, Y2, X2, U1C)
    i_y2_all = conditional_mutual_information(factor, Y2, (X1, X2))
    with np.errstate(invalid="ignore"):
        binned = i_y1_u - i_u_x2
    # U1c fixed by X2 makes both terms infinite; no rate is binned through it
    r1 = np.minimum(np.nan_to_num(binned, nan=0.0, neginf=0.0), i_y2_x1)
    sum_y1 = i_y1_u + i_y2_x2_u
    return {"r1": r1, "sum_y1": sum_y1, "sum_b": i_y2_all, "sum_a": np.minimum(sum_y1, i_y2_all)}


def gaussian_mi_oracle(params: GaussianChannelParams, assignment: SchemeEAssignment) -> SchemeERates:
    """
    Scheme E rates from log-determinants of the joint Gaussian law:
        r1     = min(I(Y1;U1c) - I(U1c;X2), I(Y2;X1|X2))
        sum_y1 = I(Y1;U1c) + I(Y2;X2|U1c)
        sum_b  = I(Y2;X1,X2)
    """
    assignment.validate(params)
    factor = scheme_e_factor(params, [assignment.alpha], [assignment.lam], [assignment.superposition_gain])
    values = {k: float(v[0]) for k, v in _oracle_arrays(params, factor).items()}
    return SchemeERates(values["r1"], values["sum_a"], values["sum_b"], values["sum_y1"])


def oracle_rates(params: GaussianChannelParams, alphas: np.ndarray) -> Dict[str, np.ndarray]:
    """Oracle rates for the Costa assignment at every alpha."""
    alphas = np.asarray(alphas, float)
    q = alphas * params.p1
    lams = q / (q + 1.0)
    if params.p2 > 0.0:
        gains = np.sqrt(np.clip(1.0 - alphas, 0.0, None) * params.p1 / params.p2)
    else:
        gains = np.zeros_like(alphas)
    return _oracle_arrays(params, scheme_e_factor(params, alphas, lams, gains))


def inner_region(params: GaussianChannelParams, alpha_steps: Optional[int] = None) -> RateRegion:
    """Hull over alpha of {R1 <= r1, R1 + R2 <= min(sum_y1, sum_b)} from the oracle."""
    rates = oracle_rates(params, alpha_grid(alpha_steps))
    return pentagon_union(rates["r1"], rates["sum_a"])


def scheme_d_region(params: GaussianChannelParams, alpha_steps: Optional[int] = None) -> RateRegion:
    """
    Both receivers decode both messages, X1 = Xh + g X2:
        R1      <= C(alpha min(1,|b|^2) P1)
        R1 + R2 <= min(C(alpha P1 + |a + g|^2 P2), sum_b)
    """
    alphas = alpha_grid(alpha_steps)
    r1, sum_b = _outer_arrays(params, alphas)
    if params.p2 > 0.0:
        gains = np.sqrt(np.clip(1.0 - alphas, 0.0, None) * params.p1 / params.p2)
    else:
        gains = np.zeros_like(alphas)
    at_y1 = np.log2(1.0 + alphas * params.p1 + np.abs(params.a + gains) ** 2 * params.p2)
    if params.p2 == 0.0:
        # X2 silent: the unused share of P1 does not reach Y2 either
        sum_b = np.log2(1.0 + alphas * params.abs_b ** 2 * params.p1)
    return pentagon_union(r1, np.minimum(at_y1, sum_b))


def time_division_region(params: GaussianChannelParams, tau_steps: Optional[int] = None,
                         cooperative: bool = False) -> RateRegion:
    """
    User 1 alone for a fraction tau with power P1/tau, user 2 alone for
    1 - tau with power P2/(1 - tau); endpoint rates are 0.

    cooperative=True lets the cognitive transmitter beamform message 2
    during the second phase at its nominal powers:
        R1 = tau C(min(1,|b|^2) P1),  R2 = (1 - tau) C((|b| sqrt(P1) + sqrt(P2))^2)
    """
    snr1 = min(1.0, params.abs_b ** 2) * params.p1
    if cooperative:
        beam = (params.abs_b * math.sqrt(params.p1) + math.sqrt(params.p2)) ** 2
        return hull_of_points([(cap(snr1), 0.0), (0.0, cap(beam))])

    taus = tau_grid(tau_steps)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(taus > 0.0, taus * np.log2(1.0 + snr1 / np.where(taus > 0.0, taus, 1.0)), 0.0)
        rest = 1.0 - taus
        r2 = np.where(rest > 0.0, rest * np.log2(1.0 + params.p2 / np.where(rest > 0.0, rest, 1.0)), 0.0)
    return hull_of_points(np.stack([r1, r2], axis=1))


def best_inner_region(params: GaussianChannelParams, alpha_steps: Optional[int] = None,
                      tau_steps: Optional[int] = None) -> RateRegion:
    """Hull of every achievable region built here."""
    return union_hull([
        inner_region(params, alpha_steps),
        scheme_d_region(params, alpha_steps),
        time_division_region(params, tau_steps),
        time_division_region(params, cooperative=True),
    ])


# ============================================================================
# REGIMES
# ============================================================================

def regime_value_vsi(params: GaussianChannelParams) -> float:
    """(|a|^2 - 1) P2 - (|b|^2 - 1) P1 - 2 |a - |b|| sqrt(P1 P2)."""
    abs_b = params.abs_b
    return ((abs(params.a) ** 2 - 1.0) * params.p2 - (abs_b ** 2 - 1.0) * params.p1
            - 2.0 * abs(params.a - abs_b) * math.sqrt(params.p1 * params.p2))


def is_very_strong(params: GaussianChannelParams) -> bool:
    return regime_value_vsi(params) >= 0.0


def pdc_margins(params: GaussianChannelParams) -> Tuple[float, float]:
    """Left minus right side of the two primary-decodes-cognitive inequalities."""
    abs_b, a = params.abs_b, params.a
    p1, p2 = params.p1, params.p2
    mismatch = abs(1.0 - a * abs_b) ** 2
    lhs = p2 * mismatch
    base = 1.0 + p1 + abs(a) ** 2 * p2
    first = (abs_b ** 2 - 1.0) * base - p1 * p2 * mismatch
    second = (abs_b ** 2 - 1.0) * (base + 2.0 * a.real * math.sqrt(p1 * p2))
    return lhs - first, lhs - second


def is_pdc(params: GaussianChannelParams) -> bool:
    first, second = pdc_margins(params)
    return first >= 0.0 and second >= 0.0


def regime_classify(params: GaussianChannelParams) -> RegimeLabel:
    vsi, pdc = is_very_strong(params), is_pdc(params)
    if vsi and pdc:
        return RegimeLabel.BOTH
    if vsi:
        return RegimeLabel.VERY_STRONG
    if pdc:
        return RegimeLabel.PDC
    return RegimeLabel.GAP_ONLY
