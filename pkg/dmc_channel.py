"""
Discrete memoryless CIFC-CCM evaluation.

Channels are probability tensors P(y1, y2 | x1, x2) indexed
[x1][x2][y1][y2]. Joint laws are named tensors; every information
quantity is computed from entropies of marginals, in bits.

Unions over input distributions are approximated by exact compositions
on the probability simplex (fixed denominator) and convexified with
union_hull. The time-sharing variable of the converse is never built.
"""

import re
import json
import math
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import get_config, ordered_map
from fme_symbolic import th2_expected_bounds
from rate_region import Halfspace, RateRegion, union_hull


logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
IDENTITY_TOL = 1e-12

Names = Union[str, Sequence[str]]


class ChannelError(ValueError):
    """Invalid tensors, dimension mismatches, unknown names, wrong channel class."""


class GridTooLargeError(ChannelError):
    """The simplex grid would exceed the enumeration guard."""


def _as_names(names: Names) -> Tuple[str, ...]:
    if isinstance(names, str):
        return tuple(n.strip() for n in names.split(",") if n.strip())
    return tuple(names)


# ============================================================================
# JOINT DISTRIBUTIONS
# ============================================================================

@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability tensor with one named axis per variable."""
    names: Tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        table = np.asarray(self.table, dtype=float)
        if len(set(names)) != len(names):
            raise ChannelError(f"duplicate variable names in {names}")
        if table.ndim != len(names):
            raise ChannelError(f"table has {table.ndim} axes for {len(names)} names")
        if np.any(table < -PROB_TOL):
            raise ChannelError("joint distribution has negative entries")
        total = float(table.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ChannelError(f"joint distribution sums to {total!r}, not 1")
        table = np.clip(table, 0.0, None)
        table.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "table", table)

    def axes(self, names: Names) -> Tuple[int, ...]:
        axes = []
        for name in _as_names(names):
            if name not in self.names:
                raise ChannelError(f"unknown variable {name!r}; have {list(self.names)}")
            axes.append(self.names.index(name))
        return tuple(axes)

    def probabilities(self, names: Names) -> np.ndarray:
        """Marginal table with axes in the requested order."""
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        marginal = self.table.sum(axis=drop) if drop else self.table
        remaining = [i for i in range(len(self.names)) if i in keep]
        return np.transpose(marginal, [remaining.index(i) for i in keep])

    def marginal(self, names: Names) -> "JointDistribution":
        return JointDistribution(_as_names(names), self.probabilities(names))

    def size(self, name: str) -> int:
        return self.table.shape[self.axes(name)[0]]

    def __repr__(self) -> str:
        return f"JointDistribution(names={self.names}, shape={self.table.shape})"


def entropy(joint: JointDistribution, names: Names) -> float:
    """H of the named variables, bits; 0 log 0 = 0."""
    if not _as_names(names):
        return 0.0
    p = joint.probabilities(names).ravel()
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p)))


def cond_entropy(joint: JointDistribution, a: Names, c: Names = ()) -> float:
    a, c = _as_names(a), _as_names(c)
    return entropy(joint, a + c) - entropy(joint, c)


def cond_mutual_information(joint: JointDistribution, a: Names, b: Names, c: Names = ()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), clamped at zero."""
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if not a or not b:
        raise ChannelError("mutual information needs two nonempty groups")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ChannelError(f"groups must be disjoint: {a} ; {b} | {c}")
    joint.axes(a + b + c)
    value = entropy(joint, a + c) + entropy(joint, b + c) - entropy(joint, a + b + c) - entropy(joint, c)
    return max(value, 0.0)


def mutual_information(joint: JointDistribution, a: Names, b: Names) -> float:
    return cond_mutual_information(joint, a, b, ())


_ATOM = re.compile(r"^\s*([IH])\(([^;|()]+)(?:;([^|()]+))?(?:\|([^()]+))?\)\s*$")


def atom_value(joint: JointDistribution, label: str) -> float:
    """
    Evaluate an atom label such as "I(Y1;U1c|U2c)" or "H(Y1|X2)".
    Variable groups are comma separated.
    """
    match = _ATOM.match(label)
    if not match:
        raise ChannelError(f"cannot parse atom {label!r}")
    kind, first, second, given = match.groups()
    given = given or ""
    if kind == "I":
        if second is None:
            raise ChannelError(f"mutual information atom {label!r} needs two groups")
        return cond_mutual_information(joint, first, second, given)
    if second is not None:
        raise ChannelError(f"entropy atom {label!r} takes one group")
    return cond_entropy(joint, first, given)


# ============================================================================
# CHANNELS
# ============================================================================

INPUT_NAMES = ("X1", "X2")
AUX_NAMES = ("U1c", "U2c", "X1", "X2")
OUTPUT_NAMES = ("Y1", "Y2")


class ChannelFile(BaseModel):
    """On-disk channel: {"sizes": [|X1|, |X2|, |Y1|, |Y2|], "transition": [x1][x2][y1][y2]}."""
    model_config = ConfigDict(extra="forbid")
    sizes: List[int] = Field(min_length=4, max_length=4)
    transition: List[List[List[List[float]]]]


@dataclass(frozen=True, eq=False)
class Dmc:
    """Transition tensor P(y1, y2 | x1, x2)."""
    transition: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.transition, dtype=float)
        if w.ndim != 4 or min(w.shape) < 1:
            raise ChannelError(f"transition must be a 4-axis tensor, got shape {w.shape}")
        if np.any(w < -PROB_TOL) or np.any(w > 1.0 + PROB_TOL):
            raise ChannelError("transition entries must lie in [0, 1]")
        sums = w.sum(axis=(2, 3))
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            x1, x2 = bad[0]
            raise ChannelError(f"P(.,.|x1={x1},x2={x2}) sums to {sums[x1, x2]!r}, not 1")
        w = np.clip(w, 0.0, 1.0)
        w.setflags(write=False)
        object.__setattr__(self, "transition", w)

    @property
    def sizes(self) -> Tuple[int, int, int, int]:
        return tuple(int(s) for s in self.transition.shape)

    @property
    def input_cells(self) -> int:
        return self.sizes[0] * self.sizes[1]

    def y1_law(self) -> np.ndarray:
        return self.transition.sum(axis=3)

    def y2_law(self) -> np.ndarray:
        return self.transition.sum(axis=2)

    @classmethod
    def from_marginals(cls, y1_law: np.ndarray, y2_law: np.ndarray) -> "Dmc":
        """Outputs conditionally independent given the inputs."""
        y1_law, y2_law = np.asarray(y1_law, float), np.asarray(y2_law, float)
        if y1_law.shape[:2] != y2_law.shape[:2]:
            raise ChannelError("output laws disagree on input alphabets")
        return cls(y1_law[:, :, :, None] * y2_law[:, :, None, :])

    @classmethod
    def from_functions(cls, sizes: Sequence[int],
                       y1_fn: Callable[[int, int], int],
                       y2_fn: Callable[[int, int], int]) -> "Dmc":
        """Deterministic channel with y1 = y1_fn(x1, x2), y2 = y2_fn(x1, x2)."""
        w = np.zeros(tuple(sizes))
        for x1 in range(sizes[0]):
            for x2 in range(sizes[1]):
                w[x1, x2, y1_fn(x1, x2), y2_fn(x1, x2)] = 1.0
        return cls(w)

    @classmethod
    def from_dict(cls, data: Dict) -> "Dmc":
        parsed = ChannelFile.model_validate(data)
        try:
            w = np.array(parsed.transition, dtype=float)
        except ValueError as e:
            raise ChannelError(f"transition: ragged nested arrays ({e})")
        if w.ndim != 4 or tuple(w.shape) != tuple(parsed.sizes):
            raise ChannelError(f"transition shape {w.shape} does not match sizes {parsed.sizes}")
        return cls(w)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Dmc":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> Dict:
        return {"sizes": list(self.sizes), "transition": self.transition.tolist()}


def random_semideterministic_channel(rng: np.random.Generator, x1_size: int = 2, x2_size: int = 2,
                                     y1_size: int = 2, y2_size: int = 3,
                                     invertible: bool = True) -> Dmc:
    """
    Y1 = f(X1, X2) drawn at random, Y2 from Dirichlet(1) rows. With
    invertible=True, f(., x2) is injective for every x2.
    """
    if invertible and y1_size < x1_size:
        raise ChannelError("an injective Y1 map needs |Y1| >= |X1|")
    f = np.zeros((x1_size, x2_size), dtype=int)
    for x2 in range(x2_size):
        if invertible:
            f[:, x2] = rng.permutation(y1_size)[:x1_size]
        else:
            f[:, x2] = rng.integers(0, y1_size, size=x1_size)
    y1_law = np.zeros((x1_size, x2_size, y1_size))
    for x1 in range(x1_size):
        for x2 in range(x2_size):
            y1_law[x1, x2, f[x1, x2]] = 1.0
    y2_law = rng.dirichlet(np.ones(y2_size), size=(x1_size, x2_size))
    return Dmc.from_marginals(y1_law, y2_law)


def channel_joint(channel: Dmc, inputs: JointDistribution) -> JointDistribution:
    """Joint law of (X1, X2, Y1, Y2)."""
    if set(inputs.names) != set(INPUT_NAMES):
        raise ChannelError(f"input law must be over {INPUT_NAMES}, got {inputs.names}")
    p = inputs.probabilities(INPUT_NAMES)
    if p.shape != channel.sizes[:2]:
        raise ChannelError(f"dimension mismatch: input {p.shape} vs channel {channel.sizes[:2]}")
    return JointDistribution(INPUT_NAMES + OUTPUT_NAMES, p[:, :, None, None] * channel.transition)


def auxiliary_joint(channel: Dmc, joint: JointDistribution) -> JointDistribution:
    """Joint law of (U1c, U2c, X1, X2, Y1, Y2); outputs depend on the inputs only."""
    if set(joint.names) != set(AUX_NAMES):
        raise ChannelError(f"auxiliary law must be over {AUX_NAMES}, got {joint.names}")
    p = joint.probabilities(AUX_NAMES)
    if p.shape[2:] != channel.sizes[:2]:
        raise ChannelError(f"dimension mismatch: inputs {p.shape[2:]} vs channel {channel.sizes[:2]}")
    return JointDistribution(AUX_NAMES + OUTPUT_NAMES,
                             p[:, :, :, :, None, None] * channel.transition[None, None])


def auxiliary_cardinality_caps(channel: Dmc) -> Tuple[int, int]:
    """Search caps (|U1c|, |U2c|) = (|Y1|, |X2| + 1)."""
    return channel.sizes[2], channel.sizes[1] + 1


def is_semideterministic(channel: Dmc) -> bool:
    """Y1 is a function of (X1, X2)."""
    law = channel.y1_law()
    return bool(np.all((np.abs(law) <= PROB_TOL) | (np.abs(law - 1.0) <= PROB_TOL)))


def y1_function(channel: Dmc) -> np.ndarray:
    """The map (x1, x2) -> y1 of a semi-deterministic channel."""
    if not is_semideterministic(channel):
        raise ChannelError("channel is not semi-deterministic: Y1 is not a function of (X1, X2)")
    return np.argmax(channel.y1_law(), axis=2)


# ============================================================================
# GRIDS
# ============================================================================

def grid_size(cells: int, steps: int) -> int:
    return math.comb(steps + cells - 1, cells - 1)


def check_grid(cells: int, steps: int, max_points: Optional[int] = None) -> None:
    if steps < 1:
        raise ChannelError("grid_steps must be positive")
    limit = max_points if max_points is not None else get_config().grids.max_grid_points
    if steps ** (cells - 1) > limit:
        raise GridTooLargeError(
            f"grid_steps={steps} over {cells} cells needs {steps}^{cells - 1} points "
            f"(limit {limit}); use a coarser grid"
        )


def simplex_grid(cells: int, steps: int, max_points: Optional[int] = None) -> np.ndarray:
    """
    All compositions of `steps` into `cells` nonnegative parts, divided by
    steps, in lexicographic order of the bar positions.
    """
    check_grid(cells, steps, max_points)
    if cells == 1:
        return np.ones((1, 1))
    bars = np.array(list(combinations(range(steps + cells - 1), cells - 1)), dtype=int)
    padded = np.hstack([
        np.full((len(bars), 1), -1),
        bars,
        np.full((len(bars), 1), steps + cells - 1),
    ])
    return (np.diff(padded, axis=1) - 1) / steps


def input_grid(channel: Dmc, grid_steps: int, max_points: Optional[int] = None) -> List[JointDistribution]:
    shape = channel.sizes[:2]
    return [JointDistribution(INPUT_NAMES, row.reshape(shape))
            for row in simplex_grid(channel.input_cells, grid_steps, max_points)]


# ============================================================================
# BOUNDS
# ============================================================================

@dataclass(frozen=True)
class BoundTriple:
    """Right-hand sides R1 <= r1_y1, R1 <= r1_y2, R1 + R2 <= sum_y2."""
    r1_y1: float
    r1_y2: float
    sum_y2: float

    def region(self) -> RateRegion:
        return RateRegion([
            Halfspace(1.0, 0.0, self.r1_y1),
            Halfspace(1.0, 0.0, self.r1_y2),
            Halfspace(1.0, 1.0, self.sum_y2),
        ])

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.r1_y1, self.r1_y2, self.sum_y2


@dataclass(frozen=True)
class InnerBoundValues:
    """The five superposition/binning bounds, in canonical order."""
    r1_y1: float
    r1_y2: float
    sum_y1: float
    sum_y2: float
    two_r1_sum: float

    def as_list(self) -> List[float]:
        return [self.r1_y1, self.r1_y2, self.sum_y1, self.sum_y2, self.two_r1_sum]

    def region(self) -> RateRegion:
        """Origin only when a bound is negative (binning cannot be met)."""
        if min(self.as_list()) < -PROB_TOL:
            return RateRegion.origin()
        return RateRegion([
            Halfspace(1.0, 0.0, max(self.r1_y1, 0.0)),
            Halfspace(1.0, 0.0, max(self.r1_y2, 0.0)),
            Halfspace(1.0, 1.0, max(self.sum_y1, 0.0)),
            Halfspace(1.0, 1.0, max(self.sum_y2, 0.0)),
            Halfspace(2.0, 1.0, max(self.two_r1_sum, 0.0)),
        ])


def outer_bound_point(channel: Dmc, inputs: JointDistribution) -> BoundTriple:
    joint = channel_joint(channel, inputs)
    return BoundTriple(
        cond_mutual_information(joint, "Y1", "X1", "X2"),
        cond_mutual_information(joint, "Y2", "X1", "X2"),
        cond_mutual_information(joint, "Y2", "X1,X2"),
    )


def _semidet_triple(channel: Dmc, inputs: JointDistribution) -> BoundTriple:
    joint = channel_joint(channel, inputs)
    return BoundTriple(
        cond_entropy(joint, "Y1", "X2"),
        cond_mutual_information(joint, "Y2", "X1", "X2"),
        cond_mutual_information(joint, "Y2", "X1,X2"),
    )


def outer_bound_region(channel: Dmc, grid_steps: int, threads: Optional[int] = None,
                       max_points: Optional[int] = None) -> RateRegion:
    """Hull of the outer-bound regions over the input simplex grid."""
    grid = input_grid(channel, grid_steps, max_points)
    logger.info(f"outer bound: {len(grid)} input laws (grid {grid_steps})")
    triples = ordered_map(lambda p: outer_bound_point(channel, p), grid, threads)
    return union_hull([t.region() for t in triples])


def semidet_capacity_region(channel: Dmc, grid_steps: int, threads: Optional[int] = None,
                            max_points: Optional[int] = None) -> RateRegion:
    if not is_semideterministic(channel):
        raise ChannelError("channel is not semi-deterministic: Y1 is not a function of (X1, X2)")
    grid = input_grid(channel, grid_steps, max_points)
    logger.info(f"semi-deterministic capacity: {len(grid)} input laws (grid {grid_steps})")
    triples = ordered_map(lambda p: _semidet_triple(channel, p), grid, threads)
    return union_hull([t.region() for t in triples])


def inner_bound_point(channel: Dmc, joint: JointDistribution) -> InnerBoundValues:
    """Evaluate the five inner-bound right-hand sides under joint x transition."""
    full = auxiliary_joint(channel, joint)
    bounds = th2_expected_bounds()
    labels = sorted({label for row in bounds for label in row.rhs.labels()})
    values = {label: atom_value(full, label) for label in labels}
    return InnerBoundValues(*(row.rhs.evaluate(values) for row in bounds))


def inner_bound_region(channel: Dmc, joints: Iterable[JointDistribution]) -> RateRegion:
    return union_hull([inner_bound_point(channel, j).region() for j in joints])


def inner_bound_search(channel: Dmc, grid_steps: int, u1_size: Optional[int] = None,
                       u2_size: Optional[int] = None, threads: Optional[int] = None,
                       max_points: Optional[int] = None) -> RateRegion:
    """
    Brute-force inner bound over auxiliary laws on a simplex grid, with
    alphabets capped at (|Y1|, |X2| + 1). Only tiny grids pass the guard.
    """
    cap1, cap2 = auxiliary_cardinality_caps(channel)
    u1_size = u1_size or cap1
    u2_size = u2_size or cap2
    if u1_size > cap1 or u2_size > cap2:
        raise ChannelError(f"auxiliary alphabets ({u1_size}, {u2_size}) exceed caps ({cap1}, {cap2})")
    shape = (u1_size, u2_size) + channel.sizes[:2]
    rows = simplex_grid(int(np.prod(shape)), grid_steps, max_points)
    joints = [JointDistribution(AUX_NAMES, row.reshape(shape)) for row in rows]
    logger.info(f"inner bound search: {len(joints)} auxiliary laws of shape {shape}")
    values = ordered_map(lambda j: inner_bound_point(channel, j), joints, threads)
    return union_hull([v.region() for v in values])


def _embedded_joint(inputs: JointDistribution, u1: np.ndarray, u2: np.ndarray,
                    u1_size: int, u2_size: int) -> JointDistribution:
    """(U1c, U2c) = (u1[x1, x2], u2[x1, x2]) deterministically."""
    p = inputs.probabilities(INPUT_NAMES)
    table = np.zeros((u1_size, u2_size) + p.shape)
    for x1 in range(p.shape[0]):
        for x2 in range(p.shape[1]):
            table[u1[x1, x2], u2[x1, x2], x1, x2] = p[x1, x2]
    return JointDistribution(AUX_NAMES, table)


def is_strong_interference(channel: Dmc, grid_steps: int, threads: Optional[int] = None,
                           max_points: Optional[int] = None) -> bool:
    """
    I(X1;Y1|X2) <= I(X1;Y2|X2) at every grid law. A grid certificate only,
    not a proof for all distributions.
    """
    grid = input_grid(channel, grid_steps, max_points)
    triples = ordered_map(lambda p: outer_bound_point(channel, p), grid, threads)
    return all(t.r1_y1 <= t.r1_y2 + IDENTITY_TOL for t in triples)


def is_very_strong_interference(channel: Dmc, grid_steps: int, threads: Optional[int] = None,
                                max_points: Optional[int] = None) -> bool:
    """I(Y2;X1,X2) <= I(Y1;X1,X2) at every grid law."""
    def margin(p: JointDistribution) -> float:
        joint = channel_joint(channel, p)
        return mutual_information(joint, "Y1", "X1,X2") - mutual_information(joint, "Y2", "X1,X2")

    grid = input_grid(channel, grid_steps, max_points)
    return all(m >= -IDENTITY_TOL for m in ordered_map(margin, grid, threads))


def scheme_d_region(channel: Dmc, grid_steps: int, threads: Optional[int] = None,
                    max_points: Optional[int] = None) -> RateRegion:
    """Both receivers decode both messages: U2c = X2, U1c = X1."""
    x1_size, x2_size = channel.sizes[:2]
    u1 = np.repeat(np.arange(x1_size)[:, None], x2_size, axis=1)
    u2 = np.repeat(np.arange(x2_size)[None, :], x1_size, axis=0)
    grid = input_grid(channel, grid_steps, max_points)

    def point(p: JointDistribution) -> InnerBoundValues:
        return inner_bound_point(channel, _embedded_joint(p, u1, u2, x1_size, x2_size))

    return union_hull([v.region() for v in ordered_map(point, grid, threads)])


# ============================================================================
# SEMI-DETERMINISTIC VERIFICATION
# ============================================================================

@dataclass
class SemidetReport:
    """Per-grid-point identity checks for the U1c = Y1, U2c constant assignment."""
    grid_steps: int
    points: int = 0
    passed: int = 0
    failed: int = 0
    worst_deviation: float = 0.0
    worst_check: Optional[str] = None
    worst_input: Optional[List[List[float]]] = None

    @property
    def all_passed(self) -> bool:
        return self.points > 0 and self.failed == 0

    def to_dict(self) -> Dict:
        return {
            "grid_steps": self.grid_steps,
            "points": self.points,
            "passed": self.passed,
            "failed": self.failed,
            "all_passed": self.all_passed,
            "worst_deviation": self.worst_deviation,
            "worst_check": self.worst_check,
            "worst_input": self.worst_input,
        }


def semidet_assignment(channel: Dmc, inputs: JointDistribution) -> JointDistribution:
    """U2c constant, U1c = Y1 = f(X1, X2)."""
    f = y1_function(channel)
    return _embedded_joint(inputs, f, np.zeros_like(f), channel.sizes[2], 1)


def semidet_deviations(channel: Dmc, inputs: JointDistribution) -> Dict[str, float]:
    """
    Absolute deviations of the inner-bound values from the capacity
    expressions. The sum check holds exactly when (Y1, X2) determines X1;
    otherwise the Y1 sum bound can be active and the check reports it.
    """
    values = inner_bound_point(channel, semidet_assignment(channel, inputs))
    joint = channel_joint(channel, inputs)
    h_y1 = cond_entropy(joint, "Y1", "X2")
    i_y2_x1 = cond_mutual_information(joint, "Y2", "X1", "X2")
    i_y2_all = mutual_information(joint, "Y2", "X1,X2")
    return {
        "r1_y1": abs(values.r1_y1 - h_y1),
        "r1_y2": abs(values.r1_y2 - i_y2_x1),
        "sum": abs(min(values.sum_y1, values.sum_y2) - i_y2_all),
        "two_r1_sum": abs(values.two_r1_sum - (values.r1_y1 + values.sum_y2)),
    }


def verify_semidet(channel: Dmc, grid_steps: int, tol: float = IDENTITY_TOL,
                   threads: Optional[int] = None, max_points: Optional[int] = None) -> SemidetReport:
    """Check the capacity identities at every grid law; failures are counted, not raised."""
    if not is_semideterministic(channel):
        raise ChannelError("channel is not semi-deterministic: Y1 is not a function of (X1, X2)")
    grid = input_grid(channel, grid_steps, max_points)
    deviations = ordered_map(lambda p: semidet_deviations(channel, p), grid, threads)

    report = SemidetReport(grid_steps=grid_steps)
    for inputs, devs in zip(grid, deviations):
        report.points += 1
        check, worst = max(devs.items(), key=lambda kv: kv[1])
        if worst <= tol:
            report.passed += 1
        else:
            report.failed += 1
        if report.worst_check is None or worst > report.worst_deviation:
            report.worst_deviation = worst
            report.worst_check = check
            report.worst_input = inputs.table.tolist()

    log = logger.info if report.all_passed else logger.warning
    log(f"semi-deterministic check: {report.passed}/{report.points} passed, "
        f"worst {report.worst_deviation:.3e} ({report.worst_check})")
    return report
