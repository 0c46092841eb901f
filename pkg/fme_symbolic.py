"""
Symbolic Fourier-Motzkin elimination over rate variables.

Inequalities are linear in integer-weighted rate variables (R1, R2,
R1c, ...) with right-hand sides that are integer combinations of opaque
information atoms such as "I(Y1;U1c|U2c)". Atoms are never expanded:
no chain rule, no Shannon inequalities. Redundancy is removed only by
the exact patterns implemented in prune().

The canned pre-elimination system of the common-cognitive-message
inner bound lives here too; derive_th2() turns it into the five-bound
achievable region and checks the result against the expected bounds.
"""

import json
import math
import logging
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linprog

from rate_region import Halfspace, RateRegion


logger = logging.getLogger(__name__)


class SymbolicSystemError(ValueError):
    """Raised for malformed systems, cyclic substitutions and derivation mismatches."""


# ============================================================================
# ATOMS AND EXPRESSIONS
# ============================================================================

@dataclass(frozen=True, order=True)
class InfoAtom:
    """An opaque information quantity, identified by its label."""
    label: str

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label.strip():
            raise SymbolicSystemError("atom label must be a non-empty string")

    def __str__(self) -> str:
        return self.label


def _canonical(pairs: Iterable[Tuple[object, int]]) -> Tuple:
    merged: Dict[object, int] = {}
    for key, coeff in pairs:
        if isinstance(coeff, bool) or int(coeff) != coeff:
            raise SymbolicSystemError(f"coefficient of {key} must be an integer, got {coeff!r}")
        merged[key] = merged.get(key, 0) + int(coeff)
    return tuple(sorted((k, c) for k, c in merged.items() if c != 0))


@dataclass(frozen=True)
class LinearExpr:
    """Integer combination of atoms; zero terms dropped, sorted by label."""
    terms: Tuple[Tuple[InfoAtom, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _canonical(self.terms))

    @classmethod
    def of(cls, coeffs: Mapping[Union[str, InfoAtom], int]) -> "LinearExpr":
        return cls(tuple(
            (k if isinstance(k, InfoAtom) else InfoAtom(k), c) for k, c in coeffs.items()
        ))

    @classmethod
    def atom(cls, label: str, coeff: int = 1) -> "LinearExpr":
        return cls(((InfoAtom(label), coeff),))

    def labels(self) -> List[str]:
        return [a.label for a, _ in self.terms]

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        return LinearExpr(self.terms + other.terms)

    def __neg__(self) -> "LinearExpr":
        return LinearExpr(tuple((a, -c) for a, c in self.terms))

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        return self + (-other)

    def __mul__(self, k: int) -> "LinearExpr":
        return LinearExpr(tuple((a, c * k) for a, c in self.terms))

    __rmul__ = __mul__

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = 0.0
        for atom, coeff in self.terms:
            if atom.label not in values:
                raise SymbolicSystemError(f"no value for atom {atom.label}")
            total += coeff * float(values[atom.label])
        return total

    def relabel(self, aliases: Mapping[str, str]) -> "LinearExpr":
        return LinearExpr(tuple((InfoAtom(aliases.get(a.label, a.label)), c) for a, c in self.terms))

    def to_dict(self) -> Dict[str, int]:
        return {a.label: c for a, c in self.terms}

    def __str__(self) -> str:
        return _format_terms([(a.label, c) for a, c in self.terms]) or "0"


def _format_terms(pairs: Sequence[Tuple[str, int]]) -> str:
    text = ""
    for name, coeff in pairs:
        magnitude = abs(coeff)
        body = name if magnitude == 1 else f"{magnitude}*{name}"
        if not text:
            text = body if coeff > 0 else f"-{body}"
        else:
            text += f" + {body}" if coeff > 0 else f" - {body}"
    return text


# ============================================================================
# INEQUALITIES AND SYSTEMS
# ============================================================================

@dataclass(frozen=True)
class SymbolicInequality:
    """sum(coeff * rate) <= rhs."""
    rates: Tuple[Tuple[str, int], ...]
    rhs: LinearExpr = field(default_factory=LinearExpr)

    def __post_init__(self):
        object.__setattr__(self, "rates", _canonical(self.rates))

    @classmethod
    def of(cls, rates: Mapping[str, int], rhs: Mapping[str, int] = None) -> "SymbolicInequality":
        return cls(tuple(rates.items()), LinearExpr.of(rhs or {}))

    @property
    def rate_coeffs(self) -> Dict[str, int]:
        return dict(self.rates)

    def coeff(self, var: str) -> int:
        return self.rate_coeffs.get(var, 0)

    def variables(self) -> List[str]:
        return [v for v, _ in self.rates]

    def is_tautology(self) -> bool:
        return not self.rates and self.rhs.is_zero()

    def __add__(self, other: "SymbolicInequality") -> "SymbolicInequality":
        return SymbolicInequality(self.rates + other.rates, self.rhs + other.rhs)

    def __sub__(self, other: "SymbolicInequality") -> "SymbolicInequality":
        return self + other.scaled(-1)

    def scaled(self, k: int) -> "SymbolicInequality":
        return SymbolicInequality(tuple((v, c * k) for v, c in self.rates), self.rhs * k)

    def normalized(self) -> "SymbolicInequality":
        """Divide through by the gcd of every coefficient."""
        coeffs = [abs(c) for _, c in self.rates] + [abs(c) for _, c in self.rhs.terms]
        divisor = reduce(math.gcd, coeffs, 0)
        if divisor <= 1:
            return self
        return SymbolicInequality(
            tuple((v, c // divisor) for v, c in self.rates),
            LinearExpr(tuple((a, c // divisor) for a, c in self.rhs.terms)),
        )

    def relabel(self, aliases: Mapping[str, str]) -> "SymbolicInequality":
        return SymbolicInequality(self.rates, self.rhs.relabel(aliases))

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {"rates": dict(self.rates), "rhs": self.rhs.to_dict()}

    def format(self, order: Optional[Sequence[str]] = None) -> str:
        rates = self.rates
        if order:
            rank = {v: i for i, v in enumerate(order)}
            rates = tuple(sorted(rates, key=lambda vc: (rank.get(vc[0], len(rank)), vc[0])))
        return f"{_format_terms(rates) or '0'} <= {self.rhs}"

    def __str__(self) -> str:
        return self.format(RATE_ORDER)


@dataclass(frozen=True)
class Substitution:
    """target = sum(parts); the part `solve_for` (default: last) is eliminated in favour of target."""
    target: str
    parts: Tuple[str, ...]
    solve_for: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise SymbolicSystemError(f"substitution for {self.target} has no parts")
        if self.target in self.parts:
            raise SymbolicSystemError(f"substitution {self.target} refers to itself")
        if self.solve_for is not None and self.solve_for not in self.parts:
            raise SymbolicSystemError(f"{self.solve_for} is not a part of {self.target}")
        if self.solve_for is None:
            object.__setattr__(self, "solve_for", self.parts[-1])

    @property
    def solved(self) -> str:
        return self.solve_for

    def replacement(self) -> Dict[str, int]:
        """Expression for the solved part in terms of target and the other parts."""
        expr = {self.target: 1}
        for part in self.parts:
            if part != self.solved:
                expr[part] = expr.get(part, 0) - 1
        return expr

    def to_dict(self) -> Dict[str, object]:
        return {"target": self.target, "parts": list(self.parts), "solve_for": self.solved}

    def __str__(self) -> str:
        return f"{self.target} = {' + '.join(self.parts)}"


@dataclass(frozen=True)
class SymbolicSystem:
    """Rate variables, inequalities over them, and pending substitutions."""
    variables: Tuple[str, ...]
    inequalities: Tuple[SymbolicInequality, ...] = ()
    substitutions: Tuple[Substitution, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "substitutions", tuple(self.substitutions))
        if len(set(self.variables)) != len(self.variables):
            raise SymbolicSystemError("duplicate variable names")
        known = set(self.variables)
        for index, ineq in enumerate(self.inequalities):
            for var in ineq.variables():
                if var not in known:
                    raise SymbolicSystemError(f"inequalities[{index}] uses unknown variable {var}")
        for sub in self.substitutions:
            for var in (sub.target,) + sub.parts:
                if var not in known:
                    raise SymbolicSystemError(f"substitution {sub} uses unknown variable {var}")

    def atoms(self) -> List[str]:
        labels = set()
        for ineq in self.inequalities:
            labels.update(ineq.rhs.labels())
        return sorted(labels)

    def describe(self) -> str:
        return "\n".join(ineq.format(self.variables) for ineq in self.inequalities)


RATE_ORDER = ("R1", "R2", "R1c", "R1cp", "R2c", "R2p")


# ============================================================================
# OPERATIONS
# ============================================================================

def apply_substitutions(system: SymbolicSystem) -> SymbolicSystem:
    """
    Rewrite the system in the substitution targets plus the remaining
    auxiliaries; each solved part is replaced by its expression.
    """
    if not system.substitutions:
        return system

    replacements: Dict[str, Dict[str, int]] = {}
    for sub in system.substitutions:
        if sub.solved in replacements:
            raise SymbolicSystemError(f"{sub.solved} is solved by more than one substitution")
        replacements[sub.solved] = sub.replacement()

    def expand(var: str, trail: Tuple[str, ...]) -> Dict[str, int]:
        if var in trail:
            raise SymbolicSystemError("cyclic substitution: " + " -> ".join(trail + (var,)))
        if var not in replacements:
            return {var: 1}
        out: Dict[str, int] = {}
        for inner, coeff in replacements[var].items():
            for leaf, leaf_coeff in expand(inner, trail + (var,)).items():
                out[leaf] = out.get(leaf, 0) + coeff * leaf_coeff
        return out

    resolved = {var: expand(var, ()) for var in replacements}

    rewritten = []
    for ineq in system.inequalities:
        pairs: List[Tuple[str, int]] = []
        for var, coeff in ineq.rates:
            for leaf, leaf_coeff in resolved.get(var, {var: 1}).items():
                pairs.append((leaf, coeff * leaf_coeff))
        rewritten.append(SymbolicInequality(tuple(pairs), ineq.rhs))

    targets: List[str] = []
    for sub in system.substitutions:
        if sub.target not in targets:
            targets.append(sub.target)
    remaining = [v for v in system.variables if v not in resolved and v not in targets]
    logger.debug(f"substituted {sorted(resolved)}; retained {targets + remaining}")
    return SymbolicSystem(tuple(targets + remaining), tuple(rewritten), ())


def eliminate(system: SymbolicSystem, var: str) -> SymbolicSystem:
    """One Fourier-Motzkin step: pair every upper bound on var with every lower bound."""
    if var not in system.variables:
        raise SymbolicSystemError(f"unknown variable {var}")
    for sub in system.substitutions:
        if var == sub.target or var in sub.parts:
            raise SymbolicSystemError(f"apply substitutions before eliminating {var}")

    upper, lower, passing = [], [], []
    for ineq in system.inequalities:
        c = ineq.coeff(var)
        if c > 0:
            upper.append(ineq)
        elif c < 0:
            lower.append(ineq)
        else:
            passing.append(ineq)

    combined = []
    for p in upper:
        a = p.coeff(var)
        for n in lower:
            b = -n.coeff(var)
            row = (p.scaled(b) + n.scaled(a)).normalized()
            if not row.is_tautology():
                combined.append(row)

    logger.debug(f"eliminate {var}: {len(upper)} upper x {len(lower)} lower -> {len(combined)} new")
    return SymbolicSystem(
        tuple(v for v in system.variables if v != var),
        tuple(passing + combined),
        system.substitutions,
    )


def prune(system: SymbolicSystem,
          assumed_nonneg: Sequence[LinearExpr] = ()) -> SymbolicSystem:
    """
    Remove (i) duplicates, (ii) any P with P = Q + R for two other kept
    inequalities (rates and right-hand sides both), (iii) any P dominated
    by a Q with the same rates where rhs(P) - rhs(Q) is assumed nonnegative.
    """
    kept = list(dict.fromkeys(system.inequalities))
    removed = len(system.inequalities) - len(kept)

    changed = True
    while changed:
        changed = False
        for index, p in enumerate(kept):
            others = kept[:index] + kept[index + 1:]
            pool = set(others)
            if any((p - q) != q and (p - q) in pool for q in others):
                kept.pop(index)
                removed += 1
                changed = True
                break

    nonneg = set(assumed_nonneg)
    changed = True
    while changed:
        changed = False
        for index, p in enumerate(kept):
            if any(q is not p and q.rates == p.rates and (p.rhs - q.rhs) in nonneg for q in kept):
                kept.pop(index)
                removed += 1
                changed = True
                break

    if removed:
        logger.debug(f"prune removed {removed} inequalities")
    return SymbolicSystem(system.variables, tuple(kept), system.substitutions)


def relabel_atoms(system: SymbolicSystem, aliases: Mapping[str, str]) -> SymbolicSystem:
    """Rename atoms; coefficients of atoms that become identical merge."""
    return SymbolicSystem(
        system.variables,
        tuple(ineq.relabel(aliases) for ineq in system.inequalities),
        system.substitutions,
    )


# ============================================================================
# CANNED INNER-BOUND SYSTEM
# ============================================================================

BINNING = "I(U1c;X2|U2c)"

# X1 is a deterministic function of (U1c, U2c, X2) and (U1c, U2c) -> (X1, X2) -> (Y1, Y2)
# is Markov, so these Y2 atoms equal their X1 forms.
TH2_ATOM_ALIASES = {
    "I(Y2;U1c,U2c,X2)": "I(Y2;X1,X2)",
    "I(Y2;U1c,X2|U2c)": "I(Y2;X1,X2|U2c)",
    "I(Y2;U1c|X2,U2c)": "I(Y2;X1|X2,U2c)",
}

TH2_ELIMINATION_ORDER = ("R1cp", "R2c")


def th2_pre_fme_system() -> SymbolicSystem:
    """Superposition/binning scheme before elimination; R1cp is the binning rate."""
    ineq = SymbolicInequality.of
    return SymbolicSystem(
        variables=("R1", "R2", "R1c", "R1cp", "R2c", "R2p"),
        inequalities=(
            ineq({"R1cp": -1}, {BINNING: -1}),
            ineq({"R1c": 1, "R1cp": 1, "R2c": 1}, {"I(Y1;U1c,U2c)": 1}),
            ineq({"R1c": 1, "R1cp": 1}, {"I(Y1;U1c|U2c)": 1}),
            ineq({"R2c": 1, "R1c": 1, "R1cp": 1, "R2p": 1}, {"I(Y2;U1c,U2c,X2)": 1, BINNING: 1}),
            ineq({"R1c": 1, "R1cp": 1, "R2p": 1}, {"I(Y2;U1c,X2|U2c)": 1, BINNING: 1}),
            ineq({"R1c": 1, "R1cp": 1}, {"I(Y2;U1c|X2,U2c)": 1, BINNING: 1}),
            ineq({"R2p": 1}, {"I(Y2;X2|U1c,U2c)": 1, BINNING: 1}),
        ),
        substitutions=(
            Substitution("R1", ("R1c",)),
            Substitution("R2", ("R2c", "R2p"), solve_for="R2p"),
        ),
    )


def th2_expected_bounds() -> Tuple[SymbolicInequality, ...]:
    """The five achievable-region bounds, in canonical order."""
    ineq = SymbolicInequality.of
    return (
        ineq({"R1": 1}, {"I(Y1;U1c|U2c)": 1, BINNING: -1}),
        ineq({"R1": 1}, {"I(Y2;X1|X2,U2c)": 1}),
        ineq({"R1": 1, "R2": 1}, {"I(Y1;U1c,U2c)": 1, "I(Y2;X2|U1c,U2c)": 1}),
        ineq({"R1": 1, "R2": 1}, {"I(Y2;X1,X2)": 1}),
        ineq({"R1": 2, "R2": 1}, {"I(Y1;U1c,U2c)": 1, "I(Y2;X1,X2|U2c)": 1, BINNING: -1}),
    )


def th2_assumed_nonneg(system: SymbolicSystem) -> List[LinearExpr]:
    """Every mutual-information atom is nonnegative."""
    return [LinearExpr.atom(label) for label in system.atoms()]


def derive_th2(order: Sequence[str] = TH2_ELIMINATION_ORDER) -> SymbolicSystem:
    """
    Substitute R1 = R1c and R2 = R2c + R2p, eliminate the auxiliaries,
    prune, and check the result equals the expected five bounds.
    """
    system = apply_substitutions(th2_pre_fme_system())
    for var in order:
        system = eliminate(system, var)
    system = prune(system, th2_assumed_nonneg(system))
    system = relabel_atoms(system, TH2_ATOM_ALIASES)

    expected = th2_expected_bounds()
    got = set(system.inequalities)
    missing = [e for e in expected if e not in got]
    extra = [g for g in system.inequalities if g not in set(expected)]
    if missing or extra:
        lines = ["derived region does not match the expected five bounds"]
        lines += [f"  missing: {m}" for m in missing]
        lines += [f"  extra:   {e}" for e in extra]
        raise SymbolicSystemError("\n".join(lines))

    logger.info(f"derived {len(expected)} inner-bound inequalities over (R1, R2)")
    return SymbolicSystem(("R1", "R2"), expected)


# ============================================================================
# NUMERIC EVALUATION
# ============================================================================

def evaluate_system(system: SymbolicSystem,
                    atom_values: Mapping[str, float]) -> List[Tuple[Dict[str, int], float]]:
    """Numeric (rate coefficients, bound) rows for an atom assignment."""
    return [(ineq.rate_coeffs, ineq.rhs.evaluate(atom_values)) for ineq in system.inequalities]


def to_rate_region(system: SymbolicSystem, atom_values: Mapping[str, float],
                   tol: float = 1e-12) -> RateRegion:
    """
    Numeric region of a system over (R1, R2). When a bound excludes the
    origin the scheme cannot run at this assignment and only the origin
    is returned.
    """
    extra = set(system.variables) - {"R1", "R2"}
    if extra:
        raise SymbolicSystemError(f"eliminate {sorted(extra)} before building a region")
    halfspaces = []
    for rates, bound in evaluate_system(system, atom_values):
        if bound < -tol:
            logger.debug(f"bound {bound:.3g} excludes the origin; keeping the origin only")
            return RateRegion.origin()
        if not rates:
            continue
        halfspaces.append(Halfspace(float(rates.get("R1", 0)), float(rates.get("R2", 0)), max(bound, 0.0)))
    return RateRegion(halfspaces)


def _lp_rows(system: SymbolicSystem, atom_values: Mapping[str, float],
             columns: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.zeros((len(system.inequalities), len(columns)))
    bounds = np.zeros(len(system.inequalities))
    index = {v: i for i, v in enumerate(columns)}
    for r, (rates, bound) in enumerate(evaluate_system(system, atom_values)):
        for var, coeff in rates.items():
            rows[r, index[var]] = coeff
        bounds[r] = bound
    return rows, bounds


def is_feasible_point(system: SymbolicSystem, atom_values: Mapping[str, float],
                      rates: Mapping[str, float], tol: float = 1e-9) -> bool:
    """Whether some values of the remaining variables make the given rates feasible."""
    unknown = set(rates) - set(system.variables)
    if unknown:
        raise SymbolicSystemError(f"unknown variables {sorted(unknown)}")
    free = [v for v in system.variables if v not in rates]
    rows, bounds = _lp_rows(system, atom_values, list(system.variables))
    fixed = np.array([rates.get(v, 0.0) for v in system.variables])
    mask = np.array([v in rates for v in system.variables])
    residual = bounds - rows[:, mask] @ fixed[mask] + tol
    if not free:
        return bool(np.all(residual >= 0.0))
    result = linprog(np.zeros(len(free)), A_ub=rows[:, ~mask], b_ub=residual,
                     bounds=[(None, None)] * len(free), method="highs")
    return result.status == 0


def projection_support(system: SymbolicSystem, atom_values: Mapping[str, float],
                       direction: Tuple[float, float],
                       retained: Tuple[str, str] = ("R1", "R2")) -> float:
    """max direction . (R1, R2) over the system intersected with R1, R2 >= 0."""
    columns = list(system.variables)
    rows, bounds = _lp_rows(system, atom_values, columns)
    objective = np.zeros(len(columns))
    for weight, var in zip(direction, retained):
        objective[columns.index(var)] = -weight
    var_bounds = [(0.0, None) if v in retained else (None, None) for v in columns]
    result = linprog(objective, A_ub=rows, b_ub=bounds, bounds=var_bounds, method="highs")
    if result.status == 3:
        return math.inf
    if result.status != 0:
        raise SymbolicSystemError(f"projection LP failed: {result.message}")
    return float(-result.fun)


# ============================================================================
# JSON I/O
# ============================================================================

class _InequalityModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    rates: Dict[str, int]
    rhs: Dict[str, int] = Field(default_factory=dict)


class _SubstitutionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    target: str
    parts: List[str]
    solve_for: Optional[str] = None


class SystemFile(BaseModel):
    """On-disk system format; assumed_nonneg feeds prune()."""
    model_config = ConfigDict(extra="forbid")
    variables: List[str]
    inequalities: List[_InequalityModel]
    substitutions: List[_SubstitutionModel] = Field(default_factory=list)
    assumed_nonneg: List[Dict[str, int]] = Field(default_factory=list)

    def to_system(self) -> SymbolicSystem:
        return SymbolicSystem(
            tuple(self.variables),
            tuple(SymbolicInequality.of(i.rates, i.rhs) for i in self.inequalities),
            tuple(Substitution(s.target, tuple(s.parts), s.solve_for) for s in self.substitutions),
        )

    def nonneg_exprs(self) -> List[LinearExpr]:
        return [LinearExpr.of(e) for e in self.assumed_nonneg]


def system_to_dict(system: SymbolicSystem,
                   assumed_nonneg: Sequence[LinearExpr] = ()) -> Dict[str, object]:
    data: Dict[str, object] = {
        "variables": list(system.variables),
        "inequalities": [ineq.to_dict() for ineq in system.inequalities],
    }
    if system.substitutions:
        data["substitutions"] = [s.to_dict() for s in system.substitutions]
    if assumed_nonneg:
        data["assumed_nonneg"] = [e.to_dict() for e in assumed_nonneg]
    return data


def system_from_dict(data: Mapping[str, object]) -> SymbolicSystem:
    """Parse the JSON form; pydantic ValidationError names the offending field."""
    return SystemFile.model_validate(data).to_system()


def load_system_file(path: Union[str, Path]) -> Tuple[SymbolicSystem, List[LinearExpr]]:
    with open(path, "r") as f:
        parsed = SystemFile.model_validate(json.load(f))
    return parsed.to_system(), parsed.nonneg_exprs()


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    for line in derive_th2().describe().splitlines():
        print(line)
