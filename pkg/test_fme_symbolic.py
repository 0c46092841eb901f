"""
Unit tests for symbolic Fourier-Motzkin elimination.

Validates:
- Substitution (triangular rewriting, cycles)
- Single elimination steps and gcd normalization
- Pruning rules
- Derivation of the five-bound inner region
- Soundness / completeness against LP projections
- JSON format
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from fme_symbolic import (
    LinearExpr, SymbolicInequality, SymbolicSystem, SymbolicSystemError, Substitution,
    apply_substitutions, derive_th2, eliminate, is_feasible_point, load_system_file,
    projection_support, prune, relabel_atoms, system_from_dict, system_to_dict,
    th2_assumed_nonneg, th2_expected_bounds, th2_pre_fme_system, to_rate_region,
    TH2_ATOM_ALIASES,
)
from rate_region import RateRegion, equivalent

logger = logging.getLogger(__name__)

ineq = SymbolicInequality.of


def _random_atoms(rng: np.random.Generator, labels):
    """Values keeping every derived bound nonnegative: the binning atom stays small."""
    values = {label: rng.uniform(0.5, 2.0) for label in labels}
    values["I(U1c;X2|U2c)"] = rng.uniform(0.0, 0.3)
    return values


@pytest.fixture
def substituted():
    return apply_substitutions(th2_pre_fme_system())


class TestExpressions:
    """Atoms, expressions and inequalities."""

    def test_zero_terms_dropped_and_sorted(self):
        expr = LinearExpr.of({"I(B)": 1, "I(A)": 2, "I(C)": 0})
        assert expr.to_dict() == {"I(A)": 2, "I(B)": 1}
        assert (expr - expr).is_zero()

    def test_non_integer_coefficient_rejected(self):
        with pytest.raises(SymbolicSystemError, match="integer"):
            LinearExpr.of({"I(A)": 0.5})

    def test_pretty_print(self):
        row = ineq({"R2": 1, "R1": 1}, {"I(Y1;U1c,U2c)": 1, "I(Y2;X2|U1c,U2c)": 1})
        assert str(row) == "R1 + R2 <= I(Y1;U1c,U2c) + I(Y2;X2|U1c,U2c)"
        assert str(ineq({"R1cp": -1}, {"I(U1c;X2|U2c)": -1})) == "-R1cp <= -I(U1c;X2|U2c)"
        assert str(ineq({"R1": 2, "R2": 1}, {})) == "2*R1 + R2 <= 0"

    def test_unknown_variable_rejected(self):
        with pytest.raises(SymbolicSystemError, match="unknown variable"):
            SymbolicSystem(("x",), (ineq({"y": 1}, {"A": 1}),))


class TestSubstitution:
    """apply_substitutions."""

    def test_single_part(self):
        system = SymbolicSystem(("R1", "R1c"), (ineq({"R1c": 1}, {"A": 1}),),
                                (Substitution("R1", ("R1c",)),))
        out = apply_substitutions(system)
        assert out.variables == ("R1",)
        assert out.inequalities == (ineq({"R1": 1}, {"A": 1}),)

    def test_split_rate(self):
        system = SymbolicSystem(("R2", "R2c", "R2p"), (ineq({"R2p": 1}, {"B": 1}),),
                                (Substitution("R2", ("R2c", "R2p")),))
        out = apply_substitutions(system)
        assert out.variables == ("R2", "R2c")
        assert out.inequalities == (ineq({"R2": 1, "R2c": -1}, {"B": 1}),)

    def test_pre_fme_system_variables(self, substituted):
        assert substituted.variables == ("R1", "R2", "R1cp", "R2c")
        assert not substituted.substitutions
        logger.info("✅ Substitution leaves R1, R2, R1cp, R2c")

    def test_cycle_detected(self):
        system = SymbolicSystem(("x", "y", "z"), (),
                                (Substitution("x", ("z", "y")), Substitution("y", ("z", "x"))))
        with pytest.raises(SymbolicSystemError, match="cyclic"):
            apply_substitutions(system)

    def test_double_solve_rejected(self):
        system = SymbolicSystem(("x", "y", "z"), (),
                                (Substitution("x", ("z",)), Substitution("y", ("z",))))
        with pytest.raises(SymbolicSystemError, match="more than one"):
            apply_substitutions(system)

    def test_self_reference_rejected(self):
        with pytest.raises(SymbolicSystemError):
            Substitution("x", ("x", "y"))


class TestEliminate:
    """Single Fourier-Motzkin steps."""

    def test_chain(self):
        system = SymbolicSystem(("x", "y"), (ineq({"x": 1}, {"A": 1}), ineq({"y": 1, "x": -1}, {"B": 1})))
        out = eliminate(system, "x")
        assert out.variables == ("y",)
        assert out.inequalities == (ineq({"y": 1}, {"A": 1, "B": 1}),)

    def test_lower_bound_only(self):
        system = SymbolicSystem(("x",), (ineq({"x": -1}, {"C": -1}),))
        assert eliminate(system, "x").inequalities == ()

    def test_pass_through(self):
        untouched = ineq({"y": 1}, {"D": 1})
        system = SymbolicSystem(("x", "y"), (untouched, ineq({"x": 1}, {"A": 1})))
        assert eliminate(system, "x").inequalities == (untouched,)

    def test_gcd_normalization(self):
        system = SymbolicSystem(("x", "y"), (ineq({"x": 2, "y": 2}, {"A": 2}), ineq({"x": -2}, {"B": -4})))
        out = eliminate(system, "x")
        assert out.inequalities == (ineq({"y": 1}, {"A": 1, "B": -2}),)

    def test_tautology_dropped(self):
        system = SymbolicSystem(("x",), (ineq({"x": 1}, {"A": 1}), ineq({"x": -1}, {"A": -1})))
        assert eliminate(system, "x").inequalities == ()

    def test_unknown_variable(self, substituted):
        with pytest.raises(SymbolicSystemError, match="unknown variable"):
            eliminate(substituted, "R9")

    def test_variable_removed(self, substituted):
        out = eliminate(substituted, "R1cp")
        assert all(row.coeff("R1cp") == 0 for row in out.inequalities)
        assert "R1cp" not in out.variables


class TestPrune:
    """Redundancy removal."""

    def test_duplicates(self):
        row = ineq({"R1": 1}, {"A": 1})
        out = prune(SymbolicSystem(("R1",), (row, row)))
        assert out.inequalities == (row,)

    def test_sum_pattern(self):
        p = ineq({"R1": 1}, {"A": 1})
        q = ineq({"R2": 1}, {"B": 1})
        total = ineq({"R1": 1, "R2": 1}, {"A": 1, "B": 1})
        out = prune(SymbolicSystem(("R1", "R2"), (p, q, total)))
        assert set(out.inequalities) == {p, q}

    def test_sum_pattern_needs_two_distinct(self):
        p = ineq({"R1": 1}, {"A": 1})
        doubled = ineq({"R1": 2}, {"A": 2})
        out = prune(SymbolicSystem(("R1",), (p, doubled)))
        assert len(out.inequalities) == 2

    def test_dominance(self):
        tight = ineq({"R1": 1}, {"A": 1})
        loose = ineq({"R1": 1}, {"A": 1, "D": 1})
        system = SymbolicSystem(("R1",), (loose, tight))
        assert prune(system).inequalities == (loose, tight)
        assert prune(system, [LinearExpr.atom("D")]).inequalities == (tight,)

    def test_preserves_feasible_set(self):
        rng = np.random.default_rng(5)
        p = ineq({"R1": 1}, {"A": 1})
        q = ineq({"R2": 1}, {"B": 1})
        rows = (p, q, ineq({"R1": 1, "R2": 1}, {"A": 1, "B": 1}), ineq({"R1": 1}, {"A": 1, "D": 1}),
                ineq({"R1": 2, "R2": 1}, {"C": 1}), q)
        system = SymbolicSystem(("R1", "R2"), rows)
        pruned = prune(system, [LinearExpr.atom("D")])
        for _ in range(50):
            values = {k: rng.uniform(0.0, 3.0) for k in "ABCD"}
            assert equivalent(to_rate_region(system, values), to_rate_region(pruned, values), 1e-9)
        logger.info("✅ Pruning preserves the numeric region on 50 assignments")


class TestDerivation:
    """The five-bound inner region."""

    def test_derive_matches_expected(self):
        derived = derive_th2()
        assert derived.variables == ("R1", "R2")
        assert derived.inequalities == th2_expected_bounds()
        assert len(derived.inequalities) == 5
        logger.info("✅ Derived region:\n" + derived.describe())

    def test_expected_bound_text(self):
        text = [str(row) for row in th2_expected_bounds()]
        assert text[0] == "R1 <= -I(U1c;X2|U2c) + I(Y1;U1c|U2c)"
        assert text[2] == "R1 + R2 <= I(Y1;U1c,U2c) + I(Y2;X2|U1c,U2c)"
        assert text[3] == "R1 + R2 <= I(Y2;X1,X2)"

    def test_elimination_order_independent(self, substituted):
        forward = substituted
        for var in ("R1cp", "R2c"):
            forward = eliminate(forward, var)
        backward = substituted
        for var in ("R2c", "R1cp"):
            backward = eliminate(backward, var)
        nonneg = th2_assumed_nonneg(substituted)
        assert set(prune(forward, nonneg).inequalities) == set(prune(backward, nonneg).inequalities)

    def test_reversed_order_derivation(self):
        assert derive_th2(order=("R2c", "R1cp")).inequalities == th2_expected_bounds()

    def test_mismatch_lists_missing_and_extra(self, monkeypatch):
        import fme_symbolic
        wrong = th2_expected_bounds()[:4] + (ineq({"R1": 3}, {"X": 1}),)
        monkeypatch.setattr(fme_symbolic, "th2_expected_bounds", lambda: wrong)
        with pytest.raises(SymbolicSystemError, match="missing") as info:
            derive_th2()
        assert "extra" in str(info.value)


class TestNumericProjection:
    """Elimination against LP projections of the substituted system."""

    @pytest.mark.timeout(120)
    def test_soundness_single_step(self, substituted):
        rng = np.random.default_rng(17)
        reduced = eliminate(substituted, "R1cp")
        for _ in range(100):
            atoms = _random_atoms(rng, substituted.atoms())
            point = {"R1": rng.uniform(0, 2), "R2": rng.uniform(0, 2), "R2c": rng.uniform(-1, 2)}
            if is_feasible_point(substituted, atoms, point):
                assert is_feasible_point(reduced, atoms, point)
            # single-step elimination is exact
            assert is_feasible_point(reduced, atoms, point, tol=1e-7) == \
                is_feasible_point(substituted, atoms, point, tol=1e-7)
        logger.info("✅ Elimination is sound on 100 random points")

    @pytest.mark.timeout(120)
    def test_completeness_support_functions(self, substituted):
        rng = np.random.default_rng(23)
        derived = substituted
        for var in ("R1cp", "R2c"):
            derived = eliminate(derived, var)
        derived = prune(derived, th2_assumed_nonneg(derived))
        directions = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 3.0)]
        for _ in range(25):
            atoms = _random_atoms(rng, substituted.atoms())
            region = to_rate_region(derived, atoms)
            vertices = np.array([p.as_tuple() for p in region.vertices()])
            for d in directions:
                expected = projection_support(substituted, atoms, d)
                assert float(np.max(vertices @ np.array(d))) == pytest.approx(expected, abs=1e-9)
            for r1, r2 in vertices:
                assert is_feasible_point(substituted, atoms, {"R1": r1, "R2": r2})
        logger.info("✅ Derived region equals the LP projection")

    def test_relabel_merges(self):
        system = SymbolicSystem(("R1",), (ineq({"R1": 1}, {"I(Y2;U1c,U2c,X2)": 1, "I(Y2;X1,X2)": 1}),))
        out = relabel_atoms(system, TH2_ATOM_ALIASES)
        assert out.inequalities[0].rhs.to_dict() == {"I(Y2;X1,X2)": 2}

    def test_negative_bound_gives_origin(self):
        system = SymbolicSystem(("R1", "R2"), (ineq({"R1": 1}, {"A": 1}),))
        assert to_rate_region(system, {"A": -0.1}).is_origin()

    def test_missing_atom_value(self):
        system = SymbolicSystem(("R1",), (ineq({"R1": 1}, {"A": 1}),))
        with pytest.raises(SymbolicSystemError, match="no value"):
            to_rate_region(system, {})

    def test_auxiliary_left_over(self, substituted):
        with pytest.raises(SymbolicSystemError, match="eliminate"):
            to_rate_region(substituted, {})


class TestSystemFormat:
    """JSON I/O."""

    def test_canned_file_matches_builder(self):
        path = Path(__file__).parent / "systems" / "th2_pre.json"
        system, nonneg = load_system_file(path)
        assert system == th2_pre_fme_system()
        assert nonneg == []

    def test_dict_round_trip(self):
        system = th2_pre_fme_system()
        data = json.loads(json.dumps(system_to_dict(system)))
        assert system_from_dict(data) == system

    def test_malformed_field_named(self):
        data = system_to_dict(th2_pre_fme_system())
        data["inequalities"][3]["rates"]["R1c"] = "many"
        with pytest.raises(ValidationError) as info:
            system_from_dict(data)
        assert info.value.errors()[0]["loc"][:3] == ("inequalities", 3, "rates")
