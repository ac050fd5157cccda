"""Tests for the bound calculus."""
import pytest
from hypothesis import given, settings, strategies as st

from src.bounds import (
    Fgh,
    Lit,
    Ordering,
    Var,
    add,
    certify_iteration_bound,
    closed_form,
    composed_bound,
    dominance_compare,
    evaluate,
    expr,
    fgh_eval,
    fgh_omega,
    final_bound,
    fluctuation_bound,
    growth_class,
    is_poly_exp,
    log2_bounds,
    power,
    regularity_bound,
    regularity_seq_bound,
    render,
    vhs_chain_bound,
    w_iter,
)
from src.errors import UnknownName
from src.regularity import iteration_bound_1d, iteration_bound_seq

SYMBOLIC = {"B": "B", "D": "D", "E": "E"}


class TestClosedForms:
    def test_b0_at_one(self):
        assert evaluate(closed_form("b0", B=1, D=1, E=1)) == 1536
        assert closed_form("𝔟₀", B=1, D=1, E=1) == Lit(1536)

    def test_C_at_one(self):
        assert evaluate(closed_form("C", B=1, E=1)) == 2**29

    def test_a0_folds_at_d_one(self):
        # ⌈log₂ 1⌉ = 0 collapses the exponent
        assert closed_form("a0", B=1, D=1, E=1) == Lit(1)

    def test_a0_stays_symbolic(self):
        huge = closed_form("a0", B=1, D=2, E=1)
        assert evaluate(huge) is None
        assert dominance_compare(huge, 2**100) == Ordering.GREATER

    def test_symbolic_arguments(self):
        b0 = closed_form("b0", **SYMBOLIC)
        assert evaluate(b0, {"B": 2, "D": 1, "E": 1}) == 6144
        assert render(b0) == "𝔟₀(B, D, E)"
        assert render(b0, expand=True) == "1024·D^3·E^2·B^2 + 512·D^2·E^2·B^2"

    def test_matches_runtime_bounds(self):
        assert evaluate(regularity_bound(1, 1, 1)) == iteration_bound_1d(1, 1, 1)
        assert evaluate(regularity_seq_bound(1, 1, 1)) == iteration_bound_seq(1, 1, 1)
        assert evaluate(vhs_chain_bound(1, 1)) == 128
        assert evaluate(fluctuation_bound(2, 1)) == 32

    def test_unknown_name(self):
        with pytest.raises(UnknownName):
            closed_form("zeta", B=1)
        with pytest.raises(UnknownName):
            closed_form("e", a=1, B=1, D=1, E=1)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            closed_form("b0", B=1, D=1)
        with pytest.raises(ValueError):
            closed_form("b0", B=0, D=1, E=1)

    def test_composed_is_symbolic(self):
        bound = composed_bound("i", B=1, D0=1, D1=1, E=1)
        assert evaluate(bound) is None
        assert render(bound).startswith("𝔦(")

    def test_terms(self):
        with pytest.raises(ValueError):
            expr(-1)
        with pytest.raises(TypeError):
            expr(True)


class TestFastGrowing:
    def test_small_values(self):
        assert fgh_eval(0, 7) == Lit(8)
        assert fgh_eval(1, 5) == Lit(10)
        assert fgh_eval(2, 3) == Lit(24)
        assert fgh_eval(5, 1) == Lit(2)
        assert fgh_omega(2) == Lit(8)

    def test_too_large_stays_symbolic(self):
        node = fgh_eval(3, 3)
        assert node == Fgh(3, Lit(3))
        assert evaluate(node) is None

    @given(m=st.integers(0, 20))
    def test_levels_one_and_two(self, m):
        assert evaluate(fgh_eval(1, m)) == 2 * m
        assert evaluate(fgh_eval(2, m)) == m * 2**m

    def test_higher_level_dominates(self):
        m = Var("m")
        assert dominance_compare(Fgh(3, m), Fgh(2, m), {"m": 4}) == Ordering.GREATER
        assert dominance_compare(Fgh(3, m), Fgh(2, m)) == Ordering.UNKNOWN

    def test_log2_bounds(self):
        assert log2_bounds(power(2, 1024)) == (1024.0, 1024.0)
        lo, hi = log2_bounds(Fgh(2, Var("m")), {"m": 100})
        assert lo >= 100 and hi >= lo

    def test_final_bound(self):
        bound = final_bound(1, 1)
        assert evaluate(bound) is None
        assert render(bound) == f"f_ω({2**22 + 5})"


class TestWIterates:
    def test_w0_suc(self):
        assert w_iter(0, "suc", 1, 1, 3) == Lit(4)

    def test_w1_below_f4(self):
        w = w_iter(1, "suc", "B", "E", "m")
        f4 = Fgh(4, add("m", "E", "B", 5))
        assert dominance_compare(w, f4) == Ordering.LESS
        assert dominance_compare(f4, w) == Ordering.GREATER

    def test_w1_against_f3_is_undecided(self):
        w = w_iter(1, "suc", "B", "E", "m")
        assert dominance_compare(w, Fgh(3, add("m", "E", "B", 5))) != Ordering.GREATER

    def test_short_argument_is_undecided(self):
        w = w_iter(1, "suc", "B", "E", "m")
        assert dominance_compare(w, Fgh(4, add("m", "E", 5))) == Ordering.UNKNOWN


class TestCertify:
    def test_exact(self):
        assert certify_iteration_bound(3, 5)
        assert certify_iteration_bound(5, 5)
        assert not certify_iteration_bound(6, 5)

    def test_negative_observed(self):
        assert not certify_iteration_bound(-1, 5)

    def test_against_symbolic(self):
        assert certify_iteration_bound(10**6, closed_form("a0", B=1, D=2, E=1))
        assert not certify_iteration_bound(1, Var("m"))

    @pytest.mark.slow
    @settings(max_examples=10000, deadline=None)
    @given(
        a=st.integers(2, 50),
        k=st.integers(1, 40),
        b=st.integers(2, 50),
        l=st.integers(1, 40),
    )
    def test_dominance_is_sound(self, a, k, b, l):
        verdict = dominance_compare(power(a, k), power(b, l))
        x, y = a**k, b**l
        if verdict == Ordering.LESS:
            assert x < y
        elif verdict == Ordering.GREATER:
            assert x > y
        elif verdict == Ordering.EQUAL:
            assert x == y


class TestGrowth:
    def test_classes(self):
        b0 = closed_form("b0", **SYMBOLIC)
        a0 = closed_form("a0", **SYMBOLIC)
        assert growth_class(b0, ["D"]) == "polynomial"
        assert growth_class(a0, ["B"]) == "exponential"
        assert growth_class(a0, []) == "constant"
        assert growth_class(final_bound("B", "E"), ["B"]) == "beyond elementary"

    def test_theta_is_double_exponential(self):
        theta = closed_form("theta", B="B", D0="D0", D1="D1", E="E")
        assert growth_class(theta, ["D1"]) == "double exponential"

    def test_poly_exp(self):
        assert is_poly_exp(closed_form("b0", **SYMBOLIC), ["D"], ["B", "E"])
        assert not is_poly_exp(closed_form("a0", **SYMBOLIC), ["B"], ["D", "E"])
