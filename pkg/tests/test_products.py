"""Tests for products of step measures and level-set refinements."""
from fractions import Fraction
from math import ceil

import pytest
from hypothesis import given, settings, strategies as st

from src.errors import BoundViolation, NullCarrier, OverlappingCells, PreconditionViolated
from src.measure_core import AtomSet, Partition, StepMeasure, l1_norm, make_space, refines
from src.products import (
    is_e_constant,
    level_set_refinement,
    oscillation,
    pointwise_product,
    product_gap,
    refinement_error_bound,
    star_product,
)
from tests.conftest import NU, SPACE4, measures, partitions, spaces, spaces_with_measure

UNIFORM4 = SPACE4.measure()


def test_product_with_uniform_is_identity():
    assert pointwise_product(NU, UNIFORM4) == NU


def test_star_product_on_omega():
    assert star_product(NU, UNIFORM4, SPACE4.omega) == Fraction(3, 8)


def test_star_product_null_set():
    space = make_space([0, 1])
    nu = StepMeasure(space, (Fraction(0), Fraction(1)))
    with pytest.raises(NullCarrier):
        star_product(nu, nu, AtomSet.of([0]))


def test_products_differ_on_spread_densities():
    # ρ = λ = ν: (ρλ)(Ω) = Σ f²μ = 1/2 + 1/4 + 1/8, (ρ∗λ)(Ω) = (3/8)²
    assert pointwise_product(NU, NU)(SPACE4.omega) == Fraction(7, 8)
    assert product_gap(NU, NU, SPACE4.omega) == Fraction(7, 8) - Fraction(9, 64)


@given(data=st.data())
def test_products_agree_on_atoms(data):
    space, rho = data.draw(spaces_with_measure())
    lam = StepMeasure.from_density(space, [Fraction(i + 1, 3) for i in range(space.size)])
    for i, w in enumerate(space.weights):
        if w:
            assert product_gap(rho, lam, AtomSet.of([i])) == 0


class TestEConstant:
    def test_oscillation(self):
        # densities 1, −1, 1, 0
        assert oscillation(NU, SPACE4.omega) == 2
        assert oscillation(NU, AtomSet.of([0, 2])) == 0

    def test_certificate(self):
        cells = (AtomSet.of([0, 2]), AtomSet.of([1, 3]))
        cert = is_e_constant(NU, cells, 1)
        assert cert.valid
        assert not is_e_constant(NU, cells, 2).valid
        assert is_e_constant(NU, cells, 2).failing == [AtomSet.of([1, 3])]

    def test_overlapping_cells(self):
        with pytest.raises(OverlappingCells):
            is_e_constant(NU, (AtomSet.of([0, 1]), AtomSet.of([1, 2])), 1)

    def test_null_cell(self):
        space = make_space([0, 1])
        with pytest.raises(NullCarrier):
            is_e_constant(space.measure(), (AtomSet.of([0]),), 1)


@st.composite
def spaces_with_high_atom(draw):
    """(space, ρ, D) where atom 0 is light and its density exceeds B·D for B = 1."""
    D = draw(st.integers(1, 3))
    light = Fraction(1, 2 * (D + 1))
    parts = draw(st.lists(st.integers(1, 6), min_size=1, max_size=4))
    total = sum(parts)
    space = make_space([light] + [(1 - light) * Fraction(p, total) for p in parts])
    rest = draw(st.lists(st.integers(-2, 2), min_size=len(parts), max_size=len(parts)))
    rho = StepMeasure.from_density(space, [D + Fraction(1, 2)] + [Fraction(d, 4) for d in rest])
    return space, rho, D


class TestLevelSets:
    def test_bound_below_norm(self):
        with pytest.raises(BoundViolation):
            level_set_refinement(NU, SPACE4.trivial(), 2, 2, Fraction(1, 2))

    def test_cutoff_below_bd(self):
        with pytest.raises(ValueError):
            level_set_refinement(NU, SPACE4.trivial(), 2, 2, 1, K=Fraction(1))

    def test_no_room_for_a_cell(self):
        with pytest.raises(BoundViolation):
            level_set_refinement(SPACE4.zero(), SPACE4.trivial(), 1, 1, Fraction(1, 4))

    def test_space4(self):
        refined, bad = level_set_refinement(NU, SPACE4.trivial(), 2, 2, 1)
        assert refines(SPACE4.trivial(), refined)
        assert len(bad) == 0
        assert is_e_constant(NU, refined.cells, 2).valid
        assert len(refined) <= 8

    def test_high_atom_shares_the_cell_budget(self):
        # densities −1/2, 1/2 fit one window of width 1; the budget 2BDE = 2 leaves one for {a2}
        space = make_space([Fraction(9, 20), Fraction(9, 20), Fraction(1, 10)])
        rho = StepMeasure.from_density(space, [Fraction(-1, 2), Fraction(1, 2), Fraction(2)])
        refined, bad = level_set_refinement(rho, space.trivial(), 1, 1, 1)
        assert refined == Partition.of([[0, 1], [2]])
        assert bad == Partition.of([[2]])

    def test_missed_mass_joins_the_high_cell(self):
        # −1 and 1/4 need two windows; with a high atom only one is left
        space = make_space([Fraction(1, 10), Fraction(8, 10), Fraction(1, 10)])
        rho = StepMeasure.from_density(space, [Fraction(-1), Fraction(1, 4), Fraction(3)])
        refined, bad = level_set_refinement(rho, space.trivial(), 1, 1, 1)
        assert len(refined) == 2
        assert bad == Partition.of([[0, 2]])
        assert space.mu(bad) < 1

    @settings(max_examples=100)
    @given(data=st.data(), E=st.integers(1, 4), D=st.integers(1, 4))
    def test_refinement_properties(self, data, E, D):
        space = data.draw(spaces(allow_null=True))
        rho = data.draw(measures(space))
        B = max(ceil(l1_norm(rho)), 1)
        partition = data.draw(partitions(space))
        refined, bad = level_set_refinement(rho, partition, E, D, B)
        assert refines(partition, refined)
        assert len(refined) <= 2 * B * D * E * len(partition)
        assert all(cell in refined for cell in bad)
        assert space.mu(bad) < Fraction(1, D)
        good = [c for c in refined if c not in bad and space.mu(c) > 0]
        assert is_e_constant(rho, good, E).valid

    @settings(max_examples=100)
    @given(data=st.data(), E=st.integers(1, 3))
    def test_high_atoms(self, data, E):
        space, rho, D = data.draw(spaces_with_high_atom())
        assert l1_norm(rho) <= 1
        partition = data.draw(partitions(space, support=space.omega))
        refined, bad = level_set_refinement(rho, partition, E, D, 1)
        assert refines(partition, refined)
        assert len(refined) <= 2 * D * E * len(partition)
        assert any(0 in cell for cell in bad)
        assert space.mu(bad) < Fraction(1, D)
        good = [c for c in refined if c not in bad]
        assert is_e_constant(rho, good, E).valid


class TestRefinementError:
    def test_constant_density_has_no_error(self):
        coarse = SPACE4.trivial()
        fine, defect = level_set_refinement(NU, coarse, 2, 2, 1)
        lhs, rhs = refinement_error_bound(NU, UNIFORM4, coarse, fine, defect, 2, 2, 1)
        assert lhs == 0
        assert rhs > 0

    def test_not_a_refinement(self):
        coarse = SPACE4.atomic()
        with pytest.raises(PreconditionViolated):
            refinement_error_bound(
                NU, UNIFORM4, coarse, SPACE4.trivial(), Partition(()), 2, 2, 1
            )

    def test_not_e_constant(self):
        coarse = SPACE4.trivial()
        with pytest.raises(PreconditionViolated):
            refinement_error_bound(NU, UNIFORM4, coarse, coarse, Partition(()), 2, 2, 1)

    def test_zero_bound(self):
        # ρ = λ = 0 makes both sides 0, which the strict estimate cannot accept
        zero = SPACE4.zero()
        trivial = SPACE4.trivial()
        with pytest.raises(PreconditionViolated):
            refinement_error_bound(zero, zero, trivial, trivial, Partition(()), 1, 0, 0)

    @settings(max_examples=150, deadline=None)
    @given(
        data=st.data(),
        E=st.integers(1, 4),
        D=st.integers(1, 3),
        C=st.fractions(min_value=0, max_value=3, max_denominator=4),
    )
    def test_estimate_holds(self, data, E, D, C):
        space, rho = data.draw(spaces_with_measure(max_atoms=5, allow_null=True))
        lam = data.draw(measures(space))
        B = max(ceil(l1_norm(rho)), ceil(l1_norm(lam)), 1)
        coarse = data.draw(partitions(space))
        fine, defect = level_set_refinement(rho, coarse, E, D, B)
        lhs, rhs = refinement_error_bound(rho, lam, coarse, fine, defect, E, C, B)
        assert 0 <= lhs < rhs
