"""Tests for the finite atomic measure algebra."""
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from src.errors import (
    ForeignAtoms,
    MeasureError,
    NegativeWeight,
    NotRefinement,
    NullCarrier,
    OverlappingCells,
    SumNotOne,
)
from src.measure_core import (
    ABSOLUTE,
    EMPTY,
    AtomSet,
    Partition,
    StepMeasure,
    bell,
    brute_force_l1,
    density,
    enumerate_between,
    finiteness_chunks,
    interval_size,
    l1_norm,
    make_space,
    measure_eval,
    modulus_of_continuity,
    parent_cell,
    refines,
    restrict,
    small_sets,
)
from tests.conftest import NU, SPACE4, partitions, refinement_pairs, spaces, spaces_with_measure

A1, A2, A3, A4 = (AtomSet(1 << i) for i in range(4))


class TestMakeSpace:
    def test_space4(self):
        assert SPACE4.size == 4
        assert SPACE4.mu(SPACE4.omega) == 1

    def test_sum_not_one(self):
        with pytest.raises(SumNotOne):
            make_space([Fraction(1, 2), Fraction(1, 2), Fraction(1, 4)])

    def test_negative_weight(self):
        with pytest.raises(NegativeWeight):
            make_space([Fraction(3, 2), Fraction(-1, 2)])

    def test_null_atom_permitted(self):
        space = make_space([0, 1])
        assert space.weights == (Fraction(0), Fraction(1))

    def test_string_weights(self):
        space = make_space(["1/3", "2/3"])
        assert space.weights[0] == Fraction(1, 3)

    def test_floats_refused(self):
        with pytest.raises(TypeError):
            make_space([0.5, 0.5])


class TestMeasureEval:
    def test_omega(self):
        assert measure_eval(NU, SPACE4.omega) == Fraction(3, 8)

    def test_empty(self):
        assert measure_eval(NU, EMPTY) == 0

    def test_absolute_partition(self):
        assert measure_eval(NU, Partition.of([[0], [1]]), ABSOLUTE) == Fraction(3, 4)

    def test_foreign_atoms(self):
        with pytest.raises(ForeignAtoms):
            measure_eval(NU, AtomSet(1 << 7))

    @given(data=st.data())
    def test_additivity(self, data):
        """ν(σ∪τ) = ν(σ) + ν(τ) − ν(σ∩τ)."""
        space, nu = data.draw(spaces_with_measure())
        full = (1 << space.size) - 1
        s = AtomSet(data.draw(st.integers(0, full)))
        t = AtomSet(data.draw(st.integers(0, full)))
        assert nu(s | t) == nu(s) + nu(t) - nu(s & t)


class TestRefines:
    def test_trivial_below_atomic(self):
        assert refines(SPACE4.trivial(), SPACE4.atomic())

    def test_atomic_not_below_trivial(self):
        assert not refines(SPACE4.atomic(), SPACE4.trivial())

    def test_unions_must_agree(self):
        assert not refines(Partition.of([[0, 1]]), Partition.of([[0], [1], [2]]))

    def test_accessors(self):
        coarse = Partition.of([[0, 1], [2, 3]])
        fine = SPACE4.atomic()
        assert restrict(fine, AtomSet.of([0, 1])) == Partition.of([[0], [1]])
        assert parent_cell(A3, coarse) == AtomSet.of([2, 3])

    def test_parent_cell_missing(self):
        with pytest.raises(NotRefinement):
            parent_cell(A1, Partition.of([[1]]))

    def test_canonical_order(self):
        assert Partition.of([[2], [0, 1]]) == Partition.of([[0, 1], [2]])

    def test_overlapping_cells_rejected(self):
        with pytest.raises(OverlappingCells):
            Partition.of([[0, 1], [1]])
        with pytest.raises(OverlappingCells):
            Partition.of([[0], []])
        assert issubclass(OverlappingCells, MeasureError)


class TestDensity:
    def test_pair(self):
        assert density(NU, Partition.of([[0, 1]])) == Fraction(1, 3)

    def test_mu_density_is_one(self):
        assert density(SPACE4.measure(), Partition.of([[1, 3]])) == 1

    def test_null_carrier(self):
        space = make_space([0, 1])
        with pytest.raises(NullCarrier):
            density(space.zero(), Partition.of([[0]]))

    @given(data=st.data())
    def test_absolute_density_monotone(self, data):
        """δ_|ν|(𝒜) ≤ δ_|ν|(ℬ) when 𝒜 ⪯ ℬ."""
        space, nu = data.draw(spaces_with_measure())
        coarse, fine = data.draw(refinement_pairs(space))
        assert density(nu, coarse, ABSOLUTE) <= density(nu, fine, ABSOLUTE)

    @given(data=st.data())
    def test_density_bound(self, data):
        """μ(𝒜) ≥ 1/D implies δ_|ν|(𝒜) ≤ D·||ν||."""
        space, nu = data.draw(spaces_with_measure())
        part = data.draw(partitions(space))
        size = space.mu(part)
        D = data.draw(st.integers(1, 20))
        if size >= Fraction(1, D):
            assert density(nu, part, ABSOLUTE) <= D * l1_norm(nu)


class TestL1Norm:
    def test_nu(self):
        assert l1_norm(NU) == Fraction(7, 8)

    def test_mu_and_zero(self):
        assert l1_norm(SPACE4.measure()) == 1
        assert l1_norm(SPACE4.zero()) == 0

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_equals_brute_force_supremum(self, data):
        space, nu = data.draw(spaces_with_measure(max_atoms=5))
        assert l1_norm(nu) == brute_force_l1(nu)

    def test_brute_force_six_atoms(self):
        space = make_space([Fraction(1, 6)] * 6)
        nu = StepMeasure.from_density(space, [1, -2, 3, 0, -1, 2])
        assert brute_force_l1(nu) == l1_norm(nu)


class TestModulus:
    def test_zero_measure(self):
        assert modulus_of_continuity(SPACE4.zero(), 5) == 1

    def test_nu_e8(self):
        assert modulus_of_continuity(NU, 8) == 8

    def test_nu_e1(self):
        assert modulus_of_continuity(NU, 1) == 1

    @given(data=st.data())
    def test_defining_property(self, data):
        """Every set smaller than 1/D has |ν|-mass below 1/E; D−1 fails unless D = 1."""
        space, nu = data.draw(spaces_with_measure(max_atoms=5))
        E = data.draw(st.integers(1, 8))
        D = modulus_of_continuity(nu, E)
        for sigma in small_sets(space, D):
            assert nu.total_variation(sigma) < Fraction(1, E)
        if D > 1:
            assert any(
                nu.total_variation(s) >= Fraction(1, E) for s in small_sets(space, D - 1)
            )


class TestFiniteness:
    @given(data=st.data())
    def test_light_chunks_carry_less_than_one(self, data):
        space, nu = data.draw(spaces_with_measure(max_atoms=6))
        part = data.draw(partitions(space))
        D = modulus_of_continuity(nu, 1)
        chunks = finiteness_chunks(nu, part)
        assert len(chunks) <= 2 * D + 1
        for chunk in chunks:
            if space.mu(chunk) < Fraction(1, D):
                assert measure_eval(nu, chunk, ABSOLUTE) < 1

    def test_light_space_total_below_2d(self):
        space = make_space([Fraction(1, 8)] * 8)
        nu = StepMeasure.from_density(space, [1, -1, 2, 0, 1, -2, 1, 1])
        D = modulus_of_continuity(nu, 1)
        assert measure_eval(nu, space.atomic(), ABSOLUTE) < 2 * D


class TestEnumerateBetween:
    def test_single(self):
        p = Partition.of([[0, 1], [2]])
        assert enumerate_between(p, p) == [p]

    def test_bell_four(self):
        result = enumerate_between(SPACE4.trivial(), SPACE4.atomic(), limit=20)
        assert len(result) == 15 == bell(4)
        assert len(set(result)) == 15
        assert result[0] == SPACE4.trivial()
        assert all(refines(SPACE4.trivial(), p) and refines(p, SPACE4.atomic()) for p in result)

    def test_sampled_endpoints_first(self):
        result = enumerate_between(SPACE4.trivial(), SPACE4.atomic(), limit=5, seed=1)
        assert result[:2] == [SPACE4.trivial(), SPACE4.atomic()]
        assert len(result) == 5

    def test_sampling_is_deterministic(self):
        space = make_space([Fraction(1, 7)] * 7)
        first = enumerate_between(space.trivial(), space.atomic(), limit=30, seed=3)
        again = enumerate_between(space.trivial(), space.atomic(), limit=30, seed=3)
        assert first == again

    def test_not_refinement(self):
        with pytest.raises(NotRefinement):
            enumerate_between(SPACE4.atomic(), SPACE4.trivial())

    @given(data=st.data())
    def test_count_matches_interval_size(self, data):
        space = data.draw(spaces(max_atoms=5))
        coarse, fine = data.draw(refinement_pairs(space))
        assert len(enumerate_between(coarse, fine)) == interval_size(coarse, fine)
