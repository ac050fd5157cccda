"""Tests for eventually constant sequences and product grids."""
from fractions import Fraction

import pytest

from src.errors import CertificateMissing, SpaceMismatch
from src.measure_core import StepMeasure, make_space
from src.sequences import DoubleSequence, MeasureSequence, certify_assumptions, constant_sequence, make_double

HALVES = make_space([Fraction(1, 2), Fraction(1, 2)])


def row(*values):
    return StepMeasure(HALVES, tuple(Fraction(v) for v in values))


DRIFT = MeasureSequence((row("1/2", 0), row("1/4", "1/4"), row(0, "1/2")), "drift")


class TestMeasureSequence:
    def test_reads_past_the_end(self):
        assert DRIFT[2] == DRIFT[100] == row(0, "1/2")

    def test_negative_index(self):
        with pytest.raises(IndexError):
            DRIFT[-1]

    def test_empty(self):
        with pytest.raises(ValueError):
            MeasureSequence(())

    def test_settled_from(self):
        assert DRIFT.settled_from == 2
        repeated = MeasureSequence((row(1, 0), row(0, 1), row(0, 1)))
        assert repeated.settled_from == 1
        assert constant_sequence(row(1, 0)).settled_from == 0

    def test_fluctuation_bound(self):
        assert DRIFT.fluctuation_bound == 3

    def test_bound_is_largest_norm(self):
        signed = MeasureSequence((row(1, -1), row(0, 0)))
        assert signed.bound == 2
        assert DRIFT.bound == Fraction(1, 2)

    def test_mixed_spaces(self):
        other = make_space([1])
        with pytest.raises(SpaceMismatch):
            MeasureSequence((row(1, 0), StepMeasure(other, (Fraction(1),))))


class TestDoubleSequence:
    @pytest.fixture
    def grid(self):
        return make_double([row("1/2", "1/2")], [row("3/4", "1/4"), row("1/2", "1/2")])

    def test_default_bound(self, grid):
        assert grid.B == 1

    def test_declared_bound_below_norm(self):
        with pytest.raises(CertificateMissing):
            make_double([row(2, 0)], [row(1, 0)], B=1)

    def test_spaces_must_agree(self):
        other = make_space([1])
        with pytest.raises(SpaceMismatch):
            DoubleSequence(DRIFT, MeasureSequence((StepMeasure(other, (Fraction(1),)),)))

    def test_uniform_factor_is_neutral(self, grid):
        # ρ has density 1, so ρλ = λ
        assert grid.product(0, 0) == row("3/4", "1/4")
        assert grid.product(7, 9) == row("1/2", "1/2")

    def test_rows_and_columns(self, grid):
        assert len(grid.row(0)) == 2
        assert grid.row(0)[1] == grid.product(0, 1)
        assert len(grid.column(1)) == 1
        assert grid.shape == (1, 2)
        assert grid.settled == (0, 1)

    def test_transpose(self, grid):
        flipped = grid.transpose()
        assert flipped.rho is grid.lam
        assert flipped.product(1, 0) == grid.product(0, 1)

    def test_assumptions(self, grid):
        certify_assumptions(grid)
        certify_assumptions(grid, E=4, D=3)
