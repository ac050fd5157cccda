"""Tests for metastable convergence and metastable uniform continuity."""
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from src.errors import FluctuationCertificateMissing, PreconditionViolated, SearchExhausted
from src.functionals import Closure, affine
from src.measure_core import EMPTY, AtomSet, StepMeasure, make_space
from src.metastability import (
    DENSITY,
    as_functional,
    bulk_levels,
    cell_stable,
    chain_invariant_holds,
    count_fluctuations,
    first_stable,
    inflated_moduli,
    metastable_partition_bulk,
    metastable_partition_weak,
    msuc_check,
    np_msuc_witness,
    partition_corollary_holds,
    quantitative_vhs,
    require_monotone_window,
    search_metastable_weak,
    set_stable,
    verify_np_msuc,
    weak_holds,
    window_end,
)
from src.sequences import MeasureSequence, make_double
from tests.conftest import measures, spaces

HALVES = make_space([Fraction(1, 2), Fraction(1, 2)])
LEFT, RIGHT = AtomSet.of([0]), AtomSet.of([1])


def row(*values):
    return StepMeasure(HALVES, tuple(Fraction(v) for v in values))


# mass moves from the left atom to the right one and stays from index 2
DRIFT = MeasureSequence((row("1/2", 0), row("1/4", "1/4"), row(0, "1/2")), "drift")


@pytest.fixture
def window():
    return affine(1, 1)


class TestWindows:
    def test_window_end_stops_at_settling(self, window):
        assert window_end(window, DRIFT, 0) == 1
        assert window_end(window, DRIFT, 5) == 5

    def test_set_stable(self):
        assert set_stable(DRIFT, LEFT, 2, 0, 1)
        assert not set_stable(DRIFT, LEFT, 2, 0, 2)
        # ν_m(Ω) is 1/2 throughout
        assert set_stable(DRIFT, HALVES.omega, 100, 0, 2)

    def test_cell_stable_value_and_density(self):
        assert not cell_stable(DRIFT, HALVES.omega, 2, 0, 2)
        assert cell_stable(DRIFT, HALVES.omega, 2, 0, 2, DENSITY)
        assert cell_stable(DRIFT, RIGHT, 8, 2, 9)

    def test_cell_stable_unknown_mode(self):
        with pytest.raises(ValueError):
            cell_stable(DRIFT, LEFT, 2, 0, 2, "median")

    def test_null_cell_is_density_stable(self):
        space = make_space([0, 1])
        seq = MeasureSequence((StepMeasure(space, (0, 1)),))
        assert cell_stable(seq, AtomSet.of([0]), 1, 0, 3, DENSITY)

    def test_first_stable_exhausted(self):
        with pytest.raises(SearchExhausted):
            first_stable(lambda m: False, 0, 3)

    def test_as_functional(self):
        assert as_functional(4)(0) == 4
        assert as_functional(lambda m: m + 2)(3) == 5


class TestWeak:
    def test_search(self, window):
        witness = search_metastable_weak(DRIFT, 8, window, 0)
        assert witness.verified
        assert witness["M"] <= DRIFT.settled_from
        assert weak_holds(DRIFT, 8, window, 0, witness["M"])

    def test_start_below_n(self, window):
        assert not weak_holds(DRIFT, 8, window, 3, 2)

    def test_partition_weak(self, window):
        witness = metastable_partition_weak(DRIFT, 8, HALVES.atomic(), window, 0)
        m = witness["m"]
        end = window_end(window, DRIFT, m)
        assert all(cell_stable(DRIFT, c, 8, m, end) for c in HALVES.atomic())

    @settings(max_examples=30, deadline=None)
    @given(
        rows=st.lists(st.integers(0, 4), min_size=1, max_size=4),
        E=st.integers(1, 8),
        n=st.integers(0, 4),
    )
    def test_weak_on_random_sequences(self, rows, E, n):
        seq = MeasureSequence(tuple(row(Fraction(a, 8), Fraction(4 - a, 8)) for a in rows))
        f = affine(1, 1)
        witness = search_metastable_weak(seq, E, f, n)
        assert weak_holds(seq, E, f, n, witness["M"])


class TestFluctuations:
    def test_exact_power_count(self, window):
        assert count_fluctuations(DRIFT, LEFT, 8, window, 0, exact_power=True) == 2
        assert count_fluctuations(DRIFT, LEFT, 2, window, 0, exact_power=True) == 0

    def test_counts_below_bound(self, window):
        for sigma in HALVES.all_sets():
            assert count_fluctuations(DRIFT, sigma, 8, window, 0) < DRIFT.fluctuation_bound

    def test_bulk_levels(self):
        assert bulk_levels(1, 5) == 1
        assert bulk_levels(2, 2) == 1
        assert bulk_levels(2, 4) == 2
        assert bulk_levels(3, 2) == 2


class TestBulk:
    def test_bulk(self, window):
        witness = metastable_partition_bulk(DRIFT, 8, 2, window, 0, HALVES.atomic())
        assert witness.verified
        assert HALVES.mu(witness.exceptional) <= Fraction(1, 2)
        end = window_end(window, DRIFT, witness["m"])
        assert all(cell_stable(DRIFT, c, 8, witness["m"], end) for c in witness.good)

    def test_small_fluctuation_bound_rejected(self, window):
        with pytest.raises(FluctuationCertificateMissing):
            metastable_partition_bulk(DRIFT, 8, 2, window, 0, HALVES.atomic(), V=1)

    def test_settled_start(self, window):
        witness = metastable_partition_bulk(DRIFT, 8, 2, window, 4, HALVES.atomic())
        assert witness["m"] == 4
        assert len(witness.exceptional) == 0


class TestUniformContinuity:
    def test_inflated_moduli_double(self):
        moduli = inflated_moduli(DRIFT, 16)
        assert len(moduli) == DRIFT.settled_from + 1
        assert all(b >= 2 * a for a, b in zip(moduli, moduli[1:]))

    def test_vhs(self):
        m_hat = Closure(lambda D, m: m + 1, "m+1")
        witness = quantitative_vhs(DRIFT, 1, m_hat, 0)
        assert witness.verified
        assert msuc_check(DRIFT, 1, m_hat, 0, witness["m"], witness["D"])
        assert partition_corollary_holds(DRIFT, 1, m_hat, witness["m"], witness["D"])
        assert chain_invariant_holds(DRIFT, witness.chain)
        moduli = inflated_moduli(DRIFT, 16)
        assert witness["D"] == 2 * moduli[min(witness["m"], len(moduli) - 1)]
        assert witness.chain[0]["sigma"] == EMPTY

    def test_msuc_start_below_n(self):
        assert not msuc_check(DRIFT, 1, Closure(lambda D, m: m, "id"), 2, 1, 4)

    def test_chain_invariant_violation(self):
        chain = [
            {"i": 0, "m": 0, "D": 4, "sigma": EMPTY},
            {"i": 1, "m": 1, "D": 4, "sigma": HALVES.omega},
        ]
        assert not chain_invariant_holds(DRIFT, chain)

    def test_monotone_window(self):
        assert require_monotone_window(Closure(lambda D, m: m + D, "m+D"), 2, 3) == 5
        with pytest.raises(PreconditionViolated):
            require_monotone_window(Closure(lambda D, m: 0, "zero"), 2, 3)


@st.composite
def settling_sequences(draw):
    """Eventually constant sequences of up to four measures on spaces of up to four atoms."""
    space = draw(spaces(max_atoms=4))
    table = draw(st.lists(measures(space, max_density=2), min_size=1, max_size=4))
    return MeasureSequence(tuple(table))


@settings(max_examples=150, deadline=None)
@given(seq=settling_sequences(), E=st.integers(1, 2), extra=st.integers(0, 3), n=st.integers(0, 2))
def test_vhs_on_random_sequences(seq, E, extra, n):
    m_hat = Closure(lambda D, m: m + extra, f"m+{extra}")
    witness = quantitative_vhs(seq, E, m_hat, n)
    m, D = witness["m"], witness["D"]
    moduli = inflated_moduli(seq, 16 * E)
    assert D == 2 * moduli[min(m, len(moduli) - 1)]
    assert m >= n
    assert msuc_check(seq, E, m_hat, n, m, D)
    assert chain_invariant_holds(seq, witness.chain)
    space = seq.space
    for mask in range(1 << space.size):
        sigma = AtomSet(mask)
        if space.mu(sigma) >= Fraction(1, D):
            continue
        for k in range(m, m_hat(D, m) + 1):
            assert abs(seq[k](sigma)) < Fraction(1, E)


class TestNPUniformContinuity:
    @pytest.fixture
    def grid(self):
        return make_double([row("1/2", "1/2")], [row(1, 0), row("1/2", "1/2")])

    def test_witness_verifies(self, grid):
        m_hat = Closure(lambda D, m, q, r: m + 1, "m̂")
        q_hat = Closure(lambda D, m, q, r: q + 1, "q̂")
        witness = np_msuc_witness(grid, 1, m_hat, q_hat)
        assert witness.verified
        assert witness["m"] >= 0 and witness["q"] >= 0
        assert verify_np_msuc(grid, 1, m_hat, q_hat, witness)
        assert witness.payload["strategy"] in ("transcribed", "corner")

    def test_least_indices_respected(self, grid):
        m_hat = Closure(lambda D, m, q, r: m, "m̂")
        q_hat = Closure(lambda D, m, q, r: q, "q̂")
        witness = np_msuc_witness(grid, 2, m_hat, q_hat, n=1, p=1)
        assert witness["m"] >= 1 and witness["q"] >= 1
