"""Shared fixtures and hypothesis strategies."""
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from src.measure_core import AtomSet, Partition, StepMeasure, make_space, set_partitions

SPACE4 = make_space([Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8)])
NU = StepMeasure(SPACE4, (Fraction(1, 2), Fraction(-1, 4), Fraction(1, 8), Fraction(0)))


@pytest.fixture
def space4():
    return SPACE4


@pytest.fixture
def nu():
    return NU


@st.composite
def spaces(draw, min_atoms=1, max_atoms=6, allow_null=False):
    """Spaces with small-denominator weights summing to one."""
    n = draw(st.integers(min_value=min_atoms, max_value=max_atoms))
    low = 0 if allow_null else 1
    parts = draw(st.lists(st.integers(min_value=low, max_value=6), min_size=n, max_size=n))
    if sum(parts) == 0:
        parts[0] = 1
    total = sum(parts)
    return make_space([Fraction(p, total) for p in parts])


@st.composite
def measures(draw, space, max_density=3):
    """Step measures with small integer-over-4 densities."""
    density = draw(
        st.lists(
            st.integers(min_value=-4 * max_density, max_value=4 * max_density),
            min_size=space.size,
            max_size=space.size,
        )
    )
    return StepMeasure.from_density(space, [Fraction(d, 4) for d in density])


@st.composite
def spaces_with_measure(draw, min_atoms=1, max_atoms=6, allow_null=False):
    space = draw(spaces(min_atoms=min_atoms, max_atoms=max_atoms, allow_null=allow_null))
    return space, draw(measures(space))


@st.composite
def partitions(draw, space, support=None):
    """A random partition of ``support`` (default: a random nonempty subset)."""
    if support is None:
        mask = draw(st.integers(min_value=1, max_value=(1 << space.size) - 1))
        support = AtomSet(mask)
    atoms = list(support)
    labels = draw(
        st.lists(st.integers(min_value=0, max_value=len(atoms) - 1),
                 min_size=len(atoms), max_size=len(atoms))
    )
    groups = {}
    for atom, label in zip(atoms, labels):
        groups.setdefault(label, []).append(atom)
    return Partition.of(groups.values())


@st.composite
def refinement_pairs(draw, space):
    """(coarse, fine) with coarse ⪯ fine, both covering the same random support."""
    fine = draw(partitions(space))
    blocks = list(set_partitions(list(fine.cells)))
    choice = draw(st.integers(min_value=0, max_value=len(blocks) - 1))
    coarse_cells = []
    for group in blocks[choice]:
        mask = 0
        for cell in group:
            mask |= cell.mask
        coarse_cells.append(AtomSet(mask))
    return Partition(tuple(coarse_cells)), fine
