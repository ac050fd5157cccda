"""
Products of step measures for the measure mining project.

ρλ is the measure with density f·g, ρ∗λ the local product ρ(σ)λ(σ)/μ(σ). On a cell where
ρ's density barely moves the two agree up to |λ|/E, which is what E-constancy records.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from src.config import logger
from src.errors import (
    BoundViolation,
    NotRefinement,
    NullCarrier,
    OverlappingCells,
    PreconditionViolated,
)
from src.measure_core import (
    ABSOLUTE,
    AtomSet,
    Partition,
    StepMeasure,
    density,
    l1_norm,
    measure_eval,
    refines,
    same_space,
)
from src.regularity import difference_set


def pointwise_product(rho: StepMeasure, lam: StepMeasure) -> StepMeasure:
    """The measure ρλ with atom values f(a)·g(a)·μ(a)."""
    space = same_space(rho, lam)
    values = []
    for i, w in enumerate(space.weights):
        values.append(rho.values[i] * lam.values[i] / w if w else Fraction(0))
    return StepMeasure(space, tuple(values))


def star_product(rho: StepMeasure, lam: StepMeasure, sigma: AtomSet) -> Fraction:
    """
    (ρ∗λ)(σ) = ρ(σ)λ(σ)/μ(σ).

    Raises:
        NullCarrier: if μ(σ) = 0
    """
    space = same_space(rho, lam)
    carrier = space.mu(sigma)
    if carrier == 0:
        raise NullCarrier(f"star product on null set {sigma}")
    return rho(sigma) * lam(sigma) / carrier


def product_gap(rho: StepMeasure, lam: StepMeasure, sigma: AtomSet) -> Fraction:
    """|(ρλ)(σ) − (ρ∗λ)(σ)| for one set."""
    return abs(pointwise_product(rho, lam)(sigma) - star_product(rho, lam, sigma))


@dataclass(frozen=True)
class EConstCertificate:
    """Per-cell density oscillation of a measure, against the tolerance 1/E."""

    cells: Tuple[AtomSet, ...]
    E: int
    oscillations: Dict[AtomSet, Fraction]

    @property
    def valid(self) -> bool:
        tolerance = Fraction(1, self.E)
        return all(osc <= tolerance for osc in self.oscillations.values())

    @property
    def failing(self) -> List[AtomSet]:
        tolerance = Fraction(1, self.E)
        return [c for c in self.cells if self.oscillations[c] > tolerance]


def oscillation(nu: StepMeasure, cell: AtomSet) -> Fraction:
    """max f − min f over the positive-weight atoms of ``cell``."""
    values = [nu.density_at(i) for i in cell if nu.space.weights[i]]
    if not values:
        raise NullCarrier(f"{cell} has measure zero")
    return max(values) - min(values)


def is_e_constant(rho: StepMeasure, cells: Sequence[AtomSet], E: int) -> EConstCertificate:
    """
    Certify that ρ is E-constant on each cell in the oscillation sense.

    For every cell σ with oscillation at most 1/E and every λ,
    |(ρλ)(σ) − (ρ∗λ)(σ)| <= |λ|(σ)/E, which is the form the refinement estimate uses.

    Raises:
        NullCarrier: if a cell has measure zero
        OverlappingCells: if two cells share an atom
    """
    if E < 1:
        raise ValueError("E must be a positive integer")
    seen = 0
    for cell in cells:
        if seen & cell.mask:
            raise OverlappingCells(f"cells overlap at {cell}")
        seen |= cell.mask
    table = {cell: oscillation(rho, cell) for cell in cells}
    return EConstCertificate(tuple(cells), E, table)


def _union(masks: Iterable[int]) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


def _windows(values: List[Tuple[Fraction, int, Fraction]], width: Fraction, budget: int) -> List[int]:
    """
    Best cover of sorted (density, mask, mass) triples by ``budget`` closed windows.

    Returns the masks of the covered groups; uncovered mass is as small as possible.
    """
    r = len(values)
    reach = []
    j = 0
    for i in range(r):
        j = max(j, i)
        while j < r and values[j][0] <= values[i][0] + width:
            j += 1
        reach.append(j)
    prefix = [Fraction(0)]
    for _, _, mass in values:
        prefix.append(prefix[-1] + mass)

    best = [[Fraction(0)] * (budget + 1) for _ in range(r + 1)]
    for i in range(r - 1, -1, -1):
        for b in range(1, budget + 1):
            take = prefix[reach[i]] - prefix[i] + best[reach[i]][b - 1]
            best[i][b] = max(best[i + 1][b], take)

    groups: List[int] = []
    i, b = 0, budget
    while i < r and b > 0:
        take = prefix[reach[i]] - prefix[i] + best[reach[i]][b - 1]
        if take >= best[i + 1][b]:
            mask = 0
            for _, m, _ in values[i:reach[i]]:
                mask |= m
            groups.append(mask)
            i, b = reach[i], b - 1
        else:
            i += 1
    return groups


def level_set_refinement(
    rho: StepMeasure,
    partition: Partition,
    E: int,
    D: int,
    B: Fraction,
    K: Optional[Fraction] = None,
) -> Tuple[Partition, Partition]:
    """
    Slice every cell into density windows of width 1/E inside [−K, K].

    Each cell gets at most n = ⌊2KE⌋ cells. A cell whose regular atoms need all n windows
    and that also has atoms with |f| > K keeps n − 1 windows chosen to cover the most
    mass; the high atoms and whatever the windows miss form its exceptional cell. With
    K = BD and BDE a positive integer the missed mass is at most its share of ||ρ||/K,
    so μ(ℬ″) < 1/D still holds. Null atoms ride along with the lowest window of their
    cell; a cell of measure zero is exceptional as a whole.

    Args:
        rho: the measure to slice
        partition: the partition ℬ to refine
        E: window width denominator
        D: the exceptional part gets measure below 1/D
        B: declared bound on ||ρ||
        K: cutoff, defaulting to B·D; only larger values are accepted

    Returns:
        (ℬ′, ℬ″) with ℬ′ ⪰ ℬ, ℬ″ ⊆ ℬ′, |ℬ′| <= 2KE·|ℬ|, μ(ℬ″) < 1/D and ρ E-constant
        on ℬ′∖ℬ″

    Raises:
        BoundViolation: if B < ||ρ||, if 2KE < 1, or if the exceptional part reaches 1/D
            (only possible when 2KE is not an integer)
    """
    B = Fraction(B)
    norm = l1_norm(rho)
    if B < norm:
        raise BoundViolation(f"declared bound {B} is below ||ρ|| = {norm}")
    if B == 0:
        B = Fraction(1)
    cutoff = B * D
    if K is not None:
        if Fraction(K) < cutoff:
            raise ValueError(f"K = {K} is below B·D = {cutoff}")
        cutoff = Fraction(K)
    allowance = floor(2 * cutoff * E)
    if allowance < 1:
        raise BoundViolation(f"2KE = {2 * cutoff * E} leaves no room for a single cell")
    width = Fraction(1, E)
    space = rho.space

    fine: List[AtomSet] = []
    exceptional: List[AtomSet] = []
    for cell in partition:
        levels: Dict[Fraction, int] = {}
        high = 0
        nulls = 0
        for i in cell:
            f = rho.density_at(i)
            if f is None:
                nulls |= 1 << i
            elif abs(f) > cutoff:
                high |= 1 << i
            else:
                levels[f] = levels.get(f, 0) | (1 << i)
        if not levels and not high:
            exceptional.append(cell)
            fine.append(cell)
            continue
        regular = _union(levels.values())
        values = [(f, m, space.mu(AtomSet(m))) for f, m in sorted(levels.items())]
        groups = _windows(values, width, allowance)
        if high or _union(groups) != regular:
            groups = _windows(values, width, allowance - 1)
            high |= regular & ~_union(groups)
        if groups:
            groups[0] |= nulls
        else:
            high |= nulls
        fine.extend(AtomSet(g) for g in groups)
        if high:
            exceptional.append(AtomSet(high))
            fine.append(AtomSet(high))

    refined = Partition(tuple(fine))
    bad = Partition(tuple(exceptional))
    if space.mu(bad) >= Fraction(1, D):
        raise BoundViolation(
            f"exceptional measure {space.mu(bad)} reaches 1/{D}; 2KE = {2 * cutoff * E}"
        )
    logger.debug(
        f"Level sets: {len(partition)} cells -> {len(refined)} cells, "
        f"exceptional measure {space.mu(bad)}"
    )
    return refined, bad


def _cells_minus(outer: Partition, removed: Partition) -> List[AtomSet]:
    gone = set(removed.cells)
    return [c for c in outer if c not in gone]


def refinement_error_bound(
    rho: StepMeasure,
    lam: StepMeasure,
    coarse: Partition,
    fine: Partition,
    defect: Partition,
    E: int,
    C: Fraction,
    B: Fraction,
) -> Tuple[Fraction, Fraction]:
    """
    Both sides of the refinement estimate

        Σ_{σ∈ℬ, |δ_λ(σ)|<=C} |(ρλ)(σ) − (ρ∗λ)(σ)|
            < 2B/E + C·|ρ|(𝔇 ∪ ℬ⁻) + |ρλ|(𝔇 ∪ ℬ⁻)

    where 𝔇 = 𝔇_{E,ℬ,λ}(ℬ′). Null cells of ℬ carry no mass on either side and are skipped.

    Raises:
        PreconditionViolated: if B <= 0, ℬ ⋠ ℬ′, ℬ⁻ ⊄ ℬ′, ρ is not E-constant on ℬ′∖ℬ⁻
            or a norm exceeds B
        BoundViolation: if the estimate fails
    """
    C = Fraction(C)
    B = Fraction(B)
    space = same_space(rho, lam)
    if B <= 0:
        raise PreconditionViolated(f"the bound B must be positive, got {B}")
    if not refines(coarse, fine):
        raise PreconditionViolated(f"{fine} does not refine {coarse}")
    if any(c not in fine for c in defect):
        raise PreconditionViolated("defect cells must be cells of the refinement")
    if max(l1_norm(rho), l1_norm(lam)) > B:
        raise PreconditionViolated(f"a norm exceeds the declared bound {B}")
    regular = [c for c in _cells_minus(fine, defect) if space.mu(c) > 0]
    if not is_e_constant(rho, regular, E).valid:
        raise PreconditionViolated(f"ρ is not {E}-constant off the defect cells")

    product = pointwise_product(rho, lam)
    lhs = Fraction(0)
    for sigma in coarse:
        if space.mu(sigma) == 0:
            continue
        if abs(density(lam, sigma)) <= C:
            lhs += abs(product(sigma) - star_product(rho, lam, sigma))

    try:
        gaps = difference_set(E, coarse, lam, fine)
    except NotRefinement as exc:
        raise PreconditionViolated(str(exc)) from exc
    bad = Partition(tuple(set(gaps.cells) | set(defect.cells)))
    rhs = (
        2 * B / E
        + C * measure_eval(rho, bad, ABSOLUTE)
        + measure_eval(product, bad, ABSOLUTE)
    )
    if lhs >= rhs:
        raise BoundViolation(f"refinement estimate fails: {lhs} >= {rhs}")
    return lhs, rhs
