"""
Finite atomic measure algebras.

A space is a finite list of atoms with exact rational weights summing to one. Sets are
bitmasks over atom positions, partitions are canonical tuples of disjoint nonempty sets
(they need not cover the space), and additive set functions are given by their atom values.
All arithmetic is exact.
"""
import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from src.config import ENUM_LIMIT, DEFAULT_SEED, SPACE_ATOM_LIMIT, logger
from src.errors import (
    ForeignAtoms,
    NegativeWeight,
    NotRefinement,
    NullCarrier,
    OverlappingCells,
    SpaceMismatch,
    SumNotOne,
)
from src.functionals import Closure, Functional  # noqa: F401  (re-exported)

SIGNED = "signed"
ABSOLUTE = "absolute"

Number = Union[int, Fraction, str]


def as_fraction(value: Number) -> Fraction:
    """Parse ints, Fractions and "p/q" strings; floats are refused."""
    if isinstance(value, float):
        raise TypeError("floats are not accepted; use Fraction or 'p/q' strings")
    return Fraction(value)


@dataclass(frozen=True, order=True)
class AtomSet:
    """A set of atoms, stored as a bitmask over atom positions."""

    mask: int

    @staticmethod
    def of(indices: Iterable[int]) -> "AtomSet":
        mask = 0
        for i in indices:
            mask |= 1 << i
        return AtomSet(mask)

    @property
    def members(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.mask.bit_length()) if self.mask >> i & 1)

    @property
    def least(self) -> int:
        return (self.mask & -self.mask).bit_length() - 1

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __or__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.mask | other.mask)

    def __and__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.mask & other.mask)

    def __sub__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.mask & ~other.mask)

    def __xor__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.mask ^ other.mask)

    def issubset(self, other: "AtomSet") -> bool:
        return self.mask & ~other.mask == 0

    def __repr__(self) -> str:
        return "{" + ",".join(f"a{i + 1}" for i in self.members) + "}"


EMPTY = AtomSet(0)


@dataclass(frozen=True)
class Partition:
    """Pairwise disjoint nonempty cells, sorted by least atom."""

    cells: Tuple[AtomSet, ...]

    def __post_init__(self):
        seen = 0
        for cell in self.cells:
            if not cell:
                raise OverlappingCells("partition cells must be nonempty")
            if seen & cell.mask:
                raise OverlappingCells(f"partition cells overlap at {cell}")
            seen |= cell.mask
        ordered = tuple(sorted(self.cells, key=lambda c: c.least))
        object.__setattr__(self, "cells", ordered)

    @staticmethod
    def of(cells: Iterable[Union[AtomSet, Iterable[int]]]) -> "Partition":
        return Partition(
            tuple(c if isinstance(c, AtomSet) else AtomSet.of(c) for c in cells)
        )

    @property
    def union(self) -> AtomSet:
        mask = 0
        for cell in self.cells:
            mask |= cell.mask
        return AtomSet(mask)

    def __iter__(self) -> Iterator[AtomSet]:
        return iter(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell: AtomSet) -> bool:
        return cell in self.cells

    def __repr__(self) -> str:
        return "{" + ",".join(repr(c) for c in self.cells) + "}"


EMPTY_PARTITION = Partition(())


@dataclass(frozen=True)
class MeasureSpace:
    atoms: Tuple[str, ...]
    weights: Tuple[Fraction, ...]

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def omega(self) -> AtomSet:
        return AtomSet((1 << self.size) - 1)

    def mu(self, target: Union[AtomSet, Partition]) -> Fraction:
        if isinstance(target, Partition):
            target = target.union
        self.check(target)
        return sum((self.weights[i] for i in target), Fraction(0))

    def check(self, target: Union[AtomSet, Partition]) -> None:
        mask = target.union.mask if isinstance(target, Partition) else target.mask
        if mask >> self.size:
            raise ForeignAtoms(f"{target} uses atoms outside a {self.size}-atom space")

    def measure(self) -> "StepMeasure":
        """μ itself as a step measure."""
        return StepMeasure(self, self.weights)

    def zero(self) -> "StepMeasure":
        return StepMeasure(self, tuple(Fraction(0) for _ in self.weights))

    def atomic(self, support: Optional[AtomSet] = None) -> Partition:
        support = self.omega if support is None else support
        return Partition(tuple(AtomSet(1 << i) for i in support))

    def trivial(self) -> Partition:
        return Partition((self.omega,))

    def all_sets(self) -> Iterator[AtomSet]:
        for mask in range(1 << self.size):
            yield AtomSet(mask)


def make_space(weights: Sequence[Number], atoms: Optional[Sequence[str]] = None) -> MeasureSpace:
    """
    Build a finite atomic probability space.

    Args:
        weights: exact nonnegative weights (ints, Fractions or "p/q" strings)
        atoms: optional atom names, defaulting to a1..aN

    Raises:
        NegativeWeight: if a weight is below zero
        SumNotOne: if the weights do not sum to exactly one
    """
    values = tuple(as_fraction(w) for w in weights)
    if len(values) > SPACE_ATOM_LIMIT:
        raise ValueError(f"spaces are limited to {SPACE_ATOM_LIMIT} atoms")
    for i, w in enumerate(values):
        if w < 0:
            raise NegativeWeight(f"weight of atom {i + 1} is {w}")
    total = sum(values, Fraction(0))
    if total != 1:
        raise SumNotOne(f"weights sum to {total}, not 1")
    names = tuple(atoms) if atoms is not None else tuple(f"a{i + 1}" for i in range(len(values)))
    if len(names) != len(values):
        raise ValueError("one atom name per weight is required")
    return MeasureSpace(names, values)


@dataclass(frozen=True)
class StepMeasure:
    """Additive set function on a finite space, given by its atom values."""

    space: MeasureSpace
    values: Tuple[Fraction, ...]

    def __post_init__(self):
        values = tuple(Fraction(v) for v in self.values)
        if len(values) != self.space.size:
            raise SpaceMismatch("one value per atom is required")
        for i, (v, w) in enumerate(zip(values, self.space.weights)):
            if w == 0 and v != 0:
                raise ValueError(f"null atom a{i + 1} carries nonzero value {v}")
        object.__setattr__(self, "values", values)

    @staticmethod
    def from_density(space: MeasureSpace, density: Sequence[Number]) -> "StepMeasure":
        f = [as_fraction(x) for x in density]
        return StepMeasure(space, tuple(fi * w for fi, w in zip(f, space.weights)))

    def __call__(self, target: AtomSet) -> Fraction:
        self.space.check(target)
        return sum((self.values[i] for i in target), Fraction(0))

    def density_at(self, atom: int) -> Optional[Fraction]:
        """f(a) = ν(a)/μ(a); None on null atoms."""
        w = self.space.weights[atom]
        return self.values[atom] / w if w else None

    def total_variation(self, target: AtomSet) -> Fraction:
        return sum((abs(self.values[i]) for i in target), Fraction(0))

    def __sub__(self, other: "StepMeasure") -> "StepMeasure":
        same_space(self, other)
        return StepMeasure(self.space, tuple(a - b for a, b in zip(self.values, other.values)))


def same_space(*measures: StepMeasure) -> MeasureSpace:
    space = measures[0].space
    for other in measures[1:]:
        if other.space != space:
            raise SpaceMismatch("measures live on different spaces")
    return space


def measure_eval(
    nu: StepMeasure, target: Union[AtomSet, Partition], mode: str = SIGNED
) -> Fraction:
    """
    ν on a set or a partition.

    Signed mode sums cell values; absolute mode sums their absolute values.
    """
    nu.space.check(target)
    cells = target.cells if isinstance(target, Partition) else (target,)
    if mode == SIGNED:
        return sum((nu(c) for c in cells), Fraction(0))
    if mode == ABSOLUTE:
        return sum((abs(nu(c)) for c in cells), Fraction(0))
    raise ValueError(f"Unknown mode: {mode}")


def parent_cell(cell: AtomSet, coarse: Partition) -> AtomSet:
    """τ_𝒜: the cell of ``coarse`` containing ``cell``."""
    for candidate in coarse:
        if cell.issubset(candidate):
            return candidate
    raise NotRefinement(f"{cell} lies in no cell of {coarse}")


def restrict(fine: Partition, cell: AtomSet) -> Partition:
    """ℬ_σ: the cells of ``fine`` inside ``cell``."""
    return Partition(tuple(c for c in fine if c.issubset(cell)))


def refines(coarse: Partition, fine: Partition, space: Optional[MeasureSpace] = None) -> bool:
    """True iff coarse ⪯ fine: same union and every fine cell inside a coarse cell."""
    if space is not None:
        space.check(coarse)
        space.check(fine)
    if coarse.union != fine.union:
        return False
    return all(any(c.issubset(a) for a in coarse) for c in fine)


def require_refinement(coarse: Partition, fine: Partition) -> None:
    if not refines(coarse, fine):
        raise NotRefinement(f"{fine} does not refine {coarse}")


def density(
    nu: StepMeasure, target: Union[AtomSet, Partition], mode: str = SIGNED
) -> Fraction:
    """δ_ν(𝒜) = ν(𝒜)/μ(𝒜), or δ_|ν| in absolute mode."""
    carrier = nu.space.mu(target)
    if carrier == 0:
        raise NullCarrier(f"{target} has measure zero")
    return measure_eval(nu, target, mode) / carrier


def l1_norm(nu: StepMeasure) -> Fraction:
    """||ν||_L1; on a finite atomic algebra the supremum is attained by the atomic partition."""
    return sum((abs(v) for v in nu.values), Fraction(0))


def _subset_sums(values: Sequence[Fraction]) -> List[Fraction]:
    sums = [Fraction(0)] * (1 << len(values))
    for mask in range(1, 1 << len(values)):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + values[low.bit_length() - 1]
    return sums


def modulus_of_continuity(nu: StepMeasure, E: int) -> int:
    """
    Least D such that every partition of measure < 1/D has |ν|-mass < 1/E.

    The largest |ν|-mass of a partition with union U is the atomic one, so the search
    runs over sets U: D must satisfy 1/D <= μ(U) for every U whose atomic mass is >= 1/E.
    """
    if E < 1:
        raise ValueError("E must be a positive integer")
    weights = nu.space.weights
    masses = _subset_sums([abs(v) for v in nu.values])
    sizes = _subset_sums(weights)
    threshold = Fraction(1, E)
    result = 1
    for mask, mass in enumerate(masses):
        if mass >= threshold:
            result = max(result, math.ceil(1 / sizes[mask]))
    return result


def small_sets(space: MeasureSpace, D: Union[int, Fraction]) -> List[AtomSet]:
    """All sets σ with μ(σ) < 1/D."""
    bound = 1 / Fraction(D)
    sizes = _subset_sums(space.weights)
    return [AtomSet(mask) for mask, size in enumerate(sizes) if size < bound]


def finiteness_chunks(nu: StepMeasure, partition: Partition) -> List[Partition]:
    """
    Group the cells of ``partition`` into chunks of measure < 1/D, D = ω_ν(1).

    Cells are packed greedily in order of decreasing measure, so every closed chunk has
    measure >= 1/(2D) and there are at most 2D + 1 chunks. A chunk of measure < 1/D has
    |ν|-mass < 1. A single cell of measure >= 1/D becomes its own chunk and carries no such
    guarantee: on an atomic space a heavy atom may hold arbitrary mass.
    """
    D = modulus_of_continuity(nu, 1)
    limit = Fraction(1, D)
    space = nu.space
    chunks: List[List[AtomSet]] = []
    current: List[AtomSet] = []
    current_size = Fraction(0)
    for cell in sorted(partition, key=lambda c: (-space.mu(c), c.least)):
        size = space.mu(cell)
        if current and current_size + size >= limit:
            chunks.append(current)
            current, current_size = [], Fraction(0)
        current.append(cell)
        current_size += size
    if current:
        chunks.append(current)
    return [Partition(tuple(chunk)) for chunk in chunks]


# --- interval enumeration -------------------------------------------------------


def set_partitions(items: Sequence) -> Iterator[List[List]]:
    """All set partitions of ``items``, coarsest first."""
    if not items:
        yield []
        return
    if len(items) == 1:
        yield [list(items)]
        return
    first = items[0]
    for smaller in set_partitions(items[1:]):
        for n, subset in enumerate(smaller):
            yield smaller[:n] + [[first] + subset] + smaller[n + 1:]
        yield [[first]] + smaller


@lru_cache(maxsize=None)
def bell(n: int) -> int:
    """Bell numbers via the recurrence B(n+1) = sum C(n,k) B(k)."""
    if n == 0:
        return 1
    return sum(math.comb(n - 1, k) * bell(k) for k in range(n))


def interval_size(coarse: Partition, fine: Partition) -> int:
    require_refinement(coarse, fine)
    return math.prod(bell(len(restrict(fine, cell))) for cell in coarse)


def _merge(groups: Iterable[List[AtomSet]]) -> Partition:
    cells = []
    for group in groups:
        mask = 0
        for cell in group:
            mask |= cell.mask
        cells.append(AtomSet(mask))
    return Partition(tuple(cells))


def _random_set_partition(items: Sequence[AtomSet], rng: random.Random) -> List[List[AtomSet]]:
    # restricted growth string
    blocks: List[List[AtomSet]] = []
    for item in items:
        choice = rng.randint(0, len(blocks))
        if choice == len(blocks):
            blocks.append([item])
        else:
            blocks[choice].append(item)
    return blocks


def enumerate_between(
    coarse: Partition,
    fine: Partition,
    limit: int = ENUM_LIMIT,
    seed: int = DEFAULT_SEED,
) -> List[Partition]:
    """
    The partitions 𝒞 with coarse ⪯ 𝒞 ⪯ fine.

    Full enumeration (coarsest first) when the interval has at most ``limit`` elements;
    otherwise both endpoints followed by a seeded sample, ``limit`` partitions in total.
    """
    require_refinement(coarse, fine)
    pieces = [restrict(fine, cell).cells for cell in coarse]
    total = math.prod(bell(len(p)) for p in pieces)
    if total <= limit:
        per_cell = [list(set_partitions(list(p))) for p in pieces]
        return [
            _merge(itertools.chain.from_iterable(choice))
            for choice in itertools.product(*per_cell)
        ]
    logger.warning(
        f"Interval of size {total} exceeds enumeration limit {limit}; sampling with seed {seed}"
    )
    rng = random.Random(seed)
    result = [coarse] if coarse == fine else [coarse, fine]
    seen = set(result)
    attempts = 0
    while len(result) < limit and attempts < 20 * limit:
        attempts += 1
        candidate = _merge(
            itertools.chain.from_iterable(_random_set_partition(p, rng) for p in pieces)
        )
        if candidate not in seen:
            seen.add(candidate)
            result.append(candidate)
    return result


def all_partitions_of_subsets(space: MeasureSpace) -> Iterator[Partition]:
    """Every partition of every subset of Ω (used by brute-force oracles)."""
    for subset in space.all_sets():
        for blocks in set_partitions([AtomSet(1 << i) for i in subset]):
            yield _merge(blocks)


def brute_force_l1(nu: StepMeasure) -> Fraction:
    return max(
        (measure_eval(nu, p, ABSOLUTE) for p in all_partitions_of_subsets(nu.space)),
        default=Fraction(0),
    )
