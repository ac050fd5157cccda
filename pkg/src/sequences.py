"""
Eventually constant measure sequences and product grids.

A sequence is stored as a finite table; indices past the end read the last entry. That
makes every metastable search terminate and every limit exist.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Dict, Optional, Sequence, Tuple

from src.config import logger
from src.errors import CertificateMissing, MeasureError, SpaceMismatch
from src.measure_core import MeasureSpace, StepMeasure, l1_norm, same_space
from src.products import level_set_refinement, pointwise_product


@dataclass(frozen=True)
class MeasureSequence:
    """(ν_n)_n with ν_n = ν_{T−1} for n >= T − 1."""

    table: Tuple[StepMeasure, ...]
    label: str = "ν"

    def __post_init__(self):
        table = tuple(self.table)
        if not table:
            raise ValueError("a sequence needs at least one measure")
        same_space(*table)
        object.__setattr__(self, "table", table)

    @property
    def space(self) -> MeasureSpace:
        return self.table[0].space

    def __len__(self) -> int:
        return len(self.table)

    def __getitem__(self, n: int) -> StepMeasure:
        if n < 0:
            raise IndexError(f"negative index {n}")
        return self.table[min(n, len(self.table) - 1)]

    @property
    def settled_from(self) -> int:
        """Least t with ν_n = ν_t for every n >= t."""
        last = self.table[-1]
        t = len(self.table) - 1
        while t > 0 and self.table[t - 1] == last:
            t -= 1
        return t

    @property
    def fluctuation_bound(self) -> int:
        """
        A fluctuation bound valid for every E.

        For inflationary m̂ either some iterate m̂^v(n), v <= settled_from, is a fixed point
        or the iterates pass settled_from, so v ranges over settled_from + 1 values.
        """
        return self.settled_from + 1

    @property
    def bound(self) -> Fraction:
        return max(l1_norm(nu) for nu in self.table)


def constant_sequence(nu: StepMeasure, label: str = "ν") -> MeasureSequence:
    return MeasureSequence((nu,), label)


@dataclass
class DoubleSequence:
    """The grid (ρ_nλ_p)_{n,p} built from two eventually constant sequences."""

    rho: MeasureSequence
    lam: MeasureSequence
    B: Optional[int] = None
    _products: Dict[Tuple[int, int], StepMeasure] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rho.space != self.lam.space:
            raise SpaceMismatch("ρ and λ live on different spaces")
        norm = max(self.rho.bound, self.lam.bound)
        least = max(1, ceil(norm))
        if self.B is None:
            self.B = least
        elif self.B < norm:
            raise CertificateMissing(f"declared bound {self.B} is below max norm {norm}")

    @property
    def space(self) -> MeasureSpace:
        return self.rho.space

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rho), len(self.lam)

    def product(self, n: int, p: int) -> StepMeasure:
        n = min(n, len(self.rho) - 1)
        p = min(p, len(self.lam) - 1)
        key = (n, p)
        cached = self._products.get(key)
        if cached is None:
            cached = pointwise_product(self.rho[n], self.lam[p])
            self._products[key] = cached
        return cached

    def row(self, n: int) -> MeasureSequence:
        """(ρ_nλ_p)_p."""
        return MeasureSequence(
            tuple(self.product(n, p) for p in range(len(self.lam))), f"ρ{n}λ"
        )

    def column(self, p: int) -> MeasureSequence:
        """(ρ_nλ_p)_n."""
        return MeasureSequence(
            tuple(self.product(n, p) for n in range(len(self.rho))), f"ρλ{p}"
        )

    def transpose(self) -> "DoubleSequence":
        return DoubleSequence(self.lam, self.rho, self.B)

    @property
    def settled(self) -> Tuple[int, int]:
        return self.rho.settled_from, self.lam.settled_from


def make_double(
    rho: Sequence[StepMeasure], lam: Sequence[StepMeasure], B: Optional[int] = None
) -> DoubleSequence:
    return DoubleSequence(MeasureSequence(tuple(rho), "ρ"), MeasureSequence(tuple(lam), "λ"), B)


def certify_assumptions(ds: DoubleSequence, E: int = 2, D: int = 2) -> None:
    """
    Check the standing assumptions on a product grid.

    Both families are eventually constant by construction, which gives bounded
    fluctuations of every row and column. The L1 bound B must dominate every norm and
    every measure must admit a level-set refinement.

    Raises:
        CertificateMissing: naming the first assumption that fails
    """
    B = ds.B
    for family in (ds.rho, ds.lam):
        for n, nu in enumerate(family.table):
            norm = l1_norm(nu)
            if norm > B:
                raise CertificateMissing(f"||{family.label}_{n}|| = {norm} exceeds B = {B}")
            try:
                refined, bad = level_set_refinement(nu, ds.space.trivial(), E, D, B)
            except MeasureError as exc:
                raise CertificateMissing(f"no level sets for {family.label}_{n}: {exc}") from exc
            if ds.space.mu(bad) >= Fraction(1, D):
                raise CertificateMissing(f"level sets of {family.label}_{n} leave too much out")
    logger.debug(
        f"Assumptions certified: grid {ds.shape}, B = {B}, settled at {ds.settled}"
    )
