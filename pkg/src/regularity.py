"""
Regularity module for the measure mining project.

Energy-increment regularity for one measure, for sequences of measures, for windows of
indices and for pairs of sequences. A regular partition is one where refining further,
within the allowed refinement, moves the densities of ν by at least 1/E only on a set of
measure below 1/D.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterator, List, Optional, Tuple

from src.config import CLAIM_BUDGET, CLAIM_DEPTH_LIMIT, DEFAULT_SEED, ENUM_LIMIT, LOG_EVERY, logger
from src.errors import (
    BoundViolation,
    CertificateMissing,
    NullCarrier,
    PreconditionViolated,
    SearchExhausted,
)
from src.functionals import Closure, Functional
from src.measure_core import (
    ABSOLUTE,
    AtomSet,
    Partition,
    StepMeasure,
    density,
    enumerate_between,
    interval_size,
    l1_norm,
    measure_eval,
    parent_cell,
    refines,
    require_refinement,
)
from src.metastability import DENSITY, metastable_partition_bulk, window

if TYPE_CHECKING:
    from src.sequences import DoubleSequence, MeasureSequence

L1 = "L1"
L2 = "L2"


# --- energies and difference sets ------------------------------------------------


def _is_high(nu: StepMeasure, cell: AtomSet, K: Fraction) -> bool:
    carrier = nu.space.mu(cell)
    return carrier > 0 and abs(nu(cell)) > K * carrier


def cutoff(partition: Partition, nu: StepMeasure, K: Fraction) -> Tuple[Partition, Partition]:
    """
    Split ℬ into ℬ_{ν>K} (|δ_ν(σ)| > K) and ℬ_{ν<=K}.

    Raises:
        NullCarrier: if a cell has measure zero
    """
    K = Fraction(K)
    high, low = [], []
    for cell in partition:
        if nu.space.mu(cell) == 0:
            raise NullCarrier(f"{cell} has measure zero")
        (high if _is_high(nu, cell, K) else low).append(cell)
    return Partition(tuple(high)), Partition(tuple(low))


def energy(
    partition: Partition, nu: StepMeasure, kind: str = L2, K: Optional[Fraction] = None
) -> Fraction:
    """
    θ(ℬ) = Σ μ(σ)δ_ν(σ)² over the cells, or with kind "L1" the truncated energy
    Σ_{low} μ(σ)δ_ν(σ)² + 2K Σ_{high} μ(σ)|δ_ν(σ)|. Null cells contribute nothing.
    """
    if kind not in (L1, L2):
        raise ValueError(f"Unknown energy kind: {kind}. Available: {L1}, {L2}")
    if kind == L1 and K is None:
        raise ValueError("the truncated energy needs a cutoff K")
    total = Fraction(0)
    for cell in partition:
        carrier = nu.space.mu(cell)
        if carrier == 0:
            continue
        value = nu(cell)
        if kind == L1 and abs(value) > K * carrier:
            total += 2 * K * abs(value)
        else:
            total += value * value / carrier
    return total


def difference_set(E: int, coarse: Partition, nu: StepMeasure, fine: Partition) -> Partition:
    """
    𝔇_{E,𝒜,ν}(ℬ): cells σ of ℬ with |δ_ν(σ) − δ_ν(σ_𝒜)| >= 1/E. Null cells never qualify.

    Raises:
        NotRefinement: if 𝒜 ⋠ ℬ
    """
    require_refinement(coarse, fine)
    tolerance = Fraction(1, E)
    space = nu.space
    cells = []
    for cell in fine:
        if space.mu(cell) == 0:
            continue
        parent = parent_cell(cell, coarse)
        if abs(density(nu, cell) - density(nu, parent)) >= tolerance:
            cells.append(cell)
    return Partition(tuple(cells))


def defect_measure(E: int, coarse: Partition, nu: StepMeasure, fine: Partition) -> Fraction:
    return nu.space.mu(difference_set(E, coarse, nu, fine))


def bhat_k(bhat: Callable[[Partition], Partition], nu: StepMeasure, K: Fraction) -> Closure:
    """B̂^K(𝒜) = 𝒜_{ν>K} ∪ {σ ∈ B̂(𝒜) : |δ_ν(σ_𝒜)| <= K}."""
    K = Fraction(K)

    def refine(partition: Partition) -> Partition:
        target = bhat(partition)
        if not refines(partition, target):
            raise PreconditionViolated(f"refiner maps {partition} to {target}, not a refinement")
        high = [c for c in partition if _is_high(nu, c, K)]
        keep = [c for c in target if not _is_high(nu, parent_cell(c, partition), K)]
        return Partition(tuple(high + keep))

    return Closure(refine, f"B̂^{K}")


# --- refiners ---------------------------------------------------------------------


def halve_cells() -> Closure:
    """Split every cell into its lower and upper half of atoms."""

    def halve(partition: Partition) -> Partition:
        cells = []
        for cell in partition:
            members = cell.members
            cut = (len(members) + 1) // 2
            cells.append(AtomSet.of(members[:cut]))
            if members[cut:]:
                cells.append(AtomSet.of(members[cut:]))
        return Partition(tuple(cells))

    return Closure(halve, "halve")


def atomize() -> Closure:
    """Send every partition to the atomic partition of its union."""
    return Closure(lambda partition: Partition(tuple(AtomSet(1 << i) for i in partition.union)), "atoms")


def identity_refiner() -> Closure:
    return Closure(lambda partition: partition, "id")


# --- witnesses --------------------------------------------------------------------


@dataclass
class RegularityWitness:
    """A regular partition together with the indices and functionals found for it."""

    kind: str
    partition: Partition
    E: int
    D: int
    K: Fraction
    n: Optional[int] = None
    p: Optional[int] = None
    k_hat: Optional[Callable] = None
    r_hat: Optional[Callable] = None
    trace: List[Tuple[Any, ...]] = field(default_factory=list)
    bound: Optional[int] = None
    iterations: int = 0
    verified: bool = False
    sampled: bool = False
    payload: Dict[str, Any] = field(default_factory=dict)


def pairs_between(
    coarse: Partition, fine: Partition, limit: int = ENUM_LIMIT
) -> Tuple[List[Tuple[Partition, Partition]], bool]:
    """All ℬ ⪯ ℬ′ inside [coarse, fine], and whether any interval had to be sampled."""
    sampled = interval_size(coarse, fine) > limit
    pairs = []
    for first in enumerate_between(coarse, fine, limit):
        sampled = sampled or interval_size(first, fine) > limit
        for second in enumerate_between(first, fine, limit):
            pairs.append((first, second))
    return pairs, sampled


def iteration_bound_1d(B: Fraction, D: int, E: int) -> int:
    """16D³E²B² + 16D²E²B²."""
    B = Fraction(B)
    return ceil(16 * D**3 * E**2 * B**2 + 16 * D**2 * E**2 * B**2)


# --- one measure ------------------------------------------------------------------


def regularity_1d(
    nu: StepMeasure,
    start: Partition,
    E: int,
    D: int,
    bhat: Callable[[Partition], Partition],
    B: Optional[Fraction] = None,
    limit: int = ENUM_LIMIT,
    seed: int = DEFAULT_SEED,
) -> RegularityWitness:
    """
    ℬ♯ ⪰ 𝒜 with μ(𝔇_{E,ℬ♯,ν}(ℬ)) < 1/D for every ℬ in [ℬ♯, B̂(ℬ♯)].

    Energy increment with K = max(2D·B, 1): while some ℬ in [𝒜_i, B̂^K(𝒜_i)] has
    μ(𝔇_{E,𝒜_i,ν}(ℬ)) >= 1/(2D), move to the first such ℬ in enumeration order. Each
    step raises the truncated energy by at least 1/(2DE²).

    Args:
        nu: the measure
        start: 𝒜
        E, D: tolerances
        bhat: monotone refiner, B̂(𝒜) ⪰ 𝒜
        B: bound on ||ν||, defaulting to the norm itself
        limit: enumeration limit per interval
        seed: seed of the sample drawn past the limit

    Raises:
        BoundViolation: if B < ||ν||
        SearchExhausted: if the energy budget is exceeded
        CertificateMissing: if the result fails the interval oracle
    """
    norm = l1_norm(nu)
    B = norm if B is None else Fraction(B)
    if B < norm:
        raise BoundViolation(f"declared bound {B} is below ||ν|| = {norm}")
    K = max(2 * D * B, Fraction(1))
    refine = bhat_k(bhat, nu, K)
    threshold = Fraction(1, 2 * D)
    budget = ceil((K * K + 2 * K * B) * 2 * D * E * E) + 1

    current = start
    trace = [(0, energy(current, nu, L1, K))]
    while True:
        step = None
        for candidate in enumerate_between(current, refine(current), limit, seed):
            if defect_measure(E, current, nu, candidate) >= threshold:
                step = candidate
                break
        if step is None:
            break
        current = step
        trace.append((len(trace), energy(current, nu, L1, K)))
        if len(trace) % LOG_EVERY == 0:
            logger.debug(f"Regularity step {len(trace)}: {len(current)} cells")
        if len(trace) > budget:
            raise SearchExhausted(f"energy increment ran past {budget} steps")

    witness = RegularityWitness(
        "regularity",
        current,
        E,
        D,
        K,
        trace=trace,
        bound=iteration_bound_1d(B, D, E),
        iterations=len(trace) - 1,
    )
    check = verify_regularity_1d(nu, witness, bhat, limit, seed)
    witness.sampled = check["sampled"]
    witness.verified = check["holds"]
    if not witness.verified:
        raise CertificateMissing(f"regular partition {current} fails: worst {check['worst']}")
    logger.info(f"Regular partition after {witness.iterations} steps: {len(current)} cells")
    return witness


def verify_regularity_1d(
    nu: StepMeasure,
    witness: RegularityWitness,
    bhat: Callable[[Partition], Partition],
    limit: int = ENUM_LIMIT,
    seed: int = DEFAULT_SEED,
) -> Dict[str, Any]:
    base = witness.partition
    target = bhat(base)
    worst = Fraction(0)
    checked = 0
    for candidate in enumerate_between(base, target, limit, seed):
        worst = max(worst, defect_measure(witness.E, base, nu, candidate))
        checked += 1
    return {
        "holds": worst < Fraction(1, witness.D),
        "worst": worst,
        "checked": checked,
        "sampled": interval_size(base, target) > limit,
    }


def density_gap_set(
    nu: StepMeasure, other: StepMeasure, partition: Partition, D: int, E: int
) -> Partition:
    """
    Cells where the densities of ν and ν′ differ by at least 1/E.

    When |ν − ν′|(ℬ) < 1/(DE) these cells have measure below 1/D.

    Raises:
        PreconditionViolated: if |ν − ν′|(ℬ) >= 1/(DE)
    """
    gap = measure_eval(nu - other, partition, ABSOLUTE)
    if gap >= Fraction(1, D * E):
        raise PreconditionViolated(f"|ν − ν′|(ℬ) = {gap} is not below 1/{D * E}")
    tolerance = Fraction(1, E)
    cells = [
        c
        for c in partition
        if nu.space.mu(c) > 0 and abs(density(nu, c) - density(other, c)) >= tolerance
    ]
    result = Partition(tuple(cells))
    if nu.space.mu(result) >= Fraction(1, D):
        raise CertificateMissing("density gap cells are too large")
    return result


# --- sequences of measures --------------------------------------------------------


def seq_window(f: Callable[[int], int]) -> Closure:
    """Lift a plain index functional to m̂(n, k̂, ℬ♯, ℬ, ℬ′) = f(n)."""
    return Closure(lambda n, k_hat, base, first, second: f(n), f"window({getattr(f, 'label', 'f')})")


def seq_refiner(refiner: Callable[[Partition], Partition]) -> Closure:
    """Lift a partition refiner to B̂(n, k̂, ℬ♯) = refiner(ℬ♯)."""
    return Closure(lambda n, k_hat, base: refiner(base), f"refiner({getattr(refiner, 'label', 'B̂')})")


class _Satisfied(Exception):
    def __init__(self, tag: object, n: int, k_hat: Closure, partition: Partition, depth: int):
        super().__init__("regularity witness found")
        self.tag = tag
        self.n = n
        self.k_hat = k_hat
        self.partition = partition
        self.depth = depth


class _ClaimSearch:
    """
    Iterative deepening over the claims of the sequential energy increment.

    Claim i at (m₀, 𝒜_d) either finds the witness or returns an index m >= m₀ and i more
    partitions, each raising θ_m. k̂_i(m, ℬ′) is the index part of claim i at (m, ℬ′).
    Once the search is over the k̂_i stop raising and answer m on unexplored arguments.
    """

    def __init__(self, seq, E, D, K, m_hat, b_hat, limit, budget):
        self.seq = seq
        self.E = E
        self.D = D
        self.K = K
        self.m_hat = m_hat
        self.b_hat = b_hat
        self.limit = limit
        self.budget = budget
        self.tag = object()
        self.finished = False
        self.checks = 0
        self.sampled = False
        self.memo: Dict[Tuple[int, int, Partition], Tuple[int, Tuple[Partition, ...]]] = {}
        self.k_hats: Dict[int, Closure] = {}
        self.steps: List[Tuple[int, int, Fraction, Fraction]] = []

    def k_hat(self, i: int) -> Closure:
        found = self.k_hats.get(i)
        if found is not None:
            return found

        def fn(m: int, partition: Partition) -> int:
            try:
                return self.claim(i, m, partition)[0]
            except _Satisfied as sat:
                if self.finished and sat.tag is self.tag:
                    return m
                raise

        found = Closure(fn, f"k̂_{i}")
        self.k_hats[i] = found
        return found

    def claim(self, i: int, m0: int, last: Partition) -> Tuple[int, Tuple[Partition, ...]]:
        key = (i, m0, last)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        result = (m0, ()) if i == 0 else self._extend(i, m0, last)
        self.memo[key] = result
        return result

    def _modify(self, last: Partition, first: Partition, second: Partition, nu: StepMeasure) -> Partition:
        K = self.K
        star = Partition(
            tuple(c for c in last if _is_high(nu, c, K))
            + tuple(c for c in first if not _is_high(nu, parent_cell(c, last), K))
        )
        return Partition(
            tuple(c for c in star if _is_high(nu, c, K))
            + tuple(c for c in second if not _is_high(nu, parent_cell(c, star), K))
        )

    def _extend(self, i: int, m0: int, last: Partition) -> Tuple[int, Tuple[Partition, ...]]:
        k_hat = self.k_hat(i - 1)
        ceiling = self.b_hat(m0, k_hat, last)
        if not refines(last, ceiling):
            raise PreconditionViolated(f"B̂ maps {last} to {ceiling}, not a refinement")
        pairs, sampled = pairs_between(last, ceiling, self.limit)
        self.sampled = self.sampled or sampled
        threshold = Fraction(1, self.D)
        for first, second in pairs:
            self.checks += 1
            if self.checks > self.budget:
                raise SearchExhausted(f"claim search ran past {self.budget} checks")
            m = self.m_hat(m0, k_hat, last, first, second)
            if m < m0:
                continue
            k = k_hat(m, second)
            nu = self.seq[k]
            if k < m or defect_measure(self.E, first, nu, second) >= threshold:
                new = self._modify(last, first, second, nu)
                self.steps.append(
                    (i, k, energy(last, nu, L1, self.K), energy(new, nu, L1, self.K))
                )
                inner, chain = self.claim(i - 1, k, new)
                return inner, (new,) + chain
        raise _Satisfied(self.tag, m0, k_hat, last, i)


def regularity_1d_seq(
    seq: "MeasureSequence",
    start: Partition,
    E: int,
    D: int,
    m_hat: Callable,
    b_hat: Callable,
    B: Optional[Fraction] = None,
    n: int = 0,
    limit: int = ENUM_LIMIT,
    budget: int = CLAIM_BUDGET,
    depth_limit: int = CLAIM_DEPTH_LIMIT,
) -> RegularityWitness:
    """
    (ℬ♯, n♯, k̂♯) for a sequence: for ℬ♯ ⪯ ℬ ⪯ ℬ′ ⪯ B̂(n♯, k̂♯, ℬ♯), with
    m = m̂(n♯, k̂♯, ℬ♯, ℬ, ℬ′) >= n♯ and k = k̂♯(m, ℬ′): k >= m and
    μ(𝔇_{E,ℬ,ν_k}(ℬ′)) < 1/D.

    The claims are searched with increasing depth. A counterexample (ℬ, ℬ′) at index k
    is turned into the next partition by keeping the high cells whole, with cutoff
    K = max(4D·B, 1), which raises θ_k by at least 1/(2⁵DE²).

    Args:
        seq: the sequence (ν_n)
        start: 𝒜
        E, D: tolerances
        m_hat: m̂(n, k̂, ℬ♯, ℬ, ℬ′); see ``seq_window`` for plain index functionals
        b_hat: B̂(n, k̂, ℬ♯) ⪰ ℬ♯; see ``seq_refiner``
        B: bound on the norms, defaulting to the largest one
        n: least admissible n♯
        limit: enumeration limit per interval
        budget: number of pair checks before giving up
        depth_limit: deepest claim tried

    Raises:
        SearchExhausted: if the budget or the depth limit is exceeded
        CertificateMissing: if the witness fails its oracle
    """
    norm = seq.bound
    B = norm if B is None else Fraction(B)
    if B < norm:
        raise BoundViolation(f"declared bound {B} is below the sequence bound {norm}")
    K = max(4 * D * B, Fraction(1))
    search = _ClaimSearch(seq, E, D, K, m_hat, b_hat, limit, budget)
    found: Optional[_Satisfied] = None
    for depth in range(1, depth_limit + 1):
        try:
            search.claim(depth, n, start)
        except _Satisfied as sat:
            if sat.tag is not search.tag:
                raise
            found = sat
            break
        logger.debug(f"Claim depth {depth} extended; {search.checks} checks so far")
    search.finished = True
    if found is None:
        raise SearchExhausted(f"no sequential regularity witness up to depth {depth_limit}")

    witness = RegularityWitness(
        "regularity-seq",
        found.partition,
        E,
        D,
        K,
        n=found.n,
        k_hat=found.k_hat,
        trace=list(search.steps),
        bound=iteration_bound_seq(B, D, E),
        iterations=found.depth,
        sampled=search.sampled,
        payload={"checks": search.checks},
    )
    check = verify_regularity_1d_seq(seq, witness, m_hat, b_hat, limit)
    witness.verified = check["holds"]
    if not witness.verified:
        raise CertificateMissing(f"sequential regularity witness fails: worst {check['worst']}")
    logger.debug(
        f"Sequential regularity at depth {found.depth}: n♯ = {found.n}, "
        f"{len(found.partition)} cells, {search.checks} checks"
    )
    return witness


def iteration_bound_seq(B: Fraction, D: int, E: int) -> int:
    """2¹⁰D³E²B² + 2⁹D²E²B²."""
    B = Fraction(B)
    return ceil(2**10 * D**3 * E**2 * B**2 + 2**9 * D**2 * E**2 * B**2)


def verify_regularity_1d_seq(
    seq: "MeasureSequence",
    witness: RegularityWitness,
    m_hat: Callable,
    b_hat: Callable,
    limit: int = ENUM_LIMIT,
) -> Dict[str, Any]:
    n, k_hat, base = witness.n, witness.k_hat, witness.partition
    ceiling = b_hat(n, k_hat, base)
    pairs, sampled = pairs_between(base, ceiling, limit)
    threshold = Fraction(1, witness.D)
    worst = Fraction(0)
    holds = True
    for first, second in pairs:
        m = m_hat(n, k_hat, base, first, second)
        if m < n:
            continue
        k = k_hat(m, second)
        measure = defect_measure(witness.E, first, seq[k], second)
        worst = max(worst, measure)
        if k < m or measure >= threshold:
            holds = False
    return {"holds": holds, "worst": worst, "checked": len(pairs), "sampled": sampled}


# --- windows of indices -----------------------------------------------------------


def _stable_start(
    seq: "MeasureSequence", E: int, D: int, first: Partition, second: Partition, f: Functional, m: int
) -> int:
    """m† >= m whose window [m†, f(m†)] is density-stable on most of both partitions."""
    inner_memo = Closure(
        lambda x: metastable_partition_bulk(seq, E, D, f, x, second, mode=DENSITY)["m"],
        f"m_{second}",
    )
    outer = Functional(lambda x: f(inner_memo(x)), label=f"{f.label}∘m_{second}", assume_monotone=True)
    m0 = metastable_partition_bulk(seq, E, D, outer, m, first, mode=DENSITY)["m"]
    return inner_memo(m0)


def regularity_interval(
    seq: "MeasureSequence",
    start: Partition,
    E: int,
    D: int,
    b_hat: Callable,
    m_hat: Callable,
    l_hat: Callable,
    B: Optional[Fraction] = None,
    n: int = 0,
    limit: int = ENUM_LIMIT,
    budget: int = CLAIM_BUDGET,
) -> RegularityWitness:
    """
    Regularity over whole windows of indices.

    Returns (ℬ♯, n♯, k̂♯) such that, with m♭ = m̂(n♯, k̂♯, ℬ♯) >= n♯ and
    l̂♭ = L̂(n♯, k̂♯, ℬ♯), every ℬ♯ ⪯ ℬ ⪯ ℬ′ ⪯ B̂(n♯, k̂♯, ℬ♯) has
    k = k̂♯(m♭, l̂♭, ℬ, ℬ′) >= m♭ and μ(𝔇_{E,ℬ,ν_l}(ℬ′)) < 1/D for all l in [k, l̂♭(k)].

    Runs the sequential theorem at (3E, 3D). For its k̂₀ the window functional is
    k̂†(m, l̂, ℬ, ℬ′) = k̂₀(m†, ℬ′), where m† >= m starts a window
    [m†, l̂(k̂₀(m†, ℬ′))] on which the densities of both ℬ and ℬ′ move by less than
    1/(3E) outside measure 1/(3D) each.
    """
    daggers: Dict[int, Tuple[Callable, Closure, Closure]] = {}

    def dagger(k0: Callable) -> Tuple[Closure, Closure]:
        kept = daggers.get(id(k0))
        if kept is not None:
            return kept[1], kept[2]

        def m_dagger(m: int, l_fn: Callable, first: Partition, second: Partition) -> int:
            f = Functional(lambda x: l_fn(k0(x, second)), label="l̂∘k̂₀", assume_monotone=True)
            return _stable_start(seq, 3 * E, 3 * D, first, second, f, m)

        m_memo = Closure(m_dagger, "m†")
        k_dag = Closure(
            lambda m, l_fn, first, second: k0(m_memo(m, l_fn, first, second), second), "k̂†"
        )
        daggers[id(k0)] = (k0, k_dag, m_memo)
        return k_dag, m_memo

    def m0(n0: int, k0: Callable, base: Partition, first: Partition, second: Partition) -> int:
        k_dag, m_memo = dagger(k0)
        return m_memo(m_hat(n0, k_dag, base), l_hat(n0, k_dag, base), first, second)

    def b0(n0: int, k0: Callable, base: Partition) -> Partition:
        return b_hat(n0, dagger(k0)[0], base)

    inner = regularity_1d_seq(
        seq,
        start,
        3 * E,
        3 * D,
        Closure(m0, "m̂₀"),
        Closure(b0, "B̂₀"),
        B=B,
        n=n,
        limit=limit,
        budget=budget,
    )
    witness = RegularityWitness(
        "regularity-interval",
        inner.partition,
        E,
        D,
        inner.K,
        n=inner.n,
        k_hat=dagger(inner.k_hat)[0],
        trace=inner.trace,
        bound=inner.bound,
        iterations=inner.iterations,
        sampled=inner.sampled,
        payload={"inner": inner},
    )
    check = verify_regularity_interval(seq, witness, b_hat, m_hat, l_hat, limit)
    witness.verified = check["holds"]
    witness.sampled = witness.sampled or check["sampled"]
    if not witness.verified:
        raise CertificateMissing(f"interval regularity witness fails: worst {check['worst']}")
    return witness


def verify_regularity_interval(
    seq: "MeasureSequence",
    witness: RegularityWitness,
    b_hat: Callable,
    m_hat: Callable,
    l_hat: Callable,
    limit: int = ENUM_LIMIT,
) -> Dict[str, Any]:
    n, k_hat, base = witness.n, witness.k_hat, witness.partition
    m_flat = m_hat(n, k_hat, base)
    result = {"holds": True, "worst": Fraction(0), "checked": 0, "sampled": False}
    if m_flat < n:
        return result
    l_flat = l_hat(n, k_hat, base)
    pairs, sampled = pairs_between(base, b_hat(n, k_hat, base), limit)
    result["sampled"] = sampled
    threshold = Fraction(1, witness.D)
    for first, second in pairs:
        k = k_hat(m_flat, l_flat, first, second)
        if k < m_flat:
            result["holds"] = False
        for l in window(seq, k, max(k, l_flat(k))):
            measure = defect_measure(witness.E, first, seq[l], second)
            result["worst"] = max(result["worst"], measure)
            result["checked"] += 1
            if measure >= threshold:
                result["holds"] = False
    return result


# --- pairs of sequences -----------------------------------------------------------


def index_pair(l_fn: Callable, r: int) -> Closure:
    """k ↦ l̂(k, r)."""
    return Closure(lambda k: l_fn(k, r), f"{getattr(l_fn, 'label', 'l̂')}(·,{r})")


def regularity_interval_double(
    ds: "DoubleSequence",
    E: int,
    D: int,
    b0_hat: Callable,
    b1_hat: Callable,
    m_hat: Callable,
    q_hat: Callable,
    l_hat: Callable,
    s_hat: Callable,
    start: Optional[Partition] = None,
    limit: int = ENUM_LIMIT,
    budget: int = CLAIM_BUDGET,
) -> RegularityWitness:
    """
    One partition regular for both ρ and λ over windows.

    The functionals all take (n, p, k̂, r̂, ℬ); L̂ and Ŝ return two-index maps l̂(k, r) and
    ŝ(k, r). The witness carries (ℬ♯, n♯, p♯, k̂♯, r̂♯) with k̂♯, r̂♯ taking
    (m, q, l̂, ŝ, ℬ⁰, ℬ¹). With ℬ⁰ = B̂⁰(…), ℬ¹ = B̂¹(…), k = k̂♯(…), r = r̂♯(…):
    μ(𝔇_{E,ℬ♯,ρ_l}(ℬ⁰)) < 1/D for l in [k, l̂(k, r)] and μ(𝔇_{E,ℬ♯,λ_s}(ℬ¹)) < 1/D for
    s in [r, ŝ(k, r)].

    The outer window theorem runs on ρ; each of its functionals first runs the window
    theorem on λ from the current ρ-partition and reads its answers back through the
    composite k̂⋆, r̂⋆.
    """
    start = ds.space.trivial() if start is None else start
    frames: Dict[Tuple[int, int, Partition], Dict[str, Any]] = {}

    def frame(n0: int, k0: Callable, base: Partition) -> Dict[str, Any]:
        key = (n0, id(k0), base)
        found = frames.get(key)
        if found is not None:
            return found
        stars: Dict[Tuple[int, int, Partition], Dict[str, Any]] = {}

        def star(p_d: int, r_d: Callable, b_d: Partition) -> Dict[str, Any]:
            skey = (p_d, id(r_d), b_d)
            cached = stars.get(skey)
            if cached is not None:
                return cached
            pairs: Dict[Tuple[int, int], Closure] = {}

            def paired(l_fn: Callable, r: int) -> Closure:
                pkey = (id(l_fn), r)
                if pkey not in pairs:
                    pairs[pkey] = index_pair(l_fn, r)
                return pairs[pkey]

            def k_r(r: int, m, q, l_fn, s_fn, c0, c1) -> int:
                return k0(m, paired(l_fn, r), b_d, c0)

            s_memo: Dict[tuple, Closure] = {}

            def s_window(c0, c1, m, q, l_fn, s_fn) -> Closure:
                wkey = (c0, c1, m, q, id(l_fn), id(s_fn))
                if wkey not in s_memo:
                    s_memo[wkey] = Closure(
                        lambda r: s_fn(k_r(r, m, q, l_fn, s_fn, c0, c1), r), "ŝ⋆(·)"
                    )
                return s_memo[wkey]

            r_star = Closure(
                lambda m, q, l_fn, s_fn, c0, c1: r_d(q, s_window(c0, c1, m, q, l_fn, s_fn), b_d, c1),
                "r̂⋆",
            )
            k_star = Closure(
                lambda m, q, l_fn, s_fn, c0, c1: k_r(
                    r_star(m, q, l_fn, s_fn, c0, c1), m, q, l_fn, s_fn, c0, c1
                ),
                "k̂⋆",
            )
            cached = {
                "args": (n0, p_d, k_star, r_star, b_d),
                "k_star": k_star,
                "r_star": r_star,
                "s_window": s_window,
                "paired": paired,
                "r_d": r_d,
            }
            stars[skey] = cached
            return cached

        def evaluated(p_d: int, r_d: Callable, b_d: Partition) -> Dict[str, Any]:
            s = star(p_d, r_d, b_d)
            if "c0" not in s:
                args = s["args"]
                s["c0"] = b0_hat(*args)
                s["c1"] = b1_hat(*args)
                s["m"] = m_hat(*args)
                s["q"] = q_hat(*args)
                s["l"] = l_hat(*args)
                s["s"] = s_hat(*args)
            return s

        def s_dagger(p_d: int, r_d: Callable, b_d: Partition) -> Closure:
            s = evaluated(p_d, r_d, b_d)
            return s["s_window"](s["c0"], s["c1"], s["m"], s["q"], s["l"], s["s"])

        inner = regularity_interval(
            ds.lam,
            base,
            E,
            D,
            Closure(lambda p_d, r_d, b_d: b1_hat(*star(p_d, r_d, b_d)["args"]), "B̂†"),
            Closure(lambda p_d, r_d, b_d: q_hat(*star(p_d, r_d, b_d)["args"]), "q̂†"),
            Closure(s_dagger, "Ŝ†"),
            B=ds.B,
            limit=limit,
            budget=budget,
        )
        s = evaluated(inner.n, inner.k_hat, inner.partition)
        s_dag = s_dagger(inner.n, inner.k_hat, inner.partition)
        r_value = inner.k_hat(s["q"], s_dag, inner.partition, s["c1"])
        found = {
            "k0": k0,
            "inner": inner,
            "star": s,
            "l_outer": s["paired"](s["l"], r_value),
        }
        frames[key] = found
        return found

    outer = regularity_interval(
        ds.rho,
        start,
        E,
        D,
        Closure(lambda n0, k0, base: frame(n0, k0, base)["star"]["c0"], "B̂₀"),
        Closure(lambda n0, k0, base: frame(n0, k0, base)["star"]["m"], "m̂₀"),
        Closure(lambda n0, k0, base: frame(n0, k0, base)["l_outer"], "L̂₀"),
        B=ds.B,
        limit=limit,
        budget=budget,
    )
    final = frame(outer.n, outer.k_hat, outer.partition)
    s = final["star"]
    inner = final["inner"]
    witness = RegularityWitness(
        "regularity-double",
        inner.partition,
        E,
        D,
        outer.K,
        n=outer.n,
        p=inner.n,
        k_hat=s["k_star"],
        r_hat=s["r_star"],
        iterations=outer.iterations + inner.iterations,
        sampled=outer.sampled or inner.sampled,
        payload={"outer": outer, "inner": inner},
    )
    check = verify_regularity_double(
        ds, witness, b0_hat, b1_hat, m_hat, q_hat, l_hat, s_hat
    )
    witness.verified = check["holds"]
    if not witness.verified:
        raise CertificateMissing(f"double regularity witness fails: {check}")
    return witness


def verify_regularity_double(
    ds: "DoubleSequence",
    witness: RegularityWitness,
    b0_hat: Callable,
    b1_hat: Callable,
    m_hat: Callable,
    q_hat: Callable,
    l_hat: Callable,
    s_hat: Callable,
) -> Dict[str, Any]:
    args = (witness.n, witness.p, witness.k_hat, witness.r_hat, witness.partition)
    m_flat, q_flat = m_hat(*args), q_hat(*args)
    l_fn, s_fn = l_hat(*args), s_hat(*args)
    c0, c1 = b0_hat(*args), b1_hat(*args)
    k = witness.k_hat(m_flat, q_flat, l_fn, s_fn, c0, c1)
    r = witness.r_hat(m_flat, q_flat, l_fn, s_fn, c0, c1)
    threshold = Fraction(1, witness.D)
    base = witness.partition
    result: Dict[str, Any] = {"holds": True, "k": k, "r": r, "worst_rho": Fraction(0), "worst_lam": Fraction(0)}
    if m_flat >= witness.n:
        if k < m_flat:
            result["holds"] = False
        for l in window(ds.rho, k, max(k, l_fn(k, r))):
            measure = defect_measure(witness.E, base, ds.rho[l], c0)
            result["worst_rho"] = max(result["worst_rho"], measure)
            if measure >= threshold:
                result["holds"] = False
    if q_flat >= witness.p:
        if r < q_flat:
            result["holds"] = False
        for s in window(ds.lam, r, max(r, s_fn(k, r))):
            measure = defect_measure(witness.E, base, ds.lam[s], c1)
            result["worst_lam"] = max(result["worst_lam"], measure)
            if measure >= threshold:
                result["holds"] = False
    return result


def energy_trace_rows(witness: RegularityWitness) -> Iterator[Dict[str, Any]]:
    """Rows of an energy trace, one per recorded step."""
    for entry in witness.trace:
        if len(entry) == 2:
            step, value = entry
            yield {"kind": witness.kind, "step": step, "k": None, "before": None, "after": value}
        else:
            depth, k, before, after = entry
            yield {"kind": witness.kind, "step": depth, "k": k, "before": before, "after": after}
