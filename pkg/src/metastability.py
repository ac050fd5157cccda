"""
Metastability module for the measure mining project.

Metastable weak convergence, bounded fluctuations, the partition-uniform variants, the
quantitative Vitali-Hahn-Saks theorem and n/p-metastable uniform continuity of product
grids. Every search runs over eventually constant sequences, so windows are clipped at the
index where the sequence settles: past it every window is stable and no functional needs
to be evaluated.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Sequence, Tuple

from src.config import LOG_EVERY, VERIFY_ATOM_LIMIT, logger
from src.errors import (
    CertificateMissing,
    FluctuationCertificateMissing,
    PreconditionViolated,
    SearchExhausted,
)
from src.functionals import Closure, Functional, label_of
from src.measure_core import (
    EMPTY,
    EMPTY_PARTITION,
    AtomSet,
    MeasureSpace,
    Partition,
    StepMeasure,
    modulus_of_continuity,
    small_sets,
)

if TYPE_CHECKING:
    from src.sequences import DoubleSequence, MeasureSequence

VALUE = "value"
DENSITY = "density"


@dataclass
class MetastabilityWitness:
    """Indices found by a metastability construction, with what its oracle saw."""

    kind: str
    indices: Dict[str, Any]
    verified: bool = False
    good: Optional[Partition] = None
    exceptional: Optional[Partition] = None
    chain: List[Dict[str, Any]] = field(default_factory=list)
    payload: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.indices[key]


def as_functional(fn: Any, label: Optional[str] = None) -> Functional:
    if isinstance(fn, Functional):
        return fn
    if isinstance(fn, int):
        value = fn
        return Functional(lambda m: value, label=label or str(value))
    return Functional(fn, label=label or label_of(fn))


@lru_cache(maxsize=256)
def small(space: MeasureSpace, D: int) -> Tuple[AtomSet, ...]:
    return tuple(small_sets(space, D))


def window_end(f: Callable[[int], int], seq: "MeasureSequence", start: int) -> int:
    """f(start), or start itself once the sequence has settled."""
    if start >= seq.settled_from:
        return start
    return max(start, f(start))


def window(seq: "MeasureSequence", start: int, end: int) -> range:
    """The indices of [start, end] that can still differ from each other."""
    return range(start, min(end, max(start, seq.settled_from)) + 1)


def set_stable(seq: "MeasureSequence", sigma: AtomSet, E: int, start: int, end: int) -> bool:
    """|ν_m(σ) − ν_m′(σ)| < 1/E for all m, m′ in the window."""
    values = [seq[m](sigma) for m in window(seq, start, end)]
    return max(values) - min(values) < Fraction(1, E)


def cell_stable(
    seq: "MeasureSequence", cell: AtomSet, E: int, start: int, end: int, mode: str = VALUE
) -> bool:
    """
    Stability of one cell over a window.

    Value mode bounds the variation |ν_m − ν_m′|(σ); density mode bounds
    |δ_{ν_m}(σ) − δ_{ν_m′}(σ)|, and null cells count as stable there.
    """
    tolerance = Fraction(1, E)
    indices = window(seq, start, end)
    if mode == DENSITY:
        carrier = seq.space.mu(cell)
        if carrier == 0:
            return True
        values = [seq[m](cell) / carrier for m in indices]
        return max(values) - min(values) < tolerance
    if mode != VALUE:
        raise ValueError(f"Unknown mode: {mode}")
    rows = [[seq[m].values[i] for i in cell] for m in indices]
    for a, b in combinations(rows, 2):
        if sum((abs(x - y) for x, y in zip(a, b)), Fraction(0)) >= tolerance:
            return False
    return True


def first_stable(test: Callable[[int], bool], start: int, settled: int) -> int:
    m = start
    while not test(m):
        if m >= settled:
            raise SearchExhausted(f"window at settled index {m} reported unstable")
        m += 1
    return m


# --- metastable weak convergence -------------------------------------------------


def search_metastable_weak(
    seq: "MeasureSequence", E: int, m_hat: Any, n: int
) -> MetastabilityWitness:
    """
    M♯ >= n such that every set σ stabilises on some window [m♯, m̂(m♯)], m♯ <= M♯.

    Args:
        seq: the sequence
        E: tolerance 1/E
        m_hat: the window functional
        n: least admissible start

    Returns:
        witness with indices M and n; per-set starts are kept in the payload
    """
    f = as_functional(m_hat)
    settled = seq.settled_from
    starts: Dict[AtomSet, int] = {}
    for sigma in seq.space.all_sets():
        starts[sigma] = first_stable(
            lambda m: set_stable(seq, sigma, E, m, window_end(f, seq, m)), n, settled
        )
    M = max(starts.values(), default=n)
    witness = MetastabilityWitness("weak", {"M": M, "n": n}, payload={"starts": starts})
    witness.verified = weak_holds(seq, E, f, n, M)
    if not witness.verified:
        raise CertificateMissing(f"metastable weak witness M = {M} fails")
    logger.debug(f"Weak metastability: M = {M} from n = {n} (E = {E}, {f.label})")
    return witness


def weak_holds(seq: "MeasureSequence", E: int, m_hat: Any, n: int, M: int) -> bool:
    f = as_functional(m_hat)
    if M < n:
        return False
    for sigma in seq.space.all_sets():
        if not any(set_stable(seq, sigma, E, m, window_end(f, seq, m)) for m in range(n, M + 1)):
            return False
    return True


def _partition_weak(
    seq: "MeasureSequence", E: int, cells: Sequence[AtomSet], f: Functional, n: int
) -> int:
    settled = seq.settled_from
    last = cells[-1]

    def reach(m0: int) -> int:
        return first_stable(
            lambda m: cell_stable(seq, last, E, m, window_end(f, seq, m)), m0, settled
        )

    if len(cells) == 1:
        return reach(n)
    reach_memo = Closure(reach, f"m_{last}")
    shifted = Functional(
        lambda m0: f(reach_memo(m0)), label=f"{f.label}∘m_{last}", assume_monotone=True
    )
    m0 = _partition_weak(seq, E, cells[:-1], shifted, n)
    return reach_memo(m0)


def metastable_partition_weak(
    seq: "MeasureSequence", E: int, partition: Partition, m_hat: Any, n: int
) -> MetastabilityWitness:
    """
    m♯ >= n with |ν_m − ν_m′|(σ) < 1/E on [m♯, m̂(m♯)] for every cell σ.

    Built one cell at a time: the last cell's least stable start m_{m₀} is threaded into
    the functional m̂₀(m₀) = m̂(m_{m₀}) handed to the remaining cells.
    """
    f = as_functional(m_hat)
    cells = list(partition)
    m = _partition_weak(seq, E, cells, f, n) if cells else n
    end = window_end(f, seq, m)
    verified = m >= n and all(cell_stable(seq, c, E, m, end) for c in cells)
    if not verified:
        raise CertificateMissing(f"partition weak witness m = {m} fails")
    return MetastabilityWitness("partition-weak", {"m": m, "n": n}, verified=True, good=partition)


# --- bounded fluctuations ---------------------------------------------------------


def count_fluctuations(
    seq: "MeasureSequence",
    sigma: AtomSet,
    E: int,
    m_hat: Any,
    n: int,
    exact_power: bool = False,
    mode: Optional[str] = None,
) -> int:
    """
    Number of m̂-steps from n before σ stabilises.

    By default returns the least v such that some m♯ in [n, m̂^v(n)] has a stable window
    [m♯, m̂(m♯)]. With ``exact_power`` the window must be [m̂^v(n), m̂^{v+1}(n)].
    ``mode`` switches from the signed value ν_m(σ) to the cell variation or density.
    """
    f = as_functional(m_hat)
    settled = seq.settled_from

    def stable(a: int, b: int) -> bool:
        if mode is None:
            return set_stable(seq, sigma, E, a, b)
        return cell_stable(seq, sigma, E, a, b, mode)

    if exact_power:
        v, a = 0, n
        while True:
            b = window_end(f, seq, a)
            if stable(a, b):
                return v
            a, v = b, v + 1

    target = first_stable(lambda m: stable(m, window_end(f, seq, m)), n, settled)
    v, a = 0, n
    while a < target:
        a, v = f(a), v + 1
    return v


def bulk_levels(V: int, D: int) -> int:
    """Least k with (1 − 1/V)^k <= 1/D, i.e. ⌈ln(1/D)/ln(1 − 1/V)⌉."""
    if V <= 1 or D <= 1:
        return 1
    ratio = Fraction(V - 1, V)
    k = 1
    while ratio**k > Fraction(1, D):
        k += 1
    return k


def _one_step(
    seq: "MeasureSequence",
    E: int,
    f: Functional,
    V: int,
    start: int,
    cells: List[AtomSet],
    mode: str,
) -> Tuple[int, int, List[AtomSet]]:
    space = seq.space
    best: Optional[Tuple[int, int, List[AtomSet]]] = None
    a = start
    for v in range(V):
        b = window_end(f, seq, a)
        bad = [c for c in cells if not cell_stable(seq, c, E, a, b, mode)]
        if best is None or space.mu(Partition(tuple(bad))) < space.mu(Partition(tuple(best[2]))):
            best = (v, a, bad)
        if not bad:
            break
        a = b
    return best


def _bulk_level(
    seq: "MeasureSequence",
    E: int,
    f: Functional,
    V: int,
    k: int,
    start: int,
    cells: List[AtomSet],
    mode: str,
) -> Tuple[int, int, List[AtomSet]]:
    if k <= 1:
        return _one_step(seq, E, f, V, start, cells, mode)
    settled = seq.settled_from

    def leap(a: int) -> int:
        if a >= settled:
            return a
        return f.iterate(V, a, cap=settled)[0]

    g = Functional(leap, label=f"{f.label}^{V}", assume_monotone=True)
    v, a, bad = _bulk_level(seq, E, g, V, k - 1, start, cells, mode)
    v2, a2, bad2 = _one_step(seq, E, f, V, a, bad, mode)
    return v * V + v2, a2, bad2


def _certify_fluctuations(
    seq: "MeasureSequence",
    partition: Partition,
    E: int,
    f: Functional,
    n: int,
    V: int,
    mode: str,
) -> None:
    for cell in partition:
        count = count_fluctuations(seq, cell, E, f, n, exact_power=True, mode=mode)
        if count >= V:
            raise FluctuationCertificateMissing(
                f"cell {cell} needs {count} steps, more than the bound V = {V} allows"
            )


def metastable_partition_bulk(
    seq: "MeasureSequence",
    E: int,
    D: int,
    m_hat: Any,
    n: int,
    partition: Partition,
    V: Optional[int] = None,
    mode: str = VALUE,
) -> MetastabilityWitness:
    """
    m♯ >= n whose window [m♯, m̂(m♯)] is stable on cells carrying (1 − 1/D) of ℬ♭.

    The search iterates the one-step pigeonhole k = ⌈ln(1/D)/ln(1 − 1/V)⌉ times, each
    level running the previous one on m̂^V, and stops at the first level whose exceptional
    measure is already at most μ(ℬ♭)/D.

    Args:
        seq: the sequence
        E: stability tolerance 1/E
        D: exceptional part at most μ(ℬ♭)/D
        m_hat: window functional
        n: least start
        partition: ℬ♭
        V: fluctuation bound; checked against the sequence when supplied
        mode: "value" (variation on the cell) or "density"

    Raises:
        FluctuationCertificateMissing: if a supplied V is too small
    """
    f = as_functional(m_hat)
    space = seq.space
    if V is None:
        V = seq.fluctuation_bound
    else:
        _certify_fluctuations(seq, partition, E, f, n, V, mode)
    levels = bulk_levels(V, D)
    total = space.mu(partition)
    target = total / D

    stages: List[Dict[str, Any]] = []
    if n >= seq.settled_from or not partition.cells:
        m, bad = n, []
    else:
        m, bad = n, list(partition)
        for k in range(1, levels + 1):
            v, m, bad = _bulk_level(seq, E, f, V, k, n, list(partition), mode)
            measure = space.mu(Partition(tuple(bad)))
            stages.append({"level": k, "v": v, "m": m, "exceptional": measure})
            logger.debug(f"Bulk level {k}/{levels}: m = {m}, exceptional {measure}")
            if measure <= target:
                break

    exceptional = Partition(tuple(bad))
    good = Partition(tuple(c for c in partition if c not in set(bad)))
    end = window_end(f, seq, m)
    verified = (
        m >= n
        and space.mu(exceptional) <= target
        and all(cell_stable(seq, c, E, m, end, mode) for c in good)
    )
    if not verified:
        raise CertificateMissing(
            f"bulk witness m = {m} leaves {space.mu(exceptional)} exceptional, target {target}"
        )
    return MetastabilityWitness(
        "bulk",
        {"m": m, "n": n, "V": V, "k": levels},
        verified=True,
        good=good,
        exceptional=exceptional,
        chain=stages,
        payload={"mode": mode},
    )


# --- uniform continuity -----------------------------------------------------------


def inflated_moduli(seq: "MeasureSequence", E: int) -> List[int]:
    """ω′_m = max(2ω′_{m−1}, ω_{ν_m}(E)) up to the settling index."""
    moduli: List[int] = []
    for m in range(seq.settled_from + 1):
        w = modulus_of_continuity(seq[m], E)
        if moduli:
            w = max(w, 2 * moduli[-1])
        moduli.append(w)
    return moduli


def _vhs_step(
    seq: "MeasureSequence", E: int, m_i: int, sigma: AtomSet, D: int, top: int
) -> Optional[Tuple[int, AtomSet]]:
    threshold = Fraction(1, 4 * E)
    base = seq[m_i]
    for m in range(m_i + 1, min(top, max(m_i, seq.settled_from)) + 1):
        nu = seq[m]
        for tau in small(seq.space, D):
            candidate = sigma ^ tau
            if abs(base(candidate) - nu(candidate)) >= threshold:
                return m, candidate
    return None


def quantitative_vhs(
    seq: "MeasureSequence", E: int, m_hat: Callable[[int, int], int], n: int
) -> MetastabilityWitness:
    """
    (m♯, D♯) such that |ν_m(σ)| < 1/E whenever μ(σ) < 1/D♯ and m ∈ [m♯, m̂(D♯, m♯)].

    Walks the chain (m_i, σ_i) with D_i = 2ω′_{m_i}(16E): it moves to the least
    m ∈ (m_i, m̂(D_i, m_i)] and least σ with μ(σ_i △ σ) < 1/D_i and
    |ν_{m_i}(σ) − ν_m(σ)| >= 1/(4E), and stops when there is none.
    """
    moduli = inflated_moduli(seq, 16 * E)

    def D_at(m: int) -> int:
        return 2 * moduli[min(m, len(moduli) - 1)]

    m_i, sigma = n, EMPTY
    chain = [{"i": 0, "m": m_i, "D": D_at(m_i), "sigma": sigma}]
    while True:
        D = D_at(m_i)
        top = m_i if m_i >= seq.settled_from else max(m_i, m_hat(D, m_i))
        step = _vhs_step(seq, E, m_i, sigma, D, top)
        if step is None:
            break
        m_i, sigma = step
        chain.append({"i": len(chain), "m": m_i, "D": D_at(m_i), "sigma": sigma})
        if len(chain) % LOG_EVERY == 0:
            logger.debug(f"VHS chain reached step {len(chain)} at m = {m_i}")

    D = D_at(m_i)
    witness = MetastabilityWitness("vhs", {"m": m_i, "D": D, "n": n}, chain=chain)
    witness.verified = msuc_check(seq, E, m_hat, n, m_i, D)
    if not witness.verified:
        raise CertificateMissing(f"VHS witness (m = {m_i}, D = {D}) fails")
    return witness


def chain_invariant_holds(seq: "MeasureSequence", chain: List[Dict[str, Any]]) -> bool:
    """μ(σ_j △ σ_i) < 2/D_j for every j < i along a VHS chain."""
    space = seq.space
    for i, later in enumerate(chain):
        for earlier in chain[:i]:
            if space.mu(earlier["sigma"] ^ later["sigma"]) >= Fraction(2, earlier["D"]):
                return False
    return True


def _msuc_window(seq: "MeasureSequence", m_hat: Callable[[int, int], int], m: int, D: int) -> range:
    top = m if m >= seq.settled_from else max(m, m_hat(D, m))
    return window(seq, m, top)


def msuc_check(
    seq: "MeasureSequence",
    E: int,
    m_hat: Callable[[int, int], int],
    n: int,
    m: int,
    D: int,
) -> bool:
    """True iff m >= n and |ν_k(σ)| < 1/E for every μ(σ) < 1/D and k ∈ [m, m̂(D, m)]."""
    if m < n:
        return False
    tolerance = Fraction(1, E)
    sets = small(seq.space, D)
    for k in _msuc_window(seq, m_hat, m, D):
        nu = seq[k]
        if any(abs(nu(sigma)) >= tolerance for sigma in sets):
            return False
    return True


def partition_corollary_holds(
    seq: "MeasureSequence", E: int, m_hat: Callable[[int, int], int], m: int, D: int
) -> bool:
    """
    |ν_k|(𝒜) < 1/E for every partition of measure < 1/D over the window.

    The largest |ν_k|(𝒜) with union U is the atomic one, so sets suffice.
    """
    tolerance = Fraction(1, E)
    sets = small(seq.space, D)
    for k in _msuc_window(seq, m_hat, m, D):
        nu = seq[k]
        if any(nu.total_variation(sigma) >= tolerance for sigma in sets):
            return False
    return True


# --- n/p-metastable uniform continuity -------------------------------------------


def np_conclusion(
    ds: "DoubleSequence",
    E: int,
    m_hat: Callable,
    q_hat: Callable,
    D: int,
    m: int,
    q: int,
    r_hat: Callable[[int, int], int],
) -> Dict[str, Any]:
    """
    Evaluate the n/p conclusion at one candidate.

    With m♭ = m̂(D, m, q, r̂), q♭ = q̂(D, m, q, r̂) and r = r̂(m♭, q♭): when m♭ >= m and
    q♭ >= q, requires r >= q♭ and |(ρ_{m♭}λ_r)(σ)| < 1/E for every μ(σ) < 1/D.
    """
    m_flat = m_hat(D, m, q, r_hat)
    q_flat = q_hat(D, m, q, r_hat)
    row: Dict[str, Any] = {"D": D, "m": m, "q": q, "m_flat": m_flat, "q_flat": q_flat}
    if m_flat < m or q_flat < q:
        row.update(r=None, guarded=False, holds=True, worst=Fraction(0))
        return row
    r = r_hat(m_flat, q_flat)
    nu = ds.product(m_flat, r)
    worst = max((abs(nu(sigma)) for sigma in small(ds.space, D)), default=Fraction(0))
    row.update(r=r, guarded=True, worst=worst, holds=r >= q_flat and worst < Fraction(1, E))
    return row


def _find_sigma0(
    ds: "DoubleSequence", E: int, D: int, m: int, m_flat: int, r: int
) -> Optional[AtomSet]:
    if ds.space.size > VERIFY_ATOM_LIMIT:
        return None
    tolerance = Fraction(1, E)
    near = ds.product(m, r)
    far = ds.product(m_flat, r)
    sets = small(ds.space, D)
    for sigma0 in ds.space.all_sets():
        if all(abs(near(sigma0 ^ t) - far(sigma0 ^ t)) < tolerance for t in sets):
            return sigma0
    return None


def np_msuc_witness(
    ds: "DoubleSequence",
    E: int,
    m_hat: Callable,
    q_hat: Callable,
    n: int = 0,
    p: int = 0,
    clause3_factor: int = 16,
) -> MetastabilityWitness:
    """
    (D♯, m♯, q♯, r̂♯) making (ρ_nλ_p) n/p-metastably uniformly continuous at E.

    Candidates come from the recursive functionals r̂_{i,D,n,p}: r̂_0(m, q) = max(p, q),
    and r̂_{i+1} takes a uniform-continuity witness (q*, D*) of the row ρ_m at
    tolerance 1/(4E·4) and hands m̂, q̂ the functional r̂_{i,D*,m,q*}. Every candidate
    produced on the way is checked against the conclusion, the outermost first. If none
    passes, the corner past both settling indices is used, where the conclusion reduces
    to the modulus of the limit product.

    Args:
        ds: product grid
        E: tolerance
        m_hat, q_hat: adversary functionals of (D, m, q, r̂)
        n, p: least admissible indices
        clause3_factor: the small-set clause is checked at 1/(4E·factor/4); 16 gives
            1/(16E), 4 the looser 1/(4E)

    Raises:
        SearchExhausted: if even the corner fails (impossible for eventually constant grids)
    """
    inner_E = 4 * E
    vhs_E = inner_E * clause3_factor // 4
    V = ds.rho.fluctuation_bound
    candidates: List[Tuple[int, int, int, Closure]] = []
    cache: Dict[Tuple[int, int, int, int], Closure] = {}

    def r_hat(i: int, D: int, n0: int, p0: int) -> Closure:
        key = (i, D, n0, p0)
        found = cache.get(key)
        if found is not None:
            return found
        if i == 0:
            fn = lambda m, q: max(p0, q)  # noqa: E731
        else:

            def fn(m: int, q: int) -> int:
                m, q = max(m, n0), max(q, p0)

                def r_star(Dv: int, qv: int) -> int:
                    Ds = max(2 * Dv, 2 * D)
                    inner = r_hat(i - 1, Ds, m, qv)
                    return inner(m_hat(Ds, m, qv, inner), q_hat(Ds, m, qv, inner))

                w = quantitative_vhs(ds.row(m), vhs_E, r_star, q)
                Ds = max(2 * w["D"], 2 * D)
                inner = r_hat(i - 1, Ds, m, w["m"])
                candidates.append((Ds, m, w["m"], inner))
                return inner(m_hat(Ds, m, w["m"], inner), q_hat(Ds, m, w["m"], inner))

        found = Closure(fn, f"r̂_{i},{D},{n0},{p0}")
        cache[key] = found
        return found

    def r_top(Dv: int, qv: int) -> int:
        inner = r_hat(V, 2 * Dv, n, qv)
        return inner(m_hat(2 * Dv, n, qv, inner), q_hat(2 * Dv, n, qv, inner))

    top = quantitative_vhs(ds.row(n), vhs_E, r_top, p)
    D_top = 2 * top["D"]
    top_candidate = (D_top, n, top["m"], r_hat(V, D_top, n, top["m"]))
    r_top(top["D"], top["m"])
    ordered = [top_candidate] + [c for c in reversed(candidates) if c is not top_candidate]

    strategy = "transcribed"
    chosen = None
    for D, m, q, rh in ordered:
        if m < n or q < p:
            continue
        row = np_conclusion(ds, E, m_hat, q_hat, D, m, q, rh)
        if row["holds"]:
            chosen = (D, m, q, rh, row)
            break
    if chosen is None:
        strategy = "corner"
        m = max(n, ds.rho.settled_from)
        q = max(p, ds.lam.settled_from)
        floor_q = q
        rh = Closure(lambda a, b: max(b, floor_q), "r̂_corner")
        limit = ds.product(m, q)
        D = modulus_of_continuity(limit, E)
        row = np_conclusion(ds, E, m_hat, q_hat, D, m, q, rh)
        if not row["holds"]:
            raise SearchExhausted("no n/p uniform continuity witness, corner included")
        chosen = (D, m, q, rh, row)
        logger.warning(f"n/p uniform continuity fell back to the corner (m = {m}, q = {q})")

    D, m, q, rh, row = chosen
    sigma0 = None
    if row["guarded"]:
        sigma0 = _find_sigma0(ds, inner_E, D, m, row["m_flat"], row["r"])
    return MetastabilityWitness(
        "np-msuc",
        {"D": D, "m": m, "q": q, "m_flat": row["m_flat"], "q_flat": row["q_flat"], "r": row["r"]},
        verified=True,
        payload={
            "r_hat": rh,
            "sigma0": sigma0,
            "strategy": strategy,
            "candidates": len(ordered),
            "worst": row["worst"],
        },
    )


def verify_np_msuc(
    ds: "DoubleSequence", E: int, m_hat: Callable, q_hat: Callable, witness: MetastabilityWitness
) -> bool:
    row = np_conclusion(
        ds, E, m_hat, q_hat, witness["D"], witness["m"], witness["q"], witness.payload["r_hat"]
    )
    return row["holds"]


def require_monotone_window(m_hat: Callable, D: int, m: int) -> int:
    """Evaluate a two-argument window functional, refusing values below m."""
    value = m_hat(D, m)
    if value < m:
        raise PreconditionViolated(f"{label_of(m_hat)}({D}, {m}) = {value} is below {m}")
    return value
