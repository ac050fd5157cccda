"""
Exchange module for the measure mining project.

Swapping the limits of ρ_nλ_p. The control-interval stage bounds the gap
|(ρ_mλ_s)(Ω) − (ρ_lλ_q)(Ω)| by six defect terms plus 6/E; each further stage removes terms
with a uniform-continuity argument until only 32/E remains.

Every stage witness keeps the frame of the control-interval stage it rests on (the regular
partition, both level-set refinements and the cells left unstable by the bulk searches), so
the verifier can rebuild every defect set and every term from the raw grid.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Tuple

from src.config import logger
from src.errors import CertificateMissing, IndexOutOfRange, PreconditionViolated
from src.functionals import Closure, Functional
from src.measure_core import (
    ABSOLUTE,
    Partition,
    StepMeasure,
    density,
    measure_eval,
)
from src.metastability import (
    VALUE,
    metastable_partition_bulk,
    np_msuc_witness,
    quantitative_vhs,
    window,
)
from src.products import level_set_refinement, star_product
from src.regularity import difference_set, regularity_interval_double
from src.sequences import DoubleSequence, certify_assumptions

CONTROL = 0
ELIMINATE_RHO = 1
ELIMINATE_LAM = 2
ELIMINATE_PRODUCTS = 3
EXCHANGE = 4

STAGE_NAMES = {
    CONTROL: "control_interval",
    ELIMINATE_RHO: "eliminate_rho",
    ELIMINATE_LAM: "eliminate_lambda",
    ELIMINATE_PRODUCTS: "eliminate_products",
    EXCHANGE: "exchange_limits",
}

# surviving terms and slack numerator per stage
STAGE_TERMS = {
    CONTROL: (
        ("ms_exceptional", "lq_exceptional", "rho_defect", "ms_defect", "lam_defect", "lq_defect"),
        6,
    ),
    ELIMINATE_RHO: (("ms_exceptional", "lq_exceptional", "ms_defect", "lam_defect", "lq_defect"), 7),
    ELIMINATE_LAM: (("ms_exceptional", "lq_exceptional", "ms_defect", "lq_defect"), 8),
    ELIMINATE_PRODUCTS: (("lq_exceptional", "lq_defect"), 20),
    EXCHANGE: ((), 32),
}


@dataclass(frozen=True)
class ExchangeFrame:
    """The partitions a control-interval witness rests on."""

    E: int
    B: int
    D0: int
    D1: int
    m: int
    q: int
    base: Partition
    rho_levels: Partition
    rho_high: Partition
    lam_levels: Partition
    lam_high: Partition
    rho_unstable: Partition
    lam_unstable: Partition


@dataclass
class ExchangeWitness:
    """
    Indices, functionals and per-(l, s) records of one exchange stage.

    ``functionals`` holds the witness maps (k̂/r̂, k̂/ŝ or l̂/ŝ by stage) and ``inputs`` the
    functionals the stage was called with, so the verifier can re-derive every index.
    """

    stage: int
    E: int
    D: Dict[str, int]
    m: int
    q: int
    functionals: Dict[str, Callable]
    inputs: Dict[str, Callable]
    frame: ExchangeFrame
    indices: Dict[str, int] = field(default_factory=dict)
    records: List[Dict[str, Any]] = field(default_factory=list)
    gap: Fraction = Fraction(0)
    verified: bool = False
    payload: Dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return STAGE_NAMES[self.stage]


class SwapResult(NamedTuple):
    m: int
    s: int
    q: int
    l: int
    gap: Fraction
    E: int
    witness: ExchangeWitness


# --- terms ------------------------------------------------------------------------


def _union(*partitions: Partition) -> Partition:
    cells = set()
    for partition in partitions:
        cells.update(partition.cells)
    return Partition(tuple(cells))


def _high_cells(nu: StepMeasure, partition: Partition, C: Fraction) -> List:
    space = nu.space
    return [c for c in partition if space.mu(c) > 0 and abs(density(nu, c)) > C]


def exchange_sets(
    ds: DoubleSequence, frame: ExchangeFrame, l: int, s: int
) -> Dict[str, Partition]:
    """
    The defect sets at one (l, s).

    ``defect_rho`` collects the cells of the ρ_m level sets where λ_s is irregular together
    with the high part of those level sets, ``defect_lam`` the same for λ_q and ρ_l, and
    ``exceptional`` the cells of ℬ₀ that are unstable or carry density above B·D⁰ for ρ_l
    or λ_s.
    """
    C = frame.B * frame.D0
    E = frame.B * frame.E
    rho_l, lam_s = ds.rho[l], ds.lam[s]
    defect_rho = _union(difference_set(E, frame.base, lam_s, frame.rho_levels), frame.rho_high)
    defect_lam = _union(difference_set(E, frame.base, rho_l, frame.lam_levels), frame.lam_high)
    unstable = set(frame.rho_unstable.cells) | set(frame.lam_unstable.cells)
    high = set(_high_cells(lam_s, frame.base, C)) | set(_high_cells(rho_l, frame.base, C))
    exceptional = Partition(tuple(c for c in frame.base if c in unstable or c in high))
    return {"exceptional": exceptional, "defect_rho": defect_rho, "defect_lam": defect_lam}


def exchange_terms(
    ds: DoubleSequence, frame: ExchangeFrame, m: int, q: int, l: int, s: int
) -> Dict[str, Any]:
    """The gap |(ρ_mλ_s)(Ω) − (ρ_lλ_q)(Ω)| and all six terms bounding it."""
    sets = exchange_sets(ds, frame, l, s)
    C = frame.B * frame.D0
    ms = ds.product(m, s)
    lq = ds.product(l, q)
    omega = ds.space.omega
    terms = {
        "ms_exceptional": measure_eval(ms, sets["exceptional"], ABSOLUTE),
        "lq_exceptional": measure_eval(lq, sets["exceptional"], ABSOLUTE),
        "rho_defect": C * measure_eval(ds.rho[m], sets["defect_rho"], ABSOLUTE),
        "ms_defect": measure_eval(ms, sets["defect_rho"], ABSOLUTE),
        "lam_defect": C * measure_eval(ds.lam[q], sets["defect_lam"], ABSOLUTE),
        "lq_defect": measure_eval(lq, sets["defect_lam"], ABSOLUTE),
    }
    measures = {name: ds.space.mu(part) for name, part in sets.items()}
    return {
        "gap": abs(ms(omega) - lq(omega)),
        "terms": terms,
        "measures": measures,
        "sets": sets,
    }


def star_bridge_rows(
    ds: DoubleSequence, frame: ExchangeFrame, l: int, s: int
) -> List[Dict[str, Any]]:
    """
    |(ρ_m∗λ_s)(σ) − (ρ_l∗λ_q)(σ)| on every positive cell of ℬ₀ outside the exceptional set,
    against 2/(|ℬ₀|E).
    """
    sets = exchange_sets(ds, frame, l, s)
    skip = set(sets["exceptional"].cells)
    limit = Fraction(2, len(frame.base) * frame.E)
    rows = []
    for cell in frame.base:
        if cell in skip or ds.space.mu(cell) == 0:
            continue
        value = abs(
            star_product(ds.rho[frame.m], ds.lam[s], cell)
            - star_product(ds.rho[l], ds.lam[frame.q], cell)
        )
        rows.append({"cell": cell, "value": value, "limit": limit, "holds": value <= limit})
    return rows


def _measure_limits(stage: int, D: Dict[str, int]) -> Dict[str, Fraction]:
    if stage == CONTROL:
        return {
            "exceptional": Fraction(4, D["D0"]),
            "defect_rho": Fraction(2, D["D1"]),
            "defect_lam": Fraction(2, D["D1"]),
        }
    if stage == ELIMINATE_RHO:
        return {
            "exceptional": Fraction(4, D["D0"]),
            "defect_rho": Fraction(2, D["D0"]),
            "defect_lam": Fraction(2, D["D1"]),
        }
    if stage in (ELIMINATE_LAM, ELIMINATE_PRODUCTS):
        return {
            "exceptional": Fraction(4, D["D"]),
            "defect_rho": Fraction(2, D["D"]),
            "defect_lam": Fraction(2, D["D"]),
        }
    return {}


def stage_record(
    ds: DoubleSequence, witness: ExchangeWitness, l: int, s: int, m: Optional[int] = None, q: Optional[int] = None
) -> Dict[str, Any]:
    """Evaluate the stage inequality of ``witness`` at one (l, s)."""
    stage = witness.stage
    m = witness.m if m is None else m
    q = witness.q if q is None else q
    evaluated = exchange_terms(ds, witness.frame, m, q, l, s)
    names, slack = STAGE_TERMS[stage]
    bound = sum((evaluated["terms"][n] for n in names), Fraction(0)) + Fraction(slack, witness.E)
    limits = _measure_limits(stage, witness.D)
    measures_hold = all(evaluated["measures"][k] < v for k, v in limits.items())
    return {
        "l": l,
        "s": s,
        "gap": evaluated["gap"],
        "terms": {n: evaluated["terms"][n] for n in names},
        "all_terms": evaluated["terms"],
        "measures": evaluated["measures"],
        "bound": bound,
        "holds": evaluated["gap"] <= bound and measures_hold,
    }


# --- derived indices --------------------------------------------------------------


def derive_indices(witness: ExchangeWitness) -> Dict[str, int]:
    """Re-derive k♯, r♯, l♭, s♭ (or their stage counterparts) from the functionals."""
    m, q = witness.m, witness.q
    f, inp = witness.functionals, witness.inputs
    stage = witness.stage
    if stage in (CONTROL, ELIMINATE_RHO, ELIMINATE_LAM):
        l_fn = inp["L"](m, q, f["k"], f["r"])
        s_fn = inp["S"](m, q, f["k"], f["r"])
        k = f["k"](l_fn, s_fn)
        r = f["r"](l_fn, s_fn)
        return {"k": k, "r": r, "l_flat": l_fn(k, r), "s_flat": s_fn(k, r)}
    if stage == ELIMINATE_PRODUCTS:
        l_fn = inp["L"](m, q, f["k"], f["s"])
        r_flat = inp["r"](m, q, f["k"], f["s"])
        k = f["k"](l_fn, r_flat)
        s = f["s"](l_fn, r_flat)
        return {"k": k, "s": s, "r_flat": r_flat, "l_flat": l_fn(k, s)}
    k_flat = inp["k"](m, q, f["l"], f["s"])
    r_flat = inp["r"](m, q, f["l"], f["s"])
    return {
        "k_flat": k_flat,
        "r_flat": r_flat,
        "l": f["l"](k_flat, r_flat),
        "s": f["s"](k_flat, r_flat),
    }


def _index_grid(ds: DoubleSequence, witness: ExchangeWitness, idx: Dict[str, int]) -> List[Tuple[int, int]]:
    stage = witness.stage
    if stage in (CONTROL, ELIMINATE_RHO, ELIMINATE_LAM):
        if idx["l_flat"] < idx["k"] or idx["s_flat"] < idx["r"]:
            return []
        return [
            (l, s)
            for l in window(ds.rho, idx["k"], idx["l_flat"])
            for s in window(ds.lam, idx["r"], idx["s_flat"])
        ]
    if stage == ELIMINATE_PRODUCTS:
        if idx["l_flat"] < idx["k"]:
            return []
        return [(l, idx["s"]) for l in window(ds.rho, idx["k"], idx["l_flat"])]
    return [(idx["l"], idx["s"])]


def _structure_holds(witness: ExchangeWitness, idx: Dict[str, int]) -> bool:
    stage = witness.stage
    if stage in (CONTROL, ELIMINATE_RHO, ELIMINATE_LAM):
        return idx["k"] >= witness.m and idx["r"] >= witness.q
    if stage == ELIMINATE_PRODUCTS:
        return idx["k"] >= witness.m and (idx["r_flat"] < witness.q or idx["s"] >= idx["r_flat"])
    return True


def _fill_records(ds: DoubleSequence, witness: ExchangeWitness) -> ExchangeWitness:
    idx = derive_indices(witness)
    witness.indices = idx
    witness.records = [stage_record(ds, witness, l, s) for l, s in _index_grid(ds, witness, idx)]
    witness.gap = max((r["gap"] for r in witness.records), default=Fraction(0))
    witness.verified = verify_exchange_conclusion(ds, witness)
    if not witness.verified:
        failing = [r for r in witness.records if not r["holds"]]
        raise CertificateMissing(
            f"{witness.name} witness fails at {len(failing)} of {len(witness.records)} index pairs"
        )
    logger.debug(
        f"{witness.name}: m♯ = {witness.m}, q♯ = {witness.q}, {len(witness.records)} records, "
        f"gap {witness.gap}"
    )
    return witness


def verify_exchange_conclusion(
    ds: DoubleSequence, witness: ExchangeWitness, stage: Optional[int] = None
) -> bool:
    """
    Recompute the stage inequality from the raw grid and compare it with the records.

    Indices are re-derived from the functionals; every record must sit inside the derived
    index range and agree with a fresh evaluation, and every evaluation must satisfy the
    inequality with its defect measures below the stage bounds.

    Raises:
        IndexOutOfRange: if a record uses an index outside the derived range
    """
    if stage is not None and stage != witness.stage:
        witness = ExchangeWitness(**{**witness.__dict__, "stage": stage})
    idx = derive_indices(witness)
    if not _structure_holds(witness, idx):
        return False
    grid = set(_index_grid(ds, witness, idx))
    for record in witness.records:
        l, s = record["l"], record["s"]
        if l < 0 or s < 0 or (l, s) not in grid:
            raise IndexOutOfRange(f"record at (l, s) = ({l}, {s}) is outside the derived range")
    if len(witness.records) != len(grid):
        return False
    for record in witness.records:
        fresh = stage_record(ds, witness, record["l"], record["s"])
        if fresh["gap"] != record["gap"] or fresh["bound"] != record["bound"]:
            return False
        if not fresh["holds"]:
            return False
    return True


# --- control interval -------------------------------------------------------------


def _settled_frame(ds: DoubleSequence, E: int, D0: int, D1: int, n: int, p: int) -> ExchangeFrame:
    # {Ω} serves as its own level sets: no defect cells, and no cell of density above B·D⁰
    base = ds.space.trivial()
    empty = Partition(())
    return ExchangeFrame(E, ds.B, D0, D1, n, p, base, base, empty, base, empty, empty, empty)


def control_interval(
    ds: DoubleSequence,
    E: int,
    D0: int,
    D1: int,
    p: int,
    n: int,
    L_hat: Callable,
    S_hat: Callable,
    certify: bool = True,
) -> ExchangeWitness:
    """
    (m♯, q♯, k̂♯, r̂♯) with the six-term bound on the exchange gap.

    With l̂♭ = L̂(m♯, q♯, k̂♯, r̂♯), ŝ♭ = Ŝ(…), k♯ = k̂♯(l̂♭, ŝ♭), r♯ = r̂♯(l̂♭, ŝ♭):
    k♯ >= m♯, r♯ >= q♯, and for l in [k♯, l̂♭(k♯, r♯)], s in [r♯, ŝ♭(k♯, r♯)]

        |(ρ_{m♯}λ_s)(Ω) − (ρ_lλ_{q♯})(Ω)| <= |ρ_{m♯}λ_s|(ℬ⁻) + |ρ_lλ_{q♯}|(ℬ⁻)
            + BD⁰|ρ_{m♯}|(ℬ^{0,−}) + |ρ_{m♯}λ_s|(ℬ^{0,−})
            + BD⁰|λ_{q♯}|(ℬ^{1,−}) + |ρ_lλ_{q♯}|(ℬ^{1,−}) + 6/E

    with μ(ℬ⁻) < 4/D⁰, μ(ℬ^{0,−}), μ(ℬ^{1,−}) < 2/D¹.

    The double regularity lemma runs at (BE, D¹). For its arguments (n₀, p₀, k̂₀, r̂₀, ℬ₀)
    a bulk search over λ on ℬ₀ (tolerance 1/(|ℬ₀|BD⁰E), exceptional 1/(3D⁰)) is nested
    inside one over ρ; the level sets of ρ_{m†} and λ_{q‡} at width 1/(BE) are handed back
    as the two refinements, λ's as the one where ρ must be regular and ρ's as the one
    where λ must be regular.

    Once n and p are past both settling indices every gap is zero and the trivial
    witness on {Ω} is returned.

    Raises:
        PreconditionViolated: if D⁰ > D¹
        CertificateMissing: if the oracle rejects the witness
    """
    if D0 > D1:
        raise PreconditionViolated(f"D⁰ = {D0} exceeds D¹ = {D1}")
    if certify:
        certify_assumptions(ds)
    B = ds.B
    D = {"D0": D0, "D1": D1}
    inputs = {"L": L_hat, "S": S_hat}

    t_rho, t_lam = ds.settled
    if n >= t_rho and p >= t_lam:
        frame = _settled_frame(ds, E, D0, D1, n, p)
        witness = ExchangeWitness(
            CONTROL,
            E,
            D,
            n,
            p,
            {"k": Closure(lambda lf, sf: n, "k̂_settled"), "r": Closure(lambda lf, sf: p, "r̂_settled")},
            inputs,
            frame,
            payload={"regime": "settled"},
        )
        return _fill_records(ds, witness)

    rho_levels = Closure(lambda base, m: level_set_refinement(ds.rho[m], base, B * E, D1, B), "B̂⁰⋆")
    lam_levels = Closure(lambda base, q: level_set_refinement(ds.lam[q], base, B * E, D1, B), "B̂¹⋆")
    frames: Dict[tuple, Dict[str, Any]] = {}

    def frame_at(n0: int, p0: int, k0: Callable, r0: Callable, base: Partition) -> Dict[str, Any]:
        key = (n0, p0, id(k0), id(r0), base)
        found = frames.get(key)
        if found is not None:
            return found
        E_bulk = len(base) * B * D0 * E

        def at_q(m_d: int, q_dd: int) -> Dict[str, Any]:
            c0 = lam_levels(base, q_dd)[0]
            c1 = rho_levels(base, m_d)[0]
            k_q = Closure(lambda lf, sf: k0(m_d, q_dd, lf, sf, c0, c1), f"k̂‡,{q_dd}")
            r_q = Closure(lambda lf, sf: r0(m_d, q_dd, lf, sf, c0, c1), f"r̂‡,{q_dd}")
            l_q = L_hat(m_d, q_dd, k_q, r_q)
            s_q = S_hat(m_d, q_dd, k_q, r_q)
            kk, rr = k_q(l_q, s_q), r_q(l_q, s_q)
            return {
                "m": m_d,
                "q": q_dd,
                "k": k_q,
                "r": r_q,
                "l_fn": l_q,
                "s_fn": s_q,
                "l_top": l_q(kk, rr),
                "s_top": s_q(kk, rr),
                "c0": c0,
                "c1": c1,
            }

        at_q_memo = Closure(at_q, "‡")

        def at_m(m_d: int) -> Dict[str, Any]:
            q_window = Functional(lambda q: at_q_memo(m_d, q)["s_top"], "q̂‡", assume_monotone=True)
            bulk = metastable_partition_bulk(ds.lam, E_bulk, 3 * D0, q_window, max(p, p0), base, mode=VALUE)
            chosen = dict(at_q_memo(m_d, bulk["m"]))
            chosen["lam_unstable"] = bulk.exceptional
            return chosen

        at_m_memo = Closure(at_m, "†")
        m_window = Functional(lambda m: at_m_memo(m)["l_top"], "m̂†", assume_monotone=True)
        bulk = metastable_partition_bulk(ds.rho, E_bulk, 3 * D0, m_window, max(n, n0), base, mode=VALUE)
        found = dict(at_m_memo(bulk["m"]))
        found["rho_unstable"] = bulk.exceptional
        found["base"] = base
        found["keep"] = (k0, r0)
        frames[key] = found
        return found

    double = regularity_interval_double(
        ds,
        B * E,
        D1,
        Closure(lambda *a: frame_at(*a)["c0"], "B̂⁰₀"),
        Closure(lambda *a: frame_at(*a)["c1"], "B̂¹₀"),
        Closure(lambda *a: frame_at(*a)["m"], "m̂₀"),
        Closure(lambda *a: frame_at(*a)["q"], "q̂₀"),
        Closure(lambda *a: frame_at(*a)["l_fn"], "L̂₀"),
        Closure(lambda *a: frame_at(*a)["s_fn"], "Ŝ₀"),
    )
    chosen = frame_at(double.n, double.p, double.k_hat, double.r_hat, double.partition)
    base = chosen["base"]
    rho_refined, rho_high = rho_levels(base, chosen["m"])
    lam_refined, lam_high = lam_levels(base, chosen["q"])
    frame = ExchangeFrame(
        E,
        B,
        D0,
        D1,
        chosen["m"],
        chosen["q"],
        base,
        rho_refined,
        rho_high,
        lam_refined,
        lam_high,
        chosen["rho_unstable"],
        chosen["lam_unstable"],
    )
    witness = ExchangeWitness(
        CONTROL,
        E,
        D,
        chosen["m"],
        chosen["q"],
        {"k": chosen["k"], "r": chosen["r"]},
        inputs,
        frame,
        payload={"regime": "constructed", "double": double},
    )
    return _fill_records(ds, witness)


# --- eliminating terms ------------------------------------------------------------


def _restage(witness: ExchangeWitness, stage: int, D: Dict[str, int], **payload: Any) -> ExchangeWitness:
    return ExchangeWitness(
        stage,
        witness.E,
        D,
        witness.m,
        witness.q,
        dict(witness.functionals),
        dict(witness.inputs),
        witness.frame,
        payload={"inner": witness, **payload},
    )


def eliminate_rho(
    ds: DoubleSequence, E: int, D0: int, D1: int, p: int, n: int, L_hat: Callable, S_hat: Callable
) -> ExchangeWitness:
    """
    Drop BD⁰|ρ_{m♯}|(ℬ^{0,−}); slack 7/E, μ(ℬ^{0,−}) < 2/D⁰.

    Uniform continuity of (ρ_m) at 4BD⁰E with m̂₀(D₀, m₀) = m♯ of the control interval
    started at m₀ with D¹ raised to max(2D₀, D¹).
    """
    if D0 > D1:
        raise PreconditionViolated(f"D⁰ = {D0} exceeds D¹ = {D1}")
    runs: Dict[Tuple[int, int], ExchangeWitness] = {}

    def run(D_0: int, m_0: int) -> ExchangeWitness:
        key = (D_0, m_0)
        if key not in runs:
            runs[key] = control_interval(ds, E, D0, max(2 * D_0, D1), p, m_0, L_hat, S_hat, certify=False)
        return runs[key]

    vhs = quantitative_vhs(ds.rho, 4 * ds.B * D0 * E, lambda D_0, m_0: run(D_0, m_0).m, n)
    inner = run(vhs["D"], vhs["m"])
    witness = _restage(inner, ELIMINATE_RHO, {"D0": D0, "D1": D1}, vhs=vhs)
    return _fill_records(ds, witness)


def eliminate_lam(
    ds: DoubleSequence, E: int, D: int, p: int, n: int, L_hat: Callable, S_hat: Callable
) -> ExchangeWitness:
    """
    Drop BD|λ_{q♯}|(ℬ^{1,−}); slack 8/E, all defect measures against D.

    Uniform continuity of (λ_q) at 4BDE with q̂₀(D₀, q₀) = q♯ of the previous stage started
    at q₀ with D¹ = max(2D₀, D).
    """
    runs: Dict[Tuple[int, int], ExchangeWitness] = {}

    def run(D_0: int, q_0: int) -> ExchangeWitness:
        key = (D_0, q_0)
        if key not in runs:
            runs[key] = eliminate_rho(ds, E, D, max(2 * D_0, D), q_0, n, L_hat, S_hat)
        return runs[key]

    vhs = quantitative_vhs(ds.lam, 4 * ds.B * D * E, lambda D_0, q_0: run(D_0, q_0).q, p)
    inner = run(vhs["D"], vhs["m"])
    witness = _restage(inner, ELIMINATE_LAM, {"D": D}, vhs=vhs)
    return _fill_records(ds, witness)


def eliminate_products(
    ds: DoubleSequence, E: int, D: int, p: int, n: int, L_hat: Callable, r_flat: Callable
) -> ExchangeWitness:
    """
    Drop the ρ_{m♯}λ_{s♯} terms; slack 20/E.

    Returns (m♯, q♯, k̂♯, ŝ♯) for L̂(m, q, k̂, ŝ) and r̂♭(m, q, k̂, ŝ): with
    l̂♭ = L̂(…), r♭ = r̂♭(…), k♯ = k̂♯(l̂♭, r♭), s♯ = ŝ♯(l̂♭, r♭), l♭ = l̂♭(k♯, s♯),
    k♯ >= m♯, s♯ >= r♭ when r♭ >= q♯, and the bound
    |ρ_lλ_{q♯}|(ℬ⁻) + |ρ_lλ_{q♯}|(ℬ^{1,−}) + 20/E holds for l in [k♯, l♭].

    n/p uniform continuity of the grid picks (D₀, m₀, p₀, r̂₀); each candidate runs the
    previous stage at D = 4·max(D₀, D) with s-windows routed through r̂₀.
    """
    daggers: Dict[tuple, Dict[str, Any]] = {}

    def dagger(D_0: int, m_0: int, p_0: int, r_0: Callable) -> Dict[str, Any]:
        key = (D_0, m_0, p_0, id(r_0))
        found = daggers.get(key)
        if found is not None:
            return found
        s_cache: Dict[tuple, Closure] = {}
        l_cache: Dict[tuple, Closure] = {}

        def s_mr(m_d: int, r: int) -> Closure:
            if (m_d, r) not in s_cache:
                s_cache[(m_d, r)] = Closure(lambda k, r2: r_0(m_d, max(r, r2, p_0)), f"ŝ_{m_d},{r}")
            return s_cache[(m_d, r)]

        def l_mlr(m_d: int, l_fn: Callable, r: int) -> Closure:
            key2 = (m_d, id(l_fn), r)
            if key2 not in l_cache:
                l_cache[key2] = Closure(
                    lambda k, r2: l_fn(k, r_0(m_d, max(r, r2, p_0))), f"l̂_{m_d},{r}"
                )
                l_cache[(key2, "keep")] = l_fn
            return l_cache[key2]

        k_mk = Closure(
            lambda m_d, k_d: Closure(lambda l_fn, r: k_d(l_mlr(m_d, l_fn, r), s_mr(m_d, r)), "k̂_m,k"),
            "k̂_m",
        )
        s_mrd = Closure(
            lambda m_d, r_d: Closure(
                lambda l_fn, r: r_0(m_d, max(r, r_d(l_mlr(m_d, l_fn, r), s_mr(m_d, r)), p_0)),
                "ŝ_m,r",
            ),
            "ŝ_m",
        )

        def flat(m_d: int, q_d: int, k_d: Callable, r_d: Callable) -> Tuple[Callable, int]:
            kk, ss = k_mk(m_d, k_d), s_mrd(m_d, r_d)
            return L_hat(m_d, q_d, kk, ss), r_flat(m_d, q_d, kk, ss)

        L_dag = Closure(lambda m_d, q_d, k_d, r_d: l_mlr(m_d, *flat(m_d, q_d, k_d, r_d)), "L̂†")
        S_dag = Closure(lambda m_d, q_d, k_d, r_d: s_mr(m_d, flat(m_d, q_d, k_d, r_d)[1]), "Ŝ†")

        inner = eliminate_lam(ds, E, 4 * max(D_0, D), max(p, p_0), max(n, m_0), L_dag, S_dag)
        m_d, q_d = inner.m, inner.q
        k_d, r_d = inner.functionals["k"], inner.functionals["r"]
        l_d, s_d = L_dag(m_d, q_d, k_d, r_d), S_dag(m_d, q_d, k_d, r_d)
        r_b = flat(m_d, q_d, k_d, r_d)[1]
        found = {
            "inner": inner,
            "m": m_d,
            "q": max(r_b, r_d(l_d, s_d), p_0),
            "k": k_mk(m_d, k_d),
            "s": s_mrd(m_d, r_d),
            "keep": r_0,
        }
        daggers[key] = found
        return found

    np_witness = np_msuc_witness(
        ds,
        E,
        lambda D_0, m_0, p_0, r_0: dagger(D_0, m_0, p_0, r_0)["m"],
        lambda D_0, m_0, p_0, r_0: dagger(D_0, m_0, p_0, r_0)["q"],
        n=n,
        p=p,
    )
    chosen = dagger(np_witness["D"], np_witness["m"], np_witness["q"], np_witness.payload["r_hat"])
    inner = chosen["inner"]
    witness = ExchangeWitness(
        ELIMINATE_PRODUCTS,
        E,
        {"D": D},
        inner.m,
        inner.q,
        {"k": chosen["k"], "s": chosen["s"]},
        {"L": L_hat, "r": r_flat},
        inner.frame,
        payload={"inner": inner, "np": np_witness},
    )
    return _fill_records(ds, witness)


def control_interval_refined(
    ds: DoubleSequence,
    stage: int,
    E: int,
    D: Dict[str, int],
    p: int,
    n: int,
    L_hat: Callable,
    second: Callable,
) -> ExchangeWitness:
    """
    Dispatch to the elimination stages.

    Stage 1 takes D = {"D0", "D1"} and Ŝ; stage 2 takes {"D"} and Ŝ; stage 3 takes {"D"}
    and r̂♭ in place of Ŝ.
    """
    if stage == ELIMINATE_RHO:
        return eliminate_rho(ds, E, D["D0"], D["D1"], p, n, L_hat, second)
    if stage == ELIMINATE_LAM:
        return eliminate_lam(ds, E, D["D"], p, n, L_hat, second)
    if stage == ELIMINATE_PRODUCTS:
        return eliminate_products(ds, E, D["D"], p, n, L_hat, second)
    raise ValueError(f"Unknown stage: {stage}. Available: 1, 2, 3")


# --- exchanging the limits --------------------------------------------------------


def exchange_limits(
    ds: DoubleSequence,
    E: int,
    p: int,
    n: int,
    k_flat: Callable,
    r_flat: Callable,
    certify: bool = True,
) -> ExchangeWitness:
    """
    (m♯, q♯, l̂♯, ŝ♯) with |(ρ_{m♯}λ_{s♯})(Ω) − (ρ_{l♯}λ_{q♯})(Ω)| <= 32/E, where
    k♭ = k̂♭(m♯, q♯, l̂♯, ŝ♯), r♭ = r̂♭(…), l♯ = l̂♯(k♭, r♭), s♯ = ŝ♯(k♭, r♭).

    p/n uniform continuity on the transposed grid picks (D₀, q₀, n₀, k̂₀); each candidate runs
    the product-elimination stage at D = 4D₀ with l-windows routed through k̂₀.
    """
    if certify:
        certify_assumptions(ds)
    daggers: Dict[tuple, Dict[str, Any]] = {}

    def dagger(D_0: int, q_0: int, n_0: int, k_0: Callable) -> Dict[str, Any]:
        key = (D_0, q_0, n_0, id(k_0))
        found = daggers.get(key)
        if found is not None:
            return found
        numbers: Dict[Tuple[int, int], Closure] = {}
        composites: Dict[tuple, Closure] = {}
        windows: Dict[tuple, Closure] = {}

        def l_qk(q: int, k: int) -> Closure:
            if (q, k) not in numbers:
                numbers[(q, k)] = Closure(lambda k2, r: k_0(q, max(k, k2)), f"l̂⋆,{q},{k}")
            return numbers[(q, k)]

        def l_qK(q: int, K: Callable) -> Closure:
            ckey = (q, id(K))
            if ckey not in composites:
                composites[ckey] = Closure(lambda k, r: k_0(q, max(k, K(l_qk(q, k), r))), f"l̂⋆,{q}")
                composites[(ckey, "keep")] = K
            return composites[ckey]

        def s_qKS(q: int, K: Callable, S: Callable) -> Closure:
            wkey = (q, id(K), id(S))
            if wkey not in windows:
                windows[wkey] = Closure(lambda k, r: S(l_qk(q, k), r), f"ŝ⋆,{q}")
                windows[(wkey, "keep")] = (K, S)
            return windows[wkey]

        def star(m_d: int, q_d: int, K: Callable, S: Callable) -> Tuple[Closure, Closure]:
            return l_qK(q_d, K), s_qKS(q_d, K, S)

        L_dag = Closure(
            lambda m_d, q_d, K, S: l_qk(q_d, k_flat(m_d, q_d, *star(m_d, q_d, K, S))), "L̂†"
        )
        r_dag = Closure(lambda m_d, q_d, K, S: r_flat(m_d, q_d, *star(m_d, q_d, K, S)), "r̂†")

        inner = eliminate_products(ds, E, 4 * D_0, max(p, q_0), max(n, n_0), L_dag, r_dag)
        m_d, q_d = inner.m, inner.q
        K, S = inner.functionals["k"], inner.functionals["s"]
        l_star, s_star = star(m_d, q_d, K, S)
        k_b = k_flat(m_d, q_d, l_star, s_star)
        r_d = r_flat(m_d, q_d, l_star, s_star)
        k_d = K(l_qk(q_d, k_b), r_d)
        found = {
            "inner": inner,
            "q": q_d,
            "m": max(k_b, k_d),
            "l": l_star,
            "s": s_star,
            "keep": k_0,
        }
        daggers[key] = found
        return found

    np_witness = np_msuc_witness(
        ds.transpose(),
        E,
        lambda D_0, q_0, n_0, k_0: dagger(D_0, q_0, n_0, k_0)["q"],
        lambda D_0, q_0, n_0, k_0: dagger(D_0, q_0, n_0, k_0)["m"],
        n=p,
        p=n,
    )
    chosen = dagger(np_witness["D"], np_witness["m"], np_witness["q"], np_witness.payload["r_hat"])
    inner = chosen["inner"]
    witness = ExchangeWitness(
        EXCHANGE,
        E,
        {},
        inner.m,
        inner.q,
        {"l": chosen["l"], "s": chosen["s"]},
        {"k": k_flat, "r": r_flat},
        inner.frame,
        payload={"inner": inner, "np": np_witness},
    )
    witness = _fill_records(ds, witness)
    witness.payload["products_record"] = stage_record(
        ds, inner, witness.indices["l"], witness.indices["s"]
    )
    logger.info(
        f"Limits exchanged at E = {E}: m♯ = {witness.m}, q♯ = {witness.q}, "
        f"l♯ = {witness.indices['l']}, s♯ = {witness.indices['s']}, gap {witness.gap}"
    )
    return witness


def swap_precision(eps: Fraction) -> int:
    """Least E with 32/E < ε."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("ε must be positive")
    return int(32 / eps) + 1


def simple_swap(ds: DoubleSequence, eps: Fraction) -> SwapResult:
    """
    s > m and l > q with |(ρ_mλ_s)(Ω) − (ρ_lλ_q)(Ω)| < ε.

    Runs the exchange with k̂♭(m, q, l̂, ŝ) = q + 1 and r̂♭(m, q, l̂, ŝ) = m + 1.

    Raises:
        CertificateMissing: if the indices or the gap miss the requirement
    """
    eps = Fraction(eps)
    E = swap_precision(eps)
    k_flat = Closure(lambda m, q, lf, sf: q + 1, "q+1")
    r_flat = Closure(lambda m, q, lf, sf: m + 1, "m+1")
    witness = exchange_limits(ds, E, 0, 0, k_flat, r_flat)
    m, q = witness.m, witness.q
    l, s = witness.indices["l"], witness.indices["s"]
    gap = witness.gap
    if not (s > m and l > q):
        raise CertificateMissing(f"swap indices out of order: m = {m}, s = {s}, q = {q}, l = {l}")
    if gap >= eps:
        raise CertificateMissing(f"swap gap {gap} is not below {eps}")
    logger.info(f"Swap at ε = {eps}: m = {m}, s = {s}, q = {q}, l = {l}, gap {gap}")
    return SwapResult(m, s, q, l, gap, E, witness)
