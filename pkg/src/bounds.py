"""
Bound calculus for the measure mining project.

Closed-form bound functions, their proof compositions, the fast-growing hierarchy and the
w-iterates, kept as expression trees. A tree is evaluated to an exact integer only when
its log₂ upper estimate stays below 64 bits; otherwise it stays symbolic and is compared
through log₂ interval bounds and a few monotone dominance rules.
"""
from dataclasses import dataclass
from enum import Enum
from math import inf, log2
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

from src.config import BOUND_EVAL_LIMIT, FGH_CONSTANT, logger
from src.errors import UnknownName

EVAL_BITS = BOUND_EVAL_LIMIT.bit_length() - 1


# --- expression trees -------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    terms: Tuple["BoundExpr", ...]


@dataclass(frozen=True)
class Mul:
    factors: Tuple["BoundExpr", ...]


@dataclass(frozen=True)
class Pow:
    base: "BoundExpr"
    exponent: "BoundExpr"


@dataclass(frozen=True)
class Log2:
    """⌈log₂ x⌉, zero for x <= 1."""

    arg: "BoundExpr"


@dataclass(frozen=True)
class Fgh:
    """f_j(x); ``level=None`` is f_ω(x) = f_x(x)."""

    level: Optional[int]
    arg: "BoundExpr"


@dataclass(frozen=True)
class Func:
    """An iterated map: suc, a named u, f_j or w_{j,u,B,E}."""

    kind: str
    level: int = 0
    u: str = "suc"
    B: Optional["BoundExpr"] = None
    E: Optional["BoundExpr"] = None


@dataclass(frozen=True)
class Iterate:
    func: Func
    count: "BoundExpr"
    base: "BoundExpr"


@dataclass(frozen=True)
class W:
    """w_{j,u,B,E}(x), with ``body`` its unfolding."""

    level: int
    u: str
    B: "BoundExpr"
    E: "BoundExpr"
    arg: "BoundExpr"
    body: "BoundExpr"


@dataclass(frozen=True)
class Named:
    """A named bound applied to arguments; ``body`` is its definition."""

    name: str
    args: Tuple["BoundExpr", ...]
    body: "BoundExpr"


BoundExpr = Union[Lit, Var, Add, Mul, Pow, Log2, Fgh, Iterate, W, Named]
Term = Union[int, str, BoundExpr]


class Ordering(Enum):
    LESS = "Less"
    GREATER = "Greater"
    EQUAL = "Equal"
    UNKNOWN = "Unknown"

    def flipped(self) -> "Ordering":
        return {Ordering.LESS: Ordering.GREATER, Ordering.GREATER: Ordering.LESS}.get(self, self)


def expr(x: Term) -> BoundExpr:
    if isinstance(x, bool):
        raise TypeError("booleans are not bound terms")
    if isinstance(x, int):
        if x < 0:
            raise ValueError(f"bounds are natural numbers, got {x}")
        return Lit(x)
    if isinstance(x, str):
        return Var(x)
    return x


def add(*terms: Term) -> BoundExpr:
    parts = [expr(t) for t in terms]
    literal = sum(p.value for p in parts if isinstance(p, Lit))
    rest = [p for p in parts if not isinstance(p, Lit)]
    if not rest:
        return Lit(literal)
    if literal:
        rest.append(Lit(literal))
    return rest[0] if len(rest) == 1 else Add(tuple(rest))


def mul(*factors: Term) -> BoundExpr:
    parts = [expr(f) for f in factors]
    literal = 1
    for p in parts:
        if isinstance(p, Lit):
            literal *= p.value
    rest = [p for p in parts if not isinstance(p, Lit)]
    if literal == 0:
        return Lit(0)
    if not rest:
        return Lit(literal)
    if literal != 1:
        rest.insert(0, Lit(literal))
    return rest[0] if len(rest) == 1 else Mul(tuple(rest))


def power(base: Term, exponent: Term) -> BoundExpr:
    b, e = expr(base), expr(exponent)
    if isinstance(e, Lit) and e.value == 1:
        return b
    if isinstance(e, Lit) and e.value == 0:
        return Lit(1)
    if isinstance(b, Lit) and isinstance(e, Lit) and b.value.bit_length() * e.value <= 2 * EVAL_BITS:
        value = b.value**e.value
        if value <= BOUND_EVAL_LIMIT:
            return Lit(value)
    return Pow(b, e)


def log2_ceil(x: Term) -> BoundExpr:
    x = expr(x)
    if isinstance(x, Lit):
        return Lit(_ceil_log2(x.value))
    return Log2(x)


def _ceil_log2(v: int) -> int:
    return 0 if v <= 1 else (v - 1).bit_length()


def named(name: str, args: Iterable[Term], body: BoundExpr) -> BoundExpr:
    """Wrap ``body`` under its name unless it already folded to a literal."""
    if isinstance(body, Lit):
        return body
    return Named(name, tuple(expr(a) for a in args), body)


# --- analysis ---------------------------------------------------------------------


def _fgh_exact(level: int, m: int, limit: int) -> Optional[int]:
    """f_level(m), or None once a value passes ``limit``."""
    if m <= 1 and level > 0:
        return 2 * m
    if level >= 5:
        return None
    if level == 0:
        value = m + 1
    elif level == 1:
        value = 2 * m
    elif level == 2:
        if m.bit_length() + m > limit.bit_length():
            return None
        value = m << m
    else:
        value = m
        for _ in range(m):
            value = _fgh_exact(level - 1, value, limit)
            if value is None:
                return None
    return value if value <= limit else None


def _log2_of(v: int) -> float:
    return -inf if v == 0 else log2(v)


def _exp2(x: float) -> float:
    if x == -inf:
        return 0.0
    return inf if x > 1000 else 2.0**x


class _Analyzer:
    """log₂ interval bounds and safe exact values, memoised per node identity."""

    def __init__(self, env: Optional[Dict[str, int]] = None):
        self.env = env or {}
        self._bounds: Dict[int, Tuple[float, float]] = {}
        self._values: Dict[int, Optional[int]] = {}
        self._keep: list = []

    def bounds(self, e: BoundExpr) -> Tuple[float, float]:
        key = id(e)
        if key not in self._bounds:
            self._keep.append(e)
            self._bounds[key] = self._compute_bounds(e)
        return self._bounds[key]

    def _compute_bounds(self, e: BoundExpr) -> Tuple[float, float]:
        if isinstance(e, Lit):
            v = _log2_of(e.value)
            return v, v
        if isinstance(e, Var):
            if e.name in self.env:
                v = _log2_of(self.env[e.name])
                return v, v
            return -inf, inf
        if isinstance(e, Add):
            parts = [self.bounds(t) for t in e.terms]
            lo = max(p[0] for p in parts)
            hi = max(p[1] for p in parts)
            return lo, (hi + log2(len(parts)) if hi > -inf else -inf)
        if isinstance(e, Mul):
            parts = [self.bounds(f) for f in e.factors]
            if any(p[1] == -inf for p in parts):
                return -inf, -inf
            lo = -inf if any(p[0] == -inf for p in parts) else sum(p[0] for p in parts)
            return lo, sum(p[1] for p in parts)
        if isinstance(e, Pow):
            lb, hb = self.bounds(e.base)
            le, he = self.bounds(e.exponent)
            if he == -inf:
                return 0.0, 0.0
            if hb == -inf:
                return -inf, -inf
            e_lo, e_hi = _exp2(le), _exp2(he)
            lo = -inf if lb < 0 or lb == -inf else (0.0 if lb == 0 or e_lo == 0 else e_lo * lb)
            hi = 0.0 if hb <= 0 else (inf if e_hi == inf else e_hi * hb)
            return lo, hi
        if isinstance(e, Log2):
            la, ha = self.bounds(e.arg)
            if ha <= 0:
                return -inf, -inf
            lo = log2(la) if la > 0 else -inf
            return lo, (inf if ha == inf else log2(ha + 1))
        if isinstance(e, Fgh):
            value = self.value(e)
            if value is not None:
                v = _log2_of(value)
                return v, v
            la, ha = self.bounds(e.arg)
            level = e.level
            if level == 0:
                return la, (ha + 1 if ha >= 0 else 1.0)
            if level == 1:
                return (la + 1 if la > -inf else -inf), (ha + 1 if ha > -inf else -inf)
            lo = la + _exp2(la) if la >= 1 else la
            if level == 2:
                return lo, (inf if ha > 1000 else (ha + _exp2(ha) if ha > -inf else -inf))
            return lo, inf
        if isinstance(e, Iterate):
            if e.func.kind == "suc":
                lb, hb = self.bounds(e.base)
                lc, hc = self.bounds(e.count)
                return max(lb, lc), (max(hb, hc) + 1 if max(hb, hc) > -inf else -inf)
            value = self.value(e)
            if value is not None:
                v = _log2_of(value)
                return v, v
            return self.bounds(e.base)[0], inf
        if isinstance(e, W):
            return self.bounds(e.body)
        if isinstance(e, Named):
            return self.bounds(e.body)
        raise TypeError(f"not a bound expression: {e!r}")

    def value(self, e: BoundExpr) -> Optional[int]:
        key = id(e)
        if key not in self._values:
            self._keep.append(e)
            self._values[key] = self._compute_value(e)
        return self._values[key]

    def _safe(self, e: BoundExpr) -> bool:
        return self.bounds(e)[1] < EVAL_BITS

    def _compute_value(self, e: BoundExpr) -> Optional[int]:
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Var):
            return self.env.get(e.name)
        if isinstance(e, Fgh):
            arg = self.value(e.arg)
            if arg is None:
                return None
            level = arg if e.level is None else e.level
            return _fgh_exact(level, arg, BOUND_EVAL_LIMIT)
        if isinstance(e, Iterate):
            return self._iterate_value(e)
        if isinstance(e, Log2):
            arg = self.value(e.arg)
            return None if arg is None else _ceil_log2(arg)
        if not self._safe(e):
            return None
        if isinstance(e, Add):
            parts = [self.value(t) for t in e.terms]
            return None if None in parts else sum(parts)
        if isinstance(e, Mul):
            result = 1
            for f in e.factors:
                v = self.value(f)
                if v is None:
                    return None
                result *= v
            return result
        if isinstance(e, Pow):
            b, x = self.value(e.base), self.value(e.exponent)
            return None if b is None or x is None else b**x
        if isinstance(e, (W, Named)):
            return self.value(e.body)
        return None

    def _iterate_value(self, e: Iterate) -> Optional[int]:
        count, base = self.value(e.count), self.value(e.base)
        if count is None or base is None:
            return None
        func = e.func
        if func.kind == "suc":
            total = base + count
            return total if total <= BOUND_EVAL_LIMIT else None
        if func.kind != "f" or count > BOUND_EVAL_LIMIT.bit_length():
            return None
        value = base
        for _ in range(count):
            value = _fgh_exact(func.level, value, BOUND_EVAL_LIMIT)
            if value is None:
                return None
        return value


def evaluate(e: Term, env: Optional[Dict[str, int]] = None) -> Optional[int]:
    """Exact value when the static estimate stays below 2⁶⁴, else None."""
    return _Analyzer(env).value(expr(e))


def log2_bounds(e: Term, env: Optional[Dict[str, int]] = None) -> Tuple[float, float]:
    return _Analyzer(env).bounds(expr(e))


# --- closed forms -----------------------------------------------------------------


def frak_a0(B: Term, D: Term, E: Term) -> BoundExpr:
    """2^{2¹⁰B⁴E⁴⌈log₂ D⌉}, the bulk-metastability power count."""
    body = power(2, mul(2**10, power(B, 4), power(E, 4), log2_ceil(D)))
    return named("𝔞₀", (B, D, E), body)


def frak_a(B: Term, D: Term, E: Term) -> BoundExpr:
    return named("𝔞", (B, D, E), add(frak_a0(B, mul(3, D), mul(3, E)), 1))


def frak_b0(B: Term, D: Term, E: Term) -> BoundExpr:
    """2¹⁰D³E²B² + 2⁹D²E²B²."""
    body = add(
        mul(2**10, power(D, 3), power(E, 2), power(B, 2)),
        mul(2**9, power(D, 2), power(E, 2), power(B, 2)),
    )
    return named("𝔟₀", (B, D, E), body)


def frak_b(B: Term, D: Term, E: Term) -> BoundExpr:
    return named("𝔟", (B, D, E), frak_b0(B, mul(3, D), mul(3, E)))


def frak_C(B: Term, E: Term) -> BoundExpr:
    """2²⁹B⁶E⁶."""
    return named("C", (B, E), mul(2**29, power(B, 6), power(E, 6)))


def frak_c(x: Term, B: Term, D: Term, E: Term) -> BoundExpr:
    """(x + 2)^{𝔟(B,D,E)}: the window growth of the claim recursion."""
    return named("𝔠", (x, B, D, E), power(add(x, 2), frak_b(B, D, E)))


def frak_d(x: Term, B: Term, D: Term, E: Term) -> BoundExpr:
    """(𝔟(B,D,3E) + 1)·x·(x + 2)^{𝔟(B,D,3E)} + 1: the start index count of the claim recursion."""
    depth = frak_b(B, D, mul(3, E))
    body = add(mul(add(depth, 1), x, power(add(x, 2), depth)), 1)
    return named("𝔡", (x, B, D, E), body)


def frak_h0(B: Term, D1: Term, E: Term) -> BoundExpr:
    """(2D¹B²E)^{𝔟(B,D¹,BE)(𝔟(B,D¹,BE)+2)}: the size of the shared regular partition."""
    depth = frak_b(B, D1, mul(B, E))
    body = power(mul(2, D1, power(B, 2), E), mul(depth, add(depth, 2)))
    return named("𝔥₀", (B, D1, E), body)


def theta_growth(B: Term, D0: Term, D1: Term, E: Term) -> BoundExpr:
    """𝔞₀(B, 3D⁰, 𝔥₀(B,D¹,E)·B·D⁰·E)."""
    body = frak_a0(B, mul(3, D0), mul(frak_h0(B, D1, E), B, D0, E))
    return named("θ", (B, D0, D1, E), body)


# --- proof compositions -----------------------------------------------------------


def frak_e(x: Term, B: Term, D: Term, E: Term) -> BoundExpr:
    """
    Multiplier of b in the window bound of the interval lemma:
    (𝔞·𝔠(𝔞(x+1)) + 𝔡(𝔞(x+1)))·(𝔞(x+1) + 1).
    """
    growth = frak_a(B, D, E)
    inner = mul(growth, add(x, 1))
    body = mul(add(mul(growth, frak_c(inner, B, D, E)), frak_d(inner, B, D, E)), add(inner, 1))
    return named("𝔢", (x, B, D, E), body)


def frak_f(x: Term, B: Term, D: Term, E: Term) -> BoundExpr:
    """𝔢(x𝔞 + x²𝔢(x) + x)·(x + x²𝔢(x))."""
    growth = frak_a(B, D, E)
    ex = frak_e(x, B, D, E)
    square = mul(power(x, 2), ex)
    body = mul(frak_e(add(mul(x, growth), square, x), B, D, E), add(x, square))
    return named("𝔣", (x, B, D, E), body)


def frak_g(x: Term, B: Term, D: Term, E: Term) -> BoundExpr:
    """𝔣(x) + 𝔢(x)·x·(𝔞 + 𝔣(x) + 1)."""
    fx = frak_f(x, B, D, E)
    body = add(fx, mul(frak_e(x, B, D, E), x, add(frak_a(B, D, E), fx, 1)))
    return named("𝔤", (x, B, D, E), body)


def frak_i(B: Term, D0: Term, D1: Term, E: Term) -> BoundExpr:
    """
    The control-interval count: with θ = θ(B,D⁰,D¹,E), x = θ² + 2θ + 1,
    h₁ = 𝔞(B,D¹,BE) + 𝔣(x), h₂ = 𝔞(B,D¹,BE) + 𝔤(x):
    θ(2 + h₁ + θ(1 + h₂)) + θ(1 + h₂) + 𝔣(x) + 𝔤(x).
    """
    t = theta_growth(B, D0, D1, E)
    x = add(power(t, 2), mul(2, t), 1)
    BE = mul(B, E)
    growth = frak_a(B, D1, BE)
    fx, gx = frak_f(x, B, D1, BE), frak_g(x, B, D1, BE)
    q_part = mul(t, add(1, growth, gx))
    body = add(mul(t, add(2, growth, fx, q_part)), q_part, fx, gx)
    return named("𝔦", (B, D0, D1, E), body)


CLOSED_FORMS: Dict[str, Tuple[Callable[..., BoundExpr], Tuple[str, ...]]] = {
    "a0": (frak_a0, ("B", "D", "E")),
    "a": (frak_a, ("B", "D", "E")),
    "b0": (frak_b0, ("B", "D", "E")),
    "b": (frak_b, ("B", "D", "E")),
    "C": (frak_C, ("B", "E")),
    "c": (frak_c, ("a", "B", "D", "E")),
    "d": (frak_d, ("a", "B", "D", "E")),
    "h0": (frak_h0, ("B", "D1", "E")),
    "theta": (theta_growth, ("B", "D0", "D1", "E")),
}

COMPOSED: Dict[str, Tuple[Callable[..., BoundExpr], Tuple[str, ...]]] = {
    "e": (frak_e, ("a", "B", "D", "E")),
    "f": (frak_f, ("a", "B", "D", "E")),
    "g": (frak_g, ("a", "B", "D", "E")),
    "i": (frak_i, ("B", "D0", "D1", "E")),
}

ALIASES = {
    "𝔞₀": "a0",
    "𝔞": "a",
    "𝔟₀": "b0",
    "𝔟": "b",
    "𝔠": "c",
    "𝔡": "d",
    "𝔥₀": "h0",
    "θ": "theta",
    "𝔢": "e",
    "𝔣": "f",
    "𝔤": "g",
    "𝔦": "i",
}


def _build(table: Dict[str, Tuple[Callable[..., BoundExpr], Tuple[str, ...]]], name: str, args: Dict[str, Term]) -> BoundExpr:
    key = ALIASES.get(name, name)
    if key not in table:
        raise UnknownName(f"Unknown bound: {name}. Available: {', '.join(sorted(table))}")
    fn, params = table[key]
    missing = [p for p in params if p not in args]
    if missing:
        raise ValueError(f"bound {name} needs {', '.join(missing)}")
    for p in params:
        if isinstance(args[p], int) and args[p] <= 0:
            raise ValueError(f"bound {name} needs positive {p}, got {args[p]}")
    built = fn(*(args[p] for p in params))
    value = evaluate(built)
    return Lit(value) if value is not None else built


def closed_form(name: str, **args: Term) -> BoundExpr:
    """
    A printed closed form: 𝔞₀, 𝔞, 𝔟₀, 𝔟, C, 𝔠, 𝔡, 𝔥₀ or θ (ASCII names a0, a, b0, b,
    C, c, d, h0, theta also accepted).

    Raises:
        UnknownName: for any other name
    """
    return _build(CLOSED_FORMS, name, args)


def composed_bound(name: str, **args: Term) -> BoundExpr:
    """
    A bound assembled by the proof compositions: 𝔢, 𝔣, 𝔤 or 𝔦.

    Raises:
        UnknownName: for any other name
    """
    return _build(COMPOSED, name, args)


# --- fast-growing hierarchy -------------------------------------------------------


def fgh_eval(j: int, m: int) -> BoundExpr:
    """f_j(m) exactly when it fits, symbolic otherwise."""
    node = Fgh(j, Lit(m))
    value = _fgh_exact(j, m, BOUND_EVAL_LIMIT)
    return Lit(value) if value is not None else node


def fgh_omega(m: int) -> BoundExpr:
    return fgh_eval(m, m)


def w_count(B: Term, E: Term, m: Term) -> BoundExpr:
    """𝔞(B, E·2^{m+5}, BE)·C² + 𝔦(B, E·2^{m+5}, E·2^{m+5}, E)·C."""
    D = mul(E, power(2, add(m, 5)))
    cc = frak_C(B, E)
    return add(mul(frak_a(B, D, mul(B, E)), power(cc, 2)), mul(frak_i(B, D, D, E), cc))


def w_iter(j: int, u: str, B: Term, E: Term, m: Term) -> BoundExpr:
    """
    w_{j,u,B,E}(m): w₀ is u itself, w_{j+1} iterates w_j 𝔞(…)C² + 𝔦(…)C times.

    Only w₀ with u = suc evaluates; every higher level stays symbolic.
    """
    m = expr(m)
    B, E = expr(B), expr(E)
    if j == 0:
        if u == "suc":
            return add(m, 1)
        return Iterate(Func("u", u=u), Lit(1), m)
    body = Iterate(Func("w", j - 1, u, B, E), w_count(B, E, m), m)
    return W(j, u, B, E, m, body)


def final_bound(B: Term, E: Term) -> BoundExpr:
    """f_ω(2²²(BE)⁴ + c)."""
    return Fgh(None, add(mul(2**22, power(mul(B, E), 4)), FGH_CONSTANT))


# --- comparison -------------------------------------------------------------------


def _margin(x: float) -> float:
    return 1e-9 * max(1.0, abs(x))


def _dominates_sum(arg: BoundExpr, required: Tuple[BoundExpr, ...], constant: int) -> bool:
    """arg = Σ terms containing every required term and literals summing to >= constant."""
    terms = list(arg.terms) if isinstance(arg, Add) else [arg]
    literal = sum(t.value for t in terms if isinstance(t, Lit))
    symbolic = [t for t in terms if not isinstance(t, Lit)]
    pending = [r for r in required if not isinstance(r, Lit)]
    literal_needed = constant + sum(r.value for r in required if isinstance(r, Lit))
    for r in pending:
        if r in symbolic:
            symbolic.remove(r)
        else:
            return False
    return literal >= literal_needed


def _structural(x: BoundExpr, y: BoundExpr, an: _Analyzer) -> Ordering:
    if isinstance(x, Named) or isinstance(y, Named):
        return _structural(x.body if isinstance(x, Named) else x, y.body if isinstance(y, Named) else y, an)
    if isinstance(x, Fgh) and isinstance(y, Fgh):
        if x.level == y.level:
            return dominance_compare(x.arg, y.arg, an.env)
        if x.arg == y.arg and x.level is not None and y.level is not None and an.bounds(x.arg)[0] >= 1:
            return Ordering.LESS if x.level < y.level else Ordering.GREATER
        return Ordering.UNKNOWN
    if isinstance(x, Iterate) and isinstance(y, Iterate):
        if x.func == y.func and x.base == y.base and an.bounds(x.base)[0] >= 0:
            return dominance_compare(x.count, y.count, an.env)
        return Ordering.UNKNOWN
    if isinstance(x, W) and x.u == "suc" and isinstance(y, Fgh) and y.level is not None:
        # w_{j,suc}(m) <= f_{2j+1}(m + E + B + c), and f_k > f_{2j+1} strictly at arguments >= 2
        if y.level > 2 * x.level + 1 and _dominates_sum(y.arg, (x.arg, x.E, x.B), FGH_CONSTANT):
            return Ordering.LESS
        return Ordering.UNKNOWN
    if isinstance(y, W) and isinstance(x, Fgh):
        return _structural(y, x, an).flipped()
    return Ordering.UNKNOWN


def dominance_compare(x: Term, y: Term, env: Optional[Dict[str, int]] = None) -> Ordering:
    """
    Sound, incomplete comparison of two bounds.

    Exact when both sides evaluate, then by disjoint log₂ intervals, then by the monotone
    rules of the hierarchy; UNKNOWN when none applies.
    """
    x, y = expr(x), expr(y)
    if x == y:
        return Ordering.EQUAL
    an = _Analyzer(env)
    vx, vy = an.value(x), an.value(y)
    if vx is not None and vy is not None:
        if vx == vy:
            return Ordering.EQUAL
        return Ordering.LESS if vx < vy else Ordering.GREATER
    lx, hx = an.bounds(x)
    ly, hy = an.bounds(y)
    if lx > hy + _margin(hy) and hy < inf:
        return Ordering.GREATER
    if hx < ly - _margin(ly) and hx < inf:
        return Ordering.LESS
    return _structural(x, y, an)


def certify_iteration_bound(observed: int, theoretical: Term) -> bool:
    """True iff ``observed`` is provably at most ``theoretical``."""
    if observed < 0:
        return False
    bound = expr(theoretical)
    verdict = dominance_compare(Lit(observed), bound)
    certified = verdict in (Ordering.LESS, Ordering.EQUAL)
    if not certified:
        logger.debug(f"Bound not certified: {observed} against {render(bound)} ({verdict.value})")
    return certified


def regularity_bound(B: Term, D: Term, E: Term) -> BoundExpr:
    """16D³E²B² + 16D²E²B²."""
    return add(
        mul(16, power(D, 3), power(E, 2), power(B, 2)),
        mul(16, power(D, 2), power(E, 2), power(B, 2)),
    )


def regularity_seq_bound(B: Term, D: Term, E: Term) -> BoundExpr:
    return frak_b0(B, D, E)


def vhs_chain_bound(B: Term, E: Term) -> BoundExpr:
    """2⁷B²E²."""
    return mul(2**7, power(B, 2), power(E, 2))


def fluctuation_bound(B: Term, E: Term) -> BoundExpr:
    """8B²E²."""
    return mul(8, power(B, 2), power(E, 2))


# --- growth classes ---------------------------------------------------------------

GROWTH_NAMES = {
    0: "constant",
    1: "polynomial",
    2: "exponential",
    3: "double exponential",
    4: "triple exponential",
}
BEYOND = "beyond elementary"


def _level(e: BoundExpr, variables: frozenset, memo: Dict[int, float]) -> float:
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, Lit):
        result: float = 0
    elif isinstance(e, Var):
        result = 1 if e.name in variables else 0
    elif isinstance(e, Add):
        result = max(_level(t, variables, memo) for t in e.terms)
    elif isinstance(e, Mul):
        result = max(_level(f, variables, memo) for f in e.factors)
    elif isinstance(e, Pow):
        lb = _level(e.base, variables, memo)
        le = _level(e.exponent, variables, memo)
        result = lb if le == 0 else max(lb, le + 1)
    elif isinstance(e, Log2):
        la = _level(e.arg, variables, memo)
        result = la - 1 if la >= 2 else la
    elif isinstance(e, Fgh):
        la = _level(e.arg, variables, memo)
        if la == 0:
            result = 0
        elif e.level is None or e.level >= 3:
            result = inf
        else:
            result = la + (1 if e.level == 2 else 0)
    elif isinstance(e, Iterate):
        lc = _level(e.count, variables, memo)
        lb = _level(e.base, variables, memo)
        if e.func.kind == "suc":
            result = max(lc, lb)
        else:
            result = 0 if lc == 0 and lb == 0 else inf
    elif isinstance(e, (W, Named)):
        result = _level(e.body, variables, memo)
    else:
        raise TypeError(f"not a bound expression: {e!r}")
    memo[key] = result
    return result


def growth_level(e: Term, variables: Iterable[str]) -> float:
    return _level(expr(e), frozenset(variables), {})


def growth_class(e: Term, variables: Iterable[str]) -> str:
    """Structural growth class of ``e`` in ``variables``; other variables count as constants."""
    level = growth_level(e, variables)
    return GROWTH_NAMES.get(int(level), BEYOND) if level != inf else BEYOND


def _in_exponent(e: BoundExpr, variables: frozenset, memo: Dict[int, bool]) -> bool:
    """Whether any of ``variables`` sits in an exponent, a logarithm or an iteration count."""
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, (Lit, Var)):
        result = False
    elif isinstance(e, Add):
        result = any(_in_exponent(t, variables, memo) for t in e.terms)
    elif isinstance(e, Mul):
        result = any(_in_exponent(f, variables, memo) for f in e.factors)
    elif isinstance(e, Pow):
        result = _level(e.exponent, variables, {}) > 0 or _in_exponent(e.base, variables, memo)
    elif isinstance(e, Log2):
        result = _level(e.arg, variables, {}) > 0
    elif isinstance(e, Fgh):
        result = _level(e.arg, variables, {}) > 0
    elif isinstance(e, Iterate):
        result = _level(e.count, variables, {}) > 0 or _in_exponent(e.base, variables, memo)
    else:
        result = _in_exponent(e.body, variables, memo)
    memo[key] = result
    return result


def is_poly_exp(e: Term, poly_vars: Iterable[str], exp_vars: Iterable[str]) -> bool:
    """
    Polynomial in ``poly_vars`` for fixed ``exp_vars``, and at most exponential in
    ``exp_vars``: the poly-exp shape f(a; x) <= a^{p(x)}·q(x).
    """
    e = expr(e)
    poly = frozenset(poly_vars)
    return (
        not _in_exponent(e, poly, {})
        and growth_level(e, poly) <= 1
        and growth_level(e, exp_vars) <= 2
        and growth_level(e, poly | frozenset(exp_vars)) <= 2
    )


# --- printing ---------------------------------------------------------------------

_PRECEDENCE = {Add: 1, Mul: 2, Pow: 3}


def _func_name(func: Func) -> str:
    if func.kind == "suc":
        return "suc"
    if func.kind == "u":
        return func.u
    if func.kind == "f":
        return f"f_{func.level}"
    return f"w_{{{func.level},{func.u},{render(func.B)},{render(func.E)}}}"


def render(e: Term, expand: bool = False) -> str:
    """Canonical text form; named bounds print as applications unless ``expand``."""
    e = expr(e)

    def wrap(child: BoundExpr, parent_prec: int) -> str:
        text = render(child, expand)
        prec = _PRECEDENCE.get(type(child), 4)
        return f"({text})" if prec <= parent_prec else text

    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return " + ".join(wrap(t, 1) if isinstance(t, Add) else render(t, expand) for t in e.terms)
    if isinstance(e, Mul):
        return "·".join(wrap(f, 2) for f in e.factors)
    if isinstance(e, Pow):
        return f"{wrap(e.base, 3)}^{wrap(e.exponent, 3)}"
    if isinstance(e, Log2):
        return f"⌈log₂ {render(e.arg, expand)}⌉"
    if isinstance(e, Fgh):
        level = "ω" if e.level is None else str(e.level)
        return f"f_{level}({render(e.arg, expand)})"
    if isinstance(e, Iterate):
        return f"{_func_name(e.func)}^({render(e.count, expand)})({render(e.base, expand)})"
    if isinstance(e, W):
        if expand:
            return render(e.body, expand)
        return f"w_{{{e.level},{e.u},{render(e.B)},{render(e.E)}}}({render(e.arg)})"
    if isinstance(e, Named):
        if expand:
            return render(e.body, expand)
        return f"{e.name}({', '.join(render(x) for x in e.args)})"
    raise TypeError(f"not a bound expression: {e!r}")
