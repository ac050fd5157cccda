"""
Configurations for the scenario experiment kinds.

Functional parameters are written as data in a small grammar, never as code:

    3                                   the constant 3
    "m"                                 the variable m
    {"affine": [a, b]}                  a·x + b, x the primary variable
    {"affine": [a, b], "of": "D"}       a·D + b
    {"max": [spec, spec, ...]}          pointwise maximum
    {"compose": [outer, inner]}         outer evaluated at x = inner
    {"iterate": spec, "times": k}       spec applied k times to x
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, FrozenSet, Tuple

from src.config import EXPERIMENT_KINDS
from src.errors import ValidationError

ITERATE_TIMES_LIMIT = 64

# Which variables each functional parameter may read; the first is its primary variable
WINDOW = ("m",)
VHS_WINDOW = ("m", "D")
NP_WINDOW_M = ("m", "D", "q")
NP_WINDOW_Q = ("q", "D", "m")
SEQ_WINDOW = ("n",)
DOUBLE_WINDOW_N = ("n", "p")
DOUBLE_WINDOW_P = ("p", "n")
PAIR_WINDOW = ("k", "r")
CHAIN_WINDOW = ("k", "r", "m", "q")
CHAIN_INDEX = ("m", "q")

REFINERS = ("halve", "atomize", "identity")
STARTS = ("trivial", "atomic")

# Per kind: families the experiment reads, parameter defaults, and the grammar variables
# of each functional parameter
EXPERIMENTS: Dict[str, Dict[str, Any]] = {
    "regularity": {
        "families": ("nu",),
        "defaults": {"index": 0, "E": 2, "D": 2, "refiner": "halve", "start": "trivial", "B": None},
        "functionals": {},
    },
    "regularity_seq": {
        "families": ("nu",),
        "defaults": {
            "E": 1,
            "D": 1,
            "refiner": "halve",
            "start": "trivial",
            "n": 0,
            "window": {"affine": [1, 1]},
        },
        "functionals": {"window": SEQ_WINDOW},
    },
    "regularity_interval": {
        "families": ("nu",),
        "defaults": {
            "E": 1,
            "D": 1,
            "refiner": "identity",
            "start": "trivial",
            "n": 0,
            "window": {"affine": [1, 0]},
            "l_window": {"affine": [1, 1]},
        },
        "functionals": {"window": SEQ_WINDOW, "l_window": ("k",)},
    },
    "regularity_double": {
        "families": ("rho", "lam"),
        "defaults": {
            "E": 1,
            "D": 1,
            "b0": "identity",
            "b1": "identity",
            "m_window": {"affine": [1, 0]},
            "q_window": {"affine": [1, 0]},
            "l_window": {"affine": [1, 1]},
            "s_window": {"affine": [1, 1]},
        },
        "functionals": {
            "m_window": DOUBLE_WINDOW_N,
            "q_window": DOUBLE_WINDOW_P,
            "l_window": PAIR_WINDOW,
            "s_window": ("r", "k"),
        },
    },
    "metastable": {
        "families": ("nu",),
        "defaults": {"E": 2, "D": 2, "n": 0, "window": {"affine": [1, 1]}},
        "functionals": {"window": WINDOW},
    },
    "vhs": {
        "families": ("nu",),
        "defaults": {"E": 1, "n": 0, "window": {"affine": [1, 1]}},
        "functionals": {"window": VHS_WINDOW},
    },
    "np_msuc": {
        "families": ("rho", "lam"),
        "defaults": {
            "E": 1,
            "n": 0,
            "p": 0,
            "m_window": {"affine": [1, 1]},
            "q_window": {"affine": [1, 1]},
        },
        "functionals": {"m_window": NP_WINDOW_M, "q_window": NP_WINDOW_Q},
    },
    "control_interval": {
        "families": ("rho", "lam"),
        "defaults": {
            "stage": 0,
            "E": 1,
            "D0": 1,
            "D1": 1,
            "D": 1,
            "n": 0,
            "p": 0,
            "L": {"affine": [1, 1]},
            "S": {"affine": [1, 1], "of": "r"},
            "r_flat": {"affine": [1, 0], "of": "q"},
        },
        "functionals": {"L": CHAIN_WINDOW, "S": ("r", "k", "m", "q"), "r_flat": CHAIN_INDEX},
    },
    "exchange": {
        "families": ("rho", "lam"),
        "defaults": {
            "E": 1,
            "n": 0,
            "p": 0,
            "k_flat": {"affine": [1, 1], "of": "q"},
            "r_flat": {"affine": [1, 1]},
        },
        "functionals": {"k_flat": CHAIN_INDEX, "r_flat": CHAIN_INDEX},
    },
    "simple_swap": {
        "families": ("rho", "lam"),
        "defaults": {"eps": "1/10"},
        "functionals": {},
    },
}

POSITIVE = ("E", "D", "D0", "D1")
NATURAL = ("n", "p", "index")


@dataclass(frozen=True)
class FunctionalSpec:
    """A compiled grammar term: call it with an environment of index values."""

    source: Any
    variables: FrozenSet[str]
    primary: str
    text: str
    fn: Callable[[Dict[str, int]], int]

    def __call__(self, env: Dict[str, int]) -> int:
        return self.fn(env)


def _compile(spec: Any, allowed: Tuple[str, ...], location: str) -> Tuple[Callable, FrozenSet[str], str]:
    primary = allowed[0]
    if isinstance(spec, bool):
        raise ValidationError("booleans are not functional terms", location)
    if isinstance(spec, int):
        if spec < 0:
            raise ValidationError(f"constant {spec} is negative", location)
        value = spec
        return (lambda env: value), frozenset(), str(spec)
    if isinstance(spec, str):
        if spec not in allowed:
            raise ValidationError(
                f"unknown variable {spec!r}; available: {', '.join(allowed)}", location
            )
        return (lambda env: env[spec]), frozenset({spec}), spec
    if not isinstance(spec, dict):
        raise ValidationError(f"not a functional term: {spec!r}", location)

    if "affine" in spec:
        extra = set(spec) - {"affine", "of"}
        coeffs = spec["affine"]
        if extra or not (
            isinstance(coeffs, list)
            and len(coeffs) == 2
            and all(isinstance(c, int) and not isinstance(c, bool) and c >= 0 for c in coeffs)
        ):
            raise ValidationError("affine takes [a, b] with naturals a, b", location)
        var = spec.get("of", primary)
        if var not in allowed:
            raise ValidationError(f"unknown variable {var!r}", f"{location}/of")
        a, b = coeffs
        return (lambda env: a * env[var] + b), frozenset({var}), f"{a}·{var} + {b}"

    if "max" in spec:
        terms = spec["max"]
        if set(spec) != {"max"} or not isinstance(terms, list) or not terms:
            raise ValidationError("max takes a nonempty list of terms", location)
        parts = [_compile(t, allowed, f"{location}/max/{i}") for i, t in enumerate(terms)]
        fns = [p[0] for p in parts]
        variables = frozenset().union(*(p[1] for p in parts))
        return (
            (lambda env: max(f(env) for f in fns)),
            variables,
            f"max({', '.join(p[2] for p in parts)})",
        )

    if "compose" in spec:
        pair = spec["compose"]
        if set(spec) != {"compose"} or not isinstance(pair, list) or len(pair) != 2:
            raise ValidationError("compose takes [outer, inner]", location)
        outer, ov, otext = _compile(pair[0], allowed, f"{location}/compose/0")
        inner, iv, itext = _compile(pair[1], allowed, f"{location}/compose/1")
        return (
            (lambda env: outer({**env, primary: inner(env)})),
            ov | iv,
            f"{otext} ∘ {itext}",
        )

    if "iterate" in spec:
        times = spec.get("times")
        if set(spec) != {"iterate", "times"} or not isinstance(times, int) or isinstance(times, bool):
            raise ValidationError("iterate takes a term and an integer 'times'", location)
        if not 0 <= times <= ITERATE_TIMES_LIMIT:
            raise ValidationError(
                f"iterate times must lie in [0, {ITERATE_TIMES_LIMIT}], got {times}", f"{location}/times"
            )
        step, sv, stext = _compile(spec["iterate"], allowed, f"{location}/iterate")

        def iterated(env: Dict[str, int]) -> int:
            x = env[primary]
            for _ in range(times):
                x = step({**env, primary: x})
            return x

        return iterated, sv | {primary}, f"({stext})^{times}"

    raise ValidationError(
        f"unknown functional form {sorted(spec)}; expected affine, max, compose or iterate", location
    )


def compile_spec(spec: Any, allowed: Tuple[str, ...], location: str = "") -> FunctionalSpec:
    """
    Compile a grammar term over ``allowed`` variables, the first being the primary one.

    Raises:
        ValidationError: with the location of the offending subterm
    """
    fn, variables, text = _compile(spec, allowed, location)
    return FunctionalSpec(spec, variables, allowed[0], text, fn)


def get_experiment_config(kind: str) -> Dict[str, Any]:
    """
    Get the configuration of one experiment kind.

    Raises:
        ValueError: If an unknown kind is given
    """
    if kind not in EXPERIMENTS:
        raise ValueError(
            f"Unknown experiment kind: {kind}. Available options: {list(EXPERIMENTS.keys())}"
        )
    return {"description": EXPERIMENT_KINDS.get(kind, ""), **EXPERIMENTS[kind]}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def resolve_params(kind: str, params: Dict[str, Any], location: str = "/experiment/params") -> Dict[str, Any]:
    """
    Merge ``params`` over the kind's defaults and compile its functional parameters.

    Raises:
        ValidationError: for unknown parameters, bad ranges or malformed functional terms
    """
    try:
        config = get_experiment_config(kind)
    except ValueError as exc:
        raise ValidationError(str(exc), "/experiment/kind") from exc
    defaults = config["defaults"]
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise ValidationError(f"unknown parameters {unknown} for {kind}", location)
    resolved = {**defaults, **params}

    for name in POSITIVE:
        if name in resolved and (not _is_int(resolved[name]) or resolved[name] < 1):
            raise ValidationError(f"{name} must be a positive integer", f"{location}/{name}")
    for name in NATURAL:
        if name in resolved and (not _is_int(resolved[name]) or resolved[name] < 0):
            raise ValidationError(f"{name} must be a natural number", f"{location}/{name}")
    for name in ("refiner", "b0", "b1"):
        if name in resolved and resolved[name] not in REFINERS:
            raise ValidationError(
                f"unknown refiner {resolved[name]!r}; available: {', '.join(REFINERS)}", f"{location}/{name}"
            )
    if "start" in resolved and resolved["start"] not in STARTS:
        raise ValidationError(f"unknown start {resolved['start']!r}", f"{location}/start")
    if kind == "control_interval" and (not _is_int(resolved["stage"]) or resolved["stage"] not in (0, 1, 2, 3)):
        raise ValidationError("stage must be 0, 1, 2 or 3", f"{location}/stage")
    for name in ("B", "eps"):
        if isinstance(resolved.get(name), float):
            raise ValidationError(f"{name} must be an integer or a 'p/q' string", f"{location}/{name}")
    if kind == "regularity" and resolved["B"] is not None:
        try:
            resolved["B"] = Fraction(resolved["B"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"B is not a rational: {resolved['B']!r}", f"{location}/B") from exc
    if kind == "simple_swap":
        try:
            eps = Fraction(resolved["eps"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"eps is not a rational: {resolved['eps']!r}", f"{location}/eps") from exc
        if eps <= 0:
            raise ValidationError("eps must be positive", f"{location}/eps")
        resolved["eps"] = eps

    for name, allowed in config["functionals"].items():
        resolved[name] = compile_spec(resolved[name], allowed, f"{location}/{name}")
    return resolved
