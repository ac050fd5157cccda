"""
Functionals: the monotone, inflationary index maps every metastability statement is phrased in.

Two kinds are used throughout the package:

* ``Functional`` wraps a first-order map N -> N. User-supplied maps are normalised by the
  monotone closure m'(m) = max(m, max_{n<=m} f(n)); maps built internally from already
  monotone pieces skip the closure.
* ``Closure`` is a memoised, labelled callable of any arity. It carries the higher-order
  plumbing of the constructions (functionals taking partitions, functionals or several
  indices). Labels name the definition a closure realises, so a failing verification can
  point at the responsible one.
"""
from typing import Any, Callable, Dict, Optional, Tuple

from src.config import ITERATE_LIMIT
from src.errors import SearchExhausted


class Functional:
    """Monotone inflationary map on the naturals."""

    def __init__(
        self,
        fn: Callable[[int], int],
        label: str = "m",
        assume_monotone: bool = False,
    ):
        self._fn = fn
        self.label = label
        self._assume_monotone = assume_monotone
        self._memo: Dict[int, int] = {}
        # prefix maxima of the raw map, used by the monotone closure
        self._prefix: list = []

    def _raw(self, m: int) -> int:
        value = self._fn(m)
        if not isinstance(value, int) or value < 0:
            raise ValueError(f"Functional {self.label} returned {value!r} at {m}")
        return value

    def __call__(self, m: int) -> int:
        if m < 0:
            raise ValueError(f"Functional {self.label} called at negative index {m}")
        cached = self._memo.get(m)
        if cached is not None:
            return cached
        if self._assume_monotone:
            value = max(m, self._raw(m))
        else:
            while len(self._prefix) <= m:
                n = len(self._prefix)
                previous = self._prefix[-1] if self._prefix else 0
                self._prefix.append(max(previous, self._raw(n)))
            value = max(m, self._prefix[m])
        self._memo[m] = value
        return value

    def iterate(self, times: int, start: int, cap: Optional[int] = None) -> Tuple[int, bool]:
        """
        Apply the functional ``times`` times to ``start``.

        When ``cap`` is given, iteration stops as soon as the value reaches it and the
        second component reports whether that happened.
        """
        value = start
        for step in range(times):
            if cap is not None and value >= cap:
                return value, True
            if step >= ITERATE_LIMIT:
                raise SearchExhausted(
                    f"{self.label} iterated more than {ITERATE_LIMIT} times from {start}"
                )
            value = self(value)
        return value, cap is not None and value >= cap

    def power(self, times: int) -> "Functional":
        """The functional m -> m^times(m) as a new Functional."""
        if times == 1:
            return self

        def powered(m: int) -> int:
            return self.iterate(times, m)[0]

        return Functional(powered, label=f"{self.label}^{times}", assume_monotone=True)

    def __repr__(self) -> str:
        return f"Functional({self.label})"


def affine(a: int, b: int, label: Optional[str] = None) -> Functional:
    """m -> a*m + b, with nonnegative coefficients."""
    if a < 0 or b < 0:
        raise ValueError("affine functionals need nonnegative coefficients")
    return Functional(lambda m: a * m + b, label=label or f"{a}m+{b}", assume_monotone=True)


class Closure:
    """Memoised labelled callable; arguments must be hashable (functionals hash by identity)."""

    def __init__(self, fn: Callable[..., Any], label: str):
        self._fn = fn
        self.label = label
        self._memo: Dict[tuple, Any] = {}

    def __call__(self, *args: Any) -> Any:
        try:
            return self._memo[args]
        except KeyError:
            pass
        value = self._fn(*args)
        self._memo[args] = value
        return value

    @property
    def calls(self) -> int:
        return len(self._memo)

    def __repr__(self) -> str:
        return f"Closure({self.label})"


def label_of(obj: Any) -> str:
    return getattr(obj, "label", getattr(obj, "__name__", repr(obj)))
