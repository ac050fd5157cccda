"""Tests for functionals and closures."""
import pytest
from hypothesis import given, strategies as st

from src.errors import SearchExhausted
from src.functionals import Closure, Functional, affine, label_of


class TestFunctional:
    def test_monotone_closure(self):
        # a dip at 3 is lifted to the running maximum
        f = Functional(lambda m: [5, 1, 9, 2, 0][m] if m < 5 else 0, "dip")
        assert [f(m) for m in range(7)] == [5, 5, 9, 9, 9, 9, 9]

    def test_inflationary(self):
        assert Functional(lambda m: 0, "zero")(4) == 4

    def test_bad_values(self):
        with pytest.raises(ValueError):
            Functional(lambda m: -1, "neg")(0)
        with pytest.raises(ValueError):
            affine(1, 1)(-1)
        with pytest.raises(ValueError):
            affine(-1, 0)

    def test_iterate_and_power(self):
        double = affine(2, 0)
        assert double.iterate(3, 1) == (8, False)
        assert double.iterate(10, 1, cap=20) == (32, True)
        assert double.power(3)(1) == 8
        assert double.power(1) is double

    def test_iterate_limit(self, monkeypatch):
        monkeypatch.setattr("src.functionals.ITERATE_LIMIT", 3)
        with pytest.raises(SearchExhausted):
            affine(1, 1).iterate(5, 0)

    @given(values=st.lists(st.integers(0, 50), min_size=1, max_size=20))
    def test_closure_is_monotone(self, values):
        f = Functional(lambda m: values[m % len(values)], "table")
        outputs = [f(m) for m in range(len(values) + 3)]
        assert outputs == sorted(outputs)
        assert all(v >= m for m, v in enumerate(outputs))


class TestClosure:
    def test_memoised(self):
        seen = []

        def square(x):
            seen.append(x)
            return x * x

        c = Closure(square, "sq")
        assert c(3) == c(3) == 9
        assert seen == [3]
        assert c.calls == 1

    def test_labels(self):
        assert label_of(Closure(lambda: 0, "L̂")) == "L̂"
        assert label_of(affine(2, 1)) == "2m+1"
        assert label_of(len) == "len"
