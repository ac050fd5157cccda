"""Tests for the functional grammar and experiment parameters."""
from fractions import Fraction

import pytest

from experiments.experiment_configs import (
    EXPERIMENTS,
    ITERATE_TIMES_LIMIT,
    compile_spec,
    get_experiment_config,
    resolve_params,
)
from src.errors import ValidationError


class TestGrammar:
    def test_constant_and_variable(self):
        assert compile_spec(3, ("m",))({"m": 7}) == 3
        assert compile_spec("m", ("m",))({"m": 7}) == 7

    def test_affine(self):
        spec = compile_spec({"affine": [2, 1]}, ("m", "D"))
        assert spec({"m": 3, "D": 10}) == 7
        assert spec.variables == frozenset({"m"})
        assert spec.text == "2·m + 1"
        of_d = compile_spec({"affine": [1, 0], "of": "D"}, ("m", "D"))
        assert of_d({"m": 3, "D": 10}) == 10

    def test_max(self):
        spec = compile_spec({"max": ["m", {"affine": [1, 1], "of": "D"}]}, ("m", "D"))
        assert spec({"m": 3, "D": 1}) == 3
        assert spec({"m": 3, "D": 5}) == 6
        assert spec.variables == frozenset({"m", "D"})

    def test_compose(self):
        # (2x + 0) ∘ (x + 1)
        spec = compile_spec({"compose": [{"affine": [2, 0]}, {"affine": [1, 1]}]}, ("m",))
        assert spec({"m": 4}) == 10

    def test_iterate(self):
        spec = compile_spec({"iterate": {"affine": [2, 0]}, "times": 3}, ("m",))
        assert spec({"m": 1}) == 8
        assert compile_spec({"iterate": {"affine": [2, 0]}, "times": 0}, ("m",))({"m": 5}) == 5

    @pytest.mark.parametrize(
        "spec",
        [
            -1,
            True,
            "x",
            1.5,
            {"affine": [1]},
            {"affine": [1, -1]},
            {"affine": [1, 1], "of": "z"},
            {"max": []},
            {"compose": [1]},
            {"iterate": "m", "times": ITERATE_TIMES_LIMIT + 1},
            {"iterate": "m"},
            {"power": 2},
        ],
    )
    def test_malformed(self, spec):
        with pytest.raises(ValidationError):
            compile_spec(spec, ("m",), "/window")

    def test_error_location_points_at_subterm(self):
        with pytest.raises(ValidationError) as info:
            compile_spec({"max": ["m", "q"]}, ("m",), "/experiment/params/window")
        assert info.value.location == "/experiment/params/window/max/1"


class TestParams:
    def test_every_kind_resolves_defaults(self):
        for kind in EXPERIMENTS:
            resolved = resolve_params(kind, {})
            for name in EXPERIMENTS[kind]["functionals"]:
                assert callable(resolved[name])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            get_experiment_config("sentiment")
        with pytest.raises(ValidationError):
            resolve_params("sentiment", {})

    def test_unknown_parameter(self):
        with pytest.raises(ValidationError):
            resolve_params("regularity", {"K": 3})

    @pytest.mark.parametrize("params", [{"E": 0}, {"D": True}, {"index": -1}, {"refiner": "split"}, {"start": "half"}])
    def test_bad_values(self, params):
        with pytest.raises(ValidationError):
            resolve_params("regularity", params)

    def test_stage(self):
        assert resolve_params("control_interval", {"stage": 2})["stage"] == 2
        for stage in (4, True, "1"):
            with pytest.raises(ValidationError):
                resolve_params("control_interval", {"stage": stage})

    def test_rationals(self):
        assert resolve_params("regularity", {"B": "3/2"})["B"] == Fraction(3, 2)
        assert resolve_params("simple_swap", {"eps": "1/4"})["eps"] == Fraction(1, 4)
        with pytest.raises(ValidationError):
            resolve_params("regularity", {"B": 1.5})
        with pytest.raises(ValidationError):
            resolve_params("simple_swap", {"eps": 0})
