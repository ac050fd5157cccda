"""
Data loader for the measure mining project.

Scenarios are JSON documents: a space, named families of measures given by per-index atom
values (or densities) with an eventual-constancy marker, and one experiment descriptor.
Rationals are integers or "p/q" strings throughout; floats are refused.
"""
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match

from experiments.experiment_configs import get_experiment_config, resolve_params
from src.config import DEFAULT_SEED, logger
from src.errors import MeasureError, ParseError, ValidationError
from src.measure_core import MeasureSpace, StepMeasure, make_space
from src.sequences import MeasureSequence

SCHEMA_DIR = Path(__file__).parent / "schemas"
SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass(frozen=True)
class Scenario:
    """A validated scenario; ``params`` keeps the raw functional specs as data."""

    name: str
    space: MeasureSpace
    families: Tuple[Tuple[str, MeasureSequence], ...]
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    bindings: Dict[str, str] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    description: str = ""

    def family(self, role: str) -> MeasureSequence:
        """The family bound to ``role`` (nu, rho or lam)."""
        name = self.bindings.get(role, role)
        for key, seq in self.families:
            if key == name:
                return seq
        if role == "nu" and len(self.families) == 1 and role not in self.bindings:
            return self.families[0][1]
        raise ValidationError(f"no family bound to {role!r}", "/experiment/bindings")


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    with open(SCHEMA_DIR / f"{name}.schema.json", encoding="utf-8") as f:
        return json.load(f)


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def check_schema(document: Any, schema: str, source: str = "") -> None:
    """
    Validate ``document`` against a bundled schema.

    Raises:
        ValidationError: located at the most relevant failing JSON pointer
    """
    validator = Draft7Validator(load_schema(schema))
    error = best_match(validator.iter_errors(document))
    if error is not None:
        raise ValidationError(error.message, f"{source}#{_pointer(error.absolute_path)}")


def _rational(value: Any) -> Fraction:
    if isinstance(value, float):
        raise TypeError("floats are not accepted")
    return Fraction(value)


def _parse_family(
    name: str, raw: Dict[str, Any], space: MeasureSpace, source: str
) -> MeasureSequence:
    key = "values" if "values" in raw else "densities"
    rows = raw[key]
    table = []
    for i, row in enumerate(rows):
        where = f"{source}#/families/{name}/{key}/{i}"
        if len(row) != space.size:
            raise ValidationError(f"row has {len(row)} entries for {space.size} atoms", where)
        try:
            entries = [_rational(x) for x in row]
            if key == "values":
                table.append(StepMeasure(space, tuple(entries)))
            else:
                table.append(StepMeasure.from_density(space, entries))
        except (MeasureError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise ValidationError(str(exc), where) from exc

    marker = raw["settled_from"]
    where = f"{source}#/families/{name}/settled_from"
    if marker >= len(table):
        raise ValidationError(f"marker {marker} is past the last of {len(table)} rows", where)
    if any(row != table[marker] for row in table[marker:]):
        raise ValidationError(f"family {name} is not constant from index {marker}", where)
    return MeasureSequence(tuple(table), name)


def parse_scenario(document: Any, source: str = "<document>") -> Scenario:
    """
    Build a Scenario from a decoded JSON document.

    Raises:
        ValidationError: schema violations, weights not summing to one, rows of the wrong
            length, families not constant from their marker, bad experiment parameters
    """
    check_schema(document, "scenario", source)

    raw_space = document["space"]
    try:
        space = make_space(
            [_rational(w) for w in raw_space["weights"]], raw_space.get("atoms")
        )
    except (MeasureError, ValueError, TypeError, ZeroDivisionError) as exc:
        raise ValidationError(str(exc), f"{source}#/space/weights") from exc

    families = tuple(
        (name, _parse_family(name, raw, space, source))
        for name, raw in document["families"].items()
    )

    experiment = document["experiment"]
    kind = experiment["kind"]
    params = experiment.get("params", {})
    bindings = experiment.get("bindings", {})
    try:
        resolve_params(kind, params)
    except ValidationError as exc:
        raise ValidationError(exc.reason, f"{source}#{exc.location}") from exc

    scenario = Scenario(
        name=document["name"],
        space=space,
        families=families,
        kind=kind,
        params=params,
        bindings=bindings,
        seed=document.get("seed", DEFAULT_SEED),
        description=document.get("description", ""),
    )
    for role in get_experiment_config(kind)["families"]:
        try:
            scenario.family(role)
        except ValidationError as exc:
            raise ValidationError(f"no family bound to {role!r}", f"{source}#/experiment/bindings") from exc
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Read and validate a scenario file.

    Raises:
        ParseError: if the file cannot be read or is not JSON; located at path:line:column
        ValidationError: see ``parse_scenario``
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Error reading scenario {path}: {e}")
        raise ParseError(f"cannot read scenario: {e}", str(path)) from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"{path}:{e.lineno}:{e.colno}") from e
    scenario = parse_scenario(document, str(path))
    logger.info(f"Loaded scenario {scenario.name!r} ({scenario.kind}, {scenario.space.size} atoms)")
    return scenario


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """The canonical document: atom values as "p/q" strings, least settling markers."""
    document: Dict[str, Any] = {"name": scenario.name}
    if scenario.description:
        document["description"] = scenario.description
    document["seed"] = scenario.seed
    document["space"] = {
        "weights": [str(w) for w in scenario.space.weights],
        "atoms": list(scenario.space.atoms),
    }
    document["families"] = {
        name: {
            "values": [[str(v) for v in nu.values] for nu in seq.table],
            "settled_from": seq.settled_from,
        }
        for name, seq in scenario.families
    }
    experiment: Dict[str, Any] = {"kind": scenario.kind, "params": scenario.params}
    if scenario.bindings:
        experiment["bindings"] = scenario.bindings
    document["experiment"] = experiment
    return document


def dump_scenario(scenario: Scenario, path: Optional[Union[str, Path]] = None) -> str:
    text = json.dumps(scenario_to_dict(scenario), indent=2, ensure_ascii=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def scenario_digest(scenario: Scenario) -> str:
    canonical = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def bundled_scenarios() -> Dict[str, Path]:
    return {p.stem: p for p in sorted(SCENARIO_DIR.glob("*.json"))}


if __name__ == "__main__":
    for name, path in bundled_scenarios().items():
        scenario = load_scenario(path)
        logger.info(f"\nScenario {name}: {scenario.description or scenario.kind}")
        for family, seq in scenario.families:
            logger.info(f"  {family}: {len(seq)} rows, settled from {seq.settled_from}")
