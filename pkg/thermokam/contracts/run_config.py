"""Run configuration contract.

A run configuration is an INI file with the sections

    [hamiltonian]  family and potential parameters
    [thermostat]   variant, k, l, mu, epsilon, temperature
    [grid]         profile grid (optional)
    [experiment]   name plus experiment-specific keys
    [output]       directory, formats, precision (optional)

Values are coerced by the type the schema declares for the key, then the
nested payload is validated against RUN_CONFIG_SCHEMA. Unknown keys and
sections are rejected. Errors are reported together, each anchored to the
line of the offending assignment.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from jsonschema import Draft202012Validator

from ..errors import ConfigError
from ..hamiltonian.families import KINETIC_PROFILES, POTENTIAL_FAMILIES, HamiltonianSpec, make_hamiltonian
from ..quadrature.profiles import DEFAULT_KS, GridSpec
from ..thermostats.fields import VARIANTS, ThermostatSpec

EXPERIMENTS = ("profile", "averaged", "scan", "agreement", "reconstruct", "checklist")
FORMATS = ("csv", "svg")
POTENTIALS = ("rational", "quadratic")

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEGATIVE = {"type": "number", "minimum": 0}
_ODD = {"type": "integer", "minimum": 1, "not": {"multipleOf": 2}}
_COUNT = {"type": "integer", "minimum": 1}


RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "hamiltonian": {
            "type": "object",
            "properties": {
                "family": {"type": "string", "enum": list(POTENTIAL_FAMILIES)},
                "omega": _POSITIVE,
                "n": _COUNT,
                "a": _POSITIVE,
                "coefficients": {"type": "array", "minItems": 3, "items": {"type": "number"}},
                "kinetic": {"type": "string", "enum": list(KINETIC_PROFILES)},
                "domain": {"type": "string", "enum": ["line", "circle"]},
                "normalize": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "thermostat": {
            "type": "object",
            "properties": {
                "variant": {"type": "string", "enum": list(VARIANTS)},
                "k": _ODD,
                "l": _ODD,
                "mu": _NONNEGATIVE,
                "epsilon": _NONNEGATIVE,
                "temperature": _POSITIVE,
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "n_uniform": {"type": "integer", "minimum": 4},
                "h_span": _POSITIVE,
                "h_max": {"type": "number"},
                "ks": {"type": "array", "minItems": 1, "items": _ODD},
                "check_points": _COUNT,
            },
            "additionalProperties": False,
        },
        "experiment": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"type": "string", "enum": list(EXPERIMENTS)},
                "edge": {"type": "integer", "minimum": 0},
                # averaged
                "twist_levels": {"type": "integer", "minimum": 5},
                "twist_g_max": _POSITIVE,
                "twist_g_lo_frac": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "isochronous_control": {"type": "boolean"},
                # scan / agreement
                "h_hi": _POSITIVE,
                "xi_max": _POSITIVE,
                "n_h": {"type": "integer", "minimum": 2},
                "n_xi": {"type": "integer", "minimum": 2},
                "h_half": _POSITIVE,
                "xi_half": _POSITIVE,
                "n_iters": {"type": "integer", "minimum": 4},
                "residual_threshold": _POSITIVE,
                "separation_threshold": _POSITIVE,
                "boundary_fraction": {"type": "number", "minimum": 0, "maximum": 0.5},
                "refine": {"type": "boolean"},
                "h0": {"type": "number"},
                "xi0": {"type": "number"},
                "eps": {"type": "array", "minItems": 1, "items": _NONNEGATIVE},
                # reconstruct
                "potential": {"type": "string", "enum": list(POTENTIALS)},
                "beta": _POSITIVE,
                "sigma1": {"type": "number", "exclusiveMaximum": 0},
                "points": {"type": "integer", "minimum": 16},
                "u_values": {"type": "array", "minItems": 1, "items": _POSITIVE},
                # checklist
                "samples": _COUNT,
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "directory": {"type": "string", "minLength": 1},
                "formats": {"type": "array", "minItems": 1, "items": {"type": "string", "enum": list(FORMATS)}},
                "precision": {"type": "integer", "minimum": 1, "maximum": 17},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


_VALIDATOR = Draft202012Validator(RUN_CONFIG_SCHEMA)


def _schema_errors(payload: Dict[str, Any]) -> List[Tuple[Tuple[str, ...], str]]:
    out = []
    for e in sorted(_VALIDATOR.iter_errors(payload), key=lambda x: [str(p) for p in x.path]):
        path = tuple(str(p) for p in e.path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            known = set(e.schema.get("properties", {}))
            for extra in sorted(set(e.instance) - known):
                what = "section" if not path else "key"
                out.append((path + (extra,), f"unknown {what} {extra!r}"))
            continue
        # report array items against their key
        if len(path) > 2:
            path = path[:2]
        out.append((path, e.message))
    return out


def validate_run_config(payload: Dict[str, Any]) -> List[str]:
    """Return a list of human-readable validation errors (empty means valid)."""
    return [f"{'.'.join(path) if path else '<root>'}: {message}" for path, message in _schema_errors(payload)]


# -----------------------------
# Coercion
# -----------------------------

def _declared(section: str, key: str) -> Optional[Dict[str, Any]]:
    props = RUN_CONFIG_SCHEMA["properties"].get(section, {}).get("properties", {})
    return props.get(key)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _scalar(raw: str, kind: Optional[str]) -> Any:
    text = raw.strip()
    if kind == "integer":
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if kind == "number":
        value = float(text)
        if math.isnan(value):
            raise ValueError("NaN is not a valid number")
        return value
    if kind == "boolean":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    return text


def coerce_value(section: str, key: str, raw: str) -> Any:
    """Convert one INI value by the type declared for it (undeclared keys stay strings)."""
    schema = _declared(section, key)
    if schema is None:
        return raw.strip()
    if schema.get("type") == "array":
        items = [part for part in (p.strip() for p in raw.split(",")) if part]
        return [_scalar(part, schema["items"].get("type")) for part in items]
    return _scalar(raw, schema.get("type"))


# -----------------------------
# Line anchoring
# -----------------------------

def _line_index(text: str) -> Dict[Tuple[str, ...], int]:
    index: Dict[Tuple[str, ...], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            index.setdefault((section,), number)
            continue
        if section is None or line[:1].isspace():
            continue
        for sep in ("=", ":"):
            if sep in stripped:
                key = stripped.split(sep, 1)[0].strip().lower()
                index.setdefault((section, key), number)
                break
    return index


def _anchor(source: str, index: Dict[Tuple[str, ...], int], path: Tuple[str, ...], message: str) -> str:
    line = index.get(path) or (index.get(path[:1]) if path else None) or 1
    if len(path) >= 2:
        where = f"[{path[0]}] {path[1]}"
    elif path:
        where = f"[{path[0]}]"
    else:
        where = "<root>"
    return f"{source}:{line}: {where}: {message}"


# -----------------------------
# Typed blocks
# -----------------------------

@dataclass(frozen=True)
class HamiltonianBlock:
    family: str = "harmonic"
    omega: float = 1.0
    n: int = 2
    a: float = 1.0
    coefficients: Optional[Tuple[float, ...]] = None
    kinetic: str = "standard"
    domain: Optional[str] = None
    normalize: bool = False

    def build(self) -> HamiltonianSpec:
        return make_hamiltonian(self.family, omega=self.omega, n=self.n, a=self.a, coefficients=self.coefficients,
                                kinetic=self.kinetic, domain=self.domain, normalize=self.normalize)


@dataclass(frozen=True)
class ThermostatBlock:
    variant: str = "nh"
    k: int = 1
    l: int = 1
    mu: float = 0.0
    epsilon: float = 0.1
    temperature: float = 1.0

    def spec(self) -> ThermostatSpec:
        return ThermostatSpec(self.variant, epsilon=self.epsilon, T=self.temperature,
                              k=self.k, l=self.l, mu_hsh=self.mu)


@dataclass(frozen=True)
class GridBlock:
    n_uniform: int = 192
    h_span: float = 10.0
    h_max: Optional[float] = None
    ks: Tuple[int, ...] = DEFAULT_KS
    check_points: int = 16

    def spec(self) -> GridSpec:
        return GridSpec(n_uniform=self.n_uniform, h_span=self.h_span, h_max=self.h_max,
                        check_points=self.check_points)


@dataclass(frozen=True)
class ExperimentBlock:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)


@dataclass(frozen=True)
class OutputBlock:
    directory: Optional[str] = None
    formats: Tuple[str, ...] = ("csv", "svg")
    precision: int = 17


@dataclass(frozen=True)
class RunConfig:
    hamiltonian: HamiltonianBlock
    thermostat: ThermostatBlock
    grid: GridBlock
    experiment: ExperimentBlock
    output: OutputBlock
    source: str = "<memory>"


def _tupled(block: Dict[str, Any]) -> Dict[str, Any]:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in block.items()}


def run_config_from_payload(payload: Dict[str, Any], *, source: str = "<memory>") -> RunConfig:
    """Typed RunConfig from an already validated payload."""
    exp = dict(payload["experiment"])
    name = exp.pop("name")
    return RunConfig(
        hamiltonian=HamiltonianBlock(**_tupled(payload.get("hamiltonian", {}))),
        thermostat=ThermostatBlock(**payload.get("thermostat", {})),
        grid=GridBlock(**_tupled(payload.get("grid", {}))),
        experiment=ExperimentBlock(name=name, params=exp),
        output=OutputBlock(**_tupled(payload.get("output", {}))),
        source=source,
    )


def parse_run_config(text: str, *, source: str = "<memory>") -> RunConfig:
    """Parse, coerce and validate INI text; ConfigError carries every problem found."""
    index = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None) or 1
        raise ConfigError([f"{source}:{line}: {exc.message}"])

    payload: Dict[str, Any] = {}
    problems: List[str] = []
    for section in parser.sections():
        name = section.strip().lower()
        block: Dict[str, Any] = {}
        for key, raw in parser.items(section):
            try:
                block[key] = coerce_value(name, key, raw)
            except ValueError as exc:
                problems.append(_anchor(source, index, (name, key), str(exc)))
        payload[name] = block
    problems.extend(_anchor(source, index, path, message) for path, message in _schema_errors(payload))
    if problems:
        raise ConfigError(problems)
    return run_config_from_payload(payload, source=source)


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read run configuration ({exc.strerror or exc})"])
    return parse_run_config(text, source=path)


def describe(config: RunConfig) -> Iterable[str]:
    """key=value lines echoing the effective configuration."""
    for block_name in ("hamiltonian", "thermostat", "grid", "output"):
        block = getattr(config, block_name)
        for key, value in sorted(vars(block).items()):
            yield f"{block_name}.{key}={value}"
    yield f"experiment.name={config.experiment.name}"
    for key, value in sorted(config.experiment.params.items()):
        yield f"experiment.{key}={value}"
