"""Run configuration: strict JSON validation against the shipped schema.

Unknown keys are rejected (additionalProperties is false), so typos fail
loudly instead of silently falling back to defaults. Validation errors name
the offending field by its dotted path.
"""

import json
from importlib import resources

import jsonschema

from .errors import ParseError, SchemaError

DEFAULTS = {
    "n": 128,
    "d": 1.0,
    "model": "gradual",
    "representation": "matrix",
    "box": 10.0,
    "radius": 1.0,
    "kernel": "indicator",
    "dt": 2e-3,
    "t_end": 1.0,
    "seed": 0,
    "save_every": 1,
    "replicas": 1,
}

MACRO_DEFAULTS = {
    "grid": [64, 1, 1],
    "length": float(2.0 * 3.141592653589793),
    "viscosity": 0.5,
    "rho_amp": 0.2,
    "alpha": 0.3,
    "beta": 0.3,
    "dt": 0.01,
    "t_end": 1.0,
}

_schema_cache = None


def schema():
    """The JSON schema shipped with the package (parsed once)."""
    global _schema_cache
    if _schema_cache is None:
        text = resources.files("sohb").joinpath("config_schema.json").read_text()
        _schema_cache = json.loads(text)
    return _schema_cache


def _error_path(err):
    return ".".join(str(p) for p in err.absolute_path)


def validate_data(data):
    """All schema violations as "path: message" strings (empty if valid)."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    return [f"{_error_path(e) or '<root>'}: {e.message}" for e in errors]


def load_config(source):
    """Load, validate, and default-fill a configuration.

    Args:
        source: path to a JSON file, or an already-parsed dict.

    Returns:
        dict with every top-level default applied (and macro defaults applied
        inside the "macro" block when present).

    Raises:
        ParseError: the file is not valid JSON.
        SchemaError: the first schema violation, with ``path`` set.
    """
    if isinstance(source, dict):
        data = dict(source)
    else:
        try:
            with open(source) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source}: {exc}") from exc
    problems = validate_data(data)
    if problems:
        first = problems[0]
        path = first.split(":", 1)[0]
        raise SchemaError(first, path="" if path == "<root>" else path)
    merged = {**DEFAULTS, **data}
    if "macro" in merged:
        merged["macro"] = {**MACRO_DEFAULTS, **merged["macro"]}
    return merged


def sim_params_from_config(cfg):
    """Translate a validated config dict into micro-simulation parameters."""
    from .micro import SimParams

    return SimParams(
        n_particles=cfg["n"],
        d=cfg["d"],
        box=cfg["box"],
        radius=cfg["radius"],
        kernel=cfg["kernel"],
        dt=cfg["dt"],
        model=cfg["model"],
        representation=cfg["representation"],
        seed=cfg["seed"],
    )
