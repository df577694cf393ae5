"""This module provides the JSON formats: surfaces, germs, paths and computed results.

Complex numbers are written as ``[re, im]`` pairs, floats with 17 significant
digits and object keys in sorted order, so equal payloads give identical text.
On input a complex number may also be a plain number or a literal like ``"1+2i"``.
"""
# <pep8 compliant>
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from segretool import expr
from segretool.continuation import ContinuationPath, MapGerm
from segretool.errors import ConfigurationError, SegreToolError
from segretool.file_io import paths
from segretool.hypersurface import Hypersurface
from segretool.quadric import HermitianQuadric, JordanForm
from segretool.util import parse_complex


# ----- writing -----

def _float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    return format(value, ".17g")


def _is_scalar(value) -> bool:
    return value is None or isinstance(value, (bool, int, float, str, complex, np.generic))


def _write(value, level: int) -> str:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _float(value)
    if isinstance(value, complex):
        return f"[{_float(value.real)}, {_float(value.imag)}]"
    if isinstance(value, str):
        return json.dumps(value)
    pad, close = "  " * (level + 1), "  " * level
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(key))}: {_write(value[key], level + 1)}" for key in sorted(value, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if all(_is_scalar(item) for item in value):
            return "[" + ", ".join(_write(item, level + 1) for item in value) + "]"
        return "[\n" + ",\n".join(pad + _write(item, level + 1) for item in value) + "\n" + close + "]"
    raise TypeError(f"Cannot write {type(value).__name__} as JSON")


def dumps(payload) -> str:
    """Deterministic JSON text of a payload of dicts, lists, numbers, complex numbers and arrays."""
    return _write(payload, 0) + "\n"


def export_json(filepath: Path | str, payload) -> tuple[bool, str]:
    """Write a payload to a JSON file.

    :param filepath: Path to JSON file destination.
    :param payload: Data to write.
    :return: A tuple with it's first element indicating whether export was successful, a message as the second element.
    """
    filepath = Path(filepath)
    if filepath.suffix.lower() != ".json":
        return (False, f"Destination file is not a JSON file: {filepath}")
    try:
        paths.ensure_parent(filepath)
        filepath.write_text(dumps(payload), encoding="utf-8")
    except (IOError, TypeError) as error:
        return (False, f"Failed to write file: {filepath}\n{str(error)}")
    return (True, f"Saved file: {filepath}")


# ----- reading -----

def load(filepath: Path | str) -> dict:
    """Read a JSON file.

    :raise ConfigurationError: the file is missing or is not valid JSON.
    """
    filepath = Path(filepath)
    if not paths.path_exists(filepath):
        raise ConfigurationError(f"No such file: '{filepath}'")
    try:
        return json.loads(filepath.read_text(encoding="utf-8"))
    except (IOError, json.JSONDecodeError) as error:
        raise ConfigurationError(f"Could not read JSON file '{filepath}': {error}") from error


def complex_value(value) -> complex:
    if isinstance(value, str):
        return parse_complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise ConfigurationError(f"Not a complex number: {value!r}")


def point_value(value, n: int | None = None) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        raise ConfigurationError(f"A point must be a list of complex numbers, got {value!r}")
    point = np.array([complex_value(v) for v in value], dtype=complex)
    if n is not None and len(point) != n:
        raise ConfigurationError(f"Expected a point with {n} coordinates, got {len(point)}")
    return point


def matrix_value(value) -> np.ndarray:
    try:
        return np.array([[complex_value(v) for v in row] for row in value], dtype=complex)
    except TypeError as error:
        raise ConfigurationError(f"A matrix must be a list of rows, got {value!r}") from error


def _require(payload: dict, key: str, what: str):
    if not isinstance(payload, dict) or key not in payload:
        raise ConfigurationError(f"{what} needs a '{key}' entry")
    return payload[key]


# ----- surfaces -----

def surface_payload(M: Hypersurface) -> dict:
    return {
        "name": M.name,
        "n": M.n,
        "defining": expr.to_source(M.defining),
        "phi": None if M.phi is None else expr.to_source(M.phi),
        "u1": list(M.u1),
        "u2": list(M.u2),
        "nonminimal": M.nonminimal,
    }


def read_surface(payload: dict) -> Hypersurface:
    """Hypersurface from ``{"name", "n", "defining", "u1", "u2", ["phi"], ["nonminimal"]}``.

    :raise ConfigurationError: a field is missing or malformed.
    """
    try:
        return Hypersurface.from_source(
            name=str(payload.get("name", "surface")),
            n=int(_require(payload, "n", "A surface")),
            defining=str(_require(payload, "defining", "A surface")),
            u1=_require(payload, "u1", "A surface"),
            u2=_require(payload, "u2", "A surface"),
            phi=payload.get("phi"),
            nonminimal=bool(payload.get("nonminimal", True)),
        )
    except (TypeError, ValueError) as error:
        raise ConfigurationError(f"Malformed surface: {error}") from error


# ----- germs -----

def germ_payload(germ: MapGerm) -> dict:
    if not germ.is_closed_form:
        raise ConfigurationError("Only closed-form germs have a file format")
    return {
        "components": germ.evaluator.sources(),
        "base": germ.base,
        "radius": germ.radius,
        "target": germ.target.H,
        "branch_log": germ.branch_log,
        "post": germ.post,
    }


def read_germ(payload: dict, n: int) -> MapGerm:
    """Closed-form germ from ``{"components", "base", "radius", "signs" or "target", ["winding" or "branch_log"], ["post"]}``.

    ``target`` is the quadric the whole map lands on, ``post`` already included.

    :raise ConfigurationError: a field is missing or malformed.
    """
    components = _require(payload, "components", "A germ")
    base = point_value(_require(payload, "base", "A germ"), n)
    radius = float(_require(payload, "radius", "A germ"))
    try:
        if "signs" in payload:
            target = HermitianQuadric.standard([int(s) for s in payload["signs"]])
        else:
            target = HermitianQuadric(matrix_value(_require(payload, "target", "A germ")))
        germ = MapGerm.closed_form(components, base, radius, target, int(payload.get("winding", 0)))
    except SegreToolError as error:
        raise ConfigurationError(f"Malformed germ: {error}") from error
    if payload.get("branch_log") is not None:
        germ = germ.moved(base, complex_value(payload["branch_log"]))
    if payload.get("post") is not None:
        germ = dataclasses.replace(germ, post=matrix_value(payload["post"]))
    return germ


# ----- paths -----

def path_payload(path: ContinuationPath) -> dict:
    return {"waypoints": path.waypoints}


def read_path(payload: dict, n: int) -> ContinuationPath:
    """Path from ``{"waypoints": [...]}`` or ``{"loop": {"z0", "w_radius", ["turns"], ["start_angle"]}}``.

    ``radius`` is accepted for ``w_radius``. With one z-coordinate, ``z0`` may be a bare ``[re, im]``.
    """
    if "loop" in payload:
        loop = payload["loop"]
        z0 = _require(loop, "z0", "A loop")
        if n == 2 and isinstance(z0, (list, tuple)) and len(z0) == 2 and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in z0):
            z0 = [z0]
        radius = loop.get("w_radius", loop.get("radius"))
        if radius is None:
            raise ConfigurationError("A loop needs a 'w_radius' entry")
        return ContinuationPath.loop(
            point_value(z0, n - 1),
            float(radius),
            float(loop.get("turns", 1)),
            float(loop.get("start_angle", 0.0)),
        )
    waypoints = _require(payload, "waypoints", "A path")
    if len(waypoints) < 2:
        raise ConfigurationError("A path needs at least two waypoints")
    return ContinuationPath(np.array([point_value(p, n) for p in waypoints]))


# ----- results -----

def jordan_payload(jordan: JordanForm) -> dict:
    return {
        "blocks": [{"eigenvalue": eigenvalue, "size": size} for eigenvalue, size in jordan.blocks],
        "ambiguous": jordan.ambiguous,
    }


def monodromy_payload(result) -> dict:
    return {
        "sigma": result.sigma,
        "A": result.A,
        "jordan": jordan_payload(result.jordan),
        "finite_order": result.finite_order,
        "fit_residual": result.residual,
        "turns": result.turns,
        "base": result.base,
    }


def cloud_payload(cloud) -> dict:
    return {
        "base": cloud.base,
        "depth": cloud.depth,
        "failures": cloud.failures,
        "levels": [{"points": points, "parents": parents} for points, parents in zip(cloud.levels, cloud.parents)],
    }


def chain_payload(chain) -> dict:
    return {"steps": chain.steps, "waypoints": list(chain.waypoints)}


def transfer_payload(transfer) -> dict:
    return {
        "plus": {"signature": list(transfer.plus_signature), "residual": transfer.plus_residual,
                 "quadric": transfer.plus.H},
        "minus": {"signature": list(transfer.minus_signature), "residual": transfer.minus_residual,
                  "quadric": transfer.minus.H},
        "distance": transfer.distance,
    }
