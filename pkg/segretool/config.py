"""Tolerances and run configuration shared by every pipeline stage."""
import dataclasses
import logging
import os
from pathlib import Path

import numpy as np

from segretool.errors import ConfigurationError

SEED_ENVIRONMENT_VARIABLE = "SEGRETOOL_SEED"
DEFAULT_SEED = 20121003


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds. Field names double as `--tol NAME=VALUE` keys."""

    newton: float = 1e-12
    newton_max_iter: int = 50
    membership: float = 1e-10
    # |w| below degeneracy * (U1 w-radius) counts as lying on X.
    degeneracy: float = 1e-10
    rank: float = 1e-8
    levi: float = 1e-8
    q_segre: float = 1e-6
    step_consistency: float = 1e-8
    glue: float = 1e-8
    fit: float = 1e-6
    quadric_fit: float = 1e-8
    scalar: float = 1e-8
    jordan_cluster: float = 1e-5
    jordan_rank: float = 1e-6
    germ_radius_ratio: float = 0.25
    shrink: float = 0.5
    stencil_nodes_z: int = 4
    stencil_nodes_w: int = 16
    k_max: int = 64
    restarts: int = 32
    path_arg_step: float = 0.25


DEFAULT_TOLERANCES = Tolerances()


def with_overrides(tol: Tolerances, overrides: dict[str, str | float]) -> Tolerances:
    """Return a copy of the tolerances with some fields replaced.

    :param tol: Base tolerances.
    :param overrides: Mapping of field name to new value (strings are converted to the field's type).
    :return: New tolerances.
    """
    fields = {field.name: field for field in dataclasses.fields(tol)}
    changes = {}
    for name, value in overrides.items():
        if name not in fields:
            raise ConfigurationError(f"Unknown tolerance '{name}', known: {', '.join(sorted(fields))}")
        kind = int if isinstance(getattr(tol, name), int) else float
        try:
            changes[name] = kind(value)
        except ValueError as error:
            raise ConfigurationError(f"Tolerance '{name}' needs a {kind.__name__}, got {value!r}") from error
    return dataclasses.replace(tol, **changes)


def make_rng(seed: int | None) -> np.random.Generator:
    """Create the single random generator a run derives all sampling from."""
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    seed: int = DEFAULT_SEED
    tolerances: Tolerances = DEFAULT_TOLERANCES
    output: Path | None = None
    format: str = "json"

    @classmethod
    def from_environment(cls, **kwargs) -> "RunConfig":
        """Build a config, letting SEGRETOOL_SEED override the given seed."""
        env_seed = os.environ.get(SEED_ENVIRONMENT_VARIABLE)
        if env_seed is not None:
            try:
                kwargs["seed"] = int(env_seed)
            except ValueError as error:
                raise ConfigurationError(f"{SEED_ENVIRONMENT_VARIABLE} must be an integer, got {env_seed!r}") from error
            logging.debug(f"CONFIG: seed {kwargs['seed']} taken from {SEED_ENVIRONMENT_VARIABLE}")
        if kwargs.get("format", "json") not in ("json", "csv"):
            raise ConfigurationError(f"Unknown output format {kwargs['format']!r}")
        return cls(**kwargs)

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed)
