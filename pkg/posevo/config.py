"""Optimizer configuration and its flat key=value file format."""

import logging
import typing as _t
from pathlib import Path

import pydantic as _pydantic

from . import errors as _errors

logger = logging.getLogger(__name__)


class EAConfig(_pydantic.BaseModel):
    """Hyperparameters shared by the evolutionary search and hill climbing.

    Attributes:
        population_size: Individuals per generation
        elite_count: Best individuals carried over unchanged, < population_size
        tournament_size: Contestants per selection tournament
        crossover_probability: Chance an offspring comes from subtree crossover
        mutation_rate: Per-parameter mutation probability, None for 3 / dof
        mutation_scale: Mutation std as a fraction of each parameter's range
        eval_budget: Total objective evaluations allowed
        seed: Seed of the run's only random generator
        restart_after: Consecutive rejections before hill climbing restarts
        box_padding: Meters added around the cloud to bound the root position
        workers: Threads used for population evaluation
        target_value: Stop once the best objective is at or below this value
    """

    model_config = _pydantic.ConfigDict(frozen=True, extra="forbid")

    population_size: _pydantic.PositiveInt = 200
    elite_count: _pydantic.NonNegativeInt = 2
    tournament_size: _pydantic.PositiveInt = 3
    crossover_probability: float = _pydantic.Field(default=0.5, ge=0.0, le=1.0)
    mutation_rate: float | None = _pydantic.Field(default=None, ge=0.0, le=1.0)
    mutation_scale: float = _pydantic.Field(default=0.1, ge=0.0)
    eval_budget: _pydantic.PositiveInt = 100_000
    seed: int = _pydantic.Field(default=0, ge=0, lt=2**64)
    restart_after: _pydantic.PositiveInt = 500
    box_padding: float = _pydantic.Field(default=0.05, ge=0.0)
    workers: _pydantic.PositiveInt = 1
    target_value: float = _pydantic.Field(default=0.0, ge=0.0)

    @_pydantic.model_validator(mode="after")
    def _check_population(self) -> "EAConfig":
        if self.elite_count >= self.population_size:
            raise ValueError("elite_count must be smaller than population_size")
        if self.tournament_size > self.population_size:
            raise ValueError("tournament_size cannot exceed population_size")
        return self

    def resolved_mutation_rate(self, dof: int) -> float:
        """Configured mutation rate, or 3 / dof (capped at 1) when unset."""
        if self.mutation_rate is not None:
            return self.mutation_rate
        return min(1.0, 3.0 / max(dof, 1))

    @property
    def offspring_count(self) -> int:
        return self.population_size - self.elite_count

    def to_text(self) -> str:
        """Serialize as key = value lines, omitting unset optional fields."""
        lines = []
        for key, value in self.model_dump().items():
            if value is not None:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def build_config(values: _t.Mapping[str, _t.Any]) -> EAConfig:
    """Validate raw values into an EAConfig.

    Raises:
        ConfigError: With one message per offending field
    """
    try:
        return EAConfig.model_validate(dict(values))
    except _pydantic.ValidationError as e:
        errors = {}
        for err in e.errors():
            field = ".".join(str(loc) for loc in err.get("loc", ())) or "config"
            message = "unknown key" if err.get("type") == "extra_forbidden" else err["msg"]
            errors[field] = message
        raise _errors.ConfigError(errors) from e


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse key = value lines into raw strings; '#' starts a comment."""
    values: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise _errors.ConfigError({f"{source}:{number}": "expected 'key = value'"})
        if key in values:
            raise _errors.ConfigError({key: f"duplicate key at {source}:{number}"})
        values[key] = value
    return values


def load_config(
    path: str | Path | None = None,
    overrides: _t.Mapping[str, _t.Any] | None = None,
) -> EAConfig:
    """Layer defaults, a config file and explicit overrides (None values ignored).

    Raises:
        ConfigError: If the merged values are invalid
        OSError: If the file cannot be read
    """
    values: dict[str, _t.Any] = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
        logger.debug("read %d config keys from %s", len(values), path)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)
