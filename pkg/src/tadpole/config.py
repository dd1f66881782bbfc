"""Run configuration: a dataclass whose JSON Schema is generated from its own type hints.

>>> config = load_config(overrides={"alpha": 0.5, "nmax": 10})
>>> config.alpha, config.nmax, config.effective_kmax
(0.5, 10, 10)
>>> load_config(overrides={"L": -1.0})  # doctest: +IGNORE_EXCEPTION_DETAIL
Traceback (most recent call last):
...
tadpole.errors.ConfigError: data.L must be bigger than 0
"""

import json
import logging
import math
import typing as t
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import fastjsonschema

from tadpole.core import GraphParams
from tadpole.errors import ConfigError, ParameterError
from tadpole.schema import Parser
from tadpole.spectrum import SeedBranch

__all__ = ["RunConfig", "config_schema", "load_config", "validate_config"]

logger = logging.getLogger(__name__)

_POSITIVE = {"exclusiveMinimum": 0}


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one reproducible run."""

    L: float = field(default=2 * math.pi, metadata={**_POSITIVE, "description": "loop length"})
    alpha: float = field(default=1.0, metadata={"minimum": 0, "description": "vertex damping"})
    x_max: float = field(default=32 * math.pi, metadata={**_POSITIVE, "description": "half-line truncation"})
    h1: float = field(default=math.pi / 200, metadata={**_POSITIVE, "description": "half-line grid step"})
    h2: float = field(default=math.pi / 200, metadata={**_POSITIVE, "description": "loop grid step"})
    nmax: int = field(default=30, metadata={"minimum": 1, "description": "largest branch index"})
    kmax: t.Optional[int] = field(
        default=None, metadata={"minimum": 1, "description": "largest confined index, nmax when null"}
    )
    tmax: float = field(default=5.0, metadata={**_POSITIVE, "description": "evolution horizon"})
    dt: float = field(default=1e-3, metadata={**_POSITIVE, "description": "time step"})
    out_dir: str = field(default="out", metadata={"minLength": 1, "description": "output directory"})
    seed_branch: SeedBranch = "both"

    @property
    def effective_kmax(self) -> int:
        return self.nmax if self.kmax is None else self.kmax

    @property
    def output_path(self) -> Path:
        return Path(self.out_dir)

    def graph_params(self) -> GraphParams:
        """:raises ConfigError: the grid steps do not fit the lengths"""
        try:
            return GraphParams(L=self.L, alpha=self.alpha, x_max=self.x_max, h1=self.h1, h2=self.h2)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def as_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)


@lru_cache(maxsize=None)
def config_schema() -> t.Dict[str, t.Any]:
    """JSON Schema of :py:class:`RunConfig`."""
    return Parser().parse_dataclass(RunConfig).json_repr()


@lru_cache(maxsize=None)
def _validator() -> t.Callable[[t.Any], t.Any]:
    return fastjsonschema.compile(config_schema(), use_default=False)


def validate_config(data: t.Any, /) -> t.Dict[str, t.Any]:
    """:raises ConfigError: the data does not match the RunConfig schema"""
    try:
        return _validator()(data)
    except fastjsonschema.JsonSchemaException as exc:
        raise ConfigError(exc.message) from exc


def load_config(
    path: t.Union[str, Path, None] = None, /, overrides: t.Optional[t.Mapping[str, t.Any]] = None
) -> RunConfig:
    """Read a JSON config file (optional), apply non-``None`` overrides and validate the merged result once.

    :raises ConfigError: unreadable file, invalid JSON, unknown keys or out-of-range values
    """
    data: t.Dict[str, t.Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must hold a JSON object")
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    validate_config(data)
    config = RunConfig(**data)
    logger.debug("Run config: %s", config)
    return config
