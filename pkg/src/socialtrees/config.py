"""Run configuration files: flat ``key = value`` lines, ``#`` starts a comment."""

import dataclasses
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional

from .dtree import QLearnParams
from .envs import ENVIRONMENTS, EnvFactory
from .evolution import EvoParams
from .social import SocialConfig, planned_budget


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: str = "cartpole"
    bins: int = 7
    max_steps: Optional[int] = None
    population_size: int = 500
    generations: int = 100
    genotype_length: int = 1000
    gene_value_max: int = 40000
    crossover_prob: float = 0.1
    mutation_prob: float = 0.9
    mutation_rate: float = 0.05
    tournament_size: int = 2
    carry_q: bool = True
    collab_episodes: Optional[int] = None
    individual_episodes: int = 3
    collab_processes: int = 1
    collab_iterations: Optional[int] = None
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.05
    explore_collab: bool = True
    seed: Optional[int] = None
    out: Optional[str] = None
    workers: int = 1

    def evo_params(self):
        return EvoParams(self.population_size, self.generations, self.crossover_prob, self.mutation_prob,
                         self.mutation_rate, self.gene_value_max, self.tournament_size, self.genotype_length,
                         self.carry_q)

    def social_config(self):
        q = QLearnParams(self.alpha, self.gamma, self.epsilon)
        if self.collab_iterations is not None:
            e_c = self.collab_processes * self.collab_iterations
            if self.collab_episodes is not None and self.collab_episodes != e_c:
                raise ConfigError(f"collab_episodes = {self.collab_episodes} but collab_processes * "
                                  f"collab_iterations = {e_c}")
            return SocialConfig(e_c, self.individual_episodes, self.collab_processes, self.collab_iterations,
                                q, self.explore_collab)
        if self.collab_processes != 1:
            raise ConfigError("collab_processes > 1 requires collab_iterations")
        return SocialConfig(self.collab_episodes or 0, self.individual_episodes, q=q,
                            explore_collab=self.explore_collab)

    def env_factory(self):
        kwargs = {} if self.max_steps is None else {"max_steps": self.max_steps}
        return EnvFactory(self.env, self.bins, kwargs)

    def planned_budget(self):
        return planned_budget(self.evo_params(), self.social_config())

    def validate(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env: unknown environment {self.env!r} (known: {', '.join(sorted(ENVIRONMENTS))})")
        if self.bins < 2:
            raise ConfigError("bins: must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps: must be >= 1")
        for build in (self.evo_params, self.social_config):
            try:
                build()
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(str(e)) from None
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _type_name(t):
    return t.__name__ if isinstance(t, type) else str(t)


_TYPES = {f.name: _type_name(f.type) for f in fields(RunConfig)}


def _coerce(key, raw):
    typ = _TYPES[key]
    optional = "Optional" in typ
    if optional and raw.lower() in ("", "none", "null"):
        return None
    try:
        if "bool" in typ:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_config(text, overrides=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values).validate()


def config_from_dict(d):
    unknown = set(d) - set(_TYPES)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    return RunConfig(**d).validate()


def bundled(name):
    """Path-like handle to a file shipped in ``socialtrees/data``."""
    return resources.files("socialtrees").joinpath("data", name)


def read_text(path):
    """Read ``path``; a bare name that is not a local file falls back to the bundled data."""
    p = Path(path)
    if p.exists():
        return p.read_text()
    ref = bundled(str(path))
    if ref.is_file():
        return ref.read_text()
    ref = bundled("trees/" + str(path))
    if ref.is_file():
        return ref.read_text()
    raise FileNotFoundError(path)


def load_config(path, overrides=None):
    """Load a ``.cfg`` file or the ``config`` block of a run manifest (``.json``)."""
    text = read_text(path)
    if str(path).endswith(".json"):
        cfg = config_from_dict(json.loads(text)["config"])
        if overrides:
            cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None}).validate()
        return cfg
    return parse_config(text, overrides)
