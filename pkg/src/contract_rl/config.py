"""Experiment configuration files (TOML, or the same structure as JSON)."""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .multi import MultiConfig
from .qlearn import LearningConfig

KINDS = ("figure1", "divergence", "tree", "coingame", "prisoners")
SOLVERS = ("exact", "tabular")
MULTI_KINDS = ("coingame", "prisoners")
ENV_KEYS = {
    "figure1": (),
    "divergence": ("reward_s1", "reward_s2"),
    "tree": ("depth", "outcome_prob", "observed"),
    "coingame": ("grid_size", "max_steps", "gamma", "alpha"),
    "prisoners": ("alpha", "gamma"),
}
TOP_KEYS = ("kind", "solver", "seeds", "output", "workers", "max_iterations", "env", "learning", "protocol")
PROTOCOL_KEYS = ("compare_unnudged", "baselines")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    solver: str = "exact"
    seeds: list = field(default_factory=lambda: [0])
    output: str = "runs/out"
    workers: int = 0
    max_iterations: int = 100
    env: dict = field(default_factory=dict)
    learning: object = None
    protocol: dict = field(default_factory=dict)

    def resolved(self):
        d = asdict(self)
        d["learning"] = None if self.learning is None else asdict(self.learning)
        return d


def parse_seeds(value):
    """``"0..4"``, ``"0,2,5"``, an int, or a list of ints."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, list):
        if not all(isinstance(s, int) for s in value):
            raise ConfigError(f"seeds must be integers, got {value!r}")
        return list(value)
    if isinstance(value, str):
        try:
            if ".." in value:
                lo, hi = value.split("..")
                return list(range(int(lo), int(hi) + 1))
            return [int(s) for s in value.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse seeds {value!r}") from None
    raise ConfigError(f"cannot parse seeds {value!r}")


def _check_keys(where, given, allowed):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def from_mapping(d):
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a table")
    _check_keys("configuration", d, TOP_KEYS)
    kind = d.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    solver = d.get("solver", "tabular" if kind in MULTI_KINDS else "exact")
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {', '.join(SOLVERS)}, got {solver!r}")
    if kind in MULTI_KINDS and solver != "tabular":
        raise ConfigError(f"{kind} is only solved by tabular learners")
    if kind == "divergence" and solver == "tabular":
        raise ConfigError("the divergence model has an infinite horizon; tabular runs need a finite one")
    env = d.get("env", {})
    _check_keys(f"[env] for {kind}", env, ENV_KEYS[kind])
    if kind == "tree" and "depth" not in env:
        raise ConfigError("[env] for tree needs depth")
    protocol = d.get("protocol", {})
    _check_keys("[protocol]", protocol, PROTOCOL_KEYS if kind == "coingame" else ())
    learning = None
    if solver == "tabular":
        from .experiments import default_learning_config, default_multi_config

        base = default_multi_config(kind) if kind in MULTI_KINDS else default_learning_config()
        cls = MultiConfig if kind in MULTI_KINDS else LearningConfig
        given = d.get("learning", {})
        _check_keys("[learning]", given, [f.name for f in fields(cls)])
        try:
            learning = base.with_(**given)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[learning]: {e}") from None
    elif "learning" in d:
        raise ConfigError("[learning] only applies to the tabular solver")
    workers = d.get("workers", 0)
    max_it = d.get("max_iterations", 100)
    if not isinstance(workers, int) or workers < 0:
        raise ConfigError("workers must be a non-negative integer")
    if not isinstance(max_it, int) or max_it < 1:
        raise ConfigError("max_iterations must be a positive integer")
    cfg = ExperimentConfig(kind, solver, parse_seeds(d.get("seeds", [0])), str(d.get("output", f"runs/{kind}")),
                           workers, max_it, dict(env), learning, dict(protocol))
    _check_env(cfg)
    return cfg


def _check_env(cfg):
    # build one instance so range errors surface as configuration errors
    from .experiments import build_mdp

    try:
        if cfg.kind in ("figure1", "divergence", "tree"):
            build_mdp(cfg.kind, cfg.env, cfg.seeds[0] if cfg.seeds else 0)
        elif cfg.kind == "prisoners":
            from .envs import make_prisoners_dilemma
            make_prisoners_dilemma(**cfg.env)
        else:
            g = cfg.env.get("grid_size", 3)
            if not isinstance(g, int) or not 2 <= g <= 4:
                raise ValueError("grid_size must be an integer in [2, 4] for tabular learners")
            if not isinstance(cfg.env.get("max_steps", 20), int) or cfg.env.get("max_steps", 20) < 1:
                raise ValueError("max_steps must be a positive integer")
            for key in ("gamma", "alpha"):
                if key in cfg.env and not 0 < cfg.env[key] <= 1:
                    raise ValueError(f"{key} must lie in (0, 1]")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[env]: {e}") from None


def load(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    try:
        data = json.loads(text) if p.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return from_mapping(data)
