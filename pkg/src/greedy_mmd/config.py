"""YAML run configuration.

Example::

    kernel: {family: matern32_product, theta: 10}
    target: {variant: uniform_box, lower: [0, 0], upper: [1, 1]}
    candidates: {mode: halton, C: 4096, box: [[0, 0], [1, 1]]}
    method: {name: kh_predefined, step_rule: inv_k}
    n_max: 500
    output: {csv: runs/kh.csv}

``kernel.theta`` may be the string ``heuristic``; the bandwidth is then set
from the candidate set with :func:`greedy_mmd.metrics.theta_heuristic`.
Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .algorithms import METHODS, ONE_STEP_METHODS
from .candidates import CandidateSource
from .kernels import FAMILIES

__all__ = ["ConfigError", "RunConfig", "load_config"]

STEP_RULES = ("inv_k", "two_over_kplus1")
VARIANTS = {
    "kh_iwo": ("i_simplex", "ii_sum_one", "iii_unconstrained"),
    "sbq": ("unconstrained", "sum_one", "coord_descent"),
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class RunConfig:
    kernel: dict
    target: dict
    candidates: dict
    method: dict
    n_max: int
    output: dict = field(default_factory=dict)
    bound_check: bool = True
    mc2_budget: int = 2000
    audit_every: int = 10
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def method_name(self):
        return self.method["name"]

    @property
    def step_rule(self):
        return self.method.get("step_rule", "inv_k")

    @property
    def variant(self):
        return self.method.get("variant")

    @property
    def label(self):
        """Short method label used in merged outputs."""
        name = self.method_name
        if name in ("kh_predefined", "gm_predefined"):
            rule = self.step_rule
            return f"{name[:2]}_{rule if isinstance(rule, str) else 'custom'}"
        if name in VARIANTS:
            return f"{name}_{self.variant or VARIANTS[name][0 if name == 'sbq' else 1]}"
        return name

    def resolve(self, path):
        p = Path(path)
        return (p if p.is_absolute() else self.base_dir / p).resolve()

    def source(self) -> CandidateSource:
        c = self.candidates
        box = c.get("box")
        path = c.get("path")
        return CandidateSource(
            mode=c["mode"],
            path=None if path is None else str(self.resolve(path)),
            seed=int(c.get("seed", self.seed)),
            box=None if box is None else (box[0], box[1]),
            offset=int(c.get("offset", 0)),
            resample_each_iteration=bool(c.get("resample", False)),
        )

    def shared_key(self):
        """Fields that runs in one comparison must agree on."""
        return (repr(self.kernel), repr(self.target), repr(self.candidates))

    def to_dict(self):
        return {
            "kernel": self.kernel,
            "target": self.target,
            "candidates": self.candidates,
            "method": self.method,
            "n_max": self.n_max,
            "output": self.output,
            "bound_check": self.bound_check,
            "mc2_budget": self.mc2_budget,
            "audit_every": self.audit_every,
            "seed": self.seed,
        }


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing '{key}' in {where}")
    return mapping[key]


def validate(cfg: RunConfig):
    fam = _require(cfg.kernel, "family", "kernel")
    if fam not in FAMILIES:
        raise ConfigError(f"unknown kernel family {fam!r}")
    theta = cfg.kernel.get("theta", 1.0)
    if theta != "heuristic" and not (isinstance(theta, (int, float)) and theta > 0):
        raise ConfigError(f"kernel.theta must be positive or 'heuristic', got {theta!r}")
    _require(cfg.target, "variant", "target")
    if cfg.target["variant"] == "empirical":
        path = cfg.resolve(_require(cfg.target, "path", "target"))
        if not path.is_file():
            raise ConfigError(f"target file not found: {path}")
        cfg.target = {**cfg.target, "path": str(path)}
    mode = _require(cfg.candidates, "mode", "candidates")
    if mode != "file" and "C" not in cfg.candidates:
        raise ConfigError("candidates.C is required unless mode is 'file'")
    if mode == "file":
        path = cfg.resolve(_require(cfg.candidates, "path", "candidates"))
        if not path.is_file():
            raise ConfigError(f"candidate file not found: {path}")
    name = _require(cfg.method, "name", "method")
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {sorted(METHODS)}")
    rule = cfg.method.get("step_rule", "inv_k")
    if isinstance(rule, str) and rule not in STEP_RULES:
        raise ConfigError(f"unknown step rule {rule!r}")
    if name in VARIANTS and cfg.variant is not None and cfg.variant not in VARIANTS[name]:
        raise ConfigError(f"variant {cfg.variant!r} is not valid for {name}")
    if cfg.candidates.get("resample") and name not in ONE_STEP_METHODS:
        raise ConfigError(f"resample mode is only allowed for {ONE_STEP_METHODS}")
    if not isinstance(cfg.n_max, int) or cfg.n_max < 1:
        raise ConfigError(f"n_max must be a positive integer, got {cfg.n_max!r}")
    try:
        cfg.source()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def from_dict(data, base_dir=None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = copy.deepcopy(data)
    method = data.get("method")
    if isinstance(method, str):
        method = {"name": method}
    try:
        cfg = RunConfig(
            kernel=_require(data, "kernel", "config"),
            target=_require(data, "target", "config"),
            candidates=_require(data, "candidates", "config"),
            method=method if method is not None else _require(data, "method", "config"),
            n_max=_require(data, "n_max", "config"),
            output=data.get("output") or {},
            bound_check=bool(data.get("bound_check", True)),
            mc2_budget=int(data.get("mc2_budget", 2000)),
            audit_every=int(data.get("audit_every", 10)),
            seed=int(data.get("seed", 0)),
            base_dir=Path(base_dir) if base_dir else Path.cwd(),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(data, path.parent)
