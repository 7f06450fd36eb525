"""Run configuration: one TOML file describing the repository and its variants.

Layout::

    [run]
    repo = "path/to/repo"
    project = "name"
    studies = ["roles", "brooks", "turnover"]
    seed = 0
    bootstrap_resamples = 2000

    [inputs]            # optional, paths relative to the config file
    module_map = "modules.csv"
    bugfixes = "bugfixes.txt"
    loc_table = "loc.csv"

    [defaults.<stage>]  # applied to every variant
    ...

    [[variant]]
    name = "a"
    [variant.<stage>]
    ...

Stages and keys are listed in ``STAGES``; every key is resolved to a value
and recorded in the output metadata.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .entities import COUNTING_MODES, SUMMARISE
from .gitio import ALL_BRANCHES, BRANCH_MODES, FILTER_BEFORE_STORE, FILTER_ORDERS, FilterConfig
from .identity import AUTHOR_ONLY, EXACT, IDENTITY_MODES, SCOPES
from .network import (COUNT_PER_PRIOR_DEV, HIERARCHY_FORMULAS, TEMPORAL_ENTITY, VARIANTS,
                      WEIGHT_SCHEMES)
from .studies.brooks import CONTROLS, DEFAULT_TRANSFORMS
from .windows import parse_span

STUDIES = ("roles", "brooks", "turnover")
TIME_FIELDS = ("author", "commit")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str = ""):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


STAGES: dict[str, dict[str, Any]] = {
    "extract": {
        "branch_mode": ALL_BRANCHES,
        "branch": "",
        "filter_order": FILTER_BEFORE_STORE,
        "allow_patterns": [],
        "deny_patterns": [],
        "allow_extensions": [],
        "deny_extensions": [],
        "drop_binary": False,
    },
    "identity": {"mode": EXACT, "threshold": 0, "scope": AUTHOR_ONLY},
    "entities": {"mode": SUMMARISE, "gap": 0, "fallback": True},
    "windows": {"length": "3M", "overlap_step": "", "origin": "", "time_field": "author"},
    "network": {"variant": TEMPORAL_ENTITY, "weight_scheme": COUNT_PER_PRIOR_DEV,
                "hierarchy": "degree_times_one_minus_clustering", "weighted_evcent": True},
    "roles": {"core_threshold": 0.8, "averaging_span": "12M"},
    "brooks": {"window_length": "9M", "control_sets": [[]], "transforms": {}},
    "turnover": {"interval": "2W", "period": "6M", "loc_source": "auto"},
}

ENUMS = {
    ("extract", "branch_mode"): BRANCH_MODES,
    ("extract", "filter_order"): FILTER_ORDERS,
    ("identity", "mode"): IDENTITY_MODES,
    ("identity", "scope"): SCOPES,
    ("entities", "mode"): COUNTING_MODES,
    ("windows", "time_field"): TIME_FIELDS,
    ("network", "variant"): VARIANTS,
    ("network", "weight_scheme"): WEIGHT_SCHEMES,
    ("network", "hierarchy"): tuple(HIERARCHY_FORMULAS),
    ("turnover", "loc_source"): ("auto", "table", "builtin"),
}

RUN_KEYS = {"repo": None, "project": "", "studies": list(STUDIES), "seed": 0,
            "bootstrap_resamples": 2000, "jobs": 1}
INPUT_KEYS = ("module_map", "bugfixes", "loc_table")


@dataclass
class VariantConfig:
    name: str
    stages: dict[str, dict[str, Any]]

    def __getitem__(self, stage: str) -> dict[str, Any]:
        return self.stages[stage]

    @property
    def filters(self) -> FilterConfig:
        ex = self.stages["extract"]
        return FilterConfig(tuple(ex["allow_patterns"]), tuple(ex["deny_patterns"]),
                            tuple(ex["allow_extensions"]), tuple(ex["deny_extensions"]),
                            bool(ex["drop_binary"]), ex["filter_order"])

    @property
    def extraction_key(self) -> tuple:
        ex = self.stages["extract"]
        return (ex["branch_mode"], ex["branch"])

    def as_dict(self) -> dict[str, Any]:
        return {"name": self.name, **copy.deepcopy(self.stages)}


@dataclass
class RunConfig:
    path: str
    repo: str
    project: str
    studies: list[str]
    seed: int
    bootstrap_resamples: int
    jobs: int
    inputs: dict[str, Optional[str]]
    variants: list[VariantConfig] = field(default_factory=list)

    def resolved(self, variant: Optional[VariantConfig] = None) -> dict[str, Any]:
        """Everything that determines an output file, for embedding as metadata."""
        out = {"tool": f"repomine {__version__}", "project": self.project,
               "studies": list(self.studies), "seed": self.seed,
               "bootstrap_resamples": self.bootstrap_resamples,
               "inputs": {k: (os.path.basename(v) if v else None) for k, v in self.inputs.items()}}
        if variant is not None:
            out["variant"] = variant.as_dict()
        else:
            out["variants"] = [v.as_dict() for v in self.variants]
        return out

    def metadata_line(self, variant: Optional[VariantConfig] = None) -> str:
        return json.dumps(self.resolved(variant), sort_keys=True, separators=(",", ":"))

    def variant(self, name: str) -> VariantConfig:
        for v in self.variants:
            if v.name == name:
                return v
        raise ConfigError(f"no variant named {name!r}", "variant")


def _merge_stage(stage: str, base: dict, override: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in STAGES[stage]:
            raise ConfigError("unknown key", f"{where}.{stage}.{key}")
        out[key] = value
    return out


def _validate_stage(stage: str, values: dict, where: str) -> None:
    for (st, key), allowed in ENUMS.items():
        if st == stage and values[key] not in allowed:
            raise ConfigError(f"unknown value {values[key]!r} (expected one of {', '.join(allowed)})",
                              f"{where}.{stage}.{key}")
    for key, default in STAGES[stage].items():
        value = values[key]
        if isinstance(default, bool):
            ok = isinstance(value, bool)
        elif isinstance(default, (int, float)):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            ok = isinstance(value, type(default))
        if not ok:
            raise ConfigError(f"expected {type(default).__name__}, got {value!r}", f"{where}.{stage}.{key}")
    try:
        if stage == "windows":
            parse_span(values["length"])
            if values["overlap_step"]:
                parse_span(values["overlap_step"])
        elif stage == "roles":
            parse_span(values["averaging_span"])
            if not 0 < values["core_threshold"] <= 1:
                raise ValueError("core_threshold must be in (0, 1]")
        elif stage == "brooks":
            parse_span(values["window_length"])
            for cs in values["control_sets"]:
                for c in cs:
                    if c not in CONTROLS:
                        raise ValueError(f"unknown control {c!r}")
            for k in values["transforms"]:
                if k not in DEFAULT_TRANSFORMS:
                    raise ValueError(f"unknown transform column {k!r}")
        elif stage == "turnover":
            parse_span(values["interval"])
            parse_span(values["period"])
        elif stage == "identity" and values["threshold"] < 0:
            raise ValueError("threshold must be non-negative")
        elif stage == "entities" and values["gap"] < 0:
            raise ValueError("gap must be non-negative")
        elif stage == "extract":
            FilterConfig(tuple(values["allow_patterns"]), tuple(values["deny_patterns"]),
                         tuple(values["allow_extensions"]), tuple(values["deny_extensions"]),
                         values["drop_binary"], values["filter_order"])
    except ValueError as exc:
        raise ConfigError(str(exc), f"{where}.{stage}") from None


def parse_config(data: dict, path: str = "<memory>") -> RunConfig:
    base_dir = os.path.dirname(os.path.abspath(path)) if path != "<memory>" else os.getcwd()
    for top in data:
        if top not in ("run", "inputs", "defaults", "variant"):
            raise ConfigError("unknown section", top)
    run = dict(RUN_KEYS)
    for key, value in data.get("run", {}).items():
        if key not in RUN_KEYS:
            raise ConfigError("unknown key", f"run.{key}")
        run[key] = value
    if not run["repo"]:
        raise ConfigError("missing repository path", "run.repo")
    for s in run["studies"]:
        if s not in STUDIES:
            raise ConfigError(f"unknown study {s!r}", "run.studies")
    inputs = {}
    for key, value in data.get("inputs", {}).items():
        if key not in INPUT_KEYS:
            raise ConfigError("unknown key", f"inputs.{key}")
        inputs[key] = value
    inputs = {k: (os.path.join(base_dir, inputs[k]) if inputs.get(k) else None) for k in INPUT_KEYS}
    repo = run["repo"]
    if not os.path.isabs(repo):
        repo = os.path.join(base_dir, repo)

    defaults = {stage: copy.deepcopy(vals) for stage, vals in STAGES.items()}
    for stage, override in data.get("defaults", {}).items():
        if stage not in STAGES:
            raise ConfigError("unknown stage", f"defaults.{stage}")
        defaults[stage] = _merge_stage(stage, defaults[stage], override, "defaults")

    raw_variants = data.get("variant") or [{"name": "default"}]
    variants = []
    seen = set()
    for i, raw in enumerate(raw_variants):
        name = raw.get("name") or f"variant{i}"
        if name in seen:
            raise ConfigError(f"duplicate variant name {name!r}", "variant.name")
        seen.add(name)
        stages = {}
        for stage in STAGES:
            stages[stage] = _merge_stage(stage, defaults[stage], raw.get(stage, {}), f"variant[{name}]")
        for key in raw:
            if key != "name" and key not in STAGES:
                raise ConfigError("unknown stage", f"variant[{name}].{key}")
        for stage, values in stages.items():
            _validate_stage(stage, values, f"variant[{name}]")
        variants.append(VariantConfig(name, stages))

    project = run["project"] or os.path.basename(os.path.normpath(repo))
    return RunConfig(os.path.abspath(path) if path != "<memory>" else path, repo, project,
                     list(run["studies"]), int(run["seed"]), int(run["bootstrap_resamples"]),
                     int(run["jobs"]), inputs, variants)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found", str(path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse TOML: {exc}", str(path)) from None
    return parse_config(data, os.fspath(path))
