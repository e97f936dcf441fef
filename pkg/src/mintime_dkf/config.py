"""Scenario files: YAML documents with nested-list matrices and an edge-list block.

Example::

    name: small
    process:
      continuous: {f: [[0, -3], [3, 0]], g: [[1, 0], [0, 1]], q_cov: [[25, 0], [0, 25]]}
    sample_time: 0.015
    sensors:
      - {h: [[1, 0], [0, 1]], r_cov: [[0.01, 0], [0, 0.01]]}
    graph:
      n: 1
      edges: ""
    steps: 100

``process`` may instead give a discrete model ``{a, b, q_cov}``; ``graph`` may
instead give ``random: {n, edge_probability, seed}``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError, ValidationError
from .graph import Graph, format_edge_list, parse_edge_list
from .harness import RandomGraphSpec, ScenarioConfig, validate
from .sysmodel import ContinuousModel, ProcessModel, SensorModel

SCENARIO_DIR = Path(__file__).parent / "scenarios"

_SCALARS = {
    "steps": int,
    "step_size": float,
    "sample_time": float,
    "sigma_threshold": float,
    "rho": float,
    "run_seed": int,
    "g_oracle": bool,
    "arithmetic": str,
    "p0": float,
    "exchange_noise_std": float,
    "a0_tolerance": float,
    "g_error_tol": float,
    "symmetric": bool,
    "feed": str,
    "name": str,
}
_KNOWN = set(_SCALARS) | {"process", "sensors", "graph", "algorithms", "x0"}


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    for cand in (SCENARIO_DIR / p.name, SCENARIO_DIR / f"{p.name}.yaml"):
        if cand.is_file():
            return cand
    raise ParseError(f"scenario not found: {name_or_path}")


def _mat(doc, key, where):
    if key not in doc:
        raise ValidationError(f"{where}: missing field '{key}'")
    try:
        return np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}.{key}: {exc}") from None


def _process(doc) -> ProcessModel | ContinuousModel:
    if not isinstance(doc, dict):
        raise ValidationError("process: expected a mapping")
    if "continuous" in doc:
        c = doc["continuous"]
        return ContinuousModel(_mat(c, "f", "process.continuous"), _mat(c, "g", "process.continuous"), _mat(c, "q_cov", "process.continuous"))
    return ProcessModel(_mat(doc, "a", "process"), _mat(doc, "b", "process"), _mat(doc, "q_cov", "process"))


def _graph(doc) -> Graph | RandomGraphSpec:
    if not isinstance(doc, dict):
        raise ValidationError("graph: expected a mapping")
    if "random" in doc:
        r = doc["random"]
        try:
            return RandomGraphSpec(int(r["n"]), float(r["edge_probability"]), int(r["seed"]))
        except KeyError as exc:
            raise ValidationError(f"graph.random: missing field {exc}") from None
    if "n" not in doc:
        raise ValidationError("graph: missing field 'n'")
    return parse_edge_list(str(doc.get("edges") or ""), int(doc["n"]))


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a mapping at top level")
    unknown = set(doc) - _KNOWN
    if unknown:
        raise ValidationError(f"unknown fields: {sorted(unknown)}")
    for key in ("process", "sensors", "graph"):
        if key not in doc or doc[key] in (None, []):
            raise ValidationError(f"missing required field '{key}'")
    if not isinstance(doc["sensors"], list):
        raise ValidationError("sensors: expected a list")
    sensors = [
        SensorModel(_mat(s, "h", f"sensors[{i}]"), _mat(s, "r_cov", f"sensors[{i}]"))
        for i, s in enumerate(doc["sensors"])
    ]
    kwargs = {}
    for key, typ in _SCALARS.items():
        if doc.get(key) is not None:
            try:
                kwargs[key] = typ(doc[key])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{key}: {exc}") from None
    if "algorithms" in doc:
        algs = doc["algorithms"]
        if isinstance(algs, str):
            algs = algs.split(",")
        kwargs["algorithms"] = tuple(str(a).strip().lower() for a in algs)
    if doc.get("x0") is not None:
        kwargs["x0"] = np.array(doc["x0"], dtype=float)
    cfg = ScenarioConfig(process=_process(doc["process"]), sensors=sensors, graph=_graph(doc["graph"]), **kwargs)
    validate(cfg)
    return cfg


def parse_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file (path or bundled name)."""
    path = resolve_scenario_path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"{path}: malformed YAML{where}: {getattr(exc, 'problem', exc)}") from None
    return config_from_dict(doc)


def _lists(a: np.ndarray):
    return np.asarray(a, dtype=float).tolist()


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain-data form of a configuration; the inverse of :func:`config_from_dict`."""
    if isinstance(cfg.process, ContinuousModel):
        process = {"continuous": {"f": _lists(cfg.process.f), "g": _lists(cfg.process.g), "q_cov": _lists(cfg.process.q_cov)}}
    else:
        process = {"a": _lists(cfg.process.a), "b": _lists(cfg.process.b), "q_cov": _lists(cfg.process.q_cov)}
    if isinstance(cfg.graph, RandomGraphSpec):
        graph = {"random": {"n": cfg.graph.n, "edge_probability": cfg.graph.edge_probability, "seed": cfg.graph.seed}}
    else:
        graph = {"n": cfg.graph.n, "edges": format_edge_list(cfg.graph)}
    doc = {"name": cfg.name, "process": process, "graph": graph}
    doc["sensors"] = [{"h": _lists(s.h), "r_cov": _lists(s.r_cov)} for s in cfg.sensors]
    for key in _SCALARS:
        if key != "name":
            doc[key] = getattr(cfg, key)
    doc["algorithms"] = list(cfg.algorithms)
    doc["x0"] = None if cfg.x0 is None else _lists(cfg.x0)
    return doc


class _Dumper(yaml.SafeDumper):
    pass


def _str_representer(dumper, data):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_representer)


def serialize_config(cfg: ScenarioConfig) -> str:
    """YAML text that :func:`parse_config` reads back into an equal configuration."""
    return yaml.dump(config_to_dict(cfg), Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=100)


def resolved_settings(cfg: ScenarioConfig) -> dict:
    """Defaults actually used by a run, echoed into the summary."""
    g = cfg.resolved_graph()
    return {
        "n": cfg.n,
        "edges": [list(e) for e in g.edges],
        "step_size": cfg.resolved_step_size(),
        "sample_time": cfg.resolved_sample_time(),
        "sigma_threshold": cfg.resolved_sigma_threshold(),
        "arithmetic": cfg.resolved_arithmetic(),
        "process_a": _lists(cfg.process_model().a),
        "process_b": _lists(cfg.process_model().b),
    }
