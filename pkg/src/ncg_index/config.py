"""Job configuration documents for the batch runner."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError

DEFAULT_WINDOW = 256
DEFAULT_TOLERANCE = 1e-6
DEFAULT_EPS = (1.0, 0.5, 0.25)

MODEL_KINDS = {"circle": "odd", "finite-even": "even"}
KIND_ALIASES = {"finite_even": "finite-even"}
METHODS = {"winding", "direct", "tau", "chn", "jlo", "local", "heat", "zeta", "cyclic"}
EVEN_ONLY = {"heat", "zeta"}
ODD_ONLY = {"winding"}
# methods whose degree fixes the parity of the cochain being paired
DEGREE_PARITY_METHODS = {"tau", "chn", "local"}


@dataclass
class ModelConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def parity(self) -> str:
        return MODEL_KINDS[self.kind]


@dataclass
class TaskConfig:
    id: str
    method: str
    symbol: Optional[Dict[int, complex]] = None
    idempotent: Any = None
    degree: Optional[int] = None
    eps: Tuple[float, ...] = DEFAULT_EPS
    window: int = DEFAULT_WINDOW
    m_cap: int = 3
    tolerance: Optional[float] = DEFAULT_TOLERANCE
    expect: Optional[float] = None
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def parities(self) -> set:
        """Every parity implied by the task's fields."""
        found = set()
        if self.symbol is not None:
            found.add("odd")
        if self.idempotent is not None:
            found.add("even")
        if self.degree is not None and self.method in DEGREE_PARITY_METHODS:
            found.add("even" if self.degree % 2 == 0 else "odd")
        if self.method in EVEN_ONLY:
            found.add("even")
        if self.method in ODD_ONLY:
            found.add("odd")
        return found

    @property
    def parity(self) -> Optional[str]:
        found = self.parities
        return found.pop() if len(found) == 1 else None


@dataclass
class JobConfig:
    model: ModelConfig
    tasks: List[TaskConfig]
    output: Optional[str] = None
    format: str = "csv"


def _complex(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or a [re, im] pair, got {v!r}")


def parse_matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(f"{where}: expected a list of rows")
    rows = [[_complex(x, where) for x in r] for r in v]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{where}: ragged matrix")
    return np.array(rows, dtype=complex)


def _parse_symbol(v, where: str) -> Dict[int, complex]:
    if not isinstance(v, dict) or not v:
        raise ConfigError(f"{where}: symbol must be a non-empty object mapping Fourier index to [re, im]")
    try:
        return {int(k): _complex(c, where) for k, c in v.items()}
    except ValueError:
        raise ConfigError(f"{where}: Fourier indices must be integers") from None


def _parse_model(doc) -> ModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("field 'model' must be an object")
    kind = doc.get("kind")
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
    params = {k: v for k, v in doc.items() if k != "kind"}
    if kind == "finite-even":
        for key in ("dim_plus", "dim_minus", "P"):
            if key not in params:
                raise ConfigError(f"finite-even model: missing field {key!r}")
        params["P"] = parse_matrix(params["P"], "model.P")
        params["generators"] = {k: parse_matrix(m, f"model.generators.{k}") for k, m in params.get("generators", {}).items()}
    return ModelConfig(kind, params)


def _parse_task(i: int, doc, model: ModelConfig, window_override: Optional[int]) -> TaskConfig:
    where = f"tasks[{i}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: task must be an object")
    method = doc.get("method")
    if method not in METHODS:
        raise ConfigError(f"{where}: unknown method {method!r}")
    known = {"id", "method", "symbol", "idempotent", "k", "n", "eps", "window", "m_cap", "tolerance", "expect"}
    t = TaskConfig(id=str(doc.get("id", f"t{i}")), method=method)
    if "symbol" in doc:
        t.symbol = _parse_symbol(doc["symbol"], f"{where}.symbol")
    if "idempotent" in doc:
        t.idempotent = doc["idempotent"]
    deg = doc.get("k", doc.get("n"))
    if deg is not None:
        if not isinstance(deg, int) or deg < 0:
            raise ConfigError(f"{where}: degree must be a nonnegative integer")
        t.degree = deg
    if "eps" in doc:
        eps = doc["eps"]
        if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
            raise ConfigError(f"{where}.eps: expected a non-empty list of positive numbers")
        t.eps = tuple(float(e) for e in eps)
    t.window = int(window_override if window_override is not None else doc.get("window", DEFAULT_WINDOW))
    t.m_cap = int(doc.get("m_cap", 3))
    tol = doc.get("tolerance", DEFAULT_TOLERANCE)
    t.tolerance = None if tol is None else float(tol)
    t.expect = doc.get("expect")
    t.options = {k: v for k, v in doc.items() if k not in known}
    for parity in sorted(t.parities):
        if parity != model.parity:
            raise ConfigError(f"{where}: {parity} task does not fit the {model.parity} model {model.kind!r}")
    if model.parity == "odd" and t.symbol is None and method not in ("cyclic",):
        raise ConfigError(f"{where}: odd tasks need a 'symbol'")
    return t


def load_config(text: str, window_override: Optional[int] = None) -> JobConfig:
    """Parse and validate a JSON job document, filling defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    for key in ("model", "tasks"):
        if key not in doc:
            raise ConfigError(f"missing field {key!r}")
    model = _parse_model(doc["model"])
    if not isinstance(doc["tasks"], list):
        raise ConfigError("field 'tasks' must be a list")
    tasks = [_parse_task(i, t, model, window_override) for i, t in enumerate(doc["tasks"])]
    out = doc.get("output", {}) or {}
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown output format {fmt!r}")
    return JobConfig(model, tasks, out.get("path"), fmt)
