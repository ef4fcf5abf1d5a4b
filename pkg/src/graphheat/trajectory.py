"""Time-stamped solver output and verification reports."""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .graph import Domain, VertexFunction, WeightedGraph


@dataclass(frozen=True)
class Trajectory:
    """States on the closure of a domain at increasing times.

    ``values[i, j]`` is the state at ``times[i]`` on vertex ``vertices[j]``;
    ``vertices`` is the closure in lexicographic order.
    """

    graph: WeightedGraph
    domain: Domain
    times: np.ndarray
    vertices: tuple[str, ...]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> VertexFunction:
        return VertexFunction(zip(self.vertices, self.values[i]))

    @property
    def initial(self) -> VertexFunction:
        return self.state(0)

    @property
    def final(self) -> VertexFunction:
        return self.state(-1)

    def column(self, v: str) -> np.ndarray:
        return self.values[:, self.vertices.index(v)]

    @property
    def closure_index(self) -> np.ndarray:
        return np.array([self.graph.index_of(v) for v in self.vertices], dtype=np.intp)

    def full_states(self) -> np.ndarray:
        """States as graph-indexed arrays, shape ``(n, len(times))``, zero off the closure."""
        out = np.zeros((self.graph.n, len(self.times)))
        out[self.closure_index] = self.values.T
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(["t", *self.vertices]) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(",".join(format_float(x) for x in (t, *row)) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step record of one minimizing-movement step."""

    newton_iters: int
    el_residual: float
    kinetic: float
    energy_prev: float
    energy: float
    energy_bound_ok: bool
    dirichlet_monotone: bool


@dataclass(frozen=True)
class PMETrajectory(Trajectory):
    diagnostics: tuple[StepDiagnostics, ...] = ()


def format_float(x: float) -> str:
    """Shortest round-trip decimal representation (at most 17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    return obj


@dataclass
class VerificationReport:
    """Outcome of one identity or principle check.

    ``worst`` is the largest violation-side quantity seen (a residual or a
    margin, depending on the check) and ``location`` where it occurred.
    """

    check: str
    passed: bool
    worst: float
    tolerance: float
    location: dict | None = None
    trials: int | None = None
    seed: int | None = None
    details: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def __bool__(self):
        return bool(self.passed)


def dumps_json(payload) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def dumps_reports(reports) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    if isinstance(reports, VerificationReport):
        payload = reports.to_dict()
    else:
        payload = [r.to_dict() if isinstance(r, VerificationReport) else _jsonable(r) for r in reports]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
