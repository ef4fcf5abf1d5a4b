"""Text formats for graphs, vertex functions and output files."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .errors import GraphHeatDataError
from .graph import VertexFunction, WeightedGraph, build_graph
from .trajectory import format_float


class FormatError(GraphHeatDataError):
    pass


def _records(text: str, ncols: int, what: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != ncols:
            raise FormatError(f"{what} line {lineno}: expected {ncols} fields, got {len(parts)}")
        try:
            value = float(parts[-1])
        except ValueError:
            raise FormatError(f"{what} line {lineno}: {parts[-1]!r} is not a number") from None
        yield (*parts[:-1], value)


def parse_graph(text: str) -> WeightedGraph:
    """Parse ``<u> <v> <mu>`` lines; ``#`` starts a comment line."""
    return build_graph(_records(text, 3, "graph"))


def read_graph(path) -> WeightedGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def format_graph(G: WeightedGraph) -> str:
    """Canonical edge list: one direction per edge, sorted lexicographically."""
    return "".join(f"{u} {v} {format_float(w)}\n" for u, v, w in G.edges)


def parse_function(text: str) -> VertexFunction:
    """Parse ``<vertex> <value>`` lines."""
    seen = {}
    for v, x in _records(text, 2, "function"):
        if v in seen:
            raise FormatError(f"function: vertex {v!r} listed twice")
        seen[v] = x
    try:
        return VertexFunction(seen)
    except ValueError as exc:
        raise FormatError(f"function: {exc}") from None


def read_function(path) -> VertexFunction:
    return parse_function(Path(path).read_text(encoding="utf-8"))


def format_function(f: VertexFunction) -> str:
    return "".join(f"{v} {format_float(x)}\n" for v, x in f.items())


def write_atomic(path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
