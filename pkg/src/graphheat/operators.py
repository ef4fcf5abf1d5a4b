"""Discrete difference operators on weighted graphs.

Every operator accepts either

* a graph-indexed numpy array of shape ``(n,)`` or ``(n, k)`` (a batch of
  ``k`` functions in columns), returning an array of the same shape, or
* a :class:`~graphheat.graph.VertexFunction` (or any mapping), returning a
  VertexFunction on the evaluated vertices. ``at`` selects those vertices
  (default: all of them); a value missing from the hop ball an evaluation
  depends on raises :class:`~graphheat.errors.MissingValue`.

Sums run over directed edges of positive weight, so a vertex only ever
reads the values of its neighbours.
"""
from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from functools import wraps

import numpy as np
import scipy.linalg

from .errors import MissingValue, NonpositiveM
from .graph import VertexFunction, WeightedGraph

__all__ = [
    "BochnerForm",
    "LocalQuadraticForm",
    "laplacian",
    "grad_norm_sq",
    "grad_inner",
    "gamma",
    "gamma_expanded",
    "hessian_norm_sq",
    "gamma2",
    "gamma2_closed_form",
    "bochner_residual",
    "cd_gap",
    "local_form",
    "local_curvature",
    "curvature_k_star",
    "dirichlet_energy",
]


def _per_vertex(a: np.ndarray, like: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape + (1,) * (like.ndim - 1))


def _edge_mean(G: WeightedGraph, edge_values: np.ndarray) -> np.ndarray:
    """``(1/d_x) * sum over directed edges (x, y) of mu_xy * value``."""
    mu = _per_vertex(G.edge_mu, edge_values)
    return (G.source_sum @ (mu * edge_values)) / _per_vertex(G.degree, edge_values)


def _diff(G: WeightedGraph, f: np.ndarray) -> np.ndarray:
    return f[G.edge_dst] - f[G.edge_src]


def _reach(G: WeightedGraph, idx: np.ndarray, radius: int) -> np.ndarray:
    """Boolean mask of the closed hop ball of given radius around the index set."""
    mask = np.zeros(G.n, dtype=bool)
    mask[idx] = True
    for _ in range(radius):
        grown = mask.copy()
        grown[G.edge_dst[mask[G.edge_src]]] = True
        mask = grown
    return mask


def _vertexwise(radius: int):
    """Lift an array operator to accept VertexFunctions with an ``at`` selector.

    ``radius`` is the hop radius of the data the value at a vertex reads.
    """

    def decorate(op):
        @wraps(op)
        def wrapper(G, *args, at: Iterable[str] | None = None, **kwargs):
            funcs = [a for a in args if isinstance(a, Mapping)]
            if not funcs:
                if at is not None:
                    raise TypeError("`at` applies to VertexFunction inputs only")
                return op(G, *args, **kwargs)
            targets = G.vertices if at is None else tuple(at)
            idx = np.array([G.index_of(v) for v in targets], dtype=np.intp)
            need = _reach(G, idx, radius)
            arrays = []
            for a in args:
                if isinstance(a, Mapping):
                    arr = a.on(G) if isinstance(a, VertexFunction) else VertexFunction(a).on(G)
                    missing = need & np.isnan(arr)
                    if missing.any():
                        names = ", ".join(G.vertices[i] for i in np.flatnonzero(missing)[:5])
                        raise MissingValue(f"{op.__name__}: function undefined at {names}")
                    arrays.append(arr)
                else:
                    arrays.append(a)
            with np.errstate(invalid="ignore"):
                out = op(G, *arrays, **kwargs)
            return VertexFunction((v, out[i]) for v, i in zip(targets, idx))

        return wrapper

    return decorate


@_vertexwise(1)
def laplacian(G: WeightedGraph, f):
    """``Δf(x) = (1/d_x) Σ_{y~x} μ_xy (f(y) − f(x))``."""
    return _edge_mean(G, _diff(G, np.asarray(f, dtype=float)))


@_vertexwise(1)
def grad_inner(G: WeightedGraph, f, g):
    """``(1/d_x) Σ μ_xy (f(y) − f(x))(g(y) − g(x))``; equals ``2 Γ(f, g)``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return _edge_mean(G, _diff(G, f) * _diff(G, g))


@_vertexwise(1)
def grad_norm_sq(G: WeightedGraph, f):
    """``|∇f|²(x) = (1/d_x) Σ μ_xy (f(y) − f(x))²``."""
    d = _diff(G, np.asarray(f, dtype=float))
    return _edge_mean(G, d * d)


@_vertexwise(1)
def gamma(G: WeightedGraph, f, g):
    """Carré du champ from its definition ``½{Δ(fg) − fΔg − gΔf}``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return 0.5 * (laplacian(G, f * g) - f * laplacian(G, g) - g * laplacian(G, f))


@_vertexwise(1)
def gamma_expanded(G: WeightedGraph, f, g):
    """Carré du champ as the edge sum ``(1/2d_x) Σ μ_xy (f(y)−f(x))(g(y)−g(x))``."""
    return 0.5 * grad_inner(G, f, g)


@_vertexwise(2)
def hessian_norm_sq(G: WeightedGraph, f):
    """``|D²f|²(x) = (1/d_x) Σ_{y~x} (μ_xy/d_y) Σ_{z~y} μ_yz (f(x) − 2f(y) + f(z))²``.

    Evaluated literally over all two-step walks ``x ~ y ~ z``.
    """
    f = np.asarray(f, dtype=float)
    x, y, z, w = G.two_chains
    second = f[x] - 2.0 * f[y] + f[z]
    return (G.chain_sum @ (_per_vertex(w, second) * second * second)) / _per_vertex(G.degree, f)


@_vertexwise(2)
def gamma2(G: WeightedGraph, f):
    """``Γ₂(f, f) = ½{ΔΓ(f, f) − 2Γ(f, Δf)}``, composed from the definitions of Δ and Γ."""
    f = np.asarray(f, dtype=float)
    lap = laplacian(G, f)
    return 0.5 * (laplacian(G, gamma(G, f, f)) - 2.0 * gamma(G, f, lap))


@_vertexwise(2)
def gamma2_closed_form(G: WeightedGraph, f):
    """``¼|D²f|² − ½|∇f|² + ½(Δf)²``."""
    f = np.asarray(f, dtype=float)
    lap = laplacian(G, f)
    return 0.25 * hessian_norm_sq(G, f) - 0.5 * grad_norm_sq(G, f) + 0.5 * lap * lap


class BochnerForm(enum.Enum):
    """Sign of the ``2(Δf)²`` term on the right of the Bochner formula.

    ``PLUS``:  −Δ|∇f|² = −|D²f|² + 2|∇f|² + 2(Δf)² − 2(∇f, ∇Δf)
    ``MINUS``: −Δ|∇f|² = −|D²f|² + 2|∇f|² − 2(Δf)² − 2(∇f, ∇Δf)

    ``MINUS`` is the identity that holds on every weighted graph; the
    residual of ``PLUS`` is exactly ``−4(Δf)²``.
    """

    PLUS = "plus"
    MINUS = "minus"


@_vertexwise(2)
def bochner_residual(G: WeightedGraph, f, form: BochnerForm = BochnerForm.MINUS):
    """Left side minus right side of the Bochner formula, pointwise."""
    form = BochnerForm(form)
    f = np.asarray(f, dtype=float)
    lap = laplacian(G, f)
    grad_sq = grad_norm_sq(G, f)
    lhs = -laplacian(G, grad_sq)
    sign = 1.0 if form is BochnerForm.PLUS else -1.0
    rhs = (-hessian_norm_sq(G, f) + 2.0 * grad_sq + sign * 2.0 * lap * lap
           - 2.0 * grad_inner(G, f, lap))
    return lhs - rhs


def _inv_m(m: float) -> float:
    m = float(m)
    if math.isnan(m) or m <= 0:
        raise NonpositiveM(f"dimension parameter m must be positive or inf, got {m!r}")
    return 0.0 if math.isinf(m) else 1.0 / m


def cd_gap(G: WeightedGraph, f, m: float, k: float, *, at=None):
    """``Γ₂(f,f) − (1/m)(Δf)² − (k/2)|∇f|²``; CD(m, k) holds at x for f iff this is ≥ 0."""
    inv_m = _inv_m(m)
    return _cd_gap(G, f, inv_m, float(k), at=at)


@_vertexwise(2)
def _cd_gap(G, f, inv_m, k):
    f = np.asarray(f, dtype=float)
    lap = laplacian(G, f)
    return gamma2(G, f) - inv_m * lap * lap - 0.5 * k * grad_norm_sq(G, f)


def dirichlet_energy(G: WeightedGraph, f, mask: np.ndarray | None = None) -> float:
    """``¼ Σ_x Σ_{y~x} μ_xy (f(y) − f(x))²`` over the vertices selected by ``mask``.

    Both endpoints of an edge must be selected for it to count.
    """
    f = np.asarray(f, dtype=float)
    src, dst, mu = G.edge_src, G.edge_dst, G.edge_mu
    if mask is not None:
        keep = mask[src] & mask[dst]
        src, dst, mu = src[keep], dst[keep], mu[keep]
    d = f[dst] - f[src]
    return 0.25 * float(np.sum(mu * d * d))


# -- local quadratic forms and the curvature constant -----------------------


@dataclass(frozen=True)
class LocalQuadraticForm:
    """Γ₂(f,f)(x), Δf(x) and |∇f|²(x) as forms on the values over the 2-ball of x.

    ``support[0]`` is the centre, followed by its neighbours and then the
    vertices at distance two. ``gamma2 = fᵀ A f``, ``Δf(x) = q·f``,
    ``|∇f|²(x) = fᵀ R f``.
    """

    center: str
    support: tuple[str, ...]
    n_neighbors: int
    gamma2: np.ndarray
    q: np.ndarray
    R: np.ndarray

    def evaluate(self, f_local: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(Γ₂, Δf, |∇f|²)`` at the centre for columns of ``f_local``."""
        f_local = np.asarray(f_local, dtype=float)
        g2 = np.einsum("i...,ij,j...->...", f_local, self.gamma2, f_local)
        grad = np.einsum("i...,ij,j...->...", f_local, self.R, f_local)
        return g2, self.q @ f_local, grad


def local_form(G: WeightedGraph, x: str) -> LocalQuadraticForm:
    """Assemble the local forms at ``x`` from the closed-form expression of Γ₂."""
    ix = G.index_of(x)
    dist = G.hop_distances(x)
    nbrs = np.flatnonzero(dist == 1)
    second = np.flatnonzero(dist == 2)
    order = np.concatenate([[ix], nbrs, second]).astype(np.intp)
    pos = {int(v): p for p, v in enumerate(order)}
    s = len(order)
    dx = G.degree[ix]

    q = np.zeros(s)
    R = np.zeros((s, s))
    sel = G.edge_src == ix
    for y, mu in zip(G.edge_dst[sel], G.edge_mu[sel]):
        e = np.zeros(s)
        e[pos[int(y)]] += 1.0
        e[0] -= 1.0
        q += mu / dx * e
        R += mu / dx * np.outer(e, e)

    D2 = np.zeros((s, s))
    cx, cy, cz, cw = G.two_chains
    sel = cx == ix
    for y, z, w in zip(cy[sel], cz[sel], cw[sel]):
        e = np.zeros(s)
        e[0] += 1.0
        e[pos[int(y)]] -= 2.0
        e[pos[int(z)]] += 1.0
        D2 += w / dx * np.outer(e, e)

    A = 0.25 * D2 - 0.5 * R + 0.5 * np.outer(q, q)
    return LocalQuadraticForm(
        center=x,
        support=tuple(G.vertices[i] for i in order),
        n_neighbors=len(nbrs),
        gamma2=A,
        q=q,
        R=R,
    )


def local_curvature(G: WeightedGraph, x: str, m: float) -> tuple[float, VertexFunction | None]:
    """Largest ``k`` with CD(m, k) at ``x``, and a function attaining it.

    Constants are removed by pinning ``f(x) = 0``; the values on the
    distance-two sphere, which ``|∇f|²(x)`` does not see, are eliminated by a
    Schur complement. What remains is a definite pencil on the neighbours,
    solved with a dense symmetric eigensolver.
    """
    inv_m = _inv_m(m)
    form = local_form(G, x)
    k = form.n_neighbors
    if k == 0:
        return math.inf, None
    M = form.gamma2 - inv_m * np.outer(form.q, form.q)
    Y = slice(1, 1 + k)
    Z = slice(1 + k, None)
    M_yy, M_yz, M_zz = M[Y, Y], M[Y, Z], M[Z, Z]
    if M_zz.size:
        elim = scipy.linalg.solve(M_zz, M_yz.T, assume_a="pos")
        S = M_yy - M_yz @ elim
    else:
        elim = np.zeros((0, k))
        S = M_yy
    S = 0.5 * (S + S.T)
    vals, vecs = scipy.linalg.eigh(S, form.R[Y, Y])
    f_y = vecs[:, 0]
    f_local = np.concatenate([[0.0], f_y, -elim @ f_y])
    return 2.0 * float(vals[0]), VertexFunction(zip(form.support, f_local))


def curvature_k_star(G: WeightedGraph, x: str, m: float) -> float:
    """Optimal curvature constant ``k*`` of CD(m, k) at vertex ``x`` (``+inf`` if unconstrained)."""
    return local_curvature(G, x, m)[0]
