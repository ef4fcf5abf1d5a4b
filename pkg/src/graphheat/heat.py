"""Heat flow ``f_t = Δf`` on a domain with frozen Dirichlet data, plus monitors."""
from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveFailure, StabilityViolation
from .graph import Domain, VertexFunction, WeightedGraph
from .operators import grad_norm_sq, laplacian
from .trajectory import Trajectory, VerificationReport

__all__ = [
    "Scheme",
    "HeatConfig",
    "heat_step",
    "solve_heat",
    "max_principle_check",
    "bernstein_monitor",
    "bernstein_closed_form_k2",
    "oscillation_check",
    "mass_check",
    "convergence_detect",
    "time_grid",
]

LINEAR_TOL = 1e-12


class Scheme(enum.Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


@dataclass(frozen=True)
class HeatConfig:
    domain: Domain
    initial: VertexFunction
    h: float = 0.1
    T: float = 1.0
    scheme: Scheme = Scheme.IMPLICIT
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.h > 0 and self.T > 0):
            raise ValueError("h and T must be positive")
        if self.h > self.T:
            raise ValueError("step h exceeds horizon T")
        if self.scheme is Scheme.EXPLICIT and self.h > 1:
            raise StabilityViolation(f"explicit scheme needs h <= 1, got {self.h}")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


def time_grid(h: float, T: float) -> np.ndarray:
    """Nodes ``0, h, 2h, ...`` ending exactly at ``T``; the last step may be shorter."""
    n = max(1, math.ceil(T / h - 1e-9))
    t = np.arange(n + 1) * h
    t[-1] = T
    return t


class _ImplicitSystem:
    """``(D + hL) f' = D f + h W_IB f_B`` on the interior, the symmetric form of ``f' − hΔf' = f``."""

    def __init__(self, G: WeightedGraph, interior: np.ndarray, h: float):
        self.interior = interior
        self.h = h
        d = G.degree
        W = G.adjacency
        self.d_int = d[interior]
        W_ii = W[interior][:, interior]
        self.A = (sp.diags(self.d_int * (1.0 + h)) - h * W_ii).tocsr()
        self.W_ib = W[interior]  # rows of interior, all columns; interior columns zeroed below
        mask = np.ones(G.n, dtype=bool)
        mask[interior] = False
        self.W_ib = (self.W_ib @ sp.diags(mask.astype(float))).tocsr()
        diag = self.A.diagonal()
        self.precond = spla.LinearOperator(self.A.shape, matvec=lambda r: r / diag)

    def solve(self, f: np.ndarray, tol: float = LINEAR_TOL) -> np.ndarray:
        fi = f[self.interior]
        b = self.d_int * fi + self.h * (self.W_ib @ f)
        x = fi.copy()
        atol = 0.1 * tol * float(np.min(self.d_int))
        for _ in range(5):
            x, info = spla.cg(self.A, b, x0=x, rtol=0.0, atol=atol, M=self.precond,
                              maxiter=10 * len(b) + 100)
            residual = np.max(np.abs((self.A @ x - b) / self.d_int)) if len(b) else 0.0
            if residual <= tol:
                return x
        raise LinearSolveFailure(f"implicit heat solve stalled at residual {residual:.3e}")


def _step_array(G, f, interior, h, scheme, system=None):
    out = f.copy()
    if len(interior) == 0:
        return out
    if scheme is Scheme.EXPLICIT:
        out[interior] = f[interior] + h * laplacian(G, f)[interior]
    else:
        system = system or _ImplicitSystem(G, interior, h)
        out[interior] = system.solve(f)
    return out


def heat_step(G: WeightedGraph, dom: Domain, f, h: float, scheme: Scheme | str = Scheme.IMPLICIT):
    """Advance ``f`` by one time step; boundary values are copied unchanged.

    ``f`` may be a VertexFunction covering the closure (returned as one) or a
    graph-indexed array.
    """
    scheme = Scheme(scheme)
    if not h > 0:
        raise ValueError("step h must be positive")
    if scheme is Scheme.EXPLICIT and h > 1:
        raise StabilityViolation(f"explicit scheme needs h <= 1, got {h}")
    interior = np.flatnonzero(dom.interior_mask(G))
    if isinstance(f, Mapping):
        arr = dom.lift(G, f)
        out = _step_array(G, arr, interior, h, scheme)
        return VertexFunction.from_array(G, out, sorted(dom.closure))
    return _step_array(G, np.asarray(f, dtype=float), interior, h, scheme)


def solve_heat(G: WeightedGraph, cfg: HeatConfig) -> Trajectory:
    """Time-step to ``cfg.T``, recording every ``record_every`` steps and the final state."""
    dom = cfg.domain
    interior = np.flatnonzero(dom.interior_mask(G))
    closure = sorted(dom.closure)
    cidx = np.array([G.index_of(v) for v in closure], dtype=np.intp)
    f = dom.lift(G, cfg.initial)

    grid = time_grid(cfg.h, cfg.T)
    systems = {}
    times, rows = [0.0], [f[cidx].copy()]
    for n in range(1, len(grid)):
        h = grid[n] - grid[n - 1]
        system = None
        if cfg.scheme is Scheme.IMPLICIT and len(interior):
            key = round(h, 15)
            if key not in systems:
                systems[key] = _ImplicitSystem(G, interior, h)
            system = systems[key]
        f = _step_array(G, f, interior, h, cfg.scheme, system)
        if n % cfg.record_every == 0 or n == len(grid) - 1:
            times.append(float(grid[n]))
            rows.append(f[cidx].copy())
    return Trajectory(
        graph=G,
        domain=dom,
        times=np.array(times),
        vertices=tuple(closure),
        values=np.array(rows),
        meta={"scheme": cfg.scheme.value, "h": cfg.h, "T": cfg.T, "equation": "heat"},
    )


def _worst_location(traj: Trajectory, arr: np.ndarray) -> dict:
    i, j = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return {"time": float(traj.times[i]), "vertex": traj.vertices[j]}


def max_principle_check(traj: Trajectory, tol: float = 1e-10) -> VerificationReport:
    """``sup|u(t,·)| ≤ sup|u_0|`` at every recorded time."""
    sup0 = float(np.max(np.abs(traj.values[0])))
    excess = np.abs(traj.values) - sup0
    worst = float(np.max(excess))
    return VerificationReport(
        check="max_principle",
        passed=worst <= tol,
        worst=worst,
        tolerance=tol,
        location=_worst_location(traj, excess),
        details={"sup_initial": sup0},
    )


def _monitored(traj: Trajectory) -> np.ndarray:
    """Closure positions of vertices whose whole 1-ball lies in the closure."""
    inner = traj.domain.interior
    return np.array([j for j, v in enumerate(traj.vertices) if v in inner], dtype=np.intp)


def bernstein_monitor(traj: Trajectory, alpha: float = 1.0, tol: float = 1e-8) -> VerificationReport:
    """Track ``Q(t) = sup_x [t|∇f|²(t,x) + αf(t,x)²]`` against ``α sup f_0²``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    G = traj.graph
    states = traj.full_states()
    grads = grad_norm_sq(G, states)[traj.closure_index].T  # (times, closure)
    q_all = traj.times[:, None] * grads + alpha * traj.values**2
    pos = _monitored(traj)
    q_mon = q_all[:, pos]
    Q = q_mon.max(axis=1) if len(pos) else np.zeros(len(traj.times))
    bound = alpha * float(np.max(traj.values[0] ** 2))
    excess = Q - bound
    i = int(np.argmax(excess))
    worst_vertex = traj.vertices[pos[int(np.argmax(q_mon[i]))]] if len(pos) else None
    return VerificationReport(
        check="bernstein",
        passed=bool(np.all(Q <= bound + tol)),
        worst=float(excess[i]),
        tolerance=tol,
        location={"time": float(traj.times[i]), "vertex": worst_vertex},
        details={"alpha": alpha, "bound": bound, "times": traj.times, "Q": Q},
    )


def bernstein_closed_form_k2(t, alpha: float = 1.0):
    """``Q(t)`` for the unit-weight two-vertex graph started from ``(0, 2)``.

    There ``f = 1 ∓ e^{−2t}`` and ``|∇f|² = 4e^{−4t}`` at both vertices.
    """
    t = np.asarray(t, dtype=float)
    return 4.0 * t * np.exp(-4.0 * t) + alpha * (1.0 + np.exp(-2.0 * t)) ** 2


def oscillation_check(traj: Trajectory, tol: float = 1e-12) -> VerificationReport:
    """``max − min`` over the closure never increases between recorded times."""
    osc = traj.values.max(axis=1) - traj.values.min(axis=1)
    jumps = np.diff(osc) if len(osc) > 1 else np.zeros(1)
    i = int(np.argmax(jumps))
    worst = float(jumps[i])
    return VerificationReport(
        check="oscillation_monotone",
        passed=worst <= tol,
        worst=worst,
        tolerance=tol,
        location={"time": float(traj.times[min(i + 1, len(traj.times) - 1)])},
        details={"oscillation_initial": float(osc[0]), "oscillation_final": float(osc[-1])},
    )


def mass_check(traj: Trajectory, tol: float = 1e-10) -> VerificationReport:
    """Drift of ``Σ d_x f(t,x)`` over the closure from its initial value."""
    d = traj.graph.degree[traj.closure_index]
    mass = traj.values @ d
    drift = np.abs(mass - mass[0])
    i = int(np.argmax(drift))
    return VerificationReport(
        check="mass_conservation",
        passed=float(drift[i]) <= tol,
        worst=float(drift[i]),
        tolerance=tol,
        location={"time": float(traj.times[i])},
        details={"initial_mass": float(mass[0]), "final_mass": float(mass[-1])},
    )


def convergence_detect(traj: Trajectory, eps: float) -> float | None:
    """Weighted mean of the final state if its oscillation is below ``eps``, else ``None``."""
    if not traj.domain.is_closed:
        raise ValueError("convergence to a constant is only meaningful on a closed graph")
    final = traj.values[-1]
    if final.max() - final.min() >= eps:
        return None
    d = traj.graph.degree[traj.closure_index]
    return float(final @ d / d.sum())
