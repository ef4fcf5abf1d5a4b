"""Porous-media flow ``u_t = Δ log u`` by minimizing movements.

With ``f = ½ log u`` each time step minimizes

    I_n(f) = (1/2h) Σ_{x∈Ω} d_x (e^{f(x)} − e^{f_{n−1}(x)})² + D(f),
    D(f)   = ¼ Σ_{x,y ∈ closure, x~y} μ_xy (f(y) − f(x))²,

over functions agreeing with the Dirichlet data on ∂Ω. Stationarity is
``(1/h)(e^f − e^{f_{n−1}}) e^f = Δf`` on Ω. The minimizer is found by damped
Newton with a backtracking line search on ``I_n``.
"""
from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    BoundaryMismatch,
    GraphHeatDataError,
    GridMismatch,
    MissingValue,
    NewtonDivergence,
    PositivityLoss,
    ToleranceFailure,
    WindowEmpty,
)
from .graph import Domain, VertexFunction, WeightedGraph, ball
from .heat import time_grid
from .operators import dirichlet_energy, laplacian
from .trajectory import PMETrajectory, StepDiagnostics, VerificationReport

__all__ = [
    "MorseFlowConfig",
    "morse_energy",
    "morse_step",
    "pme_solve",
    "ode_reference",
    "comparison_check",
    "aronson_benilan_check",
    "exhaustion_solve",
    "exhaustion_runs",
    "exhaustion_report",
    "energy_chain_check",
    "positivity_check",
]

ENERGY_SLACK = 1e-10
_DENSE_LIMIT = 400


@dataclass(frozen=True)
class MorseFlowConfig:
    domain: Domain
    u0: VertexFunction
    h: float = 1e-2
    T: float = 1.0
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    record_every: int = 1

    def __post_init__(self):
        if not (self.h > 0 and self.T > 0):
            raise ValueError("h and T must be positive")
        if self.h > self.T:
            raise ValueError("step h exceeds horizon T")
        if self.newton_tol <= 0 or self.max_newton_iters < 1 or self.record_every < 1:
            raise ValueError("invalid solver tolerances")
        for v in self.domain.closure:
            if v not in self.u0:
                raise MissingValue(f"initial data missing at closure vertex {v!r}")
            if not self.u0[v] > 0:
                raise GraphHeatDataError(f"initial data must be positive, got {self.u0[v]} at {v!r}")


class _MorseProblem:
    """Cached index sets and matrices for one (graph, domain, h)."""

    def __init__(self, G: WeightedGraph, dom: Domain, h: float):
        self.G = G
        self.h = h
        self.interior = np.flatnonzero(dom.interior_mask(G))
        self.boundary = np.array(sorted(G.index_of(v) for v in dom.boundary), dtype=np.intp)
        self.closure_mask = dom.closure_mask(G)
        self.d_int = G.degree[self.interior]
        W_ii = G.adjacency[self.interior][:, self.interior]
        self.L_ii = (sp.diags(self.d_int) - W_ii).tocsr()
        self.dense = len(self.interior) <= _DENSE_LIMIT
        if self.dense:
            self.L_dense = self.L_ii.toarray()

    def check_trace(self, f: np.ndarray, f_prev: np.ndarray):
        b = self.boundary
        if len(b) and not np.allclose(f[b], f_prev[b], rtol=0.0, atol=1e-14):
            raise BoundaryMismatch("candidate does not carry the Dirichlet data on the boundary")

    def jump(self, f: np.ndarray, f_prev: np.ndarray) -> np.ndarray:
        """``e^f − e^{f_prev}`` on the interior, without cancellation."""
        i = self.interior
        return np.exp(f_prev[i]) * np.expm1(f[i] - f_prev[i])

    def kinetic(self, f, f_prev) -> float:
        j = self.jump(f, f_prev)
        return float(np.sum(self.d_int * j * j)) / (2.0 * self.h)

    def dirichlet(self, f) -> float:
        return dirichlet_energy(self.G, f, self.closure_mask)

    def energy(self, f, f_prev) -> float:
        return self.kinetic(f, f_prev) + self.dirichlet(f)

    def el_residual(self, f, f_prev) -> np.ndarray:
        i = self.interior
        return self.jump(f, f_prev) * np.exp(f[i]) / self.h - laplacian(self.G, f)[i]

    def newton_direction(self, f, f_prev, grad) -> np.ndarray:
        i = self.interior
        ef, ep = np.exp(f[i]), np.exp(f_prev[i])
        # curvature of the kinetic term, floored so the model Hessian stays definite
        curv = ef * np.maximum(2.0 * ef - ep, 0.5 * ef) / self.h
        diag = self.d_int * curv
        if self.dense:
            H = self.L_dense + np.diag(diag)
            return -scipy.linalg.solve(H, grad, assume_a="pos")
        H = (self.L_ii + sp.diags(diag)).tocsc()
        return -spla.spsolve(H, grad)

    def diag_direction(self, f, f_prev, grad) -> np.ndarray:
        i = self.interior
        ef = np.exp(f[i])
        return -grad / (self.d_int * (ef * ef / self.h + 1.0))


def _armijo(problem, f, f_prev, energy, grad, direction, c1=1e-4, min_step=1e-12):
    slope = float(grad @ direction)
    if slope >= 0:
        return None
    slack = 16 * np.finfo(float).eps * max(abs(energy), 1.0)
    step = 1.0
    i = problem.interior
    while step >= min_step:
        trial = f.copy()
        trial[i] += step * direction
        e = problem.energy(trial, f_prev)
        if math.isfinite(e) and e <= energy + c1 * step * slope + slack:
            return trial, e
        step *= 0.5
    return None


def _minimize(problem: _MorseProblem, f_prev: np.ndarray, tol: float, max_iters: int):
    """Return ``(f_n, iterations, sup-norm EL residual)``."""
    f = f_prev.copy()
    if len(problem.interior) == 0:
        return f, 0, 0.0
    energy = problem.energy(f, f_prev)
    for it in range(max_iters + 1):
        res = problem.el_residual(f, f_prev)
        res_norm = float(np.max(np.abs(res)))
        if res_norm <= tol:
            return f, it, res_norm
        if it == max_iters:
            break
        grad = problem.d_int * res
        accepted = _armijo(problem, f, f_prev, energy, grad, problem.newton_direction(f, f_prev, grad))
        if accepted is None:
            accepted = _armijo(problem, f, f_prev, energy, grad, problem.diag_direction(f, f_prev, grad))
        if accepted is None:
            break
        f, energy = accepted
    raise NewtonDivergence(
        f"minimizing step failed after {it} iterations, EL residual {res_norm:.3e} > {tol:.1e}"
    )


def _lift_log(G, dom, u) -> np.ndarray:
    arr = dom.lift(G, u)
    mask = dom.closure_mask(G)
    f = np.zeros(G.n)
    f[mask] = 0.5 * np.log(arr[mask])
    return f


def morse_energy(G: WeightedGraph, dom: Domain, f, f_prev, h: float) -> float:
    """``I_n(f)`` for the step from ``f_prev`` with size ``h``."""
    problem = _MorseProblem(G, dom, h)
    f_arr = dom.lift(G, f) if isinstance(f, Mapping) else np.asarray(f, dtype=float)
    p_arr = dom.lift(G, f_prev) if isinstance(f_prev, Mapping) else np.asarray(f_prev, dtype=float)
    problem.check_trace(f_arr, p_arr)
    return problem.energy(f_arr, p_arr)


def morse_step(G: WeightedGraph, dom: Domain, f_prev, h: float, newton_tol: float = 1e-10,
               max_newton_iters: int = 50):
    """Minimize ``I_n`` starting from ``f_prev`` (which is feasible).

    Accepts a VertexFunction on the closure (returning one) or a graph-indexed
    array. Raises :class:`NewtonDivergence` if the Euler-Lagrange residual
    cannot be brought below ``newton_tol``.
    """
    problem = _MorseProblem(G, dom, h)
    if isinstance(f_prev, Mapping):
        arr = dom.lift(G, f_prev)
        f, _, _ = _minimize(problem, arr, newton_tol, max_newton_iters)
        return VertexFunction.from_array(G, f, sorted(dom.closure))
    f, _, _ = _minimize(problem, np.asarray(f_prev, dtype=float), newton_tol, max_newton_iters)
    return f


def pme_solve(G: WeightedGraph, cfg: MorseFlowConfig) -> PMETrajectory:
    """Run the minimizing-movement scheme to ``cfg.T`` and return ``u = e^{2f}``."""
    dom = cfg.domain
    closure = sorted(dom.closure)
    cidx = np.array([G.index_of(v) for v in closure], dtype=np.intp)
    f = _lift_log(G, dom, cfg.u0)
    grid = time_grid(cfg.h, cfg.T)
    problems = {}
    times, rows, diags = [0.0], [np.exp(2.0 * f[cidx])], []
    for n in range(1, len(grid)):
        h = float(grid[n] - grid[n - 1])
        key = round(h, 15)
        problem = problems.get(key)
        if problem is None:
            problem = problems[key] = _MorseProblem(G, dom, h)
        f_new, iters, res = _minimize(problem, f, cfg.newton_tol, cfg.max_newton_iters)
        kinetic = problem.kinetic(f_new, f)
        e_prev, e_new = problem.dirichlet(f), problem.dirichlet(f_new)
        diags.append(StepDiagnostics(
            newton_iters=iters,
            el_residual=res,
            kinetic=kinetic,
            energy_prev=e_prev,
            energy=e_new,
            energy_bound_ok=kinetic + e_new <= e_prev + ENERGY_SLACK,
            dirichlet_monotone=e_new <= e_prev + ENERGY_SLACK,
        ))
        f = f_new
        if n % cfg.record_every == 0 or n == len(grid) - 1:
            times.append(float(grid[n]))
            rows.append(np.exp(2.0 * f[cidx]))
    return PMETrajectory(
        graph=G,
        domain=dom,
        times=np.array(times),
        vertices=tuple(closure),
        values=np.array(rows),
        meta={"equation": "pme", "method": "minimizing_movement", "h": cfg.h, "T": cfg.T,
              "newton_tol": cfg.newton_tol},
        diagnostics=tuple(diags),
    )


def ode_reference(G: WeightedGraph, u0, T: float, tol: float = 1e-10,
                  times: Sequence[float] | None = None, domain: Domain | None = None) -> PMETrajectory:
    """High-order adaptive integration of ``u_t = Δ log u`` as an ODE system.

    Uses DOP853 with ``rtol = atol = tol``. A step whose stages leave the
    positive orthant gets a NaN error estimate and is rejected by the
    integrator's step-size control.
    """
    dom = domain or Domain.of(G, G.vertices)
    closure = sorted(dom.closure)
    cidx = np.array([G.index_of(v) for v in closure], dtype=np.intp)
    interior = np.flatnonzero(dom.interior_mask(G))
    u_full = dom.lift(G, u0)
    if np.any(u_full[cidx] <= 0):
        raise ValueError("initial data must be positive")
    log_full = np.zeros(G.n)

    def rhs(_t, y):
        if np.any(y <= 0):
            return np.full_like(y, np.nan)
        log_full[interior] = np.log(y)
        return laplacian(G, log_full)[interior]

    log_full[cidx] = np.log(u_full[cidx])
    t_eval = np.linspace(0.0, T, 101) if times is None else np.asarray(times, dtype=float)
    sol = solve_ivp(rhs, (0.0, T), u_full[interior], method="DOP853", rtol=tol, atol=tol,
                    t_eval=t_eval)
    if not sol.success:
        raise ToleranceFailure(f"reference integration failed: {sol.message}")
    if np.any(~np.isfinite(sol.y)) or np.any(sol.y <= 0):
        raise PositivityLoss("reference solution left the positive orthant")
    values = np.tile(u_full[cidx], (len(sol.t), 1))
    pos = {int(g): k for k, g in enumerate(cidx)}
    values[:, [pos[int(i)] for i in interior]] = sol.y.T
    return PMETrajectory(
        graph=G,
        domain=dom,
        times=sol.t,
        vertices=tuple(closure),
        values=values,
        meta={"equation": "pme", "method": "DOP853", "tol": tol, "T": T},
    )


# -- checks ----------------------------------------------------------------------


def _same_grid(a, b) -> bool:
    return (a.graph == b.graph and a.vertices == b.vertices and a.times.shape == b.times.shape
            and np.allclose(a.times, b.times, rtol=1e-12, atol=1e-14))


def comparison_check(traj_u, traj_v, tol: float = 1e-8) -> VerificationReport:
    """Check ``u ≤ v`` at every recorded point; ``worst`` is the smallest ``v − u``."""
    if not _same_grid(traj_u, traj_v):
        raise GridMismatch("trajectories live on different graphs, vertex sets or time grids")
    margin = traj_v.values - traj_u.values
    i, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
    worst = float(margin[i, j])
    return VerificationReport(
        check="comparison",
        passed=worst >= -tol,
        worst=worst,
        tolerance=tol,
        location={"time": float(traj_u.times[i]), "vertex": traj_u.vertices[j]},
    )


def energy_chain_check(traj: PMETrajectory, slack: float = ENERGY_SLACK) -> VerificationReport:
    """Kinetic-plus-Dirichlet bound and Dirichlet monotonicity at every step."""
    if not traj.diagnostics:
        return VerificationReport("energy_chain", True, 0.0, slack, details={"steps": 0})
    excess = np.array([d.kinetic + d.energy - d.energy_prev for d in traj.diagnostics])
    k = int(np.argmax(excess))
    ok = all(d.energy_bound_ok and d.dirichlet_monotone for d in traj.diagnostics)
    return VerificationReport(
        check="energy_chain",
        passed=ok,
        worst=float(excess[k]),
        tolerance=slack,
        location={"step": k + 1},
        details={
            "steps": len(traj.diagnostics),
            "dirichlet_initial": traj.diagnostics[0].energy_prev,
            "dirichlet_final": traj.diagnostics[-1].energy,
            "max_el_residual": max(d.el_residual for d in traj.diagnostics),
            "max_newton_iters": max(d.newton_iters for d in traj.diagnostics),
        },
    )


def positivity_check(traj) -> VerificationReport:
    low = float(np.min(traj.values))
    return VerificationReport("positivity", bool(low > 0), low, 0.0)


def _rescaled(cfg: MorseFlowConfig, lam: float) -> MorseFlowConfig:
    return replace(cfg, h=cfg.h / lam, T=cfg.T / lam)


def aronson_benilan_check(G: WeightedGraph, cfg: MorseFlowConfig, lambdas: Sequence[float],
                          tol: float = 1e-6, base: PMETrajectory | None = None) -> VerificationReport:
    """Compare ``u`` with its rescalings ``w_λ(t, x) = λ u(t/λ, x)``.

    ``w_λ`` is λ times a run from ``u_0`` to ``T/λ`` with step ``h/λ``, so its
    nodes land on those of ``u``. It solves the same equation with data
    ``λ u_0``, hence the comparison principle predicts ``w_λ ≥ u``.
    """
    lambdas = [float(x) for x in lambdas]
    if any(not lam > 1 for lam in lambdas):
        raise ValueError("every lambda must exceed 1")
    u = base if base is not None else pme_solve(G, cfg)

    rows, ws = [], {}
    for lam in lambdas:
        run = pme_solve(G, _rescaled(cfg, lam))
        if run.values.shape != u.values.shape:
            raise GridMismatch(f"rescaled grid for lambda={lam} does not match the base run")
        w = lam * run.values
        ws[lam] = w
        margin = w - u.values
        i, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
        rows.append({
            "lambda": lam,
            "passed": bool(margin[i, j] >= -tol),
            "worst_margin": float(margin[i, j]),
            "location": {"time": float(u.times[i]), "vertex": u.vertices[j]},
            "energy_chain_ok": energy_chain_check(run).passed,
        })

    ordered = sorted(lambdas)
    margins = [next(r["worst_margin"] for r in rows if r["lambda"] == lam) for lam in ordered]
    margins_increasing = all(b >= a for a, b in zip(margins, margins[1:]))
    w_monotone = all(np.all(ws[b] >= ws[a] - tol) for a, b in zip(ordered, ordered[1:]))

    growth = u.values / (1.0 + u.times[:, None])
    fitted_C = float(np.max(growth))
    dt = np.diff(u.times)
    ut = np.diff(u.values, axis=0) / dt[:, None]
    ratio = u.times[1:, None] * ut / u.values[1:]
    worst = min(r["worst_margin"] for r in rows) if rows else 0.0
    return VerificationReport(
        check="aronson_benilan",
        passed=all(r["passed"] for r in rows),
        worst=worst,
        tolerance=tol,
        details={
            "lambdas": rows,
            "margins_increasing_in_lambda": margins_increasing,
            "w_monotone_in_lambda": bool(w_monotone),
            "fitted_C": fitted_C,
            "sup_t_ut_over_u": float(np.max(ratio)) if ratio.size else 0.0,
            "base_energy_chain_ok": energy_chain_check(u).passed,
        },
    )


def exhaustion_runs(G: WeightedGraph, x0: str, radii: Sequence[int], u0, *, h: float, T: float,
                    newton_tol: float = 1e-10, max_newton_iters: int = 50,
                    record_every: int = 1) -> list[PMETrajectory]:
    """Solve on each ball ``B_R(x0)`` with Dirichlet data taken from ``u0``."""
    radii = [int(r) for r in radii]
    if not radii:
        raise ValueError("need at least one radius")
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be non-decreasing")
    if radii[0] < 2:
        raise WindowEmpty(f"window ball of radius {radii[0] - 1} is too small; need R_1 >= 2")
    u0 = VertexFunction(u0)
    runs = []
    for R in radii:
        dom = ball(G, x0, R)
        cfg = MorseFlowConfig(dom, u0.restrict(sorted(dom.closure)), h=h, T=T,
                              newton_tol=newton_tol, max_newton_iters=max_newton_iters,
                              record_every=record_every)
        runs.append(pme_solve(G, cfg))
    return runs


def exhaustion_report(G: WeightedGraph, x0: str, radii: Sequence[int],
                      runs: Sequence[PMETrajectory]) -> VerificationReport:
    """``D_j = sup |u_j − u_last|`` over ``B_{R_1 − 1}(x0) × [0, T]``; pass iff non-increasing."""
    radii = [int(r) for r in radii]
    window = sorted(ball(G, x0, radii[0] - 1).interior)

    def window_values(run):
        return run.values[:, [run.vertices.index(v) for v in window]]

    last = window_values(runs[-1])
    D = [float(np.max(np.abs(window_values(r) - last))) for r in runs]
    non_increasing = all(b <= a + 1e-12 for a, b in zip(D, D[1:]))
    return VerificationReport(
        check="exhaustion",
        passed=non_increasing,
        worst=max(D[:-1]) if len(D) > 1 else 0.0,
        tolerance=0.0,
        details={
            "window": window,
            "radii": [
                {"radius": R, "discrepancy": d, "energy_chain_ok": energy_chain_check(r).passed,
                 "sup_u": float(np.max(r.values))}
                for R, d, r in zip(radii, D, runs)
            ],
            "discrepancies": D,
        },
    )


def exhaustion_solve(G: WeightedGraph, x0: str, radii: Sequence[int], u0, *, h: float, T: float,
                     newton_tol: float = 1e-10, max_newton_iters: int = 50,
                     record_every: int = 1) -> VerificationReport:
    """Solve on the growing balls around ``x0`` and report stabilization on a fixed window."""
    runs = exhaustion_runs(G, x0, radii, u0, h=h, T=T, newton_tol=newton_tol,
                           max_newton_iters=max_newton_iters, record_every=record_every)
    return exhaustion_report(G, x0, radii, runs)
