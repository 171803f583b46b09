"""Independent cross-checks: brute-force grid search and derivative probes.

The grid oracle handles the two-slot direct-transmission programs, where
the nonlinear structure allows eliminating everything except (t1, t2):
for fixed times it is optimal to spend every energy budget fully, walking
the budgets in transmission order.  The result lower-bounds the true
optimum and converges to it as the step shrinks, giving a solver check
that shares no code path with the Newton iterations.

The finite-difference probe compares the analytic perspective derivatives
and the assembled barrier derivatives against central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import barrier_gradient, barrier_hessian, barrier_value
from .program import LN2, Allocation, ConvexProgram


@dataclass(frozen=True)
class GridSpec:
    step: float = 1e-3        # resolution of each time variable
    max_points: float = 1e8   # refuse grids larger than this

    def __post_init__(self):
        if not 0 < self.step < 1:
            raise ValueError("step must lie in (0, 1)")
        if self.max_points < 1:
            raise ValueError("max_points must be positive")


@dataclass
class GridResult:
    best: Allocation
    objective_bits: float
    points_scanned: int


def brute_force_grid(p: ConvexProgram, grid: GridSpec | None = None) -> GridResult:
    """Exhaustive scan over the time grid with energies at their budgets.

    Supports programs with exactly two time variables whose linear rows
    give each energy an explicit budget.  Raises ValueError for the
    relay-scenario programs (three slots, coupled budgets), where the
    elimination argument does not produce a two-dimensional search.
    """
    grid = grid or GridSpec()
    if len(p.t_indices) != 2:
        raise ValueError("grid oracle supports two-slot programs only")
    axis = np.arange(grid.step, 1.0, grid.step)
    if axis.size**2 > grid.max_points:
        raise ValueError(
            f"grid of {axis.size**2:.3g} points exceeds the {grid.max_points:.3g} cap"
        )

    i1, i2 = p.t_indices
    T1, T2 = np.meshgrid(axis, axis, indexing="ij")
    feasible = T1 + T2 <= 1.0 + 1e-12
    times = {i1: T1, i2: T2}

    # energies at their sequential budget maxima
    energies: dict[int, np.ndarray] = {}
    for yi in p.y_indices:
        bound = None
        for a, b in zip(p.lin_A, p.lin_b):
            if a[yi] <= 0.0:
                continue
            slack = np.full(T1.shape, b)
            for ti, T in times.items():
                if a[ti]:
                    slack = slack - a[ti] * T
            for yj, Y in energies.items():
                if a[yj]:
                    slack = slack - a[yj] * Y
            cand = slack / a[yi]
            bound = cand if bound is None else np.minimum(bound, cand)
        if bound is None:
            raise ValueError(f"energy {p.var_names[yi]} has no budget row")
        energies[yi] = np.clip(bound, 0.0, None)

    def rate(term) -> np.ndarray:
        T = times[term.t_index]
        Y = energies[term.y_index]
        return term.coeff * T * np.log1p(term.gamma * Y / T)

    if p.epigraph:
        # max-min objective: the shared rate is the smallest epigraph bound
        value = None
        for con in p.epigraph:
            branch = sum(rate(tm) for tm in con.terms)
            value = branch if value is None else np.minimum(value, branch)
    else:
        value = sum(rate(tm) for tm in p.objective_terms)

    value = np.where(feasible, value, -np.inf)
    flat = int(np.argmax(value))
    r, c = divmod(flat, axis.size)
    best_nats = float(value[r, c])

    x = np.zeros(p.n_vars)
    x[i1], x[i2] = axis[r], axis[c]
    for yi in p.y_indices:
        x[yi] = float(energies[yi][r, c])
    for con in p.epigraph:
        branch = -sum(
            tm.coeff * (-x[tm.t_index] * math.log1p(tm.gamma * x[tm.y_index] / x[tm.t_index]))
            if x[tm.t_index] > 0 else 0.0
            for tm in con.terms
        )
        x[con.aux_index] = min(x[con.aux_index], branch) if x[con.aux_index] else branch
    return GridResult(
        best=Allocation(x=x),
        objective_bits=best_nats / LN2,
        points_scanned=int(feasible.sum()),
    )


# ---------------------------------------------------------------------------
# Finite-difference probes
# ---------------------------------------------------------------------------


def _central_gradient(fn, x, h):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def _central_hessian(fn, x, h):
    n = x.size
    H = np.zeros((n, n))
    f0 = fn(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = H[j, i] = (
                fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)
            ) / (4.0 * h * h)
    return H


def _rel(err: float, scale: float) -> float:
    return err / max(1.0, scale)


def finite_diff_check(program, x: np.ndarray, grad_step: float = 1e-6,
                      hess_step: float = 1e-5, tau: float | None = None) -> dict:
    """Norm-relative error of analytic first and second derivatives at x.

    Checks the objective and every nonlinear constraint; with `tau` given,
    also the assembled barrier gradient and Hessian.  Returns a dict with
    `gradient` and `hessian` worst-case relative errors.
    """
    x = np.asarray(x, dtype=float)
    pairs = [(program.objective_value, program.objective_gradient, program.objective_hessian)]
    for j in range(program.n_nonlinear):
        pairs.append((
            lambda z, j=j: program.nonlinear_value(j, z),
            lambda z, j=j: program.nonlinear_gradient(j, z),
            lambda z, j=j: program.nonlinear_hessian(j, z),
        ))
    if tau is not None:
        pairs.append((
            lambda z: barrier_value(program, tau, z),
            lambda z: barrier_gradient(program, tau, z),
            lambda z: barrier_hessian(program, tau, z),
        ))

    worst_g = 0.0
    worst_h = 0.0
    for value, gradient, hessian in pairs:
        g = gradient(x)
        g_fd = _central_gradient(value, x, grad_step)
        worst_g = max(worst_g, _rel(float(np.linalg.norm(g_fd - g)), float(np.linalg.norm(g))))
        H = hessian(x)
        H_fd = _central_hessian(value, x, hess_step)
        worst_h = max(worst_h, _rel(float(np.linalg.norm(H_fd - H)), float(np.linalg.norm(H))))
    return {"gradient": worst_g, "hessian": worst_h}
