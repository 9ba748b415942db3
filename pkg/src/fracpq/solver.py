"""Convex energy minimization for the fractional (p,q)-Laplacian.

The Dirichlet problem is solved by minimizing

    E(u) = (1/p) A_p(u,u) + (1/q) A_q(u,u) - sum_i h f_i u_i

over the interior nodal values, with exterior values held fixed.  The
gradient of E with respect to the interior values is exactly the collocation
residual of :func:`fracpq.operators.residual`, so the stopping rule
``residual_sup <= tol`` is a statement about the discrete equation itself.

The minimizer is L-BFGS with a backtracking (Armijo) line search; every
accepted step strictly decreases the energy.  For p = q = 2 the energy is
quadratic and the line search uses the exact minimizing step.

Singular right-hand sides K(x) u^(-delta) are handled by the regularized
weight K_eps together with (u + eps)^(-delta), a frozen-source fixed-point
loop started from the small-constant-source solution, and a decreasing
epsilon schedule whose iterates increase monotonically toward the minimal
solution.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .geometry import Grid, GridFunction
from . import operators as ops
from .operators import OperatorParams

__all__ = [
    "SingularParams",
    "RegularizedWeight",
    "SolveReport",
    "energy",
    "solve_dirichlet",
    "solve_constant_rhs",
    "regularized_weight",
    "solve_singular_eps",
    "solve_singular_limit",
]

PURE_DISTANCE = "pure_distance"
SCALED = "scaled"

_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 60
_DEFAULT_MAX_ITER = 4000
_DEFAULT_MEMORY = 16
_BLOCK_ROWS = 256
_STALL_WINDOW = 30


@dataclass(frozen=True)
class SingularParams:
    """Singular weight K_gamma(x) = c d(x)^(-gamma) and exponent delta.

    c1 and c2 are the lower/upper constants bounding the weight by the
    distance power; only exact power weights are representable, so they
    coincide (both 1 for ``pure_distance``).  c1 = c2 = 0 expresses the
    degenerate identically-zero weight.
    """

    gamma: float
    delta: float
    weight_kind: str = PURE_DISTANCE
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"singular weight exponent gamma must be >= 0, got {self.gamma}")
        if self.delta <= 0.0:
            raise ValueError(f"singular exponent delta must be positive, got {self.delta}")
        if self.weight_kind not in (PURE_DISTANCE, SCALED):
            raise ValueError(f"unknown weight kind {self.weight_kind!r}")
        if self.weight_kind == PURE_DISTANCE and not (self.c1 == self.c2 == 1.0):
            raise ValueError("pure_distance weight requires c1 = c2 = 1")
        if not (0.0 <= self.c1 <= self.c2):
            raise ValueError("weight bounds must satisfy 0 <= c1 <= c2")
        if self.c1 != self.c2:
            raise ValueError("only exact power weights are representable: c1 must equal c2")

    @property
    def scale(self) -> float:
        return self.c1

    def validate_against(self, params: OperatorParams) -> None:
        if not (self.gamma < params.p * params.s1):
            raise ValueError(
                f"gamma must lie in [0, p*s1) = [0, {params.p * params.s1}), got {self.gamma}"
            )

    def alpha_gd(self, params: OperatorParams) -> float:
        """Regularization exponent (p s1 - gamma)/(p - 1 + delta)."""
        return (params.p * params.s1 - self.gamma) / (params.p - 1.0 + self.delta)

    def strongly_singular(self, params: OperatorParams) -> bool:
        """True when gamma - s1 (1 - delta) > 0, the regime in which the
        boundary growth degrades to the exponent ``alpha_gd``."""
        return self.gamma - params.s1 * (1.0 - self.delta) > 0.0


@dataclass(frozen=True)
class RegularizedWeight:
    """Nodal values of K_{gamma,eps} = (K_gamma^(-1/gamma) + eps^(1/alpha))^(-gamma)."""

    base: SingularParams
    eps: float
    alpha_gd: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError(f"regularization eps must be positive, got {self.eps}")
        if not (self.alpha_gd > 0.0):
            raise ValueError(f"regularization exponent must be positive, got {self.alpha_gd}")


def regularized_weight(grid: Grid, sp: SingularParams, eps: float,
                       params: OperatorParams) -> RegularizedWeight:
    """Build the epsilon-regularized singular weight on the grid nodes.

    For K = c d^(-gamma) with gamma > 0 the construction
    (K^(-1/gamma) + eps^(1/alpha))^(-gamma) collapses to
    (c^(-1/gamma) d + eps^(1/alpha))^(-gamma), which is finite up to the
    boundary.  For gamma = 0 the defining display is ill-posed (exponent
    -1/gamma) and the weight is returned unchanged.
    """
    if eps <= 0.0:
        raise ValueError(f"regularization eps must be positive, got {eps}")
    sp.validate_against(params)
    from .geometry import distance

    alpha = sp.alpha_gd(params)
    d = distance(grid, grid.nodes)
    c = sp.scale
    if sp.gamma == 0.0 or c == 0.0:
        values = np.full(grid.size, c)
    else:
        shifted = c ** (-1.0 / sp.gamma) * d + eps ** (1.0 / alpha)
        values = shifted ** (-sp.gamma)
    return RegularizedWeight(base=sp, eps=float(eps), alpha_gd=alpha, values=values)


@dataclass
class SolveReport:
    iterations: int
    final_energy: float
    residual_sup: float
    converged: bool
    wall_time: float
    meta: dict = field(default_factory=dict)


def energy(u: GridFunction, f, params: OperatorParams) -> float:
    """Discrete Dirichlet energy (1/p) A_p(u,u) + (1/q) A_q(u,u) - sum h f u.

    Requires u to vanish at all non-interior nodes (the minimization space).
    Its gradient with respect to the interior values is the collocation
    residual vector.
    """
    if not u.is_interior_supported():
        raise ValueError("energy is defined on functions vanishing outside the domain")
    grid = u.grid
    f_int = ops._rhs_interior(grid, f)
    total = 0.0
    for (l, s) in params.terms:
        total += ops.weak_form(u, u, (l, s)) / l
    total -= grid.h * float(np.dot(f_int, u.interior_values))
    return total


class _EnergyModel:
    """Precomputed kernel data for repeated energy/gradient evaluations."""

    # cache per-row kernel weights only up to this many matrix entries
    _CACHE_ENTRIES = 4_000_000

    def __init__(self, grid: Grid, params: OperatorParams):
        self.grid = grid
        self.params = params
        self.idx = grid.interior_idx
        self.h = grid.h
        M = grid.size
        self._term_data = []
        for (l, s) in params.terms:
            w = ops._kernel_weights(grid, l * s)
            ff = ops._farfield_weights(grid, l * s)
            ff_capped = ff.copy()
            ff_capped[0] = ff_capped[-1] = 0.0  # box-end values are pinned to zero
            data = {"l": l, "s": s, "w": w, "ff": ff_capped, "const": 0.0}
            if l == 2.0:
                prefix = np.concatenate(([0.0], np.cumsum(w)))
                data["row_sums"] = prefix[np.arange(M)] + prefix[M - 1 - np.arange(M)]
                data["kernel"] = np.concatenate((w[::-1], [0.0], w))
            elif self.idx.size * M <= self._CACHE_ENTRIES:
                data["w_rows"] = self._weight_rows(w, self.idx)
            self._term_data.append(data)
        self.template = np.zeros(M)
        self.f_int = np.zeros(self.idx.size)

    def _weight_rows(self, w, rows):
        cols = np.arange(self.grid.size)
        w_ext = np.concatenate(([0.0], w))
        return w_ext[np.abs(rows[:, None] - cols[None, :])]

    @property
    def is_quadratic(self) -> bool:
        return self.params.p == 2.0 and self.params.q == 2.0

    def set_exterior(self, exterior_values: np.ndarray) -> None:
        if abs(exterior_values[0]) > 0 or abs(exterior_values[-1]) > 0:
            raise ValueError("exterior datum must vanish at the ends of the meshed box")
        self.template = exterior_values.copy()
        self.template[self.idx] = 0.0
        # exterior-exterior pair energy and exterior far-field terms are
        # constant in the interior unknowns; fold them in once per term
        ext = self.template
        M = self.grid.size
        ext_mask = np.ones(M, dtype=bool)
        ext_mask[self.idx] = False
        for data in self._term_data:
            if data["l"] == 2.0:
                data["const"] = 0.0  # handled exactly by the FFT path
                continue
            l, w = data["l"], data["w"]
            hh = 0.0
            if np.any(ext != 0.0):
                for k in range(1, M):
                    both_ext = ext_mask[k:] & ext_mask[:-k]
                    d = (ext[k:] - ext[:-k])[both_ext]
                    hh += 2.0 * w[k - 1] * float(np.sum(np.abs(d) ** l))
            far_ext = float(np.dot(np.abs(ext) ** l, data["ff"]))
            data["const"] = self.h * self.h * hh + 2.0 * self.h * far_ext

    def set_rhs(self, f_int: np.ndarray) -> None:
        self.f_int = np.asarray(f_int, dtype=float)

    def full(self, u_int: np.ndarray) -> np.ndarray:
        vals = self.template.copy()
        vals[self.idx] = u_int
        return vals

    def _term_energy_grad(self, vals, data, want_grad=True):
        l, M = data["l"], self.grid.size
        h = self.h
        if l == 2.0:
            conv = fftconvolve(vals, data["kernel"])[M - 1:2 * M - 1]
            box_rows = data["row_sums"] * vals - conv
            G = 2.0 * h * h * float(np.dot(vals, box_rows)) \
                + 2.0 * h * float(np.dot(vals * vals, data["ff"]))
            grad = None
            if want_grad:
                grad = h * (2.0 * h * box_rows + 2.0 * vals * data["ff"])[self.idx]
            return G, grad
        # Interior-row sweep.  With P = sum over interior rows of the full
        # row pair sums and T the interior-interior part, the ordered box
        # pair sum equals 2P - T plus the cached exterior-exterior constant.
        e = l - 1.0
        idx = self.idx
        c0, c1 = idx[0], idx[-1] + 1
        n = idx.size
        u_int = vals[idx]
        P = 0.0
        T = 0.0
        acc = np.empty(n) if want_grad else None
        cached = data.get("w_rows")
        for start in range(0, n, _BLOCK_ROWS):
            blk = slice(start, min(start + _BLOCK_ROWS, n))
            if cached is not None:
                w_rows = cached[blk]
            else:
                w_rows = self._weight_rows(data["w"], idx[blk])
            diffs = u_int[blk, None] - vals[None, :]
            a = np.abs(diffs)
            ae = a ** e
            al = ae * a
            P += float(np.einsum("ij,ij->", al, w_rows))
            T += float(np.einsum("ij,ij->", al[:, c0:c1], w_rows[:, c0:c1]))
            if want_grad:
                acc[blk] = np.einsum("ij,ij->i", np.sign(diffs) * ae, w_rows)
        far_int = np.abs(u_int) ** l * data["ff"][idx]
        G = h * h * (2.0 * P - T) + data["const"] + 2.0 * h * float(np.sum(far_int))
        grad = None
        if want_grad:
            sp_int = ops.signed_power(u_int, e)
            grad = h * (2.0 * h * acc + 2.0 * sp_int * data["ff"][idx])
        return G, grad

    def energy_grad(self, u_int: np.ndarray):
        vals = self.full(u_int)
        E = -self.h * float(np.dot(self.f_int, u_int))
        grad = -self.h * self.f_int
        for data in self._term_data:
            G, g = self._term_energy_grad(vals, data, want_grad=True)
            E += G / data["l"]
            grad = grad + g
        return E, grad

    def energy_only(self, u_int: np.ndarray) -> float:
        vals = self.full(u_int)
        E = -self.h * float(np.dot(self.f_int, u_int))
        for data in self._term_data:
            G, _ = self._term_energy_grad(vals, data, want_grad=False)
            E += G / data["l"]
        return E

    def apply_linear(self, d_int: np.ndarray) -> np.ndarray:
        """A d at interior nodes for interior-supported d (p = q = 2 only)."""
        M = self.grid.size
        vals = np.zeros(M)
        vals[self.idx] = d_int
        out = np.zeros(self.idx.size)
        for data in self._term_data:
            conv = fftconvolve(vals, data["kernel"])[M - 1:2 * M - 1]
            rows = data["row_sums"] * vals - conv
            out += (2.0 * self.h * rows + 2.0 * vals * data["ff"])[self.idx]
        return self.h * out

    def jacobi_diag(self) -> np.ndarray:
        """Diagonal of the quadratic-case Hessian at the interior nodes."""
        diag = np.zeros(self.idx.size)
        for data in self._term_data:
            if data["l"] != 2.0:
                continue
            diag += self.h * (2.0 * self.h * data["row_sums"] + 2.0 * data["ff"])[self.idx]
        return diag


def _two_loop(g, s_list, y_list, rho_list, h0_diag):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    if h0_diag is not None:
        r = h0_diag * q
    elif s_list:
        y = y_list[-1]
        gamma = float(np.dot(s_list[-1], y)) / float(np.dot(y, y))
        r = gamma * q
    else:
        r = q
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * float(np.dot(y, r))
        r += s * (a - b)
    return r


def _minimize(model: _EnergyModel, u0_int: np.ndarray, tol: float, max_iter: int,
              memory: int = _DEFAULT_MEMORY):
    """L-BFGS with backtracking line search; stops on sup residual <= tol.

    Returns (u_int, E, grad, sup, iterations, converged).  Accepted steps
    decrease the energy; for the quadratic case the exact line minimum is
    used as the first (and accepted) trial step.
    """
    h = model.h
    x = np.asarray(u0_int, dtype=float).copy()
    E, g = model.energy_grad(x)
    sup = float(np.max(np.abs(g))) / h if g.size else 0.0
    quadratic = model.is_quadratic
    h0 = 1.0 / model.jacobi_diag() if quadratic else None
    s_list, y_list, rho_list = [], [], []
    it = 0
    window_E = E
    while sup > tol and it < max_iter:
        if it % _STALL_WINDOW == 0:
            if it > 0 and window_E - E <= 4e-16 * (1.0 + abs(E)):
                break  # energy at its float floor; no certifiable descent left
            window_E = E
        d = -_two_loop(g, s_list, y_list, rho_list, h0)
        gd = float(np.dot(g, d))
        if gd >= 0.0:
            s_list, y_list, rho_list = [], [], []
            d = -(h0 * g if h0 is not None else g)
            gd = float(np.dot(g, d))
            if gd >= 0.0:
                break
        if quadratic:
            Ad = model.apply_linear(d)
            dAd = float(np.dot(d, Ad))
            if dAd <= 0.0:
                break
            t = -gd / dAd
            x_new = x + t * d
            E_new = E + t * gd + 0.5 * t * t * dAd
            g_new = g + t * Ad
        else:
            t = 1.0 if s_list else min(1.0, 1.0 / (1.0 + float(np.sum(np.abs(g)))))
            accepted = False
            for _ in range(_MAX_BACKTRACKS):
                x_new = x + t * d
                E_new = model.energy_only(x_new)
                if E_new <= E + _ARMIJO_C1 * t * gd:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            _, g_new = model.energy_grad(x_new)
        if not (E_new <= E):
            break
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0), y_list.pop(0), rho_list.pop(0)
        x, E, g = x_new, E_new, g_new
        sup = float(np.max(np.abs(g))) / h
        it += 1
    return x, E, g, sup, it, sup <= tol


def _exterior_template(grid: Grid, g) -> np.ndarray:
    vals = np.zeros(grid.size)
    if g is None:
        return vals
    g_arr = np.asarray(g, dtype=float)
    if g_arr.ndim == 0:
        vals[:] = float(g_arr)
    elif g_arr.shape == (grid.size,):
        vals[:] = g_arr
    else:
        raise ValueError("exterior datum must be None, a scalar, or one value per node")
    vals[grid.interior_idx] = 0.0
    return vals


def solve_dirichlet(f, g, params: OperatorParams, tol: float | None = None, *,
                    grid: Grid | None = None, u0: np.ndarray | None = None,
                    max_iter: int = _DEFAULT_MAX_ITER) -> tuple[GridFunction, SolveReport]:
    """Minimize the Dirichlet energy with exterior values fixed to g.

    Parameters
    ----------
    f : GridFunction, scalar, or nodal array
        Bounded right-hand side on the domain.
    g : None, scalar, or nodal array
        Exterior datum on the meshed halo (zero beyond the box); must vanish
        at the two box-end nodes.
    tol : float, optional
        Stop when the collocation residual sup norm drops below this;
        defaults to 1e-8 (1 + sup|f|).
    u0 : array, optional
        Interior starting values (warm start).
    """
    if isinstance(f, GridFunction):
        grid = f.grid
    if grid is None:
        raise ValueError("a grid is required when f is not a GridFunction")
    f_int = ops._rhs_interior(grid, f)
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.max(np.abs(f_int))))
    if tol <= 0.0:
        raise ValueError("solver tolerance must be positive")
    model = _EnergyModel(grid, params)
    model.set_exterior(_exterior_template(grid, g))
    model.set_rhs(f_int)
    start = time.perf_counter()
    x0 = np.zeros(grid.interior_idx.size) if u0 is None else np.asarray(u0, dtype=float)
    x, E, _, _, it, converged = _minimize(model, x0, tol, max_iter)
    elapsed = time.perf_counter() - start
    vals = model.full(x)
    u = GridFunction(grid, vals)
    check = ops.residual(u, f_int, params)
    report = SolveReport(
        iterations=it,
        final_energy=E,
        residual_sup=check.sup_norm,
        converged=converged and check.sup_norm <= tol,
        wall_time=elapsed,
    )
    return u, report


def solve_constant_rhs(theta: float, params: OperatorParams, tol: float | None = None, *,
                       grid: Grid, max_iter: int = _DEFAULT_MAX_ITER) -> tuple[GridFunction, SolveReport]:
    """Solve with constant source theta >= 0 and zero exterior datum."""
    if theta < 0.0:
        raise ValueError(f"constant source must be nonnegative, got {theta}")
    if theta == 0.0:
        u = GridFunction(grid, np.zeros(grid.size))
        return u, SolveReport(0, 0.0, 0.0, True, 0.0)
    return solve_dirichlet(float(theta), None, params, tol, grid=grid, max_iter=max_iter)


def _subsolution_theta(K_int: np.ndarray, eps: float, delta: float) -> float:
    floor = float(np.min(K_int)) * eps ** (-delta)
    return 1e-3 * (1.0 + min(floor, 1.0))


def solve_singular_eps(sp: SingularParams, eps: float, params: OperatorParams,
                       tol: float | None = None, *, grid: Grid,
                       g_extra=None, u0: np.ndarray | None = None,
                       outer_max_iter: int = 200,
                       inner_max_iter: int = _DEFAULT_MAX_ITER) -> tuple[GridFunction, SolveReport]:
    """Solve the eps-regularized singular problem by a frozen-source loop.

    The source K_eps (u + eps)^(-delta) [+ g_extra] is re-frozen at each
    outer iteration; the loop starts from the small-constant-source solution
    (a subsolution) and stops when the frozen-source update agrees with the
    iterate to ``tol`` in the sup norm.

    The update is relaxed with an adaptive (Aitken) factor: the plain
    fixed-point map is order-reversing and its contraction degenerates as
    eps shrinks, so undamped updates oscillate; the relaxed step converges
    at a roughly eps-independent rate.
    """
    if eps <= 0.0:
        raise ValueError(f"regularization eps must be positive, got {eps}")
    if not params.verification_grade:
        warnings.warn("q < 2 is outside the quantitative-theorem regime; proceeding",
                      stacklevel=2)
    weight = regularized_weight(grid, sp, eps, params)
    K_int = weight.values[grid.interior_idx]
    g_extra_int = np.zeros(grid.interior_idx.size) if g_extra is None \
        else ops._rhs_interior(grid, g_extra)
    if tol is None:
        f_scale = float(np.max(K_int * eps ** (-sp.delta) + np.abs(g_extra_int)))
        tol = 1e-8 * (1.0 + min(f_scale, 1.0))
    start = time.perf_counter()
    theta = _subsolution_theta(K_int, eps, sp.delta)
    if u0 is None:
        w_theta, _ = solve_constant_rhs(theta, params, tol, grid=grid, max_iter=inner_max_iter)
        u_int = w_theta.interior_values.copy()
        floor_int = u_int.copy()
    else:
        u_int = np.asarray(u0, dtype=float).copy()
        floor_int = None
    inner_total = 0
    converged = False
    diff = np.inf
    it = 0
    final_report = None
    omega = 1.0
    step_prev = None
    for it in range(1, outer_max_iter + 1):
        f_k = K_int * (u_int + eps) ** (-sp.delta) + g_extra_int
        u_new, rep = solve_dirichlet(f_k, None, params, tol, grid=grid, u0=u_int,
                                     max_iter=inner_max_iter)
        inner_total += rep.iterations
        final_report = rep
        step = u_new.interior_values - u_int
        diff = float(np.max(np.abs(step)))
        if diff <= tol and rep.converged:
            u_int = u_new.interior_values.copy()
            converged = True
            break
        if step_prev is not None:
            d_step = step - step_prev
            denom = float(np.dot(d_step, d_step))
            if denom > 0.0:
                omega = -omega * float(np.dot(step_prev, d_step)) / denom
                omega = min(max(omega, 0.05), 1.0)
        u_int = u_int + omega * step
        step_prev = step
    vals = np.zeros(grid.size)
    vals[grid.interior_idx] = u_int
    u = GridFunction(grid, vals)
    meta = {
        "outer_diff": diff,
        "inner_iterations": inner_total,
        "theta": theta,
        "eps": eps,
        "interior_min": float(np.min(u_int)),
    }
    if floor_int is not None:
        meta["floor_violation"] = float(np.max(floor_int - u_int))
    report = SolveReport(
        iterations=it,
        final_energy=final_report.final_energy if final_report else 0.0,
        residual_sup=final_report.residual_sup if final_report else 0.0,
        converged=converged,
        wall_time=time.perf_counter() - start,
        meta=meta,
    )
    return u, report


def solve_singular_limit(sp: SingularParams, eps_schedule, params: OperatorParams,
                         tol: float | None = None, *, grid: Grid,
                         g_extra=None, outer_max_iter: int = 200
                         ) -> tuple[GridFunction, list[SolveReport]]:
    """Follow a decreasing epsilon schedule toward the minimal solution.

    Each stage is warm-started from the previous one; the iterates must be
    nodally nondecreasing as eps decreases (violations beyond tol are flagged
    in the stage report, indicating an under-resolved solve).
    """
    schedule = [float(e) for e in eps_schedule]
    if not schedule:
        raise ValueError("epsilon schedule must be nonempty")
    if any(e <= 0.0 for e in schedule):
        raise ValueError("epsilon schedule must be positive")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("epsilon schedule must be strictly decreasing")
    reports: list[SolveReport] = []
    u_prev: GridFunction | None = None
    for j, eps in enumerate(schedule):
        warm = u_prev.interior_values if u_prev is not None else None
        u, rep = solve_singular_eps(sp, eps, params, tol, grid=grid, g_extra=g_extra,
                                    u0=warm, outer_max_iter=outer_max_iter)
        rep.meta["stage"] = j
        if u_prev is not None:
            drop = float(np.max(u_prev.values - u.values))
            stage_tol = tol if tol is not None else 10.0 * rep.meta.get("outer_diff", 1e-12)
            rep.meta["monotonicity_violation"] = drop
            rep.meta["stage_sup_diff"] = float(np.max(np.abs(u.values - u_prev.values)))
            rep.meta["monotone"] = drop <= stage_tol
        u_prev = u
        reports.append(rep)
    return u_prev, reports
