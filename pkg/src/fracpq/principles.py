"""Executable checks of maximum, comparison, barrier, and energy estimates.

Each verifier turns a qualitative theorem about the fractional
(p,q)-Laplacian into a concrete pass/fail verdict on computed grid
functions.  Unknown existence constants are replaced by refinement-stability
criteria: a quantity certified positive (or bounded) must not degrade by
more than a fixed factor under mesh doubling.  Hypothesis failures are
reported as "not applicable", never as a pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BarrierSpec,
    Grid,
    GridFunction,
    barrier_function,
    build_grid,
    distance,
)
from .operators import OperatorParams, eval_pointwise, gagliardo_seminorm, farfield_weight
from .estimators import holder_quotient, hopf_quotient
from . import operators as ops

__all__ = [
    "PrincipleVerdict",
    "BarrierCheckReport",
    "verify_strong_max",
    "verify_weak_comparison",
    "verify_strong_comparison",
    "verify_barrier_super",
    "verify_barrier_q_bounded",
    "verify_caccioppoli",
    "verify_singular_scp",
    "halfline_l1_reference",
    "halfline_l1_quadrature",
]


@dataclass
class PrincipleVerdict:
    name: str
    passed: bool
    margin: float
    details: str = ""
    witness: tuple[int, float] | None = None
    applicable: bool = True

    def __post_init__(self):
        if not self.passed and self.applicable and self.witness is None:
            raise ValueError("failing applicable verdicts must carry a witness")


@dataclass
class BarrierCheckReport:
    alpha: float
    kappa: float
    rho: float
    inf_scaled_p_value: float = field(default=np.nan)
    sup_q_value: float = field(default=np.nan)
    refinement_ratio: float = field(default=np.nan)
    passed: bool = False
    details: str = ""


def _band_interior(grid: Grid, rho: float) -> np.ndarray:
    idx = grid.interior_idx
    d = distance(grid, grid.nodes[idx])
    band = idx[d < rho]
    if band.size == 0:
        raise ValueError("boundary band contains no interior nodes")
    return band


def verify_strong_max(u: GridFunction, tol: float = 1e-10) -> PrincipleVerdict:
    """Either u vanishes identically or it is strictly positive inside.

    Valid for computed supersolutions (nonnegative source and exterior
    datum).
    """
    sup_all = float(np.max(np.abs(u.values)))
    if sup_all <= tol:
        return PrincipleVerdict("strong_maximum", True, margin=tol - sup_all,
                                details="identically zero branch")
    interior = u.interior_values
    i_min = int(np.argmin(interior))
    min_val = float(interior[i_min])
    passed = min_val > tol
    witness = None if passed else (int(u.grid.interior_idx[i_min]), min_val)
    return PrincipleVerdict(
        "strong_maximum", passed, margin=min_val - tol,
        details=f"interior min {min_val:.3e}, sup {sup_all:.3e}",
        witness=witness,
    )


def verify_weak_comparison(u1: GridFunction, u2: GridFunction, f1, f2,
                           tol: float = 1e-8) -> PrincipleVerdict:
    """Ordered sources f1 <= f2 must give ordered solutions u1 <= u2.

    A slack of 10 tol absorbs the solver tolerance of the two runs.
    """
    grid = u1.grid
    f1i = ops._rhs_interior(grid, f1)
    f2i = ops._rhs_interior(grid, f2)
    if np.any(f1i > f2i):
        raise ValueError("weak comparison requires nodally ordered sources f1 <= f2")
    gap = u2.values - u1.values
    i_min = int(np.argmin(gap))
    margin = float(gap[i_min])
    passed = margin >= -10.0 * tol
    witness = None if passed else (i_min, margin)
    return PrincipleVerdict(
        "weak_comparison", passed, margin=margin,
        details=f"min(u2 - u1) = {margin:.3e} with slack {10*tol:.1e}",
        witness=witness,
    )


def verify_strong_comparison(u: GridFunction, v: GridFunction,
                             params: OperatorParams, K: float, K1: float,
                             tol: float = 1e-8,
                             sample_stride: int = 16) -> PrincipleVerdict:
    """Strict separation u > v, and (u-v)/d^{s1} bounded below, for ordered
    solutions with bounded sources.

    Hypotheses checked on the inputs: 0 < v <= u with u not identical to v,
    and the q-part of v bounded below by -K1 (sampled).  When s1 equals
    q' s2 the distance-power clause is skipped with a note.
    """
    grid = u.grid
    if float(np.max(np.abs(u.values - v.values))) <= tol:
        return PrincipleVerdict(
            "strong_comparison", False, margin=0.0,
            details="not applicable: u and v coincide within tol",
            applicable=False,
        )
    idx = grid.interior_idx
    sample = idx[::max(1, sample_stride)]
    q_vals = np.array([eval_pointwise(v, (params.q, params.s2), int(i)) for i in sample])
    if np.any(q_vals < -K1):
        return PrincipleVerdict(
            "strong_comparison", False, margin=float(np.min(q_vals) + K1),
            details=f"not applicable: q-part of v drops below -K1 = {-K1}",
            applicable=False,
        )
    diff = u.values[idx] - v.values[idx]
    i_min = int(np.argmin(diff))
    min_diff = float(diff[i_min])
    clauses = [f"min interior (u - v) = {min_diff:.3e}"]
    passed = min_diff > tol
    witness = None if passed else (int(idx[i_min]), min_diff)
    margin = min_diff
    threshold = params.q_conjugate * params.s2
    if abs(params.s1 - threshold) > 1e-12:
        d = distance(grid, grid.nodes[idx])
        quot = diff / d ** params.s1
        j_min = int(np.argmin(quot))
        min_quot = float(quot[j_min])
        clauses.append(f"min (u - v)/d^s1 = {min_quot:.3e}")
        if min_quot <= tol and passed:
            passed = False
            witness = (int(idx[j_min]), min_quot)
        margin = min(margin, min_quot)
    else:
        clauses.append("distance-power clause skipped: s1 = q' s2")
    return PrincipleVerdict(
        "strong_comparison", passed, margin=margin,
        details="; ".join(clauses) + f" (source bound K = {K})",
        witness=witness,
    )


def verify_barrier_super(grid: Grid, spec: BarrierSpec, params: OperatorParams,
                         band: float, drop_factor: float = 0.8) -> BarrierCheckReport:
    """The p-part of the barrier is a supersolution near the boundary.

    Computes inf over the band of eval_p(w) (d + kappa^(1/alpha))^(p s1 - alpha (p-1)),
    the empirical counterpart of the barrier lower-bound constant; it must be
    strictly positive and lose at most 20% under mesh doubling.
    """
    if not (0.0 < spec.alpha < params.s1):
        raise ValueError(
            f"barrier exponent must lie in (0, s1) = (0, {params.s1}), got {spec.alpha}"
        )
    vals = []
    for g in (grid, build_grid(grid.a, grid.b, 2 * grid.n, grid.halo)):
        w = barrier_function(g, spec)
        band_idx = _band_interior(g, band)
        d = distance(g, g.nodes[band_idx])
        scale = (d + spec.shift) ** (params.p * params.s1 - spec.alpha * (params.p - 1.0))
        ev = np.array([eval_pointwise(w, (params.p, params.s1), int(i)) for i in band_idx])
        vals.append(float(np.min(ev * scale)))
    coarse, fine = vals
    ratio = fine / coarse if coarse > 0 else np.inf
    passed = coarse > 0.0 and fine >= drop_factor * coarse
    return BarrierCheckReport(
        alpha=spec.alpha, kappa=spec.kappa, rho=spec.resolved_rho(grid),
        inf_scaled_p_value=coarse, refinement_ratio=ratio, passed=passed,
        details=f"scaled inf {coarse:.4e} -> {fine:.4e} under doubling (band {band})",
    )


def verify_barrier_q_bounded(grid: Grid, params: OperatorParams, band: float,
                             alpha: float | None = None, kappa: float = 0.0,
                             growth_factor: float = 1.2) -> BarrierCheckReport:
    """The q-part of the distance-power barrier stays bounded near the
    boundary: sup |eval_q(w)| over the band must not grow by more than the
    given factor under mesh doubling.

    Requires alpha in [s2, 1) with alpha != q' s2 (the excluded resonant
    power); the default alpha = s1 is the profile used by the Hopf argument.
    """
    if alpha is None:
        alpha = params.s1
    if not (params.s2 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [s2, 1) = [{params.s2}, 1), got {alpha}")
    if abs(alpha - params.q_conjugate * params.s2) < 1e-6:
        raise ValueError("alpha must differ from q' s2 (resonant distance power)")
    sups = []
    for g in (grid, build_grid(grid.a, grid.b, 2 * grid.n, grid.halo)):
        spec = BarrierSpec(alpha=alpha, kappa=kappa)
        w = barrier_function(g, spec)
        band_idx = _band_interior(g, band)
        ev = np.array([eval_pointwise(w, (params.q, params.s2), int(i)) for i in band_idx])
        sups.append(float(np.max(np.abs(ev))))
    coarse, fine = sups
    ratio = fine / coarse if coarse > 0 else np.inf
    passed = np.isfinite(coarse) and ratio <= growth_factor
    return BarrierCheckReport(
        alpha=alpha, kappa=kappa, rho=band, sup_q_value=coarse,
        refinement_ratio=ratio, passed=passed,
        details=f"sup |q-part| {coarse:.4e} -> {fine:.4e} under doubling (band {band})",
    )


def halfline_l1_reference(x: float, q: float, s2: float, alpha: float,
                          kappa: float = 0.0) -> float:
    """Closed form of the one-sided model integral of the distance-power
    barrier: integral over y < -kappa^(1/alpha) of the kernel against the
    constant barrier value, which evaluates to
    (x + kappa^(1/alpha))^(alpha (q-1) - q s2) / (q s2)."""
    shift = kappa ** (1.0 / alpha) if kappa > 0 else 0.0
    return (x + shift) ** (alpha * (q - 1.0) - q * s2) / (q * s2)


def halfline_l1_quadrature(x: float, q: float, s2: float, alpha: float,
                           kappa: float = 0.0, n: int = 2048) -> float:
    """The same one-sided integral under the package's collocation rule.

    Builds the standard extended grid on (0, 1), takes the half-line barrier
    profile (y + kappa^(1/alpha))_+^alpha, and sums the kernel over the nodes
    where the profile vanishes, plus the closed-form far-field beyond the
    box.  Used as the quadrature-consistency oracle for the q-part barrier
    check.
    """
    if x <= 0.0:
        raise ValueError("evaluation point must lie inside the half line x > 0")
    grid = build_grid(0.0, 1.0, n, 1.0)
    shift = kappa ** (1.0 / alpha) if kappa > 0 else 0.0
    mask = grid.nodes < -shift
    ux = (x + shift) ** alpha
    qs2 = q * s2
    kernel = np.abs(x - grid.nodes[mask]) ** (-1.0 - qs2)
    box = ux ** (q - 1.0) * float(np.sum(kernel)) * grid.h
    far = ux ** (q - 1.0) * (x - grid.x_lo) ** (-qs2) / qs2
    return box + far


def verify_caccioppoli(u: GridFunction, k: float, psi: GridFunction,
                       E: tuple[float, float], f, params: OperatorParams,
                       refined: tuple | None = None, sign: int = 1,
                       growth_factor: float = 1.2) -> PrincipleVerdict:
    """Constant-free check of the truncation energy estimate.

    The ratio LHS/RHS (seminorm of the truncation against the
    cutoff/tail/source terms) must be finite; when a refined input set is
    supplied, the ratio must not grow by more than ``growth_factor`` under
    mesh doubling, which is the empirical statement that the estimate's
    constant exists.
    """
    lhs, rhs = _caccioppoli_lhs_rhs(u, k, psi, E, f, params, sign)
    if lhs == 0.0 and rhs == 0.0:
        return PrincipleVerdict("caccioppoli", True, margin=0.0,
                                details="trivial truncation: both sides vanish")
    if rhs <= 0.0:
        return PrincipleVerdict("caccioppoli", False, margin=-np.inf,
                                details=f"degenerate right side {rhs!r}",
                                witness=(-1, rhs))
    ratio = lhs / rhs
    if refined is None:
        passed = np.isfinite(ratio)
        return PrincipleVerdict(
            "caccioppoli", passed, margin=ratio,
            details=f"LHS/RHS = {ratio:.4f} (single resolution)",
            witness=None if passed else (-1, ratio),
        )
    u2, k2, psi2, E2, f2 = refined
    lhs2, rhs2 = _caccioppoli_lhs_rhs(u2, k2, psi2, E2, f2, params, sign)
    ratio2 = lhs2 / rhs2 if rhs2 > 0 else np.inf
    passed = np.isfinite(ratio) and np.isfinite(ratio2) and ratio2 <= growth_factor * ratio
    return PrincipleVerdict(
        "caccioppoli", passed, margin=growth_factor * ratio - ratio2,
        details=f"LHS/RHS = {ratio:.4f} -> {ratio2:.4f} under doubling",
        witness=None if passed else (-1, ratio2),
    )


def _caccioppoli_lhs_rhs(u, k, psi, E, f, params, sign):
    grid = u.grid
    if not grid.is_same_mesh(psi.grid):
        raise ValueError("cutoff must live on the same grid")
    if np.any(psi.values < 0.0) or np.any(psi.values > 1.0):
        raise ValueError("cutoff must take values in [0, 1]")
    lo, hi = float(E[0]), float(E[1])
    supp = np.abs(psi.values) > 0
    x_supp = grid.nodes[supp]
    if x_supp.size == 0:
        raise ValueError("cutoff vanishes identically")
    if x_supp[0] <= lo or x_supp[-1] >= hi:
        raise ValueError("cutoff support must sit compactly inside the region")
    w = np.maximum(sign * (u.values - k), 0.0)
    f_full = np.zeros(grid.size)
    f_full[grid.interior_idx] = ops._rhs_interior(grid, f)
    h = grid.h
    p = params.p
    in_E = (grid.nodes >= lo) & (grid.nodes <= hi)
    e_idx = np.nonzero(in_E)[0]
    wE = w[e_idx]
    psiE = psi.values[e_idx]
    xE = grid.nodes[e_idx]
    # LHS: p-seminorm of w psi over E x E
    wpsi = GridFunction(grid, np.where(in_E, w * psi.values, 0.0))
    lhs = gagliardo_seminorm(wpsi, params.s1, p, (lo, hi)) ** p
    # RHS term 1: cutoff oscillation against w^l over E x E, both components
    rhs1 = 0.0
    m = e_idx.size
    for (l, s) in params.terms:
        acc = 0.0
        wgt = (np.arange(1, m, dtype=float) * h) ** (-1.0 - l * s)
        for kk in range(1, m):
            dpsi = np.abs(psiE[kk:] - psiE[:-kk]) ** l
            wl = wE[kk:] ** l + wE[:-kk] ** l
            acc += wgt[kk - 1] * float(np.dot(dpsi, wl))
        rhs1 += 2.0 * h * h * acc
    # RHS term 2: exterior tail of w against the band integral of w psi^p
    rhs2 = 0.0
    supp_idx = np.nonzero(supp)[0]
    out_idx = np.nonzero(~in_E)[0]
    band_int = float(np.sum(w[e_idx] * psi.values[e_idx] ** p)) * h
    for (l, s) in params.terms:
        sup_tail = 0.0
        wc = max(sign * (u.farfield_value - k), 0.0)  # truncation beyond the box
        for j in supp_idx:
            xj = grid.nodes[j]
            dist_out = np.abs(xj - grid.nodes[out_idx])
            tail = float(np.sum(w[out_idx] ** (l - 1.0) * dist_out ** (-1.0 - l * s))) * h
            if wc > 0.0:
                tail += wc ** (l - 1.0) * farfield_weight(grid, int(j), l, s)
            sup_tail = max(sup_tail, tail)
        rhs2 += sup_tail * band_int
    # RHS term 3: source against w psi^p over the domain
    rhs3 = float(np.sum(np.abs(f_full) * w * psi.values ** p)) * h
    return lhs, rhs1 + rhs2 + rhs3


def verify_singular_scp(v: GridFunction, w: GridFunction, g, delta: float,
                        K: tuple[float, float], params: OperatorParams,
                        s1_floor_band: float | None = None,
                        tol: float = 1e-8) -> PrincipleVerdict:
    """Strict interior separation of ordered singular super/sub solutions.

    Applicability gates: p, q > 2 strictly with a nonempty admissible
    Hoelder window above max{(p s1 - 1)/(p - 2), (q s2 - 1)/(q - 2)}, and a
    positive distance-power floor v >= eta d^{s1} certified by the Hopf
    quotient.  The interior Hoelder quotient of v is recorded, not asserted.
    """
    grid = v.grid
    lo, hi = float(K[0]), float(K[1])
    if not (grid.a < lo < hi < grid.b):
        raise ValueError("compact set K must sit strictly inside the domain")
    if params.p <= 2.0 or params.q <= 2.0:
        return PrincipleVerdict(
            "singular_strong_comparison", False, margin=0.0,
            details=f"not applicable: requires p, q > 2 strictly (p={params.p}, q={params.q})",
            applicable=False,
        )
    a_lo = max(
        (params.p * params.s1 - 1.0) / (params.p - 2.0),
        (params.q * params.s2 - 1.0) / (params.q - 2.0),
    )
    if a_lo >= params.s1:
        return PrincipleVerdict(
            "singular_strong_comparison", False, margin=a_lo - params.s1,
            details=(
                "not applicable: Hoelder window empty, "
                f"required exponent > {a_lo:.4f} exceeds attainable s1 = {params.s1}"
            ),
            applicable=False,
        )
    band = s1_floor_band if s1_floor_band is not None else 0.2 * (grid.b - grid.a)
    floor = hopf_quotient(v, params.s1, band)
    if floor <= tol:
        return PrincipleVerdict(
            "singular_strong_comparison", False, margin=floor,
            details=f"not applicable: distance-power floor fails, min v/d^s1 = {floor:.3e}",
            applicable=False,
        )
    sigma = 0.5 * (a_lo + params.s1)
    hq = holder_quotient(v, sigma, (lo, hi)).quotient_sup
    sup_diff = float(np.max(np.abs(v.values - w.values)))
    if sup_diff <= tol:
        return PrincipleVerdict(
            "singular_strong_comparison", True, margin=tol - sup_diff,
            details="equality branch: v and w coincide within tol",
        )
    sel = (grid.nodes >= lo) & (grid.nodes <= hi)
    gap = v.values[sel] - w.values[sel]
    i_min = int(np.argmin(gap))
    min_gap = float(gap[i_min])
    passed = min_gap > tol
    witness = None if passed else (int(np.nonzero(sel)[0][i_min]), min_gap)
    return PrincipleVerdict(
        "singular_strong_comparison", passed, margin=min_gap,
        details=(
            f"min over K of (v - w) = {min_gap:.3e}; floor eta = {floor:.3e}; "
            f"interior Hoelder quotient at sigma = {sigma:.3f}: {hq:.3e} (recorded)"
        ),
        witness=witness,
    )
