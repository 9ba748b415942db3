"""Batch orchestration: run configured experiments, emit CSV artifacts and a
markdown report.

Every artifact is deterministic given (config, seed): floats are written
with 17 significant digits, rows in fixed order, and the config hash is
stamped in a comment line at the top of each file.  Wall-clock timings go to
the report only, never into CSVs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, ConfigError, validate
from .geometry import (
    BarrierSpec,
    Grid,
    GridFunction,
    build_grid,
    distance,
    tent_cutoff,
)
from .operators import OperatorParams
from .solver import (
    SingularParams,
    solve_dirichlet,
    solve_singular_eps,
    solve_singular_limit,
)
from .estimators import default_fit_window, fit_boundary_exponent
from .principles import (
    verify_barrier_q_bounded,
    verify_barrier_super,
    verify_caccioppoli,
    verify_singular_scp,
    verify_strong_comparison,
    verify_strong_max,
    verify_weak_comparison,
)

__all__ = ["RunResult", "run", "sweep"]


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    artifacts: list = field(default_factory=list)
    checks: list = field(default_factory=list)  # (name, measured, requirement, status)
    messages: list = field(default_factory=list)

    def add_check(self, name: str, measured, requirement: str, ok: bool | None):
        status = "n/a" if ok is None else ("pass" if ok else "FAIL")
        self.checks.append((name, measured, requirement, status))
        if ok is False:
            self.exit_code = max(self.exit_code, 1)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _write_csv(path: Path, cfg_hash: str, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_report(path: Path, cfg: ExperimentConfig, result: RunResult, extra: str = ""):
    lines = [
        f"# Experiment report: {cfg.kind}",
        "",
        f"- config hash: `{cfg.hash}`",
        f"- seed: {cfg.seed}",
        f"- exit code: {result.exit_code}",
        "",
        "| check | measured | requirement | status |",
        "|---|---|---|---|",
    ]
    for name, measured, requirement, status in result.checks:
        lines.append(f"| {name} | {_fmt(measured)} | {requirement} | {status} |")
    if result.messages:
        lines.append("")
        lines.extend(f"- {m}" for m in result.messages)
    if extra:
        lines.append("")
        lines.append(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    result.artifacts.append(str(path))


def _grid_from(cfg: ExperimentConfig) -> Grid:
    dom, grid = cfg.section("domain"), cfg.section("grid")
    return build_grid(dom["a"], dom["b"], grid["n"], grid["halo"])


def _params_from(cfg: ExperimentConfig) -> OperatorParams:
    op = cfg.section("operator")
    return OperatorParams(op["p"], op["q"], op["s1"], op["s2"])


def _singular_from(cfg: ExperimentConfig) -> SingularParams:
    sg = cfg.section("singular")
    scale = sg["scale"]
    return SingularParams(
        gamma=sg["gamma"], delta=sg["delta"], weight_kind=sg["weight_kind"],
        c1=scale, c2=scale,
    )


def _eps_schedule(cfg: ExperimentConfig) -> list:
    sg = cfg.section("singular")
    eps, out = sg["eps0"], []
    while eps >= sg["eps_min"] * (1.0 - 1e-12):
        out.append(eps)
        eps *= sg["eps_factor"]
    if not out:
        out = [sg["eps0"]]
    return out


def _rhs_from(cfg: ExperimentConfig, grid: Grid):
    rhs = cfg.section("rhs")
    if rhs["kind"] == "constant":
        return float(rhs["value"])
    if rhs["kind"] == "expression-table":
        table = np.asarray(rhs["value"], dtype=float)
        return np.interp(grid.nodes, table[:, 0], table[:, 1])
    raise ConfigError("rhs.kind: singular right-hand sides use the singular pipeline")


def _fit_window(cfg: ExperimentConfig, grid: Grid):
    fit = cfg.section("fit")
    lo, hi = default_fit_window(grid)
    if fit["d_lo"] is not None:
        lo = fit["d_lo"]
    if fit["d_hi"] is not None:
        hi = fit["d_hi"]
    return (lo, hi), fit["side"]


def _solution_rows(u: GridFunction):
    g = u.grid
    d = distance(g, g.nodes)
    return [(float(x), float(v), float(dd)) for x, v, dd in zip(g.nodes, u.values, d)]


def run(cfg: ExperimentConfig) -> RunResult:
    """Execute one experiment; artifacts land in the config's out_dir."""
    validate(cfg)
    out = cfg.out_dir
    kind = cfg.kind
    if kind == "solve" and cfg.section("rhs")["kind"] == "singular":
        kind = "singular"
    runner = {
        "solve": _run_solve,
        "singular": _run_singular,
        "barrier": _run_barrier,
        "principles": _run_principles,
        "exponent": _run_exponent,
        "report": _run_report,
        "sweep": sweep,
    }[kind]
    return runner(cfg)


def _run_solve(cfg: ExperimentConfig) -> RunResult:
    grid = _grid_from(cfg)
    params = _params_from(cfg)
    sol = cfg.section("solver")
    f = _rhs_from(cfg, grid)
    u, rep = solve_dirichlet(f, None, params, sol["tol"], grid=grid,
                             max_iter=sol["max_iter"])
    result = RunResult(0, cfg.out_dir)
    result.add_check("solver converged", rep.converged, "residual_sup <= tol", rep.converged)
    result.add_check("residual sup", rep.residual_sup, "reported", True)
    result.add_check("iterations", rep.iterations, "reported", True)
    result.messages.append(f"wall time {rep.wall_time:.3f} s")
    path = cfg.out_dir / "solution.csv"
    _write_csv(path, cfg.hash, ("x", "u", "d"), _solution_rows(u))
    result.artifacts.append(str(path))
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _run_singular(cfg: ExperimentConfig) -> RunResult:
    grid = _grid_from(cfg)
    params = _params_from(cfg)
    sol = cfg.section("solver")
    sp = _singular_from(cfg)
    schedule = _eps_schedule(cfg)
    v, reports = solve_singular_limit(sp, schedule, params, sol["tol"], grid=grid,
                                      outer_max_iter=sol["outer_max_iter"])
    result = RunResult(0, cfg.out_dir)
    all_conv = all(r.converged for r in reports)
    result.add_check("all stages converged", all_conv, "outer sup-diff <= tol", all_conv)
    mono_ok = all(r.meta.get("monotone", True) for r in reports)
    result.add_check("nodal monotone increase", mono_ok, "v nondecreasing as eps drops", mono_ok)
    result.add_check("interior floor", reports[-1].meta["interior_min"], "> 0",
                     reports[-1].meta["interior_min"] > 0.0)
    rows = [
        (
            r.meta.get("stage", i),
            r.meta["eps"],
            r.iterations,
            r.meta.get("stage_sup_diff"),
            r.meta.get("monotonicity_violation"),
            r.converged,
        )
        for i, r in enumerate(reports)
    ]
    stages = cfg.out_dir / "stages.csv"
    _write_csv(stages, cfg.hash,
               ("stage", "eps", "outer_iterations", "sup_diff", "monotonicity_violation",
                "converged"), rows)
    result.artifacts.append(str(stages))
    path = cfg.out_dir / "solution.csv"
    _write_csv(path, cfg.hash, ("x", "u", "d"), _solution_rows(v))
    result.artifacts.append(str(path))
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _default_band(cfg: ExperimentConfig, grid: Grid) -> float:
    band = cfg.section("barrier")["band"]
    return band if band > 0.0 else 0.1 * (grid.b - grid.a)


def _run_barrier(cfg: ExperimentConfig) -> RunResult:
    grid = _grid_from(cfg)
    params = _params_from(cfg)
    bar = cfg.section("barrier")
    band = _default_band(cfg, grid)
    result = RunResult(0, cfg.out_dir)
    rows = []
    spec = BarrierSpec(alpha=bar["alpha"], kappa=bar["kappa"], rho=bar["rho"])
    sup_rep = verify_barrier_super(grid, spec, params, band)
    rows.append(("supersolution", sup_rep.alpha, sup_rep.kappa, band,
                 sup_rep.inf_scaled_p_value, sup_rep.refinement_ratio, sup_rep.passed,
                 grid.n, cfg.hash))
    result.add_check("p-part supersolution margin", sup_rep.inf_scaled_p_value,
                     "> 0, stable under doubling", sup_rep.passed)
    qb_rep = verify_barrier_q_bounded(grid, params, band, kappa=bar["kappa"])
    rows.append(("q_bounded", qb_rep.alpha, qb_rep.kappa, band, qb_rep.sup_q_value,
                 qb_rep.refinement_ratio, qb_rep.passed, grid.n, cfg.hash))
    result.add_check("q-part boundedness ratio", qb_rep.refinement_ratio,
                     "<= 1.2 under doubling", qb_rep.passed)
    path = cfg.out_dir / "barrier.csv"
    _write_csv(path, cfg.hash,
               ("kind", "alpha", "kappa", "band", "value", "refinement_ratio", "passed",
                "n", "config_hash"), rows)
    result.artifacts.append(str(path))
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _random_source_pair(rng, grid: Grid):
    """Smooth nonnegative ordered source pair on the interior nodes."""
    x = grid.interior_nodes
    span = grid.b - grid.a
    t = (x - grid.a) / span

    def smooth():
        coef = rng.standard_normal(4)
        vals = coef[0] + coef[1] * np.sin(np.pi * t) + coef[2] * np.cos(2 * np.pi * t) \
            + coef[3] * np.sin(3 * np.pi * t)
        return vals - np.min(vals)  # nonnegative

    f1 = smooth()
    f2 = f1 + smooth()
    return f1, f2


def principles_battery(cfg: ExperimentConfig):
    """The five principle verdicts on the configured operator and grid."""
    grid = _grid_from(cfg)
    params = _params_from(cfg)
    sol = cfg.section("solver")
    linear = params.p == 2.0 and params.q == 2.0
    tol = sol["tol"] if sol["tol"] is not None else (1e-8 if linear else 1e-6)
    rng = np.random.default_rng(cfg.seed)
    verdicts = []

    u1, rep1 = solve_dirichlet(1.0, None, params, tol, grid=grid)
    verdicts.append(verify_strong_max(u1, tol=10.0 * tol))

    worst = None
    for _ in range(20):
        f1, f2 = _random_source_pair(rng, grid)
        ua, _ = solve_dirichlet(f1, None, params, tol, grid=grid)
        ub, _ = solve_dirichlet(f2, None, params, tol, grid=grid)
        v = verify_weak_comparison(ua, ub, f1, f2, tol=tol)
        if worst is None or v.margin < worst.margin:
            worst = v
        if not v.passed:
            break
    verdicts.append(worst)

    u2, _ = solve_dirichlet(2.0, None, params, tol, grid=grid)
    verdicts.append(verify_strong_comparison(u2, u1, params, K=2.0, K1=100.0, tol=tol))

    span = grid.b - grid.a
    mid = 0.5 * (grid.a + grid.b)
    E = (mid - 0.3 * span, mid + 0.3 * span)
    tent_iv = (mid - 0.25 * span, mid + 0.25 * span)
    k1 = float(np.median(u1.interior_values))
    psi = tent_cutoff(grid, *tent_iv)
    grid2 = build_grid(grid.a, grid.b, 2 * grid.n, grid.halo)
    u1f, _ = solve_dirichlet(1.0, None, params, tol, grid=grid2)
    psi2 = tent_cutoff(grid2, *tent_iv)
    k2 = float(np.median(u1f.interior_values))
    refined = (u1f, k2, psi2, E, 1.0)
    verdicts.append(verify_caccioppoli(u1, k1, psi, E, 1.0, params, refined=refined))

    if params.p > 2.0 and params.q > 2.0:
        sp = _singular_from(cfg)
        eps = cfg.section("singular")["eps_min"]
        g0 = np.zeros(grid.interior_idx.size)
        w_sol, _ = solve_singular_eps(sp, eps, params, tol, grid=grid, g_extra=g0)
        v_sol, _ = solve_singular_eps(sp, eps, params, tol, grid=grid, g_extra=g0 + 0.5)
        K_set = (mid - 0.25 * span, mid + 0.25 * span)
        verdicts.append(verify_singular_scp(v_sol, w_sol, g0, sp.delta, K_set, params,
                                            tol=tol))
    else:
        verdicts.append(verify_singular_scp(
            _zero_gf(grid), _zero_gf(grid), None, 1.0,
            (mid - 0.25 * span, mid + 0.25 * span), params, tol=tol))
    return verdicts


def _zero_gf(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.size))


def _run_principles(cfg: ExperimentConfig) -> RunResult:
    grid = _grid_from(cfg)
    verdicts = principles_battery(cfg)
    result = RunResult(0, cfg.out_dir)
    rows = []
    for v in verdicts:
        status = "not_applicable" if not v.applicable else ("true" if v.passed else "false")
        ratio = ""
        if v.name == "caccioppoli" and "->" in v.details:
            ratio = v.margin
        rows.append((v.name, status, v.margin, grid.n, ratio, cfg.hash))
        ok = None if not v.applicable else v.passed
        result.add_check(v.name, v.margin, v.details, ok)
    path = cfg.out_dir / "verdicts.csv"
    _write_csv(path, cfg.hash,
               ("name", "passed", "margin", "n", "refinement_ratio", "config_hash"), rows)
    result.artifacts.append(str(path))
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _run_exponent(cfg: ExperimentConfig) -> RunResult:
    grid = _grid_from(cfg)
    params = _params_from(cfg)
    sol = cfg.section("solver")
    result = RunResult(0, cfg.out_dir)
    singular = cfg.section("rhs")["kind"] == "singular"
    if singular:
        sp = _singular_from(cfg)
        u, reports = solve_singular_limit(sp, _eps_schedule(cfg), params, sol["tol"],
                                          grid=grid,
                                          outer_max_iter=cfg.section("solver")["outer_max_iter"])
        converged = all(r.converged for r in reports)
        target = sp.alpha_gd(params) if sp.strongly_singular(params) else params.s1
        fit_kind = "singular"
    else:
        u, rep = solve_dirichlet(_rhs_from(cfg, grid), None, params, sol["tol"], grid=grid,
                                 max_iter=sol["max_iter"])
        converged = rep.converged
        target = params.s1
        fit_kind = "regular"
    result.add_check("solver converged", converged, "all solves at tol", converged)
    window, side = _fit_window(cfg, grid)
    fit = fit_boundary_exponent(u, window, side)
    result.add_check("boundary exponent", fit.exponent,
                     f"growth-formula target {target:.4f}", True)
    result.add_check("fit r_squared", fit.r_squared, ">= 0.98", fit.r_squared >= 0.98)
    rows = [(fit_kind, fit.side, fit.window[0], fit.window[1], fit.exponent,
             fit.r_squared, grid.n, cfg.hash)]
    path = cfg.out_dir / "fits.csv"
    _write_csv(path, cfg.hash,
               ("kind", "side", "d_lo", "d_hi", "exponent", "r_squared", "n", "config_hash"),
               rows)
    result.artifacts.append(str(path))
    sol_path = cfg.out_dir / "solution.csv"
    _write_csv(sol_path, cfg.hash, ("x", "u", "d"), _solution_rows(u))
    result.artifacts.append(str(sol_path))
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _run_report(cfg: ExperimentConfig) -> RunResult:
    """Composite run: solve, exponent fit, principles, and barrier checks."""
    result = RunResult(0, cfg.out_dir)
    for sub_kind in ("solve", "exponent", "principles", "barrier"):
        sub = cfg.with_overrides(**{
            "experiment.kind": sub_kind,
            "experiment.out_dir": str(cfg.out_dir / sub_kind),
        })
        sub_res = run(sub)
        for check in sub_res.checks:
            result.checks.append((f"{sub_kind}: {check[0]}",) + check[1:])
        result.artifacts.extend(sub_res.artifacts)
        result.exit_code = max(result.exit_code, sub_res.exit_code)
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _sub_kind_for(key: str) -> str:
    section = key.split(".", 1)[0]
    return {
        "singular": "singular",
        "barrier": "barrier",
        "fit": "exponent",
    }.get(section, "solve")


def sweep(cfg: ExperimentConfig) -> RunResult:
    """One sub-run per swept value plus an aggregate CSV keyed by the value."""
    sw = cfg.section("sweep")
    key, values = sw["key"], sw["values"]
    sub_kind = _sub_kind_for(key)
    subs = []
    for i, value in enumerate(values):
        sub = cfg.with_overrides(**{
            key: value,
            "experiment.kind": sub_kind,
            "experiment.out_dir": str(cfg.out_dir / f"value_{i:03d}"),
        })
        validate(sub)
        subs.append((value, sub))
    threads = max(1, int(os.environ.get("FRACPQ_THREADS", "1")))
    results = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda pair: _safe_run(pair[1]), subs))
    else:
        results = [_safe_run(sub) for _, sub in subs]
    result = RunResult(0, cfg.out_dir)
    rows = []
    prev_solution = None
    for (value, sub), (code, err) in zip(subs, results):
        sup_u, min_incr = "", ""
        sol_file = sub.out_dir / "solution.csv"
        if sol_file.exists():
            data = np.loadtxt(sol_file, delimiter=",", skiprows=2)
            u_vals = data[:, 1]
            sup_u = float(np.max(np.abs(u_vals)))
            if prev_solution is not None and prev_solution.size == u_vals.size:
                min_incr = float(np.min(u_vals - prev_solution))
            prev_solution = u_vals
        rows.append((key, value, code, sup_u, min_incr, sub.hash))
        if err:
            result.messages.append(f"{key}={value}: {err}")
        result.exit_code = max(result.exit_code, code)
    agg = cfg.out_dir / "aggregate.csv"
    _write_csv(agg, cfg.hash,
               ("swept_key", "swept_value", "exit_code", "sup_u", "min_increment_vs_prev",
                "config_hash"), rows)
    result.artifacts.append(str(agg))
    result.add_check("sweep sub-runs", f"{len(values)} values", "all sub-runs exit 0",
                     result.exit_code == 0)
    _write_report(cfg.out_dir / "report.md", cfg, result)
    return result


def _safe_run(sub: ExperimentConfig):
    try:
        res = run(sub)
        return res.exit_code, None
    except Exception as exc:  # sub-run failures are recorded, not raised
        return 2, f"{type(exc).__name__}: {exc}"
