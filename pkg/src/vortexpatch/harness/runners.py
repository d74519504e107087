"""Dispatch from validated scenarios to the math modules.

Each runner returns ``(metrics, series, artifacts)``: scalar metrics keyed
as in ``scenario.METRICS``, named :class:`DiagnosticSeries` groups and the
relative paths of files it wrote under the output directory.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import numpy as np

from .. import contour2d as c2
from .. import flatten as fl
from .. import oracles
from ..diagnostics import DiagnosticSeries
from .scenario import Scenario

Result = tuple[dict[str, float], dict[str, DiagnosticSeries], list[str]]


def build_contour(p: dict[str, Any], seed: int = 0) -> c2.Contour:
    """Contour preset from scenario parameters."""
    N = p["N"]
    kind = p["contour"]
    if kind == "circle":
        return c2.Contour.circle(p["radius"], N=N)
    if kind == "ellipse":
        return c2.Contour.ellipse(p["a"], p["b"], p["angle"], N=N)
    if kind == "perturbed":
        amps = {int(k): float(a) for k, a in p["amplitudes"]}
        return c2.Contour.perturbed_circle(amps, N, radius=p["radius"])
    rng = np.random.default_rng(seed)
    modes = np.arange(2, p["random_modes"] + 2)
    amps = p["random_amplitude"] * rng.uniform(0.5, 1.0, modes.size) * (modes / 2.0) ** -p["random_decay"]
    phases = rng.uniform(0.0, 2 * math.pi, modes.size)
    return c2.Contour.perturbed_circle(
        dict(zip(modes.tolist(), amps.tolist())), N, dict(zip(modes.tolist(), phases.tolist())), p["radius"]
    )


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)[0])


def _rate(h, e) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    e = np.asarray(e, dtype=float)
    if len(e) < 2 or np.any(e <= 0):
        return math.nan
    return _slope(np.log(np.asarray(h, dtype=float)), np.log(e))


# ---------------------------------------------------------------------------
# simulate2d
# ---------------------------------------------------------------------------


def _rotation(snaps: list[c2.Contour]) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([c.time for c in snaps])
    ang = np.unwrap(2.0 * np.array([c2.orientation_angle(c) for c in snaps])) / 2.0
    return t, ang


def run_simulate2d(scen: Scenario, out: Path) -> Result:
    p = scen.params
    contour = build_contour(p, scen.seed)
    vort = c2.PatchVorticity(p["omega_plus"], p["omega_minus"])
    metrics: dict[str, float] = {}
    series: dict[str, DiagnosticSeries] = {}
    if p["mode"] == "oracle":
        if p["contour"] not in ("ellipse", "circle"):
            raise ValueError("oracle mode compares against the ellipse area quadrature")
        a, b = (p["a"], p["b"]) if p["contour"] == "ellipse" else (p["radius"],) * 2
        rng = np.random.default_rng(scen.seed)
        x = rng.uniform(-1.5, 1.5, (p["probes"], 2)) * np.array([a, b])
        u = c2.patch_velocity(contour, vort, x)
        ref = oracles.ellipse_patch_velocity_area(x, a, b, p["angle"], omega=vort.jump)
        ref = ref + 0.5 * vort.omega_minus * np.column_stack([-x[:, 1], x[:, 0]])
        metrics["oracle_max_diff"] = float(np.abs(u - ref).max())
        probe = DiagnosticSeries()
        for i, d in enumerate(np.abs(u - ref).max(axis=1)):
            probe.add(float(i), "abs_difference", float(d))
        series["probes"] = probe
        return metrics, series, []

    res = c2.evolve(
        contour, vort, p["dt"], p["t_end"],
        monitor_every=p["monitor_every"], snapshot_every=p["snapshot_every"], k=p["sobolev_k"],
    )
    snaps = res.snapshots
    if snaps[-1] is not res.contour:
        snaps.append(res.contour)
    c0 = snaps[0]
    a0 = c2.area(c0)
    shape = DiagnosticSeries()
    drift = 0.0
    for c in snaps:
        d = c2.hausdorff_distance(c, c0) if p["contour"] != "ellipse" else 0.0
        drift = max(drift, d)
        shape.extend(c.time, {"area": c2.area(c), "boundary_drift": d})
    metrics["area_drift"] = float(max(abs(c2.area(c) - a0) for c in snaps))
    if p["contour"] != "ellipse":
        metrics["boundary_drift"] = drift
    metrics["final_chord_arc"] = c2.chord_arc(res.contour)
    if p["contour"] == "ellipse":
        t, ang = _rotation(snaps)
        defo = [c2.ellipse_deformation(c) for c in snaps]
        for ti, ai, di in zip(t, ang, defo):
            shape.extend(float(ti), {"orientation_angle": float(ai), "deformation": di})
        rate = _slope(t, ang)
        exact = oracles.kirchhoff_rate(p["a"], p["b"], vort.jump)
        metrics["rotation_rate"] = rate
        metrics["rate_rel_error"] = abs(rate - exact) / abs(exact)
        metrics["deformation"] = float(max(defo))
        if p["reference_N"]:
            window = p["reference_t_end"]
            fine = c2.Contour.ellipse(p["a"], p["b"], p["angle"], N=p["reference_N"])
            dt_ref = min(p["dt"], c2.cfl_dt(fine, vort))
            rates = []
            for n_modes in (p["N"], p["reference_N"]):
                c_ref = c2.Contour.ellipse(p["a"], p["b"], p["angle"], N=n_modes)
                r = c2.evolve(c_ref, vort, dt_ref, window, snapshot_every=max(1, round(window / dt_ref / 10)))
                rates.append(_slope(*_rotation(r.snapshots + [r.contour])))
            metrics["reference_rate_rel_error"] = abs(rates[1] - exact) / abs(exact)
            metrics["rate_self_difference"] = abs(rates[0] - rates[1]) / abs(rates[1])
    series["shape"] = shape
    series["monitor"] = res.diagnostics
    c2.save_checkpoint(res.contour, out / "final_contour.json")
    return metrics, series, ["final_contour.json"]


# ---------------------------------------------------------------------------
# flatten
# ---------------------------------------------------------------------------


def run_flatten(scen: Scenario, out: Path) -> Result:
    p = scen.params
    metrics: dict[str, float] = {}
    series: dict[str, DiagnosticSeries] = {}
    artifacts: list[str] = []
    if p["mode"] == "jacobian":
        contour = build_contour(p, scen.seed)
        th = 2 * math.pi * np.arange(p["n_theta"]) / p["n_theta"]
        defect = fl.boundary_jacobian_defect(contour, th)
        zmap = fl.solve_disk_extension(contour)
        eps, _ = fl.injectivity_margin(zmap, contour)
        metrics["boundary_jacobian_defect"] = float(np.abs(defect).max())
        metrics["injectivity_eps"] = eps
        metrics["maps_inside"] = float(fl.maps_inside(zmap, contour, min(eps, 0.999)))
        metrics["disk_norm"] = fl.disk_sobolev_norm(zmap, p["k"])
        s = DiagnosticSeries()
        for t, d in zip(th, defect):
            s.add(float(t), "jacobian_defect", float(d))
        series["boundary"] = s
        fl.save_map(zmap, out / "disk_map.json")
        artifacts.append("disk_map.json")
        R = p["outer_radius"] or None
        fl.save_map(fl.solve_annulus_extension(contour, R), out / "annulus_map.json")
        artifacts.append("annulus_map.json")
        return metrics, series, artifacts
    family, eps = fl.roughening_family(
        p["k"], p["members"], p["family_amplitude"], p["family_N"], p["eps_max"], p["eps_min"], scen.seed
    )
    rows = fl.sobolev_gain_ratio(family, p["k"], [f"{e:.6g}" for e in eps])
    ratios = np.array([r.ratio for r in rows])
    metrics["gain_ratio_min"] = float(ratios.min())
    metrics["gain_ratio_max"] = float(ratios.max())
    metrics["gain_ratio_spread"] = float(ratios.max() / ratios.min())
    s = DiagnosticSeries()
    for i, r in enumerate(rows):
        s.extend(float(i), {"ratio": r.ratio, "map_norm": r.map_norm, "contour_norm": r.contour_norm, "eps": eps[i]})
    series["gain"] = s
    return metrics, series, artifacts


# ---------------------------------------------------------------------------
# solve-elliptic
# ---------------------------------------------------------------------------


def run_solve_elliptic(scen: Scenario, out: Path) -> Result:
    from ..twophase import measure_interface_jump, mesh_from_contour, solve_stream_2d, solve_velocity_2d
    from ..twophase.solvers import error_norms
    from ..twophase.study import (
        convergence_study,
        manufactured_ellipse,
        manufactured_weak,
        pullback_coefficient,
        run_manufactured,
    )

    p = scen.params
    hs = sorted((float(h) for h in p["h"]), reverse=True)
    deg = p["degree"]
    metrics: dict[str, float] = {}
    table = DiagnosticSeries()
    problem = p["problem"]
    if problem in ("rankine-stream", "rankine-velocity"):
        contour = c2.Contour.circle(1.0, N=p["N"])
        vort = c2.PatchVorticity()
        rows: dict[str, list[float]] = {}
        for level, h in enumerate(hs):
            mesh = mesh_from_contour(contour, h)
            if problem == "rankine-stream":
                sol = solve_stream_2d(contour, mesh, vort, deg)
                errs = error_norms(sol, (oracles.rankine_stream, oracles.rankine_stream))
                drop = float(sol.evaluate([[0.0, 0.0]])[0, 0] - sol.evaluate([[1.0, 0.0]])[0, 0])
                vals = {"l2": errs["l2"], "nodal_l2": errs["nodal_l2"], "center_drop_error": abs(drop + 0.25)}
            else:
                sol = solve_velocity_2d(contour, mesh, vort, deg)
                jump = measure_interface_jump(sol, "normal-derivative")
                tang = jump.tangential()
                vals = {
                    "jump_distance": jump.l2_distance(-jump.tangents),
                    "mean_tangential_jump": float(np.sum(jump.lengths * tang) / jump.lengths.sum()),
                    "value_jump": float(np.abs(measure_interface_jump(sol, "value").values).max()),
                }
            for k, v in vals.items():
                rows.setdefault(k, []).append(v)
            table.extend(float(level), {"h": h, **vals})
        for k, v in rows.items():
            metrics[k if k != "l2" and k != "nodal_l2" else f"{k}_finest"] = v[-1]
        if problem == "rankine-stream":
            metrics["nodal_l2_rate"] = _rate(hs, rows["nodal_l2"])
            metrics["l2_rate"] = _rate(hs, rows["l2"])
        else:
            metrics["jump_distance_rate"] = _rate(hs, rows["jump_distance"])
        return metrics, {"refinement": table}, []
    if problem == "manufactured":
        man = manufactured_ellipse(p["a"], p["b"])
    else:
        family, _ = fl.roughening_family(3, 10, 0.2, 64, seed=scen.seed)
        a_plus, a_minus = pullback_coefficient(family[-1])
        man = manufactured_weak(c2.Contour.circle(1.0, N=8), a_plus, a_minus)
    rt = convergence_study(lambda h: run_manufactured(man, h, deg), hs, problem)
    rt.to_csv(out / "rates.csv")
    for level, h in enumerate(rt.h):
        table.extend(float(level), {"h": h, **{k: v[level] for k, v in sorted(rt.errors.items())}})
    for k in ("l2", "h1", "flux_jump"):
        if k in rt.rates:
            metrics[f"{k}_rate"] = rt.rates[k]
    metrics["l2_finest"] = rt.errors["l2"][-1]
    metrics["h1_finest"] = rt.errors["h1"][-1]
    return metrics, {"refinement": table}, ["rates.csv"]


# ---------------------------------------------------------------------------
# evolve3d
# ---------------------------------------------------------------------------


def _solve3d(p: dict[str, Any], n: int, M: int, band: float | None):
    from .. import lagrangian3d as l3

    grid = l3.PeriodicGrid.cube(n, p["half_length"], p["method"])
    kw: dict[str, Any] = {}
    if p["preset"] == "ball":
        kw = {"radius": p["radius"], "omega": p["omega"], "band": band}
    elif p["preset"] == "ring":
        kw = {"major": p["major"], "minor": p["minor"], "omega": p["omega"], "band": band}
    data = l3.preset(p["preset"], grid, **kw)
    state = l3.picard_solve(
        data.u0, data.omega0, grid, p["T"], M, p["tol"], p["max_iter"], p["cg_tol"],
        support=data.support if p["preset"] != "zero" else None,
    )
    diag = l3.euler_diagnostics(state, data.surface.vertices, data.surface.normals)
    return data, state, diag


def run_evolve3d(scen: Scenario, out: Path) -> Result:
    from .. import lagrangian3d as l3

    p = scen.params
    band = p["band"] or None
    data, state, diag = _solve3d(p, p["n"], p["M"], band)
    g = state.grid
    metrics: dict[str, float] = {
        "iterations": float(state.iterations),
        "final_difference": state.differences[-1],
        "max_late_factor": max(state.factors[1:], default=0.0),
        "monotone": float(all(b <= a for a, b in zip(state.differences, state.differences[1:]))),
        "velocity_max": float(np.abs(state.v).max()),
        "zero_mean_defect": max(l3.zero_mean_defect(state.v[m], g) for m in range(state.M + 1)),
        "data_divergence": data.divergence(),
    }
    levels = DiagnosticSeries()
    leak = 0.0
    lam_min, disp = math.inf, 0.0
    mean_rel = 0.0
    for m, t in enumerate(state.times):
        pack = state.packs[m]
        lam, _ = pack.min_eigenvalue()
        dsp = pack.displacement_norm()
        C = state.transported(m)
        off = C[:, ~data.support]
        leak = max(leak, float(np.abs(off).max()) if off.size else 0.0)
        cn = g.l2(C)
        rel = diag.series("mean_transported_vorticity")[1][m] / cn if cn > 0 else 0.0
        mean_rel = max(mean_rel, float(rel))
        lam_min, disp = min(lam_min, lam), max(disp, dsp)
        levels.extend(float(t), {"min_coercivity": lam, "displacement": dsp})
    metrics.update(min_coercivity=lam_min, max_displacement=disp, support_leak=leak, mean_vorticity_rel=mean_rel)
    for name in ("divergence_proxy", "jacobian_defect", "cauchy_residual", "tangency_residual"):
        metrics[name] = diag.last(name)
    iters = DiagnosticSeries()
    for k, d in enumerate(state.differences):
        iters.add(float(k + 1), "difference", d)
        iters.add(float(k + 1), "cg_iterations", float(sum(state.cg_iterations[k])))
        if k >= 1:
            iters.add(float(k + 1), "factor", state.factors[k - 1])
    series = {"levels": diag, "guard": levels, "iterations": iters}
    artifacts: list[str] = []
    if p["refine"]:
        sizes = sorted(int(n) for n in p["refine"])
        ref = DiagnosticSeries()
        errs: dict[str, list[float]] = {}
        for n in sizes:
            M = max(1, round(p["M"] * n / p["n"]))
            _, _, dg = _solve3d(p, n, M, p["refine_band"])
            vals = {k: dg.last(k) for k in ("divergence_proxy", "jacobian_defect", "cauchy_residual")}
            for k, v in vals.items():
                errs.setdefault(k, []).append(v)
            ref.extend(float(n), vals)
        h = [2 * p["half_length"] / n for n in sizes]
        metrics["order_divergence"] = _rate(h, errs["divergence_proxy"])
        metrics["order_jacobian"] = _rate(h, errs["jacobian_defect"])
        metrics["order_cauchy"] = _rate(h, errs["cauchy_residual"])
        series["refinement"] = ref
    if p["snapshots"]:
        for name, values in (("velocity_T", state.v[-1]), ("displacement_T", state.xi[-1]), ("omega0", state.omega0)):
            l3.save_field(l3.PeriodicField3D(g, values, name), out / f"{name}.vpf")
            artifacts.append(f"{name}.vpf")
    return metrics, series, artifacts


RUNNERS = {
    "simulate2d": run_simulate2d,
    "flatten": run_flatten,
    "solve-elliptic": run_solve_elliptic,
    "evolve3d": run_evolve3d,
}
