"""Declarative experiment runner over the two solvers.

A single JSON config describes the media, the initial data, the grid,
and one of four experiment kinds: riemann (sharp runs against the exact
single-medium oracle), eps_sweep (capillary runs at several eps against
a sharp reference on a finer grid), steady (drift of a discrete steady
profile), and contraction (ordered L1 distances of paired runs).  The
runner emits CSV profiles, an error table, JSON diagnostics, and a
manifest with content hashes; identical config and seed give identical
numbers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .connections import build_kappa_eps, optimal_connection, VARIANTS
from .entropy_diagnostics import build_entropy_report, l1_comparison
from .errors import CapflowError, ConfigError, DomainError, GridMismatchError
from .flux_model import MediumPair, make_medium, make_pair
from .grid import Field, Grid, make_field, make_grid
from .hyperbolic_solver import (
    HyperbolicConfig,
    Trajectory,
    exact_riemann_single_medium,
    hyperbolic_solve,
    write_trajectory_csv,
)
from .parabolic_solver import ParabolicConfig, parabolic_solve, write_interface_states_csv

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "RunRecord",
    "main",
    "parse_config",
    "run_experiment",
    "space_time_l1_distance",
    "write_outputs",
]

KINDS = ("riemann", "eps_sweep", "steady", "contraction")
NAMED_PROFILES = ("dam_break", "connection", "random_piecewise")

_DIAG_DEFAULTS = {
    "radius": 2.0,
    "reference_n_cells": 4096,
    "time_samples": 11,
    "drift_tol": 2e-3,
    "slack_tol": 1e-10,
    "entropy_report": False,
    "figures": True,
}

_TOP_KEYS = {
    "media", "kind", "initial", "grid", "solver", "diagnostics",
    "steady", "contraction", "seed", "output_dir",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    grid holds x_min, x_max, and n_cells (an int, or a list for riemann
    resolution sweeps); hyperbolic and parabolic are the solver blocks
    (either may be None when the kind does not need it); diagnostics is
    the toggle block with defaults filled in; raw echoes the full JSON
    object for the manifest.
    """

    kind: str
    pair: MediumPair
    initial: dict
    grid: dict
    hyperbolic: dict | None
    parabolic: dict | None
    diagnostics: dict
    steady: dict | None
    contraction: dict | None
    seed: int
    output_dir: str | None
    raw: dict


@dataclass(frozen=True)
class RunRecord:
    """One solver run inside an experiment.

    error is None for a completed run; a failed run keeps its message
    and drops the trajectory so the rest of the sweep can finish.
    """

    run_id: str
    params: dict
    trajectory: Trajectory | None
    l1_error: float | None
    diagnostics: dict | None
    entropy: object | None
    wall_clock: float
    error: str | None = None


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    runs: tuple
    verdicts: dict
    config_echo: dict
    seed: int

    @property
    def failed_runs(self) -> tuple:
        return tuple(r for r in self.runs if r.error is not None)

    @property
    def all_verdicts_pass(self) -> bool:
        return all(v for key, v in self.verdicts.items() if key.endswith("_pass"))


def _as_float(problems, block, key, value, positive=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        problems.append(f"{block}.{key}: expected a number, got {value!r}")
        return None
    value = float(value)
    if positive and not value > 0.0:
        problems.append(f"{block}.{key}: must be positive, got {value!r}")
        return None
    return value


def _check_saturation_value(problems, path, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        problems.append(f"{path}: expected a number, got {value!r}")
        return None
    if not 0.0 <= float(value) <= 1.0:
        problems.append(f"{path}: saturation must lie in [0, 1], got {value!r}")
        return None
    return float(value)


def _parse_media(problems, media):
    if not isinstance(media, dict):
        problems.append("media: expected an object")
        return None
    q = media.get("q", 1.0)
    gamma = media.get("gamma", -1.0)
    p_1 = media.get("p_1", 0.0)
    p_2 = media.get("p_2", 1.0)
    for key, value in (("q", q), ("gamma", gamma), ("p_1", p_1), ("p_2", p_2)):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            problems.append(f"media.{key}: expected a number, got {value!r}")
            return None
    if p_1 >= p_2 and not media.get("allow_reversed_pressures", False):
        problems.append(
            "media: p_1 must be less than p_2 (the capillary pressure level "
            "must jump upward across the interface); set "
            "media.allow_reversed_pressures to acknowledge the unvalidated regime"
        )
        return None
    try:
        medium_1 = make_medium(q, gamma, media.get("r_1", [0, 0, 1]),
                               media.get("lambda_1", [0, 1, -1]), P=p_1)
        medium_2 = make_medium(q, gamma, media.get("r_2", [0, 0, 1]),
                               media.get("lambda_2", [0, 0.5, -0.5]), P=p_2)
        return make_pair(medium_1, medium_2)
    except CapflowError as exc:
        problems.append(f"media: {exc}")
        return None


def _parse_grid(problems, grid, kind):
    if not isinstance(grid, dict):
        problems.append("grid: expected an object")
        return None
    x_min = _as_float(problems, "grid", "x_min", grid.get("x_min", -2.0))
    x_max = _as_float(problems, "grid", "x_max", grid.get("x_max", 2.0))
    n_cells = grid.get("n_cells", 256)
    sizes = n_cells if isinstance(n_cells, list) else [n_cells]
    if kind != "riemann" and isinstance(n_cells, list):
        problems.append("grid.n_cells: a list of sizes is only valid for kind riemann")
        return None
    if not sizes:
        problems.append("grid.n_cells: must not be empty")
        return None
    for i, n in enumerate(sizes):
        if not isinstance(n, int) or isinstance(n, bool):
            problems.append(f"grid.n_cells[{i}]: expected an integer, got {n!r}")
            return None
    if x_min is None or x_max is None:
        return None
    try:
        for n in sizes:
            make_grid(x_min, x_max, n)
    except CapflowError as exc:
        problems.append(f"grid: {exc}")
        return None
    return {"x_min": x_min, "x_max": x_max, "n_cells": n_cells}


def _parse_initial(problems, initial, grid, path="initial"):
    if not isinstance(initial, dict):
        problems.append(f"{path}: expected an object")
        return None
    kind = initial.get("type")
    if kind == "riemann":
        u_left = _check_saturation_value(problems, f"{path}.u_left", initial.get("u_left"))
        u_right = _check_saturation_value(problems, f"{path}.u_right", initial.get("u_right"))
        if u_left is None or u_right is None:
            return None
        return {"type": "riemann", "u_left": u_left, "u_right": u_right}
    if kind == "piecewise":
        breaks = initial.get("breakpoints")
        values = initial.get("values")
        if not isinstance(breaks, list) or not isinstance(values, list):
            problems.append(f"{path}: piecewise data needs breakpoints and values lists")
            return None
        if len(values) != len(breaks) + 1:
            problems.append(
                f"{path}: need exactly one more value than breakpoints "
                f"(got {len(values)} values, {len(breaks)} breakpoints)"
            )
            return None
        out_breaks = []
        for i, b in enumerate(breaks):
            b = _as_float(problems, path, f"breakpoints[{i}]", b)
            if b is None:
                return None
            out_breaks.append(b)
        if out_breaks != sorted(out_breaks):
            problems.append(f"{path}.breakpoints: must be increasing")
            return None
        if grid is not None and out_breaks:
            if out_breaks[0] <= grid["x_min"] or out_breaks[-1] >= grid["x_max"]:
                problems.append(f"{path}.breakpoints: must lie strictly inside the domain")
                return None
        out_values = []
        for i, v in enumerate(values):
            v = _check_saturation_value(problems, f"{path}.values[{i}]", v)
            if v is None:
                return None
            out_values.append(v)
        return {"type": "piecewise", "breakpoints": out_breaks, "values": out_values}
    if kind == "named":
        name = initial.get("name")
        if name not in NAMED_PROFILES:
            problems.append(
                f"{path}.name: unknown profile {name!r}; choose one of {NAMED_PROFILES}"
            )
            return None
        pieces = initial.get("pieces", 8)
        if not isinstance(pieces, int) or isinstance(pieces, bool) or pieces < 2:
            problems.append(f"{path}.pieces: expected an integer >= 2, got {pieces!r}")
            return None
        return {"type": "named", "name": name, "pieces": pieces}
    problems.append(f"{path}.type: expected riemann, piecewise, or named, got {kind!r}")
    return None


def _parse_solver_block(problems, block, name):
    if not isinstance(block, dict):
        problems.append(f"solver.{name}: expected an object")
        return None
    out = {}
    out["cfl"] = _as_float(problems, f"solver.{name}", "cfl", block.get("cfl", 0.9),
                           positive=True)
    if out["cfl"] is not None and out["cfl"] > 1.0:
        problems.append(f"solver.{name}.cfl: must be at most 1, got {out['cfl']!r}")
        out["cfl"] = None
    out["t_end"] = _as_float(problems, f"solver.{name}", "t_end", block.get("t_end"),
                             positive=True)
    times = block.get("output_times", [])
    if not isinstance(times, list):
        problems.append(f"solver.{name}.output_times: expected a list")
        return None
    out_times = []
    for i, t in enumerate(times):
        t = _as_float(problems, f"solver.{name}", f"output_times[{i}]", t)
        if t is None:
            return None
        out_times.append(t)
    if out["t_end"] is not None:
        for i, t in enumerate(out_times):
            if not 0.0 < t <= out["t_end"]:
                problems.append(
                    f"solver.{name}.output_times[{i}]: must lie in (0, t_end], got {t!r}"
                )
                return None
    out["output_times"] = out_times
    if name == "parabolic" and "eps" in block:
        eps = block.get("eps")
        if not isinstance(eps, list) or not eps:
            problems.append("solver.parabolic.eps: expected a nonempty list")
            return None
        out_eps = []
        for i, e in enumerate(eps):
            e = _as_float(problems, "solver.parabolic", f"eps[{i}]", e, positive=True)
            if e is None:
                return None
            out_eps.append(e)
        out["eps"] = out_eps
    if any(v is None for v in out.values()):
        return None
    return out


def _parse_diagnostics(problems, diag):
    if diag is None:
        diag = {}
    if not isinstance(diag, dict):
        problems.append("diagnostics: expected an object")
        return None
    out = dict(_DIAG_DEFAULTS)
    for key, value in diag.items():
        if key not in _DIAG_DEFAULTS:
            problems.append(f"diagnostics.{key}: unknown toggle")
            continue
        if key in ("entropy_report", "figures"):
            if not isinstance(value, bool):
                problems.append(f"diagnostics.{key}: expected a boolean, got {value!r}")
                continue
            out[key] = value
        elif key in ("reference_n_cells", "time_samples"):
            if not isinstance(value, int) or isinstance(value, bool) or value < 2:
                problems.append(f"diagnostics.{key}: expected an integer >= 2, got {value!r}")
                continue
            out[key] = value
        else:
            value = _as_float(problems, "diagnostics", key, value, positive=True)
            if value is not None:
                out[key] = value
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description.

    Collects every violation before failing, so a broken config reports
    all of its problems (with field paths) in one ConfigError rather
    than the first only.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")

    problems: list = []
    for key in raw:
        if key not in _TOP_KEYS:
            problems.append(f"{key}: unknown top-level key")

    kind = raw.get("kind")
    if kind not in KINDS:
        problems.append(f"kind: expected one of {KINDS}, got {kind!r}")
        kind = None

    pair = _parse_media(problems, raw.get("media", {}))
    grid = _parse_grid(problems, raw.get("grid", {}), kind)
    initial = _parse_initial(problems, raw.get("initial", {}), grid)

    solver = raw.get("solver", {})
    if not isinstance(solver, dict):
        problems.append("solver: expected an object")
        solver = {}
    hyperbolic = None
    parabolic = None
    if "hyperbolic" in solver:
        hyperbolic = _parse_solver_block(problems, solver["hyperbolic"], "hyperbolic")
    if "parabolic" in solver:
        parabolic = _parse_solver_block(problems, solver["parabolic"], "parabolic")

    needs_hyperbolic = kind in ("riemann",)
    needs_parabolic = kind in ("eps_sweep", "steady")
    if needs_hyperbolic and hyperbolic is None:
        problems.append(f"solver.hyperbolic: required for kind {kind}")
    if needs_parabolic and parabolic is None:
        problems.append(f"solver.parabolic: required for kind {kind}")
    if kind == "eps_sweep" and parabolic is not None and "eps" not in parabolic:
        problems.append("solver.parabolic.eps: required for kind eps_sweep")
    if (
        kind == "eps_sweep"
        and hyperbolic is not None
        and parabolic is not None
        and hyperbolic["t_end"] != parabolic["t_end"]
    ):
        problems.append(
            "solver: the sharp reference and the capillary sweep must share t_end"
        )

    diagnostics = _parse_diagnostics(problems, raw.get("diagnostics"))

    steady = None
    if kind == "steady":
        steady = _parse_steady(problems, raw.get("steady"))
    contraction = None
    if kind == "contraction":
        contraction = _parse_contraction(problems, raw.get("contraction"), grid,
                                         hyperbolic, parabolic)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append(f"seed: expected a nonnegative integer, got {seed!r}")
        seed = 0

    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        problems.append(f"output_dir: expected a string, got {output_dir!r}")
        output_dir = None

    if (
        kind == "eps_sweep"
        and grid is not None
        and diagnostics is not None
        and not isinstance(grid["n_cells"], list)
        and diagnostics["reference_n_cells"] % grid["n_cells"] != 0
    ):
        problems.append(
            "diagnostics.reference_n_cells: must be a multiple of grid.n_cells "
            "so coarse profiles inject exactly onto the reference grid"
        )

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        kind=kind,
        pair=pair,
        initial=initial,
        grid=grid,
        hyperbolic=hyperbolic,
        parabolic=parabolic,
        diagnostics=diagnostics,
        steady=steady,
        contraction=contraction,
        seed=seed,
        output_dir=output_dir,
        raw=raw,
    )


def _parse_steady(problems, block):
    if not isinstance(block, dict):
        problems.append("steady: block required for kind steady")
        return None
    side = block.get("side")
    if side not in (1, 2):
        problems.append(f"steady.side: expected 1 or 2, got {side!r}")
        return None
    kappa = _check_saturation_value(problems, "steady.kappa", block.get("kappa"))
    variant = block.get("variant", "over_under")
    if variant not in VARIANTS:
        problems.append(f"steady.variant: expected one of {VARIANTS}, got {variant!r}")
        return None
    eps = _as_float(problems, "steady", "eps", block.get("eps"), positive=True)
    if kappa is None or eps is None:
        return None
    return {"eps": eps, "side": side, "kappa": kappa, "variant": variant}


def _parse_contraction(problems, block, grid, hyperbolic, parabolic):
    if not isinstance(block, dict):
        problems.append("contraction: block required for kind contraction")
        return None
    other = _parse_initial(problems, block.get("initial_other", {}), grid,
                           path="contraction.initial_other")
    solvers = block.get("solvers", ["hyperbolic"])
    if (
        not isinstance(solvers, list)
        or not solvers
        or any(s not in ("hyperbolic", "parabolic") for s in solvers)
    ):
        problems.append(
            f"contraction.solvers: expected a nonempty subset of "
            f"['hyperbolic', 'parabolic'], got {solvers!r}"
        )
        return None
    if "hyperbolic" in solvers and hyperbolic is None:
        problems.append("solver.hyperbolic: required by contraction.solvers")
    if "parabolic" in solvers and (parabolic is None or "eps" not in parabolic):
        problems.append("solver.parabolic (with eps): required by contraction.solvers")
    radius = _as_float(problems, "contraction", "radius", block.get("radius", 1.0),
                       positive=True)
    if other is None or radius is None:
        return None
    return {"initial_other": other, "solvers": list(solvers), "radius": radius}


def _initial_pieces(initial: dict, pair: MediumPair, grid: dict, rng):
    # normalize every description to (breakpoints, values); named random
    # profiles consume the experiment rng so reruns reproduce them
    if initial["type"] == "riemann":
        return (0.0,), (initial["u_left"], initial["u_right"])
    if initial["type"] == "piecewise":
        return tuple(initial["breakpoints"]), tuple(initial["values"])
    name = initial["name"]
    if name == "dam_break":
        return (0.0,), (1.0, 0.0)
    if name == "connection":
        conn = optimal_connection(pair)
        return (0.0,), (conn.left_value, conn.right_value)
    pieces = initial["pieces"]
    width = grid["x_max"] - grid["x_min"]
    lo = grid["x_min"] + 0.05 * width
    hi = grid["x_max"] - 0.05 * width
    breaks = np.sort(rng.uniform(lo, hi, pieces - 1))
    values = rng.uniform(0.0, 1.0, pieces)
    return tuple(float(b) for b in breaks), tuple(float(v) for v in values)


def _field_from_pieces(grid: Grid, breaks, values) -> Field:
    idx = np.searchsorted(np.asarray(breaks), grid.cell_centers, side="right")
    return make_field(np.asarray(values, dtype=float)[idx], 0.0, grid)


def space_time_l1_distance(traj_coarse: Trajectory, traj_fine: Trajectory,
                           radius: float) -> float:
    """L1 distance over |x| <= radius, [t0, t_end], trapezoid in time.

    Coarse cells are injected onto the finer grid by repetition, exact
    for piecewise-constant data, so the grids must span the same
    interval with commensurate cell counts and share output times.
    """
    if not radius > 0.0:
        raise DomainError(f"radius must be positive, got {radius!r}")
    ga, gb = traj_coarse.grid, traj_fine.grid
    if ga.x_min != gb.x_min or ga.x_max != gb.x_max:
        raise GridMismatchError("trajectories span different intervals")
    if gb.n_cells % ga.n_cells != 0:
        raise GridMismatchError(
            f"fine count {gb.n_cells} is not a multiple of coarse count {ga.n_cells}"
        )
    if len(traj_coarse.fields) != len(traj_fine.fields):
        raise GridMismatchError("trajectories record different output times")
    m = gb.n_cells // ga.n_cells
    mask = np.abs(gb.cell_centers) <= radius + 1e-12
    times = []
    integrand = []
    for fa, fb in zip(traj_coarse.fields, traj_fine.fields):
        if abs(fa.time - fb.time) > 1e-12 * max(1.0, abs(fa.time)):
            raise GridMismatchError(f"output times differ: {fa.time!r} vs {fb.time!r}")
        diff = np.abs(np.repeat(fa.values, m) - fb.values)
        integrand.append(float(np.sum(diff[mask])) * gb.dx)
        times.append(fa.time)
    total = 0.0
    for i in range(len(times) - 1):
        total += 0.5 * (integrand[i] + integrand[i + 1]) * (times[i + 1] - times[i])
    return total


def _interior_times(t_end: float, samples: int, extra) -> tuple:
    times = set(float(t) for t in np.linspace(0.0, t_end, samples)[1:-1])
    times.update(float(t) for t in extra)
    return tuple(sorted(times))


def _run_many(tasks, threads: int):
    # execute closures, preserving task order regardless of completion
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def _timed(run_id, params, body):
    # wall-clock wrapper; domain failures abort this run, not the sweep
    start = time.perf_counter()
    try:
        trajectory, l1, diagnostics, entropy = body()
    except CapflowError as exc:
        return RunRecord(run_id, params, None, None, None, None,
                         time.perf_counter() - start, error=str(exc))
    return RunRecord(run_id, params, trajectory, l1, diagnostics, entropy,
                     time.perf_counter() - start)


def _maybe_entropy(config, trajectory, pair):
    if not config.diagnostics["entropy_report"]:
        return None
    return build_entropy_report(trajectory, pair)


def _same_flux(pair: MediumPair) -> bool:
    return bool(np.array_equal(pair.f1.f_poly.coef, pair.f2.f_poly.coef))


def _run_riemann(config: ExperimentConfig, rng, threads: int):
    block = config.hyperbolic
    sizes = config.grid["n_cells"]
    sizes = sizes if isinstance(sizes, list) else [sizes]
    breaks, values = _initial_pieces(config.initial, config.pair, config.grid, rng)
    record = config.diagnostics["entropy_report"]
    oracle = _same_flux(config.pair) and config.initial.get("type") == "riemann"

    def body_for(n):
        def body():
            grid = make_grid(config.grid["x_min"], config.grid["x_max"], n)
            u0 = _field_from_pieces(grid, breaks, values)
            traj = hyperbolic_solve(
                config.pair, grid, u0,
                HyperbolicConfig(block["cfl"], block["t_end"],
                                 output_times=tuple(block["output_times"]),
                                 record_steps=record),
            )
            l1 = None
            if oracle:
                final = traj.final
                xi = grid.cell_centers / final.time
                exact = exact_riemann_single_medium(
                    config.pair.f1, config.initial["u_left"],
                    config.initial["u_right"], xi)
                l1 = float(np.sum(np.abs(final.values - exact))) * grid.dx
            return traj, l1, None, _maybe_entropy(config, traj, config.pair)
        return body

    tasks = [
        (f"run{i:03d}", {"n_cells": n}, body_for(n)) for i, n in enumerate(sizes)
    ]
    runs = _run_many([lambda t=t: _timed(*t) for t in tasks], threads)

    verdicts = {}
    errors = [(r.params["n_cells"], r.l1_error) for r in runs if r.l1_error is not None]
    if len(errors) >= 2:
        (n_first, e_first), (n_last, e_last) = errors[0], errors[-1]
        if e_last > 0.0:
            order = np.log(e_first / e_last) / np.log(n_last / n_first)
            verdicts["measured_order"] = float(order)
            verdicts["order_pass"] = bool(order >= 0.5)
    return runs, verdicts


def _run_eps_sweep(config: ExperimentConfig, rng, threads: int):
    par = config.parabolic
    diag = config.diagnostics
    breaks, values = _initial_pieces(config.initial, config.pair, config.grid, rng)
    out_times = _interior_times(par["t_end"], diag["time_samples"], par["output_times"])
    ref_cfl = config.hyperbolic["cfl"] if config.hyperbolic else par["cfl"]

    def reference_body():
        ref_grid = make_grid(config.grid["x_min"], config.grid["x_max"],
                             diag["reference_n_cells"])
        ref_u0 = _field_from_pieces(ref_grid, breaks, values)
        traj = hyperbolic_solve(
            config.pair, ref_grid, ref_u0,
            HyperbolicConfig(ref_cfl, par["t_end"], output_times=out_times),
        )
        return traj, None, None, None

    ref_record = _timed("reference", {"n_cells": diag["reference_n_cells"]},
                        reference_body)
    if ref_record.error is not None:
        return [ref_record], {}
    reference = ref_record.trajectory

    grid = make_grid(config.grid["x_min"], config.grid["x_max"],
                     config.grid["n_cells"])
    u0 = _field_from_pieces(grid, breaks, values)

    def body_for(eps):
        def body():
            traj, record = parabolic_solve(
                config.pair, grid, u0,
                ParabolicConfig(eps, par["cfl"], par["t_end"], output_times=out_times),
            )
            l1 = space_time_l1_distance(traj, reference, diag["radius"])
            return traj, l1, record.to_dict(), None
        return body

    tasks = [
        (f"run{i:03d}", {"eps": eps}, body_for(eps))
        for i, eps in enumerate(par["eps"])
    ]
    runs = [ref_record] + _run_many([lambda t=t: _timed(*t) for t in tasks], threads)

    verdicts = {}
    errors = [r.l1_error for r in runs if r.l1_error is not None]
    if len(errors) == len(par["eps"]) and len(errors) >= 2:
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        verdicts["strictly_decreasing_pass"] = decreasing
        verdicts["decrease_factor"] = float(errors[0] / errors[-1]) if errors[-1] > 0 else float("inf")
    return runs, verdicts


def _run_steady(config: ExperimentConfig, rng, threads: int):
    par = config.parabolic
    block = config.steady

    def body():
        grid = make_grid(config.grid["x_min"], config.grid["x_max"],
                         config.grid["n_cells"])
        profile = build_kappa_eps(config.pair, block["side"], block["kappa"],
                                  block["eps"], grid, variant=block["variant"])
        traj, record = parabolic_solve(
            config.pair, grid, profile,
            ParabolicConfig(block["eps"], par["cfl"], par["t_end"],
                            output_times=tuple(par["output_times"])),
        )
        drift = float(np.sum(np.abs(traj.final.values - profile.values))) * grid.dx
        drift_rate = drift / par["t_end"]
        return traj, drift_rate, record.to_dict(), None

    runs = _run_many([lambda: _timed("run000", dict(block), body)], threads)
    verdicts = {}
    if runs[0].l1_error is not None:
        verdicts["drift_per_unit_time"] = runs[0].l1_error
        verdicts["steady_pass"] = bool(runs[0].l1_error <= config.diagnostics["drift_tol"])
    return runs, verdicts


def _run_contraction(config: ExperimentConfig, rng, threads: int):
    block = config.contraction
    grid = make_grid(config.grid["x_min"], config.grid["x_max"], config.grid["n_cells"])
    pieces_a = _initial_pieces(config.initial, config.pair, config.grid, rng)
    pieces_b = _initial_pieces(block["initial_other"], config.pair, config.grid, rng)
    u0_a = _field_from_pieces(grid, *pieces_a)
    u0_b = _field_from_pieces(grid, *pieces_b)
    lip = max(config.pair.f1.lip, config.pair.f2.lip)

    def body_for(solver):
        def body():
            if solver == "hyperbolic":
                cfg = HyperbolicConfig(
                    config.hyperbolic["cfl"], config.hyperbolic["t_end"],
                    output_times=tuple(config.hyperbolic["output_times"]))
                traj_a = hyperbolic_solve(config.pair, grid, u0_a, cfg)
                traj_b = hyperbolic_solve(config.pair, grid, u0_b, cfg)
            else:
                par = config.parabolic
                cfg = ParabolicConfig(par["eps"][0], par["cfl"], par["t_end"],
                                      output_times=tuple(par["output_times"]))
                traj_a, _ = parabolic_solve(config.pair, grid, u0_a, cfg)
                traj_b, _ = parabolic_solve(config.pair, grid, u0_b, cfg)
            slack = l1_comparison(traj_a, traj_b, block["radius"], lip)
            return traj_a, slack, {"solver": solver, "lip_bound": lip}, None
        return body

    tasks = [
        (f"run{i:03d}", {"solver": solver}, body_for(solver))
        for i, solver in enumerate(block["solvers"])
    ]
    runs = _run_many([lambda t=t: _timed(*t) for t in tasks], threads)
    verdicts = {}
    slacks = [r.l1_error for r in runs if r.l1_error is not None]
    if len(slacks) == len(runs):
        verdicts["worst_slack"] = max(slacks)
        verdicts["contraction_pass"] = bool(
            max(slacks) <= config.diagnostics["slack_tol"]
        )
    return runs, verdicts


_KIND_RUNNERS = {
    "riemann": _run_riemann,
    "eps_sweep": _run_eps_sweep,
    "steady": _run_steady,
    "contraction": _run_contraction,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Dispatch one experiment; failed runs are recorded, not raised.

    Entropy verdicts of completed runs fold into the report verdicts, so
    the exit-code mapping can distinguish run failures from failed
    checks.
    """
    rng = np.random.default_rng(config.seed)
    runs, verdicts = _KIND_RUNNERS[config.kind](config, rng, threads)
    for run in runs:
        if run.entropy is not None:
            verdicts[f"{run.run_id}_entropy_pass"] = run.entropy.all_pass
    return ExperimentReport(
        kind=config.kind,
        runs=tuple(runs),
        verdicts=verdicts,
        config_echo=config.raw,
        seed=config.seed,
    )


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path, payload) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_outputs(report: ExperimentReport, out_dir) -> dict:
    """Write the artifact set for one report and return the manifest.

    Emits per-run profile CSVs (t,x_center,u), interface-state CSVs for
    capillary runs, errors.csv keyed by the sweep parameter, JSON
    diagnostics and entropy reports, optional PNG figures, and last a
    manifest.json naming every file with its sha256.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if report.runs:
        for run in report.runs:
            if run.trajectory is None:
                continue
            name = f"profiles_{run.run_id}.csv"
            write_trajectory_csv(run.trajectory, out / name)
            written.append(name)
            if run.trajectory.interface_states is not None:
                name = f"interface_{run.run_id}.csv"
                write_interface_states_csv(run.trajectory, out / name)
                written.append(name)

        error_rows = [
            (run.run_id, run.params, run.l1_error)
            for run in report.runs
            if run.l1_error is not None
        ]
        if error_rows:
            param_key = next(iter(error_rows[0][1]))
            with open(out / "errors.csv", "w") as handle:
                handle.write(f"run_id,{param_key},l1_error\n")
                for run_id, params, err in error_rows:
                    cell = params[param_key]
                    cell = repr(cell) if isinstance(cell, float) else str(cell)
                    handle.write(f"{run_id},{cell},{err!r}\n")
            written.append("errors.csv")

        diagnostics = {
            "kind": report.kind,
            "seed": report.seed,
            "verdicts": report.verdicts,
            "runs": {
                run.run_id: {
                    "params": run.params,
                    "l1_error": run.l1_error,
                    "wall_clock_seconds": run.wall_clock,
                    "diagnostics": run.diagnostics,
                    "error": run.error,
                }
                for run in report.runs
            },
        }
        _write_json(out / "diagnostics.json", diagnostics)
        written.append("diagnostics.json")

        entropy = {
            run.run_id: run.entropy.to_dict()
            for run in report.runs
            if run.entropy is not None
        }
        if entropy:
            _write_json(out / "entropy_report.json", entropy)
            written.append("entropy_report.json")

        if report.config_echo.get("diagnostics", {}).get("figures", True):
            from . import figures

            with_traj = [(r.run_id, r.trajectory) for r in report.runs
                         if r.trajectory is not None]
            if with_traj:
                figures.render_profiles(with_traj, out / "profiles.png")
                written.append("profiles.png")
            if error_rows:
                figures.render_errors(
                    [(p[next(iter(p))], e) for _, p, e in error_rows],
                    next(iter(error_rows[0][1])),
                    out / "errors.png",
                )
                written.append("errors.png")

    manifest = {
        "experiment": report.kind,
        "seed": report.seed,
        "config": report.config_echo,
        "files": {
            name: {"sha256": _sha256(out / name), "bytes": (out / name).stat().st_size}
            for name in sorted(written)
        },
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="capflow",
        description="two-phase flow experiments across a rock-type jump",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write artifacts")
    run.add_argument("--config", required=True, help="JSON experiment description")
    run.add_argument("--out", help="output directory (overrides config output_dir)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--threads", type=int, default=1, help="parallel runs per sweep")
    check = sub.add_parser("check", help="validate a config and exit")
    check.add_argument("--config", required=True, help="JSON experiment description")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config) as handle:
            text = handle.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"config failure:\n{exc}", file=sys.stderr)
        return 2

    if args.command == "check":
        print("config ok")
        return 0

    if args.seed is not None:
        config = replace(config, seed=args.seed,
                         raw={**config.raw, "seed": args.seed})
    out_dir = args.out or config.output_dir
    if out_dir is None:
        print("no output directory: pass --out or set output_dir", file=sys.stderr)
        return 2

    report = run_experiment(config, threads=max(1, args.threads))
    try:
        write_outputs(report, out_dir)
    except OSError as exc:
        print(f"cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1

    for run in report.runs:
        status = f"FAILED: {run.error}" if run.error else "ok"
        err = "" if run.l1_error is None else f" value={run.l1_error!r}"
        print(f"{run.run_id} {run.params}{err} [{run.wall_clock:.2f}s] {status}")
    for key, value in sorted(report.verdicts.items()):
        print(f"verdict {key} = {value}")

    if report.failed_runs:
        return 1
    if not report.all_verdicts_pass:
        return 3
    return 0
