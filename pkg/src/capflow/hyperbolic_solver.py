"""First-order finite-volume marching for the two-medium conservation law.

Faces interior to each medium carry the exact-Riemann (Godunov) flux of
that medium; the x = 0 face carries the max coupling flux of the adjacent
cell averages.  Boundary faces copy the adjacent cell (outflow closure),
so callers must size the domain so that no wave of interest reaches the
edges before t_end.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .connections import _godunov_values, _scalar_poly
from .errors import ConfigError, DomainError, GridMismatchError, StabilityError
from .flux_model import FluxSpec, MediumPair, _check_saturation
from .grid import Field, Grid, make_field, make_grid

__all__ = [
    "Field",
    "Grid",
    "HyperbolicConfig",
    "Trajectory",
    "exact_riemann_single_medium",
    "hyperbolic_face_fluxes",
    "hyperbolic_solve",
    "hyperbolic_step",
    "interface_traces",
    "make_field",
    "make_grid",
    "max_stable_dt",
    "riemann_field",
    "write_trajectory_csv",
]

_TIME_TOL = 1e-12


@dataclass(frozen=True)
class HyperbolicConfig:
    """Marching parameters: time step fraction and final time.

    output_times asks for extra recorded fields strictly between the
    initial time and t_end; record_steps keeps every step (and its dt)
    for entropy post-processing.
    """

    cfl: float
    t_end: float
    output_times: tuple = ()
    record_steps: bool = False

    def __post_init__(self):
        problems = []
        if not 0.0 < self.cfl <= 1.0:
            problems.append(f"cfl must lie in (0, 1], got {self.cfl!r}")
        if not self.t_end > 0.0:
            problems.append(f"t_end must be positive, got {self.t_end!r}")
        object.__setattr__(self, "output_times", tuple(float(s) for s in self.output_times))
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: fields at the requested output times.

    fields always starts at the initial field and ends at t_end.  When
    steps is not None it holds every marching state including the initial
    one, and dts[i] is the step from steps[i] to steps[i + 1].  The
    boundary integrals accumulate flux * dt through the two outflow
    faces, so total mass change equals left_flux_integral minus
    right_flux_integral up to roundoff.  interface_states and eps are
    filled by the capillary solver only; eps None marks a sharp run.
    """

    grid: Grid
    fields: tuple
    steps: tuple | None
    dts: tuple | None
    left_flux_integral: float
    right_flux_integral: float
    interface_states: tuple | None = None
    eps: float | None = None

    @property
    def times(self) -> tuple:
        return tuple(f.time for f in self.fields)

    @property
    def final(self) -> Field:
        return self.fields[-1]


def max_stable_dt(pair: MediumPair, grid: Grid, cfl: float = 1.0) -> float:
    """Largest stable step: cfl * dx over the larger Lipschitz constant."""
    return cfl * grid.dx / max(pair.f1.lip, pair.f2.lip)


def _face_flux_writer(pair: MediumPair, grid: Grid):
    # closure writing all n + 1 face fluxes into a preallocated buffer
    f1, f2 = pair.f1, pair.f2
    f1s, f2s = _scalar_poly(f1.f_poly), _scalar_poly(f2.f_poly)
    b1, b2 = f1.b, f2.b
    k, n = grid.interface_face, grid.n_cells

    def write(u: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[1:k] = _godunov_values(f1, u[: k - 1], u[1:k])
        out[k + 1 : n] = _godunov_values(f2, u[k : n - 1], u[k + 1 :])
        out[0] = f1s(u[0])
        out[n] = f2s(u[n - 1])
        a, c = u[k - 1], u[k]
        g1 = f1s(a if a > b1 else b1)
        g2 = f2s(c if c < b2 else b2)
        out[k] = g1 if g1 > g2 else g2
        return out

    return write


def hyperbolic_face_fluxes(pair: MediumPair, grid: Grid, values: np.ndarray) -> np.ndarray:
    """All n + 1 face fluxes for one cell-average array.

    Index k is the flux through face k; grid.interface_face carries the
    coupling flux max(G1(u_left, 1), G2(0, u_right)) and the outer faces
    copy the boundary cells.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise GridMismatchError(
            f"expected {grid.n_cells} cell values, got shape {values.shape}"
        )
    out = np.empty(grid.n_cells + 1)
    return _face_flux_writer(pair, grid)(values, out)


def hyperbolic_step(pair: MediumPair, grid: Grid, field: Field, dt: float) -> Field:
    """One conservative explicit step of size dt.

    dt must respect the grid's stability bound dx / max(L1, L2); larger
    steps raise StabilityError.
    """
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if dt > max_stable_dt(pair, grid) * (1.0 + 1e-12):
        raise StabilityError(
            f"dt={dt!r} exceeds the stability bound {max_stable_dt(pair, grid)!r}"
        )
    if field.n_cells != grid.n_cells:
        raise GridMismatchError(
            f"field has {field.n_cells} cells, grid has {grid.n_cells}"
        )
    fluxes = hyperbolic_face_fluxes(pair, grid, field.values)
    new = field.values - (dt / grid.dx) * (fluxes[1:] - fluxes[:-1])
    return make_field(new, field.time + dt, grid)


def _merge_targets(t0: float, t_end: float, output_times) -> list:
    if not t_end > t0 + _TIME_TOL * max(1.0, abs(t_end)):
        raise DomainError(f"t_end={t_end!r} must exceed the initial time {t0!r}")
    tol = _TIME_TOL * max(1.0, abs(t_end))
    targets = []
    problems = []
    for s in sorted(set(output_times)):
        if s <= t0 + tol:
            if s < t0 - tol:
                problems.append(f"output time {s!r} precedes the initial time {t0!r}")
            continue
        if s > t_end + tol:
            problems.append(f"output time {s!r} exceeds t_end={t_end!r}")
            continue
        if not targets or s > targets[-1] + tol:
            targets.append(s)
    if problems:
        raise ConfigError(problems)
    if not targets or targets[-1] < t_end - tol:
        targets.append(t_end)
    else:
        targets[-1] = t_end
    return targets


def hyperbolic_solve(
    pair: MediumPair, grid: Grid, u0: Field, config: HyperbolicConfig
) -> Trajectory:
    """March u0 to config.t_end and record the requested output times."""
    if u0.n_cells != grid.n_cells:
        raise GridMismatchError(f"u0 has {u0.n_cells} cells, grid has {grid.n_cells}")
    targets = _merge_targets(u0.time, config.t_end, config.output_times)
    dt_nom = max_stable_dt(pair, grid, config.cfl)
    write_faces = _face_flux_writer(pair, grid)

    t = float(u0.time)
    u = u0.values.astype(float).copy()
    fluxes = np.empty(grid.n_cells + 1)
    fields = [u0]
    steps = [u0] if config.record_steps else None
    dts = [] if config.record_steps else None
    left_int = 0.0
    right_int = 0.0
    scale = max(1.0, abs(config.t_end))

    for target in targets:
        while target - t > _TIME_TOL * scale:
            rem = target - t
            dt = dt_nom if dt_nom < rem else rem
            write_faces(u, fluxes)
            u -= (dt / grid.dx) * (fluxes[1:] - fluxes[:-1])
            left_int += fluxes[0] * dt
            right_int += fluxes[-1] * dt
            t += dt
            if config.record_steps:
                steps.append(make_field(u.copy(), t, grid))
                dts.append(dt)
        t = target
        fields.append(make_field(u.copy(), t, grid))

    return Trajectory(
        grid=grid,
        fields=tuple(fields),
        steps=None if steps is None else tuple(steps),
        dts=None if dts is None else tuple(dts),
        left_flux_integral=left_int,
        right_flux_integral=right_int,
    )


def riemann_field(grid: Grid, u_left: float, u_right: float, time: float = 0.0) -> Field:
    """Piecewise-constant initial data jumping at x = 0."""
    u_left = _check_saturation(u_left, "u_left")
    u_right = _check_saturation(u_right, "u_right")
    values = np.where(grid.cell_centers < 0.0, u_left, u_right)
    return make_field(values, time, grid)


def interface_traces(grid: Grid, field: Field) -> tuple:
    """Cell averages immediately left and right of the x = 0 face."""
    if field.n_cells != grid.n_cells:
        raise GridMismatchError(
            f"field has {field.n_cells} cells, grid has {grid.n_cells}"
        )
    k = grid.interface_face
    return float(field.values[k - 1]), float(field.values[k])


def _effective_degree(coef: np.ndarray) -> int:
    deg = len(coef) - 1
    while deg > 0 and coef[deg] == 0.0:
        deg -= 1
    return deg


def _envelope_waves(flux: FluxSpec, u_left: float, u_right: float):
    # hull of the graph between the two states on a 2001-point grid;
    # vertices are ordered from u_left to u_right so segment slopes are
    # the wave speeds in nondecreasing order
    lo, hi = min(u_left, u_right), max(u_left, u_right)
    us = np.linspace(lo, hi, 2001)
    fs = flux.f_poly(us)
    lower = u_left <= u_right
    hull_u, hull_f = [], []
    for x, y in zip(us, fs):
        while len(hull_u) >= 2:
            cross = (hull_u[-1] - hull_u[-2]) * (y - hull_f[-2]) - (
                hull_f[-1] - hull_f[-2]
            ) * (x - hull_u[-2])
            if (cross <= 0.0) if lower else (cross >= 0.0):
                hull_u.pop()
                hull_f.pop()
            else:
                break
        hull_u.append(x)
        hull_f.append(y)
    verts_u = np.asarray(hull_u)
    verts_f = np.asarray(hull_f)
    if not lower:
        verts_u = verts_u[::-1]
        verts_f = verts_f[::-1]
    speeds = np.diff(verts_f) / np.diff(verts_u)
    return verts_u, speeds


def exact_riemann_single_medium(flux: FluxSpec, u_left: float, u_right: float, xi):
    """Entropy solution of one-medium Riemann data, evaluated at xi = x / t.

    Quadratic and affine fluxes use the closed-form wave; anything else
    falls back to the flux envelope between the states, built as a
    monotone-chain hull and evaluated as a staircase in xi.
    """
    u_left = _check_saturation(u_left, "u_left")
    u_right = _check_saturation(u_right, "u_right")
    scalar = np.isscalar(xi)
    xi = np.asarray(xi, dtype=float)
    if u_left == u_right:
        out = np.full_like(xi, u_left)
        return float(out) if scalar else out

    coef = flux.f_poly.coef
    deg = _effective_degree(coef)
    if deg <= 2:
        a1 = coef[1] if len(coef) > 1 else 0.0
        a2 = coef[2] if len(coef) > 2 else 0.0
        if a2 == 0.0:
            out = np.where(xi < a1, u_left, u_right)
        elif (a2 > 0.0) == (u_left > u_right):
            speed = (flux.f(u_left) - flux.f(u_right)) / (u_left - u_right)
            out = np.where(xi < speed, u_left, u_right)
        else:
            fan = (xi - a1) / (2.0 * a2)
            out = np.clip(fan, min(u_left, u_right), max(u_left, u_right))
    else:
        verts, speeds = _envelope_waves(flux, u_left, u_right)
        out = verts[np.searchsorted(speeds, xi, side="right")]
    return float(out) if scalar else out


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Long-format dump of all recorded output fields: t, x_center, u."""
    centers = traj.grid.cell_centers
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "x_center", "u"])
        for field in traj.fields:
            t = repr(float(field.time))
            for x, u in zip(centers, field.values):
                writer.writerow([t, repr(float(x)), repr(float(u))])
