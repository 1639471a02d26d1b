"""Explicit marching for the capillarity-regularized two-medium problem.

Inside each medium the face flux is the Godunov flux minus eps times the
discrete gradient of the Kirchhoff transform.  The x = 0 face carries the
flux of a two-unknown interface system: a trace pair (ubar1, ubar2) with
(1 - ubar1) * ubar2 = 0 whose half-cell fluxes from both sides agree.
The matching flux value is unique even though the trace pair need not be.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .connections import _godunov_values, _pred_boundary, _scalar_poly
from .errors import (
    ConfigError,
    DomainError,
    GridMismatchError,
    RegimeError,
    StabilityError,
)
from .flux_model import MediumPair, _check_saturation
from .grid import Field, Grid, make_field
from .hyperbolic_solver import Trajectory, _merge_targets

__all__ = [
    "DiagnosticsRecord",
    "InterfaceState",
    "ParabolicConfig",
    "interface_solve",
    "parabolic_face_fluxes",
    "parabolic_solve",
    "parabolic_stable_dt",
    "parabolic_step",
    "smooth_initial_data",
    "write_interface_states_csv",
]


@dataclass(frozen=True)
class ParabolicConfig:
    """Marching parameters for one capillarity strength eps.

    interface_tol bounds how far the two half-cell fluxes at x = 0 may
    disagree after the interface solve.
    """

    eps: float
    cfl: float
    t_end: float
    interface_tol: float = 1e-12
    output_times: tuple = ()
    record_steps: bool = False

    def __post_init__(self):
        problems = []
        if not self.eps > 0.0:
            problems.append(f"eps must be positive, got {self.eps!r}")
        if not 0.0 < self.cfl <= 1.0:
            problems.append(f"cfl must lie in (0, 1], got {self.cfl!r}")
        if not self.t_end > 0.0:
            problems.append(f"t_end must be positive, got {self.t_end!r}")
        if not self.interface_tol > 0.0:
            problems.append(f"interface_tol must be positive, got {self.interface_tol!r}")
        object.__setattr__(self, "output_times", tuple(float(s) for s in self.output_times))
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class InterfaceState:
    """Interface trace pair and the flux both half cells agree on."""

    u_bar_1: float
    u_bar_2: float
    flux: float


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Run-wide bounds used by the vanishing-capillarity checks.

    flux_sup is the largest |face flux| seen over space and time and
    initial_flux_sup the same quantity at the initial data.  energy_1 and
    energy_2 accumulate eps * (d phi / dx)^2 * dx * dt over the interior
    faces of each subdomain; time_variation accumulates the L1 size of
    the per-step increments.  initial_data_smooth records whether the
    initial data satisfied the smoothed-data bounds (eps times the
    discrete gradient at most one, and vanishing next to the interface).
    """

    flux_sup: float
    initial_flux_sup: float
    energy_1: float
    energy_2: float
    time_variation: float
    initial_data_smooth: bool

    def to_dict(self) -> dict:
        return {
            "flux_sup": self.flux_sup,
            "initial_flux_sup": self.initial_flux_sup,
            "energy_1": self.energy_1,
            "energy_2": self.energy_2,
            "time_variation": self.time_variation,
            "initial_data_smooth": self.initial_data_smooth,
        }


def _check_regime(pair: MediumPair, eps: float) -> None:
    if not eps > 0.0:
        raise RegimeError(f"eps must be positive, got {eps!r}")
    if pair.oriented and eps >= pair.pressure_gap:
        raise RegimeError(
            f"eps={eps!r} is not below the capillary pressure gap "
            f"{pair.pressure_gap!r}; the graphs would intersect"
        )


def _godunov_scalar(fh, b: float, fmin: float, u: float, v: float) -> float:
    if u <= v:
        if u <= b <= v:
            return fmin
        fu, fv = fh(u), fh(v)
        return fu if fu < fv else fv
    fu, fv = fh(u), fh(v)
    return fu if fu > fv else fv


def _interface_solver(pair: MediumPair, eps: float, dx: float):
    # returns solve(u_left, u_right) -> (ubar1, ubar2, flux)
    f1, f2 = pair.f1, pair.f2
    f1h, f2h = _scalar_poly(f1.f_poly), _scalar_poly(f2.f_poly)
    p1h = _scalar_poly(pair.medium_1.phi)
    p2h = _scalar_poly(pair.medium_2.phi)
    b1, b2 = f1.b, f2.b
    fmin1, fmin2 = f1.f_min, f2.f_min
    coef = 2.0 * eps / dx

    def solve(u_left: float, u_right: float):
        p1_left = p1h(u_left)
        p2_right = p2h(u_right)

        def half_fluxes(s: float):
            ub1 = s if s < 1.0 else 1.0
            ub2 = s - 1.0 if s > 1.0 else 0.0
            upstream = _godunov_scalar(f1h, b1, fmin1, u_left, ub1)
            downstream = _godunov_scalar(f2h, b2, fmin2, ub2, u_right)
            flux_1 = upstream - coef * (p1h(ub1) - p1_left)
            flux_2 = downstream - coef * (p2_right - p2h(ub2))
            return flux_1, flux_2

        def settled(s: float) -> bool:
            flux_1, flux_2 = half_fluxes(s)
            return flux_1 - flux_2 <= 0.0

        if settled(0.0):
            s = 0.0
        else:
            s = _pred_boundary(settled, 0.0, 2.0)[1]
        flux_1, flux_2 = half_fluxes(s)
        ub1 = s if s < 1.0 else 1.0
        ub2 = s - 1.0 if s > 1.0 else 0.0
        return ub1, ub2, 0.5 * (flux_1 + flux_2)

    return solve


def interface_solve(
    pair: MediumPair, eps: float, dx: float, u_left: float, u_right: float
) -> InterfaceState:
    """Trace pair and shared flux of the half-cell matching system.

    The mismatch between the two half-cell fluxes is continuous and
    nonincreasing along the trace parametrization (s, 0) for s in [0, 1]
    then (1, s - 1) for s in [1, 2], and it brackets zero at the ends, so
    the leftmost sign change is found by bisection.
    """
    _check_regime(pair, eps)
    if not dx > 0.0:
        raise DomainError(f"dx must be positive, got {dx!r}")
    u_left = float(_check_saturation(u_left, "u_left"))
    u_right = float(_check_saturation(u_right, "u_right"))
    ub1, ub2, flux = _interface_solver(pair, eps, dx)(u_left, u_right)
    return InterfaceState(u_bar_1=ub1, u_bar_2=ub2, flux=flux)


def parabolic_stable_dt(pair: MediumPair, grid: Grid, eps: float, cfl: float = 1.0) -> float:
    """Step size keeping the combined advective-diffusive update monotone.

    The denominator sums the worst one-sided slopes of the two fluxes and
    the diffusive weight 4 eps max(phi') / dx, which keeps the step below
    both the advective bound cfl * dx / L and the diffusive bound
    dx^2 / (2 eps max(phi')).
    """
    sum_lip = max(pair.f1.lip_up, pair.f2.lip_up) + max(pair.f1.lip_down, pair.f2.lip_down)
    lam_max = max(pair.f1.lam_max, pair.f2.lam_max)
    return cfl * grid.dx / (sum_lip + 4.0 * eps * lam_max / grid.dx)


def _parabolic_face_writer(pair: MediumPair, grid: Grid, eps: float):
    # closure writing all n + 1 face fluxes; returns the interface state
    f1, f2 = pair.f1, pair.f2
    f1s, f2s = _scalar_poly(f1.f_poly), _scalar_poly(f2.f_poly)
    phi1, phi2 = pair.medium_1.phi, pair.medium_2.phi
    solve = _interface_solver(pair, eps, grid.dx)
    k, n = grid.interface_face, grid.n_cells
    ratio = eps / grid.dx

    def write(u: np.ndarray, out: np.ndarray):
        left, right = u[:k], u[k:]
        ph1 = phi1(left)
        ph2 = phi2(right)
        out[1:k] = _godunov_values(f1, left[:-1], left[1:]) - ratio * (ph1[1:] - ph1[:-1])
        out[k + 1 : n] = _godunov_values(f2, right[:-1], right[1:]) - ratio * (
            ph2[1:] - ph2[:-1]
        )
        out[0] = f1s(u[0])
        out[n] = f2s(u[n - 1])
        ub1, ub2, flux = solve(u[k - 1], u[k])
        out[k] = flux
        return ub1, ub2, flux

    return write


def parabolic_face_fluxes(pair: MediumPair, grid: Grid, values: np.ndarray, eps: float):
    """All n + 1 face fluxes and the interface state for one cell array."""
    _check_regime(pair, eps)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise GridMismatchError(
            f"expected {grid.n_cells} cell values, got shape {values.shape}"
        )
    out = np.empty(grid.n_cells + 1)
    ub1, ub2, flux = _parabolic_face_writer(pair, grid, eps)(values, out)
    return out, InterfaceState(u_bar_1=ub1, u_bar_2=ub2, flux=flux)


def parabolic_step(
    pair: MediumPair, grid: Grid, field: Field, config: ParabolicConfig, dt: float | None = None
) -> Field:
    """One conservative explicit step; dt defaults to the stable bound."""
    _check_regime(pair, config.eps)
    stable = parabolic_stable_dt(pair, grid, config.eps, config.cfl)
    if dt is None:
        dt = stable
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if dt > stable * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt!r} exceeds the stability bound {stable!r}")
    if field.n_cells != grid.n_cells:
        raise GridMismatchError(
            f"field has {field.n_cells} cells, grid has {grid.n_cells}"
        )
    fluxes, _ = parabolic_face_fluxes(pair, grid, field.values, config.eps)
    new = field.values - (dt / grid.dx) * (fluxes[1:] - fluxes[:-1])
    return make_field(new, field.time + dt, grid)


def smooth_initial_data(u0, eps: float, grid: Grid) -> Field:
    """Compactly supported start data compatible with capillarity eps.

    Truncates u0 to alpha < |x| < 1/alpha and applies a discrete
    triangular mollifier of radius alpha, with alpha halved from 1 as
    far as the bound eps * max |discrete gradient| <= 1 allows (and
    doubled when even alpha = 1 fails it).  The result vanishes near
    x = 0, has compact support, and adds at most 4 to the variation.
    """
    if not eps > 0.0:
        raise RegimeError(f"eps must be positive, got {eps!r}")
    if isinstance(u0, Field):
        if u0.n_cells != grid.n_cells:
            raise GridMismatchError(
                f"u0 has {u0.n_cells} cells, grid has {grid.n_cells}"
            )
        base = u0.values
    else:
        base = _check_saturation(np.asarray(u0(grid.cell_centers), dtype=float), "u0")
        if base.shape != (grid.n_cells,):
            raise GridMismatchError(
                f"u0 evaluator returned shape {base.shape}, expected ({grid.n_cells},)"
            )
    centers = grid.cell_centers

    def candidate(alpha: float) -> np.ndarray:
        inside = (np.abs(centers) > alpha) & (np.abs(centers) < 1.0 / alpha)
        cut = np.where(inside, base, 0.0)
        half = int(alpha / (2.0 * grid.dx))
        if half < 1:
            return cut
        offsets = np.arange(-half, half + 1)
        weights = (half + 1.0 - np.abs(offsets)) / (half + 1.0) ** 2
        padded = np.pad(cut, half, mode="edge")
        return np.convolve(padded, weights, mode="valid")

    def bounded(values: np.ndarray) -> bool:
        if values.size < 2:
            return True
        return eps * float(np.max(np.abs(np.diff(values)))) / grid.dx <= 1.0

    alpha = 1.0
    while not bounded(candidate(alpha)):
        alpha *= 2.0
        if alpha > 2.0 ** 40:
            raise RegimeError(f"no truncation radius satisfies the eps={eps!r} bound")
    best = candidate(alpha)
    while alpha > grid.dx:
        trial = candidate(alpha / 2.0)
        if not bounded(trial):
            break
        alpha /= 2.0
        best = trial
    return make_field(np.clip(best, 0.0, 1.0), 0.0, grid)


def parabolic_solve(
    pair: MediumPair, grid: Grid, u0: Field, config: ParabolicConfig
):
    """March u0 to config.t_end; returns (Trajectory, DiagnosticsRecord).

    The trajectory's interface_states holds one (t, ubar1, ubar2, flux)
    row per step, timestamped at the start of the step.
    """
    _check_regime(pair, config.eps)
    if u0.n_cells != grid.n_cells:
        raise GridMismatchError(f"u0 has {u0.n_cells} cells, grid has {grid.n_cells}")
    targets = _merge_targets(u0.time, config.t_end, config.output_times)
    dt_nom = parabolic_stable_dt(pair, grid, config.eps, config.cfl)
    write_faces = _parabolic_face_writer(pair, grid, config.eps)
    k, n, dx = grid.interface_face, grid.n_cells, grid.dx
    phi1, phi2 = pair.medium_1.phi, pair.medium_2.phi

    grad0 = 0.0 if n < 2 else float(np.max(np.abs(np.diff(u0.values)))) / dx
    smooth_ok = (
        config.eps * grad0 <= 1.0 + 1e-9
        and u0.values[k - 1] == 0.0
        and u0.values[k] == 0.0
    )

    t = float(u0.time)
    u = u0.values.astype(float).copy()
    fluxes = np.empty(n + 1)
    fields = [u0]
    steps = [u0] if config.record_steps else None
    dts = [] if config.record_steps else None
    interface_states = []
    left_int = 0.0
    right_int = 0.0
    flux_sup = 0.0
    initial_sup = None
    energy_1 = 0.0
    energy_2 = 0.0
    time_variation = 0.0
    scale = max(1.0, abs(config.t_end))

    for target in targets:
        while target - t > 1e-12 * scale:
            rem = target - t
            dt = dt_nom if dt_nom < rem else rem
            ub1, ub2, q = write_faces(u, fluxes)
            interface_states.append((t, ub1, ub2, q))
            step_sup = float(np.max(np.abs(fluxes)))
            if initial_sup is None:
                initial_sup = step_sup
            if step_sup > flux_sup:
                flux_sup = step_sup
            grads_1 = (phi1(u[1:k]) - phi1(u[: k - 1])) / dx
            grads_2 = (phi2(u[k + 1 :]) - phi2(u[k:-1])) / dx
            energy_1 += config.eps * float(np.sum(grads_1**2)) * dx * dt
            energy_2 += config.eps * float(np.sum(grads_2**2)) * dx * dt
            increment = (dt / dx) * (fluxes[1:] - fluxes[:-1])
            time_variation += float(np.sum(np.abs(increment))) * dx
            u -= increment
            left_int += fluxes[0] * dt
            right_int += fluxes[-1] * dt
            t += dt
            if config.record_steps:
                steps.append(make_field(u.copy(), t, grid))
                dts.append(dt)
        t = target
        fields.append(make_field(u.copy(), t, grid))

    trajectory = Trajectory(
        grid=grid,
        fields=tuple(fields),
        steps=None if steps is None else tuple(steps),
        dts=None if dts is None else tuple(dts),
        left_flux_integral=left_int,
        right_flux_integral=right_int,
        interface_states=tuple(interface_states),
        eps=config.eps,
    )
    record = DiagnosticsRecord(
        flux_sup=flux_sup,
        initial_flux_sup=0.0 if initial_sup is None else initial_sup,
        energy_1=energy_1,
        energy_2=energy_2,
        time_variation=time_variation,
        initial_data_smooth=smooth_ok,
    )
    return trajectory, record


def write_interface_states_csv(traj: Trajectory, path) -> None:
    """Per-step interface rows: t, u_bar_1, u_bar_2, flux."""
    if traj.interface_states is None:
        raise DomainError("trajectory has no interface states to write")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "u_bar_1", "u_bar_2", "flux"])
        for t, ub1, ub2, q in traj.interface_states:
            writer.writerow([repr(float(t)), repr(float(ub1)), repr(float(ub2)), repr(float(q))])
