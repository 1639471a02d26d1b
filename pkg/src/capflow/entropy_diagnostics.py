"""Entropy and conservation post-processing for recorded trajectories.

Every check recomputes fluxes from the recorded states, so a trajectory
must carry its per-step history (record_steps=True) for the residual
scans.  Sharp and capillary runs share the machinery: a trajectory with
eps set gets the diffusive part added to its entropy fluxes and the
interface flux replaced by the half-cell matching value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .connections import OptimalConnection, _godunov_values, _scalar_poly, optimal_connection
from .errors import DomainError, GridMismatchError, LevelError
from .flux_model import FluxSpec, MediumPair, _check_saturation
from .grid import Field, Grid
from .hyperbolic_solver import Trajectory
from .parabolic_solver import _interface_solver

__all__ = [
    "EntropyReport",
    "adapted_cell_residuals",
    "adapted_entropy_residual",
    "build_entropy_report",
    "kruzkov_cell_residuals",
    "kruzkov_flux",
    "l1_comparison",
    "mass_conservation_check",
    "undercompressive_check",
    "write_entropy_report_json",
]

DEFAULT_KAPPA_SET = tuple(np.linspace(0.0, 1.0, 33))


def kruzkov_flux(flux: FluxSpec, a, b):
    """Entropy flux sign(a - b) * (f(a) - f(b)); symmetric, zero on the diagonal."""
    a = _check_saturation(a, "a")
    b = _check_saturation(b, "b")
    scalar = np.isscalar(a) and np.isscalar(b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.sign(a - b) * (flux.f_poly(a) - flux.f_poly(b))
    return float(out) if scalar else out


def _require_steps(traj: Trajectory):
    if traj.steps is None or traj.dts is None or len(traj.steps) < 2:
        raise DomainError(
            "trajectory lacks a per-step history; rerun with record_steps=True"
        )


def _side_theta(flux, phi, side_values, side_kappa, ratio):
    # entropy flux differences through the faces interior to one side
    up = np.maximum(side_values, side_kappa)
    dn = np.minimum(side_values, side_kappa)
    theta = _godunov_values(flux, up[:-1], up[1:]) - _godunov_values(flux, dn[:-1], dn[1:])
    if ratio:
        ph_up = phi(up)
        ph_dn = phi(dn)
        theta -= ratio * ((ph_up[1:] - ph_up[:-1]) - (ph_dn[1:] - ph_dn[:-1]))
    return theta, up, dn


def _theta_all_faces(pair: MediumPair, grid: Grid, u: np.ndarray, kappa: np.ndarray, eps):
    # full face array of entropy flux differences, interface included
    k, n = grid.interface_face, grid.n_cells
    f1, f2 = pair.f1, pair.f2
    ratio = 0.0 if eps is None else eps / grid.dx
    theta = np.empty(n + 1)
    t1, up1, dn1 = _side_theta(f1, pair.medium_1.phi, u[:k], kappa[:k], ratio)
    t2, up2, dn2 = _side_theta(f2, pair.medium_2.phi, u[k:], kappa[k:], ratio)
    theta[1:k] = t1
    theta[k + 1 : n] = t2
    f1s, f2s = _scalar_poly(f1.f_poly), _scalar_poly(f2.f_poly)
    theta[0] = f1s(up1[0]) - f1s(dn1[0])
    theta[n] = f2s(up2[-1]) - f2s(dn2[-1])
    if eps is None:
        b1, b2 = f1.b, f2.b

        def coupling(a, c):
            left = f1s(a if a > b1 else b1)
            right = f2s(c if c < b2 else b2)
            return left if left > right else right

        theta[k] = coupling(up1[-1], up2[0]) - coupling(dn1[-1], dn2[0])
    else:
        solve = _interface_solver(pair, eps, grid.dx)
        theta[k] = solve(up1[-1], up2[0])[2] - solve(dn1[-1], dn2[0])[2]
    return theta


def kruzkov_cell_residuals(traj: Trajectory, pair: MediumPair, kappa_set=None) -> float:
    """Worst single-medium entropy residual over cells, steps, and kappa.

    For each constant kappa and each cell whose faces both lie strictly
    inside one medium, the scheme must satisfy
    |u'[j] - kappa| <= |u[j] - kappa| - (dt/dx) * (theta[j+1] - theta[j]);
    the returned value is the largest violation (positive means broken).
    """
    return _kruzkov_scan(traj, pair, kappa_set)[0]


def _kruzkov_scan(traj: Trajectory, pair: MediumPair, kappa_set=None):
    _require_steps(traj)
    if kappa_set is None:
        kappa_set = DEFAULT_KAPPA_SET
    grid = traj.grid
    k, n, dx = grid.interface_face, grid.n_cells, grid.dx
    centers = grid.cell_centers
    f1, f2 = pair.f1, pair.f2
    phi1, phi2 = pair.medium_1.phi, pair.medium_2.phi
    ratio = 0.0 if traj.eps is None else traj.eps / dx
    worst = -np.inf
    location = None
    for i, dt in enumerate(traj.dts):
        u = traj.steps[i].values
        w = traj.steps[i + 1].values
        mu = dt / dx
        t = traj.steps[i].time
        for kappa in kappa_set:
            for flux, phi, lo, hi in ((f1, phi1, 0, k), (f2, phi2, k, n)):
                theta, _, _ = _side_theta(flux, phi, u[lo:hi], kappa, ratio)
                cells = slice(lo + 1, hi - 1)
                res = (
                    np.abs(w[cells] - kappa)
                    - np.abs(u[cells] - kappa)
                    + mu * (theta[1:] - theta[:-1])
                )
                if res.size == 0:
                    continue
                j = int(np.argmax(res))
                if res[j] > worst:
                    worst = float(res[j])
                    location = (t, float(centers[lo + 1 + j]), float(kappa))
    return worst, location


def _comparison_values(pair: MediumPair, grid: Grid, connection) -> np.ndarray:
    if isinstance(connection, Field):
        if connection.n_cells != grid.n_cells:
            raise GridMismatchError(
                f"comparison field has {connection.n_cells} cells, grid has {grid.n_cells}"
            )
        return connection.values
    if isinstance(connection, OptimalConnection):
        left, right = connection.left_value, connection.right_value
    else:
        left, right = connection
    left = float(_check_saturation(left, "left connection value"))
    right = float(_check_saturation(right, "right connection value"))
    gap = abs(pair.f1.f(left) - pair.f2.f(right))
    if gap > 1e-9 * max(1.0, abs(pair.q)):
        raise LevelError(
            f"connection values ({left!r}, {right!r}) carry mismatched flux "
            f"levels (gap {gap!r})"
        )
    values = np.empty(grid.n_cells)
    values[: grid.interface_face] = left
    values[grid.interface_face :] = right
    return values


def adapted_cell_residuals(traj: Trajectory, pair: MediumPair, connection) -> np.ndarray:
    """Per-step, per-cell entropy residuals against a two-sided state.

    connection is a (left, right) pair with matching flux levels, an
    OptimalConnection, or a whole comparison Field (for capillary runs,
    the matching steady profile).  Row i holds
    |u[i+1] - K| - |u[i] - K| + (dt/dx) * d theta for step i; entries
    should be <= 0 up to roundoff whenever K is a steady state.
    """
    _require_steps(traj)
    grid = traj.grid
    kappa = _comparison_values(pair, grid, connection)
    out = np.empty((len(traj.dts), grid.n_cells))
    for i, dt in enumerate(traj.dts):
        u = traj.steps[i].values
        w = traj.steps[i + 1].values
        theta = _theta_all_faces(pair, grid, u, kappa, traj.eps)
        out[i] = (
            np.abs(w - kappa) - np.abs(u - kappa) + (dt / grid.dx) * (theta[1:] - theta[:-1])
        )
    return out


def _hat_family(grid: Grid, times):
    # tensor-product hats: 5 spatial widths at 3 offsets around x = 0,
    # crossed with a few temporal hats over the recorded span
    span = 0.9 * min(-grid.x_min, grid.x_max)
    hats = []
    spatial = []
    for i in range(5):
        width = span / 2.0**i
        for center in (-width / 2.0, 0.0, width / 2.0):
            spatial.append((center, width))
    t0, t1 = times[0], times[-1]
    duration = max(t1 - t0, 1e-300)
    temporal = [(t0 + duration / 2.0, duration)]
    for frac in (0.25, 0.75):
        temporal.append((t0 + frac * duration, duration / 2.0))
    for xc, xw in spatial:
        for tc, tw in temporal:
            hats.append((xc, xw, tc, tw))
    return hats


def _hat_weights(grid: Grid, times, hat):
    xc, xw, tc, tw = hat
    space = np.maximum(0.0, 1.0 - np.abs(grid.cell_centers - xc) / xw)
    time = np.maximum(0.0, 1.0 - np.abs(np.asarray(times) - tc) / tw)
    return space, time


def adapted_entropy_residual(traj: Trajectory, pair: MediumPair, connection, hats=None) -> float:
    """Most negative weighted residual -sum r * psi * dx over a hat family.

    psi ranges over nonnegative tensor-product hats in space and time
    (hats overrides the default family with (x_center, x_width,
    t_center, t_width) tuples).  Nonnegative output means every tested
    hat saw entropy dissipation of the connection at least to roundoff.
    """
    residuals = adapted_cell_residuals(traj, pair, connection)
    times = [step.time for step in traj.steps[:-1]]
    if hats is None:
        hats = _hat_family(traj.grid, times)
    return _adapted_worst(traj, residuals, times, hats)[0]


def _adapted_worst(traj: Trajectory, residuals, times, hats):
    worst = np.inf
    location = None
    for hat in hats:
        space, time = _hat_weights(traj.grid, times, hat)
        value = -traj.grid.dx * float(time @ (residuals @ space))
        if value < worst:
            worst = value
            location = tuple(float(v) for v in hat)
    return worst, location


def undercompressive_check(pair: MediumPair, u_left: float, u_right: float) -> float:
    """Clipped speed product min(0, f1'(u_left)) * max(0, f2'(u_right)).

    Zero (within tolerance) means no characteristic family impinges on
    the interface from either side: the trace pair is undercompressive
    or outgoing.  Slopes come from central differences with h = 1e-6.
    """
    u_left = float(_check_saturation(u_left, "u_left"))
    u_right = float(_check_saturation(u_right, "u_right"))
    h = 1e-6
    d1 = (pair.f1.f_poly(u_left + h) - pair.f1.f_poly(u_left - h)) / (2.0 * h)
    d2 = (pair.f2.f_poly(u_right + h) - pair.f2.f_poly(u_right - h)) / (2.0 * h)
    return min(0.0, float(d1)) * max(0.0, float(d2))


def mass_conservation_check(traj: Trajectory, pair: MediumPair) -> float:
    """Worst mismatch between stored mass change and boundary outflow.

    Uses the integrals accumulated during the run and, when a step
    history exists, re-derives them from the recorded boundary cells as
    an independent route.
    """
    dx = traj.grid.dx
    mass_0 = float(np.sum(traj.fields[0].values)) * dx
    mass_1 = float(np.sum(traj.fields[-1].values)) * dx
    defect = abs(mass_1 - mass_0 - (traj.left_flux_integral - traj.right_flux_integral))
    if traj.steps is not None and traj.dts is not None:
        f1s = _scalar_poly(pair.f1.f_poly)
        f2s = _scalar_poly(pair.f2.f_poly)
        left = 0.0
        right = 0.0
        for step, dt in zip(traj.steps[:-1], traj.dts):
            left += f1s(step.values[0]) * dt
            right += f2s(step.values[-1]) * dt
        defect = max(defect, abs(mass_1 - mass_0 - (left - right)))
    return float(defect)


def l1_comparison(traj_u: Trajectory, traj_v: Trajectory, radius: float, lip_bound: float) -> float:
    """Worst domain-of-dependence slack of the one-sided L1 orderings.

    For every recorded output time t and both signs, computes
    sum over |x| <= radius of (u - v)^sign * dx at time t minus the same
    sum at time zero over the inflated ball |x| <= radius +
    lip_bound * (t - t0).  Nonpositive (up to roundoff) means the
    contraction property holds with finite propagation speed lip_bound.
    """
    if not radius > 0.0:
        raise DomainError(f"radius must be positive, got {radius!r}")
    if not lip_bound >= 0.0:
        raise DomainError(f"lip_bound must be nonnegative, got {lip_bound!r}")
    if traj_u.grid != traj_v.grid:
        raise GridMismatchError("trajectories live on different grids")
    if len(traj_u.fields) != len(traj_v.fields):
        raise GridMismatchError("trajectories record different output times")
    centers = traj_u.grid.cell_centers
    dx = traj_u.grid.dx
    t0 = traj_u.fields[0].time
    d0 = traj_u.fields[0].values - traj_v.fields[0].values
    worst = -np.inf
    for fu, fv in zip(traj_u.fields, traj_v.fields):
        if abs(fu.time - fv.time) > 1e-12 * max(1.0, abs(fu.time)):
            raise GridMismatchError(
                f"output times differ: {fu.time!r} vs {fv.time!r}"
            )
        ball = np.abs(centers) <= radius + 1e-12
        cone = np.abs(centers) <= radius + lip_bound * (fu.time - t0) + 1e-12
        diff = fu.values - fv.values
        for sign in (1.0, -1.0):
            now = float(np.sum(np.maximum(sign * diff[ball], 0.0))) * dx
            then = float(np.sum(np.maximum(sign * d0[cone], 0.0))) * dx
            worst = max(worst, now - then)
    return worst


@dataclass(frozen=True)
class EntropyReport:
    """Bundle of entropy and conservation verdicts for one trajectory.

    Residual locations are (t, x_center, kappa) for the single-medium
    scan and the (x_center, x_width, t_center, t_width) hat for the
    adapted one.  mass_scale is the reference magnitude the mass defect
    tolerance multiplies.
    """

    worst_kruzkov_residual: float
    kruzkov_location: tuple | None
    worst_adapted_residual: float
    adapted_location: tuple | None
    undercompressivity_product: float
    final_traces: tuple
    mass_defect: float
    mass_scale: float
    kruzkov_pass: bool
    adapted_pass: bool
    undercompressive_pass: bool
    mass_pass: bool

    @property
    def all_pass(self) -> bool:
        return (
            self.kruzkov_pass
            and self.adapted_pass
            and self.undercompressive_pass
            and self.mass_pass
        )

    def to_dict(self) -> dict:
        return {
            "worst_kruzkov_residual": self.worst_kruzkov_residual,
            "kruzkov_location": None
            if self.kruzkov_location is None
            else list(self.kruzkov_location),
            "worst_adapted_residual": self.worst_adapted_residual,
            "adapted_location": None
            if self.adapted_location is None
            else list(self.adapted_location),
            "undercompressivity_product": self.undercompressivity_product,
            "final_traces": list(self.final_traces),
            "mass_defect": self.mass_defect,
            "mass_scale": self.mass_scale,
            "kruzkov_pass": self.kruzkov_pass,
            "adapted_pass": self.adapted_pass,
            "undercompressive_pass": self.undercompressive_pass,
            "mass_pass": self.mass_pass,
            "all_pass": self.all_pass,
        }


def build_entropy_report(
    traj: Trajectory,
    pair: MediumPair,
    connection=None,
    kappa_set=None,
    kruzkov_tol: float = 1e-12,
    adapted_tol: float = 1e-8,
    product_tol: float = 1e-6,
    mass_tol: float = 1e-12,
) -> EntropyReport:
    """Run every entropy check on one recorded trajectory.

    connection defaults to the pair's optimal one.  Passing thresholds:
    kruzkov residual at most kruzkov_tol, adapted residual at least
    -adapted_tol, |clipped speed product| at most product_tol, and mass
    defect at most mass_tol times max(1, initial mass).
    """
    if connection is None:
        connection = optimal_connection(pair)
    worst_kruzkov, kruzkov_loc = _kruzkov_scan(traj, pair, kappa_set)
    residuals = adapted_cell_residuals(traj, pair, connection)
    times = [step.time for step in traj.steps[:-1]]
    worst_adapted, adapted_loc = _adapted_worst(
        traj, residuals, times, _hat_family(traj.grid, times)
    )
    k = traj.grid.interface_face
    final = traj.fields[-1].values
    traces = (float(final[k - 1]), float(final[k]))
    product = undercompressive_check(pair, traces[0], traces[1])
    defect = mass_conservation_check(traj, pair)
    scale = max(1.0, abs(float(np.sum(traj.fields[0].values)) * traj.grid.dx))
    return EntropyReport(
        worst_kruzkov_residual=worst_kruzkov,
        kruzkov_location=kruzkov_loc,
        worst_adapted_residual=worst_adapted,
        adapted_location=adapted_loc,
        undercompressivity_product=product,
        final_traces=traces,
        mass_defect=defect,
        mass_scale=scale,
        kruzkov_pass=bool(worst_kruzkov <= kruzkov_tol),
        adapted_pass=bool(worst_adapted >= -adapted_tol),
        undercompressive_pass=bool(abs(product) <= product_tol),
        mass_pass=bool(defect <= mass_tol * scale),
    )


def write_entropy_report_json(report: EntropyReport, path) -> None:
    """Serialize one report as indented JSON."""
    with open(path, "w") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
