"""Interface couplings for a two-medium unimodal flux pair.

A connection fixes the flux level z = f_j(kappa) carried across x = 0 in
steady state.  Each medium meets that level at up to two saturations (one
per monotone branch of f), and the admissible steady limits pair one
saturation from each side.  The optimal connection is the one whose level
is the larger of the two flux minima; it is the only choice that never
creates an undercompressive standing wave.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LevelError, VariantError, RegimeError
from .flux_model import FluxSpec, Medium, MediumPair, _check_saturation
from .grid import Grid, Field, make_field

__all__ = [
    "CASE_RIGHT_MINIMIZER",
    "CASE_LEFT_MINIMIZER",
    "VARIANTS",
    "ConnectionPair",
    "OptimalConnection",
    "SteadyProfile",
    "ReachableLimit",
    "godunov_flux",
    "interface_flux",
    "in_attainable_set",
    "connect_level",
    "make_connection",
    "optimal_connection",
    "steady_profile",
    "reachable_limits",
    "build_kappa_eps",
    "write_steady_profile_csv",
    "write_optimal_connection_csv",
]

CASE_RIGHT_MINIMIZER = "right_minimizer"
CASE_LEFT_MINIMIZER = "left_minimizer"

# Steady-limit variants, named by which branch root each side takes:
#   over_under  = (over on the left, under on the right)
#   over_over   = (over, over)
#   under_under = (under, under)
VARIANTS = ("over_under", "over_over", "under_under")

_LEVEL_TOL = 1e-12
_BISECT_ITERS = 90


@dataclass(frozen=True)
class ConnectionPair:
    """Level z = f_j(kappa) with the opposite side's branch roots.

    under/over are the smallest/largest saturations at which the opposite
    medium's flux equals z.
    """

    side: int
    kappa: float
    z: float
    under: float
    over: float


@dataclass(frozen=True)
class OptimalConnection:
    left_value: float
    right_value: float
    case_tag: str


@dataclass(frozen=True)
class SteadyProfile:
    """Sampled standing-wave profile on one side of the interface.

    samples is an (n, 2) array of (xi, y) rows; y(0) is exactly 0 or 1 and
    y approaches `limit` monotonically.  tail_gap = |y(xi_max) - limit|.
    """

    samples: np.ndarray
    limit: float
    variant: str
    tail_gap: float


@dataclass(frozen=True)
class ReachableLimit:
    left: float
    right: float
    variant: str
    is_optimal: bool


def _horner(coefs, x: float) -> float:
    """Scalar polynomial evaluation; far cheaper than Polynomial.__call__."""
    acc = 0.0
    for c in coefs:
        acc = acc * x + c
    return acc


def _scalar_poly(poly):
    coefs = tuple(reversed(poly.coef.tolist()))
    return lambda x: _horner(coefs, x)


def _pred_boundary(pred, lo: float, hi: float, width_tol: float = 0.0):
    """Locate the false->true boundary of a monotone predicate by bisection.

    Assumes pred(lo) is False and pred(hi) is True.  Returns (lo, hi)
    straddling the boundary; with width_tol 0 it collapses the bracket to
    machine precision.
    """
    for _ in range(_BISECT_ITERS):
        if hi - lo <= width_tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _godunov_values(flux: FluxSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # unguarded kernel shared with the marching solvers
    fu = flux.f_poly(u)
    fv = flux.f_poly(v)
    between = (u <= flux.b) & (flux.b <= v)
    ordered = np.where(between, flux.f_min, np.minimum(fu, fv))
    return np.where(u <= v, ordered, np.maximum(fu, fv))


def godunov_flux(flux: FluxSpec, u, v):
    """Exact Riemann face flux for a unimodal f with minimizer b.

    For u <= v the flux is f(b) when b lies between the states and
    min(f(u), f(v)) otherwise; for u > v it is max(f(u), f(v)).
    """
    u = _check_saturation(u, "u")
    v = _check_saturation(v, "v")
    scalar = np.isscalar(u) and np.isscalar(v)
    out = _godunov_values(flux, np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return float(out) if scalar else out


def interface_flux(pair: MediumPair, u1, u2):
    """Godunov coupling across x = 0: max(G1(u1, 1), G2(0, u2))."""
    left = godunov_flux(pair.f1, u1, 1.0)
    right = godunov_flux(pair.f2, 0.0, u2)
    if np.isscalar(left) and np.isscalar(right):
        return max(left, right)
    return np.maximum(left, right)


def _opposite(pair: MediumPair, side: int) -> FluxSpec:
    if side == 1:
        return pair.f2
    if side == 2:
        return pair.f1
    raise DomainError(f"side must be 1 or 2, got {side!r}")


def _own(pair: MediumPair, side: int) -> FluxSpec:
    if side == 1:
        return pair.f1
    if side == 2:
        return pair.f2
    raise DomainError(f"side must be 1 or 2, got {side!r}")


def in_attainable_set(pair: MediumPair, side: int, kappa: float) -> bool:
    """True when f_side(kappa) lies in the opposite medium's flux range."""
    kappa = float(_check_saturation(kappa, "kappa"))
    z = _own(pair, side).f(kappa)
    other = _opposite(pair, side)
    tol = _LEVEL_TOL * max(1.0, abs(pair.q))
    return other.f_min - tol <= z <= pair.q + tol


def connect_level(flux: FluxSpec, z: float) -> tuple[float, float]:
    """Smallest and largest saturations where flux equals the level z.

    The smallest root lives on the decreasing branch when z <= 0 and on
    the increasing branch when z > 0; the largest root is always the
    rightmost point of the increasing branch with f <= z.  Raises
    LevelError when z is outside [f(b), q].
    """
    z = float(z)
    q = flux.f(1.0)
    tol = _LEVEL_TOL * max(1.0, abs(q))
    if z < flux.f_min - tol or z > q + tol:
        raise LevelError(
            f"level {z!r} outside attainable flux range [{flux.f_min!r}, {q!r}]"
        )
    z = min(max(z, flux.f_min), q)
    b = flux.b
    f = _scalar_poly(flux.f_poly)

    # smallest root
    if z <= 0.0:
        if f(0.0) <= z:
            under = 0.0
        else:
            _, under = _pred_boundary(lambda x: f(x) <= z, 0.0, b)
    else:
        _, under = _pred_boundary(lambda x: f(x) >= z, b, 1.0)

    # largest root
    if z >= q:
        over = 1.0
    else:
        over, _ = _pred_boundary(lambda x: f(x) > z, b, 1.0)

    return under, over


def make_connection(pair: MediumPair, side: int, kappa: float) -> ConnectionPair:
    """Connection record for level f_side(kappa), with opposite-side roots."""
    kappa = float(_check_saturation(kappa, "kappa"))
    z = _own(pair, side).f(kappa)
    other = _opposite(pair, side)
    under, over = connect_level(other, z)
    return ConnectionPair(side=side, kappa=kappa, z=z, under=under, over=over)


def optimal_connection(pair: MediumPair) -> OptimalConnection:
    """Connection at level max(f1(b1), f2(b2)).

    When medium 2 carries the higher minimum, the right state sits at b2
    and the left state is the smallest root of f1 at that level; the
    mirrored case swaps the roles.
    """
    f1, f2 = pair.f1, pair.f2
    if f1.f_min <= f2.f_min:
        under, _ = connect_level(f1, f2.f_min)
        return OptimalConnection(left_value=under, right_value=f2.b,
                                 case_tag=CASE_RIGHT_MINIMIZER)
    _, over = connect_level(f2, f1.f_min)
    return OptimalConnection(left_value=f1.b, right_value=over,
                             case_tag=CASE_LEFT_MINIMIZER)


def reachable_limits(pair: MediumPair, side: int, kappa: float):
    """All steady (left, right) limit pairs at level z = f_side(kappa).

    For z <= 0 three branch pairings exist (they need not be distinct);
    for z > 0 each side has a single root and the variants collapse to
    one record.
    """
    kappa = float(_check_saturation(kappa, "kappa"))
    if not in_attainable_set(pair, side, kappa):
        z = _own(pair, side).f(kappa)
        raise LevelError(
            f"level f_{side}({kappa!r}) = {z!r} is not attainable by both media"
        )
    z = _own(pair, side).f(kappa)
    u1, o1 = connect_level(pair.f1, z)
    u2, o2 = connect_level(pair.f2, z)
    opt = optimal_connection(pair)

    # roots at a flat flux minimum carry sqrt-of-ulp wobble, hence the loose match
    def flag(left, right):
        return abs(left - opt.left_value) <= 1e-7 and abs(right - opt.right_value) <= 1e-7

    if z > _LEVEL_TOL * max(1.0, pair.q):
        return [ReachableLimit(o1, o2, "over_under", flag(o1, o2))]
    return [
        ReachableLimit(o1, u2, "over_under", flag(o1, u2)),
        ReachableLimit(o1, o2, "over_over", flag(o1, o2)),
        ReachableLimit(u1, u2, "under_under", flag(u1, u2)),
    ]


def _implicit_euler_root(phi, f, z, state, h, lo, hi):
    """Solve phi(x) - phi(state) = h * (z - f(x)) for x in [lo, hi].

    g(x) = phi(x) - phi(state) + h*(f(x) - z) is nondecreasing on branches
    where f is monotone in the stepping direction, so the root is a
    predicate boundary.
    """

    phi_state = phi(state)

    def g(x):
        return phi(x) - phi_state + h * (f(x) - z)

    if g(lo) >= 0.0:
        return lo
    if g(hi) <= 0.0:
        return hi
    a, b = _pred_boundary(lambda x: g(x) >= 0.0, lo, hi, width_tol=1e-13)
    return 0.5 * (a + b)


def _march_interval(phi, f, z, y, length, limit, h_start=None):
    """Advance the implicit-Euler profile by `length` with adaptive substeps.

    Each substep is checked against two half steps; on agreement the halved
    pair is Richardson-extrapolated and clamped between the current value
    and the limit (preserving the monotone approach), otherwise the substep
    is halved and retried.  Returns the new value and the step size to seed
    the next interval with.
    """
    remaining = float(length)
    h = remaining if h_start is None else min(h_start, remaining)
    down = limit <= y
    while remaining > 0.0:
        if abs(y - limit) <= 1e-15:
            return limit, h
        h = min(h, remaining)
        last = h >= remaining
        lo, hi = (limit, y) if down else (y, limit)
        one = _implicit_euler_root(phi, f, z, y, h, lo, hi)
        mid = _implicit_euler_root(phi, f, z, y, 0.5 * h, lo, hi)
        two = _implicit_euler_root(phi, f, z, mid, 0.5 * h, lo, hi)
        if abs(one - two) <= 3e-8 or h <= 1e-12:
            y = min(max(two + (two - one), lo), hi)
            remaining = 0.0 if last else remaining - h
            h *= 2.0
        else:
            h *= 0.5
    return y, h


def steady_profile(pair: MediumPair, side: int, kappa: float, variant: str,
                   xi_max: float, n_samples: int) -> SteadyProfile:
    """Standing-wave profile in the stretched coordinate xi = x / eps.

    Variants over_under/over_over share the left profile: y falls from 1
    toward the largest root of f1 at the level, driven by
    d(phi1(y))/dxi = z - f1(y).  Variant under_under uses the right
    profile: w rises from 0 toward the smallest root of f2, driven by
    d(phi2(w))/dxi = f2(w) - z, and only exists for z < 0.
    """
    if variant not in VARIANTS:
        raise VariantError(f"variant must be one of {VARIANTS}, got {variant!r}")
    kappa = float(_check_saturation(kappa, "kappa"))
    if xi_max <= 0.0 or n_samples < 2:
        raise DomainError("xi_max must be positive and n_samples >= 2")
    if not in_attainable_set(pair, side, kappa):
        raise LevelError(f"f_{side}({kappa!r}) is not attainable by both media")
    z = _own(pair, side).f(kappa)
    xis = np.linspace(0.0, xi_max, n_samples)
    tol = _LEVEL_TOL * max(1.0, pair.q)

    if variant == "under_under":
        if z >= -tol:
            raise VariantError(
                "under_under requires a strictly negative flux level; "
                f"got z = {z!r}"
            )
        medium = pair.medium_2
        limit, _ = connect_level(medium.flux, z)
        phi = _scalar_poly(medium.phi)
        f = _scalar_poly(medium.flux.f_poly)
        ys = np.empty(n_samples)
        ys[0] = 0.0
        y = 0.0
        # negating flux and level makes the rising profile a pred-boundary
        # problem with the same monotonicity as the falling one
        neg_f = lambda x: -f(x)
        h = None
        for k in range(1, n_samples):
            y, h = _march_interval(phi, neg_f, -z, y, xis[k] - xis[k - 1],
                                   limit, h)
            ys[k] = y
    else:
        medium = pair.medium_1
        _, limit = connect_level(medium.flux, z)
        phi = _scalar_poly(medium.phi)
        f = _scalar_poly(medium.flux.f_poly)
        ys = np.empty(n_samples)
        ys[0] = 1.0
        if limit >= 1.0 - 1e-9:
            ys[:] = 1.0
        else:
            # offset start: the profile leaves the degenerate point y=1 tangentially
            y = 1.0 - 1e-9
            h = None
            for k in range(1, n_samples):
                y, h = _march_interval(phi, f, z, y, xis[k] - xis[k - 1],
                                       limit, h)
                ys[k] = y

    samples = np.column_stack([xis, ys])
    samples.flags.writeable = False
    return SteadyProfile(samples=samples, limit=limit, variant=variant,
                         tail_gap=abs(float(ys[-1]) - limit))


def write_steady_profile_csv(profile: SteadyProfile, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["xi", "y"])
        for xi, y in profile.samples:
            writer.writerow([repr(float(xi)), repr(float(y))])


def write_optimal_connection_csv(conn: OptimalConnection, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["side", "value", "case"])
        writer.writerow([1, repr(float(conn.left_value)), conn.case_tag])
        writer.writerow([2, repr(float(conn.right_value)), conn.case_tag])


def _face_value_root(f, phi, z, neighbor, diff_coef,
                     lo, hi, solve_left: bool) -> float:
    """Invert one discrete steady face relation for the unknown cell value.

    Both face states sit on one monotone flux branch, where the Godunov
    flux reduces to f at the unknown upwind cell, so the residual

        solve_left:  f(x) - diff_coef*(phi(neighbor) - phi(x)) - z
        otherwise:   f(x) - diff_coef*(phi(x) - phi(neighbor)) - z

    is monotone in x (nondecreasing resp. nonincreasing).
    """
    phi_nb = phi(neighbor)
    if solve_left:
        def res(x):
            return f(x) - diff_coef * (phi_nb - phi(x)) - z

        if res(lo) >= 0.0:
            return lo
        _, hit = _pred_boundary(lambda x: res(x) >= 0.0, lo, hi)
        return hit

    def res(x):
        return f(x) - diff_coef * (phi(x) - phi_nb) - z

    if res(hi) >= 0.0:
        return hi
    _, hit = _pred_boundary(lambda x: res(x) <= 0.0, lo, hi)
    return hit


def build_kappa_eps(pair: MediumPair, side: int, kappa: float, eps: float,
                    grid: Grid, variant: str = "over_under") -> Field:
    """Discrete steady state of the eps-diffusive scheme at a connection.

    One side is set to the constant branch root; the other side is built
    cell by cell away from the interface so that every discrete face flux
    (convective Godunov part minus eps times the Kirchhoff-potential
    difference quotient) equals the connection level exactly.  The
    interface face uses half-cell spacing against a fully saturated left
    trace (over variants) or an empty right trace (under_under).
    """
    if variant not in VARIANTS:
        raise VariantError(f"variant must be one of {VARIANTS}, got {variant!r}")
    kappa = float(_check_saturation(kappa, "kappa"))
    if not np.isfinite(eps) or eps <= 0.0:
        raise RegimeError(f"eps must be positive, got {eps!r}")
    if pair.oriented and eps >= pair.pressure_gap:
        raise RegimeError(
            f"eps = {eps!r} must stay below the capillary pressure gap "
            f"{pair.pressure_gap!r}"
        )
    if not in_attainable_set(pair, side, kappa):
        raise LevelError(f"f_{side}({kappa!r}) is not attainable by both media")
    z = _own(pair, side).f(kappa)
    tol = _LEVEL_TOL * max(1.0, pair.q)
    u1, o1 = connect_level(pair.f1, z)
    u2, o2 = connect_level(pair.f2, z)
    dx = grid.dx
    iface = grid.interface_face
    values = np.empty(grid.n_cells)

    if variant == "under_under":
        if z > tol:
            raise VariantError(
                f"under_under requires a nonpositive flux level; got z = {z!r}"
            )
        if z >= -tol:
            # level zero: the empty state is the only under/under limit
            values[:] = 0.0
            return make_field(values, 0.0, grid)
        values[:iface] = u1
        m2 = _scalar_poly(pair.f2.f_poly)
        phi2 = _scalar_poly(pair.medium_2.phi)
        prev = _face_value_root(m2, phi2, z, 0.0, 2.0 * eps / dx,
                                0.0, u2, solve_left=False)
        values[iface] = prev
        for j in range(iface + 1, grid.n_cells):
            if abs(prev - u2) <= 1e-15:
                values[j:] = u2
                break
            prev = _face_value_root(m2, phi2, z, prev, eps / dx,
                                    prev, u2, solve_left=False)
            values[j] = prev
        return make_field(values, 0.0, grid)

    values[iface:] = u2 if variant == "over_under" else o2
    m1 = _scalar_poly(pair.f1.f_poly)
    phi1 = _scalar_poly(pair.medium_1.phi)
    prev = _face_value_root(m1, phi1, z, 1.0, 2.0 * eps / dx,
                            o1, 1.0, solve_left=True)
    values[iface - 1] = prev
    for j in range(iface - 2, -1, -1):
        if abs(prev - o1) <= 1e-15:
            values[:j + 1] = o1
            break
        prev = _face_value_root(m1, phi1, z, prev, eps / dx,
                                o1, prev, solve_left=True)
        values[j] = prev
    return make_field(values, 0.0, grid)
