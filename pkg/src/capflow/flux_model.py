"""Per-medium flux model for two-phase flow with a rock-type jump.

A medium carries a total flux

    f(u) = q * r(u) + gamma * lam(u),        u in [0, 1],

where q >= 0 is the total volume rate, r is the non-decreasing fractional
flow (r(0)=0, r(1)=1), gamma collects the gravity constant, and lam >= 0 is
the mobility shape factor with lam(0)=lam(1)=0.  Consequently f(0)=0 and
f(1)=q=max f, and the model requires f to be unimodal: non-increasing on
[0,b], non-decreasing on [b,1].  The minimizer b may be 0 (monotone flux).

r and lam are supplied as polynomial coefficient lists (ascending degree) so
that configs stay declarative and the capillary integral phi(u) = int_0^u lam
has an exact closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, RegimeError, StructuralError, ConfigError

__all__ = [
    "FluxSpec",
    "Medium",
    "MediumPair",
    "UnimodalReport",
    "make_flux",
    "make_medium",
    "make_pair",
    "canonical_pair",
    "eval_flux",
    "flux_minimizer",
    "validate_unimodal",
    "kirchhoff",
    "capillary_graphs_intersect",
]

VALIDATION_SAMPLES = 10_000
# slack for floating-point wiggle when checking monotonicity on the grid
SHAPE_TOL = 1e-12


def _check_saturation(u, what="saturation"):
    """Common range guard; accepts scalars and arrays."""
    arr = np.asarray(u, dtype=float)
    if arr.size and (np.min(arr) < -1e-14 or np.max(arr) > 1 + 1e-14):
        bad = float(arr.flat[int(np.argmax(np.abs(arr - 0.5)))])
        raise DomainError(f"{what} must lie in [0,1], got {bad!r}")
    return np.clip(arr, 0.0, 1.0) if arr.ndim else float(min(max(float(arr), 0.0), 1.0))


@dataclass(frozen=True)
class FluxSpec:
    """One medium's validated flux family with cached shape data.

    lip bounds |f'| on [0,1]; lip_up / lip_down bound the positive and
    negative parts of f' separately (the explicit schemes need the split),
    and lam_max bounds the mobility.  All four are exact maxima of the
    underlying polynomials, hence dominate every finite-difference slope.
    """

    q: float
    gamma: float
    r: Polynomial
    lam: Polynomial
    b: float
    lip: float
    lip_up: float
    lip_down: float
    lam_max: float
    f_poly: Polynomial = field(repr=False)

    @property
    def L(self) -> float:
        return self.lip

    @property
    def f_min(self) -> float:
        return float(self.f_poly(self.b))

    def f(self, u):
        """Flux value(s) without the range guard (hot path)."""
        return self.f_poly(u)

    def __call__(self, u):
        return self.f_poly(u)


@dataclass(frozen=True)
class Medium:
    """A flux family plus its capillary data.

    phi is the exact antiderivative of lam with phi(0) = 0; P is the
    capillary plateau level of the medium.
    """

    flux: FluxSpec
    phi: Polynomial
    P: float

    @property
    def phi_one(self) -> float:
        return float(self.phi(1.0))


@dataclass(frozen=True)
class MediumPair:
    """The full problem coefficients: medium 1 on x<0, medium 2 on x>0.

    oriented is True when the capillary plateaus increase across the
    interface (P1 < P2), the regime every guarantee in this package is
    stated for.  Pairs with P1 >= P2 can be built and run, but the
    capillarity solver will refuse any eps (the admissible interval
    (0, P2-P1) is empty).
    """

    medium_1: Medium
    medium_2: Medium

    def __post_init__(self):
        q1, q2 = self.medium_1.flux.q, self.medium_2.flux.q
        if abs(q1 - q2) > 1e-12 * max(1.0, abs(q1), abs(q2)):
            raise ConfigError(
                f"media must share the total rate q, got {q1!r} and {q2!r}"
            )

    @property
    def q(self) -> float:
        return self.medium_1.flux.q

    @property
    def oriented(self) -> bool:
        return self.medium_1.P < self.medium_2.P

    @property
    def pressure_gap(self) -> float:
        return self.medium_2.P - self.medium_1.P

    @property
    def f1(self) -> FluxSpec:
        return self.medium_1.flux

    @property
    def f2(self) -> FluxSpec:
        return self.medium_2.flux


@dataclass(frozen=True)
class UnimodalReport:
    """Outcome of the decrease-then-increase scan.

    violations holds (u_prev, u_mid, u_next) sample triples around every
    interior local maximum (beyond roundoff tolerance); an empty list is a
    pass.
    """

    n_samples: int
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def _poly_extrema(p: Polynomial, lo=0.0, hi=1.0):
    """Exact candidate points for extrema of a polynomial on [lo, hi]."""
    cands = [lo, hi]
    dp = p.deriv()
    if dp.degree() >= 1:
        for root in dp.roots():
            if abs(root.imag) < 1e-12 and lo - 1e-12 <= root.real <= hi + 1e-12:
                cands.append(float(min(max(root.real, lo), hi)))
    elif dp.degree() == 0 and abs(dp.coef[0]) < 1e-300:
        pass  # constant polynomial, endpoints suffice
    return np.array(sorted(set(cands)))


def validate_unimodal(flux, n_samples: int = VALIDATION_SAMPLES) -> UnimodalReport:
    """Scan f on an n_samples grid for decrease-then-increase shape.

    Accepts a FluxSpec or any callable on [0,1].  Reports every interior
    sample that is a strict local maximum (up to roundoff slack), which is
    exactly a failure of unimodality on the grid.
    """
    if n_samples < 3:
        raise DomainError("n_samples must be at least 3")
    f = flux.f_poly if isinstance(flux, FluxSpec) else flux
    u = np.linspace(0.0, 1.0, n_samples)
    fu = np.asarray(f(u), dtype=float)
    tol = SHAPE_TOL * max(1.0, float(np.max(np.abs(fu))))
    diffs = np.diff(fu)
    rises = np.flatnonzero(diffs > tol)
    falls = np.flatnonzero(diffs < -tol)
    violations = []
    # unimodal means every decrease precedes every increase; a rise that is
    # later undone by a fall pins an interior maximum between the two moves
    if rises.size and falls.size and falls[-1] > rises[0]:
        i = int(rises[0])
        j = int(falls[falls > i][0])
        k = i + 1 + int(np.argmax(fu[i + 1 : j + 2]))
        k = min(max(k, 1), n_samples - 2)
        violations.append((float(u[k - 1]), float(u[k]), float(u[k + 1])))
    return UnimodalReport(n_samples=n_samples, violations=tuple(violations))


def _refine_minimizer(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Ternary search for the minimizer of a unimodal f on [lo, hi]."""
    while hi - lo > tol:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def flux_minimizer(flux, n_samples: int = VALIDATION_SAMPLES) -> float:
    """Minimizer b of a unimodal flux: dense scan plus ternary refinement.

    Raises StructuralError (carrying a violating sample triple) when the
    grid scan finds the flux is not decrease-then-increase.
    """
    report = validate_unimodal(flux, n_samples)
    if not report.ok:
        raise StructuralError(
            "flux is not unimodal; sample triple (u-, u, u+) with a local "
            f"maximum: {report.violations[0]}"
        )
    f = flux.f_poly if isinstance(flux, FluxSpec) else flux
    u = np.linspace(0.0, 1.0, n_samples)
    i = int(np.argmin(f(u)))
    lo = u[max(i - 1, 0)]
    hi = u[min(i + 1, n_samples - 1)]
    b = _refine_minimizer(f, lo, hi)
    # snap the numerically-zero case so monotone fluxes report b = 0 exactly
    return 0.0 if b < 1e-12 else b


def make_flux(q: float, gamma: float, r_coeffs, lambda_coeffs) -> FluxSpec:
    """Build and validate a FluxSpec from polynomial coefficient lists.

    Collects every structural problem (range of q, endpoint values and
    monotonicity of r, sign of lam, unimodality of f) and raises a single
    StructuralError listing all of them.
    """
    problems = []
    q = float(q)
    gamma = float(gamma)
    if not np.isfinite(q) or q < 0:
        problems.append(f"total rate q must be finite and >= 0, got {q!r}")
    if not np.isfinite(gamma):
        problems.append(f"gravity coefficient must be finite, got {gamma!r}")
    r = Polynomial(np.asarray(r_coeffs, dtype=float))
    lam = Polynomial(np.asarray(lambda_coeffs, dtype=float))

    grid = np.linspace(0.0, 1.0, VALIDATION_SAMPLES)
    r_vals = r(grid)
    lam_vals = lam(grid)
    if abs(r(0.0)) > 1e-9:
        problems.append(f"fractional flow must satisfy r(0)=0, got {r(0.0)!r}")
    if abs(r(1.0) - 1.0) > 1e-9:
        problems.append(f"fractional flow must satisfy r(1)=1, got {r(1.0)!r}")
    if np.any(np.diff(r_vals) < -SHAPE_TOL):
        i = int(np.argmin(np.diff(r_vals)))
        problems.append(
            f"fractional flow must be non-decreasing; r drops between "
            f"u={grid[i]:.6f} and u={grid[i + 1]:.6f}"
        )
    if abs(lam(0.0)) > 1e-9 or abs(lam(1.0)) > 1e-9:
        problems.append(
            f"mobility must vanish at both ends, got lam(0)={lam(0.0)!r}, "
            f"lam(1)={lam(1.0)!r}"
        )
    if np.min(lam_vals) < -SHAPE_TOL:
        i = int(np.argmin(lam_vals))
        problems.append(f"mobility must be >= 0, lam({grid[i]:.6f}) = {lam_vals[i]!r}")
    if problems:
        raise StructuralError("invalid flux family:\n" + "\n".join("  - " + p for p in problems))

    f_poly = q * r + gamma * lam
    b = flux_minimizer(f_poly)  # raises StructuralError when not unimodal

    df = f_poly.deriv()
    df_vals = df(_poly_extrema(df)) if df.degree() >= 0 else np.zeros(1)
    lip_up = float(max(np.max(df_vals), 0.0))
    lip_down = float(max(np.max(-df_vals), 0.0))
    lip = max(lip_up, lip_down, 1e-12)  # keep strictly positive for CFL use
    lam_max = float(max(np.max(lam(_poly_extrema(lam))), 0.0))
    return FluxSpec(
        q=q,
        gamma=gamma,
        r=r,
        lam=lam,
        b=b,
        lip=lip,
        lip_up=lip_up,
        lip_down=lip_down,
        lam_max=lam_max,
        f_poly=f_poly,
    )


def make_medium(q, gamma, r_coeffs, lambda_coeffs, P) -> Medium:
    flux = make_flux(q, gamma, r_coeffs, lambda_coeffs)
    phi = flux.lam.integ()          # exact antiderivative, phi(0) = 0
    return Medium(flux=flux, phi=phi, P=float(P))


def make_pair(medium_1: Medium, medium_2: Medium) -> MediumPair:
    return MediumPair(medium_1=medium_1, medium_2=medium_2)


def canonical_pair() -> MediumPair:
    """The worked pair used across the docs and tests.

    f1(u) = 2u^2 - u  (q=1, gamma=-1, r=u^2, lam1=u(1-u)),   P1 = 0
    f2(u) = 1.5u^2 - 0.5u  (lam2 = u(1-u)/2),                P2 = 1
    """
    m1 = make_medium(1.0, -1.0, [0.0, 0.0, 1.0], [0.0, 1.0, -1.0], 0.0)
    m2 = make_medium(1.0, -1.0, [0.0, 0.0, 1.0], [0.0, 0.5, -0.5], 1.0)
    return make_pair(m1, m2)


def eval_flux(m: Medium, u):
    """Guarded flux evaluation q*r(u) + gamma*lam(u) for u in [0,1]."""
    u = _check_saturation(u)
    return m.flux.f_poly(u)


def kirchhoff(m: Medium, u):
    """Capillary integral phi(u) = int_0^u lam, exact for polynomial lam."""
    u = _check_saturation(u)
    return m.phi(u)


def capillary_graphs_intersect(pair: MediumPair, u1, u2, eps: float) -> bool:
    """Whether the two capillary graphs meet at the interface states.

    In the disjoint-plateau regime 0 < eps < P2 - P1 the graphs can only
    meet at a full left state or an empty right state, so the test reduces
    to (1 - u1) * u2 = 0 within 1e-12.
    """
    if not (0.0 < eps < pair.pressure_gap):
        raise RegimeError(
            f"eps must lie in (0, P2-P1) = (0, {pair.pressure_gap!r}), got {eps!r}"
        )
    u1 = _check_saturation(u1, "interface saturation u1")
    u2 = _check_saturation(u2, "interface saturation u2")
    return abs((1.0 - u1) * u2) <= 1e-12
