"""Checks for the regularized marcher and its interface system.

Oracle notes.  For trace pairs forced to (s, 0) or (1, s - 1) the
half-cell fluxes are explicit, so the interface system can be verified
by direct evaluation at the returned state.  Steady capillary profiles
built independently by build_kappa_eps must be fixed points of the
marcher, which exercises every face formula at once.
"""

import csv

import numpy as np
import pytest

from capflow import (
    ConfigError,
    DomainError,
    GridMismatchError,
    RegimeError,
    StabilityError,
    build_kappa_eps,
    canonical_pair,
    godunov_flux,
    make_field,
    make_grid,
    riemann_field,
)
from capflow.hyperbolic_solver import HyperbolicConfig, hyperbolic_solve
from capflow.parabolic_solver import (
    DiagnosticsRecord,
    InterfaceState,
    ParabolicConfig,
    interface_solve,
    parabolic_face_fluxes,
    parabolic_solve,
    parabolic_stable_dt,
    parabolic_step,
    smooth_initial_data,
    write_interface_states_csv,
)

PAIR = canonical_pair()

B2 = 1.0 / 6.0


def half_flux_left(pair, eps, dx, u_left, ub1):
    return godunov_flux(pair.f1, u_left, ub1) - (2.0 * eps / dx) * (
        pair.medium_1.phi(ub1) - pair.medium_1.phi(u_left)
    )


def half_flux_right(pair, eps, dx, ub2, u_right):
    return godunov_flux(pair.f2, ub2, u_right) - (2.0 * eps / dx) * (
        pair.medium_2.phi(u_right) - pair.medium_2.phi(ub2)
    )


def test_config_validation_collects_problems():
    with pytest.raises(ConfigError) as err:
        ParabolicConfig(eps=-1.0, cfl=2.0, t_end=0.0, interface_tol=0.0)
    assert len(err.value.problems) == 4
    cfg = ParabolicConfig(eps=0.1, cfl=0.9, t_end=1.0)
    assert cfg.interface_tol == 1e-12


def test_interface_solve_saturated_and_dry_states():
    state = interface_solve(PAIR, 0.05, 1.0 / 256.0, 1.0, 1.0)
    assert state.u_bar_1 == 1.0
    assert state.u_bar_2 == pytest.approx(1.0, abs=1e-12)
    assert state.flux == pytest.approx(PAIR.q, abs=1e-12)
    state = interface_solve(PAIR, 0.05, 1.0 / 256.0, 0.0, 0.0)
    assert state == InterfaceState(0.0, 0.0, 0.0)


def test_interface_solve_dam_break_state_matches_half_fluxes():
    eps, dx = 0.05, 1.0 / 256.0
    state = interface_solve(PAIR, eps, dx, 1.0, 0.0)
    assert (1.0 - state.u_bar_1) * state.u_bar_2 <= 1e-12
    f_left = half_flux_left(PAIR, eps, dx, 1.0, state.u_bar_1)
    f_right = half_flux_right(PAIR, eps, dx, state.u_bar_2, 0.0)
    assert abs(f_left - state.flux) <= 1e-12
    assert abs(f_right - state.flux) <= 1e-12


@pytest.mark.parametrize(
    "u_left,u_right", [(0.3, 0.8), (0.9, 0.1), (0.04, 0.2), (0.5, 0.5), (0.0, 1.0)]
)
def test_interface_solve_invariants_hold_generically(u_left, u_right):
    eps, dx = 0.08, 1.0 / 128.0
    state = interface_solve(PAIR, eps, dx, u_left, u_right)
    assert 0.0 <= state.u_bar_1 <= 1.0
    assert 0.0 <= state.u_bar_2 <= 1.0
    assert (1.0 - state.u_bar_1) * state.u_bar_2 <= 1e-12
    f_left = half_flux_left(PAIR, eps, dx, u_left, state.u_bar_1)
    f_right = half_flux_right(PAIR, eps, dx, state.u_bar_2, u_right)
    assert abs(f_left - state.flux) <= 1e-12
    assert abs(f_right - state.flux) <= 1e-12


def test_interface_solve_rejects_bad_regime_and_arguments():
    with pytest.raises(RegimeError):
        interface_solve(PAIR, 1.0, 0.01, 0.5, 0.5)
    with pytest.raises(RegimeError):
        interface_solve(PAIR, -0.1, 0.01, 0.5, 0.5)
    with pytest.raises(DomainError):
        interface_solve(PAIR, 0.05, 0.0, 0.5, 0.5)
    with pytest.raises(DomainError):
        interface_solve(PAIR, 0.05, 0.01, 1.5, 0.5)


def test_stable_dt_is_below_both_classical_bounds():
    grid = make_grid(-2.0, 2.0, 512)
    for eps in (0.01, 0.05, 0.2):
        dt = parabolic_stable_dt(PAIR, grid, eps, 0.9)
        max_lip = max(PAIR.f1.lip, PAIR.f2.lip)
        lam_max = max(PAIR.f1.lam_max, PAIR.f2.lam_max)
        assert dt <= 0.9 * grid.dx / max_lip
        assert dt <= grid.dx**2 / (2.0 * eps * lam_max)


def test_step_keeps_global_constants():
    grid = make_grid(-1.0, 1.0, 64)
    config = ParabolicConfig(eps=0.05, cfl=0.9, t_end=1.0)
    for value in (0.0, 1.0):
        field = make_field(np.full(64, value), 0.0, grid)
        out = parabolic_step(PAIR, grid, field, config)
        assert np.array_equal(out.values, field.values)


def test_step_rejects_unstable_dt_and_bad_regime():
    grid = make_grid(-1.0, 1.0, 64)
    config = ParabolicConfig(eps=0.05, cfl=0.9, t_end=1.0)
    field = make_field(np.full(64, 0.5), 0.0, grid)
    with pytest.raises(StabilityError):
        parabolic_step(PAIR, grid, field, config, dt=grid.dx)
    with pytest.raises(RegimeError):
        parabolic_step(PAIR, grid, field, ParabolicConfig(eps=1.0, cfl=0.9, t_end=1.0))


def test_step_conserves_mass_against_boundary_fluxes():
    grid = make_grid(-1.0, 1.0, 128)
    rng = np.random.default_rng(3)
    field = make_field(rng.uniform(0.0, 1.0, 128), 0.0, grid)
    config = ParabolicConfig(eps=0.1, cfl=0.9, t_end=1.0)
    fluxes, _ = parabolic_face_fluxes(PAIR, grid, field.values, config.eps)
    dt = parabolic_stable_dt(PAIR, grid, config.eps, config.cfl)
    out = parabolic_step(PAIR, grid, field, config)
    change = (np.sum(out.values) - np.sum(field.values)) * grid.dx
    expected = -dt * (fluxes[-1] - fluxes[0])
    assert abs(change - expected) <= 1e-14 * max(1.0, abs(expected))


def test_steady_capillary_profiles_are_fixed_points():
    grid = make_grid(-2.0, 2.0, 256)
    eps = 0.05
    config = ParabolicConfig(eps=eps, cfl=0.9, t_end=1.0)
    # side-2 minimizer at the optimal level plus one under-under state
    cases = [(2, B2, "over_under"), (1, 0.03, "under_under"), (2, 0.9, "over_over")]
    for side, kappa, variant in cases:
        start = build_kappa_eps(PAIR, side, kappa, eps, grid, variant=variant)
        state = start
        for _ in range(30):
            state = parabolic_step(PAIR, grid, state, config)
        drift = float(np.sum(np.abs(state.values - start.values)) * grid.dx)
        assert drift <= 1e-9, (side, kappa, variant)


def test_smooth_initial_data_zero_and_indicator_examples():
    grid = make_grid(-4.0, 4.0, 512)
    zero = smooth_initial_data(lambda x: np.zeros_like(x), 0.1, grid)
    assert np.array_equal(zero.values, np.zeros(512))

    indicator = riemann_field(grid, 1.0, 0.0)
    smooth = smooth_initial_data(indicator, 0.1, grid)
    grad = np.max(np.abs(np.diff(smooth.values))) / grid.dx
    assert 0.1 * grad <= 1.0
    k = grid.interface_face
    assert smooth.values[k - 1] == 0.0 and smooth.values[k] == 0.0
    assert smooth.values[0] == 1.0
    # variation grows by at most 4 over the un-truncated data
    assert np.sum(np.abs(np.diff(smooth.values))) <= 1.0 + 4.0
    # mass near the untouched plateau survives
    assert np.all(smooth.values[grid.cell_centers < -1.0] >= 0.999)


def test_smooth_initial_data_tightens_with_small_eps():
    grid = make_grid(-4.0, 4.0, 1024)
    indicator = riemann_field(grid, 1.0, 0.0)
    coarse = smooth_initial_data(indicator, 0.2, grid)
    fine = smooth_initial_data(indicator, 0.0125, grid)
    gap_coarse = float(np.sum(np.abs(coarse.values - indicator.values)) * grid.dx)
    gap_fine = float(np.sum(np.abs(fine.values - indicator.values)) * grid.dx)
    assert gap_fine < 0.5 * gap_coarse


def test_solve_reports_interface_states_and_diagnostics():
    grid = make_grid(-4.0, 4.0, 256)
    eps = 0.1
    u0 = smooth_initial_data(riemann_field(grid, 1.0, 0.0), eps, grid)
    config = ParabolicConfig(eps=eps, cfl=0.9, t_end=0.25, output_times=(0.1,))
    traj, record = parabolic_solve(PAIR, grid, u0, config)
    assert traj.times == (0.0, 0.1, 0.25)
    assert record.initial_data_smooth
    assert record.flux_sup <= record.initial_flux_sup + 1e-8
    assert record.energy_1 > 0.0 and record.energy_2 >= 0.0
    assert record.time_variation > 0.0
    for t, ub1, ub2, flux in traj.interface_states:
        assert (1.0 - ub1) * ub2 <= config.interface_tol
        assert abs(flux) <= record.flux_sup + 1e-15
    mass_change = (np.sum(traj.final.values) - np.sum(u0.values)) * grid.dx
    assert abs(mass_change - (traj.left_flux_integral - traj.right_flux_integral)) <= 1e-12
    assert set(record.to_dict()) == {
        "flux_sup",
        "initial_flux_sup",
        "energy_1",
        "energy_2",
        "time_variation",
        "initial_data_smooth",
    }


def test_solve_flags_raw_riemann_data():
    grid = make_grid(-2.0, 2.0, 128)
    config = ParabolicConfig(eps=0.1, cfl=0.9, t_end=0.05)
    _, record = parabolic_solve(PAIR, grid, riemann_field(grid, 0.8, 0.1), config)
    assert not record.initial_data_smooth


def test_solve_is_monotone_and_contracting():
    # the data agree near the outflow edges so no difference escapes the
    # domain of dependence within t_end; contraction then holds globally
    grid = make_grid(-2.0, 2.0, 128)
    config = ParabolicConfig(eps=0.08, cfl=0.9, t_end=0.1, record_steps=True)
    rng = np.random.default_rng(5)
    base = rng.uniform(0.0, 1.0, 128)
    inner = np.abs(grid.cell_centers) <= 1.0
    bump = rng.uniform(0.0, 1.0, 128) * (1.0 - base) * inner
    lower, _ = parabolic_solve(PAIR, grid, make_field(base, 0.0, grid), config)
    upper, _ = parabolic_solve(PAIR, grid, make_field(base + bump, 0.0, grid), config)
    assert np.all(lower.final.values <= upper.final.values + 1e-14)
    distances = [
        float(np.sum(np.abs(a.values - b.values)) * grid.dx)
        for a, b in zip(lower.steps, upper.steps)
    ]
    for before, after in zip(distances, distances[1:]):
        assert after <= before + 1e-12


def test_solve_approaches_hyperbolic_run_when_eps_is_grid_scale():
    # eps tied to 4 dx: the capillary run tracks the sharp one and the
    # gap shrinks under joint refinement
    gaps = {}
    for n in (128, 512):
        grid = make_grid(-2.0, 2.0, n)
        eps = 4.0 * grid.dx
        u0 = riemann_field(grid, 1.0, 0.0)
        sharp = hyperbolic_solve(PAIR, grid, u0, HyperbolicConfig(0.9, 0.3))
        soft, _ = parabolic_solve(PAIR, grid, u0, ParabolicConfig(eps, 0.9, 0.3))
        gaps[n] = float(np.sum(np.abs(sharp.final.values - soft.final.values)) * grid.dx)
    assert gaps[512] < 0.5 * gaps[128]
    assert gaps[512] <= 0.05


def test_write_interface_states_csv(tmp_path):
    grid = make_grid(-1.0, 1.0, 64)
    config = ParabolicConfig(eps=0.05, cfl=0.9, t_end=0.02)
    traj, _ = parabolic_solve(PAIR, grid, riemann_field(grid, 1.0, 0.0), config)
    path = tmp_path / "interface.csv"
    write_interface_states_csv(traj, path)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "u_bar_1", "u_bar_2", "flux"]
    assert len(rows) == 1 + len(traj.interface_states)
    assert float(rows[1][0]) == 0.0
    assert float(rows[1][3]) == pytest.approx(traj.interface_states[0][3])


def test_solve_rejects_mismatched_grid():
    grid = make_grid(-1.0, 1.0, 64)
    other = make_grid(-1.0, 1.0, 32)
    field = riemann_field(other, 0.5, 0.5)
    with pytest.raises(GridMismatchError):
        parabolic_solve(PAIR, grid, field, ParabolicConfig(eps=0.05, cfl=0.9, t_end=0.1))
