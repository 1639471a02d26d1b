"""PNG rendering for experiment artifacts.

Optional layer behind the diagnostics.figures toggle; only the final
field of each run is drawn, with the interface marked at x = 0.  Uses
the Agg backend so runs never need a display.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_errors", "render_profiles"]


def render_profiles(runs, path) -> None:
    """Overlay the final saturation profiles of the given (run_id, trajectory) pairs."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for run_id, traj in runs:
        final = traj.final
        label = run_id if traj.eps is None else f"{run_id} (eps={traj.eps:g})"
        ax.step(traj.grid.cell_centers, final.values, where="mid", lw=1.0, label=label)
    ax.axvline(0.0, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("x")
    ax.set_ylabel("saturation")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_errors(rows, param_name, path) -> None:
    """Error curve over the sweep parameter (eps or n_cells).

    Log-log when every point allows it; contraction slacks can be
    exactly zero, which falls back to linear axes.
    """
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    xs = [row[0] for row in rows]
    ys = [row[1] for row in rows]
    ax.plot(xs, ys, "o-", lw=1.0)
    if all(isinstance(x, (int, float)) and x > 0 for x in xs):
        ax.set_xscale("log")
    if all(y > 0 for y in ys):
        ax.set_yscale("log")
    ax.set_xlabel(param_name)
    ax.set_ylabel("L1 error")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
