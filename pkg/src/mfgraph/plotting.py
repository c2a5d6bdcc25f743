"""Figure rendering for the CLI report path (written next to the CSV files).

Import is deferred to keep matplotlib out of library-only use; the Agg
backend is forced so runs work headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
}


def _styled():
    plt.rcParams.update(_RC)


def save_density_trajectory(path, times, densities, dissipation=None, title=None):
    """Line plot of every density component over time, free energy inset."""
    _styled()
    fig, ax = plt.subplots()
    for i in range(densities.shape[1]):
        ax.plot(times, densities[:, i], label=f"p_{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", ncol=2)
    if dissipation is not None:
        twin = ax.twinx()
        twin.plot(times, dissipation, color="k", alpha=0.45, linestyle="--")
        twin.set_ylabel("free energy", alpha=0.7)
        twin.grid(False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_mfg_solution(path, times, p, phi, hamiltonian=None):
    """Two panels: densities and policies, with the Hamiltonian trace."""
    _styled()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.6))
    for i in range(p.shape[1]):
        ax1.plot(times, p[:, i], label=f"p_{i + 1}")
    ax1.set_xlabel("s")
    ax1.set_ylabel("density")
    ax1.legend(ncol=2)
    for i in range(phi.shape[1]):
        ax2.plot(times, phi[:, i], label=f"Phi_{i + 1}")
    if hamiltonian is not None:
        ax2.plot(times, hamiltonian, "k--", alpha=0.5, label="H trace")
    ax2.set_xlabel("s")
    ax2.set_ylabel("policy")
    ax2.legend(ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_reduced_trajectory(path, traj, title=None):
    """Phase view (x, y) plus the conserved Hamiltonian trace."""
    _styled()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.6))
    ax1.plot(traj.times, traj.x, label="x")
    ax1.plot(traj.times, traj.y, label="y")
    ax1.set_xlabel("s")
    ax1.legend()
    if title:
        ax1.set_title(title)
    ax2.plot(traj.times, traj.hamiltonian)
    ax2.set_xlabel("s")
    ax2.set_ylabel("Hamiltonian")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_master_field(path, fld):
    """Heatmap of w(x, t) with failed nodes left blank."""
    _styled()
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(fld.x_grid, fld.t_grid, fld.w, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="w(x, t)")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
