"""Figure rendering for the study report path.

Every plotting helper writes a PNG next to the delimited outputs and
returns the file path.  Matplotlib runs on the Agg backend so the
renderers work headless.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import NORM_KEYS

_NORM_LABELS = {
    "LinfL2_u": r"$\|u\|$ LinfL2",
    "LinfH1_u": r"$\|\nabla u\|$ LinfL2",
    "LinfL2_v": r"$\|u_t\|$ LinfL2",
    "LinfH1_v": r"$\|\nabla u_t\|$ LinfL2",
    "L2L2_a": r"$\|u_{tt}\|$ L2L2",
}


def _save(fig, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_convergence(result, out_dir, name="convergence.png"):
    """Log-log error-vs-h curves with order-1/order-2 guide lines."""
    h = np.array([result.h[n] for n in result.levels])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for key in NORM_KEYS:
        e = result.table.errors[key]
        if np.all(e > 0.0):
            ax.loglog(h, e / e[0], "o-", label=_NORM_LABELS[key])
    ax.loglog(h, (h / h[0]) ** 2, "k--", lw=0.8, label=r"$h^2$")
    ax.loglog(h, h / h[0], "k:", lw=0.8, label=r"$h$")
    ax.set_xlabel("h [m]")
    ax.set_ylabel("error (normalized to coarsest level)")
    ax.set_title(f"{result.kind} study: errors vs h")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, out_dir, name)


def plot_qoi_fit(result, out_dir, name="qoi_fit.png"):
    """Focus-study q(h) data points with the fitted alpha + beta h^gamma."""
    alpha, beta, gamma, _ = result.fit
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(result.h, result.q, "ko", label="data")
    hh = np.linspace(result.h.min(), result.h.max(), 200)
    ax.plot(hh, alpha + beta * hh ** gamma, "b-",
            label=rf"fit: $\gamma \approx {gamma:.2f}$")
    ax.set_xlabel("h [m]")
    ax.set_ylabel(r"$q(u_h)$ [Pa m]")
    ax.set_title("focus study: quantity of interest vs h")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, out_dir, name)


def plot_snapshot_1d(traj, out_dir, name="snapshots.png"):
    """Overlay of the recorded 1D pressure snapshots."""
    x = traj.space.mesh.nodes[:, 0]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for state in traj.snapshots:
        ax.plot(x, state.u, lw=0.9, label=f"t = {state.t * 1e6:.1f} us")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("u [Pa]")
    ax.set_title("pressure snapshots")
    ax.grid(True, alpha=0.3)
    if len(traj.snapshots) <= 10:
        ax.legend(fontsize=7)
    return _save(fig, out_dir, name)


def plot_field_2d(traj, out_dir, name="field.png", snapshot=-1):
    """Pseudocolor plot of one recorded 2D pressure snapshot."""
    mesh = traj.space.mesh
    if mesh.grid_shape is None:
        raise ValueError("2D field plot needs a structured grid")
    npx, npy = mesh.grid_shape
    state = traj.snapshots[snapshot]
    X = mesh.nodes[:, 0].reshape(npy, npx)
    Y = mesh.nodes[:, 1].reshape(npy, npx)
    U = state.u.reshape(npy, npx)
    fig, ax = plt.subplots(figsize=(5.0, 5.5))
    pcm = ax.pcolormesh(X, Y, U, shading="gouraud", cmap="RdBu_r")
    fig.colorbar(pcm, ax=ax, label="u [Pa]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.set_title(f"pressure field at t = {state.t * 1e6:.1f} us")
    return _save(fig, out_dir, name)
