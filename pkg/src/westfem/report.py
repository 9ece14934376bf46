"""Delimited output files for studies and runs.

All writers format floats with ``repr`` (shortest round-trip), contain
no timestamps and iterate in deterministic order, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import math
import os

from .errors import NORM_KEYS

ORDER_TABLE_HEADER = ("level,e_LinfL2_u,ord,e_LinfH1_u,ord,e_LinfL2_v,ord,"
                      "e_LinfH1_v,ord,e_L2L2_a,ord")


def _fmt(value):
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def write_order_table(table, path):
    """Spec'd order-table CSV; NaN marks undefined orders."""
    lines = [ORDER_TABLE_HEADER]
    for i, level in enumerate(table.levels):
        cells = [str(level)]
        for key in NORM_KEYS:
            cells.append(_fmt(table.errors[key][i]))
            cells.append(_fmt(table.orders[key][i]))
        lines.append(",".join(cells))
    _write_lines(path, lines)


def write_run_summary(traj, path):
    """Per-step summary CSV: step,t,fp_iters,max_abs_u,margin."""
    lines = ["step,t,fp_iters,max_abs_u,margin"]
    for n in range(traj.n_points):
        lines.append(f"{n},{_fmt(traj.times[n])},{int(traj.fp_iters[n])},"
                     f"{_fmt(traj.max_abs_u[n])},{_fmt(traj.margin[n])}")
    _write_lines(path, lines)


def write_snapshots(traj, path):
    """Strided state snapshots CSV: t,node_index,x[,y],u,v,a."""
    mesh = traj.space.mesh
    two_d = mesh.dim == 2
    header = "t,node_index,x,y,u,v,a" if two_d else "t,node_index,x,u,v,a"
    lines = [header]
    for state in traj.snapshots:
        t_txt = _fmt(state.t)
        for i in range(mesh.n_nodes):
            coords = ",".join(_fmt(c) for c in mesh.nodes[i])
            lines.append(f"{t_txt},{i},{coords},{_fmt(state.u[i])},"
                         f"{_fmt(state.v[i])},{_fmt(state.a[i])}")
    _write_lines(path, lines)


def write_qoi_table(levels, h, q, path):
    lines = ["level,h,q"]
    for lvl, hh, qq in zip(levels, h, q):
        lines.append(f"{lvl},{_fmt(hh)},{_fmt(qq)}")
    _write_lines(path, lines)


def write_fit_report(fit, path):
    alpha, beta, gamma, residual = fit
    _write_lines(path, ["alpha,beta,gamma,residual",
                        ",".join(_fmt(v) for v in (alpha, beta, gamma,
                                                   residual))])


def write_qoi_orders(levels, e_ref, orders, path):
    """Orders of |q_N - q_ref| against the finest level."""
    lines = ["level,e_q,ord"]
    for i, lvl in enumerate(levels[:-1]):
        lines.append(f"{lvl},{_fmt(e_ref[i])},{_fmt(orders[i])}")
    _write_lines(path, lines)


def write_effective_config(pairs, path):
    """Flat key=value echo of the configuration that produced an output."""
    lines = [f"{key}={pairs[key]}" for key in sorted(pairs)]
    _write_lines(path, lines)


def _write_lines(path, lines):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as out:
        out.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
