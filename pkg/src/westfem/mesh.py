"""Interval and structured quadrilateral meshes with boundary tagging.

Two mesh families cover all experiments: uniform 1D intervals (the
channel) and tensor-product quadrilateral grids whose bottom side may
follow a circular arc (the focused-ultrasound transducer).  The curved
geometry is realized by transfinite (linear blending) interpolation
between the arc and the straight top edge, so the grid stays structured
and every interior node is a convex blend of the two boundary curves.

Boundary tags are assigned at construction time, never recovered from
coordinates afterwards.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class BoundaryTag(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN_SOURCE = "neumann_source"
    ABSORBING = "absorbing"


# Focused-ultrasound geometry: rectangle with a circular-arc bottom.
FOCUS_WIDTH = 0.04          # m, transverse extent
FOCUS_HEIGHT = 0.05         # m, extent in the propagation direction
FOCUS_ARC_CENTER = (0.02, 0.04)   # m
FOCUS_ARC_RADIUS_SQ = 0.002       # m^2

CHANNEL_LENGTH = 0.2        # m
CHANNEL_BASE_ELEMS = 100    # elements on level 1


@dataclass
class Mesh:
    """Nodes, elements and tagged boundary facets.

    ``nodes`` is ``(n_nodes, dim)``; ``elements`` is ``(n_elems, 2)`` for
    segments or ``(n_elems, 4)`` for counterclockwise quadrilaterals.
    ``facets`` pairs a node-index tuple with its :class:`BoundaryTag`.
    ``grid_shape`` carries ``(nx + 1, ny + 1)`` for structured 2D grids
    (node index ``j * (nx + 1) + i``) and enables fast point location.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    facets: list = field(default_factory=list)
    grid_shape: tuple | None = None
    h_max: float = 0.0

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=np.float64))
        if self.nodes.shape[1] != self.dim:
            self.nodes = self.nodes.reshape(-1, self.dim)
        self.elements = np.asarray(self.elements, dtype=np.int64)
        self.h_max = mesh_size(self)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elems(self):
        return self.elements.shape[0]

    def facet_nodes(self, tag):
        """Node-index array of all facets carrying ``tag`` (possibly empty)."""
        rows = [np.asarray(f, dtype=np.int64) for f, t in self.facets if t == tag]
        if not rows:
            return np.zeros((0, max(1, self.dim)), dtype=np.int64)
        return np.vstack(rows)

    def tagged_node_set(self, tag):
        """Set of node indices lying on facets with ``tag``."""
        return np.unique(self.facet_nodes(tag).ravel())


def mesh_size(mesh):
    """Maximum element diameter, recomputed from node coordinates."""
    pts = mesh.nodes[mesh.elements]           # (E, L, dim)
    n_loc = pts.shape[1]
    h = 0.0
    for a in range(n_loc):
        for b in range(a + 1, n_loc):
            d = np.linalg.norm(pts[:, a, :] - pts[:, b, :], axis=1)
            h = max(h, float(d.max()) if d.size else 0.0)
    return h


def interval_mesh(length, n_elems, tag_ends=BoundaryTag.DIRICHLET):
    """Uniform 1D mesh of ``n_elems`` segments on [0, length].

    Both endpoints are tagged ``tag_ends``.  Node i sits exactly at
    ``i * (length / n_elems)``.
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    n_elems = int(n_elems)
    if n_elems < 1:
        raise ValueError("n_elems must be at least 1")
    h = length / n_elems
    nodes = np.arange(n_elems + 1, dtype=np.float64) * h
    elements = np.column_stack([np.arange(n_elems), np.arange(1, n_elems + 1)])
    facets = [((0,), tag_ends), ((n_elems,), tag_ends)]
    return Mesh(1, nodes[:, None], elements, facets)


def channel_mesh(level):
    """1D channel of 0.2 m with 100 * 2**(level-1) Dirichlet-walled elements."""
    level = int(level)
    if level < 1:
        raise ValueError("level must be at least 1")
    return interval_mesh(CHANNEL_LENGTH, CHANNEL_BASE_ELEMS * 2 ** (level - 1),
                         BoundaryTag.DIRICHLET)


def focus_arc_y(x):
    """Depth of the transducer arc below y=0.04 at transverse position x."""
    dx = np.asarray(x, dtype=np.float64) - FOCUS_ARC_CENTER[0]
    return FOCUS_ARC_CENTER[1] - np.sqrt(FOCUS_ARC_RADIUS_SQ - dx * dx)


def _tfi_quad_mesh(nx, ny, width, height, bottom_y, tag_bottom, tag_other):
    """Structured quad grid blending a bottom curve into a flat top edge."""
    xs = np.arange(nx + 1, dtype=np.float64) * (width / nx)
    yb = bottom_y(xs) if callable(bottom_y) else np.full(nx + 1, float(bottom_y))
    s = np.arange(ny + 1, dtype=np.float64) / ny
    # Transfinite blend: row j interpolates between the bottom curve (s=0)
    # and the straight top edge y = height (s=1); side edges stay straight
    # because the curve meets the rectangle corners.
    yy = (1.0 - s[:, None]) * yb[None, :] + s[:, None] * height   # (ny+1, nx+1)
    xx = np.broadcast_to(xs[None, :], yy.shape)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ii, jj = ii.ravel(order="F"), jj.ravel(order="F")
    elements = np.column_stack([nid(ii, jj), nid(ii + 1, jj),
                                nid(ii + 1, jj + 1), nid(ii, jj + 1)])

    facets = []
    for i in range(nx):
        facets.append(((nid(i, 0), nid(i + 1, 0)), tag_bottom))
    for i in range(nx):
        facets.append(((nid(i, ny), nid(i + 1, ny)), tag_other))
    for j in range(ny):
        facets.append(((nid(0, j), nid(0, j + 1)), tag_other))
        facets.append(((nid(nx, j), nid(nx, j + 1)), tag_other))
    return Mesh(2, nodes, elements, facets, grid_shape=(nx + 1, ny + 1))


def focus_mesh(level):
    """Curved-transducer quad grid for the focused-ultrasound experiment.

    Level N has ``20 * 2**(N-1)`` cells across and ``35 * 2**(N-1)`` cells
    in the propagation direction.  The bottom row of nodes lies exactly on
    the transducer arc and is tagged ``NEUMANN_SOURCE``; the remaining
    three sides are tagged ``ABSORBING``.
    """
    level = int(level)
    if level < 1:
        raise ValueError("level must be at least 1")
    scale = 2 ** (level - 1)
    return _tfi_quad_mesh(20 * scale, 35 * scale, FOCUS_WIDTH, FOCUS_HEIGHT,
                          focus_arc_y, BoundaryTag.NEUMANN_SOURCE,
                          BoundaryTag.ABSORBING)


def rect_mesh(width, height, nx, ny, tag=BoundaryTag.DIRICHLET):
    """Plain rectangle [0,width] x [0,height] with one tag on all sides."""
    if width <= 0.0 or height <= 0.0:
        raise ValueError("width and height must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    return _tfi_quad_mesh(int(nx), int(ny), width, height, 0.0, tag, tag)


def focus_arc_length():
    """Exact length of the transducer arc between the rectangle corners."""
    radius = math.sqrt(FOCUS_ARC_RADIUS_SQ)
    half_angle = math.asin(0.5 * FOCUS_WIDTH / radius)
    return 2.0 * radius * half_angle


def dump_mesh(mesh, path):
    """Write the plain-text mesh dump.

    Format: header ``dim n_nodes n_elems n_facets``, node lines ``x [y]``,
    element lines of node indices, facet lines ``tag i [j]``.
    """
    with open(path, "w", encoding="ascii") as out:
        out.write(f"{mesh.dim} {mesh.n_nodes} {mesh.n_elems} "
                  f"{len(mesh.facets)}\n")
        for p in mesh.nodes:
            out.write(" ".join(repr(float(c)) for c in p) + "\n")
        for el in mesh.elements:
            out.write(" ".join(str(int(i)) for i in el) + "\n")
        for nodes, tag in mesh.facets:
            out.write(tag.value + " " + " ".join(str(int(i)) for i in nodes)
                      + "\n")
