"""Triangulated surfaces, conformal factors and OFF input/output."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra

from .exceptions import EmptyBall, ParseError, TopologyError

AREA_EPS = 1e-14


class Support(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


class TriMesh:
    """Oriented, edge-manifold triangle mesh with optional boundary.

    Vertex coordinates may live in R^2, R^3 or R^4; only edge lengths enter
    the finite element assembly, so a flat torus can be carried as its
    Clifford embedding in R^4.

    Parameters
    ----------
    vertices : array_like, shape (n, d)
    triangles : array_like of int, shape (m, 3)

    Raises
    ------
    TopologyError
        On invalid indices, repeated indices in a face, an edge shared by more
        than two faces, inconsistent orientation, pinched boundary vertices
        or zero-area faces.
    """

    def __init__(self, vertices, triangles):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3, 4):
            raise TopologyError(f"vertices must have shape (n, 2|3|4), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise TopologyError(f"triangles must have shape (m, 3), got {triangles.shape}")
        if not np.all(np.isfinite(vertices)):
            raise TopologyError("non-finite vertex coordinates")
        n = len(vertices)
        if triangles.min() < 0 or triangles.max() >= n:
            raise TopologyError("triangle references a vertex index out of range")
        t = triangles
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise TopologyError("triangle with repeated vertex index")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        self.vertices = vertices
        self.triangles = triangles
        self._check_edges()
        areas = self.triangle_areas
        scale = self.scale
        bad = np.flatnonzero(areas <= AREA_EPS * scale**2)
        if bad.size:
            raise TopologyError(f"{bad.size} zero-area triangle(s), first is #{bad[0]}")

    # -- topology ---------------------------------------------------------

    def _check_edges(self):
        t = self.triangles
        heads = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
        tails = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
        n = self.n_vertices
        undirected = np.minimum(heads, tails) * n + np.maximum(heads, tails)
        _, counts = np.unique(undirected, return_counts=True)
        if counts.max() > 2:
            raise TopologyError("non-manifold edge shared by more than two triangles")
        directed = heads * n + tails
        _, dcounts = np.unique(directed, return_counts=True)
        if dcounts.max() > 1:
            raise TopologyError("inconsistent triangle orientation")
        reverse = tails * n + heads
        is_boundary = ~np.isin(reverse, directed)
        self._boundary_halfedges = np.column_stack([heads[is_boundary], tails[is_boundary]])

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def edges(self):
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def boundary_loops(self):
        """Boundary loops as lists of vertex indices, following face orientation."""
        nxt = {}
        for a, b in self._boundary_halfedges:
            if int(a) in nxt:
                raise TopologyError(f"pinched boundary at vertex {a}")
            nxt[int(a)] = int(b)
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                if v in seen or v not in nxt:
                    raise TopologyError(f"boundary walk broken at vertex {v}")
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    @cached_property
    def boundary_edges(self):
        """Boundary edges as directed pairs, shape (B, 2)."""
        return self._boundary_halfedges.copy()

    @cached_property
    def boundary_vertices(self):
        if len(self._boundary_halfedges) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self._boundary_halfedges[:, 0])

    @property
    def is_closed(self):
        return len(self._boundary_halfedges) == 0

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_triangles

    def genus(self):
        """Genus, assuming a connected orientable surface."""
        return (2 - self.euler_characteristic() - len(self.boundary_loops)) // 2

    @cached_property
    def adjacency(self):
        """Symmetric CSR matrix of edge lengths."""
        e = self.edges
        lengths = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        n = self.n_vertices
        a = sparse.coo_matrix((lengths, (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def is_connected(self):
        return connected_components(self.adjacency, directed=False)[0] == 1

    # -- geometry ---------------------------------------------------------

    @cached_property
    def triangle_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        g11 = np.einsum("ij,ij->i", e1, e1)
        g22 = np.einsum("ij,ij->i", e2, e2)
        g12 = np.einsum("ij,ij->i", e1, e2)
        return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))

    @cached_property
    def vertex_areas(self):
        """One third of the area of every incident triangle."""
        a = np.repeat(self.triangle_areas / 3.0, 3)
        return np.bincount(self.triangles.ravel(), weights=a, minlength=self.n_vertices)

    @cached_property
    def boundary_lengths(self):
        """Half the length of every incident boundary edge, per vertex."""
        be = self._boundary_halfedges
        out = np.zeros(self.n_vertices)
        if len(be):
            ell = np.linalg.norm(self.vertices[be[:, 0]] - self.vertices[be[:, 1]], axis=1)
            np.add.at(out, be[:, 0], 0.5 * ell)
            np.add.at(out, be[:, 1], 0.5 * ell)
        return out

    @cached_property
    def scale(self):
        """Bounding-box diagonal."""
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def area(self):
        return float(self.triangle_areas.sum())

    def __repr__(self):
        return (
            f"TriMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_triangles}, "
            f"boundary_loops={len(self.boundary_loops)})"
        )


@dataclass(frozen=True)
class ConformalFactor:
    """Positive per-vertex density ``f = exp(2u)``.

    ``values`` always has one entry per mesh vertex. For boundary support only
    the boundary entries are meaningful; the others are carried along as 1.
    """

    values: np.ndarray
    support: Support = Support.INTERIOR

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("conformal factor must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("conformal factor has non-finite entries")
        if np.any(v <= 0):
            raise ValueError("conformal factor must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", Support(self.support))

    @classmethod
    def ones(cls, mesh, support=Support.INTERIOR):
        return cls(np.ones(mesh.n_vertices), support)

    def scaled(self, c):
        return ConformalFactor(self.values * c, self.support)

    def __len__(self):
        return len(self.values)


def support_mask(mesh, support):
    """Boolean mask of the vertices where a factor with this support lives."""
    if Support(support) is Support.BOUNDARY:
        mask = np.zeros(mesh.n_vertices, dtype=bool)
        mask[mesh.boundary_vertices] = True
        return mask
    return np.ones(mesh.n_vertices, dtype=bool)


# -- OFF files -------------------------------------------------------------


def _off_tokens(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield from line.split()


def load_mesh(path, format="OFF"):
    """Read an ASCII OFF file (``OFF``, ``4OFF`` or ``nOFF`` header).

    Raises
    ------
    ParseError
        If the file is malformed or contains non-triangular faces.
    TopologyError
        If the triangles do not form an oriented edge-manifold surface.
    """
    if format.upper() != "OFF":
        raise ParseError(f"unsupported mesh format {format!r}")
    text = Path(path).read_text()
    tokens = list(_off_tokens(text))
    if not tokens:
        raise ParseError(f"{path}: empty file")
    header = tokens.pop(0)
    dim = 3
    if header == "OFF":
        pass
    elif header == "4OFF":
        dim = 4
    elif header == "nOFF":
        try:
            dim = int(tokens.pop(0))
        except (IndexError, ValueError):
            raise ParseError(f"{path}: nOFF header without dimension") from None
    else:
        raise ParseError(f"{path}: expected OFF header, got {header!r}")
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
        pos = 3
        coords = np.array(tokens[pos : pos + nv * dim], dtype=float)
        if coords.size != nv * dim:
            raise ParseError(f"{path}: truncated vertex block")
        pos += nv * dim
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ParseError(f"{path}: only triangles are supported, found a {k}-gon")
            faces.append([int(x) for x in tokens[pos + 1 : pos + 4]])
            if len(faces[-1]) != 3:
                raise ParseError(f"{path}: truncated face block")
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: malformed OFF body ({exc})") from None
    return TriMesh(coords.reshape(nv, dim), np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_off(mesh, path):
    dim = mesh.vertices.shape[1]
    lines = ["OFF" if dim == 3 else f"nOFF\n{dim}"]
    lines.append(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}")
    lines.extend(" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices)
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    Path(path).write_text("\n".join(lines) + "\n")


# -- refinement and balls ----------------------------------------------------


def refine(mesh, levels=1, sphere_project=False):
    """Midpoint 1-to-4 subdivision, applied ``levels`` times.

    Old vertices keep their indices; new vertices are appended in sorted edge
    order. With ``sphere_project`` every vertex is pushed onto the unit sphere
    after each level.
    """
    if levels < 0:
        raise ValueError("levels must be non-negative")
    v = np.array(mesh.vertices)
    t = np.array(mesh.triangles)
    if sphere_project and levels > 0:
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(levels):
        n = len(v)
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.ravel()
        mids = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
        m = len(t)
        ab, bc, ca = (n + inv[:m], n + inv[m : 2 * m], n + inv[2 * m :])
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        t = np.concatenate(
            [
                np.column_stack([a, ab, ca]),
                np.column_stack([ab, b, bc]),
                np.column_stack([ca, bc, c]),
                np.column_stack([ab, bc, ca]),
            ]
        )
        v = np.vstack([v, mids])
        if sphere_project:
            v = v / np.linalg.norm(v, axis=1, keepdims=True)
    if levels == 0:
        return mesh
    return TriMesh(v, t)


def edge_graph(mesh, metric_factor=None):
    """Edge-length graph, optionally in the metric ``f g``."""
    g = mesh.adjacency
    if metric_factor is None:
        return g
    f = metric_factor.values if isinstance(metric_factor, ConformalFactor) else np.asarray(metric_factor)
    s = np.sqrt(f)
    g = g.tocoo()
    w = g.data * 0.5 * (s[g.row] + s[g.col])
    return sparse.csr_matrix((w, (g.row, g.col)), shape=g.shape)


def geodesic_ball(mesh, center, radius, metric_factor=None):
    """Vertices within graph-geodesic distance ``radius`` of ``center``.

    Raises
    ------
    EmptyBall
        If no vertex other than the center is inside the ball.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    dist = dijkstra(edge_graph(mesh, metric_factor), directed=False, indices=int(center), limit=radius)
    ball = np.flatnonzero(np.isfinite(dist) & (dist <= radius))
    if ball.size <= 1:
        raise EmptyBall(f"ball of radius {radius:g} around vertex {center} contains only its center")
    return ball
