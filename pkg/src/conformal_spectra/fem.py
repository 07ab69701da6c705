"""Linear finite element matrices for the Laplace and Steklov problems.

The stiffness matrix only depends on the mesh: in two dimensions the
Dirichlet energy is invariant under conformal changes of the metric, so the
conformal factor enters through the (lumped) mass matrices alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse

from .exceptions import DegenerateTriangle, NoBoundary
from .mesh import ConformalFactor, Support

MIN_ANGLE = 1e-8


class Kind(str, Enum):
    LAPLACE = "laplace"
    STEKLOV = "steklov"


def triangle_cotangents(mesh):
    """Cotangent of the angle at each corner, shape (m, 3).

    Column ``k`` holds the angle at vertex ``triangles[:, k]``; it is opposite
    the edge joining the two other corners.
    """
    p = mesh.vertices[mesh.triangles]
    cots = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        dot = np.einsum("ij,ij->i", u, w)
        uu = np.einsum("ij,ij->i", u, u)
        ww = np.einsum("ij,ij->i", w, w)
        cross = np.sqrt(np.maximum(uu * ww - dot * dot, 0.0))
        angle = np.arctan2(cross, dot)
        if np.any(angle < MIN_ANGLE) or np.any(np.pi - angle < MIN_ANGLE):
            bad = np.flatnonzero((angle < MIN_ANGLE) | (np.pi - angle < MIN_ANGLE))[0]
            raise DegenerateTriangle(f"triangle #{bad} has an angle within {MIN_ANGLE:g} rad of 0 or pi")
        cots[:, k] = dot / cross
    return cots


def assemble_stiffness(mesh):
    """Cotangent stiffness matrix ``K`` with ``K[i, j] = -(cot a + cot b) / 2``.

    Rows sum to zero and ``K`` is symmetric positive semi-definite. The result
    does not depend on any conformal factor.
    """
    t = mesh.triangles
    cots = triangle_cotangents(mesh)
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j = t[:, (k + 1) % 3], t[:, (k + 2) % 3]
        w = -0.5 * cots[:, k]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sparse.diags(diag)).tocsr()


def _factor_values(mesh, f):
    if f is None:
        return np.ones(mesh.n_vertices)
    values = f.values if isinstance(f, ConformalFactor) else np.asarray(f, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError(f"factor has shape {values.shape}, mesh has {mesh.n_vertices} vertices")
    return values


def assemble_mass(mesh, f=None):
    """Vertex-lumped mass in the metric ``f g``: ``f_v * area(star(v)) / 3``."""
    return sparse.diags(mesh.vertex_areas * _factor_values(mesh, f)).tocsr()


def assemble_boundary_mass(mesh, f=None):
    """Lumped boundary mass ``f_v * length(boundary star(v)) / 2``; zero off the boundary."""
    if mesh.is_closed:
        raise NoBoundary("mesh has no boundary")
    return sparse.diags(mesh.boundary_lengths * _factor_values(mesh, f)).tocsr()


def triangle_gradients(mesh, u):
    """Gradient of the piecewise linear interpolant of ``u`` on every triangle.

    Returns an array of shape (m, d) in ambient coordinates.
    """
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    g11 = np.einsum("ij,ij->i", e1, e1)
    g22 = np.einsum("ij,ij->i", e2, e2)
    g12 = np.einsum("ij,ij->i", e1, e2)
    det = g11 * g22 - g12 * g12
    ut = np.asarray(u)[mesh.triangles]
    d1 = ut[:, 1] - ut[:, 0]
    d2 = ut[:, 2] - ut[:, 0]
    a = (g22 * d1 - g12 * d2) / det
    b = (g11 * d2 - g12 * d1) / det
    return a[:, None] * e1 + b[:, None] * e2


@dataclass
class SpectralProblem:
    """Matrices of one generalized eigenproblem ``K phi = lambda W phi``.

    ``weights`` is the diagonal of the lumped mass (Laplace) or boundary mass
    (Steklov). ``total_measure`` is the area, resp. boundary length, in the
    metric defined by the factor.
    """

    kind: Kind
    mesh: object
    factor: ConformalFactor
    stiffness: sparse.csr_matrix
    weights: np.ndarray
    total_measure: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def mass(self):
        return sparse.diags(self.weights).tocsr()

    @property
    def support(self):
        return self.weights > 0


_STIFFNESS_CACHE = {}


def cached_stiffness(mesh):
    key = id(mesh)
    hit = _STIFFNESS_CACHE.get(key)
    if hit is not None and hit[0] is mesh:
        return hit[1]
    if len(_STIFFNESS_CACHE) > 32:
        _STIFFNESS_CACHE.clear()
    K = assemble_stiffness(mesh)
    _STIFFNESS_CACHE[key] = (mesh, K)
    return K


def build_problem(mesh, f=None, kind=Kind.LAPLACE):
    kind = Kind(kind)
    if f is None:
        f = ConformalFactor.ones(mesh, Support.BOUNDARY if kind is Kind.STEKLOV else Support.INTERIOR)
    K = cached_stiffness(mesh)
    if kind is Kind.LAPLACE:
        weights = mesh.vertex_areas * _factor_values(mesh, f)
    else:
        if mesh.is_closed:
            raise NoBoundary("Steklov problem needs a mesh with boundary")
        weights = mesh.boundary_lengths * _factor_values(mesh, f)
    return SpectralProblem(kind, mesh, f, K, weights, float(weights.sum()))
