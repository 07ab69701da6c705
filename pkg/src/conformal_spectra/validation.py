"""Input validation helpers shared by the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .mesh import ConformalFactor, Support, TriMesh


def check_mesh(mesh):
    """Return a :class:`TriMesh` from a mesh or a ``(vertices, triangles)`` pair."""
    if isinstance(mesh, TriMesh):
        return mesh
    if isinstance(mesh, (tuple, list)) and len(mesh) == 2:
        return TriMesh(np.asarray(mesh[0], dtype=float), np.asarray(mesh[1], dtype=int))
    raise TypeError(f"expected a TriMesh or (vertices, triangles), got {type(mesh).__name__}")


def check_factor(f, mesh, support=Support.INTERIOR):
    """Validate one factor: per-vertex, finite and strictly positive."""
    if f is None:
        return ConformalFactor.ones(mesh, support)
    if isinstance(f, ConformalFactor):
        values = f.values
    else:
        values = check_array(np.asarray(f, dtype=float).reshape(1, -1), ensure_all_finite=True).ravel()
    if values.shape != (mesh.n_vertices,):
        raise ValueError(f"factor has {values.size} entries, mesh has {mesh.n_vertices} vertices")
    return ConformalFactor(values, support)


def check_factor_matrix(F, mesh):
    """Rows of ``F`` are factors; returns a float array of shape (n_samples, n_vertices)."""
    F = check_array(F, dtype=float, ensure_all_finite=True)
    if F.shape[1] != mesh.n_vertices:
        raise ValueError(f"expected {mesh.n_vertices} columns (one per vertex), got {F.shape[1]}")
    if np.any(F <= 0):
        raise ValueError("factors must be strictly positive")
    return F
