from types import SimpleNamespace

import numpy as np
import pytest

from conformal_spectra.exceptions import DegenerateTriangle, NoBoundary
from conformal_spectra.fem import (
    Kind,
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
    build_problem,
    triangle_cotangents,
    triangle_gradients,
)
from conformal_spectra.mesh import TriMesh
from conformal_spectra.shapes import equilateral_triangle, icosphere, octahedron, unit_disk


def test_equilateral_values():
    m = equilateral_triangle()
    assert np.allclose(triangle_cotangents(m), 1 / np.sqrt(3))
    K = assemble_stiffness(m).toarray()
    off = K[~np.eye(3, dtype=bool)]
    assert np.allclose(off, -0.288675, atol=1e-6)
    assert np.allclose(np.diag(K), 0.577350, atol=1e-6)
    assert np.allclose(assemble_mass(m).diagonal(), 0.144338, atol=1e-6)


def test_right_triangle_hypotenuse_weight_vanishes():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    K = assemble_stiffness(m).toarray()
    assert K[1, 2] == pytest.approx(0.0, abs=1e-15)
    assert K[0, 1] == pytest.approx(-0.5)
    assert K[0, 2] == pytest.approx(-0.5)


def test_stiffness_structure():
    m = icosphere(2)
    K = assemble_stiffness(m)
    assert abs(K - K.T).max() < 1e-14
    assert np.abs(np.asarray(K.sum(axis=1))).max() < 1e-12
    assert np.linalg.eigvalsh(K.toarray()).min() > -1e-10


def test_stiffness_is_hat_function_galerkin():
    m = icosphere(1)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(m.n_vertices)
    g = triangle_gradients(m, u)
    dirichlet = np.sum(m.triangle_areas * np.einsum("ij,ij->i", g, g))
    assert u @ (assemble_stiffness(m) @ u) == pytest.approx(dirichlet, rel=1e-12)


def test_gradient_of_linear_function():
    m = equilateral_triangle()
    u = m.vertices @ np.array([2.0, -1.0, 0.0])
    assert np.allclose(triangle_gradients(m, u), [[2.0, -1.0, 0.0]])


def test_mass_scales_with_factor():
    m = octahedron()
    f = np.linspace(1, 2, m.n_vertices)
    assert np.allclose(assemble_mass(m, f).diagonal(), f * m.vertex_areas)


def test_boundary_mass():
    m = unit_disk(9)
    B = assemble_boundary_mass(m).diagonal()
    interior = np.setdiff1d(np.arange(m.n_vertices), m.boundary_vertices)
    assert np.all(B[interior] == 0)
    assert B.sum() == pytest.approx(m.boundary_lengths.sum())
    with pytest.raises(NoBoundary):
        assemble_boundary_mass(octahedron())


def test_build_problem_stiffness_independent_of_factor():
    m = icosphere(1)
    p1 = build_problem(m)
    p2 = build_problem(m, np.full(m.n_vertices, 3.0))
    assert (p1.stiffness != p2.stiffness).nnz == 0
    assert p2.total_measure == pytest.approx(3 * p1.total_measure)
    with pytest.raises(NoBoundary):
        build_problem(m, kind=Kind.STEKLOV)


def test_degenerate_triangle():
    # TriMesh itself rejects such a sliver by area, so feed the raw arrays
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1e-9, 0.0]])
    m = SimpleNamespace(vertices=v, triangles=np.array([[0, 1, 2]]), n_triangles=1)
    with pytest.raises(DegenerateTriangle):
        triangle_cotangents(m)


def test_mass_trace_and_linearity():
    m = icosphere(2)
    assert assemble_mass(m).diagonal().sum() == pytest.approx(m.area(), rel=1e-14)
    f = np.linspace(1.0, 3.0, m.n_vertices)
    assert np.allclose(assemble_mass(m, 2 * f).diagonal(), 2 * assemble_mass(m, f).diagonal())


def test_boundary_mass_locality():
    m = unit_disk(9)
    f = np.ones(m.n_vertices)
    v = m.boundary_vertices[3]
    f[v] = 2.0
    base = assemble_boundary_mass(m).diagonal()
    bumped = assemble_boundary_mass(m, f).diagonal()
    changed = np.flatnonzero(bumped != base)
    assert changed.tolist() == [v]
    assert bumped[v] == pytest.approx(2 * base[v])
