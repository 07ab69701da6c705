import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conformal_spectra.eigen import cluster_eigenvalues
from conformal_spectra.fem import assemble_mass, assemble_stiffness
from conformal_spectra.functional import FunctionalSpec, evaluate
from conformal_spectra.game import solve_game
from conformal_spectra.io import dumps_json
from conformal_spectra.mesh import TriMesh
from conformal_spectra.shapes import icosphere, unit_disk
from conformal_spectra.subgradient import generate_candidates, pseudo_norm

SPHERE = icosphere(1)
DISK = unit_disk(4)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
payoffs = st.integers(1, 12).flatmap(lambda n: st.integers(1, 6).flatmap(
    lambda k: arrays(float, (n, k), elements=finite)))


def _factor(mesh, coeffs):
    x = mesh.vertices
    c = np.asarray(coeffs)
    return np.exp(c[0] * x[:, 0] + c[1] * np.sin(3 * x[:, 1]) + c[2] * x[:, 0] * x[:, 1])


coeffs = st.lists(st.floats(-0.6, 0.6), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(payoffs)
def test_game_certificate(P):
    g = solve_game(P)
    assert g.gap <= 1e-8 * max(1.0, np.abs(P).max())
    assert np.min(P @ g.mix) - 1e-8 <= g.value <= np.max(P.T @ g.tau) + 1e-8
    # pure-strategy bounds
    assert np.max(P.min(axis=0)) - 1e-8 <= g.value <= np.min(P.max(axis=1)) + 1e-8


@settings(max_examples=30, deadline=None)
@given(payoffs, st.floats(-5, 5), st.floats(0.1, 10))
def test_game_affine_equivariance(P, shift, scale):
    v = solve_game(P).value
    assert abs(solve_game(scale * P + shift).value - (scale * v + shift)) <= 1e-7 * max(1.0, scale * np.abs(P).max())


@settings(max_examples=30, deadline=None)
@given(payoffs)
def test_game_transpose_duality(P):
    assert abs(solve_game(-P.T).value + solve_game(P).value) <= 1e-7 * max(1.0, np.abs(P).max())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=30), st.floats(1e-6, 0.1))
def test_clusters_partition(values, tol):
    vals = np.sort(values)
    cl = cluster_eigenvalues(vals, tol)
    assert np.array_equal(np.concatenate(cl), np.arange(len(vals)))
    for a, b in zip(cl, cl[1:]):
        assert vals[b[0]] - vals[a[-1]] > tol * max(1.0, vals[b[0]])


@settings(max_examples=20, deadline=None)
@given(arrays(float, (SPHERE.n_vertices, 3), elements=st.floats(-0.05, 0.05)))
def test_stiffness_invariants_on_jittered_sphere(noise):
    m = TriMesh(SPHERE.vertices + noise, SPHERE.triangles)
    K = assemble_stiffness(m)
    assert abs(K - K.T).max() < 1e-12
    assert np.abs(K @ np.ones(m.n_vertices)).max() < 1e-10
    assert np.linalg.eigvalsh(K.toarray()).min() > -1e-9
    assert abs(assemble_mass(m).diagonal().sum() - m.area()) < 1e-12


@settings(max_examples=15, deadline=None)
@given(coeffs, st.floats(0.01, 100))
def test_energy_scale_invariance(c, scale):
    spec = FunctionalSpec(indices=(1, 2))
    f = _factor(SPHERE, c)
    assert abs(evaluate(spec, SPHERE, scale * f).value - evaluate(spec, SPHERE, f).value) <= 1e-9


@settings(max_examples=15, deadline=None)
@given(coeffs, st.sampled_from(["negsum", "invsum"]))
def test_candidates_have_zero_mean(c, form):
    for mesh, kind in ((SPHERE, "laplace"), (DISK, "steklov")):
        ev = evaluate(FunctionalSpec(kind=kind, form=form, indices=(1, 2)), mesh, _factor(mesh, c))
        sset = generate_candidates(ev.eigen, ev, samples=8)
        assert max(abs(s.mean) for s in sset.candidates) <= 1e-8
        assert pseudo_norm(sset).value >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.recursive(st.none() | st.booleans() | finite | st.integers(-10**6, 10**6) | st.text(max_size=5),
                    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=4), kids, max_size=4),
                    max_leaves=12))
def test_json_roundtrip(obj):
    text = dumps_json(obj)
    assert text == dumps_json(obj)
    assert json.loads(text) == json.loads(json.dumps(obj))
