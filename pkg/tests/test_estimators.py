import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conformal_spectra.estimators import ConformalFlowOptimizer, EigenvalueFunctional
from conformal_spectra.shapes import bump_factor, icosphere
from conformal_spectra.validation import check_factor, check_factor_matrix, check_mesh


@pytest.fixture(scope="module")
def mesh():
    return icosphere(2)


def test_params_roundtrip():
    est = EigenvalueFunctional(indices=(1, 2), form="invsum")
    params = est.get_params()
    assert params["indices"] == (1, 2) and params["form"] == "invsum"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(eig_tol=1e-9)
    assert est.eig_tol == 1e-9
    assert "ps_eps" in ConformalFlowOptimizer().get_params()


def test_transform_and_predict(mesh):
    est = EigenvalueFunctional(indices=(1, 2)).fit(mesh)
    F = np.vstack([np.ones(mesh.n_vertices), 5 * np.ones(mesh.n_vertices), bump_factor(mesh, 0.3)])
    X = est.transform(F)
    assert X.shape == (3, 2)
    assert np.allclose(X[0], X[1])
    assert np.allclose(est.predict(F), -X.sum(axis=1))


def test_pseudo_norm_estimator(mesh):
    est = EigenvalueFunctional().fit(mesh)
    pn = est.pseudo_norm(np.vstack([np.ones(mesh.n_vertices), bump_factor(mesh, 0.5)]))
    assert pn[0] < pn[1]


def test_not_fitted(mesh):
    with pytest.raises(NotFittedError):
        EigenvalueFunctional().transform(np.ones((1, mesh.n_vertices)))


def test_input_validation(mesh):
    est = EigenvalueFunctional().fit(mesh)
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 5)))
    with pytest.raises(ValueError):
        est.transform(-np.ones((1, mesh.n_vertices)))
    with pytest.raises(ValueError):
        est.transform(np.full((1, mesh.n_vertices), np.nan))
    with pytest.raises(TypeError):
        check_mesh("sphere")
    assert check_mesh((mesh.vertices, mesh.triangles)).n_vertices == mesh.n_vertices
    with pytest.raises(ValueError):
        check_factor(np.ones(3), mesh)
    assert check_factor_matrix([[1.0] * mesh.n_vertices], mesh).shape == (1, mesh.n_vertices)


def test_optimizer(mesh):
    f0 = bump_factor(mesh, 0.3, seed=2)
    opt = ConformalFlowOptimizer(max_steps=8).fit(mesh, f0=f0)
    assert opt.n_iter_ <= 8
    assert opt.factor_.shape == (mesh.n_vertices,)
    start = opt.predict(f0[None])[0]
    assert opt.energy_ < start
    assert opt.score(opt.factor_[None]) == pytest.approx(-opt.energy_)
    assert opt.trace_.records[-1].pseudo_norm == opt.pseudo_norm_


def test_module_doctest():
    import doctest

    from conformal_spectra import estimators

    assert doctest.testmod(estimators).failed == 0
