"""scikit-learn style wrappers.

Samples are conformal factors: a design matrix ``F`` has one row per factor
and one column per mesh vertex. The mesh is the training input of ``fit``.

>>> from conformal_spectra.shapes import icosphere
>>> est = EigenvalueFunctional(indices=(1,)).fit(icosphere(2))
>>> est.transform(np.ones((1, 162))).shape
(1, 1)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .eigen import DEFAULT_CLUSTER_TOL, DEFAULT_EIG_TOL
from .flow import FlowConfig, run_flow
from .functional import FunctionalSpec, evaluate
from .subgradient import generate_candidates, pseudo_norm
from .validation import check_factor, check_factor_matrix, check_mesh


class EigenvalueFunctional(TransformerMixin, BaseEstimator):
    """Renormalized eigenvalues (``transform``) and ``E`` (``predict``) of factors."""

    def __init__(self, kind="laplace", indices=(1,), form="negsum", coefficients=None,
                 eig_tol=DEFAULT_EIG_TOL, cluster_tol=DEFAULT_CLUSTER_TOL, method="auto"):
        self.kind = kind
        self.indices = indices
        self.form = form
        self.coefficients = coefficients
        self.eig_tol = eig_tol
        self.cluster_tol = cluster_tol
        self.method = method

    def _spec(self):
        return FunctionalSpec(kind=self.kind, indices=tuple(np.atleast_1d(self.indices)), form=self.form,
                              coefficients=self.coefficients)

    def fit(self, mesh, y=None):
        self.mesh_ = check_mesh(mesh)
        self.spec_ = self._spec()
        self.n_features_in_ = self.mesh_.n_vertices
        return self

    def _evaluate(self, F):
        check_is_fitted(self, "mesh_")
        F = check_factor_matrix(F, self.mesh_)
        return [evaluate(self.spec_, self.mesh_, check_factor(row, self.mesh_, self.spec_.support),
                         eig_tol=self.eig_tol, cluster_tol=self.cluster_tol, method=self.method) for row in F]

    def transform(self, F):
        """Renormalized eigenvalues at the requested indices, shape (n_samples, m)."""
        return np.array([ev.renormalized for ev in self._evaluate(F)])

    def predict(self, F):
        """Functional values ``E``, shape (n_samples,)."""
        return np.array([ev.value for ev in self._evaluate(F)])

    def pseudo_norm(self, F, samples=32, seed=0):
        """Pseudo-norm of the subdifferential at every row of ``F``."""
        out = []
        for ev in self._evaluate(F):
            out.append(pseudo_norm(generate_candidates(ev.eigen, ev, samples=samples, seed=seed)).value)
        return np.array(out)


class ConformalFlowOptimizer(BaseEstimator):
    """Minimize ``E`` by the pseudo-norm descent flow.

    After ``fit`` the estimator exposes ``factor_`` (final factor values),
    ``trace_``, ``energy_``, ``pseudo_norm_``, ``renormalized_`` and
    ``n_iter_``.
    """

    def __init__(self, kind="laplace", indices=(1,), form="negsum", coefficients=None,
                 dt_init=0.05, dt_max=1.0, armijo_c=0.1, ps_eps=1e-3, max_steps=200,
                 direction="spread", subgrad_window=2e-2, samples=32, eig_tol=DEFAULT_EIG_TOL, random_state=0):
        self.kind = kind
        self.indices = indices
        self.form = form
        self.coefficients = coefficients
        self.dt_init = dt_init
        self.dt_max = dt_max
        self.armijo_c = armijo_c
        self.ps_eps = ps_eps
        self.max_steps = max_steps
        self.direction = direction
        self.subgrad_window = subgrad_window
        self.samples = samples
        self.eig_tol = eig_tol
        self.random_state = random_state

    def fit(self, mesh, y=None, f0=None):
        mesh = check_mesh(mesh)
        spec = FunctionalSpec(kind=self.kind, indices=tuple(np.atleast_1d(self.indices)), form=self.form,
                              coefficients=self.coefficients)
        f0 = check_factor(f0, mesh, spec.support)
        config = FlowConfig(dt_init=self.dt_init, dt_max=self.dt_max, armijo_c=self.armijo_c,
                            ps_eps=self.ps_eps, max_steps=self.max_steps, direction=self.direction,
                            subgrad_window=self.subgrad_window, samples=self.samples,
                            eig_tol=self.eig_tol, seed=int(self.random_state or 0), snapshot_every=0)
        trace = run_flow(spec, mesh, f0, config)
        last = trace.records[-1]
        self.mesh_, self.spec_, self.trace_ = mesh, spec, trace
        self.factor_ = trace.final_factor.values
        self.energy_ = last.energy
        self.pseudo_norm_ = last.pseudo_norm
        self.renormalized_ = last.renormalized
        self.n_iter_ = len(trace) - 1
        self.n_features_in_ = mesh.n_vertices
        return self

    def predict(self, F):
        """``E`` at every row of ``F`` (the fitted mesh and functional)."""
        check_is_fitted(self, "factor_")
        F = check_factor_matrix(F, self.mesh_)
        return np.array([evaluate(self.spec_, self.mesh_, check_factor(r, self.mesh_, self.spec_.support),
                                  eig_tol=self.eig_tol).value for r in F])

    def score(self, F, y=None):
        """Mean of ``-E``: larger is better, as scikit-learn expects."""
        return float(-np.mean(self.predict(F)))
