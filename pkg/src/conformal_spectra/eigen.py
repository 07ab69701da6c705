"""Generalized eigenproblems ``K phi = lambda W phi`` and multiplicity clusters.

Both solvers work on the symmetric standard form
``A = W^{-1/2} K W^{-1/2}`` (``W`` lumped and diagonal), so the residual of a
pair is ``||A y - lambda y||`` with ``y = W^{1/2} phi`` of unit length. This
equals ``||K phi - lambda W phi||_{W^-1}`` for a ``W``-normalized ``phi``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, lobpcg, splu

from .exceptions import NoBoundary, NoConvergence
from .fem import Kind, SpectralProblem

DEFAULT_EIG_TOL = 1e-8
DEFAULT_CLUSTER_TOL = 1e-3
DENSE_LIMIT = 1200


def cluster_eigenvalues(values, cluster_tol=DEFAULT_CLUSTER_TOL):
    """Group ascending values into clusters of numerically equal entries.

    Neighbours ``i, i+1`` share a cluster iff
    ``values[i+1] - values[i] <= cluster_tol * max(1, values[i+1])``.

    Returns
    -------
    list of ndarray
        Index arrays, in ascending order, partitioning ``range(len(values))``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    if np.any(np.diff(values) < -1e-12 * np.maximum(1.0, np.abs(values[1:]))):
        raise ValueError("values must be ascending")
    clusters = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= cluster_tol * max(1.0, values[i]):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return [np.array(c) for c in clusters]


@dataclass(frozen=True)
class EigenPackage:
    """Lowest eigenpairs of one spectral problem.

    ``vectors`` are ``W``-orthonormal columns over all mesh vertices; for
    Steklov problems they are harmonic extensions of the boundary modes.
    ``clusters`` are computed on the renormalized values so that they do not
    change when the factor is rescaled.
    """

    kind: Kind
    values: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    total_measure: float
    residuals: np.ndarray
    clusters: list
    eig_tol: float
    cluster_tol: float
    problem: SpectralProblem = field(repr=False, default=None)

    @property
    def renormalized(self):
        return self.values * self.total_measure

    @property
    def count(self):
        return len(self.values)

    def cluster_of(self, index):
        for c in self.clusters:
            if index in c:
                return c
        raise IndexError(f"eigenvalue #{index} was not computed (have {self.count})")

    def rayleigh_quotients(self):
        K = self.problem.stiffness
        num = np.einsum("ij,ij->j", self.vectors, K @ self.vectors)
        den = np.einsum("ij,i,ij->j", self.vectors, self.weights, self.vectors)
        return num / den


def _standard_form(K, w):
    s = 1.0 / np.sqrt(w)
    D = sparse.diags(s)
    return (D @ K @ D).tocsr(), s


def _ritz(A, Q, y0):
    """Rayleigh-Ritz on span(y0, Q) with ``y0`` pinned as the zero mode."""
    Q = Q - np.outer(y0, y0 @ Q)
    Q, _ = np.linalg.qr(Q)
    H = Q.T @ (A @ Q)
    H = 0.5 * (H + H.T)
    vals, U = np.linalg.eigh(H)
    Y = Q @ U
    return np.concatenate([[0.0], vals]), np.column_stack([y0, Y])


def _dense_modes(A, nev):
    A = A.toarray() if sparse.issparse(A) else A
    vals, Y = sla.eigh(A, subset_by_index=[0, min(nev, A.shape[0]) - 1])
    return vals, Y


def _lobpcg_modes(A, y0, nev, wanted, eig_tol, seed, maxiter=200, polish=12):
    """Loose LOBPCG run followed by shifted block inverse-iteration polishing.

    LOBPCG alone tends to stagnate around 1e-6 relative accuracy; a few
    subspace sweeps with the already factorized preconditioner push the
    residuals down to rounding level.
    """
    n = A.shape[0]
    shift = 1e-2 * max(A.diagonal().mean(), 1e-300) / n
    P = splu((A + shift * sparse.eye(n)).tocsc())
    precond = LinearOperator((n, n), matvec=P.solve, matmat=P.solve, dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, nev))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        _, Y = lobpcg(A, X, M=precond, Y=y0[:, None], tol=1e-6, maxiter=maxiter, largest=False)
    for _ in range(polish):
        vals, Z = _ritz(A, Y, y0)
        res = np.linalg.norm(A @ Z - Z * vals, axis=0)
        if np.all(res[:wanted] <= eig_tol * np.maximum(1.0, vals[:wanted])):
            break
        Y = P.solve(Z[:, 1:])
    return Y


def _solve_standard(A, y0, nev, wanted, eig_tol, method, seed):
    n = A.shape[0]
    nev = min(nev, n)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lobpcg"
    if method == "dense" or n <= 3 * nev + 4:
        _, Y = _dense_modes(A, nev)
        vals, Y = _ritz(A, Y[:, 1:], y0)
    elif method == "lobpcg":
        Y = _lobpcg_modes(A, y0, nev - 1, wanted, eig_tol, seed)
        vals, Y = _ritz(A, Y, y0)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    res = np.linalg.norm(A @ Y - Y * vals, axis=0)
    res[0] = np.linalg.norm(A @ y0)
    return vals, Y, res


def _complete(solve, count, n, cluster_tol, total_measure, eig_tol):
    """Grow the block until the cluster holding index ``count-1`` is closed."""
    guard = max(3, count // 2)
    while True:
        nev = min(count + guard, n)
        vals, Y, res = solve(nev, count)
        clusters = cluster_eigenvalues(vals * total_measure, cluster_tol)
        last = next(c for c in clusters if count - 1 in c)
        if last[-1] < len(vals) - 1 or nev == n:
            keep = last[-1] + 1
            if np.any(res[:keep] > eig_tol * np.maximum(1.0, vals[:keep])):
                vals, Y, res = solve(nev, keep)
            return vals[:keep], Y[:, :keep], res[:keep], clusters_upto(clusters, keep)
        guard *= 2


def clusters_upto(clusters, keep):
    return [c for c in clusters if c[-1] < keep]


def _check(res, vals, eig_tol, count):
    bound = eig_tol * np.maximum(1.0, np.abs(vals))
    bad = res[:count] > bound[:count]
    if np.any(bad):
        raise NoConvergence(-1, float(np.max(res[:count] / bound[:count]) * eig_tol))


def solve_laplace(problem, count, eig_tol=DEFAULT_EIG_TOL, cluster_tol=DEFAULT_CLUSTER_TOL,
                  method="auto", seed=0):
    """Lowest ``count`` eigenpairs of ``K phi = lambda M(f) phi``.

    The zero mode is pinned to the constant vector and deflated. More than
    ``count`` pairs are returned when the ``count``-th value sits inside a
    multiplicity cluster: the package always ends on a complete cluster.

    Parameters
    ----------
    method : {"auto", "dense", "lobpcg"}
        ``"lobpcg"`` runs a blocked preconditioned iteration with a sparse LU
        preconditioner and a fixed-seed start block; ``"auto"`` uses a dense
        solve up to a few thousand unknowns.

    Raises
    ------
    NoConvergence
        When a returned pair has residual above ``eig_tol * max(1, lambda)``.
    """
    if problem.kind is not Kind.LAPLACE:
        raise ValueError("solve_laplace needs a Laplace problem")
    n = problem.mesh.n_vertices
    if count > n:
        raise ValueError(f"count={count} exceeds dimension {n}")
    A, s = _standard_form(problem.stiffness, problem.weights)
    y0 = np.sqrt(problem.weights)
    y0 /= np.linalg.norm(y0)

    def solve(nev, wanted):
        vals, Y, res = _solve_standard(A, y0, nev, wanted, eig_tol, method, seed)
        if method != "dense" and np.any(res[:wanted] > eig_tol * np.maximum(1.0, vals[:wanted])):
            vals, Y, res = _solve_standard(A, y0, nev, wanted, eig_tol, "dense", seed)
        return vals, Y, res

    vals, Y, res, clusters = _complete(solve, count, n, cluster_tol, problem.total_measure, eig_tol)
    _check(res, vals, eig_tol, len(vals))
    vectors = Y * s[:, None]
    return EigenPackage(Kind.LAPLACE, vals, vectors, problem.weights, problem.total_measure,
                        res, clusters, eig_tol, cluster_tol, problem)


_SCHUR_CACHE = {}


def dirichlet_to_neumann(mesh, K):
    """Schur complement of ``K`` onto the boundary vertices.

    Returns ``(S, extend)`` where ``S`` is the dense discrete
    Dirichlet-to-Neumann matrix and ``extend(x_b)`` is the discrete harmonic
    extension of boundary values to all vertices.
    """
    key = id(mesh)
    hit = _SCHUR_CACHE.get(key)
    if hit is not None and hit[0] is mesh:
        return hit[1], hit[2]
    b = mesh.boundary_vertices
    if b.size == 0:
        raise NoBoundary("mesh has no boundary")
    interior = np.setdiff1d(np.arange(mesh.n_vertices), b)
    K = K.tocsr()
    Kbb = K[b][:, b].toarray()
    if interior.size:
        Kii = K[interior][:, interior].tocsc()
        Kib = K[interior][:, b].toarray()
        lu = splu(Kii)
        X = lu.solve(Kib)
        S = Kbb - Kib.T @ X
    else:
        lu = None
        S = Kbb
    S = 0.5 * (S + S.T)

    def extend(xb):
        xb = np.asarray(xb)
        out = np.zeros((mesh.n_vertices,) + xb.shape[1:])
        out[b] = xb
        if lu is not None:
            out[interior] = -lu.solve(Kib @ xb)
        return out

    if len(_SCHUR_CACHE) > 16:
        _SCHUR_CACHE.clear()
    _SCHUR_CACHE[key] = (mesh, S, extend)
    return S, extend


def solve_steklov(problem, count, eig_tol=DEFAULT_EIG_TOL, cluster_tol=DEFAULT_CLUSTER_TOL,
                  method="auto", seed=0):
    """Lowest ``count`` Steklov pairs via the discrete Dirichlet-to-Neumann map.

    Interior unknowns are eliminated by a Schur complement (computed once per
    mesh); the boundary problem ``S x = sigma B x`` is solved densely and the
    eigenvectors are harmonically extended to the interior.
    """
    if problem.kind is not Kind.STEKLOV:
        raise ValueError("solve_steklov needs a Steklov problem")
    mesh = problem.mesh
    S, extend = dirichlet_to_neumann(mesh, problem.stiffness)
    b = mesh.boundary_vertices
    wb = problem.weights[b]
    nb = len(b)
    if count > nb:
        raise ValueError(f"count={count} exceeds boundary dimension {nb}")
    s = 1.0 / np.sqrt(wb)
    A = S * s[:, None] * s[None, :]
    y0 = np.sqrt(wb)
    y0 /= np.linalg.norm(y0)

    def solve(nev, wanted):
        return _solve_standard(A, y0, nev, wanted, eig_tol, "dense", seed)

    vals, Y, res, clusters = _complete(solve, count, nb, cluster_tol, problem.total_measure, eig_tol)
    _check(res, vals, eig_tol, len(vals))
    vectors = extend(Y * s[:, None])
    return EigenPackage(Kind.STEKLOV, vals, vectors, problem.weights, problem.total_measure,
                        res, clusters, eig_tol, cluster_tol, problem)


def solve(problem, count, **kwargs):
    if problem.kind is Kind.LAPLACE:
        return solve_laplace(problem, count, **kwargs)
    return solve_steklov(problem, count, **kwargs)
