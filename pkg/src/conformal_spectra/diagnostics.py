"""Health checks for (nearly) critical conformal factors.

All quantities use the conformal measure rescaled to total mass one, in
which the eigenvalues are the renormalized ones. For a choice of weights
``t_j >= 0`` with ``sum_j lam_j t_j = 1`` the eigenmap has coordinates
``Phi_j = sqrt(t_j) * phi_j`` (``phi_j`` of unit mean square) and

    omega**2 = |Phi|_Lambda**2 = sum_j lam_j t_j phi_j**2.

At a critical point ``omega`` is identically one and the three integrals
``int dmu``, ``int omega**2 dmu`` and ``int |grad Phi|**2`` all equal one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import eigsh

from .exceptions import BallTooSmall, EmptyBall, NormalizationFailure
from .fem import Kind, triangle_gradients
from .mesh import geodesic_ball

CRITICAL_DELTA = 0.05


def _columns(eigen, evaluation, expand_clusters):
    cols = []
    for k in evaluation.spec.indices:
        group = eigen.cluster_of(k) if expand_clusters else [k]
        cols += [int(j) for j in group if j not in cols]
    return np.array(cols)


def _fit_weights(lam, sq, w):
    """LP for ``t >= 0``: minimize ``max_v |sum_j lam_j t_j sq_jv - 1|`` with ``sum_j lam_j t_j = 1``.

    Works with ``s_j = lam_j t_j``.
    """
    n, m = sq.shape
    rows = w > 0
    sq = sq[rows]
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    one = np.ones((sq.shape[0], 1))
    A_ub = np.vstack([np.hstack([sq, -one]), np.hstack([-sq, -one])])
    b_ub = np.concatenate([np.ones(sq.shape[0]), -np.ones(sq.shape[0])])
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    if res.status != 0:
        raise NormalizationFailure(f"could not fit eigenmap weights: {res.message}")
    s = np.maximum(res.x[:m], 0.0)
    return s / s.sum() / lam


def eigenmap(eigen, evaluation, weights="fit", expand_clusters=True):
    """Columns used, their renormalized eigenvalues, weights ``t`` and the map ``Phi``.

    Parameters
    ----------
    weights : "fit", "uniform" or array
        ``"fit"`` picks ``t`` minimizing the sup deviation of ``omega**2``
        from one; ``"uniform"`` uses ``t_j = 1 / (m lam_j)``. Explicit weights
        are rescaled so that ``sum lam_j t_j = 1``.
    expand_clusters : bool
        Use every eigenvector of the clusters holding the requested indices.

    Raises
    ------
    NormalizationFailure
        If ``sum lam_j t_j`` cannot be made equal to one.
    """
    cols = _columns(eigen, evaluation, expand_clusters)
    lam = eigen.renormalized[cols]
    if np.any(lam <= 0):
        raise NormalizationFailure("eigenmap needs positive eigenvalues")
    mu = eigen.weights / eigen.total_measure
    phi = eigen.vectors[:, cols] * np.sqrt(eigen.total_measure)
    if isinstance(weights, str):
        if weights == "fit":
            t = _fit_weights(lam, phi**2, mu)
        elif weights == "uniform":
            t = 1.0 / (len(cols) * lam)
        else:
            raise ValueError(f"unknown weights rule {weights!r}")
    else:
        t = np.asarray(weights, dtype=float)
        if t.shape != lam.shape or np.any(t < 0):
            raise NormalizationFailure("explicit weights must be nonnegative, one per column")
        total = float(np.dot(lam, t))
        if not total > 0:
            raise NormalizationFailure("sum lam_j t_j vanishes")
        t = t / total
    return cols, lam, t, phi * np.sqrt(t)


@dataclass(frozen=True)
class SphereMapReport:
    omega: np.ndarray = field(repr=False)
    delta: float
    omega_energy: float
    harmonic_residual: float
    normalizations: tuple
    weights: np.ndarray
    columns: np.ndarray
    near_critical: bool


def _omega_energy(mesh, omega):
    g = triangle_gradients(mesh, omega)
    mean = omega[mesh.triangles].mean(axis=1)
    return float(np.sum(mesh.triangle_areas * np.einsum("ij,ij->i", g, g) / mean))


def sphere_map_report(eigen, evaluation, f=None, weights="fit", expand_clusters=True,
                      critical_delta=CRITICAL_DELTA):
    """Deviation of the eigenmap from a map into the ``Lambda``-ellipsoid.

    ``harmonic_residual`` is, for Laplace problems, the size of the component
    of ``Delta u`` tangent to the sphere for ``u = Lambda^(1/2) Phi / omega``
    relative to ``Delta u`` itself; for Steklov problems it is the relative
    size of ``K Phi`` on interior vertices. Both vanish for the corresponding
    harmonic maps. ``f`` is accepted for symmetry with the other checks; the
    factor already lives in ``eigen``.
    """
    mesh = eigen.problem.mesh
    cols, lam, t, Phi = eigenmap(eigen, evaluation, weights, expand_clusters)
    mu = eigen.weights / eigen.total_measure
    on = mu > 0
    omega2 = Phi**2 @ lam
    omega = np.sqrt(omega2)
    delta = float(np.max(np.abs(omega2[on] - 1.0)))
    K = eigen.problem.stiffness
    KPhi = K @ Phi
    norms = (float(mu.sum()), float(mu @ omega2), float(np.einsum("ij,ij->", Phi, KPhi)))
    if eigen.kind is Kind.LAPLACE:
        energy = _omega_energy(mesh, omega)
        u = Phi * np.sqrt(lam) / np.maximum(omega, 1e-300)[:, None]
        area = mesh.vertex_areas
        lap = (K @ u) / area[:, None]
        radial = np.einsum("ij,ij->i", lap, u)[:, None] * u
        tangential = lap - radial
        num = np.sqrt(np.sum(area[:, None] * tangential**2))
        den = np.sqrt(np.sum(area[:, None] * lap**2))
    else:
        # omega only lives on the boundary; measure its variation along the loops
        b = mesh.boundary_vertices
        e = mesh.boundary_edges
        lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
        energy = float(np.sum((omega[e[:, 0]] - omega[e[:, 1]]) ** 2 / lengths
                              / (0.5 * (omega[e[:, 0]] + omega[e[:, 1]]))))
        interior = np.setdiff1d(np.arange(mesh.n_vertices), b)
        num = np.linalg.norm(KPhi[interior])
        den = np.linalg.norm(KPhi)
    residual = float(num / den) if den > 0 else 0.0
    return SphereMapReport(omega, delta, energy, residual, norms, t, cols, delta <= critical_delta)


@dataclass(frozen=True)
class EnergyIdentity:
    dirichlet_energy: float
    mass_weighted_sum: float
    gap: float


def energy_identity_check(eigen, evaluation, f=None, weights="uniform", expand_clusters=True):
    """Compare ``int |grad Phi|^2`` with ``sum_j t_j lam_j``.

    ``t_j`` is recomputed here as the mass of ``Phi_j**2`` so that the two
    sides are evaluated independently: the Dirichlet energy from the
    stiffness matrix, the weighted sum from the mass and the eigenvalues.
    """
    cols, lam, _, Phi = eigenmap(eigen, evaluation, weights, expand_clusters)
    mu = eigen.weights / eigen.total_measure
    dirichlet = float(np.einsum("ij,ij->", Phi, eigen.problem.stiffness @ Phi))
    t = mu @ Phi**2
    total = float(np.dot(t, lam))
    return EnergyIdentity(dirichlet, total, abs(dirichlet - total) / max(1.0, abs(dirichlet)))


def dirichlet_ball_eigenvalue(mesh, K, mass, ball):
    """First eigenvalue of the stiffness/mass pencil on the ball with clamped rim.

    Rim vertices are the ball vertices with a neighbour outside the ball.

    Raises
    ------
    BallTooSmall
        If fewer than four free vertices remain.
    """
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[ball] = True
    A = mesh.adjacency
    outside_nb = np.asarray(A[ball] @ (~inside).astype(float)).ravel() > 0
    free = np.asarray(ball)[~outside_nb]
    if free.size < 4:
        raise BallTooSmall(f"ball has {free.size} free vertices, need at least 4")
    Kf = K[free][:, free]
    s = 1.0 / np.sqrt(mass[free])
    Af = Kf.multiply(s[:, None]).multiply(s[None, :]).tocsc()
    if free.size <= 1500:
        return float(sla.eigh(Af.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])
    return float(eigsh(Af, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0])


def farthest_point_centers(mesh, count, start=0):
    """Deterministic farthest-point sample of vertices in the graph metric."""
    graph = mesh.adjacency
    chosen = [start]
    dist = dijkstra(graph, indices=start)
    while len(chosen) < min(count, mesh.n_vertices):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, dijkstra(graph, indices=nxt))
    return np.array(chosen)


@dataclass(frozen=True)
class BadPointReport:
    centers: np.ndarray
    radii: np.ndarray
    lambda_star: np.ndarray = field(repr=False)
    threshold: float
    hits: list
    disjoint_hits: list
    k_m: int
    skipped: int

    @property
    def bound_respected(self):
        return len(self.disjoint_hits) <= self.k_m


def bad_point_scan(mesh, f, eigen, radius_grid, centers=None, k_m=None, max_centers=256,
                   dense_limit=3000, metric_factor=None):
    """Scan geodesic balls for first Dirichlet eigenvalue at most ``lambda_{k_m}(f)``.

    ``lambda_star[i, j]`` belongs to ``centers[i]`` and ``radius_grid[j]``
    (NaN when the ball is too small). The Dirichlet problems use the
    stiffness and the conformal mass of ``f``, so ``lambda_star`` and the
    threshold live in the same metric.
    """
    if eigen.kind is not Kind.LAPLACE:
        raise ValueError("bad-point scan is defined for Laplace problems")
    radii = np.asarray(radius_grid, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radius grid must be positive and strictly ascending")
    if k_m is None:
        k_m = eigen.count - 1
    if not 1 <= k_m < eigen.count:
        raise ValueError(f"k_m={k_m} outside the computed spectrum")
    threshold = float(eigen.values[k_m])
    if centers is None:
        centers = (np.arange(mesh.n_vertices) if mesh.n_vertices <= dense_limit
                   else farthest_point_centers(mesh, max_centers))
    centers = np.asarray(centers, dtype=int)
    K = eigen.problem.stiffness.tocsr()
    values = getattr(f, "values", f)
    mass = mesh.vertex_areas * (np.ones(mesh.n_vertices) if values is None else np.asarray(values))
    lam = np.full((len(centers), len(radii)), np.nan)
    hits, balls, skipped = [], {}, 0
    for i, p in enumerate(centers):
        for j, r in enumerate(radii):
            try:
                ball = geodesic_ball(mesh, int(p), float(r), metric_factor)
                lam[i, j] = dirichlet_ball_eigenvalue(mesh, K, mass, ball)
            except EmptyBall:
                skipped += 1
                continue
            if lam[i, j] <= threshold:
                hits.append((int(p), float(r), float(lam[i, j])))
                balls[(int(p), float(r))] = set(ball.tolist())
    taken, used = [], set()
    for p, r, val in sorted(hits, key=lambda h: (h[1], h[2], h[0])):
        b = balls[(p, r)]
        if used.isdisjoint(b):
            taken.append((p, r, val))
            used |= b
    return BadPointReport(centers, radii, lam, threshold, hits, taken, int(k_m), skipped)
