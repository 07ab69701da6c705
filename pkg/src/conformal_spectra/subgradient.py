"""Finite approximations of the Clarke subdifferential and the pseudo-norm.

A candidate subgradient is a per-vertex density

    psi = sum_i d_i * lam_i * (1 - phi_i**2)

where ``lam_i`` are the renormalized eigenvalues entering ``E``, ``d_i`` the
partial derivatives of ``F`` and ``phi_i`` an orthonormal family taken inside
the eigenspaces. Eigenvectors are rescaled so that ``sum_v w_v phi_v**2 = 1``
for the pairing weights ``w = diag(M(f)) / Area(f)``; with this convention

    dE/dt [f (1 + t h)] = sum_v w_v h_v psi_v

for every candidate at points where the eigenvalues are simple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import ClusterTooLarge, PairingValidationError
from .functional import directional_derivative_fd
from .game import solve_game

DEFAULT_SAMPLES = 32
MAX_CLUSTER = 8


@dataclass(frozen=True)
class Subgradient:
    psi: np.ndarray
    pairing_weights: np.ndarray = field(repr=False)
    provenance: str = "canonical"

    @property
    def mean(self):
        return float(np.dot(self.pairing_weights, self.psi))


@dataclass(frozen=True)
class SubgradientSet:
    """Extreme-point candidates sharing one set of pairing weights.

    ``evaluation`` is kept so that derivative checks can re-evaluate ``E``.
    """

    candidates: tuple
    pairing_weights: np.ndarray = field(repr=False)
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    evaluation: object = field(default=None, repr=False)

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a subgradient set needs at least one candidate")

    def __len__(self):
        return len(self.candidates)

    @property
    def matrix(self):
        """Candidates as columns, shape (n_vertices, n_candidates)."""
        return np.column_stack([c.psi for c in self.candidates])

    @property
    def support(self):
        return np.flatnonzero(self.pairing_weights > 0)

    @property
    def scale(self):
        """``sum |d_i| lam_i``, the natural magnitude of ``psi``."""
        ev = self.evaluation
        if ev is None:
            return float(np.max(np.abs(self.matrix)))
        return float(np.sum(np.abs(ev.d) * ev.renormalized))


@dataclass(frozen=True)
class PseudoNormResult:
    value: float
    tau: np.ndarray
    worst_mix: np.ndarray
    lp_status: str
    gap: float
    subgradients: SubgradientSet = field(repr=False)


def _haar(dim, rng):
    Z = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def generate_candidates(eigen, evaluation, samples=DEFAULT_SAMPLES, seed=0, max_cluster=MAX_CLUSTER):
    """Candidate subgradients of ``E`` at the evaluated factor.

    For every multiplicity cluster holding requested indices the set gets
    the computed eigenbasis (and its cyclic reassignments when the cluster is
    larger than the number of requests), ``samples`` Haar-random orthonormal
    frames drawn jointly for all such clusters, and one candidate where each
    ``phi_i**2`` is replaced by the cluster average. When every cluster is a
    singleton exactly one candidate is returned.

    Raises
    ------
    ClusterTooLarge
        If a cluster with requested indices has more than ``max_cluster`` members.
    """
    spec = evaluation.spec
    area = eigen.total_measure
    w = eigen.weights / area
    vecs = eigen.vectors * np.sqrt(area)
    lam = eigen.renormalized
    d = np.asarray(evaluation.d, dtype=float)
    # requested positions grouped by cluster
    groups = []
    for cl in eigen.clusters:
        pos = [p for p, k in enumerate(spec.indices) if k in cl]
        if pos:
            if len(cl) > max_cluster:
                raise ClusterTooLarge(f"cluster of dimension {len(cl)} exceeds max_cluster={max_cluster}")
            groups.append((np.asarray(cl), pos))
    # each request p owns the column ``slot[p]`` of its cluster basis
    slot = {}
    for cl, pos in groups:
        for p in pos:
            slot[p] = int(np.flatnonzero(cl == spec.indices[p])[0])
    coef = d * lam[list(spec.indices)]

    def psi_from(bases):
        psi = np.zeros(eigen.vectors.shape[0])
        for (cl, pos), B in zip(groups, bases):
            for p in pos:
                psi += coef[p] * (1.0 - B[:, slot[p]] ** 2)
        return psi

    canonical = [vecs[:, cl] for cl, _ in groups]
    out = [Subgradient(psi_from(canonical), w, "canonical")]
    multi = [i for i, (cl, _) in enumerate(groups) if len(cl) > 1]
    if multi:
        for i in multi:
            cl, pos = groups[i]
            for s in range(1, len(cl)):
                bases = list(canonical)
                bases[i] = np.roll(canonical[i], -s, axis=1)
                out.append(Subgradient(psi_from(bases), w, f"shift:{cl[0]}:{s}"))
        rng = np.random.default_rng(seed)
        for j in range(samples):
            bases = list(canonical)
            for i in multi:
                bases[i] = canonical[i] @ _haar(len(groups[i][0]), rng)
            out.append(Subgradient(psi_from(bases), w, f"haar:{j}"))
        sym = np.zeros(eigen.vectors.shape[0])
        for (cl, pos), B in zip(groups, canonical):
            avg = np.mean(B**2, axis=1)
            for p in pos:
                sym += coef[p] * (1.0 - avg)
        out.append(Subgradient(sym, w, "symmetrized"))
    return SubgradientSet(tuple(out), w, samples, seed, evaluation)


def validate_pairing(sset, tol=1e-8):
    """Check the zero-mean identity ``sum_v w_v psi_v = 0`` for every candidate.

    The tolerance is relative to ``max(1, sset.scale)``.

    Raises
    ------
    PairingValidationError
    """
    scale = max(1.0, sset.scale)
    worst = max(abs(c.mean) for c in sset.candidates)
    if worst > tol * scale:
        raise PairingValidationError(f"candidate mean {worst:.3e} exceeds {tol:g} x {scale:.3g}")
    return worst


def pseudo_norm(sset):
    """``|dE| = -min_tau max_a <tau, psi_a>`` over probability vectors ``tau`` on the support.

    ``tau`` is returned over all mesh vertices (zero off the support);
    ``worst_mix`` holds convex weights over the candidates.
    """
    rows = sset.support
    P = sset.matrix[rows]
    game = solve_game(P)
    tau = np.zeros(len(sset.pairing_weights))
    tau[rows] = game.tau
    return PseudoNormResult(-game.value, tau, game.mix, game.status, game.gap, sset)


@dataclass(frozen=True)
class CriticalityReport:
    """Outcome of :func:`is_critical`.

    ``tau`` witnesses non-criticality (``max_a <tau, psi_a> = -value``);
    ``mixture`` is the convex combination minimizing ``||sum c_a psi_a||_inf``
    with that norm in ``mixture_sup``; ``nonnegative_mix`` says whether some
    mixture is entrywise ``>= -tol``.
    """

    critical: bool
    value: float
    tol: float
    tau: np.ndarray
    mixture: np.ndarray
    mixture_sup: float
    nonnegative_mix: bool
    zero_in_hull: bool


def _min_sup_mixture(P):
    n, k = P.shape
    if k == 1:
        return np.ones(1), float(np.max(np.abs(P)))
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([P, -ones]), np.hstack([-P, -ones])])
    A_eq = np.zeros((1, k + 1))
    A_eq[0, :k] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(None, None)], method="highs")
    c = np.maximum(res.x[:k], 0.0)
    c /= c.sum()
    return c, float(np.max(np.abs(P @ c)))


def is_critical(sset, tol=None, relative=False):
    """Decide ``|dE(f)| <= tol`` and return both kinds of certificate.

    With ``relative=True`` the tolerance is multiplied by ``sset.scale``.
    The default is ``10 * eig_tol * max(1, scale)``.
    """
    scale = max(1.0, sset.scale)
    if tol is None:
        eig_tol = sset.evaluation.eigen.eig_tol if sset.evaluation is not None else 1e-8
        tol = 10.0 * eig_tol * scale
    elif relative:
        tol = tol * sset.scale
    res = pseudo_norm(sset)
    mix, sup = _min_sup_mixture(sset.matrix[sset.support])
    critical = res.value <= tol
    return CriticalityReport(bool(critical), res.value, float(tol), res.tau, mix, sup,
                             bool(res.value <= tol), bool(sup <= tol))


@dataclass(frozen=True)
class SupportCheck:
    support_value: float
    fd_value: float
    rel_error: float
    unstable: bool


def support_function(sset, h):
    """``max_a sum_v w_v h_v psi_a(v)`` for a density ``h`` with ``<w, h> = 1``."""
    h = _density(sset, h)
    return float(np.max((sset.pairing_weights * h) @ sset.matrix))


def _density(sset, h):
    h = np.asarray(h, dtype=float)
    if h.shape != sset.pairing_weights.shape:
        raise ValueError("direction has the wrong length")
    if np.any(h < 0):
        raise ValueError("direction must be nonnegative")
    mass = float(np.dot(sset.pairing_weights, h))
    if mass <= 0:
        raise ValueError("direction has zero mass on the support")
    return h / mass


def support_function_check(sset, h, fd=True, **fd_kwargs):
    """Compare the support function along ``h`` with a finite difference of ``E``.

    ``h`` is rescaled so that ``<w, h> = 1``. The probed factors are
    ``f (1 + t h)``; see :func:`directional_derivative_fd`.
    """
    h = _density(sset, h)
    value = support_function(sset, h)
    if not fd:
        return SupportCheck(value, float("nan"), float("nan"), False)
    ev = sset.evaluation
    kw = dict(eig_tol=ev.eigen.eig_tol, cluster_tol=ev.eigen.cluster_tol)
    kw.update(fd_kwargs)
    r = directional_derivative_fd(ev.spec, ev.eigen.problem.mesh, ev.factor, h, **kw)
    err = abs(r.value - value) / max(abs(r.value), abs(value), 1e-300)
    return SupportCheck(value, r.value, float(err), r.unstable)
