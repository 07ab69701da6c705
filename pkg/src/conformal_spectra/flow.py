"""Descent flow driven by the pseudo-norm game, and min-max over path families.

One flow iteration evaluates ``E``, builds candidate subgradients, solves the
pseudo-norm game and moves the factor along the optimal nonnegative density:

    f <- f * (1 + dt * h),   h = tau / w,   <w, h> = 1.

Steps are accepted by an Armijo test against the pseudo-norm; rejected steps
halve ``dt``. Because ``h >= 0`` every trial factor stays positive.

By default ``h`` is the flattest density achieving half of the optimal slope
(:func:`spread_direction`); ``direction="optimal"`` uses ``tau`` itself.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize_scalar

from .eigen import DEFAULT_CLUSTER_TOL, DEFAULT_EIG_TOL
from .exceptions import ConfigError, EndpointNotCritical, NumericalError
from .functional import evaluate
from .mesh import ConformalFactor
from .subgradient import DEFAULT_SAMPLES, MAX_CLUSTER, generate_candidates, pseudo_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowConfig:
    """Step control and stopping rules.

    ``ps_eps`` is relative to ``sum |d_i| lam_i`` when ``ps_relative`` is set.
    ``subgrad_window`` is the relative gap below which eigenvalues are treated
    as one cluster when building candidates; a window wider than the
    eigenvalue ``cluster_tol`` turns nearly multiple eigenvalues into an
    enlarged subdifferential and prevents zig-zagging between crossings.
    ``run_flow`` multiplies the window by ``window_shrink`` each time the
    pseudo-norm falls below the threshold, and only stops once the window
    has reached ``window_min``.
    """

    dt_init: float = 0.05
    dt_min: float = 1e-7
    dt_max: float = 1.0
    armijo_c: float = 0.1
    ps_eps: float = 1e-3
    ps_relative: bool = True
    max_steps: int = 200
    f_floor: float = 1e-6
    renormalize_each_step: bool = True
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    subgrad_window: float = 2e-2
    window_min: float = 1e-3
    window_shrink: float = 0.5
    eig_tol: float = DEFAULT_EIG_TOL
    cluster_tol: float = DEFAULT_CLUSTER_TOL
    max_cluster: int = MAX_CLUSTER
    smoothing: int = 0
    direction: str = "spread"
    spread_slack: float = 0.5
    snapshot_every: int = 1

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if not (0 < self.armijo_c < 1):
            raise ConfigError("armijo_c must lie in (0, 1)")
        if self.max_steps < 0 or self.f_floor <= 0 or self.ps_eps < 0:
            raise ConfigError("max_steps >= 0, f_floor > 0 and ps_eps >= 0 required")
        if not (self.cluster_tol <= self.window_min <= self.subgrad_window):
            raise ConfigError("need cluster_tol <= window_min <= subgrad_window")
        if not (0 < self.window_shrink < 1):
            raise ConfigError("window_shrink must lie in (0, 1)")
        if self.direction not in ("optimal", "spread"):
            raise ConfigError("direction must be 'optimal' or 'spread'")
        if not (0 <= self.spread_slack < 1):
            raise ConfigError("spread_slack must lie in [0, 1)")
        if self.smoothing < 0 or self.snapshot_every < 0:
            raise ConfigError("smoothing and snapshot_every must be nonnegative")

    def as_dict(self):
        return asdict(self)


@dataclass
class FlowRecord:
    step: int
    energy: float
    pseudo_norm: float
    dt: float
    accepted: bool
    renormalized: np.ndarray
    factor: Optional[np.ndarray] = field(default=None, repr=False)
    trials: int = 0
    window: float = 0.0


@dataclass
class FlowTrace:
    """Iterates of one flow. ``status`` is ``converged``, ``stalled`` or ``max_steps``."""

    records: list = field(default_factory=list)
    ps_points: list = field(default_factory=list)
    status: str = "running"
    final_factor: Optional[ConformalFactor] = None

    def __len__(self):
        return len(self.records)

    @property
    def energies(self):
        return np.array([r.energy for r in self.records])

    @property
    def pseudo_norms(self):
        return np.array([r.pseudo_norm for r in self.records])

    def accepted_energies(self):
        """Energies at the start point and after every accepted step."""
        out = [self.records[0].energy] if self.records else []
        for prev, rec in zip(self.records, self.records[1:]):
            if prev.accepted:
                out.append(rec.energy)
        return np.array(out)


@dataclass(frozen=True)
class StepResult:
    factor: np.ndarray
    accepted: bool
    dt_used: float
    energy: float
    trials: int


def _smooth(mesh, h, w, iterations):
    A = mesh.adjacency.copy()
    A.data[:] = 1.0
    A = A.tocsr()
    for _ in range(iterations):
        h = (w * h + A @ (w * h)) / (w + A @ w + 1e-300)
        h = np.where(w > 0, h, 0.0)
    return h / np.dot(w, h)


def downhill_direction(result, mesh=None, smoothing=0):
    """Nonnegative density ``h = tau / w`` with ``<w, h> = 1``.

    Without smoothing, ``max_a sum_v w_v h_v psi_a(v) <= -result.value``
    holds up to the LP gap; this is asserted.
    """
    sset = result.subgradients
    w = sset.pairing_weights
    h = np.zeros_like(w)
    on = w > 0
    h[on] = result.tau[on] / w[on]
    h /= np.dot(w, h)
    if smoothing and mesh is not None:
        return _smooth(mesh, h, w, smoothing)
    slope = float(np.max((w * h) @ sset.matrix))
    bound = -result.value + 1e-8 * max(1.0, sset.scale)
    if slope > bound:
        raise NumericalError(f"downhill direction has slope {slope:.6g} above {bound:.6g}")
    return h


def spread_direction(result, slack=0.5):
    """Flattest density whose slope is within ``slack`` of the optimal one.

    Solves ``min ||h||_inf`` over ``h >= 0``, ``<w, h> = 1`` subject to
    ``max_a sum_v w_v h_v psi_a(v) <= -(1 - slack) |dE|``. The optimal
    ``tau`` of the game is typically a vertex of the simplex and moves a
    handful of vertices; this direction spreads the same descent over the
    whole region where it is available. With ``slack = 1/2`` it still
    satisfies the descent bound of the deformation argument.
    """
    sset = result.subgradients
    w = sset.pairing_weights
    rows = np.flatnonzero(w > 0)
    if result.value <= 0:
        return downhill_direction(result)
    P = sset.matrix[rows]
    n, k = P.shape
    # variables: tau (n), s; minimize s with tau_v <= s w_v
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_slope = np.hstack([P.T, np.zeros((k, 1))])
    b_slope = np.full(k, -(1.0 - slack) * result.value)
    A_cap = sparse.hstack([sparse.eye(n), -sparse.csr_matrix(w[rows][:, None])])
    A_ub = sparse.vstack([sparse.csr_matrix(A_slope), A_cap]).tocsr()
    b_ub = np.concatenate([b_slope, np.zeros(n)])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        return downhill_direction(result)
    h = np.zeros_like(w)
    h[rows] = np.maximum(res.x[:n], 0.0) / w[rows]
    return h / np.dot(w, h)


def _measure_weights(mesh, spec):
    from .fem import Kind

    return mesh.boundary_lengths if spec.kind is Kind.STEKLOV else mesh.vertex_areas


def flow_step(f, h, config, energy, e0, slope, dt, measure=None, target=None):
    """One Armijo-controlled step from ``f`` along the relative density ``h``.

    ``energy`` maps a factor array to ``E``; ``slope`` is the (positive)
    pseudo-norm used in the sufficient-decrease test. The step size halves
    on rejection until it drops below ``dt_min``, in which case the step is
    reported as not accepted and ``f`` is returned unchanged.
    """
    trials = 0
    while dt >= config.dt_min:
        trials += 1
        f_new = np.maximum(f * (1.0 + dt * h), config.f_floor)
        if config.renormalize_each_step and measure is not None:
            f_new = f_new * (target / float(np.dot(measure, f_new)))
            f_new = np.maximum(f_new, config.f_floor)
        try:
            e_new = energy(f_new)
        except NumericalError as exc:
            log.debug("trial step dt=%g failed: %s", dt, exc)
            dt *= 0.5
            continue
        if e_new <= e0 - config.armijo_c * dt * slope:
            return StepResult(f_new, True, dt, e_new, trials)
        dt *= 0.5
    return StepResult(f, False, dt, e0, trials)


class _Stepper:
    """Shared evaluation logic for run_flow and minmax_deform."""

    def __init__(self, spec, mesh, config):
        self.spec, self.mesh, self.config = spec, mesh, config
        self.measure = _measure_weights(mesh, spec)

    def factor(self, values):
        return ConformalFactor(values, self.spec.support)

    def energy(self, values):
        return evaluate(self.spec, self.mesh, self.factor(values), eig_tol=self.config.eig_tol,
                        cluster_tol=self.config.cluster_tol).value

    def analyse(self, values, window=None):
        c = self.config
        ev = evaluate(self.spec, self.mesh, self.factor(values), eig_tol=c.eig_tol,
                      cluster_tol=c.subgrad_window if window is None else window)
        sset = generate_candidates(ev.eigen, ev, samples=c.samples, seed=c.seed, max_cluster=c.max_cluster)
        pn = pseudo_norm(sset)
        threshold = c.ps_eps * sset.scale if c.ps_relative else c.ps_eps
        return ev, pn, threshold

    def step(self, values, ev, pn, dt):
        c = self.config
        slope = max(pn.value, 0.0)
        if c.direction == "spread":
            h = spread_direction(pn, c.spread_slack)
            slope *= 1.0 - c.spread_slack
        else:
            h = downhill_direction(pn, self.mesh, c.smoothing)
        target = float(np.dot(self.measure, values))
        return flow_step(values, h, c, self.energy, ev.value, slope, dt, self.measure, target)


def run_flow(spec, mesh, f0=None, config=None):
    """Flow from ``f0`` until the pseudo-norm drops below ``ps_eps``, a stall or ``max_steps``.

    Every iterate is recorded; ``ps_points`` lists iterates whose pseudo-norm
    is below the threshold.
    """
    config = config or FlowConfig()
    st = _Stepper(spec, mesh, config)
    f = np.ones(mesh.n_vertices) if f0 is None else np.array(getattr(f0, "values", f0), dtype=float)
    trace = FlowTrace()
    dt = config.dt_init
    window = config.subgrad_window
    for step in range(config.max_steps + 1):
        try:
            ev, pn, threshold = st.analyse(f, window)
            while pn.value <= threshold and window > config.window_min:
                window = max(window * config.window_shrink, config.window_min)
                ev, pn, threshold = st.analyse(f, window)
        except NumericalError as exc:
            exc.args = (f"flow step {step}: {exc}",) + exc.args[1:]
            raise
        snap = f.copy() if config.snapshot_every and step % config.snapshot_every == 0 else None
        rec = FlowRecord(step, ev.value, pn.value, 0.0, False, ev.renormalized.copy(), snap, window=window)
        trace.records.append(rec)
        if pn.value <= threshold:
            trace.ps_points.append(step)
            trace.status = "converged"
            break
        if step == config.max_steps:
            trace.status = "max_steps"
            break
        res = st.step(f, ev, pn, dt)
        rec.dt, rec.accepted, rec.trials = res.dt_used, res.accepted, res.trials
        log.info("step %d E=%.10g |dE|=%.4g dt=%.3g accepted=%s", step, ev.value, pn.value, res.dt_used, res.accepted)
        if not res.accepted:
            trace.status = "stalled"
            break
        f = res.factor
        dt = min(2.0 * res.dt_used, config.dt_max)
    trace.final_factor = st.factor(f)
    return trace


@dataclass
class PathFamily:
    """Piecewise-linear path of factors with pinned endpoints."""

    f_start: np.ndarray
    f_end: np.ndarray
    nodes: list

    @classmethod
    def linear(cls, f_start, f_end, n_nodes=17):
        """Path with ``n_nodes`` nodes in total, endpoints included."""
        if n_nodes < 2:
            raise ConfigError("a path needs at least two nodes")
        a = np.array(getattr(f_start, "values", f_start), dtype=float)
        b = np.array(getattr(f_end, "values", f_end), dtype=float)
        s = np.linspace(0.0, 1.0, n_nodes)[1:-1]
        return cls(a, b, [(1 - t) * a + t * b for t in s])

    @classmethod
    def singleton(cls, f):
        a = np.array(getattr(f, "values", f), dtype=float)
        return cls(a, a, [])

    def all_nodes(self):
        return [self.f_start] + list(self.nodes) + [self.f_end]


@dataclass(frozen=True)
class PSCandidate:
    position: float
    energy: float
    pseudo_norm: float
    condition_margin: float
    condition_holds: bool
    factor: np.ndarray = field(repr=False)


@dataclass
class MinmaxResult:
    c_estimate: float
    traces: list
    ps_candidates: list
    family: PathFamily
    history: list


def _condition_margin(pn):
    """``min_v (sum_a c_a psi_a)(v) + delta`` at the optimal mixture, ``delta = |dE|``.

    A nonnegative margin means the mixture is entrywise ``>= -delta``, i.e.
    ``-(psi + delta) <= 0``.
    """
    sset = pn.subgradients
    mix = sset.matrix[sset.support] @ pn.worst_mix
    return float(mix.min() + max(pn.value, 0.0))


def minmax_deform(spec, mesh, family, config=None, max_sweeps=50, segment_samples=3,
                  refine_segments=2, level_eps=0.05, check_endpoints=True, endpoint_tol=0.05,
                  patience=5, tol=1e-8):
    """Deform the interior nodes of ``family`` downhill and estimate the min-max level.

    Each sweep applies one flow step to every interior node. The level of the
    deformed path is the largest ``E`` over its nodes and ``segment_samples``
    interior points of every segment; ``c_estimate`` is the smallest level
    seen; sweeps stop early after ``patience`` sweeps without improvement
    of the level. Palais-Smale candidates are the nodes within ``level_eps`` (relative)
    of ``c_estimate``, ordered by pseudo-norm, together with the margin of the
    sign condition ``psi >= -delta`` for the optimal mixture.

    A family without interior nodes whose endpoints coincide is delegated to
    :func:`run_flow`.

    Raises
    ------
    EndpointNotCritical
        When ``check_endpoints`` is set and an endpoint has pseudo-norm above
        ``endpoint_tol`` times ``sum |d_i| lam_i``.
    """
    config = config or FlowConfig()
    st = _Stepper(spec, mesh, config)
    start_bytes = (family.f_start.tobytes(), family.f_end.tobytes())
    if not family.nodes and np.array_equal(family.f_start, family.f_end) and not check_endpoints:
        trace = run_flow(spec, mesh, family.f_start, config)
        return MinmaxResult(trace.records[-1].energy, [trace], [], family, [trace.records[-1].energy])
    ends = []
    for name, f in (("start", family.f_start), ("end", family.f_end)):
        ev, pn, _ = st.analyse(f)
        limit = endpoint_tol * pn.subgradients.scale + tol
        if check_endpoints and pn.value > limit:
            raise EndpointNotCritical(f"{name} endpoint has pseudo-norm {pn.value:.4g} > {limit:.4g}")
        ends.append((ev, pn))
    nodes = [np.array(n, dtype=float) for n in family.nodes]
    dts = [config.dt_init] * len(nodes)
    active = [True] * len(nodes)
    traces = [FlowTrace() for _ in nodes]
    state = [None] * len(nodes)
    history = []
    best, best_pos, best_points = np.inf, 0.0, None
    since = 0

    def level(points, energies):
        """Sup of ``E`` along the path: samples, then a bounded search on the best segments."""
        best_val, best_pos = max((e, float(i)) for i, e in enumerate(energies))
        seg = []
        for i, (a, b) in enumerate(zip(points, points[1:])):
            top = max(energies[i], energies[i + 1])
            if segment_samples and not np.array_equal(a, b):
                for s in np.arange(1, segment_samples + 1) / (segment_samples + 1):
                    e = st.energy((1 - s) * a + s * b)
                    top = max(top, e)
                    if e > best_val:
                        best_val, best_pos = e, i + s
            seg.append((top, i))
        for _, i in sorted(seg, reverse=True)[:refine_segments]:
            a, b = points[i], points[i + 1]
            if not segment_samples or np.array_equal(a, b):
                continue
            r = minimize_scalar(lambda s: -st.energy((1 - s) * a + s * b), bounds=(0.0, 1.0),
                                method="bounded", options={"xatol": 1e-4})
            if -r.fun > best_val:
                best_val, best_pos = float(-r.fun), i + float(r.x)
        return best_val, best_pos

    for sweep in range(max_sweeps + 1):
        for i, f in enumerate(nodes):
            if state[i] is None or state[i][2] is not f:
                ev, pn, threshold = st.analyse(f)
                state[i] = (ev, pn, f, threshold)
        energies = [ends[0][0].value] + [s[0].value for s in state] + [ends[1][0].value]
        points = [family.f_start] + nodes + [family.f_end]
        lev, pos = level(points, energies)
        history.append(lev)
        if lev < best - 1e-9 * max(1.0, abs(lev)):
            since = 0
        else:
            since += 1
        if lev < best:
            best, best_pos, best_points = lev, pos, [p.copy() for p in points]
        if sweep == max_sweeps or not any(active) or (patience and since >= patience):
            break
        for i, f in enumerate(nodes):
            ev, pn, _, threshold = state[i]
            rec = FlowRecord(len(traces[i]), ev.value, pn.value, 0.0, False, ev.renormalized.copy(),
                             f.copy() if config.snapshot_every else None)
            traces[i].records.append(rec)
            if not active[i]:
                continue
            if pn.value <= threshold:
                traces[i].ps_points.append(rec.step)
                traces[i].status = "converged"
                active[i] = False
                continue
            res = st.step(f, ev, pn, dts[i])
            rec.dt, rec.accepted, rec.trials = res.dt_used, res.accepted, res.trials
            if res.accepted:
                nodes[i] = res.factor
                dts[i] = min(2.0 * res.dt_used, config.dt_max)
            else:
                traces[i].status = "stalled"
                active[i] = False
    for i, tr in enumerate(traces):
        tr.final_factor = st.factor(nodes[i])
        if tr.status == "running":
            tr.status = "max_steps"
    if (family.f_start.tobytes(), family.f_end.tobytes()) != start_bytes:
        raise NumericalError("endpoint factors were modified")
    cands = []
    pool = [(0.0, ends[0][0], ends[0][1], family.f_start)]
    pool += [(float(i + 1), s[0], s[1], nodes[i]) for i, s in enumerate(state)]
    pool.append((float(len(nodes) + 1), ends[1][0], ends[1][1], family.f_end))
    if best_points is not None and best_pos != round(best_pos):
        i = int(np.floor(best_pos))
        t = best_pos - i
        f = (1 - t) * best_points[i] + t * best_points[i + 1]
        ev, pn, _ = st.analyse(f)
        pool.append((best_pos, ev, pn, f))
    width = level_eps * max(1.0, abs(best))
    for pos, ev, pn, f in pool:
        if ev.value >= best - width:
            margin = _condition_margin(pn)
            ok = margin >= -tol * max(1.0, pn.subgradients.scale)
            cands.append(PSCandidate(pos, ev.value, pn.value, margin, bool(ok), f))
    cands.sort(key=lambda c: c.pseudo_norm)
    out_family = replace(family, nodes=nodes)
    return MinmaxResult(float(best), traces, cands, out_family, history)
