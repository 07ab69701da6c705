"""Objective functionals ``E(f) = F(bar lambda_k1(f), ..., bar lambda_km(f))``."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .eigen import DEFAULT_CLUSTER_TOL, DEFAULT_EIG_TOL, EigenPackage, solve
from .exceptions import ConfigError, DegenerateEigenvalue, StepUnderflow
from .fem import Kind, build_problem
from .mesh import ConformalFactor, Support


class Form(str, Enum):
    NEGSUM = "negsum"
    INVSUM = "invsum"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FunctionalSpec:
    """Which renormalized eigenvalues enter ``E`` and how they are combined.

    Built-in forms are ``negsum`` (``-sum c_i x_i``) and ``invsum``
    (``sum c_i / x_i``). A ``custom`` form needs both ``func`` and ``grad``.
    Every partial derivative must be non-positive on the positive orthant;
    for custom forms this is checked by sampling unless
    ``allow_nonmonotone`` is set.
    """

    kind: Kind = Kind.LAPLACE
    indices: tuple = (1,)
    form: Form = Form.NEGSUM
    coefficients: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    grad: Optional[Callable] = field(default=None, compare=False, repr=False)
    allow_nonmonotone: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "form", Form(self.form))
        indices = tuple(int(k) for k in np.atleast_1d(self.indices))
        if not indices or min(indices) < 1:
            raise ConfigError("indices must be positive integers")
        if list(indices) != sorted(indices):
            raise ConfigError("indices must be non-decreasing")
        object.__setattr__(self, "indices", indices)
        coeffs = self.coefficients
        coeffs = (1.0,) * len(indices) if coeffs is None else tuple(float(c) for c in np.atleast_1d(coeffs))
        if len(coeffs) != len(indices):
            raise ConfigError("need one coefficient per index")
        if any(c <= 0 for c in coeffs):
            raise ConfigError("coefficients must be positive")
        object.__setattr__(self, "coefficients", coeffs)
        if self.form is Form.CUSTOM:
            if self.func is None or self.grad is None:
                raise ConfigError("custom functionals need both func and grad")
            if not self.allow_nonmonotone:
                self._check_monotone()

    @property
    def m(self):
        return len(self.indices)

    @property
    def support(self):
        return Support.BOUNDARY if self.kind is Kind.STEKLOV else Support.INTERIOR

    def _check_monotone(self, samples=256, seed=0):
        rng = np.random.default_rng(seed)
        pts = np.exp(rng.uniform(np.log(1e-2), np.log(1e3), size=(samples, self.m)))
        for x in pts:
            g = np.asarray(self.grad(x), dtype=float)
            if np.any(g > 1e-12 * max(1.0, np.abs(g).max())):
                raise ConfigError(f"custom functional has a positive partial derivative at {x}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        c = np.array(self.coefficients)
        if self.form is Form.NEGSUM:
            return float(-np.dot(c, x))
        if self.form is Form.INVSUM:
            return float(np.sum(c / x))
        return float(self.func(x))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        c = np.array(self.coefficients)
        if self.form is Form.NEGSUM:
            return -c
        if self.form is Form.INVSUM:
            return -c / x**2
        return np.asarray(self.grad(x), dtype=float)


@dataclass(frozen=True)
class Evaluation:
    spec: FunctionalSpec
    factor: ConformalFactor
    value: float
    renormalized: np.ndarray
    d: np.ndarray
    eigen: EigenPackage


def as_factor(mesh, f, support):
    if f is None:
        return ConformalFactor.ones(mesh, support)
    if isinstance(f, ConformalFactor):
        return f
    return ConformalFactor(np.asarray(f, dtype=float), support)


def evaluate(spec, mesh, f=None, eig_tol=DEFAULT_EIG_TOL, cluster_tol=DEFAULT_CLUSTER_TOL,
             method="auto", seed=0):
    """Assemble, solve for ``max(indices) + 1`` pairs and evaluate ``E`` and ``dF``.

    Raises
    ------
    DegenerateEigenvalue
        For ``invsum`` when a requested renormalized eigenvalue is below 1e-12.
    """
    f = as_factor(mesh, f, spec.support)
    problem = build_problem(mesh, f, spec.kind)
    eig = solve(problem, max(spec.indices) + 1, eig_tol=eig_tol, cluster_tol=cluster_tol,
                method=method, seed=seed)
    x = eig.renormalized[list(spec.indices)]
    if spec.form is Form.INVSUM and np.any(x < 1e-12):
        raise DegenerateEigenvalue(f"renormalized eigenvalue {x.min():.3e} too small for invsum")
    value = spec.value(x)
    if not np.isfinite(value):
        raise DegenerateEigenvalue("functional value is not finite")
    return Evaluation(spec, f, value, x, spec.gradient(x), eig)


def energy(spec, mesh, f, **kwargs):
    return evaluate(spec, mesh, f, **kwargs).value


@dataclass(frozen=True)
class FDResult:
    """Finite-difference derivative of ``E`` along ``f -> f (1 + t h)``."""

    value: float
    forward: float
    backward: float
    central: tuple
    unstable: bool


def directional_derivative_fd(spec, mesh, f, h, steps=(2e-3, 1e-3, 5e-4), settle_tol=1e-4,
                              kink_tol=1e-3, **eval_kwargs):
    """Richardson-extrapolated central difference of ``E`` along ``h``.

    ``h`` is a relative variation: the probed factors are ``f * (1 + t h)``,
    which makes ``h = 1`` the pure scaling direction.

    ``unstable`` is set when the extrapolated central values do not settle to
    ``settle_tol`` or when the extrapolated one-sided derivatives disagree by
    more than ``kink_tol`` (relative), the signature of an eigenvalue crossing.

    Raises
    ------
    StepUnderflow
        If no step in the schedule keeps the probed factors positive.
    """
    f = as_factor(mesh, f, spec.support)
    h = np.asarray(h, dtype=float)
    base = f.values
    hmax = float(np.max(np.abs(h))) or 1.0
    steps = [t for t in steps]
    while steps[0] * hmax >= 0.5:
        steps = [t / 4 for t in steps]
        if steps[0] < 1e-12:
            raise StepUnderflow("finite-difference step underflowed while keeping f positive")

    def E(t):
        return evaluate(spec, mesh, ConformalFactor(base * (1.0 + t * h), f.support), **eval_kwargs).value

    e0 = E(0.0)
    plus = [E(t) for t in steps]
    minus = [E(-t) for t in steps]
    central = [(p - q) / (2 * t) for p, q, t in zip(plus, minus, steps)]
    rich = [(4 * central[i + 1] - central[i]) / 3 for i in range(len(steps) - 1)]
    value = rich[-1] if rich else central[-1]
    fwd = [(p - e0) / t for p, t in zip(plus, steps)]
    bwd = [(e0 - q) / t for q, t in zip(minus, steps)]
    fwd_r = 2 * fwd[-1] - fwd[-2] if len(steps) > 1 else fwd[-1]
    bwd_r = 2 * bwd[-1] - bwd[-2] if len(steps) > 1 else bwd[-1]
    scale = max(1.0, abs(fwd_r), abs(bwd_r))
    unsettled = len(rich) > 1 and abs(rich[-1] - rich[-2]) > settle_tol * max(1.0, abs(value))
    kink = abs(fwd_r - bwd_r) > kink_tol * scale
    return FDResult(float(value), float(fwd_r), float(bwd_r), tuple(central), bool(unsettled or kink))
