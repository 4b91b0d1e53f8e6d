"""Closed-form special cases of second order models.

* binary ``x`` and real ``y``: the Gaussian mixture (``x -> y``) and the
  Gaussian with sigmoid response (``y -> x``),
* the reparameterization of the mixture's non-causal conditional
  ``p(x=1|y) = 1 / (beta exp(alpha y) + 1)``,
* tanh kernels for all-binary models and the OR/AND-gate construction with a
  brute-force check of how complex the non-causal conditionals become.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import lsq_linear
from scipy.special import expit, ndtr

SATURATION = 20.0
DEFAULT_FIT_TOLERANCE = 1e-3


@dataclass(frozen=True)
class GaussMixtureModel:
    """``p(x=1) = gamma``, ``y | x=j ~ N(nu_j, rho^2)``."""

    gamma: float
    nu0: float
    nu1: float
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def marginal_density(self, y):
        y = np.asarray(y, dtype=float)
        return (1 - self.gamma) * _normal_pdf(y, self.nu0, self.rho) + self.gamma * _normal_pdf(y, self.nu1, self.rho)

    def posterior(self, y):
        """``p(x=1 | y)`` by Bayes' rule."""
        y = np.asarray(y, dtype=float)
        a = self.gamma * _normal_pdf(y, self.nu1, self.rho)
        return a / (a + (1 - self.gamma) * _normal_pdf(y, self.nu0, self.rho))


@dataclass(frozen=True)
class GaussSigmoidModel:
    """``y ~ N(nu, sigma^2)``, ``p(x=1|y) = (1 + tanh(alpha y + beta)) / 2``."""

    nu: float
    sigma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def response(self, y):
        return expit(2.0 * (self.alpha * np.asarray(y, dtype=float) + self.beta))

    def p_x1(self, n_nodes: int = 200) -> float:
        """Marginal ``p(x=1)`` by Gauss-Hermite quadrature."""
        t, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        return float(w @ self.response(self.nu + self.sigma * t) / np.sqrt(2 * np.pi))


def _normal_pdf(y, mu, sd):
    return np.exp(-0.5 * ((y - mu) / sd) ** 2) / (np.sqrt(2 * np.pi) * sd)


def sample_gauss_mixture(model: GaussMixtureModel, n: int, rng: np.random.Generator):
    """Return ``(x, y)`` arrays of length ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = (rng.random(n) < model.gamma).astype(float)
    y = np.where(x == 1, model.nu1, model.nu0) + model.rho * rng.standard_normal(n)
    return x, y


def sample_gauss_sigmoid(model: GaussSigmoidModel, n: int, rng: np.random.Generator):
    """Return ``(x, y)`` arrays of length ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    y = model.nu + model.sigma * rng.standard_normal(n)
    x = (rng.random(n) < model.response(y)).astype(float)
    return x, y


def unique_gamma(nu: float, sigma: float, beta_threshold: float) -> float:
    """Mass of ``N(nu, sigma^2)`` below ``beta_threshold``: the input probability
    that makes the thresholded mixture marginal Gaussian."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return float(ndtr((beta_threshold - nu) / sigma))


def noncausal_sigmoid_params(model: GaussMixtureModel) -> Tuple[float, float]:
    """``(alpha, beta)`` with ``p(x=1|y) = 1 / (beta exp(alpha y) + 1)`` for the mixture."""
    g = model.gamma
    if g <= 0.0 or g >= 1.0:
        raise ValueError("gamma must lie strictly inside (0, 1)")
    r2 = model.rho ** 2
    alpha = (model.nu0 - model.nu1) / r2
    beta = (1 - g) / g * np.exp((model.nu1 ** 2 - model.nu0 ** 2) / (2 * r2))
    return float(alpha), float(beta)


def logistic_response(alpha: float, beta: float, y):
    """``1 / (beta exp(alpha y) + 1)`` evaluated stably."""
    return expit(-(alpha * np.asarray(y, dtype=float) + np.log(beta)))


# -- binary tanh kernels and gates --------------------------------------------

@dataclass(frozen=True)
class TanhBinaryKernel:
    lambda0: float
    lambda_parents: tuple = ()

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambda_parents)
        if not np.isfinite(self.lambda0) or not np.all(np.isfinite(lam)):
            raise ValueError("kernel entries must be finite")
        object.__setattr__(self, "lambda_parents", lam)

    def argument(self, parent_bits) -> float:
        bits = np.asarray(parent_bits, dtype=float).ravel()
        if bits.size != len(self.lambda_parents):
            raise ValueError(f"expected {len(self.lambda_parents)} parent bits")
        return self.lambda0 + float(np.dot(self.lambda_parents, bits))


def tanh_kernel_probability(kernel: TanhBinaryKernel, parent_bits=()) -> float:
    """``p(x=1 | parents) = (1 + tanh(lambda0 + sum lambda_i x_i)) / 2``."""
    bits = np.asarray(parent_bits, dtype=float).ravel()
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("parent bits must be 0 or 1")
    return float(expit(2.0 * kernel.argument(bits)))


def or_gate_kernel(k: float, n_inputs: int) -> TanhBinaryKernel:
    """Smooth OR gate ``(1 + tanh(-k + 2k sum x_i)) / 2``; tends to OR as ``k`` grows."""
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    if not k > 0:
        raise ValueError("k must be positive")
    return TanhBinaryKernel(-float(k), (2.0 * k,) * n_inputs)


def and_gate_kernel(k: float, n_inputs: int) -> TanhBinaryKernel:
    """AND gate from the OR gate by inverting inputs and output.

    ``AND(x) = 1 - OR(1 - x)`` gives argument ``k - 2k sum (1 - x_i)``.
    """
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    return TanhBinaryKernel(float(k) * (1 - 2 * n_inputs), (2.0 * k,) * n_inputs)


def _states(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=int)


def gate_joint_table(kernel: TanhBinaryKernel, n: int) -> Dict[tuple, float]:
    """Exact joint over ``{0,1}^n``: uniform inputs ``x_1..x_{n-1}``, output ``x_n`` from ``kernel``."""
    if not 3 <= n <= 12:
        raise ValueError("n must lie in [3, 12]")
    table = {}
    pin = 0.5 ** (n - 1)
    for s in _states(n):
        p1 = tanh_kernel_probability(kernel, s[:-1])
        table[tuple(int(v) for v in s)] = pin * (p1 if s[-1] == 1 else 1.0 - p1)
    return table


def or_joint_table(n: int, k: float) -> Dict[tuple, float]:
    """Joint table of the smooth OR gate with ``n - 1`` uniform inputs and output ``x_n``."""
    if not 3 <= n <= 12:
        raise ValueError("n must lie in [3, 12]")
    return gate_joint_table(or_gate_kernel(k, n - 1), n)


def conditional_table(joint: Dict[tuple, float], target: int):
    """``p(x_target = 1 | rest)`` for every assignment of the other variables.

    Returns
    -------
    probs : dict
        Assignment of the remaining variables (in index order) -> probability.
    weights : dict
        Assignment -> its marginal probability (the event weight).
    """
    probs, weights = {}, {}
    acc: Dict[tuple, list] = {}
    for state, p in joint.items():
        rest = state[:target] + state[target + 1:]
        a = acc.setdefault(rest, [0.0, 0.0])
        a[state[target]] += p
    for rest, (p0, p1) in acc.items():
        tot = p0 + p1
        weights[rest] = tot
        probs[rest] = p1 / tot if tot > 0 else 0.5
    return probs, weights


def _monomials(n_vars, degree):
    out = []
    for d in range(degree + 1):
        out.extend(itertools.combinations(range(n_vars), d))
    return out


def _design(keys, monos):
    x = np.asarray(keys, dtype=float)
    return np.column_stack([np.prod(x[:, list(m)], axis=1) if m else np.ones(len(x)) for m in monos])


def _censored_lsq(a, t, w, lo_sat, hi_sat):
    """Weighted least squares where saturated targets only penalize falling short of the clamp.

    Each saturated entry gets a sign-constrained slack column, which turns the
    problem into a bounded-variable least-squares problem.
    """
    sw = np.sqrt(w)
    sat = np.flatnonzero(lo_sat | hi_sat)
    slack = np.zeros((len(t), len(sat)))
    slack[sat, np.arange(len(sat))] = np.where(hi_sat[sat], -1.0, 1.0)
    design = np.hstack([a, slack]) * sw[:, None]
    lb = np.r_[np.full(a.shape[1], -np.inf), np.zeros(len(sat))]
    ub = np.full(design.shape[1], np.inf)
    sol = lsq_linear(design, t * sw, bounds=(lb, ub), method="bvls", tol=1e-14)
    coef = sol.x[: a.shape[1]]
    r = a @ coef - t
    r = np.where(hi_sat, np.minimum(r, 0.0), r)
    r = np.where(lo_sat, np.maximum(r, 0.0), r)
    rms = float(np.sqrt(np.sum(w * r ** 2) / np.sum(w)))
    return coef, rms


@dataclass(frozen=True)
class DegreeFit:
    degree: int
    residuals: tuple
    found: bool

    def gap(self) -> float:
        """Residual at the rejected degree just below over the accepted one."""
        if not self.found or self.degree == 0:
            return np.inf
        acc = self.residuals[self.degree]
        return self.residuals[self.degree - 1] / acc if acc > 0 else np.inf


def tanh_degree_residuals(probs: Dict[tuple, float], max_degree: int,
                          weights: Optional[Dict[tuple, float]] = None, saturation: float = SATURATION):
    """RMS residual of the best multilinear tanh-argument fit for each degree ``0..max_degree``."""
    keys = [k for k in probs if weights is None or weights[k] > 0]
    p = np.array([probs[k] for k in keys], dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    w = np.ones(len(keys)) if weights is None else np.array([weights[k] for k in keys], dtype=float)
    with np.errstate(divide="ignore"):
        t = np.arctanh(np.clip(2 * p - 1, -1.0, 1.0))
    hi = t >= saturation
    lo = t <= -saturation
    t = np.clip(t, -saturation, saturation)
    n_vars = len(keys[0]) if keys else 0
    res = []
    for d in range(max_degree + 1):
        a = _design(keys, _monomials(n_vars, min(d, n_vars)))
        res.append(_censored_lsq(a, t, w, lo, hi)[1])
    return res


def minimal_tanh_degree(probs: Dict[tuple, float], max_degree: int,
                        fit_tolerance: float = DEFAULT_FIT_TOLERANCE,
                        weights: Optional[Dict[tuple, float]] = None) -> DegreeFit:
    """Smallest degree of a multilinear ``q`` with ``p = (1 + tanh(q)) / 2`` up to ``fit_tolerance``.

    Targets are ``atanh(2p - 1)`` clamped at +-20; a clamped entry stands for
    an unbounded argument, so any fitted value beyond the clamp counts as
    exact. Events of zero weight are left out. When no degree up to
    ``max_degree`` fits, ``degree`` is ``max_degree + 1`` and ``found`` is
    false.
    """
    res = tanh_degree_residuals(probs, max_degree, weights)
    for d, r in enumerate(res):
        if r <= fit_tolerance:
            return DegreeFit(d, tuple(res), True)
    return DegreeFit(max_degree + 1, tuple(res), False)


def causal_gate_table(kernel: TanhBinaryKernel):
    """Conditional table of the gate output given its inputs, as a dict of probabilities."""
    n_in = len(kernel.lambda_parents)
    return {tuple(int(v) for v in s): tanh_kernel_probability(kernel, s) for s in _states(n_in)}


def reverse_gate_degree(n: int, k: float, fit_tolerance: float = DEFAULT_FIT_TOLERANCE,
                        gate: str = "or") -> DegreeFit:
    """Minimal tanh degree of ``p(x_1 | x_2, ..., x_n)`` for the gate joint distribution."""
    kern = or_gate_kernel(k, n - 1) if gate == "or" else and_gate_kernel(k, n - 1)
    probs, weights = conditional_table(gate_joint_table(kern, n), 0)
    return minimal_tanh_degree(probs, n - 1, fit_tolerance, weights)
