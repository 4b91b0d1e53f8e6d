"""Fisher information, gradient-rank checks and the split-sample dependence experiment.

When the causal and non-causal factorizations of a joint density are
compared, the non-causal parameters ``theta`` (input marginal) and ``eta``
(conditional) are tied by a simple function. Estimating ``theta`` from one
sample and ``eta`` from a second sample, drawn with a *modified* input
distribution, leaves a residual ``e = |f(theta_hat) - eta_hat|`` that shrinks
like ``k^(-1/2)``. ``-log2 e`` therefore grows like ``c log2 k``, and this
growth is the measurable signature of dependence between the two samples.
Non-singular Fisher matrices are what make both estimators root-k consistent.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from .closedform import (
    GaussMixtureModel,
    GaussSigmoidModel,
    noncausal_sigmoid_params,
    sample_gauss_mixture,
)
from .domains import QuadratureGrid

RANK_TOLERANCE = 1e-6


class FisherError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    matrix: np.ndarray
    parameter_labels: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise FisherError("Fisher matrix must be square")
        if np.max(np.abs(m - m.T), initial=0.0) > 1e-9 * max(1.0, np.abs(m).max()):
            raise FisherError("Fisher matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def smallest_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def normalized(self) -> np.ndarray:
        """Correlation form ``D^-1/2 F D^-1/2``.

        Parameters whose information is negligible relative to the largest
        diagonal entry are zeroed rather than rescaled, so round-off does not
        masquerade as information.
        """
        d = np.clip(np.diag(self.matrix), 0, None)
        keep = d > RANK_TOLERANCE ** 2 * max(d.max(initial=0.0), 1e-300)
        inv = np.where(keep, 1.0 / np.sqrt(np.where(keep, d, 1.0)), 0.0)
        return self.matrix * np.outer(inv, inv)

    def rank(self, tol: float = RANK_TOLERANCE) -> int:
        w = np.linalg.eigvalsh(self.normalized())
        return int(np.sum(w > tol * max(w.max(), 1e-300)))

    def is_singular(self, tol: float = RANK_TOLERANCE) -> bool:
        return self.rank(tol) < self.matrix.shape[0]


def numerical_gradient(fn: Callable, theta, step: float = 1e-6, richardson: bool = False) -> np.ndarray:
    """Central-difference gradient of a vector-valued ``fn``; shape ``(len(theta),) + fn(theta).shape``.

    With ``richardson`` the steps ``h`` and ``h/2`` are combined to cancel
    the second-order error term.
    """
    theta = np.asarray(theta, dtype=float)

    def central(h):
        rows = []
        for i in range(theta.size):
            e = np.zeros_like(theta)
            hi = h * max(1.0, abs(theta[i]))
            e[i] = hi
            rows.append((np.asarray(fn(theta + e)) - np.asarray(fn(theta - e))) / (2 * hi))
        return np.array(rows)

    if not richardson:
        return central(step)
    return (4.0 * central(step / 2) - central(step)) / 3.0


# -- parameterized families --------------------------------------------------

def bernoulli_density(theta, nodes):
    x = np.asarray(nodes, dtype=float).reshape(-1)
    t = float(np.ravel(theta)[0])
    return np.where(x == 1, t, 1.0 - t)


def normal_density(theta, nodes):
    """``theta = (nu, sigma)``."""
    nu, sd = theta
    y = np.asarray(nodes, dtype=float).reshape(-1)
    return np.exp(-0.5 * ((y - nu) / sd) ** 2) / (np.sqrt(2 * np.pi) * sd)


def mixture_density(theta, nodes):
    """``theta = (gamma, nu0, nu1, rho)``."""
    g, n0, n1, r = theta
    y = np.asarray(nodes, dtype=float).reshape(-1)
    return ((1 - g) * np.exp(-0.5 * ((y - n0) / r) ** 2) + g * np.exp(-0.5 * ((y - n1) / r) ** 2)) / (
        np.sqrt(2 * np.pi) * r)


def mixture_log_gradient(theta, nodes):
    """Analytic ``grad log p`` of :func:`mixture_density`, shape ``(4, M)``."""
    return mixture_gradient(theta, nodes) / mixture_density(theta, nodes)[None, :]


def mixture_gradient(theta, nodes):
    """Analytic ``grad p`` of the mixture density w.r.t. ``(gamma, nu0, nu1, rho)``, shape ``(4, M)``."""
    g, n0, n1, r = theta
    y = np.asarray(nodes, dtype=float).reshape(-1)
    c = 1.0 / (np.sqrt(2 * np.pi) * r)
    e0 = np.exp(-0.5 * ((y - n0) / r) ** 2)
    e1 = np.exp(-0.5 * ((y - n1) / r) ** 2)
    return np.array([
        c * (e1 - e0),
        c * (1 - g) * (y - n0) / r ** 2 * e0,
        c * g * (y - n1) / r ** 2 * e1,
        c * ((1 - g) * ((y - n0) ** 2 / r ** 3 - 1 / r) * e0 + g * ((y - n1) ** 2 / r ** 3 - 1 / r) * e1),
    ])


def sigmoid_conditional(eta, x_nodes, y_grid: QuadratureGrid):
    """``p_eta(y | x)`` on ``y_grid`` for ``x`` in ``{0, 1}``; ``eta = (sigma, nu, alpha, beta)``.

    The joint is ``N(y; nu, sigma) (1 + tanh(alpha y + beta)) / 2`` for
    ``x = 1``; ``p(x)`` is taken by quadrature on the same grid so each row is
    normalized. Returns shape ``(len(x_nodes), M_y)``.
    """
    sd, nu, a, b = eta
    y = y_grid.nodes[:, 0]
    base = np.exp(-0.5 * ((y - nu) / sd) ** 2) / (np.sqrt(2 * np.pi) * sd)
    s1 = expit(2.0 * (a * y + b))
    rows = []
    for x in np.asarray(x_nodes, dtype=float).reshape(-1):
        joint = base * (s1 if x == 1 else 1.0 - s1)
        rows.append(joint / (y_grid.weights @ joint))
    return np.array(rows)


def logistic_conditional(eta, y_nodes, x_nodes):
    """``p_eta(x | y)`` with ``p(x=1|y) = 1 / (beta exp(alpha y) + 1)``; shape ``(M_y, M_x)``."""
    a, b = eta
    y = np.asarray(y_nodes, dtype=float).reshape(-1)
    p1 = 1.0 / (b * np.exp(a * y) + 1.0)
    x = np.asarray(x_nodes, dtype=float).reshape(-1)
    return np.where(x[None, :] == 1, p1[:, None], 1.0 - p1[:, None])


def _check_underflow(p, what):
    frac = np.mean(p <= 1e-300)
    if frac > 0.01:
        raise FisherError(f"{what} underflows on {frac:.1%} of the grid; narrow the truncation window")


def fisher_marginal(density: Callable, theta, grid: QuadratureGrid, log_gradient: Optional[Callable] = None,
                    labels: Sequence[str] = (), step: float = 1e-6) -> FisherMatrix:
    """``sum_m w_m p(n_m) grad log p(n_m) grad log p(n_m)^T`` over ``grid``.

    ``density(theta, nodes)`` returns values at the nodes; ``log_gradient``
    (analytic, shape ``(d, M)``) is optional, central differences otherwise.
    """
    theta = np.asarray(theta, dtype=float)
    nodes = grid.nodes
    p = np.asarray(density(theta, nodes), dtype=float)
    _check_underflow(p, "density")
    if log_gradient is not None:
        s = np.asarray(log_gradient(theta, nodes))
    else:
        with np.errstate(divide="ignore"):
            s = numerical_gradient(lambda t: np.log(density(t, nodes)), theta, step)
    ok = p > 0
    wp = np.where(ok, grid.weights * p, 0.0)
    s = np.where(ok[None, :], s, 0.0)
    return FisherMatrix((s * wp[None, :]) @ s.T, tuple(labels))


def fisher_conditional(conditional: Callable, eta, input_density: Callable, theta,
                       input_grid: QuadratureGrid, output_grid: QuadratureGrid,
                       labels: Sequence[str] = (), step: float = 1e-6) -> FisherMatrix:
    """Conditional Fisher information of ``p_eta(out | in)`` under the reference ``p_theta(in)``.

    ``conditional(eta, in_nodes, out_grid)`` returns ``(M_in, M_out)`` values.
    """
    eta = np.asarray(eta, dtype=float)
    cond = np.asarray(conditional(eta, input_grid.nodes, output_grid), dtype=float)
    pin = np.asarray(input_density(theta, input_grid.nodes), dtype=float)
    _check_underflow(cond, "conditional density")
    with np.errstate(divide="ignore"):
        s = numerical_gradient(lambda e: np.log(conditional(e, input_grid.nodes, output_grid)), eta, step)
    w = (input_grid.weights * pin)[:, None] * output_grid.weights[None, :] * cond
    ok = cond > 0
    w = np.where(ok, w, 0.0)
    s = np.where(ok[None], s, 0.0)
    mat = np.einsum("imn,mn,jmn->ij", s, w, s)
    return FisherMatrix(mat, tuple(labels))


def _grid_conditional(fn):
    """Adapter: ``fn(eta, in_nodes, out_nodes)`` -> conditional taking an output grid."""
    return lambda eta, in_nodes, out_grid: fn(eta, in_nodes, out_grid.nodes)


logistic_conditional_on_grid = _grid_conditional(logistic_conditional)


# -- appendix gradient matrices ------------------------------------------------

def _sigmoid_log_terms_gradient(eta, y):
    """Gradient of ``log N(y; nu, sigma) + log s(y)`` w.r.t. ``(sigma, nu, alpha, beta)``.

    ``s(y) = (1 + tanh(alpha y + beta)) / 2``. The ``log p(x=1)`` term of
    ``log p(y | x=1)`` does not depend on ``y`` and is dropped; it cancels in
    differences between evaluation points.
    """
    sd, nu, a, b = eta
    y = np.asarray(y, dtype=float)
    one_minus_s = expit(-2.0 * (a * y + b))
    return np.array([
        -1.0 / sd + (y - nu) ** 2 / sd ** 3,
        (y - nu) / sd ** 2,
        2.0 * y * one_minus_s,
        2.0 * one_minus_s,
    ])


def appendix_matrix_pyx(eta0, base_point: float, points: Sequence[float]) -> np.ndarray:
    """4x4 matrix of ``h_j(y_i) - h_j(y_0)`` with ``h = grad_eta log p(y | x=1)``, ``eta = (sigma, nu, alpha, beta)``.

    Rows are parameters, columns the evaluation points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape != (4,):
        raise ValueError("need exactly 4 evaluation points")
    h = _sigmoid_log_terms_gradient(eta0, pts)
    h0 = _sigmoid_log_terms_gradient(eta0, np.array([base_point]))
    return h - h0


def appendix_matrix_py(theta0, points: Sequence[float]) -> np.ndarray:
    """4x4 matrix of ``grad p_theta(y_i)`` for the mixture marginal, ``theta = (gamma, nu0, nu1, rho)``."""
    if not theta0[3] > 0:
        raise ValueError("rho must be positive")
    pts = np.asarray(points, dtype=float)
    if pts.shape != (4,):
        raise ValueError("need exactly 4 evaluation points")
    return mixture_gradient(theta0, pts)


def appendix_matrix_pxy(eta0, points: Sequence[float]) -> np.ndarray:
    """2x2 matrix of ``grad p_eta(x=1 | y_i)`` for ``p = 1 / h``, ``h = beta exp(alpha y) + 1``."""
    a, b = eta0
    y = np.asarray(points, dtype=float)
    if y.shape != (2,):
        raise ValueError("need exactly 2 evaluation points")
    h = b * np.exp(a * y) + 1.0
    dh = np.array([y * b * np.exp(a * y), np.exp(a * y)])
    return -dh / h[None, :] ** 2


def normalized_singular_values(m) -> np.ndarray:
    """Singular values after scaling each nonzero row to unit norm."""
    m = np.asarray(m, dtype=float)
    nrm = np.linalg.norm(m, axis=1)
    scaled = m / np.where(nrm > 0, nrm, 1.0)[:, None]
    return np.linalg.svd(scaled, compute_uv=False)


def smallest_singular_value(m) -> float:
    return float(normalized_singular_values(m)[-1])


def matrix_rank(m, tol: float = RANK_TOLERANCE) -> int:
    sv = normalized_singular_values(m)
    return int(np.sum(sv > tol * max(sv[0], 1e-300)))


# -- estimators used by the experiment -----------------------------------------

def fit_mixture_em(y, init: Optional[GaussMixtureModel] = None, tol: float = 1e-10, max_iter: int = 5000):
    """Maximum-likelihood ``(gamma, nu0, nu1, rho)`` of an equal-width two-Gaussian mixture by EM.

    Labels are ordered so that ``nu0 <= nu1``. Returns ``(params, converged)``.
    """
    y = np.asarray(y, dtype=float)
    if init is None:
        q1, q3 = np.quantile(y, [0.25, 0.75])
        params = np.array([0.5, q1, q3, max(0.5 * y.std(), 1e-3)])
    else:
        params = np.array([init.gamma, init.nu0, init.nu1, init.rho])
    converged = False
    for _ in range(max_iter):
        g, n0, n1, r = params
        l1 = np.log(g) - 0.5 * ((y - n1) / r) ** 2
        l0 = np.log1p(-g) - 0.5 * ((y - n0) / r) ** 2
        w = expit(l1 - l0)
        sw = w.sum()
        g_new = sw / y.size
        n1_new = (w @ y) / sw
        n0_new = ((1 - w) @ y) / (y.size - sw)
        r_new = np.sqrt((w @ (y - n1_new) ** 2 + (1 - w) @ (y - n0_new) ** 2) / y.size)
        new = np.array([g_new, n0_new, n1_new, r_new])
        step = np.max(np.abs(new - params))
        params = new
        if not np.all(np.isfinite(params)) or not 0 < params[0] < 1:
            break
        if step < tol:
            converged = True
            break
    if params[1] > params[2]:
        params = np.array([1 - params[0], params[2], params[1], params[3]])
    return params, converged


def fit_logistic_response(x, y, tol: float = 1e-12, max_iter: int = 100):
    """``(alpha, beta)`` of ``p(x=1|y) = 1 / (beta exp(alpha y) + 1)`` by Newton's method.

    Returns ``(params, converged)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.column_stack([np.ones_like(y), y])
    w = np.zeros(2)
    converged = False
    for _ in range(max_iter):
        p = expit(a @ w)
        g = a.T @ (x - p)
        h = (a * (p * (1 - p))[:, None]).T @ a
        try:
            d = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        w = w + d
        if np.max(np.abs(d)) < tol * max(1.0, np.max(np.abs(w))):
            converged = True
            break
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 1e6:
            break
    return np.array([-w[1], np.exp(-w[0])]), converged


def sigmoid_marginal_x1(eta, n_nodes: int = 120) -> float:
    """``p_eta(x = 1)`` for ``eta = (sigma, nu, alpha, beta)`` by Gauss-Hermite quadrature."""
    sd, nu, a, b = eta
    return GaussSigmoidModel(nu, sd, a, b).p_x1(n_nodes)


def _sample_sigmoid_given_x(eta, x, rng):
    """Rejection sampling of ``y ~ p_eta(y | x)`` for each entry of ``x``."""
    sd, nu, a, b = eta
    y = np.empty(x.size)
    todo = np.arange(x.size)
    while todo.size:
        cand = nu + sd * rng.standard_normal(todo.size)
        s1 = expit(2.0 * (a * cand + b))
        acc = rng.random(todo.size) < np.where(x[todo] == 1, s1, 1.0 - s1)
        y[todo[acc]] = cand[acc]
        todo = todo[~acc]
    return y


def fit_sigmoid_conditional(x, y, init=None):
    """Conditional MLE of ``eta = (sigma, nu, alpha, beta)`` from ``p_eta(y | x)``.

    Returns ``(params, converged)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t, wq = np.polynomial.hermite_e.hermegauss(80)
    wq = wq / np.sqrt(2 * np.pi)
    n1 = x.sum()
    n0 = x.size - n1

    def nll(v):
        lsd, nu, a, b = v
        sd = np.exp(lsd)
        arg = 2.0 * (a * y + b)
        ls = np.where(x == 1, log_expit(arg), log_expit(-arg))
        yy = nu + sd * t
        p1 = wq @ expit(2.0 * (a * yy + b))
        p1 = min(max(p1, 1e-300), 1 - 1e-16)
        val = y.size * lsd + 0.5 * np.sum(((y - nu) / sd) ** 2) - ls.sum()
        return (val + n1 * np.log(p1) + n0 * np.log1p(-p1)) / y.size

    if init is None:
        w, _ = fit_logistic_response(x, y)
        init = (y.std(), y.mean(), -0.5 * w[0], 0.0)
    v0 = np.array([np.log(init[0]), init[1], init[2], init[3]])
    res = minimize(nll, v0, method="BFGS", options={"gtol": 1e-9, "maxiter": 2000})
    lsd, nu, a, b = res.x
    return np.array([np.exp(lsd), nu, a, b]), bool(res.success)


# -- the experiment ------------------------------------------------------------

@dataclass
class DependenceReport:
    direction: str
    sample_sizes: List[int]
    seeds: List[int]
    residuals: Dict[int, List[float]]
    proxy_bits: Dict[int, List[float]]
    fitted_slope: float
    control: bool = False
    failures: List[dict] = field(default_factory=list)

    def median_residuals(self) -> List[float]:
        return [float(np.median(self.residuals[k])) for k in self.sample_sizes]

    def median_proxy_bits(self) -> List[float]:
        return [float(np.median(self.proxy_bits[k])) for k in self.sample_sizes]

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "control": self.control,
            "sample_sizes": list(self.sample_sizes),
            "seeds": list(self.seeds),
            "residuals": {str(k): v for k, v in self.residuals.items()},
            "proxy_bits": {str(k): v for k, v in self.proxy_bits.items()},
            "median_proxy_bits": self.median_proxy_bits(),
            "fitted_slope": self.fitted_slope,
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "seed", "e", "proxy_bits"])
        for k in self.sample_sizes:
            for s, e, b in zip(self.seeds, self.residuals[k], self.proxy_bits[k]):
                w.writerow([k, s, repr(e), repr(b)])
        return buf.getvalue()


def _mixture_cell(true: GaussMixtureModel, gamma_mod: float, k: int, rng, control: bool):
    _, y1 = sample_gauss_mixture(true, k, rng)
    theta_hat, ok1 = fit_mixture_em(y1)
    eta_true = noncausal_sigmoid_params(true)
    if control:
        eta_true = (rng.normal(0.0, 2.0), float(np.exp(rng.normal(0.0, 1.0))))
    modified = GaussMixtureModel(gamma_mod, true.nu0, true.nu1, true.rho)
    _, y2 = sample_gauss_mixture(modified, k, rng)
    p1 = 1.0 / (eta_true[1] * np.exp(eta_true[0] * y2) + 1.0)
    x2 = (rng.random(k) < p1).astype(float)
    eta_hat, ok2 = fit_logistic_response(x2, y2)
    f_hat = noncausal_sigmoid_params(GaussMixtureModel(*theta_hat))
    return float(np.linalg.norm(np.subtract(f_hat, eta_hat))), ok1 and ok2


def _sigmoid_cell(true: GaussSigmoidModel, theta_mod: float, k: int, rng, control: bool):
    eta = np.array([true.sigma, true.nu, true.alpha, true.beta])
    y1 = true.nu + true.sigma * rng.standard_normal(k)
    x1 = (rng.random(k) < true.response(y1)).astype(float)
    theta_hat = x1.mean()
    if control:
        eta = np.array([np.exp(rng.normal(0, 0.3)), rng.normal(0, 1), rng.normal(0, 1.5), rng.normal(0, 0.5)])
    x2 = (rng.random(k) < theta_mod).astype(float)
    y2 = _sample_sigmoid_given_x(eta, x2, rng)
    eta_hat, ok = fit_sigmoid_conditional(x2, y2)
    return float(abs(sigmoid_marginal_x1(eta_hat) - theta_hat)), ok


def split_sample_experiment(direction: str, true_params, modified_input_param: float,
                            sample_sizes: Sequence[int], seeds: Sequence[int],
                            control: bool = False) -> DependenceReport:
    """Residuals of the functional relation between estimates from two independent samples.

    ``direction`` is ``"mixture-forward"`` (true model x -> y is a Gaussian
    mixture; ``true_params = (gamma, nu0, nu1, rho)``; the non-causal input is
    ``y`` and ``modified_input_param`` replaces ``gamma`` in its marginal) or
    ``"sigmoid-forward"`` (true model y -> x; ``true_params = (nu, sigma,
    alpha, beta)``; the non-causal input is ``x`` and
    ``modified_input_param`` is its new ``p(x=1)``).

    With ``control`` the conditional used for the second sample is drawn
    afresh for every cell, independently of the first sample's parameters.
    Each ``(k, seed)`` cell uses its own generator seeded by ``(seed, k)``.
    """
    sizes = [int(k) for k in sample_sizes]
    if any(k < 100 for k in sizes):
        raise ValueError("sample sizes must be >= 100")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sample sizes must be strictly increasing")
    if direction == "mixture-forward":
        true = GaussMixtureModel(*true_params)
        noncausal_sigmoid_params(true)
        cell = lambda k, rng: _mixture_cell(true, modified_input_param, k, rng, control)  # noqa: E731
    elif direction == "sigmoid-forward":
        true = GaussSigmoidModel(*true_params)
        cell = lambda k, rng: _sigmoid_cell(true, modified_input_param, k, rng, control)  # noqa: E731
    else:
        raise ValueError(f"unknown direction {direction!r}")
    residuals: Dict[int, List[float]] = {}
    bits: Dict[int, List[float]] = {}
    failures = []
    for k in sizes:
        residuals[k], bits[k] = [], []
        for s in seeds:
            rng = np.random.default_rng([int(s), k, int(control)])
            e, ok = cell(k, rng)
            if not ok:
                failures.append({"k": k, "seed": int(s), "reason": "estimator did not converge"})
            e = max(e, np.finfo(float).tiny)
            residuals[k].append(e)
            bits[k].append(float(-np.log2(e)))
    med = [np.median(bits[k]) for k in sizes]
    slope = float(np.polyfit(np.log2(sizes), med, 1)[0]) if len(sizes) > 1 else float("nan")
    return DependenceReport(direction, sizes, [int(s) for s in seeds], residuals, bits, slope, control, failures)
