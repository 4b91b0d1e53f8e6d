"""Maximum-likelihood fitting of second order conditionals.

The per-sample conditional negative log-likelihood

    L(theta) = mean_r [ -theta . T(x_r, pa_r) + z(theta, pa_r) ]

is convex in the natural parameters ``theta``; its gradient is model minus
empirical moments of the sufficient statistics ``T`` and its Hessian is the
average conditional covariance of ``T``. It is minimized by a damped Newton
iteration with Armijo backtracking, started at the maximum-entropy model
(all parameters zero).

Real-valued coordinates are standardized internally. The second order family
is closed under affine maps of each variable, so this changes nothing but the
conditioning; fitted parameters are mapped back to data units.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .domains import (
    DEFAULT_RESOLUTION,
    DEFAULT_TRUNC_SIGMAS,
    QuadratureGrid,
    ValueDomain,
    grid_for,
)
from .soxmodel import JointModel, SecondOrderConditional

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    beta_eigen_cap: float = 1e-6
    resolution: int = DEFAULT_RESOLUTION
    trunc_sigmas: float = DEFAULT_TRUNC_SIGMAS

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")


@dataclass(frozen=True, eq=False)
class PreparedData:
    """Columns snapped onto the quadrature grids of their domains.

    ``columns[i]`` has shape ``(m, d_i)``; ``node_index[i]`` holds the grid
    node of each row.
    """

    columns: tuple
    node_index: tuple
    domains: tuple
    grids: tuple

    @property
    def n_rows(self) -> int:
        return self.columns[0].shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.columns)


def prepare_variables(columns, domains, opts: Optional[FitOptions] = None,
                      grids: Optional[Sequence[QuadratureGrid]] = None) -> PreparedData:
    """Build (or take) one grid per variable and snap every value to its nearest node."""
    opts = opts or FitOptions()
    if len(columns) != len(domains):
        raise FitError("need one domain per column")
    if len(columns) == 0:
        raise FitError("no variables given")
    cols, idxs, grs = [], [], []
    m = None
    for i, (col, dom) in enumerate(zip(columns, domains)):
        arr = np.asarray(col, dtype=float).reshape(-1, dom.dimension)
        if m is None:
            m = arr.shape[0]
        if arr.shape[0] != m:
            raise FitError(f"column {i} has {arr.shape[0]} rows, expected {m}")
        if arr.shape[0] == 0:
            raise FitError("empty dataset")
        if not np.all(np.isfinite(arr)):
            raise FitError(f"column {i} has non-finite values")
        g = grids[i] if grids is not None else grid_for(dom, arr[:, 0], opts.resolution, opts.trunc_sigmas)
        idx = g.snap(arr)
        cols.append(g.nodes[idx])
        idxs.append(idx)
        grs.append(g)
    return PreparedData(tuple(cols), tuple(idxs), tuple(domains), tuple(grs))


def _standardizer(dom: ValueDomain, values: np.ndarray):
    """Center and scale vectors for one variable (identity for binary and circle)."""
    d = dom.dimension
    if dom.kind in ("binary", "circle"):
        return np.zeros(d), np.ones(d)
    c = values.mean(axis=0)
    s = values.std(axis=0)
    s = np.where(s > 0, s, 1.0)
    return c, s


def _independent_columns(a: np.ndarray, tol: float = 1e-9) -> List[int]:
    """Greedy selection of columns of ``a`` that are linearly independent of the previous ones."""
    keep: List[int] = []
    for j in range(a.shape[1]):
        trial = a[:, keep + [j]]
        sv = np.linalg.svd(trial / np.maximum(np.linalg.norm(trial, axis=0), 1e-300), compute_uv=False)
        if sv[-1] > tol * sv[0]:
            keep.append(j)
    return keep


class ConditionalProblem:
    """Objective, gradient and Hessian of one conditional fit.

    Parameters are the natural parameters in standardized coordinates laid
    out as ``[self features..., vec(coupling)]``. Self features are the child
    coordinates and the upper triangle of ``x x^T`` (off-diagonals doubled),
    minus those that are affinely dependent on the domain (``x^2 = x`` on
    ``{0, 1}``; ``cos^2 + sin^2 = 1`` on the circle).
    """

    def __init__(self, data: PreparedData, child: int, parents: Sequence[int], opts: FitOptions):
        self.data = data
        self.child = int(child)
        self.parents = tuple(int(i) for i in parents)
        self.opts = opts
        if self.child in self.parents:
            raise FitError("child cannot be its own parent")
        dom = data.domains[self.child]
        grid = data.grids[self.child]
        d = dom.dimension
        self.d = d
        self.center, self.scale = _standardizer(dom, data.columns[self.child])
        nodes = (grid.nodes - self.center) / self.scale
        self.nodes = nodes
        self.logw = grid.log_weights

        pairs = [(a, b) for a in range(d) for b in range(a, d)]
        quad = np.column_stack([nodes[:, a] * nodes[:, b] * (1.0 if a == b else 2.0) for a, b in pairs])
        cand = np.column_stack([np.ones(len(nodes)), nodes, quad])
        keep = [j - 1 for j in _independent_columns(cand) if j > 0]
        labels = [("lin", a) for a in range(d)] + [("quad", p) for p in pairs]
        self.self_labels = [labels[j] for j in keep]
        self.F = np.column_stack([nodes, quad])[:, keep]
        self.p0 = self.F.shape[1]

        pcols, self.parent_std = [], {}
        for i in self.parents:
            c, s = _standardizer(data.domains[i], data.columns[i])
            self.parent_std[i] = (c, s)
            pcols.append((data.columns[i] - c) / s)
        m = data.n_rows
        xp = np.column_stack(pcols) if pcols else np.zeros((m, 0))
        self.D = xp.shape[1]
        self.n_params = self.p0 + d * self.D
        xu, inv, counts = np.unique(xp, axis=0, return_inverse=True, return_counts=True)
        self.xu = xu
        self.cu = counts / m

        obs = data.node_index[self.child]
        fbar = self.F[obs].mean(axis=0)
        cross = (nodes[obs][:, :, None] * xp[:, None, :]).mean(axis=0)
        self.tbar = np.concatenate([fbar, cross.ravel()])

        self.cap_index = None
        if dom.is_unbounded and d == 1 and ("quad", (0, 0)) in self.self_labels:
            self.cap_index = self.self_labels.index(("quad", (0, 0)))
            self.cap_value = -opts.beta_eigen_cap * self.scale[0] ** 2

    def initial(self) -> np.ndarray:
        return self.project(np.zeros(self.n_params))

    def project(self, theta: np.ndarray) -> np.ndarray:
        if self.cap_index is not None and theta[self.cap_index] > self.cap_value:
            theta = theta.copy()
            theta[self.cap_index] = self.cap_value
        return theta

    def _split(self, theta):
        return theta[: self.p0], theta[self.p0:].reshape(self.d, self.D)

    def _probs(self, theta):
        tf, gam = self._split(theta)
        s = (self.F @ tf)[None, :] + (self.xu @ gam.T) @ self.nodes.T + self.logw[None, :]
        z = logsumexp(s, axis=1)
        return z, np.exp(s - z[:, None])

    def value(self, theta) -> float:
        z, _ = self._probs(np.asarray(theta, dtype=float))
        return float(-theta @ self.tbar + self.cu @ z)

    def value_and_grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        z, p = self._probs(theta)
        f = float(-theta @ self.tbar + self.cu @ z)
        muf = p @ self.F
        mun = p @ self.nodes
        g_self = self.cu @ muf
        g_cross = np.einsum("u,ua,ub->ab", self.cu, mun, self.xu).ravel()
        return f, np.concatenate([g_self, g_cross]) - self.tbar

    def hessian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        _, p = self._probs(theta)
        g = np.column_stack([self.F, self.nodes])
        mu = p @ g
        second = np.einsum("um,ma,mb->uab", p, g, g)
        cov = second - mu[:, :, None] * mu[:, None, :]
        p0, d, D = self.p0, self.d, self.D
        cff = cov[:, :p0, :p0]
        cfn = cov[:, :p0, p0:]
        cnn = cov[:, p0:, p0:]
        h = np.zeros((self.n_params, self.n_params))
        h[:p0, :p0] = np.einsum("u,uab->ab", self.cu, cff)
        if D:
            cross = np.einsum("u,uca,ub->cab", self.cu, cfn, self.xu).reshape(p0, d * D)
            h[:p0, p0:] = cross
            h[p0:, :p0] = cross.T
            h[p0:, p0:] = np.einsum("u,uac,ub,ue->abce", self.cu, cnn, self.xu, self.xu).reshape(d * D, d * D)
        return h

    def _active(self, theta, grad) -> np.ndarray:
        act = np.zeros(self.n_params, dtype=bool)
        if self.cap_index is not None:
            k = self.cap_index
            if theta[k] >= self.cap_value - 1e-15 * max(1.0, abs(self.cap_value)) and grad[k] < 0:
                act[k] = True
        return act

    def to_kernel(self, theta) -> SecondOrderConditional:
        """Map standardized natural parameters back to a kernel in data units."""
        tf, gam = self._split(np.asarray(theta, dtype=float))
        d = self.d
        alpha = np.zeros(d)
        bstd = np.zeros((d, d))
        for val, (kind, key) in zip(tf, self.self_labels):
            if kind == "lin":
                alpha[key] = val
            else:
                a, b = key
                bstd[a, b] = bstd[b, a] = val
        inv_s = 1.0 / self.scale
        bself = bstd * np.outer(inv_s, inv_s)
        alpha_o = alpha * inv_s - 2.0 * bself @ self.center
        couplings = {}
        col = 0
        for i in self.parents:
            c_i, s_i = self.parent_std[i]
            di = len(c_i)
            b = gam[:, col: col + di] * np.outer(inv_s, 1.0 / s_i)
            col += di
            couplings[i] = b
            alpha_o = alpha_o - b @ c_i
        return SecondOrderConditional(
            child_index=self.child,
            parent_indices=self.parents,
            alpha=alpha_o,
            beta_self=bself,
            beta_parents=couplings,
            child_domain=self.data.domains[self.child],
            grid=self.data.grids[self.child],
        )


@dataclass(frozen=True, eq=False)
class FitResult:
    kernel: SecondOrderConditional
    nll_per_sample: float
    iterations: int
    converged: bool
    gradient_norm: float
    theta: np.ndarray = field(repr=False)
    history: tuple = field(default=(), repr=False)


def _newton_direction(h, g, free):
    d = np.zeros_like(g)
    hf = h[np.ix_(free, free)]
    w, v = np.linalg.eigh(hf)
    wmax = max(w.max(), 0.0)
    ok = w > 1e-12 * wmax if wmax > 0 else np.zeros_like(w, dtype=bool)
    coef = np.zeros_like(w)
    coef[ok] = (v.T @ g[free])[ok] / w[ok]
    d[free] = -(v @ coef)
    return d


def minimize_problem(problem: ConditionalProblem, opts: FitOptions):
    """Projected damped Newton iteration; returns ``(theta, f, iterations, converged, gnorm, history)``."""
    theta = problem.initial()
    f, g = problem.value_and_grad(theta)
    history = [f]
    converged = False
    it = 0
    gnorm = np.inf
    for it in range(1, opts.max_iterations + 1):
        act = problem._active(theta, g)
        free = ~act
        gnorm = float(np.linalg.norm(g[free]))
        if gnorm <= opts.gradient_tolerance:
            converged = True
            it -= 1
            break
        d = _newton_direction(problem.hessian(theta), g, free)
        if not g @ d < 0:
            d = np.where(free, -g, 0.0)
        t = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            cand = problem.project(theta + t * d)
            f_new = problem.value(cand)
            if np.isfinite(f_new) and f_new <= f + opts.armijo * (g @ (cand - theta)):
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            # objective flat to rounding; keep the best point found
            log.debug("line search stalled at |g|=%g", gnorm)
            break
        theta = cand
        f, g = problem.value_and_grad(theta)
        history.append(f)
    else:
        act = problem._active(theta, g)
        gnorm = float(np.linalg.norm(g[~act]))
        converged = gnorm <= opts.gradient_tolerance
    return theta, f, it, converged, gnorm, tuple(history)


def fit_conditional(columns, child: int, parents: Sequence[int], domains=None,
                    opts: Optional[FitOptions] = None) -> FitResult:
    """Fit ``p(x_child | x_parents)`` by minimizing the per-sample conditional NLL.

    ``columns`` is either a sequence of per-variable arrays (then ``domains``
    is required) or a :class:`PreparedData`. Non-convergence is reported in
    the result, not raised.
    """
    opts = opts or FitOptions()
    data = columns if isinstance(columns, PreparedData) else prepare_variables(columns, domains, opts)
    if data.n_rows == 0:
        raise FitError("empty dataset")
    problem = ConditionalProblem(data, child, parents, opts)
    theta, f, it, converged, gnorm, hist = minimize_problem(problem, opts)
    if not converged:
        log.info("fit of x%d | %s stopped at |g|=%.3g after %d iterations", child, list(parents), gnorm, it)
    return FitResult(problem.to_kernel(theta), f, it, converged, gnorm, theta, hist)


@dataclass(frozen=True, eq=False)
class FittedOrderingModel:
    ordering: tuple
    fits: tuple
    step_scores: tuple
    total_score: float

    @property
    def model(self) -> JointModel:
        return JointModel(self.ordering, tuple(f.kernel for f in self.fits))

    @property
    def converged(self) -> bool:
        return all(f.converged for f in self.fits)


def fit_ordering(columns, ordering: Sequence[int], domains=None, opts: Optional[FitOptions] = None,
                 cache: Optional[Dict] = None) -> FittedOrderingModel:
    """Fit every kernel of the complete DAG along ``ordering``; score is the sum of per-sample NLLs.

    ``cache`` maps ``(child, frozenset(parents))`` to fits and may be shared
    across orderings of the same prepared data.
    """
    opts = opts or FitOptions()
    data = columns if isinstance(columns, PreparedData) else prepare_variables(columns, domains, opts)
    ordering = tuple(int(i) for i in ordering)
    if sorted(ordering) != list(range(data.n_vars)):
        raise FitError(f"ordering {ordering} is not a permutation of {data.n_vars} variables")
    fits = []
    for j, child in enumerate(ordering):
        parents = tuple(sorted(ordering[:j]))
        key = (child, frozenset(parents))
        try:
            if cache is not None and key in cache:
                res = cache[key]
            else:
                res = fit_conditional(data, child, parents, opts=opts)
                if cache is not None:
                    cache[key] = res
        except Exception as exc:
            raise FitError(f"step {j} (x{child} | {list(parents)}): {exc}") from exc
        fits.append(res)
    scores = tuple(f.nll_per_sample for f in fits)
    return FittedOrderingModel(ordering, tuple(fits), scores, float(sum(scores)))
