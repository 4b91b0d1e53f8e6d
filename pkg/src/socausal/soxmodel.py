"""Second order exponential conditionals.

A kernel for child ``x`` (a point of its domain, dimension ``d``) given parent
points ``x_i`` has unnormalized log-density

    alpha . x + x^T B x + sum_i x^T beta_i x_i

and is normalized over a :class:`~socausal.domains.QuadratureGrid` of the
child domain. ``B`` is stored symmetric; parents enter only through the
"field" ``h = sum_i beta_i x_i`` acting linearly on the child.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np
from scipy.special import logsumexp

from .domains import QuadratureGrid, TruncationSpec, ValueDomain, build_grid


class PartitionError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class SecondOrderConditional:
    """One Markov kernel ``p(x_child | x_parents)``.

    Parameters
    ----------
    child_index : int
    parent_indices : tuple of int
    alpha : ndarray, shape (d,)
    beta_self : ndarray, shape (d, d)
        Symmetrized on construction; only the symmetric part enters the
        quadratic form.
    beta_parents : dict
        Parent index -> ``(d, d_i)`` coupling matrix.
    child_domain : ValueDomain
    grid : QuadratureGrid
    """

    child_index: int
    parent_indices: tuple
    alpha: np.ndarray
    beta_self: np.ndarray
    beta_parents: Dict[int, np.ndarray]
    child_domain: ValueDomain
    grid: QuadratureGrid
    name: str = field(default="")

    def __post_init__(self):
        d = self.grid.dimension
        if self.child_domain.dimension != d:
            raise ValueError("grid and child domain dimensions differ")
        alpha = np.array(self.alpha, dtype=float).reshape(d)
        bs = np.array(self.beta_self, dtype=float).reshape(d, d)
        bs = 0.5 * (bs + bs.T)
        parents = tuple(int(i) for i in self.parent_indices)
        bp = {}
        for i in parents:
            m = np.array(self.beta_parents.get(i, np.zeros((d, 1))), dtype=float)
            bp[i] = m.reshape(d, -1)
        extra = set(self.beta_parents) - set(parents)
        if extra:
            raise ValueError(f"couplings given for non-parents {sorted(extra)}")
        for arr in (alpha, bs, *bp.values()):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_self", bs)
        object.__setattr__(self, "beta_parents", bp)
        object.__setattr__(self, "parent_indices", parents)
        if not self.name:
            object.__setattr__(self, "name", f"p(x{self.child_index}|{','.join(f'x{i}' for i in parents)})")

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    def node_terms(self) -> np.ndarray:
        """``alpha . n + n^T B n`` at every grid node."""
        n = self.grid.nodes
        return n @ self.alpha + np.einsum("ma,ab,mb->m", n, self.beta_self, n)

    def parent_field(self, parent_values) -> np.ndarray:
        """Parent field ``h`` of shape ``(rows, d)``.

        ``parent_values`` is a sequence (one entry per parent) of points or
        of ``(rows, d_i)`` arrays.
        """
        d = self.dimension
        if len(parent_values) != len(self.parent_indices):
            raise ValueError(
                f"{self.name}: expected {len(self.parent_indices)} parent values, got {len(parent_values)}")
        h = np.zeros((1, d))
        for i, v in zip(self.parent_indices, parent_values):
            b = self.beta_parents[i]
            v = np.asarray(v, dtype=float)
            if v.size % b.shape[1] or (v.ndim > 1 and v.shape[-1] != b.shape[1]):
                raise ValueError(f"{self.name}: parent x{i} must have dimension {b.shape[1]}")
            h = h + v.reshape(-1, b.shape[1]) @ b.T
        return h

    def scores(self, parent_values) -> np.ndarray:
        """Unnormalized log-density at every node, shape ``(rows, M)``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.node_terms()[None, :] + self.parent_field(parent_values) @ self.grid.nodes.T


def _child_point(kernel, x_child):
    x = np.asarray(x_child, dtype=float)
    if x.size != kernel.dimension:
        raise ValueError(f"{kernel.name}: child point must have dimension {kernel.dimension}")
    return x.reshape(kernel.dimension)


def exponent(kernel: SecondOrderConditional, x_child, parent_values=()) -> float:
    """Unnormalized log-density ``alpha.x + x^T B x + sum_i x^T beta_i x_i``."""
    x = _child_point(kernel, x_child)
    h = kernel.parent_field(parent_values)
    if h.shape[0] != 1:
        raise ValueError("exponent takes a single parent assignment")
    return float(kernel.alpha @ x + x @ kernel.beta_self @ x + h[0] @ x)


def _log_partition_rows(kernel, parent_values) -> np.ndarray:
    s = kernel.scores(parent_values)
    with np.errstate(over="ignore", invalid="ignore"):
        z = logsumexp(s + kernel.grid.log_weights[None, :], axis=1)
    if not np.all(np.isfinite(z)):
        raise PartitionError(f"log-partition of {kernel.name} is not finite (pathological parameters)")
    return z


def log_partition(kernel: SecondOrderConditional, parent_values=()) -> float:
    """``log sum_m w_m exp(exponent(node_m))`` with max shifting."""
    z = _log_partition_rows(kernel, parent_values)
    if z.shape[0] != 1:
        raise ValueError("log_partition takes a single parent assignment; use node_probabilities for batches")
    return float(z[0])


def log_density(kernel: SecondOrderConditional, x_child, parent_values=()) -> float:
    return exponent(kernel, x_child, parent_values) - log_partition(kernel, parent_values)


def node_probabilities(kernel: SecondOrderConditional, parent_values=()) -> np.ndarray:
    """Probability mass ``w_m p(node_m | parents)`` of each node, shape ``(rows, M)``."""
    s = kernel.scores(parent_values) + kernel.grid.log_weights[None, :]
    z = _log_partition_rows(kernel, parent_values)
    return np.exp(s - z[:, None])


def moments(kernel: SecondOrderConditional, parent_values=()):
    """Expected sufficient statistics for one parent assignment.

    Returns
    -------
    mean : ndarray (d,)
    second : ndarray (d, d)
        ``E[X X^T]``.
    cross : dict
        Parent index -> ``E[X] x_i^T``.
    """
    p = node_probabilities(kernel, parent_values)[0]
    n = kernel.grid.nodes
    mean = p @ n
    second = (n * p[:, None]).T @ n
    cross = {}
    for i, v in zip(kernel.parent_indices, parent_values):
        cross[i] = np.outer(mean, np.asarray(v, dtype=float).ravel())
    return mean, second, cross


def sample(kernel: SecondOrderConditional, parent_values, rng: np.random.Generator, size=None):
    """Draw grid nodes with probability ``w_m p(node_m | parents)``."""
    p = node_probabilities(kernel, parent_values)[0]
    idx = rng.choice(len(p), size=size, p=p / p.sum())
    out = kernel.grid.nodes[idx]
    if size is None:
        return out if kernel.dimension > 1 else float(out[0])
    return out if kernel.dimension > 1 else out[:, 0]


@dataclass(frozen=True)
class JointModel:
    """Product of kernels along an ordering; kernel ``j`` conditions on ``ordering[:j]``."""

    ordering: tuple
    kernels: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.ordering)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"ordering {order} is not a permutation")
        if len(self.kernels) != len(order):
            raise ValueError("need one kernel per position")
        for j, k in enumerate(self.kernels):
            if k.child_index != order[j] or set(k.parent_indices) != set(order[:j]):
                raise ValueError(f"kernel at position {j} does not match the ordering")
        object.__setattr__(self, "ordering", order)
        object.__setattr__(self, "kernels", tuple(self.kernels))


def joint_log_density(model: JointModel, row: Sequence) -> float:
    """``sum_j log p(x_j | preceding)`` for one row indexed by variable."""
    total = 0.0
    for k in model.kernels:
        total += log_density(k, row[k.child_index], [row[i] for i in k.parent_indices])
    return total


def binary_tanh_parameters(kernel: SecondOrderConditional):
    """``(lambda_0, {i: lambda_i})`` so that ``p(x=1|pa) = (1 + tanh(lambda_0 + sum lambda_i x_i)) / 2``.

    Valid for a binary child; parent couplings are scalars for binary parents.
    """
    if kernel.child_domain.kind != "binary":
        raise ValueError("tanh form needs a binary child")
    lam0 = 0.5 * (kernel.alpha[0] + kernel.beta_self[0, 0])
    lam = {i: 0.5 * kernel.beta_parents[i][0] for i in kernel.parent_indices}
    return float(lam0), lam


# -- serialization -----------------------------------------------------------

def grid_spec(grid: QuadratureGrid) -> dict:
    return dict(grid.spec)


def grid_from_spec(domain: ValueDomain, spec: dict) -> QuadratureGrid:
    trunc = None
    if domain.is_unbounded:
        trunc = TruncationSpec(spec["center"], spec["half_width"])
    return build_grid(domain, spec.get("resolution", 2), trunc)


def kernel_to_dict(kernel: SecondOrderConditional) -> dict:
    return {
        "child_index": kernel.child_index,
        "parent_indices": list(kernel.parent_indices),
        "alpha": kernel.alpha.tolist(),
        "beta_self": kernel.beta_self.tolist(),
        "beta_parents": {str(i): b.tolist() for i, b in kernel.beta_parents.items()},
        "domain": kernel.child_domain.to_dict(),
        "grid": grid_spec(kernel.grid),
    }


def kernel_from_dict(d: dict) -> SecondOrderConditional:
    domain = ValueDomain.from_dict(d["domain"])
    return SecondOrderConditional(
        child_index=d["child_index"],
        parent_indices=tuple(d["parent_indices"]),
        alpha=np.array(d["alpha"]),
        beta_self=np.array(d["beta_self"]),
        beta_parents={int(i): np.array(b) for i, b in d["beta_parents"].items()},
        child_domain=domain,
        grid=grid_from_spec(domain, d["grid"]),
    )


def model_to_json(model: JointModel) -> str:
    doc = {"ordering": list(model.ordering), "kernels": [kernel_to_dict(k) for k in model.kernels]}
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text: str) -> JointModel:
    doc = json.loads(text)
    return JointModel(tuple(doc["ordering"]), tuple(kernel_from_dict(k) for k in doc["kernels"]))
