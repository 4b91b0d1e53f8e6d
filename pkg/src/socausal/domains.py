"""Value domains of variables and quadrature grids over them.

A domain carries its natural reference measure: counting measure for finite
sets, Lebesgue measure for subsets of the real line and arc length for the
unit circle. Partition-function integrals are evaluated on a
:class:`QuadratureGrid` whose weights are the measures of the cells the nodes
represent (midpoint rule).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

KINDS = (
    "binary",
    "finite-set",
    "integer-range",
    "interval",
    "positive-real",
    "full-real",
    "circle",
)
FINITE_KINDS = ("binary", "finite-set", "integer-range")
UNBOUNDED_KINDS = ("positive-real", "full-real")

DEFAULT_RESOLUTION = 512
DEFAULT_TRUNC_SIGMAS = 8.0


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ValueDomain:
    """Value set of one variable.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    points : tuple of float, optional
        Sorted support of finite kinds (one-dimensional).
    bounds : (float, float), optional
        Range for ``interval``; for ``full-real`` and ``positive-real`` the
        observed range, kept for reporting only.
    labels : tuple of float, optional
        Original values of a binary column mapped onto ``(0, 1)``.
    """

    kind: str
    points: Optional[tuple] = None
    bounds: Optional[tuple] = None
    label: str = ""
    labels: Optional[tuple] = None

    def __eq__(self, other):
        if not isinstance(other, ValueDomain):
            return NotImplemented
        # bounds of unbounded kinds and binary labels are reporting metadata
        return (self.kind, self.points, self.label, self._bounds_key()) == (
            other.kind, other.points, other.label, other._bounds_key())

    def __hash__(self):
        return hash((self.kind, self.points, self.label, self._bounds_key()))

    def _bounds_key(self):
        return self.bounds if self.kind == "interval" else None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.kind == "binary":
            object.__setattr__(self, "points", (0.0, 1.0))
        if self.kind in FINITE_KINDS:
            if self.points is None:
                raise DomainError(f"{self.kind} domain needs points")
            pts = tuple(sorted(float(p) for p in set(self.points)))
            if len(pts) < 2:
                raise DomainError("finite domains need at least 2 distinct points")
            if not all(np.isfinite(pts)):
                raise DomainError("domain points must be finite")
            object.__setattr__(self, "points", pts)
        if self.kind == "interval":
            if self.bounds is None:
                raise DomainError("interval domain needs bounds")
            lo, hi = (float(b) for b in self.bounds)
            if not lo < hi:
                raise DomainError(f"interval bounds must satisfy lower < upper, got {self.bounds}")
            object.__setattr__(self, "bounds", (lo, hi))

    @property
    def dimension(self) -> int:
        return 2 if self.kind == "circle" else 1

    @property
    def is_finite(self) -> bool:
        return self.kind in FINITE_KINDS

    @property
    def is_unbounded(self) -> bool:
        return self.kind in UNBOUNDED_KINDS

    @classmethod
    def binary(cls, label="", labels=None):
        return cls("binary", label=label, labels=labels)

    @classmethod
    def finite(cls, points, label=""):
        return cls("finite-set", points=tuple(points), label=label)

    @classmethod
    def integer_range(cls, lower, upper, label=""):
        return cls("integer-range", points=tuple(range(int(lower), int(upper) + 1)), label=label)

    @classmethod
    def interval(cls, lower, upper, label=""):
        return cls("interval", bounds=(lower, upper), label=label)

    @classmethod
    def positive_real(cls, label="", bounds=None):
        return cls("positive-real", bounds=bounds, label=label)

    @classmethod
    def full_real(cls, label="", bounds=None):
        return cls("full-real", bounds=bounds, label=label)

    @classmethod
    def circle(cls, label=""):
        return cls("circle", label=label)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dimension": self.dimension, "label": self.label}
        if self.points is not None:
            out["points"] = list(self.points)
        if self.bounds is not None:
            out["bounds"] = list(self.bounds)
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ValueDomain":
        return cls(
            d["kind"],
            points=tuple(d["points"]) if d.get("points") is not None else None,
            bounds=tuple(d["bounds"]) if d.get("bounds") is not None else None,
            label=d.get("label", ""),
            labels=tuple(d["labels"]) if d.get("labels") is not None else None,
        )


@dataclass(frozen=True)
class TruncationSpec:
    """Finite window ``center +- half_width`` for unbounded domains."""

    center: float
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0 or not np.isfinite(self.half_width):
            raise DomainError(f"truncation half-width must be positive, got {self.half_width}")

    @classmethod
    def from_data(cls, values, n_sigmas: float = DEFAULT_TRUNC_SIGMAS) -> "TruncationSpec":
        values = np.asarray(values, dtype=float)
        sd = float(values.std())
        if sd == 0.0:
            sd = max(abs(float(values.mean())), 1.0)
        return cls(float(values.mean()), n_sigmas * sd)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes (shape ``(M, d)``) and nonnegative cell measures (shape ``(M,)``)."""

    nodes: np.ndarray
    weights: np.ndarray
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.array(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0] or weights.shape[0] < 2:
            raise DomainError("grid needs >= 2 nodes and one weight per node")
        if np.any(weights < 0):
            raise DomainError("grid weights must be nonnegative")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    def snap(self, values) -> np.ndarray:
        """Indices of the nearest node for each row of ``values``."""
        values = np.asarray(values, dtype=float).reshape(-1, self.dimension)
        if self.dimension == 1:
            x = self.nodes[:, 0]
            order = np.argsort(x)
            xs = x[order]
            pos = np.clip(np.searchsorted(xs, values[:, 0]), 1, len(xs) - 1)
            left = xs[pos - 1]
            right = xs[pos]
            pick = np.where(values[:, 0] - left <= right - values[:, 0], pos - 1, pos)
            return order[pick]
        d2 = ((values[:, None, :] - self.nodes[None, :, :]) ** 2).sum(axis=-1)
        return np.argmin(d2, axis=1)


def build_grid(
    domain: ValueDomain,
    resolution: int = DEFAULT_RESOLUTION,
    truncation: Optional[TruncationSpec] = None,
) -> QuadratureGrid:
    """Discretize ``domain`` into a midpoint-rule quadrature grid.

    Finite kinds give their point set with unit weights whatever the
    resolution. Unbounded kinds need ``truncation``; for ``positive-real`` the
    window is clipped at 0.
    """
    if int(resolution) != resolution or resolution < 2:
        raise DomainError(f"resolution must be an integer >= 2, got {resolution}")
    resolution = int(resolution)
    spec = {"kind": domain.kind, "resolution": resolution}
    if domain.is_finite:
        pts = np.asarray(domain.points, dtype=float)[:, None]
        return QuadratureGrid(pts, np.ones(len(pts)), spec)
    if domain.kind == "circle":
        phi = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        return QuadratureGrid(nodes, np.full(resolution, 2.0 * np.pi / resolution), spec)
    if domain.kind == "interval":
        lo, hi = domain.bounds
    else:
        if truncation is None:
            raise DomainError(f"{domain.kind} domain needs a truncation window")
        lo = truncation.center - truncation.half_width
        hi = truncation.center + truncation.half_width
        if domain.kind == "positive-real":
            lo = max(lo, 0.0)
            if hi <= lo:
                raise DomainError("truncation window lies entirely below 0")
        spec.update(center=truncation.center, half_width=truncation.half_width)
    width = (hi - lo) / resolution
    nodes = lo + width * (np.arange(resolution) + 0.5)
    spec.update(lower=lo, upper=hi)
    return QuadratureGrid(nodes[:, None], np.full(resolution, width), spec)


@dataclass(frozen=True)
class DomainHints:
    """Options steering :func:`infer_domain`.

    ``kind`` forces the domain kind (the only way to get a circle).
    """

    max_discrete: int = 20
    allow_positive: bool = True
    pad_fraction: float = 0.05
    kind: Optional[str] = None


def infer_domain(column, hints: Optional[DomainHints] = None, label: str = ""):
    """Guess the value domain of a data column.

    Returns
    -------
    domain : ValueDomain
    values : ndarray
        The column remapped onto the domain (binary columns become 0/1).
    """
    hints = hints or DomainHints()
    col = np.asarray(column, dtype=float)
    if col.ndim != 1 or col.size == 0:
        raise DomainError("column must be a nonempty 1-D sequence")
    bad = np.flatnonzero(~np.isfinite(col))
    if bad.size:
        raise DomainError(f"non-finite value {col[bad[0]]} at row {int(bad[0])}")

    if hints.kind is not None:
        return _forced_domain(col, hints, label)

    distinct = np.unique(col)
    if distinct.size == 2:
        mapped = (col == distinct[1]).astype(float)
        return ValueDomain.binary(label=label, labels=(float(distinct[0]), float(distinct[1]))), mapped
    if distinct.size == 1:
        raise DomainError("constant column has no usable domain")
    integral = np.all(distinct == np.round(distinct))
    if integral and distinct.size <= hints.max_discrete:
        return ValueDomain.integer_range(distinct[0], distinct[-1], label=label), col
    lo, hi = float(distinct[0]), float(distinct[-1])
    pad = hints.pad_fraction * (hi - lo)
    if hints.allow_positive and lo >= 0:
        return ValueDomain.positive_real(label=label, bounds=(max(lo - pad, 0.0), hi + pad)), col
    return ValueDomain.full_real(label=label, bounds=(lo - pad, hi + pad)), col


def _forced_domain(col, hints, label):
    kind = hints.kind
    if kind == "binary":
        distinct = np.unique(col)
        if distinct.size != 2:
            raise DomainError(f"binary hint but column has {distinct.size} distinct values")
        return ValueDomain.binary(label=label, labels=tuple(float(v) for v in distinct)), (col == distinct[1]).astype(float)
    if kind in ("finite-set", "integer-range"):
        return ValueDomain.finite(np.unique(col), label=label), col
    if kind == "interval":
        lo, hi = float(col.min()), float(col.max())
        pad = hints.pad_fraction * (hi - lo)
        return ValueDomain.interval(lo - pad, hi + pad, label=label), col
    if kind == "positive-real":
        if col.min() < 0:
            raise DomainError("positive-real hint but column has negative values")
        return ValueDomain.positive_real(label=label, bounds=(float(col.min()), float(col.max()))), col
    if kind == "full-real":
        return ValueDomain.full_real(label=label, bounds=(float(col.min()), float(col.max()))), col
    raise DomainError(f"kind {kind!r} cannot be inferred from a single real column")


def angles_to_circle(angles, period: float = 2.0 * np.pi) -> np.ndarray:
    """Map angles (in units where one turn equals ``period``) to unit vectors."""
    phi = 2.0 * np.pi * np.asarray(angles, dtype=float) / period
    return np.column_stack([np.cos(phi), np.sin(phi)])


def bin_column(column, n_bins: int):
    """Replace each value by the midpoint of its equal-width bin over [min, max].

    Bins are closed on the right, so a value on an inner edge joins the lower
    bin.

    The maximum lands in the last bin. Returns the binned values and the
    finite-set domain of all ``n_bins`` midpoints (empty bins included).
    """
    if int(n_bins) != n_bins or n_bins < 2:
        raise DomainError(f"n_bins must be an integer >= 2, got {n_bins}")
    col = np.asarray(column, dtype=float)
    if col.size == 0:
        raise DomainError("cannot bin an empty column")
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        raise DomainError("cannot bin a constant column")
    width = (hi - lo) / n_bins
    # right-closed bins (lo + i w, lo + (i+1) w]; the minimum joins the first bin
    idx = np.clip(np.ceil((col - lo) / width).astype(int) - 1, 0, n_bins - 1)
    mids = lo + width * (np.arange(n_bins) + 0.5)
    binned = mids[idx]
    return binned, ValueDomain.finite(mids)


def grid_for(domain: ValueDomain, values=None, resolution: int = DEFAULT_RESOLUTION,
             trunc_sigmas: float = DEFAULT_TRUNC_SIGMAS) -> QuadratureGrid:
    """Grid for ``domain`` using the data-driven truncation default."""
    trunc = None
    if domain.is_unbounded:
        if values is None:
            raise DomainError(f"{domain.kind} domain needs data to set its truncation window")
        trunc = TruncationSpec.from_data(values, trunc_sigmas)
    return build_grid(domain, resolution, trunc)


def as_points(values, dimension: int) -> np.ndarray:
    """Reshape a column of values into an ``(m, dimension)`` array."""
    return np.asarray(values, dtype=float).reshape(-1, dimension)


def check_on_domain(values: Sequence, domain: ValueDomain, tol: float = 1e-9) -> None:
    pts = as_points(values, domain.dimension)
    if domain.is_finite:
        ok = np.isin(pts[:, 0], np.asarray(domain.points))
        if not ok.all():
            i = int(np.flatnonzero(~ok)[0])
            raise DomainError(f"value {pts[i, 0]} at row {i} is not in the {domain.kind} domain")
    elif domain.kind == "circle":
        r = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(r - 1.0) > 1e-6):
            raise DomainError("circle values must be unit vectors")
