"""Scoring of causal orderings and the threshold decision rule."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .domains import infer_domain
from .fitting import FitOptions, PreparedData, fit_conditional, fit_ordering, prepare_variables

DEFAULT_THRESHOLD = 1e-4
VERDICT_SYMBOLS = {"forward": "→", "backward": "←", "undecided": "?", "ordering-set": "{…}"}


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class InferenceOptions:
    fit: FitOptions = field(default_factory=FitOptions)
    threshold_rel: float = DEFAULT_THRESHOLD
    max_vars: int = 5
    jobs: int = 1


@dataclass(frozen=True)
class CausalDecision:
    """Outcome of scoring all orderings.

    ``scores`` maps each ordering (a tuple of variable indices) to its total
    per-sample inverse log-likelihood. ``relative_gap`` is the gap between
    the two best distinct scores over the scale used by the threshold.
    """

    scores: Dict[tuple, float]
    selected: frozenset
    verdict: str
    threshold_used: float
    relative_gap: float
    equivalence_classes: tuple = ()

    @property
    def symbol(self) -> str:
        return VERDICT_SYMBOLS[self.verdict]

    def to_dict(self) -> dict:
        return {
            "scores": [{"ordering": list(k), "score": v} for k, v in sorted(self.scores.items())],
            "selected": sorted(list(o) for o in self.selected),
            "verdict": self.verdict,
            "symbol": self.symbol,
            "threshold_used": self.threshold_used,
            "relative_gap": self.relative_gap,
            "equivalence_classes": [[list(o) for o in cls] for cls in self.equivalence_classes],
        }


def _check_finite(*scores):
    for s in scores:
        if not math.isfinite(s):
            raise InferenceError(f"score {s} is not finite")


def decide(score_forward: float, score_backward: float, threshold_rel: float = DEFAULT_THRESHOLD) -> str:
    """Pairwise rule: undecided iff ``|a - b| <= threshold_rel * |a + b| / 2``, else the smaller score wins.

    The absolute value only matters for negative scores (densities with
    small spread), where the band must stay nonnegative.
    """
    _check_finite(score_forward, score_backward)
    band = threshold_rel * abs(score_forward + score_backward) / 2.0
    if abs(score_forward - score_backward) <= band:
        return "undecided"
    return "forward" if score_forward < score_backward else "backward"


def select_orderings(scores: Dict[tuple, float], threshold_rel: float = DEFAULT_THRESHOLD):
    """Orderings within the threshold band of the best score.

    Two orderings use the pairwise rule of :func:`decide`; more use the band
    ``L - L_min <= threshold_rel * |L_min|``.
    """
    if not scores:
        raise InferenceError("no scores to select from")
    _check_finite(*scores.values())
    lmin = min(scores.values())
    if len(scores) == 2:
        (o1, s1), (o2, s2) = sorted(scores.items())
        if decide(s1, s2, threshold_rel) == "undecided":
            return frozenset(scores)
        return frozenset([o1 if s1 < s2 else o2])
    band = threshold_rel * abs(lmin)
    return frozenset(o for o, s in scores.items() if s - lmin <= band)


def _equivalence_classes(scores, tol=1e-12):
    classes: List[List[tuple]] = []
    for o, s in sorted(scores.items(), key=lambda kv: (kv[1], kv[0])):
        if classes and abs(scores[classes[-1][0]] - s) <= tol:
            classes[-1].append(o)
        else:
            classes.append([o])
    return tuple(tuple(c) for c in classes)


def decision_from_scores(scores: Dict[tuple, float], threshold_rel: float = DEFAULT_THRESHOLD) -> CausalDecision:
    scores = {tuple(int(i) for i in k): float(v) for k, v in scores.items()}
    selected = select_orderings(scores, threshold_rel)
    distinct = sorted(set(scores.values()))
    if len(scores) == 2:
        a, b = scores.get((0, 1)), scores.get((1, 0))
        if a is None or b is None:
            raise InferenceError("two-variable scores must be keyed by (0, 1) and (1, 0)")
        verdict = decide(a, b, threshold_rel)
        scale = abs(a + b) / 2.0
    else:
        verdict = "ordering-set"
        scale = abs(distinct[0])
    gap = (distinct[1] - distinct[0]) / scale if len(distinct) > 1 and scale > 0 else 0.0
    return CausalDecision(scores, selected, verdict, threshold_rel, gap, _equivalence_classes(scores))


def score_orderings(data: PreparedData, orderings: Sequence[tuple], opts: InferenceOptions) -> Dict[tuple, float]:
    """Total score of each ordering; conditionals shared between orderings are fitted once."""
    keys = {}
    for o in orderings:
        for j, child in enumerate(o):
            keys[(child, frozenset(o[:j]))] = None
    todo = list(keys)

    def work(key):
        child, parents = key
        return key, fit_conditional(data, child, sorted(parents), opts=opts.fit)

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as ex:
            cache = dict(ex.map(work, todo))
    else:
        cache = dict(map(work, todo))
    return {tuple(o): fit_ordering(data, o, opts=opts.fit, cache=cache).total_score for o in orderings}


def infer_orderings(columns, domains=None, opts: Optional[InferenceOptions] = None,
                    orderings: Optional[Sequence[tuple]] = None) -> CausalDecision:
    """Fit all ``n!`` orderings (or the given subset) and apply the threshold rule."""
    opts = opts or InferenceOptions()
    if not isinstance(columns, PreparedData) and domains is None:
        typed = [infer_domain(c) for c in columns]
        domains = [d for d, _ in typed]
        columns = [v for _, v in typed]
    data = columns if isinstance(columns, PreparedData) else prepare_variables(columns, domains, opts.fit)
    n = data.n_vars
    if n < 2:
        raise InferenceError("need at least two variables")
    if orderings is None:
        if n > opts.max_vars:
            raise InferenceError(
                f"{n} variables give {math.factorial(n)} orderings (max_vars={opts.max_vars}); "
                "pass an explicit list of orderings to restrict the search")
        orderings = list(itertools.permutations(range(n)))
    scores = score_orderings(data, [tuple(o) for o in orderings], opts)
    return decision_from_scores(scores, opts.threshold_rel)


def decide_pairwise(column_x, column_y, domains=None, opts: Optional[InferenceOptions] = None) -> CausalDecision:
    """Two-variable wrapper: ``forward`` means x → y."""
    return infer_orderings([column_x, column_y], domains, opts)
