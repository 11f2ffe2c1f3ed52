"""Exponentiated-gradient reduction to cost-sensitive classification.

Saddle-point play between a multiplier player (multiplicative weights over
signed rate-parity constraints, capped at B in l1 norm) and a learner whose
best response is a weighted LR on multiplier-induced costs. The returned
classifier is the uniform mixture over the best responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import LinearScorer, LRConfig, train_weighted_lr
from .dataset import LabeledDataset, subgroup_stats

# constraint index: (y, s, sign); for each the violation is
# sign * (P(h=1 | Y=y, S=s) - P(h=1 | Y=y)) <= eps
EQUALIZED_ODDS = "equalized_odds"
EQUAL_OPPORTUNITY = "equal_opportunity"

_EXPGRAD_LR = LRConfig(max_iter=400, tol=1e-6)


@dataclass
class RandomizedClassifier:
    """Mixture of thresholded linear scorers with probability weights."""

    components: list  # (LinearScorer, threshold) pairs
    weights: np.ndarray
    violation: float = 0.0
    converged: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        self.weights = w

    def expected_positive(self, X, s_arr) -> np.ndarray:
        """Mixture probability of predicting 1, row by row."""
        out = np.zeros(np.atleast_2d(X).shape[0])
        for (scorer, threshold), w in zip(self.components, self.weights):
            out += w * scorer.predict(X, s_arr, threshold)
        return out

    def predict(self, X, s_arr, seed: int) -> np.ndarray:
        """Sample one component per row from the mixture, deterministically."""
        rng = np.random.default_rng(np.uint64(seed))
        n = np.atleast_2d(X).shape[0]
        choice = rng.choice(len(self.components), size=n, p=self.weights)
        preds = np.empty(n, dtype=np.int8)
        for k, (scorer, threshold) in enumerate(self.components):
            rows = choice == k
            if rows.any():
                preds[rows] = scorer.predict(np.atleast_2d(X)[rows], np.asarray(s_arr)[rows], threshold)
        return preds


def _constraints(constraint: str) -> list:
    labels = (0, 1) if constraint == EQUALIZED_ODDS else (1,)
    return [(y, s, sign) for y in labels for s in (0, 1) for sign in (+1.0, -1.0)]


def _rate_gaps(preds: np.ndarray, ds: LabeledDataset, labels) -> dict:
    """P(h=1 | Y=y, S=s) - P(h=1 | Y=y) for each (y, s)."""
    gaps = {}
    for y in labels:
        label_rows = ds.labels == y
        base = preds[label_rows].mean()
        for s in (0, 1):
            rows = label_rows & (ds.groups == s)
            gaps[(y, s)] = preds[rows].mean() - base
    return gaps


def train_expgrad(
    ds: LabeledDataset,
    constraint: str = EQUALIZED_ODDS,
    eps: float = 0.01,
    iterations: int = 50,
    config: LRConfig | None = None,
    cap: float = 10.0,
) -> RandomizedClassifier:
    """Run the reduction for the given rate-parity constraint set.

    Multipliers start at zero (the first best response is the plain LR) and
    then follow multiplicative-weights updates with rate 0.5/sqrt(t) on the
    accumulated violations, rescaled onto the l1 ball of radius cap. The
    mixture's empirical violation is compared against eps; exceeding it only
    flags the result.
    """
    if constraint not in (EQUALIZED_ODDS, EQUAL_OPPORTUNITY):
        raise ValueError(f"unknown constraint {constraint!r}")
    if subgroup_stats(ds).degenerate:
        raise ValueError("expgrad needs all four subgroups nonempty")
    config = config or _EXPGRAD_LR
    keys = _constraints(constraint)
    labels = (0, 1) if constraint == EQUALIZED_ODDS else (1,)
    n = ds.n
    n_y = {y: int((ds.labels == y).sum()) for y in (0, 1)}
    n_ys = {
        (y, s): int(((ds.labels == y) & (ds.groups == s)).sum()) for y in (0, 1) for s in (0, 1)
    }

    theta = np.zeros(len(keys))
    components: list = []
    train_preds: list = []

    for t in range(1, iterations + 1):
        if t == 1:
            mult = np.zeros(len(keys))
        else:
            expo = np.exp(theta - theta.max())
            # slack coordinate keeps the total multiplier mass at most cap
            mult = cap * expo / (math.exp(-theta.max()) + expo.sum())

        # cost difference of predicting 1 vs 0 for each row
        gap = np.where(ds.labels == 0, 1.0, -1.0) / n
        for k, (y, s, sign) in enumerate(keys):
            if mult[k] == 0.0:
                continue
            rows = ds.labels == y
            contrib = np.zeros(n)
            contrib[rows] -= 1.0 / n_y[y]
            member = rows & (ds.groups == s)
            contrib[member] += 1.0 / n_ys[(y, s)]
            gap += sign * mult[k] * contrib

        pseudo = (gap < 0).astype(np.int8)
        weights = np.abs(gap)
        if weights.sum() <= 0:
            weights = np.full(n, 1.0 / n)
        relabeled = LabeledDataset(ds.features, pseudo, ds.groups, ds.feature_names)
        scorer = train_weighted_lr(relabeled, weights, config)
        preds = scorer.predict(ds.features, ds.groups)
        components.append((scorer, 0.5))
        train_preds.append(preds)

        gaps = _rate_gaps(preds, ds, labels)
        eta_t = 0.5 / math.sqrt(t)
        for k, (y, s, sign) in enumerate(keys):
            theta[k] += eta_t * (sign * gaps[(y, s)] - eps)

    mixture_pos = np.mean(train_preds, axis=0)
    worst = 0.0
    for y in labels:
        rows = ds.labels == y
        base = mixture_pos[rows].mean()
        for s in (0, 1):
            member = rows & (ds.groups == s)
            worst = max(worst, abs(mixture_pos[member].mean() - base))

    return RandomizedClassifier(
        components=components,
        weights=np.full(len(components), 1.0 / len(components)),
        violation=worst,
        converged=worst <= eps,
    )
