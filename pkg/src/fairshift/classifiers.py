"""Classifier zoo: weighted logistic regression and fairness schemes on top.

All trainers are group-aware: the sensitive attribute is appended to the
feature matrix, so models may use it for training and prediction. Training
is deterministic (zero initialization, full-batch gradient descent with
backtracking), which keeps whole audit runs reproducible from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import SUBGROUPS, LabeledDataset, subgroup_stats


@dataclass(frozen=True)
class LRConfig:
    l2: float = 1e-4
    max_iter: int = 2000
    tol: float = 1e-8


@dataclass
class LinearScorer:
    """Linear model sigma(w . [x, s] + b); the score is the eta estimate."""

    weights: np.ndarray  # length d+1, last entry is the group column
    intercept: float
    converged: bool = True
    grad_norm: float = 0.0

    def scores(self, X, s_arr) -> np.ndarray:
        z = self.raw(X, s_arr)
        return 1.0 / (1.0 + np.exp(-z))

    def raw(self, X, s_arr) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        s_col = np.broadcast_to(np.asarray(s_arr, dtype=np.float64), (X.shape[0],))
        return X @ self.weights[:-1] + s_col * self.weights[-1] + self.intercept

    def predict(self, X, s_arr, threshold: float = 0.5) -> np.ndarray:
        return (self.scores(X, s_arr) > threshold).astype(np.int8)

    def dump(self) -> str:
        """Plain-text key=value parameter dump for inspection."""
        lines = [f"w{i} = {v!r}" for i, v in enumerate(self.weights)]
        lines.append(f"intercept = {self.intercept!r}")
        lines.append(f"converged = {self.converged}")
        lines.append(f"grad_norm = {self.grad_norm!r}")
        return "\n".join(lines)


def _design(ds: LabeledDataset) -> np.ndarray:
    return np.column_stack([ds.features, ds.groups.astype(np.float64)])


def train_weighted_lr(
    ds: LabeledDataset, sample_weights=None, config: LRConfig | None = None
) -> LinearScorer:
    """Minimize the weighted logistic loss plus an L2 penalty on the weights.

    The per-sample weights are normalized to sum to 1, so scaling them all
    by a positive constant leaves the optimum unchanged. Full-batch gradient
    descent with Armijo backtracking from zero initialization; the objective
    decreases monotonically. Non-convergence is flagged on the result, not
    raised.
    """
    config = config or LRConfig()
    X = _design(ds)
    y = ds.labels.astype(np.float64)
    n, d = X.shape
    if sample_weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (n,):
            raise ValueError("sample_weights length must match rows")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("sample_weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("sample_weights must not be all zero")
        w = w / total

    theta = np.zeros(d + 1)  # [coef, intercept]

    def value_grad(t):
        z = X @ t[:-1] + t[-1]
        # log(1 + e^z) - y z, evaluated stably
        losses = np.logaddexp(0.0, z) - y * z
        val = float(w @ losses) + 0.5 * config.l2 * float(t[:-1] @ t[:-1])
        resid = w * (1.0 / (1.0 + np.exp(-z)) - y)
        grad = np.empty_like(t)
        grad[:-1] = X.T @ resid + config.l2 * t[:-1]
        grad[-1] = resid.sum()
        return val, grad

    val, grad = value_grad(theta)
    step = 1.0
    converged = False
    for _ in range(config.max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= config.tol:
            converged = True
            break
        gsq = gnorm * gnorm
        while True:
            candidate = theta - step * grad
            cand_val, cand_grad = value_grad(candidate)
            if cand_val <= val - 1e-4 * step * gsq:
                break
            step *= 0.5
            if step < 1e-18:
                break
        if step < 1e-18:
            break
        theta, val, grad = candidate, cand_val, cand_grad
        step = min(step * 2.0, 1e6)
    else:
        converged = float(np.linalg.norm(grad)) <= config.tol

    return LinearScorer(
        weights=theta[:-1],
        intercept=float(theta[-1]),
        converged=converged,
        grad_norm=float(np.linalg.norm(grad)),
    )


# --- reweighing -----------------------------------------------------------


@dataclass(frozen=True)
class ReweighWeights:
    """Per-subgroup weights P(Y=y) P(S=s) / P(Y=y, S=s) on the training data."""

    weights: dict

    def per_row(self, ds: LabeledDataset) -> np.ndarray:
        out = np.empty(ds.n)
        for y, s in SUBGROUPS:
            rows = (ds.labels == y) & (ds.groups == s)
            out[rows] = self.weights[(y, s)]
        return out


def reweigh_weights(ds: LabeledDataset) -> ReweighWeights:
    stats = subgroup_stats(ds)
    if stats.degenerate:
        raise ValueError("reweighing needs all four subgroups nonempty")
    p = stats.probs
    p_y = {y: p[(y, 0)] + p[(y, 1)] for y in (0, 1)}
    p_s = {s: p[(0, s)] + p[(1, s)] for s in (0, 1)}
    weights = {(y, s): p_y[y] * p_s[s] / p[(y, s)] for y, s in SUBGROUPS}
    return ReweighWeights(weights=weights)


def train_reweighing(ds: LabeledDataset, config: LRConfig | None = None) -> LinearScorer:
    """Weighted LR with the subgroup-balancing weights as sample weights."""
    return train_weighted_lr(ds, reweigh_weights(ds).per_row(ds), config)


# --- bias-corrected cost weights ------------------------------------------


@dataclass(frozen=True)
class CostWeights:
    """Per-group false-positive / false-negative weights.

    For each group the FP and FN weights sum to 1, so the FP weight is also
    the decision threshold on the score that the weighted risk encodes.
    """

    fp: dict
    fn: dict

    def __post_init__(self):
        for s in (0, 1):
            for w in (self.fp[s], self.fn[s]):
                if not np.isfinite(w) or w < 0:
                    raise ValueError(f"cost weights out of valid domain for group {s}")

    def per_row(self, ds: LabeledDataset) -> np.ndarray:
        """Label-conditioned reduction: FN weight on y=1 rows, FP on y=0 rows."""
        out = np.empty(ds.n)
        for s in (0, 1):
            grp = ds.groups == s
            out[grp & (ds.labels == 1)] = self.fn[s]
            out[grp & (ds.labels == 0)] = self.fp[s]
        return out


def corrected_weights_spd(beta_pos: float, lam: float) -> CostWeights:
    """Cost weights whose risk on the beta_pos-biased distribution recovers
    the statistical-parity fair optimum of the original distribution."""
    if not 0.0 < beta_pos <= 1.0:
        raise ValueError("beta_pos must lie in (0, 1]")
    if lam == 1.0:
        raise ValueError("lambda = 1 is singular for the SPD correction")
    fp1 = 0.5 * (1.0 + lam)
    fp0 = 1.0 / ((1.0 + lam) / (beta_pos * (1.0 - lam)) + 1.0)
    return CostWeights(fp={0: fp0, 1: fp1}, fn={0: 1.0 - fp0, 1: 1.0 - fp1})


def corrected_weights_eod(beta_pos: float, lam: float, p_10: float, p_11: float) -> CostWeights:
    """Equal-opportunity analogue; p_10, p_11 are subgroup probabilities of
    the original (pre-bias) distribution."""
    if not 0.0 < beta_pos <= 1.0:
        raise ValueError("beta_pos must lie in (0, 1]")
    if p_10 <= 0 or p_11 <= 0:
        raise ValueError("p_10 and p_11 must be positive")
    q = beta_pos * p_10 + p_11
    if lam == 2.0 * q:
        raise ValueError("lambda = 2 (beta p_10 + p_11) is singular")
    fp1 = 1.0 / (2.0 * (1.0 - lam / (2.0 * q)))
    fp0 = 1.0 / ((1.0 + beta_pos) / beta_pos + lam / (beta_pos * q))
    return CostWeights(fp={0: fp0, 1: fp1}, fn={0: 1.0 - fp0, 1: 1.0 - fp1})


def train_thm3_corrected(
    ds: LabeledDataset,
    beta: float,
    params: "TradeoffParams",
    subgroup_probs: dict | None = None,
    config: LRConfig | None = None,
) -> LinearScorer:
    """Weighted LR under the bias-corrected cost weights.

    beta is the injected under-representation factor (known to the audit
    harness); for the EOD variant subgroup_probs must carry the pre-bias
    (1,0) and (1,1) probabilities.
    """
    if params.constraint == "spd":
        cw = corrected_weights_spd(beta, params.lam)
    elif params.constraint == "eod":
        if subgroup_probs is None:
            raise ValueError("EOD correction needs pre-bias subgroup probabilities")
        cw = corrected_weights_eod(beta, params.lam, subgroup_probs[(1, 0)], subgroup_probs[(1, 1)])
    else:
        raise ValueError(f"unknown constraint {params.constraint!r}")
    return train_weighted_lr(ds, cw.per_row(ds), config)


# --- plug-in fair thresholding ---------------------------------------------


@dataclass(frozen=True)
class TradeoffParams:
    """Fairness-accuracy trade-off for the plug-in rules.

    constraint is "spd" or "eod"; base_rate is P(Y=1) and is required for
    the EOD rule. tie_break resolves adjusted scores that are exactly zero.
    """

    lam: float
    constraint: str
    base_rate: float | None = None
    tie_break: int = 1

    def __post_init__(self):
        if self.constraint not in ("spd", "eod"):
            raise ValueError("constraint must be 'spd' or 'eod'")
        if self.tie_break not in (0, 1):
            raise ValueError("tie_break must be 0 or 1")
        if self.constraint == "eod":
            if self.base_rate is None or not 0.0 < self.base_rate < 1.0:
                raise ValueError("EOD rule needs base_rate in (0, 1)")


def adjusted_score(eta, s_arr, params: TradeoffParams) -> np.ndarray:
    """Group-dependent fairness-adjusted score; predict 1 where positive."""
    eta = np.asarray(eta, dtype=np.float64)
    s_arr = np.broadcast_to(np.asarray(s_arr), eta.shape)
    sign = np.where(s_arr == 0, 1.0, -1.0)
    if params.constraint == "spd":
        return eta - 0.5 * (1.0 - sign * params.lam)
    return (1.0 + sign * params.lam / (2.0 * params.base_rate)) * eta - 0.5


def plugin_fair_predict_batch(eta, s_arr, params: TradeoffParams) -> np.ndarray:
    score = adjusted_score(eta, s_arr, params)
    preds = (score > 0).astype(np.int8)
    if params.tie_break == 1:
        preds[score == 0] = 1
    return preds


def plugin_fair_predict(eta: float, s: int, params: TradeoffParams) -> int:
    return int(plugin_fair_predict_batch(np.array([eta]), np.array([s]), params)[0])


CLASSIFIER_IDS = (
    "base_lr",
    "rew",
    "plugin_spd",
    "plugin_eod",
    "thm3_spd",
    "thm3_eod",
    "expgrad",
)

LAMBDA_CLASSIFIERS = ("plugin_spd", "plugin_eod", "thm3_spd", "thm3_eod")

DEFAULT_LAMBDAS = (-0.8, -0.4, -0.2, 0.0, 0.2, 0.4, 0.8)
