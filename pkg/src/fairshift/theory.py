"""Exact numerical checks of the recovery and stability guarantees.

A DiscreteJointModel is a finite joint distribution over (x, y, s) whose
expectations are exact sums, so the sandwich bound, the weighted-risk
recovery of the fair optimum, the symmetric-bias invariance and the
limiting-threshold forms can be verified without Monte-Carlo error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import (
    TradeoffParams,
    corrected_weights_eod,
    corrected_weights_spd,
    plugin_fair_predict_batch,
)
from .dataset import SUBGROUPS


@dataclass(frozen=True)
class DiscreteJointModel:
    """Finite support per group with a full P(x, y, s) table."""

    points: dict  # s -> (k_s, dim) feature array
    probs: dict  # (y, s) -> (k_s,) probabilities; all cells sum to 1

    def __post_init__(self):
        points = {s: np.asarray(self.points[s], dtype=np.float64) for s in (0, 1)}
        probs = {}
        total = 0.0
        for y, s in SUBGROUPS:
            p = np.asarray(self.probs[(y, s)], dtype=np.float64)
            if p.shape != (points[s].shape[0],):
                raise ValueError(f"probability row for {(y, s)} has wrong length")
            if (p < 0).any():
                raise ValueError("probabilities must be non-negative")
            p.setflags(write=False)
            probs[(y, s)] = p
            total += float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        for s in (0, 1):
            points[s].setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "probs", probs)

    def subgroup_mass(self, y: int, s: int) -> float:
        return float(self.probs[(y, s)].sum())

    @property
    def alpha(self) -> float:
        masses = [self.subgroup_mass(y, s) for y, s in SUBGROUPS]
        if min(masses) <= 0:
            return 0.0
        return min(masses) / max(masses)

    def base_rate(self) -> float:
        return self.subgroup_mass(1, 0) + self.subgroup_mass(1, 1)

    def eta(self, s: int) -> np.ndarray:
        """Exact P(Y=1 | X=x, S=s) on the group's support points."""
        pos, neg = self.probs[(1, s)], self.probs[(0, s)]
        return pos / (pos + neg)

    def point_mass(self, s: int) -> np.ndarray:
        return self.probs[(0, s)] + self.probs[(1, s)]

    def biased(self, beta_pos: float = 1.0, beta_neg: float = 1.0) -> "DiscreteJointModel":
        if not (0.0 < beta_pos <= 1.0 and 0.0 < beta_neg <= 1.0):
            raise ValueError("beta factors must lie in (0, 1]")
        probs = {ys: self.probs[ys].copy() for ys in SUBGROUPS}
        probs[(1, 0)] *= beta_pos
        probs[(0, 0)] *= beta_neg
        total = sum(p.sum() for p in probs.values())
        return DiscreteJointModel(
            points=self.points, probs={ys: p / total for ys, p in probs.items()}
        )

    def reweigh_table(self) -> dict:
        """Label/group balancing weights from this model's own marginals."""
        p_y = {y: self.subgroup_mass(y, 0) + self.subgroup_mass(y, 1) for y in (0, 1)}
        p_s = {s: self.subgroup_mass(0, s) + self.subgroup_mass(1, s) for s in (0, 1)}
        out = {}
        for y, s in SUBGROUPS:
            mass = self.subgroup_mass(y, s)
            if mass <= 0:
                raise ValueError(f"subgroup {(y, s)} has zero mass")
            out[(y, s)] = p_y[y] * p_s[s] / mass
        return out

    def expected(self, table: dict, method: str = "direct") -> float:
        """Exact expectation of a per-cell table[(y, s)] -> (k_s,) values.

        Two independent summation routes are kept on purpose: "direct" is a
        flat joint-probability dot product, "decomposed" conditions on each
        subgroup and re-weights by subgroup mass.
        """
        if method == "direct":
            return float(sum((self.probs[ys] * table[ys]).sum() for ys in SUBGROUPS))
        if method == "decomposed":
            total = 0.0
            for ys in SUBGROUPS:
                mass = self.subgroup_mass(*ys)
                if mass == 0.0:
                    continue
                conditional = self.probs[ys] / mass
                total += mass * float(conditional @ table[ys])
            return total
        raise ValueError(f"unknown method {method!r}")


def random_model(
    seed: int, points_per_group: int = 16, dim: int = 3, profile: str = "balanced"
) -> DiscreteJointModel:
    """Seeded random model; probabilities via exponential draws, normalized.

    profile "positive_heavy" concentrates mass on the (1, 1) subgroup, which
    keeps the corrected-cost-weight tables inside their valid domain for
    trade-off values up to 0.8 even at beta = 0.2.
    """
    rng = np.random.default_rng(np.uint64(seed))
    points = {s: rng.normal(size=(points_per_group, dim)) for s in (0, 1)}
    if profile == "balanced":
        raw = {ys: rng.exponential(size=points_per_group) for ys in SUBGROUPS}
        total = sum(r.sum() for r in raw.values())
        probs = {ys: r / total for ys, r in raw.items()}
    elif profile == "positive_heavy":
        p11 = rng.uniform(0.81, 0.87)
        p10 = rng.uniform(0.04, 0.08)
        rest = 1.0 - p11 - p10
        split = rng.uniform(0.3, 0.7)
        masses = {(1, 1): p11, (1, 0): p10, (0, 0): rest * split, (0, 1): rest * (1 - split)}
        probs = {}
        for ys in SUBGROUPS:
            r = rng.exponential(size=points_per_group)
            probs[ys] = masses[ys] * r / r.sum()
    else:
        raise ValueError(f"unknown profile {profile!r}")
    # exact renormalization so the table sums to 1 within 1e-12
    total = sum(p.sum() for p in probs.values())
    probs = {ys: p / total for ys, p in probs.items()}
    return DiscreteJointModel(points=points, probs=probs)


def random_linear_scores(model: DiscreteJointModel, seed: int) -> dict:
    """Random linear scorer evaluated on the support: s -> scores in (0, 1)."""
    rng = np.random.default_rng(np.uint64(seed))
    dim = model.points[0].shape[1]
    w = rng.normal(size=dim)
    group_w = rng.normal()
    b = rng.normal()
    return {s: 1.0 / (1.0 + np.exp(-(model.points[s] @ w + group_w * s + b))) for s in (0, 1)}


def _loss_table(scores: dict, loss: str) -> dict:
    """Per-cell losses table[(y, s)][i] for the classifier given by scores."""
    table = {}
    for y, s in SUBGROUPS:
        q = np.asarray(scores[s], dtype=np.float64)
        if loss == "zero_one":
            h = (q > 0.5).astype(np.float64)
            table[(y, s)] = np.abs(h - y)
        elif loss == "log":
            table[(y, s)] = -(y * np.log(q) + (1 - y) * np.log1p(-q))
        else:
            raise ValueError(f"unknown loss {loss!r}")
    return table


@dataclass(frozen=True)
class SandwichResult:
    lhs: float
    mid: float
    rhs: float
    alpha: float
    holds: bool


def check_sandwich(
    model: DiscreteJointModel,
    scores: dict,
    beta: float,
    which: str = "pos",
    loss: str = "zero_one",
    slack: float = 1e-12,
) -> SandwichResult:
    """Exact two-sided bound between the original expected loss and the
    balance-reweighed expected loss on the biased distribution.

    The reweighing table comes from the biased model's own marginals, i.e.
    from what a practitioner would estimate on the biased training data.
    """
    for ys in SUBGROUPS:
        if model.subgroup_mass(*ys) <= 0:
            raise ValueError(f"subgroup {ys} has zero mass")
    table = _loss_table(scores, loss)
    e_original = model.expected(table)
    biased = model.biased(**_beta_kwargs(beta, which))
    w = biased.reweigh_table()
    reweighed = {ys: w[ys] * table[ys] for ys in SUBGROUPS}
    mid = biased.expected(reweighed)
    alpha = model.alpha
    lhs = alpha**2 / 4.0 * e_original
    rhs = 4.0 / alpha * e_original
    holds = (lhs <= mid + slack) and (mid <= rhs + slack)
    return SandwichResult(lhs=lhs, mid=mid, rhs=rhs, alpha=alpha, holds=holds)


def _beta_kwargs(beta: float, which: str) -> dict:
    if which == "pos":
        return {"beta_pos": beta}
    if which == "neg":
        return {"beta_neg": beta}
    raise ValueError(f"which must be 'pos' or 'neg', got {which!r}")


# --- recovery of the fair optimum from the biased distribution -------------


def _group_threshold_minimizer(
    biased: DiscreteJointModel, fp: dict, fn: dict
) -> dict:
    """Per group, the up-set of biased-posterior values minimizing the
    cost-weighted risk; enumeration over all support thresholds."""
    preds = {}
    for s in (0, 1):
        eta_b = biased.eta(s)
        order = np.argsort(eta_b, kind="stable")
        fp_mass = biased.probs[(0, s)][order]
        fn_mass = biased.probs[(1, s)][order]
        k = len(order)
        # candidate r accepts the r highest-posterior points
        # risk(r) = fp * accepted negatives + fn * rejected positives
        acc_neg = np.concatenate([[0.0], np.cumsum(fp_mass[::-1])])
        rej_pos = np.concatenate([[0.0], np.cumsum(fn_mass)])[::-1]
        risks = fp[s] * acc_neg + fn[s] * rej_pos
        best_r = int(np.argmin(risks))
        h = np.zeros(k, dtype=np.int8)
        if best_r > 0:
            h[order[k - best_r :]] = 1
        preds[s] = h
    return preds


@dataclass(frozen=True)
class RecoveryResult:
    agreement: float
    minimizer: dict
    target: dict


def check_recovery(
    model: DiscreteJointModel, beta: float, lam: float, constraint: str, tie_break: int = 1
) -> RecoveryResult:
    """Compare the fair plug-in optimum on the original distribution with the
    brute-force minimizer of the corrected cost-weighted risk on the biased
    distribution; agreement is mass-weighted over the support.

    The EOD target uses base rate beta*p_10 + p_11, the quantity the
    corrected weight table is expressed in.
    """
    p10, p11 = model.subgroup_mass(1, 0), model.subgroup_mass(1, 1)
    if constraint == "spd":
        cw = corrected_weights_spd(beta, lam)
        params = TradeoffParams(lam=lam, constraint="spd", tie_break=tie_break)
    elif constraint == "eod":
        cw = corrected_weights_eod(beta, lam, p10, p11)
        params = TradeoffParams(
            lam=lam, constraint="eod", base_rate=beta * p10 + p11, tie_break=tie_break
        )
    else:
        raise ValueError(f"unknown constraint {constraint!r}")

    target = {
        s: plugin_fair_predict_batch(model.eta(s), np.full(len(model.eta(s)), s), params)
        for s in (0, 1)
    }
    biased = model.biased(beta_pos=beta)
    minimizer = _group_threshold_minimizer(biased, cw.fp, cw.fn)
    agreement = 0.0
    for s in (0, 1):
        agreement += float(model.point_mass(s) @ (minimizer[s] == target[s]))
    return RecoveryResult(agreement=agreement, minimizer=minimizer, target=target)


# --- symmetric bias and limiting thresholds --------------------------------


def check_symmetry(model: DiscreteJointModel, beta: float, tol: float = 1e-12) -> bool:
    """Posterior (and hence Bayes predictions) must be unchanged when both
    under-representation factors are equal."""
    biased = model.biased(beta_pos=beta, beta_neg=beta)
    for s in (0, 1):
        eta, eta_b = model.eta(s), biased.eta(s)
        if np.abs(eta - eta_b).max() > tol:
            return False
        if ((eta > 0.5) != (eta_b > 0.5)).any():
            return False
    return True


def limit_form(
    lam: float, which: str, constraint: str, base_rate: float, tie_break: int = 1
) -> int:
    """Closed-form group-0 output of the plug-in rule in the vanishing-bias
    limit. The beta_neg EOD case follows from the plug-in score at eta -> 1:
    predict 1 iff lam > -base_rate."""
    def step(value: float) -> int:
        if value > 0:
            return 1
        if value == 0:
            return tie_break
        return 0

    if which == "pos" and constraint == "spd":
        return step(lam - 1.0)
    if which == "pos" and constraint == "eod":
        return 0
    if which == "neg" and constraint == "spd":
        return step(lam + 1.0)
    if which == "neg" and constraint == "eod":
        return step(lam + base_rate)
    raise ValueError(f"unknown combination {which!r}/{constraint!r}")


def check_limits(
    model: DiscreteJointModel,
    lam: float,
    tiny_beta: float = 1e-8,
    which: str = "pos",
    constraint: str = "spd",
    tie_break: int = 1,
) -> bool:
    """Group-0 plug-in outputs on the near-degenerate biased model must all
    equal the closed-form limit."""
    if tiny_beta > 1e-6:
        raise ValueError("tiny_beta must be <= 1e-6")
    biased = model.biased(**_beta_kwargs(tiny_beta, which))
    base_rate = biased.base_rate()
    params = TradeoffParams(
        lam=lam,
        constraint=constraint,
        base_rate=base_rate if constraint == "eod" else None,
        tie_break=tie_break,
    )
    eta_b = biased.eta(0)
    preds = plugin_fair_predict_batch(eta_b, np.zeros(len(eta_b), dtype=int), params)
    expected = limit_form(lam, which, constraint, base_rate, tie_break)
    return bool((preds == expected).all())


# --- sample complexity and the empirical-minimizer bound -------------------


def sample_complexity_bound(alpha: float, beta: float, eps: float, delta: float) -> float:
    """Raw sample-size bound 128 log(2/delta) / (alpha^6 beta^2 eps^2)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return 128.0 * math.log(2.0 / delta) / (alpha**6 * beta**2 * eps**2)


def sample_complexity(alpha: float, beta: float, eps: float, delta: float) -> int:
    return int(math.ceil(sample_complexity_bound(alpha, beta, eps, delta)))


@dataclass(frozen=True)
class ErmBoundResult:
    violation_rate: float
    trials: int
    resamples: int
    bound: float
    bayes_risk: float
    mean_risk: float


def check_erm_bound(
    model: DiscreteJointModel,
    beta: float,
    n_samples: int,
    delta: float,
    trials: int,
    seed: int = 0,
    which: str = "pos",
) -> ErmBoundResult:
    """Monte-Carlo check of the reweighed-ERM generalization bound.

    Each trial draws n_samples points from the biased model (via multinomial
    cell counts, equivalent to iid draws), minimizes the empirical reweighed
    0/1 risk over group-threshold classifiers, and evaluates the original-
    distribution risk exactly against
        16/(alpha^3 beta) sqrt(ln(2/delta) / 2N) + 16/alpha^3 * bayes risk.
    Degenerate draws (an empty subgroup) are resampled and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    biased = model.biased(**_beta_kwargs(beta, which))
    w = biased.reweigh_table()
    alpha = model.alpha

    bayes = {s: (model.eta(s) >= 0.5).astype(np.int8) for s in (0, 1)}
    bayes_risk = model.expected(
        {(y, s): np.abs(bayes[s] - y).astype(float) for y, s in SUBGROUPS}
    )
    bound = (16.0 / (alpha**3 * beta)) * math.sqrt(
        math.log(2.0 / delta) / (2.0 * n_samples)
    ) + (16.0 / alpha**3) * bayes_risk

    cells = [(y, s, i) for y, s in SUBGROUPS for i in range(len(model.probs[(y, s)]))]
    flat_p = np.array([biased.probs[(y, s)][i] for (y, s, i) in cells])
    rng = np.random.default_rng(np.uint64(seed))

    violations = 0
    resamples = 0
    mean_risk = 0.0
    for _ in range(trials):
        for _attempt in range(100):
            counts = rng.multinomial(n_samples, flat_p)
            sub_totals = {}
            for c, (y, s, _i) in zip(counts, cells):
                sub_totals[(y, s)] = sub_totals.get((y, s), 0) + int(c)
            if all(sub_totals[ys] > 0 for ys in SUBGROUPS):
                break
            resamples += 1
        emp = {ys: np.zeros(len(model.probs[ys])) for ys in SUBGROUPS}
        for c, (y, s, i) in zip(counts, cells):
            emp[(y, s)][i] = c / n_samples
        g_hat = _empirical_threshold_minimizer(biased, emp, w)
        risk = model.expected(
            {(y, s): np.abs(g_hat[s] - y).astype(float) for y, s in SUBGROUPS}
        )
        mean_risk += risk / trials
        if risk > bound + 1e-12:
            violations += 1

    return ErmBoundResult(
        violation_rate=violations / trials,
        trials=trials,
        resamples=resamples,
        bound=bound,
        bayes_risk=bayes_risk,
        mean_risk=mean_risk,
    )


def _empirical_threshold_minimizer(
    biased: DiscreteJointModel, emp: dict, w: dict
) -> dict:
    preds = {}
    for s in (0, 1):
        eta_b = biased.eta(s)
        order = np.argsort(eta_b, kind="stable")
        fp_mass = (w[(0, s)] * emp[(0, s)])[order]
        fn_mass = (w[(1, s)] * emp[(1, s)])[order]
        k = len(order)
        acc_neg = np.concatenate([[0.0], np.cumsum(fp_mass[::-1])])
        rej_pos = np.concatenate([[0.0], np.cumsum(fn_mass)])[::-1]
        risks = acc_neg + rej_pos
        best_r = int(np.argmin(risks))
        h = np.zeros(k, dtype=np.int8)
        if best_r > 0:
            h[order[k - best_r :]] = 1
        preds[s] = h
    return preds
