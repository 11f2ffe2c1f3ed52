"""Synthetic data model: one isotropic Gaussian per (y, s) subgroup.

The four mean vectors are drawn once from U(0,1); the shared isotropic
sigma and the subgroup priors are configurable. The model exposes the exact
posterior eta(x, s) = P(Y=1 | X=x, S=s), so plug-in classifiers and bias
checks can run against closed-form quantities instead of estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SUBGROUPS, LabeledDataset


@dataclass(frozen=True)
class GaussianSubgroupModel:
    dim: int
    sigma: float
    means: dict
    priors: dict

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        _validate_priors(self.priors)
        means = {}
        for ys in SUBGROUPS:
            mu = np.asarray(self.means[ys], dtype=np.float64)
            if mu.shape != (self.dim,):
                raise ValueError(f"mean for {ys} must have length {self.dim}")
            mu.setflags(write=False)
            means[ys] = mu
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "priors", dict(self.priors))


def _validate_priors(priors: dict) -> None:
    total = 0.0
    for ys in SUBGROUPS:
        p = priors.get(ys)
        if p is None or p <= 0:
            raise ValueError(f"prior for subgroup {ys} must be positive")
        total += p
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"priors must sum to 1, got {total}")


UNIFORM_PRIORS = {ys: 0.25 for ys in SUBGROUPS}

# Named sampling profiles: (dim, n_train, n_test).
PRESETS = {
    "desk": (20, 5000, 2000),
    "paper": (100, 20000, 5000),
}


def make_model(
    dim: int, sigma: float = 1.0, priors: dict | None = None, seed: int = 0
) -> GaussianSubgroupModel:
    """Draw the four mean vectors entrywise from U(0,1) with the given seed."""
    rng = np.random.default_rng(np.uint64(seed))
    means = {ys: rng.uniform(0.0, 1.0, size=dim) for ys in SUBGROUPS}
    return GaussianSubgroupModel(
        dim=dim, sigma=sigma, means=means, priors=dict(priors or UNIFORM_PRIORS)
    )


def sample(model: GaussianSubgroupModel, n: int, seed: int) -> LabeledDataset:
    """Draw n rows: (y, s) from the priors, then x ~ N(mu_ys, sigma^2 I)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    probs = np.array([model.priors[ys] for ys in SUBGROUPS])
    which = rng.choice(len(SUBGROUPS), size=n, p=probs / probs.sum())
    features = rng.standard_normal((n, model.dim)) * model.sigma
    labels = np.empty(n, dtype=np.int8)
    groups = np.empty(n, dtype=np.int8)
    for k, (y, s) in enumerate(SUBGROUPS):
        rows = which == k
        features[rows] += model.means[(y, s)]
        labels[rows] = y
        groups[rows] = s
    names = tuple(f"x{i}" for i in range(model.dim))
    return LabeledDataset(features, labels, groups, names)


def _log_odds(model: GaussianSubgroupModel, X: np.ndarray, s: int) -> np.ndarray:
    """log [p_1s N(x; mu_1s) / (p_0s N(x; mu_0s))], stable at any dim."""
    d1 = X - model.means[(1, s)]
    d0 = X - model.means[(0, s)]
    sq1 = np.einsum("ij,ij->i", d1, d1)
    sq0 = np.einsum("ij,ij->i", d0, d0)
    prior_term = np.log(model.priors[(1, s)]) - np.log(model.priors[(0, s)])
    return prior_term + (sq0 - sq1) / (2.0 * model.sigma**2)


def posterior_eta_batch(model: GaussianSubgroupModel, X: np.ndarray, s_arr) -> np.ndarray:
    """Exact eta(x, s) for each row, computed in log space."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    s_arr = np.broadcast_to(np.asarray(s_arr, dtype=np.int8), (X.shape[0],))
    eta = np.empty(X.shape[0])
    for s in (0, 1):
        rows = s_arr == s
        if rows.any():
            z = _log_odds(model, X[rows], s)
            eta[rows] = 1.0 / (1.0 + np.exp(-z))
    return eta


def posterior_eta(model: GaussianSubgroupModel, x, s: int) -> float:
    return float(posterior_eta_batch(model, np.asarray(x)[None, :], [s])[0])


def biased_model(
    model: GaussianSubgroupModel, beta_pos: float, beta_neg: float
) -> GaussianSubgroupModel:
    """Under-representation at the distribution level: rescale and renormalize
    the (1,0) and (0,0) priors; class-conditionals are unchanged."""
    if not (0.0 < beta_pos <= 1.0 and 0.0 < beta_neg <= 1.0):
        raise ValueError("beta factors must lie in (0, 1]")
    scaled = dict(model.priors)
    scaled[(1, 0)] = scaled[(1, 0)] * beta_pos
    scaled[(0, 0)] = scaled[(0, 0)] * beta_neg
    total = sum(scaled.values())
    priors = {ys: p / total for ys, p in scaled.items()}
    return GaussianSubgroupModel(dim=model.dim, sigma=model.sigma, means=model.means, priors=priors)


def bayes_predict_batch(
    model: GaussianSubgroupModel, X, s_arr, threshold: float = 0.5, tie_break: int = 1
) -> np.ndarray:
    """1 iff eta(x, s) > threshold; equality resolved by tie_break."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if tie_break not in (0, 1):
        raise ValueError("tie_break must be 0 or 1")
    eta = posterior_eta_batch(model, X, s_arr)
    preds = (eta > threshold).astype(np.int8)
    if tie_break == 1:
        preds[eta == threshold] = 1
    return preds


def bayes_predict(
    model: GaussianSubgroupModel, x, s: int, threshold: float = 0.5, tie_break: int = 1
) -> int:
    return int(bayes_predict_batch(model, np.asarray(x)[None, :], [s], threshold, tie_break)[0])
