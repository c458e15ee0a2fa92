"""Scoring and selection of unlabeled pairs.

Three posterior notions feed the same entropy criterion: a plug-in
sigmoid at a point estimate, the same thing at the posterior mean, and a
Laplacian approximation that integrates the pair likelihood against the
Gaussian posterior around a pair of clamped modes.  Random selection is
the control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, xlogy

from . import kernels
from .spectral import DataMatrix, EigenBasis, PairFeature, feature_matrix
from .vb import VariationalPosterior

STRATEGIES = ("RANDOM", "MLE_ACT", "BAYES_ACT", "BAYES_VAR")
MAX_ENTROPY = float(np.log(2.0))


@dataclass(frozen=True)
class PairPool:
    """Candidate pairs plus the subset already labeled by the oracle.

    Candidates are kept in canonical order: each pair as (low, high),
    the list sorted lexicographically.  ``labeled`` holds (i, j, y)
    triples and must stay within the candidate set.
    """

    candidates: tuple
    labeled: tuple = ()

    def __post_init__(self):
        canon = []
        seen = set()
        for i, j in self.candidates:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-pair ({i}, {i}) cannot be a candidate")
            if i < 0 or j < 0:
                raise ValueError(f"negative index in pair ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate candidate pair {key}")
            seen.add(key)
            canon.append(key)
        canon.sort()
        object.__setattr__(self, "candidates", tuple(canon))

        lab = []
        lab_seen = set()
        for i, j, y in self.labeled:
            i, j, y = int(i), int(j), int(y)
            key = (min(i, j), max(i, j))
            if key not in seen:
                raise ValueError(f"labeled pair {key} is not a candidate")
            if key in lab_seen:
                raise ValueError(f"pair {key} labeled twice")
            if y not in (-1, 1):
                raise ValueError(f"label must be +1 or -1, got {y}")
            lab_seen.add(key)
            lab.append((key[0], key[1], y))
        lab.sort()
        object.__setattr__(self, "labeled", tuple(lab))

    @property
    def labeled_pairs(self) -> tuple:
        return tuple((i, j) for i, j, _ in self.labeled)

    @property
    def unlabeled(self) -> tuple:
        taken = {(i, j) for i, j, _ in self.labeled}
        return tuple(p for p in self.candidates if p not in taken)

    def with_labels(self, triples) -> "PairPool":
        return PairPool(self.candidates, self.labeled + tuple(triples))

    def constraint_items(self) -> tuple:
        return self.labeled


@dataclass(frozen=True)
class PairScore:
    pair: tuple
    p_plus: float
    entropy: float
    strategy: str

    def __post_init__(self):
        i, j = self.pair
        object.__setattr__(self, "pair", (int(i), int(j)))
        if not 0.0 <= self.p_plus <= 1.0:
            raise ValueError(f"p_plus must lie in [0, 1], got {self.p_plus}")
        if not -1e-12 <= self.entropy <= MAX_ENTROPY + 1e-12:
            raise ValueError(f"entropy must lie in [0, log 2], got {self.entropy}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy tag {self.strategy!r}")


def entropy(p_plus):
    """Binary entropy in nats, with 0 log 0 = 0.  Scalar or array."""
    p = np.asarray(p_plus, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    h = -xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)
    if h.ndim == 0:
        return float(h)
    return h


def _omega_vector(omega) -> np.ndarray:
    if isinstance(omega, PairFeature):
        return omega.omega
    return np.asarray(omega, dtype=np.float64)


def plugin_posterior(gamma, omega) -> float:
    """Similarity probability at a point estimate: sigma(-gamma.omega)."""
    w = _omega_vector(omega)
    g = np.asarray(gamma, dtype=np.float64)
    return float(expit(-(g @ w)))


def q_value(mu, omega) -> float:
    """Sigmoid curvature p(1-p) at the mean margin.

    Kept for completeness: the adopted posterior approximation drops the
    rank-one precision correction this would scale, so nothing in the
    scoring path consumes it.
    """
    w = _omega_vector(omega)
    p = expit(float(np.asarray(mu, dtype=np.float64) @ w))
    return float(p * (1.0 - p))


def laplace_gamma(mu, sigma, omega, sign: int) -> np.ndarray:
    """Approximate mode of the gamma integrand for one pair outcome.

    ``sign`` +1 targets the similar outcome, -1 the dissimilar one; the
    mode is the mean nudged against the outcome's slope and clamped to
    the nonnegative orthant.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    w = _omega_vector(omega)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = kernels.as_f64(sigma)
    p = expit(sign * float(mu @ w))
    return np.maximum(mu - sign * p * (sigma @ w), 0.0)


def laplace_posterior(mu, sigma, omega) -> float:
    """Similarity probability integrating the Gaussian posterior.

    Each outcome gets an unnormalized mass: its sigmoid at the clamped
    mode times a Gaussian volume factor driven by the pair's projected
    variance.  Masses are combined in log space, so the normalized
    result is exact and overflow-safe for margins in the hundreds.
    """
    w = _omega_vector(omega)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = kernels.as_f64(sigma)
    quad = float(w @ (sigma @ w))
    z = float(mu @ w)
    p_plus_mode = expit(z)
    p_minus_mode = expit(-z)
    g_plus = laplace_gamma(mu, sigma, w, 1)
    g_minus = laplace_gamma(mu, sigma, w, -1)
    log_mass_plus = log_expit(-(g_plus @ w)) - 0.5 * p_plus_mode**2 * quad
    log_mass_minus = log_expit(g_minus @ w) - 0.5 * p_minus_mode**2 * quad
    if np.isneginf(log_mass_plus) and np.isneginf(log_mass_minus):
        raise ValueError(
            f"both outcome masses underflow to zero (omega.Sigma.omega = {quad:.6e})"
        )
    return float(expit(log_mass_plus - log_mass_minus))


@dataclass(frozen=True)
class Scorer:
    """A strategy tag bundled with whatever model state it needs.

    RANDOM carries nothing.  The plug-in strategies carry a point weight
    vector (the MLE solution or the posterior mean); BAYES_VAR also
    carries the posterior covariance.
    """

    strategy: str
    data: DataMatrix | None = None
    basis: EigenBasis | None = None
    gamma: np.ndarray | None = None
    sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy tag {self.strategy!r}")
        if self.strategy == "RANDOM":
            return
        if self.data is None or self.basis is None or self.gamma is None:
            raise ValueError(f"{self.strategy} needs data, basis and weights")
        g = np.asarray(self.gamma, dtype=np.float64)
        if g.shape != (self.basis.k + 1,):
            raise ValueError(
                f"weights must have length {self.basis.k + 1}, got {g.shape}"
            )
        object.__setattr__(self, "gamma", g)
        if self.strategy == "BAYES_VAR":
            if self.sigma is None:
                raise ValueError("BAYES_VAR needs the posterior covariance")
            s = kernels.as_f64(self.sigma)
            if s.shape != (g.shape[0], g.shape[0]):
                raise ValueError("covariance shape does not match the weights")
            object.__setattr__(self, "sigma", s)

    @classmethod
    def random(cls) -> "Scorer":
        return cls(strategy="RANDOM")

    @classmethod
    def mle_act(cls, data, basis, gamma) -> "Scorer":
        return cls(strategy="MLE_ACT", data=data, basis=basis, gamma=gamma)

    @classmethod
    def bayes_act(cls, data, basis, post: VariationalPosterior) -> "Scorer":
        return cls(strategy="BAYES_ACT", data=data, basis=basis, gamma=post.mu)

    @classmethod
    def bayes_var(cls, data, basis, post: VariationalPosterior) -> "Scorer":
        return cls(
            strategy="BAYES_VAR",
            data=data,
            basis=basis,
            gamma=post.mu,
            sigma=post.sigma,
        )


def score_pairs(scorer: Scorer, pairs) -> list:
    """One PairScore per pair, in the order given.

    RANDOM expresses no preference and scores every pair at maximum
    entropy; the entropy strategies evaluate their posterior per pair.
    """
    pairs = [(int(i), int(j)) for i, j in pairs]
    if scorer.strategy == "RANDOM":
        return [
            PairScore(pair=p, p_plus=0.5, entropy=MAX_ENTROPY, strategy="RANDOM")
            for p in pairs
        ]
    if not pairs:
        return []
    w = feature_matrix(scorer.data, scorer.basis, pairs)
    if scorer.strategy == "BAYES_VAR":
        probs = [laplace_posterior(scorer.gamma, scorer.sigma, row) for row in w]
    else:
        probs = expit(-(w @ scorer.gamma))
    return [
        PairScore(pair=p, p_plus=float(pr), entropy=entropy(float(pr)),
                  strategy=scorer.strategy)
        for p, pr in zip(pairs, probs)
    ]


def select(pool: PairPool, scorer: Scorer, batch: int, rng_seed) -> list:
    """Pick ``batch`` unlabeled pairs for the oracle.

    Entropy strategies take the top of the pool, ties to the lowest
    (i, j); RANDOM draws uniformly without replacement, depending only
    on the seed and the canonical order of the unlabeled pairs.
    """
    unlabeled = pool.unlabeled
    if not unlabeled:
        raise ValueError("no unlabeled pairs left to select from")
    if not 1 <= batch <= len(unlabeled):
        raise ValueError(
            f"batch must lie in [1, {len(unlabeled)}], got {batch}"
        )
    if scorer.strategy == "RANDOM":
        rng = np.random.default_rng(rng_seed)
        picks = rng.choice(len(unlabeled), size=batch, replace=False)
        return [unlabeled[int(i)] for i in picks]
    scores = score_pairs(scorer, unlabeled)
    scores.sort(key=lambda s: (-s.entropy, s.pair))
    return [s.pair for s in scores[:batch]]
