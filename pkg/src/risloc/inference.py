"""Position beliefs over candidate blocks and the configuration loss they induce.

Each user carries a categorical prior over the N blocks. After a measurement s
under a configuration with mean map mu, Bayes' rule gives

    posterior_n  propto  prior_n * exp(-(s - mu_n)^2 / (2 sigma^2))

and the position decision is the prior-weighted maximum-likelihood block. The
loss used to score a configuration sums, over users and ordered block pairs
(n -> n'), the probability that a user truly in n gets decided into n', weighted
by a cost that grows with the distance between the blocks and with the belief
currently held in the wrong block:

    gamma[n][n'] = ||center_n - center_n'|| * (1 + alpha * prior_n')

The pairwise decision probability has no closed form over the full decision
region, so the optimizer scores configurations with a closed-form tail bound on
the pairwise (two-block) error; ``exact_confusion_integral`` below integrates
the true region numerically and exists to validate that bound, not to be fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

# Probability floor applied after every belief update. Keeps every block
# recoverable by later cycles and every prior ratio finite.
PRIOR_FLOOR = 1e-12

# Mean maps closer than this (in dB) are treated as indistinguishable for the
# pairwise error: the tie goes entirely to whichever block holds more prior.
MU_TOL = 1e-9


@dataclass
class BeliefState:
    """Per-user priors over blocks, shape (users, blocks); rows sum to 1."""

    priors: np.ndarray

    @classmethod
    def uniform(cls, n_users: int, n_blocks: int) -> "BeliefState":
        return cls(np.full((n_users, n_blocks), 1.0 / n_blocks))

    @property
    def n_users(self) -> int:
        return self.priors.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.priors.shape[1]

    def copy(self) -> "BeliefState":
        return BeliefState(self.priors.copy())


def floor_and_normalize(p: np.ndarray) -> np.ndarray:
    p = np.maximum(p, PRIOR_FLOOR)
    return p / p.sum()


def update_prior(prior: np.ndarray, mu: np.ndarray, s: float, sigma: float) -> np.ndarray:
    """One Bayes update of a single user's prior row.

    Likelihoods are evaluated in log space and shifted by their maximum before
    exponentiation, so the best-matching block never underflows. If the update
    still produces no usable mass (non-finite inputs), the belief resets to
    uniform rather than propagating NaNs. The result is floored at PRIOR_FLOOR
    and renormalized.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    prior = np.asarray(prior, dtype=float)
    mu = np.asarray(mu, dtype=float)
    ll = -((s - mu) ** 2) / (2.0 * sigma * sigma)
    finite = np.isfinite(ll)
    if not finite.any():
        return np.full(prior.shape, 1.0 / prior.size)
    ll = ll - ll[finite].max()
    post = prior * np.where(finite, np.exp(np.where(finite, ll, 0.0)), 0.0)
    total = post.sum()
    if not np.isfinite(total) or total <= 0.0:
        return np.full(prior.shape, 1.0 / prior.size)
    return floor_and_normalize(post / total)


def block_distance_matrix(block_centers: np.ndarray) -> np.ndarray:
    """(N, N) Euclidean distances between block centers."""
    return np.linalg.norm(block_centers[:, None, :] - block_centers[None, :, :], axis=2)


@dataclass(frozen=True)
class LossParams:
    """Static ingredients of the misdecision cost: the belief weight alpha and
    the block center distance matrix."""

    alpha: float
    block_distances: np.ndarray

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        d = self.block_distances
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("block_distances must be square")

    @classmethod
    def for_scene(cls, scene, alpha: float) -> "LossParams":
        return cls(alpha=alpha, block_distances=block_distance_matrix(scene.block_centers))


def loss_params(prior_row: np.ndarray, block_distances: np.ndarray, alpha: float) -> np.ndarray:
    """Misdecision cost gamma[n][n'] for one user's prior row.

    gamma grows with how far the wrong block is and with how much belief it
    already holds, so confusions that would actually drag the estimate away are
    penalized hardest. The diagonal is zero (a block is never confused with
    itself).
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    prior_row = np.asarray(prior_row, dtype=float)
    return block_distances * (1.0 + alpha * prior_row[None, :])


def confusion_bound(mu_n: float, mu_np: float, p_n: float, p_np: float, sigma: float) -> float:
    """Closed-form upper bound on P(decide n' | truth n) for the two-block test.

    With d = ((mu' - mu)^2 - 2 sigma^2 ln(p'/p)) / (2 sigma |mu' - mu|):

        d >= 0:  bound = exp(-d^2/2) / 2
        d <  0:  bound = 1 - exp(-2 d^2 / pi) / 4

    both clamped to [0, 1]. Degenerate means (|mu' - mu| < MU_TOL) return 1.0
    when the wrong block holds at least as much prior, else 0.0.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    dmu = mu_np - mu_n
    if abs(dmu) < MU_TOL:
        return 1.0 if p_np >= p_n else 0.0
    d = (dmu * dmu - 2.0 * sigma * sigma * np.log(p_np / p_n)) / (2.0 * sigma * abs(dmu))
    if d >= 0.0:
        b = 0.5 * np.exp(-0.5 * d * d)
    else:
        b = 1.0 - 0.25 * np.exp(-(2.0 / np.pi) * d * d)
    return float(min(max(b, 0.0), 1.0))


def pairwise_confusion_bounds(mu: np.ndarray, log_priors: np.ndarray, sigma: float) -> np.ndarray:
    """Vectorized ``confusion_bound`` over all ordered pairs.

    Entry [n, n'] bounds P(decide n' | truth n). ``mu`` may be (N,) or batched
    (B, N); ``log_priors`` is (N,). Returns (N, N) or (B, N, N).
    """
    mu = np.asarray(mu, dtype=float)
    batched = mu.ndim == 2
    mus = mu if batched else mu[None, :]
    lr2 = 2.0 * sigma * sigma * (log_priors[None, :] - log_priors[:, None])
    dmu = mus[:, None, :] - mus[:, :, None]
    adm = np.abs(dmu)
    degenerate = adm < MU_TOL
    d = (dmu * dmu - lr2[None]) / (2.0 * sigma * np.where(degenerate, 1.0, adm))
    arg = np.where(d >= 0.0, -0.5 * d * d, -(2.0 / np.pi) * d * d)
    e = np.exp(arg)
    b = np.where(d >= 0.0, 0.5 * e, 1.0 - 0.25 * e)
    b = np.where(degenerate, (lr2[None] >= 0.0).astype(float), b)
    np.clip(b, 0.0, 1.0, out=b)
    return b if batched else b[0]


def positioning_loss(states, beliefs: BeliefState, table, params: LossParams,
                     sigma: float | None = None) -> float:
    """Bound-based positioning loss of one configuration under current beliefs.

    sum_i sum_{n != n'} prior[i, n] * gamma[i, n, n'] * bound(n -> n'),
    with gamma from ``loss_params`` per user. Exact full-matrix evaluation; the
    optimizer uses a pruned equivalent for speed.
    """
    from .channel import mean_rss  # local import to keep module load order simple

    if sigma is None:
        sigma = table.noise_sigma_db
    mu = mean_rss(table, states)
    return positioning_loss_from_mu(mu, beliefs, params, sigma)


def positioning_loss_from_mu(mu: np.ndarray, beliefs: BeliefState, params: LossParams,
                             sigma: float) -> float:
    total = 0.0
    n = beliefs.n_blocks
    off_diag = ~np.eye(n, dtype=bool)
    for i in range(beliefs.n_users):
        p = beliefs.priors[i]
        gamma = loss_params(p, params.block_distances, params.alpha)
        bounds = pairwise_confusion_bounds(mu, np.log(p), sigma)
        w = p[:, None] * gamma
        total += float((w * bounds)[off_diag].sum())
    return total


def decision_interval(mu: np.ndarray, prior: np.ndarray, sigma: float, n_prime: int):
    """Interval of measurement values decided into block n'.

    The decision region is an intersection of pairwise half-lines: against each
    competitor m, block n' wins where

        (s - mu')^2 - (s - mu_m)^2 <= 2 sigma^2 ln(p'/p_m).

    Returns (lo, hi) with infinities for unbounded sides, or None when n' is
    dominated everywhere. Ties on the boundary have measure zero.
    """
    mu = np.asarray(mu, dtype=float)
    prior = np.asarray(prior, dtype=float)
    lo, hi = -np.inf, np.inf
    mu_p, p_p = mu[n_prime], prior[n_prime]
    for m in range(len(mu)):
        if m == n_prime:
            continue
        dmu = mu_p - mu[m]
        if abs(dmu) < MU_TOL:
            if p_p < prior[m]:
                return None  # strictly out-weighted at identical mean
            continue
        t = (mu_p + mu[m]) / 2.0 - sigma * sigma * np.log(p_p / prior[m]) / dmu
        if dmu > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    if lo >= hi:
        return None
    return lo, hi


def exact_confusion_integral(mu: np.ndarray, prior: np.ndarray, sigma: float,
                             n: int, n_prime: int) -> float:
    """P(decide n' | truth n) by adaptive quadrature over the exact region.

    Validation oracle for ``confusion_bound``; absolute error below 1e-8.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    interval = decision_interval(mu, prior, sigma, n_prime)
    if interval is None:
        return 0.0
    lo, hi = interval
    center = float(np.asarray(mu, dtype=float)[n])
    # The Gaussian carries no mass beyond ~12 sigma; clipping keeps the
    # quadrature on a finite interval where it can hit the 1e-8 target.
    lo = max(lo, center - 12.0 * sigma)
    hi = min(hi, center + 12.0 * sigma)
    if lo >= hi:
        return 0.0
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))

    def density(x):
        z = (x - center) / sigma
        return norm * np.exp(-0.5 * z * z)

    pts = [center] if lo < center < hi else None
    val, _ = integrate.quad(density, lo, hi, epsabs=1e-10, limit=200, points=pts)
    return float(val)


def map_estimate(prior: np.ndarray, mu: np.ndarray, s: float, sigma: float) -> int:
    """Decided block: argmax of prior-weighted likelihood, lowest index on ties."""
    prior = np.asarray(prior, dtype=float)
    if np.all(prior <= 0):
        raise ValueError("prior has no mass")
    with np.errstate(divide="ignore"):
        scores = np.log(prior) - ((s - np.asarray(mu, dtype=float)) ** 2) / (2.0 * sigma * sigma)
    return int(np.argmax(scores))


def loss_upper_bound(n_users: int, n_blocks: int, alpha: float, soi_dims) -> float:
    """A priori ceiling on the positioning loss for any configuration/beliefs:
    every pair confused with probability 1 at the ROI diagonal distance."""
    diag = float(np.linalg.norm(np.asarray(soi_dims, dtype=float)))
    return n_users * n_blocks * (1.0 + alpha) * diag
