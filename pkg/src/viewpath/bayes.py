"""Bayesian two-group comparison: robust t-likelihood difference of means,
highest density intervals, and ROPE verdicts.

The sampler is a random-walk Metropolis over (mu1, mu2, sigma1, sigma2, nu)
with the classic robust-estimation priors: wide normal on the means,
wide uniform on the scales, shifted exponential on the normality parameter.
Chains run vectorized and everything is deterministic per seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

log = logging.getLogger(__name__)

N_CHAINS = 4
N_DRAWS = 20000
N_BURN = 5000
ACCEPT_TARGET = (0.2, 0.5)


@dataclass(frozen=True)
class PosteriorSamples:
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    nu: np.ndarray
    acceptance_rate: float

    @property
    def mean_difference(self) -> np.ndarray:
        return self.mu1 - self.mu2


def _t_loglike(y, mu, sigma, nu):
    """Student-t log-likelihood summed over y; mu/sigma/nu are (C, 1)."""
    z = (y[None, :] - mu) / sigma
    return np.sum(
        gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)
        - 0.5 * np.log(nu * math.pi) - np.log(sigma)
        - (nu + 1.0) / 2.0 * np.log1p(z * z / nu),
        axis=1,
    )


def fit_t_model(samples_a, samples_b, seed: int = 0,
                chains: int = N_CHAINS, draws: int = N_DRAWS,
                burn: int = N_BURN) -> PosteriorSamples:
    """Posterior over (mu1, mu2, sigma1, sigma2, nu) with independent
    t-likelihoods per group; proposal scales adapt during burn-in only."""
    y1 = np.asarray(samples_a, dtype=float).ravel()
    y2 = np.asarray(samples_b, dtype=float).ravel()
    assert len(y1) >= 5 and len(y2) >= 5
    rng = np.random.default_rng(seed)

    pooled = np.concatenate([y1, y2])
    mu_loc = float(pooled.mean())
    sd = float(pooled.std())
    if sd <= 0.0:
        log.warning("degenerate data (zero variance); widening sigma prior")
        sd = max(1e-6, abs(mu_loc) * 1e-3, 1e-6)
    mu_scale = sd * 1000.0
    sigma_lo, sigma_hi = sd / 1000.0, sd * 1000.0
    nu_mean = 29.0

    def log_post(theta):
        # out-of-support proposals produce NaN rows that are rejected below;
        # evaluate without numpy warnings
        mu1 = theta[:, 0:1]
        mu2 = theta[:, 1:2]
        s1 = theta[:, 2:3]
        s2 = theta[:, 3:4]
        nu = theta[:, 4:5]
        lp = np.full(theta.shape[0], -np.inf)
        ok = ((s1[:, 0] > sigma_lo) & (s1[:, 0] < sigma_hi)
              & (s2[:, 0] > sigma_lo) & (s2[:, 0] < sigma_hi)
              & (nu[:, 0] > 1.0))
        if not np.any(ok):
            return lp
        prior = (-0.5 * ((mu1[:, 0] - mu_loc) / mu_scale) ** 2
                 - 0.5 * ((mu2[:, 0] - mu_loc) / mu_scale) ** 2
                 - (nu[:, 0] - 1.0) / nu_mean)
        with np.errstate(invalid="ignore", divide="ignore"):
            like = (_t_loglike(y1, mu1, s1, nu)
                    + _t_loglike(y2, mu2, s2, nu))
        lp_ok = prior + like
        lp[ok] = lp_ok[ok]
        return lp

    theta = np.empty((chains, 5))
    theta[:, 0] = y1.mean() + 0.1 * sd * rng.standard_normal(chains)
    theta[:, 1] = y2.mean() + 0.1 * sd * rng.standard_normal(chains)
    theta[:, 2] = np.clip(y1.std() if y1.std() > 0 else sd,
                          sigma_lo * 2, sigma_hi / 2) \
        * np.exp(0.1 * rng.standard_normal(chains))
    theta[:, 3] = np.clip(y2.std() if y2.std() > 0 else sd,
                          sigma_lo * 2, sigma_hi / 2) \
        * np.exp(0.1 * rng.standard_normal(chains))
    theta[:, 4] = 10.0 + rng.random(chains)

    scale = np.tile(np.array([sd / 5.0, sd / 5.0, sd / 5.0, sd / 5.0, 2.0]),
                    (chains, 1))
    lp = log_post(theta)

    kept = np.empty((chains, draws - burn, 5))
    accepted_window = np.zeros(chains)
    accepted_total = 0
    window = 100

    for it in range(draws):
        prop = theta + scale * rng.standard_normal((chains, 5))
        lp_prop = log_post(prop)
        accept = np.log(rng.random(chains)) < lp_prop - lp
        theta[accept] = prop[accept]
        lp[accept] = lp_prop[accept]
        accepted_window += accept
        if it >= burn:
            kept[:, it - burn] = theta
            accepted_total += int(accept.sum())
        elif (it + 1) % window == 0:
            rate = accepted_window / window
            scale[rate < ACCEPT_TARGET[0]] *= 0.8
            scale[rate > ACCEPT_TARGET[1]] *= 1.25
            accepted_window[:] = 0.0

    flat = kept.reshape(-1, 5)
    return PosteriorSamples(
        mu1=flat[:, 0].copy(), mu2=flat[:, 1].copy(),
        sigma1=flat[:, 2].copy(), sigma2=flat[:, 3].copy(),
        nu=flat[:, 4].copy(),
        acceptance_rate=accepted_total / (chains * (draws - burn)),
    )


def hdi(draws, mass: float = 0.95):
    """Shortest interval containing ceil(mass * n) sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = len(x)
    assert n >= 100
    m = int(math.ceil(mass * n))
    widths = x[m - 1:] - x[: n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


@dataclass(frozen=True)
class RopeVerdict:
    label: str                 # "equivalent" | "distinct" | "inconclusive"
    overlap: float             # |HDI intersect ROPE| / |HDI|


def rope_decision(hdi_interval, rope) -> RopeVerdict:
    """Set relation between the HDI and the ROPE.

    HDI inside the ROPE -> practically equivalent; disjoint -> practically
    distinct; partial overlap -> inconclusive with the overlap fraction.
    """
    lo, hi = hdi_interval
    rlo, rhi = rope
    if lo >= rlo and hi <= rhi:
        return RopeVerdict("equivalent", 1.0)
    inter = max(0.0, min(hi, rhi) - max(lo, rlo))
    if inter == 0.0:
        return RopeVerdict("distinct", 0.0)
    width = hi - lo
    return RopeVerdict("inconclusive", inter / width if width > 0 else 1.0)
