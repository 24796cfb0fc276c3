"""Distribution kernels for the recruitment model.

Covers the four families the rest of the package needs: gamma and Poisson
for the data-generating process, negative binomial with real-valued size
for predicted counts, and Pearson type VI for predicted waiting times.
CDFs are built on the regularized incomplete beta/gamma functions;
discrete quantiles invert the CDF by bracketing and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "GammaParams",
    "NegBinParams",
    "Pearson6Params",
    "log_gamma",
    "nb_pmf",
    "nb_cdf",
    "nb_quantile",
    "pearson6_cdf",
    "pearson6_quantile",
    "gamma_cdf",
    "gamma_quantile",
    "poisson_cdf",
    "poisson_quantile",
    "sample_gamma",
    "sample_poisson",
]

# Below this size the betainc route loses accuracy (its first parameter is
# nearly zero), so the CDF falls back to direct pmf summation.
_TINY_SIZE = 1e-3


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in the shape/rate parameterization."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.shape) and self.shape > 0,
                 f"gamma shape must be positive and finite, got {self.shape}")
        _require(math.isfinite(self.rate) and self.rate > 0,
                 f"gamma rate must be positive and finite, got {self.rate}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2


@dataclass(frozen=True)
class NegBinParams:
    """Negative binomial: number of successes before ``size`` failures.

    ``size`` may be any positive real; ``prob`` is the success probability.
    pmf(j) = Gamma(size + j) / (Gamma(size) j!) * prob**j * (1 - prob)**size.
    """

    size: float
    prob: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.size) and self.size > 0,
                 f"negative binomial size must be positive and finite, got {self.size}")
        _require(0.0 < self.prob < 1.0,
                 f"negative binomial prob must lie in (0, 1), got {self.prob}")

    @property
    def mean(self) -> float:
        return self.size * self.prob / (1.0 - self.prob)

    @property
    def variance(self) -> float:
        return self.size * self.prob / (1.0 - self.prob) ** 2


@dataclass(frozen=True)
class Pearson6Params:
    """Pearson type VI (beta prime scaled by ``scale``).

    density(x) proportional to (x/scale)**(shape_num - 1)
    * (1 + x/scale)**(-(shape_num + shape_den)) on x > 0.
    """

    shape_num: float
    shape_den: float
    scale: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.shape_num) and self.shape_num > 0,
                 f"shape_num must be positive and finite, got {self.shape_num}")
        _require(math.isfinite(self.shape_den) and self.shape_den > 0,
                 f"shape_den must be positive and finite, got {self.shape_den}")
        _require(math.isfinite(self.scale) and self.scale > 0,
                 f"scale must be positive and finite, got {self.scale}")

    @property
    def mean(self) -> float:
        """Defined for shape_den > 1."""
        _require(self.shape_den > 1, "mean requires shape_den > 1")
        return self.scale * self.shape_num / (self.shape_den - 1.0)

    @property
    def variance(self) -> float:
        """Defined for shape_den > 2."""
        _require(self.shape_den > 2, "variance requires shape_den > 2")
        a, b = self.shape_num, self.shape_den
        return self.scale**2 * a * (a + b - 1.0) / ((b - 1.0) ** 2 * (b - 2.0))


def log_gamma(x: float) -> float:
    """Natural log of the gamma function; requires x > 0."""
    if not (x > 0 and math.isfinite(x)):
        raise ValueError(f"log_gamma requires finite x > 0, got {x}")
    return float(special.gammaln(x))


def nb_pmf(k: int, params: NegBinParams) -> float:
    """Probability mass at integer k (0 for negative k)."""
    k = math.floor(k)
    if k < 0:
        return 0.0
    log_mass = (special.gammaln(params.size + k) - special.gammaln(params.size)
                - special.gammaln(k + 1.0)
                + k * math.log(params.prob)
                + params.size * math.log1p(-params.prob))
    return float(math.exp(log_mass))


def nb_cdf(k: float, params: NegBinParams) -> float:
    """P(X <= floor(k)) for X negative binomial; 0 for k < 0.

    Uses the regularized incomplete beta identity
    P(X <= k) = I_{1-prob}(size, k + 1), with a pmf-summation fallback for
    very small ``size`` where betainc degrades.
    """
    k = math.floor(k)
    if k < 0:
        return 0.0
    if params.size < _TINY_SIZE:
        j = np.arange(k + 1, dtype=float)
        logs = (special.gammaln(params.size + j) - special.gammaln(params.size)
                - special.gammaln(j + 1.0)
                + j * math.log(params.prob)
                + params.size * math.log1p(-params.prob))
        return float(min(1.0, np.exp(logs).sum()))
    return float(special.betainc(params.size, k + 1.0, 1.0 - params.prob))


def nb_quantile(q: float, params: NegBinParams) -> int:
    """Smallest integer k with nb_cdf(k) >= q, for q in (0, 1).

    Brackets exponentially starting from the mean, then bisects.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if nb_cdf(0, params) >= q:
        return 0
    lo = 0  # invariant: cdf(lo) < q
    hi = max(1, math.ceil(params.mean))
    while nb_cdf(hi, params) < q:
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if nb_cdf(mid, params) >= q:
            hi = mid
        else:
            lo = mid
    return hi


def pearson6_cdf(x: float, params: Pearson6Params) -> float:
    """P(X <= x); domain error for x < 0."""
    if x < 0:
        raise ValueError(f"Pearson VI support is x >= 0, got {x}")
    z = x / (x + params.scale)
    return float(special.betainc(params.shape_num, params.shape_den, z))


def pearson6_quantile(q: float, params: Pearson6Params) -> float:
    """Inverse of pearson6_cdf on (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    z = float(special.betaincinv(params.shape_num, params.shape_den, q))
    return params.scale * z / (1.0 - z)


def gamma_cdf(x: float, params: GammaParams) -> float:
    """P(X <= x) for X gamma; domain error for x < 0."""
    if x < 0:
        raise ValueError(f"gamma support is x >= 0, got {x}")
    return float(special.gammainc(params.shape, params.rate * x))


def gamma_quantile(q: float, params: GammaParams) -> float:
    """Inverse of gamma_cdf on (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    return float(special.gammaincinv(params.shape, q)) / params.rate


def poisson_cdf(k: float, mean: float) -> float:
    """P(X <= floor(k)) for X Poisson with the given mean; 0 for k < 0."""
    if not (mean > 0 and math.isfinite(mean)):
        raise ValueError(f"Poisson mean must be positive and finite, got {mean}")
    k = math.floor(k)
    if k < 0:
        return 0.0
    return float(special.gammaincc(k + 1.0, mean))


def poisson_quantile(q: float, mean: float) -> int:
    """Smallest integer k with poisson_cdf(k) >= q, for q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if poisson_cdf(0, mean) >= q:
        return 0
    lo = 0  # invariant: cdf(lo) < q
    hi = max(1, math.ceil(mean))
    while poisson_cdf(hi, mean) < q:
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if poisson_cdf(mid, mean) >= q:
            hi = mid
        else:
            lo = mid
    return hi


def sample_gamma(params: GammaParams, rng: np.random.Generator, size=None):
    """Draw from the gamma law; scalar float when size is None."""
    draw = rng.gamma(params.shape, 1.0 / params.rate, size)
    return float(draw) if size is None else draw


def sample_poisson(mean, rng: np.random.Generator, size=None):
    """Draw Poisson counts; mean may be a scalar or array (zeros allowed)."""
    if np.any(np.asarray(mean) < 0):
        raise ValueError("Poisson mean must be non-negative")
    draw = rng.poisson(mean, size)
    return int(draw) if np.isscalar(mean) and size is None else draw
