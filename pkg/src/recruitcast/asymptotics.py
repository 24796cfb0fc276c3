"""Limit laws for interval content and gamma-sum cumulant checks.

As the number of centres grows, the true probability content of a
plug-in prediction interval's quantile does not settle at its nominal p:
it converges to W = Phi(c Z + d) for a standard normal Z, with (c, d)
determined by the objective.  These laws justify the probability
adjustment in :mod:`recruitcast.predict` and are reproduced empirically
by the simulation harness.

The second half of the module handles sums of independent gamma
variables: exact cumulants, the moment-matched gamma approximation, and
the ordering check showing the matched law is never more skewed than the
true sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import special

__all__ = [
    "LimitLaw",
    "GammaCollection",
    "CumulantCheck",
    "count_limit_law",
    "time_limit_law",
    "limit_prob_cdf",
    "limit_prob_density",
    "limit_tail_mass",
    "sum_gamma_cumulant",
    "moment_matched_gamma",
    "verify_cumulant_ordering",
]

# Factorials overflow comfortably before j = 171; switch the cumulant
# accumulation to log space well before that.
_LOG_SPACE_ORDER = 20


@dataclass(frozen=True)
class LimitLaw:
    """Parameters of W = Phi(c Z + d), the limit of a quantile's content."""

    c: float
    d: float
    objective: str

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"slope c must be positive and finite, got {self.c}")
        if not math.isfinite(self.d):
            raise ValueError(f"shift d must be finite, got {self.d}")


def count_limit_law(p: float, beta: float, exposure: float, horizon: float) -> LimitLaw:
    """Limit law of the p-quantile's content for the count objective.

    c = sqrt(horizon / exposure) and
    d = invPhi(p) sqrt((beta + exposure + horizon) / (beta + exposure)).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not (exposure > 0 and horizon > 0):
        raise ValueError("exposure and horizon must be positive")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    c = math.sqrt(horizon / exposure)
    d = float(special.ndtri(p)) * math.sqrt(1.0 + horizon / (beta + exposure))
    return LimitLaw(c=c, d=d, objective="count")


def time_limit_law(p: float, alpha: float, beta: float,
                   exposure: float, mean_target: float) -> LimitLaw:
    """Limit law of the p-quantile's content for the time objective.

    With a the target count per centre, c = sqrt(a beta / (alpha exposure))
    and d = invPhi(p) sqrt(1 + (a / alpha) beta / (beta + exposure)).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not (alpha > 0 and beta > 0 and exposure > 0 and mean_target > 0):
        raise ValueError("alpha, beta, exposure and mean target must be positive")
    c = math.sqrt(mean_target * beta / (alpha * exposure))
    d = float(special.ndtri(p)) * math.sqrt(
        1.0 + (mean_target / alpha) * beta / (beta + exposure))
    return LimitLaw(c=c, d=d, objective="time")


def limit_prob_cdf(w, law: LimitLaw):
    """P(W <= w) for W = Phi(c Z + d); accepts scalars or arrays in [0, 1]."""
    w = np.asarray(w, dtype=float)
    if np.any((w < 0) | (w > 1)):
        raise ValueError("w must lie in [0, 1]")
    out = special.ndtr((special.ndtri(w) - law.d) / law.c)
    out = np.where(w <= 0, 0.0, out)
    out = np.where(w >= 1, 1.0, out)
    return float(out) if out.ndim == 0 else out


def limit_prob_density(w, law: LimitLaw):
    """Density of W on (0, 1), computed in log space to keep the tails clean."""
    w = np.asarray(w, dtype=float)
    if np.any((w <= 0) | (w >= 1)):
        raise ValueError("the density lives on the open interval (0, 1)")
    u = special.ndtri(w)
    z = (u - law.d) / law.c
    log_density = 0.5 * (u * u - z * z) - math.log(law.c)
    out = np.exp(log_density)
    return float(out) if out.ndim == 0 else out


def limit_tail_mass(p: float, beta: float, exposure: float) -> float:
    """P(W <= p) in the count limit as the horizon grows without bound."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not exposure > 0:
        raise ValueError(f"exposure must be positive, got {exposure}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    return float(special.ndtr(math.sqrt(exposure / (beta + exposure))
                              * float(special.ndtri(p))))


@dataclass(frozen=True)
class GammaCollection:
    """Ordered shapes and rates of independent gamma summands."""

    shapes: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "shapes", tuple(float(s) for s in self.shapes))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.shapes) != len(self.rates):
            raise ValueError("shapes and rates must have equal length")
        if len(self.shapes) == 0:
            raise ValueError("at least one component is required")
        if any(not (math.isfinite(s) and s > 0) for s in self.shapes):
            raise ValueError("all shapes must be positive and finite")
        if any(not (math.isfinite(r) and r > 0) for r in self.rates):
            raise ValueError("all rates must be positive and finite")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "GammaCollection":
        pairs = list(pairs)
        return cls(shapes=tuple(p[0] for p in pairs), rates=tuple(p[1] for p in pairs))


def sum_gamma_cumulant(order: int, collection: GammaCollection) -> float:
    """j-th cumulant of the sum: (j - 1)! * sum_i shape_i / rate_i**j."""
    if order < 1 or order != int(order):
        raise ValueError(f"cumulant order must be a positive integer, got {order}")
    shapes = np.asarray(collection.shapes)
    rates = np.asarray(collection.rates)
    if order <= _LOG_SPACE_ORDER:
        return float(math.factorial(order - 1) * np.sum(shapes / rates**order))
    log_terms = np.log(shapes) - order * np.log(rates)
    return float(math.exp(special.gammaln(order) + special.logsumexp(log_terms)))


def moment_matched_gamma(collection: GammaCollection):
    """Gamma law sharing the sum's first two cumulants."""
    from .distributions import GammaParams

    k1 = sum_gamma_cumulant(1, collection)
    k2 = sum_gamma_cumulant(2, collection)
    return GammaParams(shape=k1 * k1 / k2, rate=k1 / k2)


@dataclass(frozen=True)
class CumulantCheck:
    order: int
    sum_cumulant: float
    matched_cumulant: float
    gap: float
    ok: bool


def verify_cumulant_ordering(collection: GammaCollection,
                             max_order: int) -> list[CumulantCheck]:
    """Check 0 < kappa_j(matched) <= kappa_j(sum) for every order 3..max_order.

    The matched gamma agrees on orders 1 and 2 and can only fall short
    beyond that (equality holds when all rates coincide).
    """
    if max_order < 3:
        raise ValueError(f"max_order must be at least 3, got {max_order}")
    matched = moment_matched_gamma(collection)
    single = GammaCollection(shapes=(matched.shape,), rates=(matched.rate,))
    checks = []
    for order in range(3, max_order + 1):
        total = sum_gamma_cumulant(order, collection)
        approx = sum_gamma_cumulant(order, single)
        gap = total - approx
        ok = approx > 0 and approx <= total * (1.0 + 1e-9)
        checks.append(CumulantCheck(order=order, sum_cumulant=total,
                                    matched_cumulant=approx, gap=gap, ok=ok))
    return checks
