"""Trial data containers and maximum-likelihood fitting.

Centre c holds a gamma(alpha, beta) recruitment rate (shape/rate); its
count over an exposure window t_c is Poisson(rate * t_c).  Integrating the
rates out gives the marginal log-likelihood

    l(a, b) = C a log b - sum_c (a + n_c) log(b + t_c)
              - C logGamma(a) + sum_c logGamma(a + n_c)

up to terms free of (a, b).  Centres with zero exposure (and hence zero
count) contribute exactly nothing.  When every open centre shares one
exposure t the ratio of the estimates is pinned at a/b = n/(C t), which
reduces the maximization to one dimension along that ray; otherwise the
fit runs in two dimensions over (log a, log b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "CentreRecord",
    "TrialData",
    "ModelFit",
    "FitOptions",
    "ModelError",
    "InsufficientData",
    "DegenerateLikelihood",
    "log_likelihood",
    "fit_mle",
    "posterior_rate_moments",
]

# Upper optimization bound on log(alpha); estimates pushed against it mean
# the likelihood keeps rising toward the constant-ratio boundary.
_MAX_LOG_ALPHA = 30.0
_RELATIVE_EXPOSURE_TOL = 1e-12
# Below this gradient the Newton polish is locally contracting and skips
# its objective-based line search, whose floor comparison turns into noise.
_SAFE_GRADIENT = 1e-4


class ModelError(Exception):
    """Base class for fitting errors."""


class InsufficientData(ModelError):
    """No usable information: zero total count or no positive exposure."""


class DegenerateLikelihood(ModelError):
    """Monotone-likelihood failure.

    The marginal likelihood increases without bound as (alpha, beta) grow
    with their ratio fixed, which happens when the counts are no more
    dispersed than a common-rate Poisson sample.  The boundary fit is
    attached as ``fit`` for diagnostics.
    """

    def __init__(self, message: str, fit: "ModelFit | None" = None):
        super().__init__(message)
        self.fit = fit


@dataclass(frozen=True)
class CentreRecord:
    """One centre: identifier, exposure up to census, and recruit count."""

    centre_id: str
    exposure: float
    count: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.exposure) and self.exposure >= 0):
            raise ValueError(f"exposure must be finite and >= 0, got {self.exposure}")
        if self.count < 0 or self.count != int(self.count):
            raise ValueError(f"count must be a non-negative integer, got {self.count}")
        if self.exposure == 0 and self.count != 0:
            raise ValueError(
                f"centre {self.centre_id!r} has count {self.count} with zero exposure")


@dataclass(frozen=True)
class TrialData:
    """Snapshot of a multi-centre trial at its census time."""

    census_time: float
    centres: tuple[CentreRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "centres", tuple(self.centres))
        if not (math.isfinite(self.census_time) and self.census_time > 0):
            raise ValueError(f"census_time must be positive, got {self.census_time}")
        if len(self.centres) == 0:
            raise ValueError("at least one centre is required")
        for rec in self.centres:
            if rec.exposure > self.census_time:
                raise ValueError(
                    f"centre {rec.centre_id!r} exposure {rec.exposure} exceeds "
                    f"census time {self.census_time}")

    @classmethod
    def from_arrays(cls, census_time: float, exposures: Sequence[float],
                    counts: Sequence[int], ids: Sequence[str] | None = None) -> "TrialData":
        if ids is None:
            ids = [f"centre_{i + 1}" for i in range(len(exposures))]
        records = tuple(CentreRecord(str(cid), float(t), int(n))
                        for cid, t, n in zip(ids, exposures, counts, strict=True))
        return cls(census_time=float(census_time), centres=records)

    @property
    def num_centres(self) -> int:
        return len(self.centres)

    @cached_property
    def exposures(self) -> np.ndarray:
        return np.array([rec.exposure for rec in self.centres], dtype=float)

    @cached_property
    def counts(self) -> np.ndarray:
        return np.array([rec.count for rec in self.centres], dtype=np.int64)

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ModelFit:
    """Fitted shape/rate pair with optimizer diagnostics."""

    alpha_hat: float
    beta_hat: float
    log_lik: float
    converged: bool
    iterations: int
    degenerate: bool = False


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings; the defaults suit the simulation harness."""

    max_log_alpha: float = _MAX_LOG_ALPHA
    xatol: float = 1e-6
    fatol: float = 1e-10
    max_iterations: int = 2000
    polish_steps: int = 120
    gradient_target: float = 1e-10


def log_likelihood(alpha: float, beta: float, data: TrialData) -> float:
    """Marginal log-likelihood of (alpha, beta), up to a data-only constant."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be positive and finite, got {beta}")
    opened = data.exposures > 0
    # closed centres hold zero counts, so their terms cancel exactly
    counts = data.counts[opened]
    exposures = data.exposures[opened]
    c = int(opened.sum())
    return float(c * alpha * math.log(beta)
                 - np.sum((alpha + counts) * np.log(beta + exposures))
                 - c * special.gammaln(alpha)
                 + np.sum(special.gammaln(alpha + counts)))


class _Workspace:
    """Sufficient statistics cached for repeated likelihood evaluations.

    The logGamma sums run over distinct count values with multiplicities,
    which keeps each evaluation cheap when many centres share a count.
    """

    def __init__(self, data: TrialData):
        opened = data.exposures > 0
        # closed centres hold zero counts, so every likelihood term they
        # would add cancels exactly; drop them once here
        self.num_open = int(opened.sum())
        self.exposures = data.exposures[opened]
        counts = data.counts[opened]
        self.counts = counts.astype(float)
        self.total_count = int(data.counts.sum())
        values, mult = np.unique(counts, return_counts=True)
        self.count_values = values.astype(float)
        self.count_mult = mult.astype(float)
        self.total_exposure = float(self.exposures.sum())
        self.sum_count_exposure = float(np.dot(self.counts, self.exposures))
        self.sum_exposure_sq = float(np.dot(self.exposures, self.exposures))

        self.equal_exposures = (
            self.num_open > 0
            and (self.exposures.max() - self.exposures.min())
            <= _RELATIVE_EXPOSURE_TOL * self.exposures.max())
        self.common_exposure = float(self.exposures.mean()) if self.equal_exposures else None

    def loglik(self, alpha: float, beta: float) -> float:
        log_b_t = np.log(beta + self.exposures)
        return (self.num_open * alpha * math.log(beta)
                - alpha * log_b_t.sum() - float(np.dot(self.counts, log_b_t))
                - self.num_open * float(special.gammaln(alpha))
                + float(np.dot(self.count_mult, special.gammaln(alpha + self.count_values))))

    def grad(self, alpha: float, beta: float) -> np.ndarray:
        """Score in natural (alpha, beta) coordinates."""
        b_t = beta + self.exposures
        d_alpha = (self.num_open * math.log(beta) - float(np.log(b_t).sum())
                   - self.num_open * float(special.digamma(alpha))
                   + float(np.dot(self.count_mult, special.digamma(alpha + self.count_values))))
        d_beta = (self.num_open * alpha / beta
                  - float(((alpha + self.counts) / b_t).sum()))
        return np.array([d_alpha, d_beta])

    def hess(self, alpha: float, beta: float) -> np.ndarray:
        """Hessian in natural (alpha, beta) coordinates."""
        b_t = beta + self.exposures
        inv = 1.0 / b_t
        h_aa = (-self.num_open * float(special.polygamma(1, alpha))
                + float(np.dot(self.count_mult, special.polygamma(1, alpha + self.count_values))))
        h_ab = self.num_open / beta - float(inv.sum())
        h_bb = (-self.num_open * alpha / beta**2
                + float(((alpha + self.counts) * inv * inv).sum()))
        return np.array([[h_aa, h_ab], [h_ab, h_bb]])

    def grad_log_scale(self, log_alpha: float, log_beta: float) -> np.ndarray:
        alpha, beta = math.exp(log_alpha), math.exp(log_beta)
        g = self.grad(alpha, beta)
        return np.array([alpha, beta]) * g

    def hess_log_scale(self, log_alpha: float, log_beta: float) -> np.ndarray:
        alpha, beta = math.exp(log_alpha), math.exp(log_beta)
        scale = np.array([alpha, beta])
        h = self.hess(alpha, beta) * np.outer(scale, scale)
        h[np.diag_indices(2)] += scale * self.grad(alpha, beta)
        return h

    def profile_loglik(self, log_alpha: float, ratio: float) -> float:
        """Likelihood along beta = alpha / ratio, open centres only."""
        alpha = math.exp(log_alpha)
        beta = alpha / ratio
        t = self.common_exposure
        return (self.num_open * alpha * math.log(beta)
                - (self.num_open * alpha + self.total_count) * math.log(beta + t)
                - self.num_open * float(special.gammaln(alpha))
                + float(np.dot(self.count_mult,
                               special.gammaln(alpha + self.count_values))))

    def boundary_loglik(self, ratio: float) -> float:
        """Limit of the likelihood as alpha -> inf with alpha/beta = ratio."""
        return self.total_count * math.log(ratio) - ratio * self.total_exposure

    def tail_statistic(self) -> float:
        """Sign of the likelihood's approach to its constant-ratio limit.

        Along beta = alpha / ratio with ratio = n / sum(t), the likelihood
        behaves as L_inf + K / alpha for large alpha with

            K = ratio^2 sum(t^2)/2 - ratio sum(n t) + sum(n (n-1))/2.

        K <= 0 means the likelihood is still climbing toward L_inf at any
        finite bound, i.e. the counts show no over-dispersion and the fit
        degenerates.  Evaluating K from the data sidesteps the float
        cancellation that swamps direct likelihood comparisons at huge
        alpha.
        """
        ratio = self.total_count / self.total_exposure
        pair_terms = float(np.dot(self.counts, self.counts - 1.0)) / 2.0
        return (ratio**2 * self.sum_exposure_sq / 2.0
                - ratio * self.sum_count_exposure + pair_terms)


def _moment_start(ws: _Workspace) -> tuple[float, float]:
    """Method-of-moments start in (log alpha, log beta)."""
    rate = ws.total_count / ws.total_exposure
    residual = ws.counts - rate * ws.exposures
    excess = float(np.dot(residual, residual)) - rate * ws.total_exposure
    if excess > 0 and ws.sum_exposure_sq > 0:
        rate_var = excess / ws.sum_exposure_sq
        beta0 = min(max(rate / rate_var, 1e-4), 1e8)
    else:
        # No visible over-dispersion; start high and let the bound rule decide.
        beta0 = min(max(math.exp(8.0) / rate, 1e-4), 1e8)
    alpha0 = min(max(rate * beta0, 1e-4), 1e8)
    return math.log(alpha0), math.log(beta0)


def _polish_1d(ws: _Workspace, log_alpha: float, ratio: float,
               options: FitOptions) -> tuple[float, int]:
    """Newton steps on the profiled likelihood in log alpha."""
    la = log_alpha
    steps = 0
    for _ in range(options.polish_steps):
        alpha = math.exp(la)
        beta = alpha / ratio
        g = ws.grad(alpha, beta)
        d1 = alpha * (g[0] + g[1] / ratio)
        if abs(d1) <= options.gradient_target:
            break
        h = ws.hess(alpha, beta)
        curve = h[0, 0] + 2.0 * h[0, 1] / ratio + h[1, 1] / ratio**2
        d2 = alpha**2 * curve + d1
        if d2 >= 0:
            break
        step = -d1 / d2
        step = max(min(step, 1.0), -1.0)
        new_la = min(la + step, options.max_log_alpha)
        if abs(d1) > _SAFE_GRADIENT:
            # far out, guard against overshoot; near the optimum the
            # objective moves below float resolution and the comparison
            # would reject perfectly good steps, so Newton runs unchecked
            value = ws.profile_loglik(la, ratio)
            floor = value - 1e-10 * max(1.0, abs(value))
            for _ in range(10):
                if ws.profile_loglik(new_la, ratio) >= floor:
                    break
                new_la = la + 0.5 * (new_la - la)
            else:
                break
        la = new_la
        steps += 1
    return la, steps


def _polish_2d(ws: _Workspace, x: np.ndarray, options: FitOptions) -> tuple[np.ndarray, int]:
    """Damped Newton steps in (log alpha, log beta)."""
    x = x.copy()
    steps = 0
    for _ in range(options.polish_steps):
        g = ws.grad_log_scale(x[0], x[1])
        if float(np.abs(g).max()) <= options.gradient_target:
            break
        h = ws.hess_log_scale(x[0], x[1])
        det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
        if not (det > 0 and h[0, 0] < 0):  # needs a locally concave point
            break
        step = np.linalg.solve(h, -g)
        norm = float(np.abs(step).max())
        if norm > 2.0:
            step *= 2.0 / norm
        new_x = x + step
        new_x[0] = min(new_x[0], options.max_log_alpha)
        if float(np.abs(g).max()) > _SAFE_GRADIENT:
            # same overshoot guard and float-noise exemption as the 1-d case
            value = ws.loglik(math.exp(x[0]), math.exp(x[1]))
            floor = value - 1e-10 * max(1.0, abs(value))
            for _ in range(10):
                if ws.loglik(math.exp(new_x[0]), math.exp(new_x[1])) >= floor:
                    break
                new_x = x + 0.5 * (new_x - x)
            else:
                break
        x = new_x
        steps += 1
    return x, steps


def _raise_degenerate(ws: _Workspace, ratio: float, iterations: int):
    boundary_alpha = math.exp(_MAX_LOG_ALPHA)
    fit = ModelFit(alpha_hat=boundary_alpha, beta_hat=boundary_alpha / ratio,
                   log_lik=ws.boundary_loglik(ratio), converged=False,
                   iterations=iterations, degenerate=True)
    raise DegenerateLikelihood(
        f"likelihood keeps increasing along alpha/beta = {ratio:.6g}; "
        "counts show no over-dispersion", fit=fit)


def fit_mle(data: TrialData, options: FitOptions = FitOptions()) -> ModelFit:
    """Maximize the marginal likelihood over (alpha, beta).

    Equal exposures across all open centres pin alpha/beta at n/(C t)
    and the search runs in one dimension along that ray (Brent); unequal
    exposures use Nelder-Mead over (log alpha, log beta) from a
    method-of-moments start.  Either way a short Newton polish with
    analytic derivatives drives the score below ``gradient_target``.

    Raises
    ------
    InsufficientData
        If no centre has positive exposure or the total count is zero.
    DegenerateLikelihood
        If the likelihood is still rising at log alpha = max_log_alpha,
        i.e. the boundary value along the best fixed-ratio ray is not
        beaten by any interior point.
    """
    ws = _Workspace(data)
    if ws.num_open == 0:
        raise InsufficientData("no centre has positive exposure")
    if ws.total_count == 0:
        raise InsufficientData("total recruit count is zero")

    boundary_ratio = ws.total_count / ws.total_exposure
    if ws.tail_statistic() <= 0:
        _raise_degenerate(ws, boundary_ratio, iterations=0)

    if ws.equal_exposures:
        ratio = ws.total_count / (ws.num_open * ws.common_exposure)
        result = optimize.minimize_scalar(
            lambda la: -ws.profile_loglik(la, ratio),
            bounds=(-30.0, options.max_log_alpha), method="bounded",
            options={"xatol": options.xatol})
        la, polish_steps = _polish_1d(ws, float(result.x), ratio, options)
        iterations = int(result.nfev) + polish_steps
        alpha_hat = math.exp(la)
        beta_hat = alpha_hat / ratio
        at_bound = la >= options.max_log_alpha - 0.1
    else:
        x0 = np.array(_moment_start(ws))
        simplex = np.array([x0, x0 + [0.25, 0.0], x0 + [0.0, 0.25]])

        def objective(x):
            if x[0] > options.max_log_alpha or abs(x[1]) > 45.0:
                return math.inf
            return -ws.loglik(math.exp(x[0]), math.exp(x[1]))

        result = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"xatol": options.xatol, "fatol": options.fatol,
                     "maxiter": options.max_iterations, "initial_simplex": simplex})
        x, polish_steps = _polish_2d(ws, np.asarray(result.x, dtype=float), options)
        iterations = int(result.nit) + polish_steps
        alpha_hat = math.exp(x[0])
        beta_hat = math.exp(x[1])
        at_bound = x[0] >= options.max_log_alpha - 0.1

    if at_bound:
        _raise_degenerate(ws, boundary_ratio, iterations)

    log_lik = ws.loglik(alpha_hat, beta_hat)
    grad = ws.grad_log_scale(math.log(alpha_hat), math.log(beta_hat))
    converged = float(np.abs(grad).max()) <= 1e-8
    return ModelFit(alpha_hat=float(alpha_hat), beta_hat=float(beta_hat),
                    log_lik=float(log_lik), converged=converged,
                    iterations=iterations)


def posterior_rate_moments(data: TrialData, fit: ModelFit) -> tuple[float, float]:
    """Mean and variance of the summed centre rates given the data.

    Centre c's rate posterior is gamma(alpha + n_c, beta + t_c); the sum
    over centres has mean sum_c (alpha + n_c)/(beta + t_c) and variance
    sum_c (alpha + n_c)/(beta + t_c)^2 at the plugged-in estimates.
    """
    if not fit.converged:
        raise ValueError("posterior moments require a converged fit")
    shape = fit.alpha_hat + data.counts
    rate = fit.beta_hat + data.exposures
    mean = float((shape / rate).sum())
    variance = float((shape / rate**2).sum())
    return mean, variance
