#!/usr/bin/env python3
"""
Customer inconvenience model and analytic best response.

A customer offered an incentive rate q ($/h) picks the extra window width
delta in [0, delta_bar] minimizing I(delta) - q * delta, where I is a convex
piecewise-affine function max_s (gamma_s * delta + chi_s). The problem is
handled in epigraph form

    minimize  w - q * delta
    s.t.      w >= gamma_s * delta + chi_s   (dual lambda_s)
              delta <= delta_bar             (dual u)
              delta >= 0                     (dual sigma)

whose KKT system is linear and is what the single-level model embeds.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

# Residual above which a returned certificate is rejected
CERTIFICATE_TOL = 1e-7


class DomainError(ValueError):
    """Raised when I(delta) is evaluated outside [0, delta_bar]."""


class CertificateError(ValueError):
    """Raised when a best-response certificate fails stationarity."""


@dataclass(frozen=True)
class InconvenienceModel:
    """Convex piecewise-affine inconvenience over [0, delta_bar]."""
    gammas: Tuple[float, ...]
    chis: Tuple[float, ...]
    delta_bar: float

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        chis = tuple(float(c) for c in self.chis)
        object.__setattr__(self, 'gammas', gammas)
        object.__setattr__(self, 'chis', chis)
        object.__setattr__(self, 'delta_bar', float(self.delta_bar))

        if not gammas:
            raise ValueError("Inconvenience model needs at least one segment")
        if len(gammas) != len(chis):
            raise ValueError(f"Segment count mismatch: {len(gammas)} slopes, {len(chis)} intercepts")
        if not all(math.isfinite(v) for v in gammas + chis + (self.delta_bar,)):
            raise ValueError("Inconvenience parameters must be finite")
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise ValueError(f"Segment slopes must be strictly increasing, got {gammas}")
        if gammas[0] < 0:
            raise ValueError(f"Inconvenience must be nondecreasing, first slope is {gammas[0]}")
        if self.delta_bar < 0:
            raise ValueError(f"delta_bar must be >= 0, got {self.delta_bar}")

    @property
    def segments(self) -> List[Tuple[float, float]]:
        return list(zip(self.gammas, self.chis))

    @property
    def q_max(self) -> float:
        """Upper bound on useful incentive rates."""
        return 2.0 * max(self.gammas)

    def value(self, delta: float) -> float:
        return max(g * delta + c for g, c in zip(self.gammas, self.chis))

    def breakpoints(self) -> List[float]:
        """Kinks of the upper envelope strictly inside (0, delta_bar)."""
        kinks = []
        for a in range(len(self.gammas)):
            for b in range(a + 1, len(self.gammas)):
                point = (self.chis[a] - self.chis[b]) / (self.gammas[b] - self.gammas[a])
                if 0.0 < point < self.delta_bar:
                    level = self.gammas[a] * point + self.chis[a]
                    if abs(self.value(point) - level) <= 1e-12 * max(1.0, abs(level)):
                        kinks.append(point)
        return sorted(set(kinks))

    def to_dict(self) -> dict:
        return {'gamma': list(self.gammas), 'chi': list(self.chis), 'delta_bar': self.delta_bar}


@dataclass(frozen=True)
class BestResponse:
    """Optimistic optimal flexibility with its epigraph KKT multipliers."""
    delta_star: float
    value: float
    u: float
    sigma: float
    lambdas: Tuple[float, ...]

    def stationarity_residual(self, model: InconvenienceModel, q: float) -> float:
        lam = np.asarray(self.lambdas)
        r_epigraph = abs(lam.sum() - 1.0)
        r_delta = abs(float(lam @ np.asarray(model.gammas)) - q + self.u - self.sigma)
        return max(r_epigraph, r_delta)

    def complementarity_residual(self, model: InconvenienceModel) -> float:
        level = model.value(self.delta_star)
        products = [self.u * (model.delta_bar - self.delta_star), self.sigma * self.delta_star]
        for lam, (g, c) in zip(self.lambdas, model.segments):
            products.append(lam * (level - (g * self.delta_star + c)))
        return max(abs(p) for p in products)


def inconvenience(model: InconvenienceModel, delta: float) -> float:
    """Evaluate I(delta) on [0, delta_bar]."""
    tol = 1e-12 * max(1.0, model.delta_bar)
    if delta < -tol or delta > model.delta_bar + tol:
        raise DomainError(f"delta={delta} outside [0, {model.delta_bar}]")
    return model.value(delta)


def _candidates(model: InconvenienceModel) -> List[float]:
    points = {0.0, model.delta_bar}
    points.update(model.breakpoints())
    return sorted(points)


def response_interval(model: InconvenienceModel, q: float) -> Tuple[float, float]:
    """
    Smallest and largest minimizer of I(delta) - q * delta over [0, delta_bar].

    The objective is convex piecewise-affine, so its minimizer set is an
    interval whose endpoints are kinks or domain ends.
    """
    if not math.isfinite(q):
        raise ValueError(f"Incentive rate must be finite, got {q}")
    points = _candidates(model)
    values = [model.value(p) - q * p for p in points]
    best = min(values)
    tol = 1e-9 * max(max(abs(v) for v in values), 1e-12)
    optimal = [p for p, v in zip(points, values) if v <= best + tol]
    return min(optimal), max(optimal)


def best_response(model: InconvenienceModel, q: float) -> BestResponse:
    """
    Minimize I(delta) - q * delta over [0, delta_bar].

    The largest minimizer is returned; response_interval gives the whole set.
    """
    delta_star = response_interval(model, q)[1]

    u, sigma, lambdas = _certificate(model, q, delta_star)
    return BestResponse(
        delta_star=delta_star,
        value=model.value(delta_star) - q * delta_star,
        u=u,
        sigma=sigma,
        lambdas=lambdas,
    )


def _certificate(model: InconvenienceModel, q: float, delta: float) -> Tuple[float, float, Tuple[float, ...]]:
    """Build (u, sigma, lambda) from the segments active at delta."""
    level = model.value(delta)
    tol = 1e-9 * max(1.0, abs(level))
    active = [s for s, (g, c) in enumerate(model.segments) if level - (g * delta + c) <= tol]
    lo = min(active, key=lambda s: model.gammas[s])
    hi = max(active, key=lambda s: model.gammas[s])
    g_lo, g_hi = model.gammas[lo], model.gammas[hi]

    lambdas = [0.0] * len(model.gammas)
    u = sigma = 0.0
    if q > g_hi:
        lambdas[hi] = 1.0
        u = q - g_hi
    elif q < g_lo:
        lambdas[lo] = 1.0
        sigma = g_lo - q
    elif hi == lo:
        lambdas[lo] = 1.0
    else:
        weight = (q - g_lo) / (g_hi - g_lo)
        lambdas[hi] = weight
        lambdas[lo] = 1.0 - weight
    return u, sigma, tuple(lambdas)


def strong_duality_payment(model: InconvenienceModel, q: float, response: BestResponse) -> float:
    """Incentive payment q * delta* recovered from the dual side."""
    residual = response.stationarity_residual(model, q)
    if residual > CERTIFICATE_TOL:
        raise CertificateError(f"Stationarity residual {residual:.3e} exceeds {CERTIFICATE_TOL}")
    dual_intercepts = sum(lam * c for lam, c in zip(response.lambdas, model.chis))
    return model.value(response.delta_star) + response.u * model.delta_bar - dual_intercepts


def dual_value(model: InconvenienceModel, response: BestResponse) -> float:
    """Dual objective sum(lambda_s * chi_s) - u * delta_bar."""
    return sum(lam * c for lam, c in zip(response.lambdas, model.chis)) - response.u * model.delta_bar


def distinct_responses(model: InconvenienceModel,
                       q_values: Sequence[float]) -> List[Tuple[float, Tuple[float, float]]]:
    """
    Reduce a set of incentive rates to (smallest q, minimizer interval) per
    distinct interval.

    For a fixed set of optimal responses the payment q * delta grows with q,
    so only the smallest rate eliciting each set matters to the operator.
    """
    if len(q_values) == 0:
        raise ValueError("q_values must not be empty")
    smallest = {}
    for q in sorted(q_values):
        interval = response_interval(model, q)
        if interval not in smallest:
            smallest[interval] = q
    return sorted((q, interval) for interval, q in smallest.items())
