"""Zeroth-order gradient estimators built from function-value queries.

The core estimator is the two-point random-direction scheme; coordinate-wise
forward differences and a multi-direction Gaussian scheme are provided as
baselines. All estimators query an oracle object exposing

- ``sample_xi(rng)``: draw one noise sample,
- ``value(x, xi)``: the noisy function value F(x, xi),

and, for diagnostics only, optionally ``grad_value(x, xi)`` (gradient of the
noisy value), ``true_gradient(x)`` and a smoothness constant ``ell``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class StochasticOracle(Protocol):
    def sample_xi(self, rng: np.random.Generator) -> Any: ...

    def value(self, x: np.ndarray, xi: Any) -> float: ...


def sample_unit_sphere(p: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the unit sphere in R^p (normalized Gaussian)."""
    if p < 1:
        raise ValueError(f"dimension must be positive, got p={p}")
    while True:
        draw = rng.standard_normal(p)
        norm = math.sqrt(float(draw @ draw))
        if norm > 0.0:
            return draw / norm


def two_point(
    oracle: StochasticOracle, x: np.ndarray, mu: float, zeta: np.ndarray, xi: Any
) -> np.ndarray:
    """Two-point estimator p (F(x + mu zeta, xi) - F(x, xi)) / mu * zeta.

    Exactly two oracle value calls; the output is parallel to ``zeta``.
    """
    if mu <= 0.0:
        raise ValueError(f"exploration radius must be positive, got mu={mu}")
    p = x.shape[0]
    forward = oracle.value(x + mu * zeta, xi)
    base = oracle.value(x, xi)
    return (p * (forward - base) / mu) * zeta


def coordinate_wise(oracle: StochasticOracle, x: np.ndarray, mu: float, xi: Any) -> np.ndarray:
    """Forward differences along every coordinate axis; p + 1 value calls."""
    if mu <= 0.0:
        raise ValueError(f"exploration radius must be positive, got mu={mu}")
    p = x.shape[0]
    base = oracle.value(x, xi)
    g = np.empty(p)
    probe = x.astype(float, copy=True)
    for j in range(p):
        probe[j] = x[j] + mu
        g[j] = (oracle.value(probe, xi) - base) / mu
        probe[j] = x[j]
    return g


def gaussian_multi(
    oracle: StochasticOracle,
    x: np.ndarray,
    mu: float,
    m: int,
    xi: Any,
    rng: np.random.Generator,
    normalize: bool = True,
) -> np.ndarray:
    """Multi-direction estimator with standard-normal directions.

    Sums (F(x + mu z_j, xi) - F(x, xi)) / mu * z_j over m directions, with
    the base value computed once (m + 1 value calls). With ``normalize``
    (the default) the sum is divided by m; the literal unnormalized sum is
    kept behind the flag.
    """
    if mu <= 0.0:
        raise ValueError(f"exploration radius must be positive, got mu={mu}")
    if m < 1:
        raise ValueError(f"need at least one direction, got m={m}")
    p = x.shape[0]
    base = oracle.value(x, xi)
    g = np.zeros(p)
    for _ in range(m):
        z = rng.standard_normal(p)
        g += ((oracle.value(x + mu * z, xi) - base) / mu) * z
    if normalize:
        g /= m
    return g


@dataclass(frozen=True)
class VarianceProbe:
    """Monte-Carlo second moment of the two-point estimator vs its bound."""

    mean: float
    se: float
    bound: float


def variance_probe(
    oracle: Any,
    x: np.ndarray,
    mu: float,
    trials: int,
    rng: np.random.Generator,
    xi: Any | None = None,
) -> VarianceProbe:
    """Estimate E_zeta ‖g‖² at fixed noise sample and compare to the bound.

    The bound is 2p‖∇F(x, xi)‖² + p² mu² ell² / 2, which requires the oracle
    to expose ``grad_value`` and ``ell``. When ``xi`` is omitted one sample
    is drawn from the oracle.
    """
    if trials < 2:
        raise ValueError(f"need at least two trials for a standard error, got {trials}")
    p = x.shape[0]
    if xi is None:
        xi = oracle.sample_xi(rng)
    sq = np.empty(trials)
    for t in range(trials):
        zeta = sample_unit_sphere(p, rng)
        g = two_point(oracle, x, mu, zeta, xi)
        sq[t] = float(g @ g)
    grad = oracle.grad_value(x, xi)
    ell = float(oracle.ell)
    bound = 2.0 * p * float(grad @ grad) + 0.5 * p * p * mu * mu * ell * ell
    return VarianceProbe(
        mean=float(np.mean(sq)),
        se=float(np.std(sq, ddof=1) / np.sqrt(trials)),
        bound=bound,
    )
