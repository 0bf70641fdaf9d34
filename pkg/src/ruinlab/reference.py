"""Exact survival probability for models with a rational Laplace transform.

When ``l_F`` is rational (no claims, exponential claims, Gamma claims with
integer shape), ``L_Phi(s) = (1 - rho) Q(s) / R(s)`` with polynomials
``Q, R`` and ``Phi`` is the sum of residues ``(1 - rho) Q(r) / R'(r) e^{r x}``
over the (simple) roots of ``R``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P

from .claims import Exponential, Gamma
from .errors import ParameterError
from .process import ModelParams

__all__ = ["rational_survival", "has_rational_transform"]


def _claim_polynomials(params: ModelParams):
    """Coefficients (ascending) of ``Q`` with ``l_F = 1 / Q``."""
    claim = params.claim
    if params.lam == 0:
        return np.array([1.0])
    if isinstance(claim, Exponential):
        return np.array([1.0, claim.mean_size])
    if isinstance(claim, Gamma) and float(claim.shape).is_integer():
        return P.polypow([1.0, claim.scale], int(claim.shape))
    return None


def has_rational_transform(params: ModelParams) -> bool:
    return _claim_polynomials(params) is not None


class _ResidueSum:
    def __init__(self, roots, weights):
        self.roots, self.weights = roots, weights

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.real(np.exp(np.multiply.outer(x, self.roots)) @ self.weights)
        return out if out.ndim else float(out)


def rational_survival(params: ModelParams):
    """Return ``x -> Phi(x)`` (vectorised) for a rational-transform model."""
    params.check_net_profit()
    Q = _claim_polynomials(params)
    if Q is None:
        raise ParameterError(f"no rational transform for claim kind {params.claim.kind!r}")
    c, lam = params.c, params.lam
    # s * D(s) * Q(s) with D(s) = s + sigma^2 s^2 / (2c) - (lam / c)(1 - 1/Q(s))
    quad = np.array([0.0, 1.0, params.sigma**2 / (2.0 * c)])
    R = P.polysub(P.polymul(quad, Q), (lam / c) * P.polysub(Q, [1.0]))
    R = P.polytrim(R, tol=0.0)
    roots = P.polyroots(R)
    roots[np.abs(roots) < 1e-13] = 0.0
    if roots.size > 1:
        gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(roots.size)
        if np.min(gaps) < 1e-8:
            raise ParameterError("repeated roots; residue formula does not apply")
    dR = P.polyder(R)
    weights = (1.0 - params.rho) * P.polyval(roots, Q) / P.polyval(roots, dR)
    if np.any(np.real(roots) > 1e-10):
        raise ParameterError("transform has a pole in the right half-plane")
    return _ResidueSum(roots.astype(complex), weights.astype(complex))
