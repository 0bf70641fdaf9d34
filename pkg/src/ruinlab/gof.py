"""Cramer-von Mises and Kolmogorov-Smirnov tests for the recovered claim law.

The sample is the set of flagged increment magnitudes; ``N`` is their count.
P-values come from the Brownian-bridge limits (no finite-sample corrections).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special

from .claims import ClaimDistribution
from .errors import DegenerateInputError, ParameterError
from .threshold import EstimateSet

__all__ = ["GofResult", "gof_statistics", "ks_pvalue", "w2_pvalue"]

_TERM_TOL = 1e-10


@dataclass(frozen=True)
class GofResult:
    N: int
    W2: float
    D: float
    p_KS: float
    p_W2: float
    null_spec: object

    def summary(self) -> str:
        return f"{self.N},{self.W2:.15g},{self.p_W2:.15g},{self.D:.15g},{self.p_KS:.15g}"


def gof_statistics(
    sample: Union[EstimateSet, np.ndarray, list],
    F0: Union[ClaimDistribution, Callable],
) -> GofResult:
    if isinstance(sample, EstimateSet):
        if sample.proxies is None:
            raise DegenerateInputError("estimate set carries no flagged proxies")
        x = np.asarray(sample.proxies, dtype=float)
    else:
        x = np.asarray(sample, dtype=float)
    N = int(x.size)
    if N == 0:
        raise DegenerateInputError("no flagged proxies; nothing to test")
    if isinstance(F0, ClaimDistribution):
        if not F0.continuous:
            raise ParameterError("the null distribution must be continuous")
        cdf = F0.cdf
    else:
        cdf = F0
    u = np.asarray(cdf(np.sort(x)), dtype=float)
    i = np.arange(1, N + 1)
    W2 = 1.0 / (12.0 * N) + float(np.sum((u - (2 * i - 1) / (2.0 * N)) ** 2))
    D = float(np.max(np.maximum(i / N - u, u - (i - 1) / N)))
    return GofResult(N=N, W2=W2, D=D, p_KS=ks_pvalue(D, N), p_W2=w2_pvalue(W2), null_spec=F0)


def ks_pvalue(d: float, N: int) -> float:
    """Kolmogorov limit ``P(sup|B| > sqrt(N) d) = 2 sum (-1)^{k-1} exp(-2 k^2 z^2)``."""
    if d < 0:
        raise ValueError("d must be non-negative")
    z2 = N * d * d
    if z2 == 0.0:
        return 1.0
    total, k = 0.0, 1
    while True:
        term = 2.0 * math.exp(-2.0 * k * k * z2)
        total += term if k % 2 else -term
        if term < _TERM_TOL:
            break
        k += 1
        if k > 100_000:
            break
    return min(1.0, max(0.0, total))


def w2_pvalue(w2: float) -> float:
    """Upper tail of the limiting omega^2 law.

    Uses the Anderson-Darling series for the CDF

        P(W^2 <= x) = 1/(pi sqrt x) sum_j  Gamma(j+1/2) / (Gamma(1/2) j!) sqrt(4j+1)
                      exp(-(4j+1)^2 / (16x)) K_{1/4}((4j+1)^2 / (16x)).
    """
    if w2 < 0:
        raise ValueError("w2 must be non-negative")
    if w2 == 0.0:
        return 1.0
    total, j = 0.0, 0
    log_coef = 0.0  # log(Gamma(j+1/2) / (Gamma(1/2) j!))
    while True:
        arg = (4 * j + 1) ** 2 / (16.0 * w2)
        # kve(v, z) = kv(v, z) * exp(z)  ->  exp(-z) kv = kve * exp(-2z)
        term = math.exp(log_coef - 2.0 * arg) * math.sqrt(4 * j + 1) * special.kve(0.25, arg)
        total += term
        if term < _TERM_TOL * math.pi * math.sqrt(w2) or j > 1000:
            break
        j += 1
        log_coef += math.log((j - 0.5) / j)
    cdf = total / (math.pi * math.sqrt(w2))
    return min(1.0, max(0.0, 1.0 - cdf))
