"""Jump-discriminant threshold filter and the estimators built on it.

An increment ``Delta_i X`` is attributed to a jump when ``|Delta_i X|``
exceeds ``theta(h) = L * h**omega``; flagged magnitudes serve as proxies for
the unobserved claim sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DegenerateInputError, SpecError
from .process import DiscreteRecord, ModelParams

__all__ = [
    "ThresholdSpec",
    "EstimateSet",
    "IDENTITY",
    "EXPONENTIAL",
    "threshold_value",
    "classify_increments",
    "estimate_sigma2",
    "estimate_lambda",
    "truncate",
    "estimate_rho",
    "estimate_lf",
    "estimate_lambda_lf",
    "estimate_claim_cdf",
    "cdf_confidence_band",
    "estimate",
    "assemble_estimates",
    "robust_increment_scale",
    "default_kappa",
]

IDENTITY = "identity"
EXPONENTIAL = "exp"

DEFAULT_OMEGA = 0.3
DEFAULT_SD_MULTIPLE = 4.0
DEFAULT_E = (0.5, 5.0)


def default_kappa(h: float, s_max: float = DEFAULT_E[1]) -> float:
    """``2 * max(1, s_max) * h**(-1/8)``.

    The ``h**(-1/8)`` rate keeps ``kappa**2 * h**(1/2 - delta) -> 0``; the
    prefactor keeps the cap above the derivative bound ``s_max`` of the
    exponential moment, so truncation only bites far in the tail.
    """
    return 2.0 * max(1.0, s_max) * h ** (-0.125)


@dataclass(frozen=True)
class ThresholdSpec:
    L: float
    omega: float = DEFAULT_OMEGA
    kappa: Optional[float] = None
    s_min: float = DEFAULT_E[0]
    s_max: float = DEFAULT_E[1]

    def __post_init__(self):
        if not 0.0 < self.omega < 0.5:
            raise SpecError(f"omega must lie in (0, 1/2), got {self.omega}")
        if not self.L > 0:
            raise SpecError(f"L must be positive, got {self.L}")
        if self.kappa is not None and not self.kappa > 0:
            raise SpecError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 < self.s_min <= self.s_max:
            raise SpecError(f"evaluation set needs 0 < s_min <= s_max, got [{self.s_min}, {self.s_max}]")

    def kappa_for(self, h: float) -> float:
        return self.kappa if self.kappa is not None else default_kappa(h, self.s_max)

    @classmethod
    def calibrate(
        cls,
        record: DiscreteRecord,
        omega: float = DEFAULT_OMEGA,
        sd_multiple: float = DEFAULT_SD_MULTIPLE,
        kappa: Optional[float] = None,
        E: tuple[float, float] = DEFAULT_E,
    ) -> "ThresholdSpec":
        """Choose ``L`` so that the threshold sits ``sd_multiple`` Brownian
        standard deviations out at the record's step."""
        scale = robust_increment_scale(record)
        if scale == 0.0:
            # pure drift plus jumps: any positive level below the jumps works
            scale = float(np.median(np.abs(record.increments))) or 1.0
        L = sd_multiple * scale / record.h**omega
        return cls(L=L, omega=omega, kappa=kappa, s_min=E[0], s_max=E[1])


def robust_increment_scale(record: DiscreteRecord) -> float:
    """Normal-consistent MAD of the increments; insensitive to the rare jump cells."""
    inc = record.increments
    return float(1.482602218505602 * np.median(np.abs(inc - np.median(inc))))


def threshold_value(h: float, spec: ThresholdSpec) -> float:
    if not h > 0:
        raise SpecError("h must be positive")
    if not 0.0 < spec.omega < 0.5:
        raise SpecError(f"omega must lie in (0, 1/2), got {spec.omega}")
    return spec.L * h**spec.omega


def classify_increments(record: DiscreteRecord, spec: ThresholdSpec) -> np.ndarray:
    """Boolean flags, ``True`` where ``|Delta_i X| > theta(h)`` (ties unflagged)."""
    return np.abs(record.increments) > threshold_value(record.h, spec)


def estimate_sigma2(record: DiscreteRecord, spec: ThresholdSpec, c: float) -> float:
    keep = ~classify_increments(record, spec)
    m = int(keep.sum())
    if m == 0:
        raise DegenerateInputError("every interval is flagged; sigma^2 cannot be estimated")
    resid = record.increments[keep] - c * record.h
    return float(np.dot(resid, resid) / (record.h * m))


def estimate_lambda(record: DiscreteRecord, spec: ThresholdSpec) -> float:
    return int(classify_increments(record, spec).sum()) / record.T_n


def truncate(M: str, x, spec: ThresholdSpec, s: float = 0.0, kappa: Optional[float] = None, h: Optional[float] = None):
    """Truncated moment function ``phi_n o M_s``.

    Returns ``M_s(x)`` where the function value and the sup over the
    evaluation set of its ``s`` and ``x`` partial derivatives (in absolute
    value) are all at most ``kappa``, and 0 elsewhere.  ``kappa`` defaults to
    ``spec.kappa_for(h)``.
    """
    if kappa is None:
        if spec.kappa is None and h is None:
            raise SpecError("kappa is automatic; pass the record step h")
        kappa = spec.kappa_for(h)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("truncate is defined for x >= 0")
    if M == IDENTITY:
        value = x
        bound = np.maximum(x, 1.0)
    elif M == EXPONENTIAL:
        value = np.exp(-s * x)
        decay = np.exp(-spec.s_min * x)
        bound = np.maximum(np.maximum(value, x * decay), spec.s_max * decay)
    else:
        raise ValueError(f"unknown moment function {M!r}")
    out = np.where(bound <= kappa, value, 0.0)
    return out if out.ndim else float(out)


def _flagged_proxies(record: DiscreteRecord, spec: ThresholdSpec) -> np.ndarray:
    return np.abs(record.increments[classify_increments(record, spec)])


def estimate_rho(record: DiscreteRecord, spec: ThresholdSpec, c: float) -> float:
    if not c > 0:
        raise ValueError("premium c must be positive")
    prox = _flagged_proxies(record, spec)
    return float(np.sum(truncate(IDENTITY, prox, spec, h=record.h)) / (c * record.T_n))


def estimate_lf(record: DiscreteRecord, spec: ThresholdSpec, s):
    prox = _flagged_proxies(record, spec)
    if prox.size == 0:
        raise DegenerateInputError("no flagged intervals; l_F is undefined")
    return _lf_from_proxies(prox, s)


def estimate_lambda_lf(record: DiscreteRecord, spec: ThresholdSpec, s):
    prox = _flagged_proxies(record, spec)
    return _lambda_lf_from_proxies(prox, spec, spec.kappa_for(record.h), record.T_n, s)


def estimate_claim_cdf(record: DiscreteRecord, spec: ThresholdSpec, u):
    prox = _flagged_proxies(record, spec)
    if prox.size == 0:
        raise DegenerateInputError("no flagged intervals; the claim CDF is undefined")
    return _ecdf(np.sort(prox), u)


def _lf_from_proxies(prox, s):
    s = np.asarray(s, dtype=float)
    out = np.exp(-np.multiply.outer(s, prox)).mean(axis=-1)
    return out if out.ndim else float(out)


def _lambda_lf_from_proxies(prox, spec, kappa, T_n, s):
    s = np.asarray(s, dtype=float)
    if prox.size == 0:
        return np.zeros_like(s) if s.ndim else 0.0
    decay = np.exp(-spec.s_min * prox)
    deriv_bound = np.maximum(prox * decay, spec.s_max * decay)
    flat = s.ravel()
    out = np.empty(flat.size)
    chunk = max(1, 1_000_000 // prox.size)
    for lo in range(0, flat.size, chunk):
        value = np.exp(-np.multiply.outer(flat[lo : lo + chunk], prox))
        keep = np.maximum(value, deriv_bound) <= kappa
        out[lo : lo + chunk] = np.where(keep, value, 0.0).sum(axis=1)
    out = out.reshape(s.shape) / T_n
    return out if out.ndim else float(out)


def _ecdf(sorted_prox, u):
    u = np.asarray(u, dtype=float)
    out = np.searchsorted(sorted_prox, u, side="right") / sorted_prox.size
    return out if out.ndim else float(out)


def _undefined(name, *_):
    raise DegenerateInputError(f"no flagged intervals; {name} is undefined")


@dataclass(frozen=True)
class EstimateSet:
    """Output of the threshold estimators for one record.

    ``lf_hat``, ``lambda_lf_hat`` and ``cdf_hat`` are callables (vectorised
    over their argument).  ``proxies`` holds the sorted flagged magnitudes;
    it is ``None`` for sets built from a known model.
    """

    sigma2_hat: float
    lambda_hat: float
    rho_hat: float
    n_flagged: int
    T_n: float
    n: int
    h_n: float
    lf_hat: Callable
    lambda_lf_hat: Callable
    cdf_hat: Callable
    proxies: Optional[np.ndarray] = None
    threshold: Optional[float] = None
    kappa: Optional[float] = None

    @classmethod
    def from_model(cls, params: ModelParams, T_n: float = math.inf, n: int = 0, h_n: float = 0.0) -> "EstimateSet":
        """An estimate set carrying the true quantities of ``params``."""
        claim = params.claim
        lam = params.lam
        return cls(
            sigma2_hat=params.sigma**2,
            lambda_hat=lam,
            rho_hat=params.rho,
            n_flagged=0,
            T_n=T_n,
            n=n,
            h_n=h_n,
            lf_hat=claim.stieltjes,
            lambda_lf_hat=partial(_scaled, lam, claim.stieltjes),
            cdf_hat=claim.cdf,
        )


def _scaled(factor, fn, s):
    return factor * fn(s)


def estimate(record: DiscreteRecord, spec: ThresholdSpec, c: float) -> EstimateSet:
    """Run every estimator on ``record``.

    With no flagged interval ``lambda_hat`` and ``rho_hat`` are 0 and the
    ratio estimators (``lf_hat``, ``cdf_hat``) raise when called.
    """
    flags = classify_increments(record, spec)
    return assemble_estimates(
        proxies=np.abs(record.increments[flags]),
        sigma2_hat=estimate_sigma2(record, spec, c),
        record_shape=(record.n, record.h),
        spec=spec,
        c=c,
    )


def assemble_estimates(proxies, sigma2_hat: float, record_shape: tuple[int, float], spec: ThresholdSpec, c: float) -> EstimateSet:
    """Build an :class:`EstimateSet` from flagged magnitudes and ``(n, h)``."""
    if not c > 0:
        raise ValueError("premium c must be positive")
    n, h = record_shape
    T_n = n * h
    prox = np.sort(np.asarray(proxies, dtype=float))
    prox.setflags(write=False)
    kappa = spec.kappa_for(h)
    N = int(prox.size)
    if N:
        lf = partial(_lf_from_proxies, prox)
        cdf = partial(_ecdf, prox)
    else:
        lf = partial(_undefined, "l_F")
        cdf = partial(_undefined, "the claim CDF")
    return EstimateSet(
        sigma2_hat=float(sigma2_hat),
        lambda_hat=N / T_n,
        rho_hat=float(np.sum(truncate(IDENTITY, prox, spec, kappa=kappa)) / (c * T_n)),
        n_flagged=N,
        T_n=T_n,
        n=int(n),
        h_n=float(h),
        lf_hat=lf,
        lambda_lf_hat=partial(_lambda_lf_from_proxies, prox, spec, kappa, T_n),
        cdf_hat=cdf,
        proxies=prox,
        threshold=threshold_value(h, spec),
        kappa=kappa,
    )


def cdf_confidence_band(est: EstimateSet, u, level: float = 0.95):
    """Pointwise normal band ``F_hat +- z * sqrt(F_hat (1 - F_hat) / (lambda_hat T_n))``."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if est.lambda_hat <= 0:
        raise DegenerateInputError("lambda_hat is 0; no band can be formed")
    f = np.asarray(est.cdf_hat(u), dtype=float)
    z = stats.norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(f * (1.0 - f) / (est.lambda_hat * est.T_n))
    lo, hi = np.clip(f - half, 0.0, 1.0), np.clip(f + half, 0.0, 1.0)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi
