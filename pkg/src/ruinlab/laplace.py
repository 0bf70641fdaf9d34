"""Survival-probability Laplace transforms and their regularized inversion.

The regularized inverse of a transform ``g`` is

    (L_m^{-1} g)(t) = pi^{-2} int_0^inf int_0^inf Psi_m(y) y^{-1/2} exp(-t v y) g(v) dv dy,
    Psi_m(y)        = int_0^{a_m} cosh(pi x) cos(x log y) dx,   a_m = arccosh(pi m) / pi.

Numerically both integrals are taken by the trapezoid rule in logarithmic
coordinates ``v = exp(w)``, ``y = exp(q) / t`` on a common step.  With

    H(q) = exp(q/2) int_0^inf exp(-exp(q) v) g(v) dv
         = int exp(-exp(q + w) + (q + w)/2) * exp(w/2) g(exp(w)) dw

the inverse becomes ``pi^{-2} t^{-1/2} int Psi_m(exp(q)/t) H(q) dq``.  The
inner sum is a discrete correlation, tabulated once per transform; each
abscissa then costs one sum over the ``q`` nodes.  All integrands are smooth
and decay exponentially in the log variables, so the rule converges
geometrically in the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DomainError, EstimateDegenerateError, EvaluationError, GridError, NetProfitError
from .process import ModelParams
from .threshold import EstimateSet

__all__ = [
    "TransformFn",
    "QuadratureConfig",
    "InversionConfig",
    "SurvivalCurve",
    "RegularizedInverse",
    "DEFAULT_THETA",
    "true_transform",
    "plugin_transform",
    "shift_theta",
    "a_m",
    "psi_m",
    "regularized_inverse",
    "choose_m",
    "survival_estimate",
    "ise",
    "default_grid",
    "grid_norm",
    "survival_ladder",
    "DEFAULT_B",
    "DEFAULT_GRID_POINTS",
]

DEFAULT_THETA = 0.1
DEFAULT_B = 5.0
DEFAULT_GRID_POINTS = 200


@dataclass(frozen=True)
class TransformFn:
    func: Callable
    provenance: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __call__(self, s):
        return self.func(s)


class _SurvivalTransform:
    """``s -> (1 - rho) / (s + sigma2 s^2 / (2c) - (lam - lam_lf(s)) / c)``."""

    def __init__(self, rho, sigma2, lam, c, lam_lf, check):
        self.rho, self.sigma2, self.lam, self.c = rho, sigma2, lam, c
        self.lam_lf = lam_lf
        self.check = check

    def denominator(self, s):
        s = np.asarray(s, dtype=float)
        return s + self.sigma2 * s * s / (2.0 * self.c) - (self.lam - self.lam_lf(s)) / self.c

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        den = self.denominator(s)
        if self.check:
            bad = ~(den > 0)
            if np.any(bad):
                where = float(np.atleast_1d(s)[np.atleast_1d(bad)][0])
                raise EvaluationError(f"transform denominator is not positive at s={where}", where)
        out = (1.0 - self.rho) / den
        return out if out.ndim else float(out)


def true_transform(params: ModelParams) -> TransformFn:
    params.check_net_profit()
    lam, claim = params.lam, params.claim
    f = _SurvivalTransform(params.rho, params.sigma**2, lam, params.c, lambda s: lam * claim.stieltjes(s), check=False)
    snap = {"lambda": lam, "sigma2": params.sigma**2, "c": params.c, "rho": params.rho, "claim": claim}
    return TransformFn(f, "true-model", snap)


def plugin_transform(est: EstimateSet, c: float) -> TransformFn:
    if not c > 0:
        raise NetProfitError("premium c must be positive")
    if est.rho_hat >= 1.0:
        raise EstimateDegenerateError(f"estimated loading ratio rho={est.rho_hat} >= 1")
    f = _SurvivalTransform(est.rho_hat, est.sigma2_hat, est.lambda_hat, c, est.lambda_lf_hat, check=True)
    snap = {"lambda": est.lambda_hat, "sigma2": est.sigma2_hat, "c": c, "rho": est.rho_hat, "n_flagged": est.n_flagged}
    return TransformFn(f, "plug-in", snap)


def shift_theta(g: TransformFn, theta: float) -> TransformFn:
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    inner = g.func
    # flatten repeated shifts so they compose additively
    total = theta
    if isinstance(inner, _Shifted):
        total, inner = inner.theta + theta, inner.inner
    snap = dict(g.params)
    snap["theta"] = total
    return TransformFn(_Shifted(inner, total), g.provenance, snap)


class _Shifted:
    def __init__(self, inner, theta):
        self.inner, self.theta = inner, theta

    def __call__(self, s):
        return self.inner(np.asarray(s, dtype=float) + self.theta)


def a_m(m: float) -> float:
    if not m >= 1.0 / math.pi:
        raise DomainError(f"m must be at least 1/pi, got {m}")
    return math.acosh(math.pi * m) / math.pi


def _psi_log(b, a):
    """Psi as a function of ``b = log y``."""
    b = np.asarray(b, dtype=float)
    pa = math.pi * a
    return (math.pi * math.sinh(pa) * np.cos(b * a) + b * math.cosh(pa) * np.sin(b * a)) / (math.pi**2 + b * b)


def psi_m(y, m: float):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("psi_m needs y > 0")
    out = _psi_log(np.log(y), a_m(m))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class QuadratureConfig:
    """Log-coordinate trapezoid rule.

    ``step`` is the node spacing in natural-log units for both ``v`` and
    ``y``; it is reduced to ``ln(10) / (nodes_per_decade_factor * a_m)`` for
    large ``m``.  Nodes span ``[log_min, log_max]`` in both variables, where
    the integrands are below ~1e-12 of their peak for transforms bounded near
    0 and decaying at least like ``1/v`` at infinity.
    """

    step: float = 0.05
    log_min: float = -60.0
    log_max: float = 60.0
    nodes_per_decade_factor: float = 50.0

    def step_for(self, a: float) -> float:
        return min(self.step, math.log(10.0) / (self.nodes_per_decade_factor * max(a, 1e-12)))


@dataclass(frozen=True)
class InversionConfig:
    m: float
    theta: float = DEFAULT_THETA
    quadrature: QuadratureConfig = QuadratureConfig()

    def __post_init__(self):
        if not self.m > 1.0 / math.pi:
            raise DomainError(f"m must exceed 1/pi, got {self.m}")
        if not self.theta > 0:
            raise DomainError(f"theta must be positive, got {self.theta}")


class RegularizedInverse:
    """``t -> (L_m^{-1} g)(t)``, with the inner transform tabulated once."""

    def __init__(self, g: Callable, m: float, quadrature: QuadratureConfig = QuadratureConfig()):
        self.m = m
        self.a = a_m(m)
        h = quadrature.step_for(self.a)
        self.step = h
        w = np.arange(quadrature.log_min, quadrature.log_max + 0.5 * h, h)
        v = np.exp(w)
        gv = np.asarray(g(v), dtype=float)
        if gv.shape != v.shape:
            gv = np.broadcast_to(gv, v.shape).astype(float)
        bad = ~np.isfinite(gv)
        if np.any(bad):
            at = float(v[bad][0])
            raise EvaluationError(f"transform is not finite at v={at}", at)
        g_tilde = np.exp(w / 2.0) * gv
        # H(q_i) = h * sum_j k(q_i + w_j) g_tilde_j with q on the same nodes as w
        z = 2.0 * w[0] + h * np.arange(2 * w.size - 1)
        kern = np.exp(z / 2.0 - np.exp(np.minimum(z, 700.0)))
        self.q = w
        self.H = h * np.convolve(kern, g_tilde[::-1])[w.size - 1 : 2 * w.size - 1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise DomainError("the regularized inverse is evaluated at t > 0 only")
        flat = t.ravel()
        out = np.empty(flat.size)
        chunk = max(1, 2_000_000 // self.q.size)
        for lo in range(0, flat.size, chunk):
            tt = flat[lo : lo + chunk]
            psi = _psi_log(self.q[None, :] - np.log(tt)[:, None], self.a)
            out[lo : lo + chunk] = self.step * (psi @ self.H) / (math.pi**2 * np.sqrt(tt))
        out = out.reshape(t.shape)
        return out if out.ndim else float(out)


def regularized_inverse(g: Callable, cfg: InversionConfig) -> RegularizedInverse:
    return RegularizedInverse(g, cfg.m, cfg.quadrature)


def choose_m(T_n: float) -> float:
    """``sqrt(T_n / log T_n)``; needs ``T_n > e``."""
    if not T_n > math.e:
        raise DomainError(f"T_n={T_n} is too short for choose_m (need T_n > e); use a longer horizon")
    return math.sqrt(T_n / math.log(T_n))


def default_grid(B: float = DEFAULT_B, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """``B * i / points`` for ``i = 1..points`` (the inverse is not defined at 0)."""
    if not B > 0 or points < 1:
        raise GridError("need B > 0 and at least one grid point")
    return B * np.arange(1, points + 1) / points


def ise(f, ref, grid) -> float:
    """Trapezoid approximation of ``int_0^B |f - ref|^2`` on ``grid`` (``B = grid[-1]``).

    ``f`` and ``ref`` are arrays on ``grid`` or callables.  When the grid
    starts right of 0 the first value is held constant on ``[0, grid[0]]``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise GridError("grid must be increasing, non-negative, with at least two points")
    fv = np.asarray(f(grid) if callable(f) else f, dtype=float)
    rv = np.asarray(ref(grid) if callable(ref) else ref, dtype=float)
    if fv.shape != grid.shape or rv.shape != grid.shape:
        raise GridError("f and ref must be sampled on the common grid")
    d2 = (fv - rv) ** 2
    return float(np.trapezoid(d2, grid) + d2[0] * grid[0])


def grid_norm(f: Callable, log_min: float = -40.0, log_max: float = 40.0, step: float = 0.02) -> float:
    """L2(0, inf) norm of ``f`` by the trapezoid rule in ``log t``, truncated to the range."""
    r = np.arange(log_min, log_max + 0.5 * step, step)
    t = np.exp(r)
    vals = np.asarray(f(t), dtype=float)
    return float(math.sqrt(step * np.sum(t * vals * vals)))


@dataclass(frozen=True)
class SurvivalCurve:
    x: np.ndarray
    values: np.ndarray
    m: float
    theta: float
    reference: Optional[np.ndarray] = None
    ise: Optional[float] = None

    def with_reference(self, ref) -> "SurvivalCurve":
        rv = np.asarray(ref(self.x) if callable(ref) else ref, dtype=float)
        return replace(self, reference=rv, ise=ise(self.values, rv, self.x))


def survival_estimate(
    est: EstimateSet,
    c: float,
    theta: float = DEFAULT_THETA,
    x_grid=None,
    m: Optional[float] = None,
    quadrature: QuadratureConfig = QuadratureConfig(),
    transform: Optional[TransformFn] = None,
) -> SurvivalCurve:
    """``Phi(x) ~ exp(theta x) * (L_m^{-1} [s -> L(s + theta)])(x)``.

    ``m`` defaults to ``choose_m(est.T_n)``.  ``transform`` replaces the
    plug-in transform of ``est`` (e.g. by :func:`true_transform`).
    """
    x = default_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if m is None:
        m = choose_m(est.T_n)
    cfg = InversionConfig(m=m, theta=theta, quadrature=quadrature)
    g = shift_theta(transform if transform is not None else plugin_transform(est, c), theta)
    inv = regularized_inverse(g, cfg)
    vals = np.exp(theta * x) * inv(x)
    return SurvivalCurve(x=x, values=vals, m=float(m), theta=float(theta))


def survival_ladder(g: TransformFn, theta: float, x, ms, quadrature: QuadratureConfig = QuadratureConfig()):
    """Curves for several ``m`` from one shifted transform."""
    gs = shift_theta(g, theta)
    return [SurvivalCurve(x=x, values=np.exp(theta * x) * RegularizedInverse(gs, m, quadrature)(x), m=float(m), theta=float(theta)) for m in ms]
