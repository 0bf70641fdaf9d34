"""Claim-size distributions.

Each distribution exposes its CDF, closed-form moments, the Stieltjes
transform ``l_F(s) = E[exp(-s * gamma)]`` and a sampler.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import integrate, special

from .errors import ParameterError

__all__ = [
    "ClaimDistribution",
    "Exponential",
    "Gamma",
    "Pareto",
    "Degenerate",
    "claim_mean",
    "claim_from_mapping",
]


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


class ClaimDistribution(ABC):
    kind: str = ""
    continuous: bool = True

    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def second_moment(self) -> float: ...

    @abstractmethod
    def cdf(self, u): ...

    @abstractmethod
    def stieltjes(self, s): ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    def to_mapping(self) -> dict[str, float | str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ClaimDistribution):
    mean_size: float
    kind = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "mean_size", _positive("mean", self.mean_size))

    def mean(self):
        return self.mean_size

    def second_moment(self):
        return 2.0 * self.mean_size**2

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0, -np.expm1(-np.maximum(u, 0.0) / self.mean_size), 0.0)

    def stieltjes(self, s):
        return 1.0 / (1.0 + self.mean_size * np.asarray(s, dtype=float))

    def sample(self, rng, size):
        return rng.exponential(self.mean_size, size)

    def to_mapping(self):
        return {"kind": self.kind, "mean": self.mean_size}


@dataclass(frozen=True)
class Gamma(ClaimDistribution):
    shape: float
    scale: float
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def mean(self):
        return self.shape * self.scale

    def second_moment(self):
        return self.shape * (self.shape + 1.0) * self.scale**2

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        return special.gammainc(self.shape, np.maximum(u, 0.0) / self.scale)

    def stieltjes(self, s):
        return (1.0 + self.scale * np.asarray(s, dtype=float)) ** (-self.shape)

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    def to_mapping(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Pareto(ClaimDistribution):
    """Classical Pareto law on ``[scale, inf)``; shape must exceed 2."""

    shape: float
    scale: float
    kind = "pareto"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))
        if self.shape <= 2.0:
            raise ParameterError("Pareto shape must exceed 2 (finite second moment)")

    def mean(self):
        return self.shape * self.scale / (self.shape - 1.0)

    def second_moment(self):
        return self.shape * self.scale**2 / (self.shape - 2.0)

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        ratio = self.scale / np.maximum(u, self.scale)
        return np.where(u >= self.scale, 1.0 - ratio**self.shape, 0.0)

    def stieltjes(self, s):
        # a * E_{a+1}(s * x_m), via the integral over t = x / x_m in [1, inf)
        a, xm = self.shape, self.scale

        def one(sv):
            if sv == 0.0:
                return 1.0
            val, _ = integrate.quad(lambda t: math.exp(-sv * xm * t) * t ** (-a - 1.0), 1.0, math.inf)
            return a * val

        s = np.asarray(s, dtype=float)
        out = np.vectorize(one, otypes=[float])(s)
        return out if out.ndim else float(out)

    def sample(self, rng, size):
        return self.scale * (1.0 + rng.pareto(self.shape, size))

    def to_mapping(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Degenerate(ClaimDistribution):
    point: float
    kind = "degenerate"
    continuous = False

    def __post_init__(self):
        object.__setattr__(self, "point", _positive("point", self.point))

    def mean(self):
        return self.point

    def second_moment(self):
        return self.point**2

    def cdf(self, u):
        return np.where(np.asarray(u, dtype=float) >= self.point, 1.0, 0.0)

    def stieltjes(self, s):
        return np.exp(-self.point * np.asarray(s, dtype=float))

    def sample(self, rng, size):
        return np.full(size, self.point)

    def to_mapping(self):
        return {"kind": self.kind, "point": self.point}


def claim_mean(claim: ClaimDistribution) -> float:
    return claim.mean()


_REQUIRED = {
    "exponential": ("mean",),
    "gamma": ("shape", "scale"),
    "pareto": ("shape", "scale"),
    "degenerate": ("point",),
}


def claim_from_mapping(fields: Mapping[str, object], prefix: str = "") -> ClaimDistribution:
    """Build a distribution from ``{"kind": ..., <parameter>: ...}``.

    ``prefix`` is only used to name keys in error messages.
    """
    kind = str(fields.get("kind", "")).strip().lower()
    if kind not in _REQUIRED:
        raise ParameterError(f"{prefix}kind: unknown claim kind {kind!r}")
    args = []
    for name in _REQUIRED[kind]:
        if name not in fields:
            raise ParameterError(f"{prefix}{name}: missing for claim kind {kind!r}")
        try:
            args.append(float(fields[name]))
        except (TypeError, ValueError):
            raise ParameterError(f"{prefix}{name}: not a number: {fields[name]!r}") from None
    cls = {"exponential": Exponential, "gamma": Gamma, "pareto": Pareto, "degenerate": Degenerate}[kind]
    return cls(*args)
