"""Simulation of the diffusion-perturbed classical risk process

    X_t = x + c t + sigma W_t - sum_{i <= N_t} gamma_i

and its equidistant discrete observation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as _rng
from .claims import ClaimDistribution
from .errors import GridError, NetProfitError, ParameterError

__all__ = [
    "ModelParams",
    "PathRecord",
    "DiscreteRecord",
    "simulate_path",
    "discretize",
    "write_record_csv",
    "read_record_csv",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """True model.  Give the premium either as ``c`` or as a loading ``theta0``.

    Basic ranges are validated on construction; the net profit condition is
    only enforced where it matters (:meth:`check_net_profit`), so that
    degenerate scenarios such as ``c = 0`` can still be simulated.
    """

    x: float
    sigma: float
    lam: float
    claim: ClaimDistribution
    c: Optional[float] = None
    theta0: Optional[float] = None

    def __post_init__(self):
        if (self.c is None) == (self.theta0 is None):
            raise ParameterError("give exactly one of premium c or loading theta0")
        if self.theta0 is not None:
            if not self.theta0 > 0:
                raise ParameterError("loading theta0 must be positive")
            object.__setattr__(self, "c", (1.0 + self.theta0) * self.lam * self.claim.mean())
        for name in ("x", "sigma", "lam", "c"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be finite and non-negative, got {v!r}")
            object.__setattr__(self, name, v)
        if self.sigma == 0 and self.lam == 0 and self.c == 0:
            raise ParameterError("sigma, lambda and premium are all zero: the path is constant")

    @property
    def mu(self) -> float:
        return self.claim.mean()

    @property
    def rho(self) -> float:
        """Loading ratio lambda * mu / c."""
        return self.lam * self.mu / self.c if self.c > 0 else math.inf

    def check_net_profit(self) -> None:
        if not self.c > self.lam * self.mu:
            raise NetProfitError(
                f"net profit condition violated: c={self.c} <= lambda*mu={self.lam * self.mu}"
            )


@dataclass(frozen=True)
class PathRecord:
    """Ground truth of one realisation: jump epochs and sizes on [0, horizon].

    The Brownian component is not stored; it is generated on the observation
    grid by :func:`discretize` from ``brownian_seed``.
    """

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    brownian_seed: int
    params: ModelParams
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "jump_times", _frozen(self.jump_times))
        object.__setattr__(self, "jump_sizes", _frozen(self.jump_sizes))
        if self.jump_times.shape != self.jump_sizes.shape:
            raise ParameterError("jump_times and jump_sizes differ in length")
        if np.any(np.diff(self.jump_times) <= 0):
            raise ParameterError("jump times must be strictly increasing")
        if np.any(self.jump_sizes <= 0):
            raise ParameterError("jump sizes must be positive")

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def evaluate(self, t):
        """Drift plus compound Poisson part ``x + c t - S_t`` (no Brownian term)."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.jump_times, t, side="right")
        cum = np.concatenate([[0.0], np.cumsum(self.jump_sizes)])
        return self.params.x + self.params.c * t - cum[k]


@dataclass(frozen=True)
class DiscreteRecord:
    """Observations ``X_{t_0}, ..., X_{t_n}`` on ``t_i = i * h``."""

    h: float
    values: np.ndarray
    jumps_in_cell: Optional[np.ndarray] = None
    jump_size_in_cell: Optional[np.ndarray] = None
    increments: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.h > 0:
            raise GridError("step h must be positive")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1 or self.values.size < 2:
            raise GridError("a record needs at least two observations")
        for name in ("jumps_in_cell", "jump_size_in_cell"):
            arr = getattr(self, name)
            if arr is not None:
                arr = _frozen(arr)
                if arr.size != self.n:
                    raise GridError(f"{name} must have one entry per cell")
                object.__setattr__(self, name, arr)
        inc = np.diff(self.values)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def n(self) -> int:
        return int(self.values.size - 1)

    @property
    def T_n(self) -> float:
        return self.n * self.h

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def has_truth(self) -> bool:
        return self.jumps_in_cell is not None


def simulate_path(params: ModelParams, horizon: float, seed: int) -> PathRecord:
    """Sample Poisson jump epochs and i.i.d. claim sizes on ``[0, horizon]``."""
    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    gen = _rng.generator(seed, _rng.JUMPS)
    count = int(gen.poisson(params.lam * horizon)) if params.lam > 0 else 0
    times = np.sort(gen.uniform(0.0, horizon, count))
    sizes = params.claim.sample(gen, count)
    return PathRecord(times, sizes, brownian_seed=int(seed), params=params, horizon=float(horizon))


def discretize(path: PathRecord, h: float, seed: Optional[int] = None) -> DiscreteRecord:
    """Observe ``path`` at ``t_i = i h`` for ``i = 0..floor(horizon / h)``.

    Brownian increments are exact N(0, sigma^2 h) draws from the Brownian
    stream of ``seed`` (default: the path's ``brownian_seed``).
    """
    if not h > 0:
        raise GridError("step h must be positive")
    if h >= path.horizon:
        raise GridError(f"step h={h} must be smaller than the horizon {path.horizon}")
    n = int(math.floor(path.horizon / h * (1.0 + 1e-12)))
    p = path.params
    seed = path.brownian_seed if seed is None else seed
    i = np.arange(n + 1, dtype=float)
    values = p.x + p.c * (i * h)
    if p.sigma > 0:
        dw = _rng.generator(seed, _rng.BROWNIAN).standard_normal(n)
        values[1:] += p.sigma * math.sqrt(h) * np.cumsum(dw)
    # cell k covers (t_{k-1}, t_k]; jumps past T_n are dropped
    cell = np.ceil(path.jump_times / h).astype(np.int64)
    keep = (cell >= 1) & (cell <= n)
    cell, sizes = cell[keep], path.jump_sizes[keep]
    counts = np.bincount(cell - 1, minlength=n).astype(float)
    totals = np.bincount(cell - 1, weights=sizes, minlength=n)
    values[1:] -= np.cumsum(totals)
    return DiscreteRecord(h, values, counts, totals)


def write_record_csv(record: DiscreteRecord, path, truth_path=None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "t", "X"])
        for i, (t, x) in enumerate(zip(record.times, record.values)):
            w.writerow([i, f"{t:.17g}", f"{x:.17g}"])
    if truth_path is not None:
        if not record.has_truth:
            raise GridError("record carries no ground truth")
        with Path(truth_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "jumps_in_cell", "total_jump_size"])
            for i, (k, s) in enumerate(zip(record.jumps_in_cell, record.jump_size_in_cell), start=1):
                w.writerow([i, int(k), f"{s:.17g}"])


def read_record_csv(path, truth_path=None) -> DiscreteRecord:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"i", "t", "X"}:
        raise GridError(f"{path}: expected header i,t,X")
    t = np.array([float(r["t"]) for r in rows])
    x = np.array([float(r["X"]) for r in rows])
    if t.size < 2:
        raise GridError(f"{path}: need at least two observations")
    h = t[1] - t[0]
    if not h > 0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12):
        raise GridError(f"{path}: observation times are not equidistant")
    counts = sizes = None
    if truth_path is not None:
        with Path(truth_path).open(newline="") as fh:
            trows = list(csv.DictReader(fh))
        counts = np.array([float(r["jumps_in_cell"]) for r in trows])
        sizes = np.array([float(r["total_jump_size"]) for r in trows])
    return DiscreteRecord(float(h), x, counts, sizes)
