"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` and blank lines are ignored.  Keys are dotted; the
full list is in ``KNOWN_KEYS``.  Any problem is reported as
:class:`ConfigError` naming the offending key.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .claims import ClaimDistribution, claim_from_mapping
from .errors import ConfigError, RuinlabError
from .laplace import DEFAULT_B, DEFAULT_GRID_POINTS, DEFAULT_THETA
from .process import ModelParams
from .threshold import DEFAULT_E, DEFAULT_OMEGA, DEFAULT_SD_MULTIPLE

_CLAIM_FIELDS = ("kind", "mean", "shape", "scale", "point")

KNOWN_KEYS = (
    {"model.x", "model.sigma", "model.lambda", "model.premium.c", "model.premium.theta0"}
    | {f"model.claim.{k}" for k in _CLAIM_FIELDS}
    | {"sim.horizon", "sim.h", "sim.seed"}
    | {"threshold.L", "threshold.omega", "threshold.kappa", "threshold.E.min", "threshold.E.max", "threshold.sd_multiple"}
    | {"inversion.theta", "inversion.m", "inversion.B", "inversion.grid", "inversion.step"}
    | {f"gof.null.{k}" for k in _CLAIM_FIELDS}
    | {"gof.alpha"}
    | {
        "montecarlo.replicates",
        "montecarlo.base_seed",
        "montecarlo.horizons",
        "montecarlo.steps",
        "montecarlo.s",
        "montecarlo.u",
        "montecarlo.level",
        "montecarlo.m_ladder",
        "montecarlo.invert",
        "montecarlo.gof",
    }
)

_KEY_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*$")


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(key or f"<line {lineno}>", "malformed key")
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def _num(raw: dict, key: str, default=None, *, positive=False, nonneg=False, integer=False):
    if key not in raw:
        if default is None:
            raise ConfigError(key, "required key is missing")
        return default
    text = raw[key]
    try:
        v = int(text) if integer else float(text)
    except ValueError:
        raise ConfigError(key, f"not a {'integer' if integer else 'number'}: {text!r}") from None
    if not integer and not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    if positive and not v > 0:
        raise ConfigError(key, "must be positive")
    if nonneg and v < 0:
        raise ConfigError(key, "must be non-negative")
    return v


def _auto_or_num(raw, key, *, positive=True):
    if raw.get(key, "auto").strip().lower() == "auto":
        return None
    return _num(raw, key, positive=positive)


def _list(raw, key, default, *, integer=False):
    if key not in raw:
        return default
    items = [p.strip() for p in raw[key].split(",") if p.strip()]
    if not items:
        raise ConfigError(key, "empty list")
    try:
        vals = [int(p) if integer else float(p) for p in items]
    except ValueError:
        raise ConfigError(key, f"not a list of numbers: {raw[key]!r}") from None
    if any(not v > 0 for v in vals):
        raise ConfigError(key, "entries must be positive")
    return vals


def _bool(raw, key, default):
    if key not in raw:
        return default
    v = raw[key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"not a boolean: {raw[key]!r}")


def _claim(raw, prefix) -> Optional[ClaimDistribution]:
    fields = {k[len(prefix) :]: v for k, v in raw.items() if k.startswith(prefix)}
    if not fields:
        return None
    if "kind" not in fields:
        raise ConfigError(prefix + "kind", "required key is missing")
    try:
        return claim_from_mapping(fields, prefix)
    except RuinlabError as exc:
        msg = str(exc)
        if msg.startswith(prefix):
            key = msg.split(":", 1)[0]
        else:
            named = [k for k in _CLAIM_FIELDS if re.search(rf"\b{k}\b", msg)]
            key = prefix + (named[0] if named else "kind")
        raise ConfigError(key, msg) from None


@dataclass(frozen=True)
class ThresholdBlock:
    L: Optional[float] = None  # None: calibrate from the record
    omega: float = DEFAULT_OMEGA
    kappa: Optional[float] = None
    E: tuple[float, float] = DEFAULT_E
    sd_multiple: float = DEFAULT_SD_MULTIPLE


@dataclass(frozen=True)
class InversionBlock:
    theta: float = DEFAULT_THETA
    m: Optional[float] = None  # None: choose_m(T_n)
    B: float = DEFAULT_B
    grid: int = DEFAULT_GRID_POINTS
    step: float = 0.05


@dataclass(frozen=True)
class MonteCarloBlock:
    replicates: int = 2
    base_seed: int = 0
    horizons: tuple = ()
    steps: tuple = ()
    s: tuple = (1.0,)
    u: float = 1.0
    level: float = 0.95
    m_ladder: tuple = ()
    invert: bool = True
    gof: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    model: Optional[ModelParams]
    horizon: Optional[float]
    h: Optional[float]
    seed: int
    threshold: ThresholdBlock
    inversion: InversionBlock
    gof_null: Optional[ClaimDistribution]
    gof_alpha: float
    montecarlo: MonteCarloBlock
    premium: Optional[float] = None

    @property
    def digest(self) -> str:
        canon = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        return hashlib.sha256(canon.encode()).hexdigest()

    def require_model(self) -> ModelParams:
        if self.model is None:
            raise ConfigError("model.claim.kind", "this command needs a complete model block")
        return self.model

    def require_premium(self) -> float:
        if self.premium is None:
            raise ConfigError("model.premium.c", "the premium rate is required")
        return self.premium

    def require_sim(self) -> tuple[float, float]:
        if self.horizon is None:
            raise ConfigError("sim.horizon", "required key is missing")
        if self.h is None:
            raise ConfigError("sim.h", "required key is missing")
        return self.horizon, self.h


def _model(raw) -> tuple[Optional[ModelParams], Optional[float]]:
    claim = _claim(raw, "model.claim.")
    has_c, has_t = "model.premium.c" in raw, "model.premium.theta0" in raw
    if has_c and has_t:
        raise ConfigError("model.premium.theta0", "give only one of model.premium.c and model.premium.theta0")
    c = _num(raw, "model.premium.c", nonneg=True) if has_c else None
    model_keys = {"model.x", "model.sigma", "model.lambda"}
    if claim is None and not (model_keys & raw.keys()):
        return None, c
    x = _num(raw, "model.x", 0.0, nonneg=True) if "model.x" in raw else 0.0
    sigma = _num(raw, "model.sigma", nonneg=True)
    lam = _num(raw, "model.lambda", nonneg=True)
    if claim is None:
        raise ConfigError("model.claim.kind", "required key is missing")
    if not (has_c or has_t):
        raise ConfigError("model.premium.c", "give model.premium.c or model.premium.theta0")
    theta0 = _num(raw, "model.premium.theta0", positive=True) if has_t else None
    try:
        params = ModelParams(x=x, sigma=sigma, lam=lam, claim=claim, c=c, theta0=theta0)
    except RuinlabError as exc:
        msg = str(exc)
        key = "model.premium.theta0" if has_t else "model.premium.c"
        for prefix, k in (("x must", "model.x"), ("sigma must", "model.sigma"), ("lam must", "model.lambda")):
            if msg.startswith(prefix):
                key = k
        raise ConfigError(key, msg) from None
    return params, params.c


def load_config(source) -> ExperimentConfig:
    """Parse a config file path (or ``dict`` of raw key/value strings)."""
    if isinstance(source, dict):
        raw = {}
        for k, v in source.items():
            if k not in KNOWN_KEYS:
                raise ConfigError(k, "unknown key")
            raw[k] = str(v)
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {source}: {exc}") from None
        raw = parse_text(text)
    model, premium = _model(raw)
    horizon = _num(raw, "sim.horizon", positive=True) if "sim.horizon" in raw else None
    h = _num(raw, "sim.h", positive=True) if "sim.h" in raw else None
    if horizon is not None and h is not None and h >= horizon:
        raise ConfigError("sim.h", "step must be smaller than the horizon")
    seed = _num(raw, "sim.seed", 0, nonneg=True, integer=True)

    L = _auto_or_num(raw, "threshold.L")
    omega = _num(raw, "threshold.omega", DEFAULT_OMEGA)
    if not 0.0 < omega < 0.5:
        raise ConfigError("threshold.omega", "must lie in (0, 1/2)")
    E = (_num(raw, "threshold.E.min", DEFAULT_E[0], positive=True), _num(raw, "threshold.E.max", DEFAULT_E[1], positive=True))
    if E[0] > E[1]:
        raise ConfigError("threshold.E.max", "must not be below threshold.E.min")
    thr = ThresholdBlock(
        L=L,
        omega=omega,
        kappa=_auto_or_num(raw, "threshold.kappa"),
        E=E,
        sd_multiple=_num(raw, "threshold.sd_multiple", DEFAULT_SD_MULTIPLE, positive=True),
    )

    m = _auto_or_num(raw, "inversion.m")
    if m is not None and not m > 1.0 / math.pi:
        raise ConfigError("inversion.m", "must exceed 1/pi")
    inv = InversionBlock(
        theta=_num(raw, "inversion.theta", DEFAULT_THETA, positive=True),
        m=m,
        B=_num(raw, "inversion.B", DEFAULT_B, positive=True),
        grid=_num(raw, "inversion.grid", DEFAULT_GRID_POINTS, positive=True, integer=True),
        step=_num(raw, "inversion.step", 0.05, positive=True),
    )
    if inv.grid < 2:
        raise ConfigError("inversion.grid", "need at least two points")

    null = _claim(raw, "gof.null.")
    if null is not None and not null.continuous:
        raise ConfigError("gof.null.kind", "the null distribution must be continuous")
    alpha = _num(raw, "gof.alpha", 0.05, positive=True)
    if not alpha < 1:
        raise ConfigError("gof.alpha", "must lie in (0, 1)")

    level = _num(raw, "montecarlo.level", 0.95, positive=True)
    if not level < 1:
        raise ConfigError("montecarlo.level", "must lie in (0, 1)")
    ladder = tuple(_list(raw, "montecarlo.m_ladder", []))
    if any(v <= 1.0 / math.pi for v in ladder):
        raise ConfigError("montecarlo.m_ladder", "entries must exceed 1/pi")
    mc = MonteCarloBlock(
        replicates=_num(raw, "montecarlo.replicates", 2, positive=True, integer=True),
        base_seed=_num(raw, "montecarlo.base_seed", seed if seed else 0, nonneg=True, integer=True),
        horizons=tuple(_list(raw, "montecarlo.horizons", [horizon] if horizon else [])),
        steps=tuple(_list(raw, "montecarlo.steps", [h] if h else [])),
        s=tuple(_list(raw, "montecarlo.s", [1.0])),
        u=_num(raw, "montecarlo.u", 1.0, positive=True),
        level=level,
        m_ladder=ladder,
        invert=_bool(raw, "montecarlo.invert", True),
        gof=_bool(raw, "montecarlo.gof", True),
    )
    if len(mc.steps) not in (1, len(mc.horizons)) and mc.horizons:
        raise ConfigError("montecarlo.steps", "give one step or one per horizon")
    return ExperimentConfig(
        raw=raw,
        model=model,
        horizon=horizon,
        h=h,
        seed=seed,
        threshold=thr,
        inversion=inv,
        gof_null=null,
        gof_alpha=alpha,
        montecarlo=mc,
        premium=premium,
    )
