"""Experiment drivers behind the ``ruinlab`` command line.

Each ``run_*`` function validates its inputs, does the work through the
library modules and writes its outputs into ``out_dir``.  Output formats are
documented in FORMATS.md.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError, RuinlabError
from .gof import gof_statistics
from .laplace import (
    QuadratureConfig,
    RegularizedInverse,
    choose_m,
    default_grid,
    ise,
    plugin_transform,
    shift_theta,
    true_transform,
)
from .process import DiscreteRecord, discretize, read_record_csv, simulate_path, write_record_csv
from .reference import has_rational_transform, rational_survival
from .rng import replicate_seed
from .threshold import (
    EstimateSet,
    ThresholdSpec,
    assemble_estimates,
    cdf_confidence_band,
    classify_increments,
    estimate,
)

log = logging.getLogger(__name__)

__all__ = [
    "RunReport",
    "threshold_spec_for",
    "run_simulate",
    "run_estimate",
    "run_invert",
    "run_gof",
    "run_montecarlo",
    "aggregate_rows",
    "read_estimate",
]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return "" if v is None else str(v)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_kv(path: Path, items: dict) -> None:
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in items.items()))


def _read_kv(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def threshold_spec_for(cfg: ExperimentConfig, record: DiscreteRecord) -> ThresholdSpec:
    t = cfg.threshold
    if t.L is None:
        return ThresholdSpec.calibrate(record, omega=t.omega, sd_multiple=t.sd_multiple, kappa=t.kappa, E=t.E)
    return ThresholdSpec(L=t.L, omega=t.omega, kappa=t.kappa, s_min=t.E[0], s_max=t.E[1])


# ---------------------------------------------------------------- simulate


def run_simulate(cfg: ExperimentConfig, out_dir) -> DiscreteRecord:
    params = cfg.require_model()
    horizon, h = cfg.require_sim()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = simulate_path(params, horizon, cfg.seed)
    record = discretize(path, h)
    write_record_csv(record, out / "record.csv", out / "truth.csv")
    print(f"n = {record.n}, T_n = {record.T_n:.15g}, jumps = {int(record.jumps_in_cell.sum())}")
    return record


# ---------------------------------------------------------------- estimate


def run_estimate(cfg: ExperimentConfig, record: DiscreteRecord, out_dir) -> EstimateSet:
    c = cfg.require_premium()
    if not c > 0:
        raise ConfigError("model.premium.c", "estimation needs a positive premium")
    spec = threshold_spec_for(cfg, record)
    est = estimate(record, spec, c)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "n": est.n,
        "h_n": est.h_n,
        "T_n": est.T_n,
        "c": c,
        "threshold.L": spec.L,
        "threshold.omega": spec.omega,
        "threshold.value": est.threshold,
        "threshold.kappa": est.kappa,
        "threshold.E.min": spec.s_min,
        "threshold.E.max": spec.s_max,
        "N_flagged": est.n_flagged,
        "sigma2_hat": est.sigma2_hat,
        "lambda_hat": est.lambda_hat,
        "rho_hat": est.rho_hat,
    }
    _write_kv(out / "estimate.txt", summary)
    _write_csv(out / "proxies.csv", ["proxy"], ([p] for p in est.proxies))
    s_grid = np.linspace(spec.s_min, spec.s_max, 46)
    lam_lf = est.lambda_lf_hat(s_grid)
    if est.n_flagged:
        lf = est.lf_hat(s_grid)
    else:
        log.warning("no flagged intervals: lambda_hat = 0, l_F and the claim CDF are skipped")
        lf = [None] * s_grid.size
    _write_csv(out / "lf.csv", ["s", "lf_hat", "lambda_lf_hat"], zip(s_grid, lf, lam_lf))
    if est.n_flagged:
        u_grid = np.linspace(0.0, 1.05 * float(est.proxies[-1]), 101)
        F = est.cdf_hat(u_grid)
        lo, hi = cdf_confidence_band(est, u_grid, cfg.montecarlo.level)
        _write_csv(out / "cdf.csv", ["u", "F_hat", "lo", "hi"], zip(u_grid, F, lo, hi))
    for k, v in summary.items():
        print(f"{k} = {_fmt(v)}")
    return est


def read_estimate(est_dir) -> EstimateSet:
    """Rebuild an :class:`EstimateSet` written by :func:`run_estimate`."""
    d = Path(est_dir)
    try:
        kv = _read_kv(d / "estimate.txt")
        with (d / "proxies.csv").open(newline="") as fh:
            prox = [float(r["proxy"]) for r in csv.DictReader(fh)]
        spec = ThresholdSpec(
            L=float(kv["threshold.L"]),
            omega=float(kv["threshold.omega"]),
            kappa=float(kv["threshold.kappa"]),
            s_min=float(kv["threshold.E.min"]),
            s_max=float(kv["threshold.E.max"]),
        )
        return assemble_estimates(prox, float(kv["sigma2_hat"]), (int(kv["n"]), float(kv["h_n"])), spec, float(kv["c"]))
    except KeyError as exc:
        raise RuinlabError(f"{d / 'estimate.txt'}: missing entry {exc}") from None


# ---------------------------------------------------------------- invert


def _reference_for(cfg: ExperimentConfig):
    if cfg.model is not None and has_rational_transform(cfg.model):
        return rational_survival(cfg.model)
    return None


def run_invert(cfg: ExperimentConfig, out_dir, estimate_dir=None):
    inv = cfg.inversion
    x = default_grid(inv.B, inv.grid)
    quad = QuadratureConfig(step=inv.step)
    if estimate_dir is not None:
        est = read_estimate(estimate_dir)
        g = plugin_transform(est, cfg.require_premium())
        T_n = est.T_n
    else:
        g = true_transform(cfg.require_model())
        T_n = cfg.horizon
    m = inv.m
    if m is None:
        if T_n is None:
            raise ConfigError("inversion.m", "auto needs sim.horizon or an estimate set")
        m = choose_m(T_n)
    phi = np.exp(inv.theta * x) * RegularizedInverse(shift_theta(g, inv.theta), m, quad)(x)
    ref = _reference_for(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if ref is not None:
        rv = ref(x)
        err = ise(phi, rv, x)
        _write_csv(out / "survival.csv", ["x", "phi_hat", "phi_ref", "abs_err"], zip(x, phi, rv, np.abs(phi - rv)))
    else:
        err = math.nan
        _write_csv(out / "survival.csv", ["x", "phi_hat"], zip(x, phi))
    line = f"{_fmt(m)},{_fmt(inv.theta)},{_fmt(err)}"
    (out / "invert_summary.csv").write_text("m,theta,ISE\n" + line + "\n")
    print("m,theta,ISE")
    print(line)
    return x, phi, m, err


# ---------------------------------------------------------------- gof


def run_gof(cfg: ExperimentConfig, record: DiscreteRecord, out_dir):
    if cfg.gof_null is None:
        raise ConfigError("gof.null.kind", "a null distribution is required")
    spec = threshold_spec_for(cfg, record)
    prox = np.abs(record.increments[classify_increments(record, spec)])
    res = gof_statistics(prox, cfg.gof_null)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gof.csv").write_text("N,W2,p_W2,D,p_KS\n" + res.summary() + "\n")
    _write_kv(
        out / "gof.txt",
        {"N": res.N, "W2": res.W2, "p_W2": res.p_W2, "D": res.D, "p_KS": res.p_KS, "null.kind": cfg.gof_null.kind},
    )
    print("N,W2,p_W2,D,p_KS")
    print(res.summary())
    return res


# ---------------------------------------------------------------- montecarlo


@dataclass
class RunReport:
    rows: list
    aggregates: list
    provenance: dict
    columns: list = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r["status"] != "ok" for r in self.rows) / len(self.rows)


def _scenarios(cfg: ExperimentConfig):
    mc = cfg.montecarlo
    if not mc.horizons:
        raise ConfigError("montecarlo.horizons", "no horizon given (set sim.horizon or montecarlo.horizons)")
    if not mc.steps:
        raise ConfigError("montecarlo.steps", "no step given (set sim.h or montecarlo.steps)")
    steps = mc.steps if len(mc.steps) == len(mc.horizons) else mc.steps * len(mc.horizons)
    for T, h in zip(mc.horizons, steps):
        if h >= T:
            raise ConfigError("montecarlo.steps", f"step {h} is not below horizon {T}")
    return list(zip(mc.horizons, steps))


def _ise_m_values(cfg: ExperimentConfig):
    return list(cfg.montecarlo.m_ladder)


def _replicate(cfg: ExperimentConfig, scenario: int, T: float, h: float, rep: int, seed: int, ref) -> dict:
    params = cfg.model
    mc = cfg.montecarlo
    row = {"scenario": scenario, "T": T, "h": h, "replicate": rep, "seed": seed, "status": "ok"}
    try:
        path = simulate_path(params, T, seed)
        record = discretize(path, h)
        spec = threshold_spec_for(cfg, record)
        flags = classify_increments(record, spec)
        row["n"] = record.n
        row["T_n"] = record.T_n
        row["n_jumps"] = int(record.jumps_in_cell.sum())
        row["disagreement"] = float(np.mean(flags != (record.jumps_in_cell >= 1)))
        est = estimate(record, spec, params.c)
        rT, rn = math.sqrt(record.T_n), math.sqrt(record.n)
        row["N_flagged"] = est.n_flagged
        row["threshold"] = est.threshold
        row["sigma2_hat"] = est.sigma2_hat
        row["lambda_hat"] = est.lambda_hat
        row["rho_hat"] = est.rho_hat
        row["z_lambda"] = rT * (est.lambda_hat - params.lam)
        row["z_sigma2"] = rn * (est.sigma2_hat - params.sigma**2)
        row["z_rho"] = rT * (est.rho_hat - params.rho)
        for s in mc.s:
            v = float(est.lambda_lf_hat(s))
            row[f"lambda_lf_hat[{s:g}]"] = v
            row[f"z_lambda_lf[{s:g}]"] = rT * (v - params.lam * float(params.claim.stieltjes(s)))
        if est.n_flagged:
            F = float(est.cdf_hat(mc.u))
            lo, hi = cdf_confidence_band(est, mc.u, mc.level)
            truth = float(params.claim.cdf(mc.u))
            row.update(F_hat=F, band_lo=lo, band_hi=hi, covered=int(lo <= truth <= hi))
        if mc.invert and ref is not None:
            x = default_grid(cfg.inversion.B, cfg.inversion.grid)
            rv = ref(x)
            g = shift_theta(plugin_transform(est, params.c), cfg.inversion.theta)
            quad = QuadratureConfig(step=cfg.inversion.step)
            m_auto = cfg.inversion.m if cfg.inversion.m is not None else choose_m(record.T_n)
            row["m_auto"] = m_auto
            for label, m in [("auto", m_auto)] + [(f"{m:g}", m) for m in _ise_m_values(cfg)]:
                phi = np.exp(cfg.inversion.theta * x) * RegularizedInverse(g, m, quad)(x)
                row[f"ise[{label}]"] = ise(phi, rv, x)
        null = cfg.gof_null if cfg.gof_null is not None else (params.claim if params.claim.continuous else None)
        if mc.gof and null is not None and est.n_flagged:
            res = gof_statistics(est, null)
            row.update(W2=res.W2, p_W2=res.p_W2, D=res.D, p_KS=res.p_KS)
            row["reject_W2"] = int(res.p_W2 < cfg.gof_alpha)
            row["reject_KS"] = int(res.p_KS < cfg.gof_alpha)
    except (RuinlabError, ArithmeticError, ValueError) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    return row


def _replicate_star(args):
    return _replicate(*args)


def _variance_targets(cfg: ExperimentConfig) -> dict:
    p = cfg.model
    targets = {
        "z_lambda": p.lam,
        "z_sigma2": 2.0 * p.sigma**4,
        "z_rho": p.lam / p.c**2 * p.claim.second_moment() if p.c > 0 else math.nan,
    }
    for s in cfg.montecarlo.s:
        targets[f"z_lambda_lf[{s:g}]"] = p.lam * float(p.claim.stieltjes(2.0 * s))
    return targets


def aggregate_rows(cfg: ExperimentConfig, rows: list) -> list:
    """Per-scenario aggregates as ``(scenario, T, h, metric, value, target)`` rows.

    Deterministic function of ``rows``; the montecarlo output is exactly this
    applied to the stored replicate table.
    """
    targets = _variance_targets(cfg)
    out = []
    for sc in sorted({r["scenario"] for r in rows}):
        sub = [r for r in rows if r["scenario"] == sc]
        ok = [r for r in sub if r["status"] == "ok"]
        T, h = sub[0]["T"], sub[0]["h"]

        def add(metric, value, target=math.nan):
            out.append((sc, T, h, metric, float(value), float(target)))

        def col(name):
            return np.array([r[name] for r in ok if name in r and r[name] is not None and r[name] != ""], dtype=float)

        add("replicates", len(sub))
        add("failures", len(sub) - len(ok))
        for name, target in targets.items():
            v = col(name)
            if v.size >= 2:
                add(f"mean[{name}]", v.mean(), 0.0)
                add(f"se_mean[{name}]", v.std(ddof=1) / math.sqrt(v.size))
                add(f"var[{name}]", v.var(ddof=1), target)
        for name, stat in (("disagreement", "median"), ("covered", "mean"), ("reject_W2", "mean"), ("reject_KS", "mean")):
            v = col(name)
            if v.size:
                add(f"{stat}[{name}]", np.median(v) if stat == "median" else v.mean(), cfg.montecarlo.level if name == "covered" else math.nan)
        ise_cols = sorted({k for r in ok for k in r if k.startswith("ise[")})
        for name in ise_cols:
            v = col(name)
            if v.size:
                add(f"median[{name}]", np.median(v))
    return out


def _threads() -> int:
    raw = os.environ.get("RUINLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("RUINLAB_THREADS", f"not an integer: {raw!r}") from None


def run_montecarlo(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    params = cfg.require_model()
    mc = cfg.montecarlo
    if mc.replicates < 2:
        raise ConfigError("montecarlo.replicates", "need at least 2 replicates")
    scenarios = _scenarios(cfg)
    ref = _reference_for(cfg) if mc.invert else None
    if mc.invert and ref is None:
        log.warning("no reference survival curve for this model; ISE columns are skipped")
    if mc.invert:
        params.check_net_profit()
    jobs = []
    for k, (T, h) in enumerate(scenarios):
        for r in range(mc.replicates):
            index = k * mc.replicates + r
            jobs.append((cfg, k, T, h, r, replicate_seed(mc.base_seed, index), ref))
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_replicate_star, jobs, chunksize=1))
    else:
        rows = [_replicate(*job) for job in jobs]
    columns = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    aggregates = aggregate_rows(cfg, rows)
    provenance = {
        "version": __version__,
        "config_sha256": cfg.digest,
        "base_seed": mc.base_seed,
        "seed_rule": "base_seed XOR (scenario * replicates + replicate)",
        "replicates": mc.replicates,
        "scenarios": len(scenarios),
    }
    report = RunReport(rows=rows, aggregates=aggregates, provenance=provenance, columns=columns)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "replicates.csv", report.columns, ([r.get(c) for c in report.columns] for r in report.rows))
    _write_csv(out / "summary.csv", ["scenario", "T", "h", "metric", "value", "target"], report.aggregates)
    _write_kv(out / "provenance.txt", report.provenance)
