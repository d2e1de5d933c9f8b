"""Monte Carlo verification harness for the component estimator.

Studies are pure functions of (config, master seed): replica seeds are
derived by the documented splitting rule, workers return records merged
in replica order, and every aggregate uses compensated summation, so a
rerun reproduces each reported statistic bitwise.

The study configuration is the shared :class:`margint.config.RunConfig`.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from .process import simulate_scenario, split_seed
from .estimators import DensityEstimate, make_regression_estimate
from .additive import (
    ComponentEstimationError,
    ComponentQuadrature,
    bias_term,
    true_component,
)

__all__ = [
    "ReplicaRecord",
    "PerHorizonStats",
    "StudyResult",
    "StudyAbort",
    "run_replication",
    "mse_rate_study",
    "normality_study",
    "coverage_study",
    "estimate_A",
    "density_rate_study",
    "mode_comparison_study",
    "ks_statistic",
    "fit_loglog_slope",
    "run_selftests",
]

# Stream index stride: horizon index in the high bits, replica below.
REPLICA_STRIDE = 1 << 20

RATE_SLOPE_TOL = 0.15
DENSITY_SLOPE_TOL = 0.2
COVERAGE_SLACK = 0.05
MAX_FAILED_FRACTION = 0.05
KS_PASS_LEVEL = 0.01
NORMALITY_MEAN_TOL = 0.1
NORMALITY_VAR_BAND = (0.8, 1.2)
MODE_RATIO_SPREAD = 10.0


class StudyAbort(RuntimeError):
    """Raised when too many replicas fail (misconfigured bandwidths)."""


@dataclass
class ReplicaRecord:
    """One simulated replica's statistics at a given horizon."""

    horizon: float
    index: int
    seed: int
    error: float | None = None
    corrected_error: float | None = None
    bias_value: float | None = None
    sup_density_error: float | None = None
    sup_component_diff: float | None = None
    failed: bool = False
    reason: str = ""


@dataclass
class PerHorizonStats:
    horizon: float
    n_ok: int
    n_failed: int
    mse: float | None = None
    bias: float | None = None
    variance: float | None = None
    a_t: float | None = None
    median_abs_error: float | None = None
    median_sup_density: float | None = None
    median_sup_diff: float | None = None
    ratio: float | None = None


@dataclass
class StudyResult:
    """Aggregated study output; unused fields stay None."""

    kind: str
    config_hash: str
    master_seed: int
    t_grid: list[float]
    replicas: int
    per_horizon: list[PerHorizonStats]
    records: list[ReplicaRecord]
    failed_fraction: float
    runtime_seconds: float
    passed: bool
    k_order: int = 2
    slope: float | None = None
    intercept: float | None = None
    r_squared: float | None = None
    target_slope: float | None = None
    slope_band: float | None = None
    monotone_ok: bool | None = None
    mean: float | None = None
    variance: float | None = None
    skewness: float | None = None
    ks_d: float | None = None
    ks_p: float | None = None
    a_value: float | None = None
    coverage: float | None = None
    coverage_target: float | None = None
    alpha: float | None = None
    beta: float | None = None
    fitted_constant: float | None = None
    ratios: list[float] | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["records"] = [asdict(r) for r in self.records]
        out["per_horizon"] = [asdict(p) for p in self.per_horizon]
        return out


# ---------------------------------------------------------------------------
# Replication
# ---------------------------------------------------------------------------


def replica_seed(master: int, horizon: float, index: int) -> int:
    """Documented splitting rule applied to the (horizon, replica) stream."""
    stream = int(round(horizon)) * REPLICA_STRIDE + index
    return split_seed(master, stream)


def run_replication(cfg, horizon: float, index: int, kind: str = "component") -> ReplicaRecord:
    """Simulate one path and compute the statistics a study needs.

    Deterministic per (config, horizon, index).  Estimation failures
    (quadrature nodes without kernel mass) are recorded, not raised.
    """
    from .config import build_scenario

    scen = build_scenario(cfg)
    seed = replica_seed(cfg.master_seed, horizon, index)
    rec = ReplicaRecord(horizon=horizon, index=index, seed=seed)

    path = simulate_scenario(scen.process, scen.model, cfg.delta, horizon, seed)
    h_density = scen.schedule.density_bandwidth(horizon)

    if kind == "density":
        de = DensityEstimate(path, scen.density_kernel, h_density)
        axes = [
            np.linspace(cfg.domain_lower, cfg.domain_upper, cfg.density_grid_points)
            for _ in range(cfg.dim)
        ]
        est = de.evaluate_grid(axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        truth = scen.true_density(pts).reshape(est.shape)
        rec.sup_density_error = float(np.max(np.abs(est - truth)))
        return rec

    h_reg = scen.schedule.regression_bandwidth(horizon)
    bandwidths = (h_reg,) * cfg.dim
    l = cfg.coordinate
    grid = (
        np.asarray(cfg.component_grid(), dtype=float)
        if kind == "mode_compare"
        else np.array([cfg.eval_point])
    )

    known_de = DensityEstimate(
        path, scen.density_kernel, h_density, known_density=scen.true_density
    )
    estimated_de = DensityEstimate(path, scen.density_kernel, h_density)

    def regression(mode: str):
        de = known_de if mode == "known_f" else estimated_de
        return make_regression_estimate(
            path,
            scen.regression_kernels,
            bandwidths,
            mode=mode,
            density=de,
            psi=scen.model.psi,
            floor_factor=cfg.density_floor_factor,
            interp_grid=None if mode == "known_f" else cfg.density_data_grid,
        )

    try:
        quadrature = ComponentQuadrature(
            path, scen.regression_kernels, bandwidths, scen.q, l, grid,
            cfg.quad_nodes,
        )
        if kind == "mode_compare":
            vals_known = quadrature.estimate(regression("known_f").coeffs).values
            vals_est = quadrature.estimate(regression("estimated_f").coeffs).values
            rec.sup_component_diff = float(np.max(np.abs(vals_known - vals_est)))
            axes = [
                np.linspace(cfg.domain_lower, cfg.domain_upper, cfg.density_grid_points)
                for _ in range(cfg.dim)
            ]
            est_grid = estimated_de.evaluate_grid(axes)
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            truth_grid = scen.true_density(pts).reshape(est_grid.shape)
            rec.sup_density_error = float(np.max(np.abs(est_grid - truth_grid)))
        else:
            vals = quadrature.estimate(regression(cfg.density_mode).coeffs).values
            truth = true_component(scen.model, scen.q.factors[l], l, grid)
            bias = bias_term(
                scen.model,
                scen.regression_kernels[l],
                scen.q.factors[l],
                l,
                grid,
                h_reg,
            )
            rec.error = float(vals[0] - truth[0])
            rec.bias_value = float(bias.values[0])
            correction = rec.bias_value if cfg.bias_correction else 0.0
            rec.corrected_error = rec.error - correction
    except ComponentEstimationError as exc:
        rec.failed = True
        rec.reason = str(exc)
    return rec


def _replica_task(args):
    cfg, horizon, index, kind = args
    return run_replication(cfg, horizon, index, kind)


def collect_records(
    cfg,
    horizons: Sequence[float],
    replicas_by_horizon: dict[float, int],
    kind: str,
) -> dict[float, list[ReplicaRecord]]:
    """Run all replicas, serially or over a worker pool, merged in order."""
    tasks = [
        (cfg, t, i, kind)
        for t in horizons
        for i in range(replicas_by_horizon[t])
    ]
    workers = cfg.resolved_workers()
    if workers <= 1 or len(tasks) <= 1:
        results = [_replica_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (workers * 8))
            results = list(pool.map(_replica_task, tasks, chunksize=chunk))
    out: dict[float, list[ReplicaRecord]] = {t: [] for t in horizons}
    for rec in results:
        out[rec.horizon].append(rec)
    for t in horizons:
        out[t].sort(key=lambda r: r.index)
    return out


# ---------------------------------------------------------------------------
# Aggregation helpers (deterministic regardless of worker scheduling)
# ---------------------------------------------------------------------------


def _moments(values: Sequence[float]) -> tuple[float, float, float]:
    """(mean, population variance, mean square) via compensated sums."""
    n = len(values)
    mean = math.fsum(values) / n
    msq = math.fsum(v * v for v in values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, var, msq

def _ok(records: list[ReplicaRecord]) -> list[ReplicaRecord]:
    return [r for r in records if not r.failed]


def _failed_fraction(records_by_t: dict[float, list[ReplicaRecord]]) -> float:
    all_records = [r for recs in records_by_t.values() for r in recs]
    if not all_records:
        return 0.0
    return sum(r.failed for r in all_records) / len(all_records)


def _guard_failures(records_by_t) -> float:
    frac = _failed_fraction(records_by_t)
    if frac > MAX_FAILED_FRACTION:
        raise StudyAbort(
            f"{frac:.1%} of replicas failed (limit {MAX_FAILED_FRACTION:.0%}); "
            "the bandwidth schedule is likely too small for these horizons"
        )
    return frac


def _rate_exponent(k: int) -> float:
    return 2.0 * k / (2.0 * k + 1.0)


def _component_stats(cfg, records_by_t) -> list[PerHorizonStats]:
    stats = []
    expo = _rate_exponent(cfg.order_k)
    for t in sorted(records_by_t):
        ok = _ok(records_by_t[t])
        errors = [r.error for r in ok]
        st = PerHorizonStats(
            horizon=t, n_ok=len(ok), n_failed=len(records_by_t[t]) - len(ok)
        )
        if errors:
            mean, var, msq = _moments(errors)
            st.mse = msq
            st.bias = mean
            st.variance = var
            st.a_t = t**expo * var
            st.median_abs_error = float(np.median(np.abs(errors)))
        stats.append(st)
    return stats


# ---------------------------------------------------------------------------
# Plumbing statistics
# ---------------------------------------------------------------------------


def ks_statistic(sample: Sequence[float]) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov distance to N(0, 1) and its p-value.

    The p-value uses the asymptotic Kolmogorov series truncated at 100
    terms.
    """
    sample = np.asarray(sample, dtype=float)
    n = sample.size
    if n < 8:
        raise ValueError("KS test needs at least 8 observations")
    s = np.sort(sample)
    cdf = ndtr(s)
    idx = np.arange(1, n + 1)
    d_plus = np.max(idx / n - cdf)
    d_minus = np.max(cdf - (idx - 1) / n)
    d = float(max(d_plus, d_minus))

    lam = math.sqrt(n) * d
    if lam < 1e-3:
        return d, 1.0
    terms = [
        2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        for j in range(1, 101)
    ]
    p = min(1.0, max(0.0, math.fsum(terms)))
    return d, p


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """OLS of log(value) on log(T); returns (slope, intercept, R^2)."""
    if len(points) < 3:
        raise ValueError("slope fit needs at least 3 points")
    t = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1] for p in points], dtype=float)
    if np.any(v <= 0) or np.any(t <= 0):
        raise ValueError("slope fit needs positive horizons and values")
    x, y = np.log(t), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


def _median_monotone(medians: Sequence[float], allowed_inversions: int = 1) -> bool:
    inversions = sum(
        1 for a, b in zip(medians, medians[1:]) if b > a
    )
    return inversions <= allowed_inversions


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def mse_rate_study(cfg) -> StudyResult:
    """Quadratic-rate check: log-log slope of per-horizon MSE vs target."""
    if len(cfg.t_grid) < 3:
        raise ValueError("rate study needs at least 3 horizons")
    if cfg.replicas < 100:
        raise ValueError("rate study needs at least 100 replicas per horizon")
    start = time.perf_counter()
    records = collect_records(
        cfg, cfg.t_grid, {t: cfg.replicas for t in cfg.t_grid}, "component"
    )
    frac = _guard_failures(records)
    per_t = _component_stats(cfg, records)
    usable = [(s.horizon, s.mse) for s in per_t if s.mse is not None and s.mse > 0]
    if len(usable) < 3:
        raise ValueError("fewer than 3 horizons with valid MSE")
    slope, intercept, r2 = fit_loglog_slope(usable)
    target = -_rate_exponent(cfg.order_k)
    medians = [s.median_abs_error for s in per_t if s.median_abs_error is not None]
    monotone = _median_monotone(medians)
    passed = abs(slope - target) <= RATE_SLOPE_TOL
    return StudyResult(
        kind="rate",
        config_hash=cfg.digest(),
        master_seed=cfg.master_seed,
        t_grid=list(cfg.t_grid),
        replicas=cfg.replicas,
        per_horizon=per_t,
        records=[r for t in sorted(records) for r in records[t]],
        failed_fraction=frac,
        runtime_seconds=time.perf_counter() - start,
        passed=passed,
        k_order=cfg.order_k,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        target_slope=target,
        slope_band=RATE_SLOPE_TOL,
        monotone_ok=monotone,
    )


def normality_study(cfg) -> StudyResult:
    """Bias-corrected, studentized errors against the standard normal."""
    if cfg.replicas < 100:
        raise ValueError("normality study needs at least 100 replicas")
    start = time.perf_counter()
    horizon = cfg.t_grid[-1]
    records = collect_records(cfg, [horizon], {horizon: cfg.replicas}, "component")
    frac = _guard_failures(records)
    ok = _ok(records[horizon])
    errors = [r.corrected_error for r in ok]
    mean, var, _ = _moments(errors)
    sd = math.sqrt(var * len(errors) / (len(errors) - 1))
    if sd == 0:
        raise ValueError("degenerate (zero-variance) error sample")
    z = [e / sd for e in errors]
    z_mean = math.fsum(z) / len(z)
    z_var = math.fsum((v - z_mean) ** 2 for v in z) / (len(z) - 1)
    z_sd = math.sqrt(z_var)
    skew = math.fsum((v - z_mean) ** 3 for v in z) / (len(z) * z_sd**3)
    d, p = ks_statistic(np.asarray(z))
    passed = (
        abs(z_mean) < NORMALITY_MEAN_TOL
        and NORMALITY_VAR_BAND[0] <= z_var <= NORMALITY_VAR_BAND[1]
        and p > KS_PASS_LEVEL
    )
    per_t = _component_stats(cfg, records)
    return StudyResult(
        kind="normality",
        config_hash=cfg.digest(),
        master_seed=cfg.master_seed,
        t_grid=[horizon],
        replicas=cfg.replicas,
        per_horizon=per_t,
        records=records[horizon],
        failed_fraction=frac,
        runtime_seconds=time.perf_counter() - start,
        passed=passed,
        k_order=cfg.order_k,
        mean=z_mean,
        variance=z_var,
        skewness=skew,
        ks_d=d,
        ks_p=p,
    )


def _estimate_a_from_stats(per_t: list[PerHorizonStats]) -> float:
    """Limsup surrogate: max scaled variance over the two largest horizons."""
    with_var = [s for s in per_t if s.variance is not None and s.n_ok >= 2]
    if len(with_var) < 2:
        raise ValueError("A estimation needs at least 2 horizons")
    top_two = sorted(with_var, key=lambda s: s.horizon)[-2:]
    if any(s.a_t is None or s.a_t <= 0 for s in top_two):
        raise ValueError("nonpositive scaled variance in A estimation")
    return math.sqrt(max(s.a_t for s in top_two))


def estimate_A(cfg) -> float:
    """Scale constant from the limsup of T^(2k/(2k+1)) * Var over horizons."""
    if len(cfg.t_grid) < 2:
        raise ValueError("A estimation needs at least 2 horizons")
    replicas = {t: max(cfg.replicas_for_a, 100) for t in cfg.t_grid}
    records = collect_records(cfg, cfg.t_grid, replicas, "component")
    _guard_failures(records)
    return _estimate_a_from_stats(_component_stats(cfg, records))


def coverage_study(cfg, alpha: float | None = None, beta: float | None = None) -> StudyResult:
    """Empirical coverage of the scaled asymptotic interval.

    Replicas at the largest horizon supply both the coverage frequency
    and that horizon's variance; the remaining horizons contribute the
    variances the scale constant A needs.
    """
    alpha = cfg.alpha if alpha is None else alpha
    beta = cfg.beta if beta is None else beta
    if not (0.0 < alpha < 0.5 < beta < 1.0):
        raise ValueError("need 0 < alpha < 0.5 < beta < 1")
    if len(cfg.t_grid) < 2:
        raise ValueError("coverage study needs at least 2 horizons for A")
    if cfg.replicas < 100:
        raise ValueError("coverage study needs at least 100 replicas")
    start = time.perf_counter()
    target_t = cfg.t_grid[-1]
    replicas = {t: max(cfg.replicas_for_a, 100) for t in cfg.t_grid}
    replicas[target_t] = cfg.replicas
    records = collect_records(cfg, cfg.t_grid, replicas, "component")
    frac = _guard_failures(records)
    per_t = _component_stats(cfg, records)
    a_value = _estimate_a_from_stats(per_t)

    expo = cfg.order_k / (2.0 * cfg.order_k + 1.0)
    scale = target_t**expo
    lo, hi = a_value * norm.ppf(alpha), a_value * norm.ppf(beta)
    ok = _ok(records[target_t])
    hits = [lo <= scale * r.corrected_error <= hi for r in ok]
    coverage = sum(hits) / len(hits)
    target = beta - alpha
    passed = coverage >= target - COVERAGE_SLACK
    return StudyResult(
        kind="coverage",
        config_hash=cfg.digest(),
        master_seed=cfg.master_seed,
        t_grid=list(cfg.t_grid),
        replicas=cfg.replicas,
        per_horizon=per_t,
        records=[r for t in sorted(records) for r in records[t]],
        failed_fraction=frac,
        runtime_seconds=time.perf_counter() - start,
        passed=passed,
        k_order=cfg.order_k,
        a_value=a_value,
        coverage=coverage,
        coverage_target=target,
        alpha=alpha,
        beta=beta,
    )


def density_rate_study(cfg) -> StudyResult:
    """Sup-norm density error rate against log(T / log T)."""
    if len(cfg.t_grid) < 3:
        raise ValueError("density rate study needs at least 3 horizons")
    start = time.perf_counter()
    records = collect_records(
        cfg, cfg.t_grid, {t: cfg.replicas for t in cfg.t_grid}, "density"
    )
    frac = _guard_failures(records)
    per_t = []
    points = []
    for t in sorted(records):
        ok = _ok(records[t])
        med = float(np.median([r.sup_density_error for r in ok]))
        per_t.append(
            PerHorizonStats(
                horizon=t,
                n_ok=len(ok),
                n_failed=len(records[t]) - len(ok),
                median_sup_density=med,
            )
        )
        points.append((t / math.log(t), med))
    slope, intercept, r2 = fit_loglog_slope(points)
    target = -cfg.order_kprime / (2.0 * cfg.order_kprime + cfg.dim)
    passed = abs(slope - target) <= DENSITY_SLOPE_TOL
    return StudyResult(
        kind="density-rate",
        config_hash=cfg.digest(),
        master_seed=cfg.master_seed,
        t_grid=list(cfg.t_grid),
        replicas=cfg.replicas,
        per_horizon=per_t,
        records=[r for t in sorted(records) for r in records[t]],
        failed_fraction=frac,
        runtime_seconds=time.perf_counter() - start,
        passed=passed,
        k_order=cfg.order_k,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        target_slope=target,
        slope_band=DENSITY_SLOPE_TOL,
    )


def mode_comparison_study(cfg) -> StudyResult:
    """Known-density vs estimated-density component estimates.

    The sup difference between the two component estimates must stay
    within a single fitted constant times the sup density error across
    horizons, and its median must decrease with the horizon.
    """
    if len(cfg.t_grid) < 2:
        raise ValueError("mode comparison needs at least 2 horizons")
    start = time.perf_counter()
    records = collect_records(
        cfg, cfg.t_grid, {t: cfg.replicas for t in cfg.t_grid}, "mode_compare"
    )
    frac = _guard_failures(records)
    per_t = []
    ratios = []
    for t in sorted(records):
        ok = _ok(records[t])
        med_diff = float(np.median([r.sup_component_diff for r in ok]))
        med_dens = float(np.median([r.sup_density_error for r in ok]))
        ratio = med_diff / med_dens
        ratios.append(ratio)
        per_t.append(
            PerHorizonStats(
                horizon=t,
                n_ok=len(ok),
                n_failed=len(records[t]) - len(ok),
                median_sup_density=med_dens,
                median_sup_diff=med_diff,
                ratio=ratio,
            )
        )
    fitted = max(ratios)
    spread_ok = fitted / min(ratios) <= MODE_RATIO_SPREAD
    diffs = [s.median_sup_diff for s in per_t]
    monotone = all(b < a for a, b in zip(diffs, diffs[1:]))
    passed = spread_ok and monotone
    return StudyResult(
        kind="mode-compare",
        config_hash=cfg.digest(),
        master_seed=cfg.master_seed,
        t_grid=list(cfg.t_grid),
        replicas=cfg.replicas,
        per_horizon=per_t,
        records=[r for t in sorted(records) for r in records[t]],
        failed_fraction=frac,
        runtime_seconds=time.perf_counter() - start,
        passed=passed,
        k_order=cfg.order_k,
        fitted_constant=fitted,
        ratios=ratios,
        monotone_ok=monotone,
    )


# ---------------------------------------------------------------------------
# Manufactured-data self-tests: exercise the aggregation and fit paths
# without any simulation.
# ---------------------------------------------------------------------------


def selftest_rate_slope() -> bool:
    """Errors proportional to T^-0.4 must recover slope -0.8 to 1e-2."""
    rng = np.random.default_rng(7)
    z = rng.standard_normal(200)
    points = []
    for t in (512.0, 1024.0, 2048.0, 4096.0):
        errors = t**-0.4 * z
        _, _, msq = _moments(errors.tolist())
        points.append((t, msq))
    slope, _, _ = fit_loglog_slope(points)
    exact = fit_loglog_slope([(t, t**-1.0) for t in (10.0, 100.0, 1000.0)])
    return abs(slope + 0.8) < 1e-2 and abs(exact[0] + 1.0) < 1e-12 and exact[2] > 1 - 1e-12


def selftest_ks() -> bool:
    """Calibration on synthetic data: normal passes, shifted fails."""
    n = 1000
    quantiles = norm.ppf(np.arange(1, n + 1) / (n + 1))
    d_quant, _ = ks_statistic(quantiles)
    rng = np.random.default_rng(11)
    _, p_normal = ks_statistic(rng.standard_normal(800))
    d_zeros, _ = ks_statistic(np.zeros(100))
    _, p_shift = ks_statistic(rng.standard_normal(500) + 3.0)
    return (
        d_quant < 0.01
        and p_normal > KS_PASS_LEVEL
        and abs(d_zeros - 0.5) < 1e-12
        and p_shift < 1e-6
    )


def selftest_coverage() -> bool:
    """N(0, A^2) samples hit the A-scaled interval at rate beta - alpha."""
    a_true, alpha, beta = 1.7, 0.05, 0.95
    rng = np.random.default_rng(13)
    sample = a_true * rng.standard_normal(4000)
    lo, hi = a_true * norm.ppf(alpha), a_true * norm.ppf(beta)
    coverage = float(np.mean((sample >= lo) & (sample <= hi)))
    return abs(coverage - (beta - alpha)) < 0.02


def selftest_estimate_a() -> bool:
    """Var = v * T^(-2k/(2k+1)) must give A = sqrt(v) up to MC error."""
    v, k = 2.5, 2
    expo = _rate_exponent(k)
    rng = np.random.default_rng(17)
    stats = []
    for t in (1024.0, 4096.0):
        errors = math.sqrt(v) * t ** (-expo / 2) * rng.standard_normal(4000)
        _, var, _ = _moments(errors.tolist())
        stats.append(
            PerHorizonStats(horizon=t, n_ok=4000, n_failed=0, variance=var, a_t=t**expo * var)
        )
    a_hat = _estimate_a_from_stats(stats)
    return abs(a_hat - math.sqrt(v)) < 0.1


def selftest_density_slope() -> bool:
    """Errors proportional to (log T / T)^q must recover slope -q."""
    q = 6.0 / 14.0
    points = []
    for t in (512.0, 2048.0, 8192.0, 32768.0):
        value = (math.log(t) / t) ** q
        points.append((t / math.log(t), value))
    slope, _, _ = fit_loglog_slope(points)
    return abs(slope + q) < 0.02


def run_selftests() -> dict[str, bool]:
    """All manufactured-data self-tests; every study path must pass."""
    return {
        "rate_slope": selftest_rate_slope(),
        "ks": selftest_ks(),
        "coverage": selftest_coverage(),
        "estimate_a": selftest_estimate_a(),
        "density_slope": selftest_density_slope(),
    }
