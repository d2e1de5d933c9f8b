"""Study reports: JSON result document, CSVs, and rendered figures.

Every output file embeds the configuration hash: CSVs carry it in a
leading comment line, JSON as a field, figures in their PNG metadata
and caption.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import StudyResult

__all__ = ["write_study_outputs"]


def write_study_outputs(result: StudyResult, outdir: str) -> list[str]:
    """Write result.json, raw_errors.csv, series.csv and figures.

    Returns the list of paths written.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []

    path = os.path.join(outdir, "result.json")
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, default=_json_default)
        fh.write("\n")
    written.append(path)

    written.append(_write_raw_errors(result, outdir))
    written.append(_write_series(result, outdir))
    written.extend(_write_figures(result, outdir))
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_raw_errors(result: StudyResult, outdir: str) -> str:
    path = os.path.join(outdir, "raw_errors.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={result.config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "horizon",
                "replica",
                "seed",
                "error",
                "corrected_error",
                "bias_value",
                "sup_density_error",
                "sup_component_diff",
                "failed",
            ]
        )
        for r in result.records:
            writer.writerow(
                [
                    r.horizon,
                    r.index,
                    r.seed,
                    _fmt(r.error),
                    _fmt(r.corrected_error),
                    _fmt(r.bias_value),
                    _fmt(r.sup_density_error),
                    _fmt(r.sup_component_diff),
                    int(r.failed),
                ]
            )
    return path


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _write_series(result: StudyResult, outdir: str) -> str:
    """Plot-ready per-horizon series."""
    path = os.path.join(outdir, "series.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={result.config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "horizon",
                "n_ok",
                "n_failed",
                "mse",
                "bias",
                "variance",
                "scaled_variance",
                "median_abs_error",
                "median_sup_density",
                "median_sup_diff",
                "ratio",
            ]
        )
        for s in result.per_horizon:
            writer.writerow(
                [
                    s.horizon,
                    s.n_ok,
                    s.n_failed,
                    _fmt(s.mse),
                    _fmt(s.bias),
                    _fmt(s.variance),
                    _fmt(s.a_t),
                    _fmt(s.median_abs_error),
                    _fmt(s.median_sup_density),
                    _fmt(s.median_sup_diff),
                    _fmt(s.ratio),
                ]
            )
    return path


def _save(fig, result: StudyResult, outdir: str, name: str) -> str:
    path = os.path.join(outdir, name)
    fig.savefig(
        path,
        dpi=130,
        metadata={"Description": f"config_hash={result.config_hash}"},
    )
    plt.close(fig)
    return path


def _loglog_rate_figure(result, values, ylabel, name, outdir, log_correction=False):
    t = np.array([s.horizon for s in result.per_horizon], dtype=float)
    v = np.asarray(values, dtype=float)
    x = t / np.log(t) if log_correction else t
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.loglog(x, v, "o", label="measured")
    if result.slope is not None:
        fit = np.exp(result.intercept) * x**result.slope
        ax.loglog(x, fit, "-", label=f"fit slope {result.slope:.3f}")
        anchor = v[0] * (x / x[0]) ** result.target_slope
        ax.loglog(
            x, anchor, "--", color="gray",
            label=f"target slope {result.target_slope:.3f}",
        )
    ax.set_xlabel("T / log T" if log_correction else "horizon T")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.set_title(
        f"{result.kind} study  [{'pass' if result.passed else 'FAIL'}]  "
        f"config {result.config_hash}",
        fontsize=9,
    )
    fig.tight_layout()
    return _save(fig, result, outdir, name)


def _write_figures(result: StudyResult, outdir: str) -> list[str]:
    figs = []
    if result.kind == "rate":
        figs.append(
            _loglog_rate_figure(
                result,
                [s.mse for s in result.per_horizon],
                "MSE of component estimate",
                "rate_mse.png",
                outdir,
            )
        )
    elif result.kind == "density-rate":
        figs.append(
            _loglog_rate_figure(
                result,
                [s.median_sup_density for s in result.per_horizon],
                "median sup density error",
                "density_rate.png",
                outdir,
                log_correction=True,
            )
        )
    elif result.kind == "normality":
        errors = [r.corrected_error for r in result.records if not r.failed]
        sd = float(np.std(errors, ddof=1))
        z = np.asarray(errors) / sd
        fig, ax = plt.subplots(figsize=(6, 4.2))
        ax.hist(z, bins=30, density=True, alpha=0.6, label="studentized errors")
        grid = np.linspace(-4, 4, 400)
        ax.plot(
            grid,
            np.exp(-0.5 * grid**2) / math.sqrt(2 * math.pi),
            "-",
            label="standard normal",
        )
        ax.set_xlabel("studentized error")
        ax.set_ylabel("density")
        ax.legend(fontsize=8)
        ax.set_title(
            f"normality study  KS p={result.ks_p:.3f}  "
            f"[{'pass' if result.passed else 'FAIL'}]  config {result.config_hash}",
            fontsize=9,
        )
        fig.tight_layout()
        figs.append(_save(fig, result, outdir, "normality_hist.png"))
    elif result.kind == "coverage":
        from scipy.stats import norm

        target_t = result.t_grid[-1]
        scaled = [
            r.corrected_error
            for r in result.records
            if r.horizon == target_t and not r.failed
        ]
        lo = result.a_value * norm.ppf(result.alpha)
        hi = result.a_value * norm.ppf(result.beta)
        z = np.asarray(scaled)
        fig, ax = plt.subplots(figsize=(6, 4.2))
        k = result.k_order
        t_scale = target_t ** (k / (2.0 * k + 1.0))
        ax.hist(t_scale * z, bins=30, alpha=0.6, label="scaled errors")
        ax.axvline(lo, color="k", linestyle="--", label="interval")
        ax.axvline(hi, color="k", linestyle="--")
        ax.set_xlabel("scaled bias-corrected error")
        ax.set_ylabel("count")
        ax.legend(fontsize=8)
        ax.set_title(
            f"coverage {result.coverage:.3f} (target >= "
            f"{result.coverage_target - 0.05:.2f})  "
            f"[{'pass' if result.passed else 'FAIL'}]  config {result.config_hash}",
            fontsize=9,
        )
        fig.tight_layout()
        figs.append(_save(fig, result, outdir, "coverage_hist.png"))
    elif result.kind == "mode-compare":
        t = [s.horizon for s in result.per_horizon]
        fig, ax = plt.subplots(figsize=(6, 4.2))
        ax.loglog(
            t, [s.median_sup_diff for s in result.per_horizon], "o-",
            label="median sup |known-f vs estimated-f|",
        )
        ax.loglog(
            t, [s.median_sup_density for s in result.per_horizon], "s-",
            label="median sup density error",
        )
        ax.set_xlabel("horizon T")
        ax.set_ylabel("sup error")
        ax.legend(fontsize=8)
        ax.set_title(
            f"mode comparison  C={result.fitted_constant:.2f}  "
            f"[{'pass' if result.passed else 'FAIL'}]  config {result.config_hash}",
            fontsize=9,
        )
        fig.tight_layout()
        figs.append(_save(fig, result, outdir, "mode_compare.png"))
    return figs
