"""Command-line surface: simulate, estimate, components, study, selftest.

Exit codes: 0 success (and all study pass bands met), 2 configuration
error, 3 data/estimation error, 4 study ran but a pass band failed.
Every run writes a manifest (config hash, seed, versions, timings) next
to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    DEFAULT_CONFIG_TEXT,
    RunConfig,
    build_scenario,
    load_config,
)
from .estimators import (
    DensityEstimate,
    bandwidth_density,
    bandwidth_regression,
    make_regression_estimate,
)
from .additive import ComponentQuadrature, bias_term, true_component
from .process import (
    load_path_binary,
    load_path_csv,
    save_path_binary,
    save_path_csv,
    simulate_scenario,
    split_seed,
)
from .experiments import (
    StudyAbort,
    coverage_study,
    density_rate_study,
    mode_comparison_study,
    mse_rate_study,
    normality_study,
    run_selftests,
)
from .report import write_study_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STUDY_FAIL = 4

_STUDIES = {
    "rate": mse_rate_study,
    "normality": normality_study,
    "coverage": coverage_study,
    "density-rate": density_rate_study,
    "mode-compare": mode_comparison_study,
}


def _load(args) -> RunConfig:
    if args.config is None:
        from .config import parse_config_text

        return parse_config_text(DEFAULT_CONFIG_TEXT)
    if not os.path.exists(args.config):
        raise ConfigError([f"config file not found: {args.config}"])
    return load_config(args.config)


def _write_manifest(outdir: str, cfg: RunConfig, timings: dict) -> str:
    os.makedirs(outdir, exist_ok=True)
    manifest = {
        "config_hash": cfg.digest(),
        "master_seed": cfg.master_seed,
        "versions": {
            "margint": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "timings_seconds": timings,
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _print_bandwidths(cfg: RunConfig) -> None:
    scen = build_scenario(cfg)
    print(f"config hash: {cfg.digest()}")
    print("resolved bandwidths:")
    for t in cfg.t_grid:
        h_d = bandwidth_density(t, scen.schedule)
        h_r = bandwidth_regression(t, scen.schedule)
        print(f"  T={t:>10.0f}  h_T={h_d:.6f}  h_l,T={h_r:.6f}")


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        _print_bandwidths(cfg)
        return EXIT_OK
    scen = build_scenario(cfg)
    horizon = args.horizon if args.horizon else cfg.t_grid[-1]
    seed = split_seed(cfg.master_seed, 0)
    start = time.perf_counter()
    path = simulate_scenario(scen.process, scen.model, cfg.delta, horizon, seed)
    outdir = args.out_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    out = os.path.join(
        outdir, f"path_T{int(horizon)}.{ 'bin' if args.format == 'bin' else 'csv'}"
    )
    if args.format == "bin":
        save_path_binary(path, out)
    else:
        save_path_csv(path, out)
    _write_manifest(outdir, cfg, {"simulate": time.perf_counter() - start})
    print(f"wrote {out} ({path.n} samples, d={path.dim})")
    return EXIT_OK


def _load_path_file(filename: str):
    if filename.endswith(".bin"):
        return load_path_binary(filename)
    return load_path_csv(filename)


def _estimates_for(cfg: RunConfig, scen, path):
    horizon = path.horizon
    h_d = scen.schedule.density_bandwidth(horizon)
    h_r = scen.schedule.regression_bandwidth(horizon)
    known = cfg.density_mode == "known_f"
    de = DensityEstimate(
        path,
        scen.density_kernel,
        h_d,
        known_density=scen.true_density if known else None,
    )
    re = make_regression_estimate(
        path,
        scen.regression_kernels,
        (h_r,) * cfg.dim,
        mode=cfg.density_mode,
        density=de,
        psi=scen.model.psi,
        floor_factor=cfg.density_floor_factor,
        interp_grid=None if known else cfg.density_data_grid,
    )
    return de, re, h_r


def _cmd_estimate(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        _print_bandwidths(cfg)
        return EXIT_OK
    scen = build_scenario(cfg)
    path = _load_path_file(args.path_file)
    start = time.perf_counter()
    de, re, _ = _estimates_for(cfg, scen, path)
    axis = cfg.component_grid()
    mesh = np.meshgrid(*([axis] * cfg.dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    kernel_de = (
        de
        if de.known_density is None
        else DensityEstimate(path, scen.density_kernel, de.bandwidth)
    )
    f_vals = kernel_de.evaluate(pts)
    m_vals = re.evaluate(pts)
    outdir = args.out_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    out = os.path.join(outdir, "estimate.csv")
    with open(out, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.digest()}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x_{l + 1}" for l in range(cfg.dim)] + ["f_hat", "m_tilde"])
        for row, fv, mv in zip(pts, f_vals, m_vals):
            writer.writerow(list(row) + [repr(float(fv)), repr(float(mv))])
    _write_manifest(outdir, cfg, {"estimate": time.perf_counter() - start})
    print(f"wrote {out} ({pts.shape[0]} grid points)")
    return EXIT_OK


def _cmd_components(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        _print_bandwidths(cfg)
        return EXIT_OK
    scen = build_scenario(cfg)
    if args.path_file:
        path = _load_path_file(args.path_file)
    else:
        horizon = cfg.t_grid[-1]
        path = simulate_scenario(
            scen.process, scen.model, cfg.delta, horizon, split_seed(cfg.master_seed, 0)
        )
    start = time.perf_counter()
    _, re, h_r = _estimates_for(cfg, scen, path)
    grid = cfg.component_grid()
    outdir = args.out_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    outputs = []
    for l in range(cfg.dim):
        cq = ComponentQuadrature(
            path, scen.regression_kernels, re.bandwidths, scen.q, l, grid,
            cfg.quad_nodes,
        )
        est = cq.estimate(re.coeffs)
        truth = true_component(scen.model, scen.q.factors[l], l, grid)
        bias = bias_term(
            scen.model, scen.regression_kernels[l], scen.q.factors[l], l, grid, h_r
        )
        out = os.path.join(outdir, f"component_{l + 1}.csv")
        with open(out, "w", newline="") as fh:
            fh.write(f"# config_hash={cfg.digest()}\n")
            writer = csv.writer(fh)
            writer.writerow(
                [f"x_{l + 1}", "eta_hat", "eta_true", "bias_term", "error"]
            )
            for xv, ev, tv, bv in zip(grid, est.values, truth, bias.values):
                writer.writerow(
                    [xv, repr(float(ev)), repr(float(tv)), repr(float(bv)),
                     repr(float(ev - tv))]
                )
        outputs.append(out)
    _write_manifest(outdir, cfg, {"components": time.perf_counter() - start})
    print("wrote " + ", ".join(outputs))
    return EXIT_OK


def _cmd_study(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        _print_bandwidths(cfg)
        return EXIT_OK
    study = _STUDIES[args.kind]
    start = time.perf_counter()
    result = study(cfg)
    outdir = args.out_dir or cfg.output_dir
    written = write_study_outputs(result, outdir)
    _write_manifest(outdir, cfg, {args.kind: time.perf_counter() - start})
    status = "pass" if result.passed else "FAIL"
    print(f"{args.kind} study: {status}")
    for line in _summary_lines(result):
        print("  " + line)
    print("outputs: " + ", ".join(written))
    return EXIT_OK if result.passed else EXIT_STUDY_FAIL


def _summary_lines(result) -> list[str]:
    lines = []
    if result.slope is not None:
        lines.append(
            f"slope {result.slope:.4f} vs target {result.target_slope:.4f} "
            f"(band +/- {result.slope_band})  R2={result.r_squared:.4f}"
        )
    if result.ks_p is not None:
        lines.append(
            f"mean {result.mean:+.4f}  variance {result.variance:.4f}  "
            f"KS D={result.ks_d:.4f} p={result.ks_p:.4f}"
        )
    if result.coverage is not None:
        lines.append(
            f"coverage {result.coverage:.4f} target {result.coverage_target:.2f} "
            f"(slack 0.05)  A={result.a_value:.4f}"
        )
    if result.fitted_constant is not None:
        ratios = ", ".join(f"{r:.3f}" for r in result.ratios)
        lines.append(
            f"fitted constant {result.fitted_constant:.3f}  ratios [{ratios}]  "
            f"monotone={result.monotone_ok}"
        )
    lines.append(
        f"failed replicas: {result.failed_fraction:.2%}  "
        f"runtime {result.runtime_seconds:.1f}s"
    )
    return lines


def _cmd_selftest(args) -> int:
    start = time.perf_counter()
    results = run_selftests()
    for name, ok in results.items():
        print(f"  {name}: {'pass' if ok else 'FAIL'}")
    print(f"selftests finished in {time.perf_counter() - start:.2f}s")
    return EXIT_OK if all(results.values()) else EXIT_STUDY_FAIL


def _cmd_print_config(args) -> int:
    print(DEFAULT_CONFIG_TEXT, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="margint",
        description=(
            "Additive-component estimation by marginal integration on "
            "continuous-time sample paths, with Monte Carlo studies."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (dotted-key format)")
        p.add_argument("--out-dir", help="output directory (overrides config)")
        p.add_argument(
            "--dry-run",
            action="store_true",
            help="validate config and print resolved bandwidths, then exit",
        )

    p_sim = sub.add_parser("simulate", help="generate and save a sample path")
    common(p_sim)
    p_sim.add_argument("--horizon", type=float, help="horizon T (default: largest in grid)")
    p_sim.add_argument("--format", choices=("csv", "bin"), default="csv")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="density and regression on a grid")
    common(p_est)
    p_est.add_argument("--path-file", required=True, help="path CSV or binary")
    p_est.set_defaults(func=_cmd_estimate)

    p_comp = sub.add_parser("components", help="per-coordinate component estimates")
    common(p_comp)
    p_comp.add_argument("--path-file", help="path file (default: simulate)")
    p_comp.set_defaults(func=_cmd_components)

    p_study = sub.add_parser("study", help="Monte Carlo verification studies")
    p_study.add_argument("kind", choices=sorted(_STUDIES))
    common(p_study)
    p_study.set_defaults(func=_cmd_study)

    p_self = sub.add_parser("selftest", help="manufactured-data self-tests")
    p_self.set_defaults(func=_cmd_selftest)

    p_cfg = sub.add_parser("print-config", help="print the default config")
    p_cfg.set_defaults(func=_cmd_print_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyAbort as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
