"""Run configuration: flat dotted-key text format, validation, scenarios.

The config document is plain ``key = value`` lines with dotted keys,
one setting per line; ``#`` starts a comment.  Validation reports every
violated constructive condition by its rule code (the hypothesis labels
the constraints come from), e.g. ``(F.2)`` for the kernel-order
inequality.  ``digest`` hashes the resolved configuration so outputs
can be stamped and reruns compared.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .kernels import Kernel1D, ProductKernel, make_base_kernel, raise_kernel_order
from .process import (
    AdditiveModelSpec,
    MixingProcessSpec,
    component_from_name,
)
from .estimators import BandwidthSchedule
from .additive import IntegrationDensity, make_integration_density

__all__ = [
    "RunConfig",
    "ConfigError",
    "Scenario",
    "parse_config_text",
    "validate_config",
    "load_config",
    "build_scenario",
    "DEFAULT_CONFIG_TEXT",
]

ENV_SEED = "MARGINT_SEED"
ENV_WORKERS = "MARGINT_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists rule-coded messages."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (plain data, hashable, picklable)."""

    scenario_name: str = "default"
    dim: int = 2
    theta: tuple[float, ...] = (1.0, 1.0)
    delta: float = 0.05
    mu: float = 1.0
    components: tuple[str, ...] = ("sin2pi", "linear")
    noise_half_width: float = 0.5
    kernel_base: str = "epanechnikov"
    order_k: int = 2
    order_kprime: int = 6
    c_prime: float = 0.13
    c1: float = 0.25
    domain_lower: float = 0.1
    domain_upper: float = 0.9
    domain_delta: float = 0.05
    q_support: tuple[tuple[float, float], ...] = ()
    grid_points: int = 33
    quad_nodes: int = 32
    density_mode: str = "known_f"
    density_floor_factor: float = 0.1
    density_data_grid: int = 64
    density_grid_points: int = 17
    t_grid: tuple[float, ...] = (512.0, 1024.0, 2048.0, 4096.0, 8192.0)
    replicas: int = 200
    replicas_for_a: int = 100
    coordinate: int = 0
    eval_point: float = 0.5
    bias_correction: bool = True
    alpha: float = 0.05
    beta: float = 0.95
    master_seed: int = 20260810
    workers: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if not self.q_support:
            object.__setattr__(
                self,
                "q_support",
                ((self.domain_lower, self.domain_upper),) * self.dim,
            )

    def component_grid(self) -> np.ndarray:
        return np.linspace(self.domain_lower, self.domain_upper, self.grid_points)

    def resolved_workers(self) -> int:
        env = os.environ.get(ENV_WORKERS)
        w = int(env) if env else self.workers
        if w <= 0:
            w = os.cpu_count() or 1
        return w

    def digest(self) -> str:
        payload = {f.name: getattr(self, f.name) for f in fields(self)}
        payload.pop("workers")  # parallelism must not change results
        payload.pop("output_dir")
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Scenario:
    """Built objects for one scenario: process, model, kernels, densities."""

    process: MixingProcessSpec
    model: AdditiveModelSpec
    q: IntegrationDensity
    schedule: BandwidthSchedule
    regression_kernels: tuple[Kernel1D, ...]
    density_kernel: ProductKernel
    true_density: Callable[[np.ndarray], np.ndarray]


_PARSERS: dict[str, Callable[[str], object]] = {}


def _split_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _split_strs(text: str) -> tuple[str, ...]:
    return tuple(text.replace(",", " ").split())


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"cannot parse boolean {text!r}")


# key in the document -> (field name, parser)
_KEY_MAP: dict[str, tuple[str, Callable[[str], object]]] = {
    "scenario.name": ("scenario_name", str),
    "process.dim": ("dim", int),
    "process.theta": ("theta", _split_floats),
    "process.delta": ("delta", float),
    "model.mu": ("mu", float),
    "model.components": ("components", _split_strs),
    "model.noise_half_width": ("noise_half_width", float),
    "kernel.base": ("kernel_base", str),
    "kernel.order_k": ("order_k", int),
    "kernel.order_kprime": ("order_kprime", int),
    "bandwidth.c_prime": ("c_prime", float),
    "bandwidth.c1": ("c1", float),
    "domain.lower": ("domain_lower", float),
    "domain.upper": ("domain_upper", float),
    "domain.delta": ("domain_delta", float),
    "integration.support": ("q_support", _split_floats),
    "grid.points": ("grid_points", int),
    "quadrature.nodes": ("quad_nodes", int),
    "density.mode": ("density_mode", str),
    "density.floor_factor": ("density_floor_factor", float),
    "density.data_grid": ("density_data_grid", int),
    "density.grid_points": ("density_grid_points", int),
    "study.t_grid": ("t_grid", _split_floats),
    "study.replicas": ("replicas", int),
    "study.replicas_for_a": ("replicas_for_a", int),
    "study.coordinate": ("coordinate", lambda s: int(s) - 1),
    "study.eval_point": ("eval_point", float),
    "study.bias_correction": ("bias_correction", _parse_bool),
    "study.alpha": ("alpha", float),
    "study.beta": ("beta", float),
    "seed.master": ("master_seed", int),
    "workers": ("workers", int),
    "output.dir": ("output_dir", str),
}

DEFAULT_CONFIG_TEXT = """\
# Default scenario: two covariates, one oscillating and one linear
# component over a uniform covariate law on the unit square.
scenario.name = default
process.dim = 2
process.theta = 1.0 1.0
process.delta = 0.05
model.mu = 1.0
model.components = sin2pi linear
model.noise_half_width = 0.5
kernel.base = epanechnikov
kernel.order_k = 2
kernel.order_kprime = 6
bandwidth.c_prime = 0.13
bandwidth.c1 = 0.25
domain.lower = 0.1
domain.upper = 0.9
domain.delta = 0.05
integration.support = 0.1 0.9
grid.points = 33
quadrature.nodes = 32
density.mode = known_f
study.t_grid = 512 1024 2048 4096 8192
study.replicas = 200
study.coordinate = 1
study.eval_point = 0.5
study.bias_correction = on
seed.master = 20260810
"""


def parse_config_text(text: str) -> RunConfig:
    """Parse a dotted-key document into a validated RunConfig."""
    overrides: dict[str, object] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_MAP:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        name, parser = _KEY_MAP[key]
        try:
            overrides[name] = parser(value)
        except ValueError as exc:
            errors.append(f"line {lineno}: bad value for {key}: {exc}")
    if errors:
        raise ConfigError(errors)

    if "q_support" in overrides:
        flat = overrides["q_support"]
        if len(flat) == 2:
            dim = overrides.get("dim", RunConfig.dim)
            overrides["q_support"] = ((flat[0], flat[1]),) * int(dim)
        elif len(flat) % 2 == 0:
            overrides["q_support"] = tuple(
                (flat[i], flat[i + 1]) for i in range(0, len(flat), 2)
            )
        else:
            raise ConfigError(["integration.support needs pairs of bounds"])

    env_seed = os.environ.get(ENV_SEED)
    if env_seed is not None:
        overrides["master_seed"] = int(env_seed)

    cfg = RunConfig(**overrides)
    return validate_config(cfg)


def validate_config(cfg: RunConfig) -> RunConfig:
    """Enforce the constructive conditions; report violations by rule code."""
    v: list[str] = []
    if cfg.dim < 1:
        v.append("dimension must be at least 1")
    if len(cfg.theta) != cfg.dim:
        v.append("process.theta needs one rate per coordinate")
    elif any(t <= 0 for t in cfg.theta):
        v.append("(A.1) mean-reversion rates must be positive for mixing")
    if cfg.delta <= 0:
        v.append("process.delta must be positive")
    if cfg.noise_half_width < 0:
        v.append("(C.1) noise half-width must be nonnegative (bounded response)")
    if len(cfg.components) != cfg.dim:
        v.append("model.components needs one entry per coordinate")
    if cfg.kernel_base not in ("epanechnikov", "quartic", "triweight"):
        v.append(f"(K.1) unknown kernel base {cfg.kernel_base!r}")
    if cfg.order_k < 2 or cfg.order_k % 2:
        v.append("(K.3) regression kernel order k must be even and >= 2")
    if cfg.order_kprime < 2 or cfg.order_kprime % 2:
        v.append("(K.4) density kernel order k' must be even and >= 2")
    if cfg.order_kprime <= cfg.order_k * cfg.dim:
        v.append(
            f"(F.2) density kernel order k' must exceed k*d "
            f"(k'={cfg.order_kprime}, k*d={cfg.order_k * cfg.dim})"
        )
    if cfg.c_prime <= 0:
        v.append("(H.1) bandwidth constant c' must be positive")
    if cfg.c1 <= 0:
        v.append("(H.2) bandwidth constant c1 must be positive")
    if not (0.0 < cfg.domain_lower < cfg.domain_upper < 1.0):
        v.append("evaluation domain must satisfy 0 < lower < upper < 1")
    if cfg.domain_delta <= 0 or (
        cfg.domain_lower - cfg.domain_delta <= 0.0
        or cfg.domain_upper + cfg.domain_delta >= 1.0
    ):
        v.append(
            "(F.1) the delta-neighborhood of the domain must stay inside "
            "the open unit cube where the density is positive"
        )
    for l, (lo, hi) in enumerate(cfg.q_support):
        if not (cfg.domain_lower <= lo < hi <= cfg.domain_upper):
            v.append(
                f"(Q.1) integration support [{lo}, {hi}] for coordinate "
                f"{l + 1} must lie inside [{cfg.domain_lower}, {cfg.domain_upper}]"
            )
    if cfg.grid_points < 2:
        v.append("grid.points must be at least 2")
    if cfg.quad_nodes < 16:
        v.append("quadrature.nodes must be at least 16")
    if cfg.density_mode not in ("known_f", "estimated_f"):
        v.append("density.mode must be known_f or estimated_f")
    if len(cfg.t_grid) < 1 or any(
        b <= a for a, b in zip(cfg.t_grid, cfg.t_grid[1:])
    ):
        v.append("study.t_grid must be strictly increasing")
    if any(t <= 1 for t in cfg.t_grid):
        v.append("(H.1) horizons must exceed 1")
    if cfg.replicas < 1:
        v.append("study.replicas must be positive")
    if not 0 <= cfg.coordinate < cfg.dim:
        v.append("study.coordinate out of range")
    if not (cfg.domain_lower <= cfg.eval_point <= cfg.domain_upper):
        v.append("study.eval_point must lie in the evaluation domain")
    if not (0.0 < cfg.alpha < 0.5 < cfg.beta < 1.0):
        v.append("need 0 < alpha < 0.5 < beta < 1")
    if v:
        raise ConfigError(v)
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def build_scenario(cfg: RunConfig) -> Scenario:
    """Instantiate process, model, kernels and integration densities."""
    process = MixingProcessSpec(dim=cfg.dim, theta=cfg.theta)
    model = AdditiveModelSpec(
        mu=cfg.mu,
        components=tuple(component_from_name(n) for n in cfg.components),
        noise_half_width=cfg.noise_half_width,
    )
    base = make_base_kernel(cfg.kernel_base)
    k_reg = raise_kernel_order(base, cfg.order_k)
    k_dens = raise_kernel_order(base, cfg.order_kprime)
    schedule = BandwidthSchedule(
        c_prime=cfg.c_prime,
        c1=cfg.c1,
        k=cfg.order_k,
        k_prime=cfg.order_kprime,
        dim=cfg.dim,
    )
    q = IntegrationDensity(
        factors=tuple(
            make_integration_density(
                interval, cfg.order_k, domain=(cfg.domain_lower, cfg.domain_upper)
            )
            for interval in cfg.q_support
        )
    )

    def uniform_density(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.all((pts > 0.0) & (pts < 1.0), axis=1)
        return np.where(inside, 1.0, 0.0)

    return Scenario(
        process=process,
        model=model,
        q=q,
        schedule=schedule,
        regression_kernels=(k_reg,) * cfg.dim,
        density_kernel=ProductKernel(factors=(k_dens,) * cfg.dim),
        true_density=uniform_density,
    )
