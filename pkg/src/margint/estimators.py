"""Density and internal-weight regression estimators on sample paths.

All time integrals are Riemann sums at the path's step: the density
estimate is (delta / (T h^d)) * sum_i K((x - X_i) / h) and the
regression estimate divides each datum's product-kernel weight by the
density at that datum (the internal form), either the known density or
the kernel estimate floored away from zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .kernels import Kernel1D, ProductKernel
from .process import SamplePath

__all__ = [
    "BandwidthSchedule",
    "DensityEstimate",
    "RegressionEstimate",
    "bandwidth_density",
    "bandwidth_regression",
    "estimate_density",
    "estimate_regression",
    "precompute_internal_densities",
    "density_on_grid",
    "make_regression_estimate",
]

# Data chunk length for kernel-weight accumulation; bounds peak memory.
CHUNK = 65536

DEFAULT_FLOOR_FACTOR = 0.1
MIN_DENSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class BandwidthSchedule:
    """Bandwidth laws for density (slow, log-corrected) and regression.

    The density kernel order must exceed the regression order times the
    dimension so the density error never dominates the component rate.
    """

    c_prime: float
    c1: float
    k: int
    k_prime: int
    dim: int

    def __post_init__(self):
        if self.c_prime <= 0 or self.c1 <= 0:
            raise ValueError("bandwidth constants must be positive")
        if self.k_prime <= self.k * self.dim:
            raise ValueError("density kernel order k' must exceed k*d")

    def density_bandwidth(self, horizon: float) -> float:
        return bandwidth_density(horizon, self)

    def regression_bandwidth(self, horizon: float) -> float:
        return bandwidth_regression(horizon, self)


def bandwidth_density(horizon: float, sched: BandwidthSchedule) -> float:
    """c' * (log T / T)^(1 / (2k' + d))."""
    if horizon <= 1.0:
        raise ValueError("horizon must exceed 1 for the density bandwidth")
    expo = 1.0 / (2 * sched.k_prime + sched.dim)
    return sched.c_prime * (math.log(horizon) / horizon) ** expo


def bandwidth_regression(horizon: float, sched: BandwidthSchedule) -> float:
    """c1 * T^(-1 / (2k + 1))."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return sched.c1 * horizon ** (-1.0 / (2 * sched.k + 1))


def _chunks(n: int, size: int = CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def cp_contract(
    weight_fns: list[Callable[[slice], np.ndarray]],
    coeff_fn: Callable[[slice], np.ndarray],
    n: int,
    shape: tuple[int, ...],
    chunk: int = CHUNK,
) -> np.ndarray:
    """Sum over data of coeff_i * prod_l W_l[:, i] on a tensor grid.

    ``weight_fns[l](sl)`` returns the (shape[l], len(sl)) weight block for
    data slice ``sl``; the result has the tensor shape of the evaluation
    axes.  Memory is bounded by chunking the data index.
    """
    d = len(weight_fns)
    out = np.zeros(shape)
    if d == 2:
        for sl in _chunks(n, chunk):
            w0 = weight_fns[0](sl) * coeff_fn(sl)[None, :]
            out += w0 @ weight_fns[1](sl).T
        return out
    if d == 1:
        for sl in _chunks(n, chunk):
            out += weight_fns[0](sl) @ coeff_fn(sl)
        return out
    # General case: build the outer product cumulatively per chunk.  The
    # chunk length shrinks with the grid size to bound the intermediate.
    budget = max(1, int(2**22 / max(1, np.prod(shape))))
    for sl in _chunks(n, min(chunk, budget)):
        t = weight_fns[0](sl) * coeff_fn(sl)[None, :]
        for l in range(1, d):
            t = t[..., None, :] * weight_fns[l](sl)
        out += t.sum(axis=-1)
    return out


@dataclass
class DensityEstimate:
    """Kernel density estimate of the covariate law along a path.

    Higher-order kernels may take negative values, so the estimate is
    not guaranteed nonnegative.  When ``known_density`` is set the
    object evaluates the true density instead (the known-f mode).
    """

    path: SamplePath
    kernel: ProductKernel
    bandwidth: float
    known_density: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.path.n == 0:
            raise ValueError("empty path")
        if self.kernel.dim != self.path.dim:
            raise ValueError("kernel dimension does not match the path")

    @property
    def _scale(self) -> float:
        return self.path.delta / (self.path.horizon * self.bandwidth**self.path.dim)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return estimate_density(self, points)

    def evaluate_grid(self, axes: list[np.ndarray]) -> np.ndarray:
        return density_on_grid(self, axes)


def estimate_density(de: DensityEstimate, points: np.ndarray) -> np.ndarray:
    """Evaluate the density estimate at points of shape (m, d) or (d,)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    if de.known_density is not None:
        vals = np.asarray(de.known_density(pts), dtype=float)
        return float(vals[0]) if single else vals

    x = de.path.x
    out = np.zeros(pts.shape[0])
    for sl in _chunks(de.path.n):
        w = np.ones((pts.shape[0], sl.stop - sl.start))
        for l, factor in enumerate(de.kernel.factors):
            u = (pts[:, l : l + 1] - x[sl, l][None, :]) / de.bandwidth
            w *= factor(u)
        out += w.sum(axis=1)
    out *= de._scale
    return float(out[0]) if single else out


def density_on_grid(de: DensityEstimate, axes: list[np.ndarray]) -> np.ndarray:
    """Density estimate on a tensor grid, exploiting the product form."""
    if de.known_density is not None:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return np.asarray(de.known_density(pts), dtype=float).reshape(
            [len(a) for a in axes]
        )
    x = de.path.x
    h = de.bandwidth
    fns = [
        (lambda sl, l=l, ax=np.asarray(ax, dtype=float): de.kernel.factors[l](
            (ax[:, None] - x[sl, l][None, :]) / h
        ))
        for l, ax in enumerate(axes)
    ]
    coeff = lambda sl: np.full(sl.stop - sl.start, de._scale)
    return cp_contract(fns, coeff, de.path.n, tuple(len(a) for a in axes))


@dataclass
class RegressionEstimate:
    """Internal-weight regression estimate along a path.

    ``internal_density`` holds the per-datum density values used in the
    weights (floored in estimated mode); ``coeffs`` caches
    delta/T * psi(Y_i) / internal_density_i, the only per-datum quantity
    the evaluations need.
    """

    path: SamplePath
    kernels: tuple[Kernel1D, ...]
    bandwidths: tuple[float, ...]
    mode: str
    internal_density: np.ndarray
    floored_fraction: float = 0.0
    psi: Callable[[np.ndarray], np.ndarray] | None = None
    coeffs: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.mode not in ("known_f", "estimated_f"):
            raise ValueError("mode must be 'known_f' or 'estimated_f'")
        if len(self.kernels) != self.path.dim:
            raise ValueError("need one kernel per coordinate")
        if len(self.bandwidths) != self.path.dim:
            raise ValueError("need one bandwidth per coordinate")
        psi_y = self.path.y if self.psi is None else self.psi(self.path.y)
        scale = self.path.delta / self.path.horizon
        self.coeffs = scale * psi_y / self.internal_density

    @property
    def dim(self) -> int:
        return self.path.dim

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return estimate_regression(self, points)


def precompute_internal_densities(
    path: SamplePath,
    de: DensityEstimate,
    floor_factor: float = DEFAULT_FLOOR_FACTOR,
    floor_grid: list[np.ndarray] | None = None,
    interp_grid: int | None = None,
) -> tuple[np.ndarray, float, float]:
    """Density values at every datum (leave-self-in) with a floor.

    Returns (floored values, floor used, floored fraction).  The floor
    defaults to ``floor_factor`` times the minimum of the estimate over
    ``floor_grid`` (higher-order kernels can dip negative, so the floor
    is clipped below at a small positive constant).

    With ``interp_grid`` set, the estimate is computed on a tensor grid
    of that many nodes per axis covering [0, 1] and evaluated at the
    data by multilinear interpolation; exact summation over all pairs is
    the default and is quadratic in the path length.
    """
    if de.known_density is not None:
        vals = np.asarray(de.known_density(path.x), dtype=float)
        return vals, 0.0, 0.0

    if interp_grid is not None:
        axes = [np.linspace(0.0, 1.0, int(interp_grid)) for _ in range(path.dim)]
        table = density_on_grid(de, axes)
        interp = RegularGridInterpolator(axes, table, method="linear")
        vals = interp(path.x)
    else:
        vals = estimate_density(de, path.x)

    if floor_grid is None:
        floor_grid = [np.linspace(0.2, 0.8, 5) for _ in range(path.dim)]
    grid_min = float(density_on_grid(de, floor_grid).min())
    floor = max(floor_factor * grid_min, MIN_DENSITY_FLOOR)

    floored = np.maximum(vals, floor)
    fraction = float(np.mean(vals < floor))
    return floored, floor, fraction


def make_regression_estimate(
    path: SamplePath,
    kernels: tuple[Kernel1D, ...],
    bandwidths: tuple[float, ...],
    mode: str = "known_f",
    density: DensityEstimate | None = None,
    psi: Callable[[np.ndarray], np.ndarray] | None = None,
    floor_factor: float = DEFAULT_FLOOR_FACTOR,
    interp_grid: int | None = None,
) -> RegressionEstimate:
    """Assemble a RegressionEstimate, precomputing internal densities."""
    if density is None:
        raise ValueError("a DensityEstimate (known or kernel) is required")
    if mode == "known_f" and density.known_density is None:
        raise ValueError("known_f mode needs a density with known_density set")
    internal, _, fraction = precompute_internal_densities(
        path, density, floor_factor=floor_factor, interp_grid=interp_grid
    )
    return RegressionEstimate(
        path=path,
        kernels=kernels,
        bandwidths=bandwidths,
        mode=mode,
        internal_density=internal,
        floored_fraction=fraction,
        psi=psi,
    )


def estimate_regression(re: RegressionEstimate, points: np.ndarray) -> np.ndarray:
    """Evaluate the regression estimate at points of shape (m, d) or (d,).

    Points with no datum inside the product-kernel support evaluate to
    NaN (undefined) rather than zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    if re.path.n == 0:
        raise ValueError("empty path")

    out = np.zeros(pts.shape[0])
    covered = np.zeros(pts.shape[0], dtype=bool)
    for sl in _chunks(re.path.n):
        w = np.ones((pts.shape[0], sl.stop - sl.start))
        inside = np.ones_like(w, dtype=bool)
        for l in range(re.dim):
            u = (pts[:, l : l + 1] - re.path.x[sl, l][None, :]) / re.bandwidths[l]
            w *= re.kernels[l](u)
            inside &= np.abs(u) <= re.kernels[l].support
        w /= np.prod(re.bandwidths)
        out += w @ re.coeffs[sl]
        covered |= inside.any(axis=1)
    out[~covered] = np.nan
    return float(out[0]) if single else out
