"""Compactly supported polynomial kernels of arbitrary even order.

All kernels here are polynomials restricted to a symmetric interval
[-s, s].  Higher even orders are obtained by multiplying a base kernel
with an even polynomial chosen so that the intermediate moments vanish,
which preserves both the compact support and continuity of the base.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import roots_legendre

__all__ = [
    "Kernel1D",
    "ProductKernel",
    "make_base_kernel",
    "raise_kernel_order",
    "kernel_moment",
    "eval_product",
    "BASE_KERNELS",
]

# Gauss-Legendre resolution used for cached moments.  Far beyond the
# polynomial exactness requirement of any kernel built here.
QUAD_NODES = 200

# Base kernel polynomials on [-1, 1], ascending coefficient order.
BASE_KERNELS = {
    "epanechnikov": (0.75, 0.0, -0.75),
    "quartic": (15 / 16, 0.0, -2 * 15 / 16, 0.0, 15 / 16),
    "triweight": (35 / 32, 0.0, -3 * 35 / 32, 0.0, 3 * 35 / 32, 0.0, -35 / 32),
}


def _legendre_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = roots_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class Kernel1D:
    """Polynomial kernel on [-support, support] with a declared even order.

    ``coeffs`` are ascending polynomial coefficients; evaluation is zero
    outside the support.  ``moments[j]`` caches the j-th moment
    integral of u^j * K(u) for j = 0..order, computed once with
    Gauss-Legendre quadrature.
    """

    coeffs: tuple[float, ...]
    support: float
    order: int
    name: str = "kernel"
    moments: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.support <= 0:
            raise ValueError("support half-width must be positive")
        if self.order < 2 or self.order % 2 != 0:
            raise ValueError("kernel order must be an even integer >= 2")
        if not self.moments:
            nodes, weights = _legendre_nodes(-self.support, self.support, QUAD_NODES)
            vals = npoly.polyval(nodes, self.coeffs)
            moms = tuple(
                float(np.dot(weights, nodes**j * vals)) for j in range(self.order + 1)
            )
            object.__setattr__(self, "moments", moms)

    def __call__(self, u) -> np.ndarray | float:
        u_arr = np.asarray(u, dtype=float)
        out = npoly.polyval(u_arr, self.coeffs)
        out = np.where(np.abs(u_arr) <= self.support, out, 0.0)
        if np.isscalar(u) or u_arr.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class ProductKernel:
    """Product of per-coordinate kernels of a common order."""

    factors: tuple[Kernel1D, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("product kernel needs at least one factor")
        orders = {k.order for k in self.factors}
        if len(orders) != 1:
            raise ValueError("all factors must share the same order")

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def order(self) -> int:
        return self.factors[0].order

    def __call__(self, u) -> np.ndarray | float:
        return eval_product(self, u)


def make_base_kernel(name: str) -> Kernel1D:
    """Order-2 symmetric kernel on [-1, 1] integrating to one."""
    try:
        coeffs = BASE_KERNELS[name]
    except KeyError:
        raise ValueError(
            f"unknown base kernel {name!r}; choose from {sorted(BASE_KERNELS)}"
        ) from None
    return Kernel1D(coeffs=coeffs, support=1.0, order=2, name=name)


def raise_kernel_order(base: Kernel1D, target_order: int) -> Kernel1D:
    """Build a kernel of exactly ``target_order`` from an order-2 base.

    The result is Q(u) * base(u) where Q is the unique even polynomial
    of degree target_order - 2 that zeroes the moments 2..target_order-2
    while keeping the mass at one.  Support and continuity carry over
    from the base.
    """
    if target_order < 2 or target_order % 2 != 0:
        raise ValueError("target order must be an even integer >= 2")
    if base.order != 2:
        raise ValueError("base kernel must have order 2")
    if target_order == 2:
        return base

    m = target_order // 2  # unknown even coefficients of Q
    nodes, weights = _legendre_nodes(-base.support, base.support, QUAD_NODES)
    base_vals = npoly.polyval(nodes, base.coeffs)
    # System: for i = 0..m-1, sum_j a_j * int u^(2i+2j) K(u) du = [i == 0]
    even_moms = np.array(
        [np.dot(weights, nodes ** (2 * i) * base_vals) for i in range(2 * m - 1)]
    )
    system = np.array([[even_moms[i + j] for j in range(m)] for i in range(m)])
    rhs = np.zeros(m)
    rhs[0] = 1.0
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate base kernel: singular moment system") from exc

    q_coeffs = np.zeros(2 * m - 1)
    q_coeffs[::2] = sol
    coeffs = tuple(float(c) for c in npoly.polymul(q_coeffs, base.coeffs))
    return Kernel1D(
        coeffs=coeffs,
        support=base.support,
        order=target_order,
        name=f"{base.name}_o{target_order}",
    )


def kernel_moment(kern: Kernel1D, j: int) -> float:
    """Moment integral of u^j * K(u) over the support (Gauss-Legendre)."""
    if j < 0:
        raise ValueError("moment index must be nonnegative")
    if j <= kern.order:
        return kern.moments[j]
    nodes, weights = _legendre_nodes(-kern.support, kern.support, QUAD_NODES)
    return float(np.dot(weights, nodes**j * npoly.polyval(nodes, kern.coeffs)))


def eval_product(kern: ProductKernel, u) -> np.ndarray | float:
    """Evaluate a product kernel at points of shape (..., d)."""
    u_arr = np.atleast_2d(np.asarray(u, dtype=float))
    if u_arr.shape[-1] != kern.dim:
        raise ValueError(
            f"dimension mismatch: kernel is {kern.dim}-variate, "
            f"points have {u_arr.shape[-1]} coordinates"
        )
    out = np.ones(u_arr.shape[:-1])
    for l, factor in enumerate(kern.factors):
        out *= factor(u_arr[..., l])
    if np.asarray(u).ndim == 1:
        return float(out[0])
    return out


def product_kernel(base_name: str, order: int, dim: int) -> ProductKernel:
    """d-variate product of identical 1-D kernels of the given order."""
    k1 = raise_kernel_order(make_base_kernel(base_name), order)
    return ProductKernel(factors=(k1,) * dim)
