"""Forward and backward propagation of the NNGP kernel through hidden layers.

The kernel of the first preactivations is affine in the input Gram matrix;
every hidden layer then maps the kernel through a bivariate Gaussian
expectation of the activation.  That expectation has closed forms for the
normalized ReLU (an arc-cosine kernel built from J1) and for the sinusoidal
activation cos x + sin x (an RBF-type exponential); any other activation is
handled by tensor Gauss-Hermite quadrature.

All step functions accept stacked kernels of shape (..., N, N) and apply the
map to each matrix in the stack, which is what the per-sample propagation in
the samplers and the Monte-Carlo likelihood needs.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateKernelError,
    DomainError,
    InvalidInputError,
)
from .params import NORMALIZED_RELU, SINUSOIDAL, Hyperparams, Nonlinearity

__all__ = [
    "j1",
    "j2",
    "j1_inverse",
    "j2_inverse",
    "linear_kernel",
    "relu_kernel_step",
    "relu_kernel_backstep",
    "sinusoidal_kernel_step",
    "generic_kernel_step",
    "nngp_kernel",
    "kernel_step",
    "sinusoidal_deep_fixed_point",
    "cholesky_with_jitter",
]

_DOMAIN_EPS = 1e-12


def _j1_raw(theta):
    return np.sin(theta) + (np.pi - theta) * np.cos(theta)


def _j2_raw(beta):
    c = np.cos(beta)
    return 3.0 * np.sin(beta) * c + (np.pi - beta) * (1.0 + 2.0 * c * c)


def _clip_to_interval(x, lo, hi, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < lo - _DOMAIN_EPS) or np.any(x > hi + _DOMAIN_EPS):
        raise DomainError(f"{name} must lie in [{lo:g}, {hi:g}]")
    return np.clip(x, lo, hi)


def j1(theta):
    """J1(theta) = sin(theta) + (pi - theta) cos(theta) on [0, pi].

    Strictly decreasing from J1(0) = pi to J1(pi) = 0.  Inputs within 1e-12
    of the boundary are clamped; anything further out raises DomainError.
    """
    t = _clip_to_interval(theta, 0.0, np.pi, "theta")
    out = _j1_raw(t)
    return out if out.ndim else float(out)


def j2(beta):
    """J2(beta) = 3 sin(beta) cos(beta) + (pi - beta)(1 + 2 cos^2(beta)).

    Strictly decreasing on [0, pi] with J2(0) = 3 pi and J2(pi) = 0.
    """
    b = _clip_to_interval(beta, 0.0, np.pi, "beta")
    out = _j2_raw(b)
    return out if out.ndim else float(out)


def _bisect_decreasing(f, target, lo, hi, tol, max_iter=200):
    """Vectorized bisection for f decreasing on [lo, hi]; |f(x) - target| < tol."""
    t = np.asarray(target, dtype=float)
    lo = np.full_like(t, lo)
    hi = np.full_like(t, hi)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val = f(mid)
        if np.all(np.abs(val - t) < tol):
            break
        above = val > t
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        mid = 0.5 * (lo + hi)
    return mid


def j1_inverse(value):
    """Inverse of J1 on [0, pi], by bisection to |J1(theta) - value| < 1e-13."""
    v = _clip_to_interval(value, 0.0, np.pi, "J1 value")
    out = _bisect_decreasing(_j1_raw, v, 0.0, np.pi, 1e-13)
    return out if out.ndim else float(out)


def j2_inverse(value):
    """Inverse of J2 on [0, pi], by bisection to |J2(beta) - value| < 1e-13."""
    v = _clip_to_interval(value, 0.0, 3.0 * np.pi, "J2 value")
    out = _bisect_decreasing(_j2_raw, v, 0.0, np.pi, 1e-13)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# kernel steps
# ---------------------------------------------------------------------------


def _check_finite(A, what):
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{what} contains non-finite entries")


def _diag(K):
    return np.diagonal(K, axis1=-2, axis2=-1)


def _symmetrize(K):
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def linear_kernel(X, h: Hyperparams) -> np.ndarray:
    """First-layer kernel v_b + v_w * X X^T for inputs X of shape (..., N, M)."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-2] < 1:
        raise InvalidInputError("X must be an (..., N, M) matrix with N >= 1")
    _check_finite(X, "input matrix")
    K = h.v_b + h.v_w * (X @ np.swapaxes(X, -1, -2))
    return _symmetrize(K)


def relu_kernel_step(K, h: Hyperparams) -> np.ndarray:
    """One hidden layer of normalized ReLU: the arc-cosine kernel map.

    K'[a,b] = v_b + v_w / pi * sqrt(K[a,a] K[b,b]) * J1(theta_ab) with
    theta_ab the angle implied by the correlation (clamped to [-1, 1]).
    """
    K = np.asarray(K, dtype=float)
    d = _diag(K)
    if np.any(d <= 0):
        raise DegenerateKernelError(
            "ReLU kernel step needs a strictly positive diagonal"
        )
    s = np.sqrt(d[..., :, None] * d[..., None, :])
    theta = np.arccos(np.clip(K / s, -1.0, 1.0))
    return h.v_b + (h.v_w / np.pi) * s * _j1_raw(theta)


def relu_kernel_backstep(K, h: Hyperparams) -> np.ndarray:
    """Invert :func:`relu_kernel_step`.

    Valid only on matrices in the image of the forward step: all diagonal
    entries must exceed v_b and the normalized off-diagonals must map into
    [0, pi] under t = pi (K[a,b] - v_b) / sqrt((K[a,a]-v_b)(K[b,b]-v_b)).
    J1 is inverted by bisection.
    """
    from .errors import NotInImageError

    K = np.asarray(K, dtype=float)
    d = _diag(K) - h.v_b
    if np.any(d <= 0):
        raise NotInImageError("diagonal entries must exceed v_b")
    p = np.sqrt(d[..., :, None] * d[..., None, :])
    t = np.pi * (K - h.v_b) / p
    if np.any(t < -_DOMAIN_EPS) or np.any(t > np.pi + _DOMAIN_EPS):
        raise NotInImageError("normalized entries leave the image of J1")
    theta = _bisect_decreasing(_j1_raw, np.clip(t, 0.0, np.pi), 0.0, np.pi, 1e-13)
    return (p / h.v_w) * np.cos(theta)


def sinusoidal_kernel_step(K, h: Hyperparams) -> np.ndarray:
    """One hidden layer of cos x + sin x: exponential (RBF-type) kernel map."""
    K = np.asarray(K, dtype=float)
    _check_finite(K, "kernel matrix")
    d = _diag(K)
    expo = -0.5 * (d[..., :, None] + d[..., None, :] - 2.0 * K)
    return h.v_b + h.v_w * np.exp(expo)


@lru_cache(maxsize=8)
def _hermgauss(order: int):
    x, w = np.polynomial.hermite.hermgauss(order)
    return x, w


def generic_kernel_step(K, h: Hyperparams, phi: Nonlinearity, order: int = 40):
    """One hidden layer for an arbitrary activation, by Gauss-Hermite quadrature.

    Each entry is v_b + v_w E[phi(z1) phi(z2)] under the bivariate normal
    given by the 2x2 restriction of K, evaluated on a tensor Gauss-Hermite
    grid of ``order`` nodes per dimension after a 2x2 Cholesky (diagonal
    entries reduce to a single 1D quadrature).

    Stacked inputs are handled one matrix at a time.
    """
    if order < 8:
        raise InvalidInputError("quadrature order must be >= 8")
    K = np.asarray(K, dtype=float)
    if K.ndim > 2:
        flat = K.reshape(-1, *K.shape[-2:])
        out = np.stack([generic_kernel_step(Ki, h, phi, order) for Ki in flat])
        return out.reshape(K.shape)

    x, w = _hermgauss(order)
    n = K.shape[0]
    d = _diag(K)
    out = np.empty_like(K)

    # diagonal: 1D expectation of phi(z)^2 with z ~ N(0, K[a,a])
    z = np.sqrt(2.0 * np.maximum(d, 0.0))[:, None] * x[None, :]
    out[np.arange(n), np.arange(n)] = h.v_b + h.v_w * (
        phi(z) ** 2 @ w
    ) / math.sqrt(math.pi)

    ww = np.outer(w, w) / math.pi
    for a in range(n):
        for b in range(a + 1, n):
            C = np.array([[K[a, a], K[a, b]], [K[a, b], K[b, b]]])
            L, _ = cholesky_with_jitter(C)
            z1 = math.sqrt(2.0) * L[0, 0] * x[:, None]
            z2 = math.sqrt(2.0) * (L[1, 0] * x[:, None] + L[1, 1] * x[None, :])
            val = h.v_b + h.v_w * float(np.sum(ww * phi(z1) * phi(z2)))
            out[a, b] = out[b, a] = val
    return out


def kernel_step(K, h: Hyperparams, phi: Nonlinearity, order: int = 40):
    """Dispatch one hidden-layer kernel step on the activation."""
    if phi.name == NORMALIZED_RELU.name:
        return relu_kernel_step(K, h)
    if phi.name == SINUSOIDAL.name:
        return sinusoidal_kernel_step(K, h)
    return generic_kernel_step(K, h, phi, order)


def nngp_kernel(X, depth: int, h: Hyperparams, phi: Nonlinearity, order: int = 40):
    """Kernel of the preactivations after ``depth`` hidden layers.

    ``depth = 0`` is the first-layer (linear) kernel; each additional hidden
    layer applies one step of the recursion.  X may be stacked (..., N, M).
    """
    if depth < 0:
        raise InvalidInputError("depth must be >= 0")
    K = linear_kernel(X, h)
    for _ in range(depth):
        K = kernel_step(K, h, phi, order)
    return K


def sinusoidal_deep_fixed_point(h: Hyperparams) -> tuple[float, float]:
    """Infinite-depth limit (v*, c*) of the sinusoidal kernel recursion.

    The common variance converges to v* = v_b + v_w.  The correlation
    converges to 1 when v_w < 1 and, when v_w > 1, to the unique fixed point
    c' in (0, 1) of f(c) = v_b/v* + (v_w/v*) exp(v* (c - 1)), found by
    bisection to |f(c) - c| < 1e-12.  Exactly at v_w = 1 the fixed-point
    structure is degenerate and PhaseBoundaryError is raised.
    """
    from .errors import PhaseBoundaryError

    v_star = h.v_b + h.v_w
    if h.v_w == 1.0:
        raise PhaseBoundaryError("fixed-point structure degenerate at v_w = 1")
    if h.v_w < 1.0:
        return v_star, 1.0

    def g(c):
        return h.v_b / v_star + (h.v_w / v_star) * np.exp(v_star * (c - 1.0)) - c

    # g > 0 at 0, g < 0 just below the unstable fixed point at 1
    lo, hi = 0.0, 1.0 - 1e-12
    c = 0.5 * (lo + hi)
    for _ in range(200):
        val = g(c)
        if abs(val) < 1e-12:
            break
        if val > 0:
            lo = c
        else:
            hi = c
        c = 0.5 * (lo + hi)
    return v_star, c


# ---------------------------------------------------------------------------
# Cholesky with the package-wide jitter policy
# ---------------------------------------------------------------------------

_JITTER_REL = 1e-8
_JITTER_RETRIES = 3


def cholesky_with_jitter(K) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor(s) of K, shape (..., N, N).

    Jitter is added only when the bare factorization fails: 1e-8 x mean
    diagonal, escalated by 10x up to 3 times, after which
    DegenerateKernelError is raised.  Returns (L, jitter_used); for stacked
    input the jitter is a per-matrix relative level applied stack-wide.
    """
    K = np.asarray(K, dtype=float)
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = np.mean(_diag(K), axis=-1)
    eye = np.eye(K.shape[-1])
    rel = _JITTER_REL
    for _ in range(_JITTER_RETRIES):
        jit = rel * scale
        try:
            L = np.linalg.cholesky(K + jit[..., None, None] * eye)
            return L, rel
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise DegenerateKernelError(
        f"Cholesky failed even with relative jitter {rel / 10.0:g}"
    )
