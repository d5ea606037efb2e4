"""Marginal log-likelihood of single-bottleneck networks.

The density of the targets under a single-bottleneck prior is a Gaussian
mixture over bottleneck preactivations: draw an N x H matrix of preactivations
from the pre-bottleneck kernel, push the scaled activations through the
post-bottleneck kernel recursion, and average the resulting Gaussian
densities.  The Monte-Carlo estimator here uses the local reparameterization
trick (preactivations are a fixed linear transform of standard normals), which
makes the estimate differentiable in the variance hyperparameters with the
noise held fixed.  Gradients are propagated analytically in forward mode
through the kernel recursion, the Cholesky factor, the activation, the
Gaussian log-density, and the log-mean-exp; a central finite-difference path
with common random numbers is available as an independent check.

Hyperparameter gradients are always taken with respect to
(log v_b, log v_w, log v_n), which keeps the variances positive during
optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .params import NORMALIZED_RELU, SINUSOIDAL, Hyperparams, Nonlinearity
from .rng import child_rng, map_blocks

__all__ = [
    "MllEstimate",
    "gaussian_logpdf",
    "mll_no_bottleneck",
    "mll_no_bottleneck_gradient",
    "mll_single_bottleneck",
    "mll_gradient",
    "logmeanexp",
]

_LOG2PI = math.log(2.0 * math.pi)

# Target number of array elements per Monte-Carlo block; the block size is a
# function of (N, H) only, never of thread count, so streams are reproducible.
_MC_BLOCK_VALUES = 1 << 20

# spawn-key namespace for the MC noise stream
_NS_NOISE = 7


@dataclass(frozen=True)
class MllEstimate:
    """Monte-Carlo marginal log-likelihood with its delta-method standard error."""

    value: float
    n_mc: int
    seed: int
    std_error: float


def logmeanexp(logvals) -> float:
    """log(mean(exp(x))), stable under a common shift of x."""
    logvals = np.asarray(logvals, dtype=float)
    m = np.max(logvals)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.mean(np.exp(logvals - m))))


def _logmeanexp_se(logvals) -> float:
    """Delta-method standard error of logmeanexp over IID samples."""
    logvals = np.asarray(logvals, dtype=float)
    if logvals.size < 2:
        return float("nan")
    m = np.max(logvals)
    q = np.exp(logvals - m)
    mq = np.mean(q)
    return float(np.std(q, ddof=1) / (math.sqrt(q.size) * mq))


def gaussian_logpdf(y, K, v_n: float) -> float:
    """log N(y; 0, K + v_n I) via Cholesky (package jitter policy).

    ``y`` is a single output channel over the batch; multi-channel targets
    are summed by the caller since channels are IID under the prior.
    """
    y = np.asarray(y, dtype=float).ravel()
    K = np.asarray(K, dtype=float)
    if v_n < 0:
        raise InvalidInputError("v_n must be >= 0")
    if K.shape != (y.size, y.size):
        raise InvalidInputError("K must be N x N for an N-vector y")
    sigma = K + v_n * np.eye(y.size)
    L, _ = kernels.cholesky_with_jitter(sigma)
    alpha = np.linalg.solve(L, y)
    return float(
        -0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * y.size * _LOG2PI
    )


def mll_no_bottleneck(X, Y, depth: int, h: Hyperparams, phi: Nonlinearity,
                      order: int = 40) -> float:
    """Closed-form marginal log-likelihood of the no-bottleneck network."""
    X, Y = _check_data(X, Y)
    K = kernels.nngp_kernel(X, depth, h, phi, order)
    return float(sum(gaussian_logpdf(Y[:, l], K, h.v_n) for l in range(Y.shape[1])))


# ---------------------------------------------------------------------------
# forward-mode tangents wrt (log v_b, log v_w, log v_n)
# ---------------------------------------------------------------------------
# A tangent is a list of 3 arrays (one per log-parameter), each shaped like
# the primal value.  None entries mean an identically-zero tangent.


def _check_data(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or Y.shape[0] != X.shape[0]:
        raise InvalidInputError("X must be (N, M) and Y (N, L) with matching N")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidInputError("data contains non-finite values")
    return X, Y


def _diag(K):
    return np.diagonal(K, axis1=-2, axis2=-1)


def _linear_fwd(Z, dZ, h, dv):
    G = Z @ np.swapaxes(Z, -1, -2)
    K = h.v_b + h.v_w * G
    dK = []
    for k in range(3):
        t = dv[k, 0] + dv[k, 1] * G
        if dZ is not None and dZ[k] is not None:
            cross = dZ[k] @ np.swapaxes(Z, -1, -2)
            t = t + h.v_w * (cross + np.swapaxes(cross, -1, -2))
        dK.append(t if np.ndim(t) else np.full_like(K, t))
    return K, dK


def _relu_fwd(K, dK, h, dv):
    from .errors import DegenerateKernelError

    d = _diag(K)
    if np.any(d <= 0):
        raise DegenerateKernelError(
            "ReLU kernel step needs a strictly positive diagonal"
        )
    s = np.sqrt(d[..., :, None] * d[..., None, :])
    theta = np.arccos(np.clip(K / s, -1.0, 1.0))
    sin_t = np.sin(theta)
    g = s * (sin_t + (np.pi - theta) * np.cos(theta))
    Kn = h.v_b + (h.v_w / np.pi) * g
    dKn = []
    for k in range(3):
        dd = _diag(dK[k])
        ddiag_term = 0.5 * (
            (dd / d)[..., :, None] + (dd / d)[..., None, :]
        )
        dg = (np.pi - theta) * dK[k] + sin_t * s * ddiag_term
        dKn.append(dv[k, 0] + (dv[k, 1] / np.pi) * g + (h.v_w / np.pi) * dg)
    return Kn, dKn


def _sin_fwd(K, dK, h, dv):
    d = _diag(K)
    expo = -0.5 * (d[..., :, None] + d[..., None, :] - 2.0 * K)
    e = np.exp(expo)
    Kn = h.v_b + h.v_w * e
    dKn = []
    for k in range(3):
        dd = _diag(dK[k])
        dm = -0.5 * (dd[..., :, None] + dd[..., None, :] - 2.0 * dK[k])
        dKn.append(dv[k, 0] + dv[k, 1] * e + h.v_w * e * dm)
    return Kn, dKn


def _step_fwd(K, dK, h, dv, phi):
    if phi.name == NORMALIZED_RELU.name:
        return _relu_fwd(K, dK, h, dv)
    if phi.name == SINUSOIDAL.name:
        return _sin_fwd(K, dK, h, dv)
    raise InvalidInputError(
        f"analytic gradients support the built-in activations, not {phi.name!r}; "
        "use the finite-difference path"
    )


def _chol_fwd(K, dK):
    """Cholesky factor and its tangents: dL = L Phi(L^-1 dK L^-T)."""
    L, _ = kernels.cholesky_with_jitter(K)
    n = K.shape[-1]
    tril = np.tril(np.ones((n, n)))
    half = tril - 0.5 * np.eye(n)
    dL = []
    for t in dK:
        Y1 = np.linalg.solve(L, t)
        M = np.swapaxes(np.linalg.solve(L, np.swapaxes(Y1, -1, -2)), -1, -2)
        dL.append(L @ (half * M))
    return L, dL


def _logpdf_fwd(Y, K, dK, h, dv):
    """Summed-over-channels log-density and tangents, batched over the stack."""
    n, n_chan = Y.shape
    sigma = K + h.v_n * np.eye(n)
    L, _ = kernels.cholesky_with_jitter(sigma)
    logdet = 2.0 * np.sum(np.log(_diag(L)), axis=-1)
    alpha = np.linalg.solve(sigma, np.broadcast_to(Y, sigma.shape[:-2] + Y.shape))
    quad = np.einsum("...nl,...nl->...", np.broadcast_to(Y, alpha.shape), alpha)
    ell = -0.5 * quad - 0.5 * n_chan * logdet - 0.5 * n * n_chan * _LOG2PI
    if dK is None:
        return ell, None
    sigma_inv = np.linalg.solve(sigma, np.broadcast_to(np.eye(n), sigma.shape))
    dell = []
    for k in range(3):
        dS = dK[k] + dv[k, 2] * np.eye(n)
        tr = np.einsum("...ij,...ij->...", sigma_inv, dS)
        qd = np.einsum("...il,...ij,...jl->...", alpha, dS, alpha)
        dell.append(0.5 * qd - 0.5 * n_chan * tr)
    return ell, dell


def _zero_tangents(shape):
    return [np.zeros(shape) for _ in range(3)]


def _pre_factor(X, D1, h, phi, dv, want_grad):
    """Shared pre-bottleneck kernel Cholesky (and tangents)."""
    K = kernels.linear_kernel(X, h)
    dK = None
    if want_grad:
        G = X @ X.T
        dK = [dv[k, 0] + dv[k, 1] * G for k in range(3)]
    for _ in range(D1):
        if want_grad:
            K, dK = _step_fwd(K, dK, h, dv, phi)
        else:
            K = kernels.kernel_step(K, h, phi)
    if want_grad:
        return _chol_fwd(K, dK)
    L, _ = kernels.cholesky_with_jitter(K)
    return L, None


def _mc_block_size(n, width) -> int:
    return max(1, min(10**6, _MC_BLOCK_VALUES // max(1, n * width)))


def _mll_terms(X, Y, D1, H, D2, h, phi, n_mc, seed, want_grad, threads=1):
    """Per-sample log densities (and tangents) under fixed reparameterized noise.

    The noise matrices E are derived from ``seed`` alone, so calls with and
    without gradients, or with different hyperparameters, share the same
    draws (common random numbers).
    """
    n = X.shape[0]
    dv = np.diag([h.v_b, h.v_w, h.v_n])  # d(v)/d(log v) per direction
    L_pre, dL_pre = _pre_factor(X, D1, h, phi, dv, want_grad)
    inv_sqrt_h = 1.0 / math.sqrt(H)
    if want_grad and phi.grad is None:
        raise InvalidInputError("activation derivative required for gradients")

    def block(bi, start, stop):
        E = child_rng(seed, _NS_NOISE, bi).standard_normal((stop - start, n, H))
        hmat = L_pre @ E
        Z = phi(hmat) * inv_sqrt_h
        if want_grad:
            dh = [t @ E for t in dL_pre]
            gph = phi.grad(hmat) * inv_sqrt_h
            dZ = [gph * t for t in dh]
        else:
            dZ = None
        K, dK = (_linear_fwd(Z, dZ, h, dv) if want_grad
                 else (kernels.linear_kernel(Z, h), None))
        for _ in range(D2):
            if want_grad:
                K, dK = _step_fwd(K, dK, h, dv, phi)
            else:
                K = kernels.kernel_step(K, h, phi)
        return _logpdf_fwd(Y, K, dK, h, dv)

    results = map_blocks(block, n_mc, threads=threads, block=_mc_block_size(n, H))
    ell = np.concatenate([r[0] for r in results])
    if not want_grad:
        return ell, None
    dell = np.stack(
        [np.concatenate([r[1][k] for r in results]) for k in range(3)]
    )
    return ell, dell


def _validate_bottleneck_args(X, Y, D1, H, D2, n_mc):
    if n_mc < 1:
        raise InvalidInputError("n_mc must be >= 1")
    if H < 1:
        raise InvalidInputError("bottleneck width H must be >= 1")
    if D1 < 0 or D2 < 0:
        raise InvalidInputError("depths must be >= 0")
    return _check_data(X, Y)


def mll_single_bottleneck(X, Y, D1: int, H: int, D2: int, h: Hyperparams,
                          phi: Nonlinearity, n_mc: int, seed: int,
                          threads: int = 1) -> MllEstimate:
    """Monte-Carlo marginal log-likelihood of a single-bottleneck network.

    D1 and D2 count the wide hidden layers before and after the bottleneck
    of width H.  Observation noise v_n enters the output Gaussian only;
    the estimator is log-mean-exp over ``n_mc`` reparameterized draws and is
    deterministic given (data, architecture, hyperparameters, n_mc, seed).
    """
    X, Y = _validate_bottleneck_args(X, Y, D1, H, D2, n_mc)
    ell, _ = _mll_terms(X, Y, D1, H, D2, h, phi, n_mc, seed, want_grad=False,
                        threads=threads)
    return MllEstimate(
        value=logmeanexp(ell), n_mc=n_mc, seed=seed, std_error=_logmeanexp_se(ell)
    )


def mll_gradient(X, Y, D1: int, H: int, D2: int, h: Hyperparams,
                 phi: Nonlinearity, n_mc: int, seed: int,
                 method: str = "analytic", fd_step: float = 1e-5,
                 threads: int = 1) -> np.ndarray:
    """Gradient of the MC marginal log-likelihood wrt (log v_b, log v_w, log v_n).

    The reparameterization noise is held fixed across everything the gradient
    touches: the analytic path differentiates through the fixed transform,
    and the finite-difference path re-evaluates at shifted log-parameters
    with the same draws (common random numbers).
    """
    if method == "analytic":
        X, Y = _validate_bottleneck_args(X, Y, D1, H, D2, n_mc)
        ell, dell = _mll_terms(X, Y, D1, H, D2, h, phi, n_mc, seed,
                               want_grad=True, threads=threads)
        w = np.exp(ell - np.max(ell))
        w /= np.sum(w)
        return dell @ w
    if method == "fd":
        logp = h.log_array()
        grad = np.zeros(3)
        for k in range(3):
            vals = []
            for sgn in (+1.0, -1.0):
                shifted = Hyperparams.from_log_array(
                    logp + sgn * fd_step * np.eye(3)[k]
                )
                est = mll_single_bottleneck(X, Y, D1, H, D2, shifted, phi,
                                            n_mc, seed, threads=threads)
                vals.append(est.value)
            grad[k] = (vals[0] - vals[1]) / (2.0 * fd_step)
        return grad
    raise InvalidInputError(f"unknown gradient method {method!r}")


def mll_no_bottleneck_gradient(X, Y, depth: int, h: Hyperparams,
                               phi: Nonlinearity) -> np.ndarray:
    """Gradient of the closed-form no-bottleneck MLL wrt the log-parameters."""
    X, Y = _check_data(X, Y)
    dv = np.diag([h.v_b, h.v_w, h.v_n])
    G = X @ X.T
    K = kernels.linear_kernel(X, h)
    dK = [dv[k, 0] + dv[k, 1] * G for k in range(3)]
    for _ in range(depth):
        K, dK = _step_fwd(K, dK, h, dv, phi)
    _, dell = _logpdf_fwd(Y, K, dK, h, dv)
    return np.array([float(t) for t in dell])
