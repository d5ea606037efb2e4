"""Seeded prior samplers and empirical quadratic-correlation estimation.

Two samplers are provided: one draws finite-width networks weight by weight,
the other realizes a bottleneck network exactly as a composition of GPs
(wide segments are sampled from their limiting kernels, bottleneck layers
draw finite preactivation matrices and push scaled activations into the next
segment).  Both cut the sample axis into fixed blocks with per-block child
generators, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, likelihood
from .errors import ArchitectureError, InvalidInputError, UndefinedCorrelationError
from .params import WIDE, Architecture, Hyperparams
from .rng import child_rng, derive_seed, map_blocks

__all__ = [
    "SampleBatch",
    "sample_bnn_prior",
    "sample_bottleneck_prior",
    "empirical_quad_corr",
    "quad_corr_runs",
    "multi_bottleneck_experiment",
    "wide_correspondence_check",
]

# spawn-key namespaces
_NS_GP = 11
_NS_BNN = 13
_NS_RUN = 17
_NS_ZH = 19


@dataclass(frozen=True)
class SampleBatch:
    """Prior draws: values[s, n, l] = output l at input n for sample s."""

    values: np.ndarray
    arch: Architecture
    hyperparams: Hyperparams
    seed: int

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def _check_inputs(arch: Architecture, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != arch.input_dim:
        raise InvalidInputError(
            f"X must be (N, {arch.input_dim}); got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X contains non-finite entries")
    return X


def sample_bnn_prior(arch: Architecture, h: Hyperparams, X, n_samples: int,
                     seed: int, threads: int = 1) -> SampleBatch:
    """Draw finite-width networks: every layer explicit, weights IID normal.

    All layers must have finite widths.  Weights into a layer of fan-in F
    have variance v_w / F (fan-in 1 for the first layer), biases v_b.
    """
    X = _check_inputs(arch, X)
    if any(w == WIDE for w in arch.layers):
        raise ArchitectureError("sample_bnn_prior needs explicit finite widths")
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    widths = [int(w) for w in arch.layers]
    n = X.shape[0]
    phi = arch.nonlinearity

    def block(bi, start, stop):
        rng = child_rng(seed, _NS_BNN, bi)
        b = stop - start
        g = np.broadcast_to(X, (b, n, arch.input_dim))
        fan_in = 1  # first-layer weight variance is v_w itself
        for width in widths + [arch.output_dim]:
            W = rng.standard_normal((b, width, g.shape[-1]))
            bias = rng.standard_normal((b, width))
            scale = math.sqrt(h.v_w / fan_in)
            f = scale * np.einsum("sij,snj->sni", W, g) \
                + math.sqrt(h.v_b) * bias[:, None, :]
            g = phi(f)
            fan_in = width
        return f

    out = np.concatenate(map_blocks(block, n_samples, threads=threads))
    return SampleBatch(values=out, arch=arch, hyperparams=h, seed=seed)


def sample_bottleneck_prior(arch: Architecture, h: Hyperparams, X,
                            n_samples: int, seed: int,
                            threads: int = 1) -> SampleBatch:
    """Draw from the bottleneck network prior, wide segments realized as GPs.

    Per sample: the preactivations into each bottleneck are N(0, K) across
    the input batch, IID over the bottleneck's neurons, where K is the kernel
    of the preceding wide segment evaluated on the current representations
    (plus v_n I when ``arch.bottleneck_noise``).  Activations are scaled by
    1/sqrt(width) before entering the next segment.  Outputs are L IID
    channels from N(0, K_final + v_n I).
    """
    X = _check_inputs(arch, X)
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    segments = arch.segments()
    phi = arch.nonlinearity
    n = X.shape[0]
    eye = np.eye(n)

    # first segment acts on the fixed inputs: one shared Cholesky factor
    depth0, width0 = segments[0]
    K0 = kernels.nngp_kernel(X, depth0, h, phi)
    if width0 is None:
        L0, _ = kernels.cholesky_with_jitter(K0 + h.v_n * eye)
    else:
        if arch.bottleneck_noise:
            K0 = K0 + h.v_n * eye
        L0, _ = kernels.cholesky_with_jitter(K0)

    def block(bi, start, stop):
        rng = child_rng(seed, _NS_GP, bi)
        b = stop - start
        if width0 is None:
            return L0 @ rng.standard_normal((b, n, arch.output_dim))
        z = phi(L0 @ rng.standard_normal((b, n, width0))) / math.sqrt(width0)
        for depth, width in segments[1:]:
            K = kernels.nngp_kernel(z, depth, h, phi)
            if width is None:
                K = K + h.v_n * eye
            elif arch.bottleneck_noise:
                K = K + h.v_n * eye
            L, _ = kernels.cholesky_with_jitter(K)
            if width is None:
                return L @ rng.standard_normal((b, n, arch.output_dim))
            z = phi(L @ rng.standard_normal((b, n, width))) / math.sqrt(width)
        raise AssertionError("unreachable: final segment returns")

    out = np.concatenate(map_blocks(block, n_samples, threads=threads))
    return SampleBatch(values=out, arch=arch, hyperparams=h, seed=seed)


def empirical_quad_corr(batch: SampleBatch, out_i: int, out_j: int,
                        in_a: int, in_b: int) -> float:
    """Sample Pearson correlation of F_i(x_a)^2 and F_j(x_b)^2.

    Raises UndefinedCorrelationError when either squared sequence has zero
    sample variance.
    """
    if batch.n_samples < 2:
        raise InvalidInputError("need at least 2 samples")
    u = batch.values[:, in_a, out_i] ** 2
    v = batch.values[:, in_b, out_j] ** 2
    du = u - u.mean()
    dv = v - v.mean()
    su = float(du @ du)
    sv = float(dv @ dv)
    if su == 0.0 or sv == 0.0:
        raise UndefinedCorrelationError("zero sample variance of squared outputs")
    return float((du @ dv) / math.sqrt(su * sv))


@dataclass(frozen=True)
class QuadCorrRuns:
    """Repeated-run quadratic-correlation estimate.

    ``std`` is the run-to-run dispersion (ddof=1) and ``std_error`` the
    standard error of the mean, std / sqrt(n_runs).
    """

    mean: float
    std: float
    std_error: float
    estimates: np.ndarray


def quad_corr_runs(arch: Architecture, h: Hyperparams, X, n_samples: int,
                   n_runs: int, seed: int, out_i: int = 0, out_j: int = 1,
                   in_a: int = 0, in_b: int = 1,
                   threads: int = 1) -> QuadCorrRuns:
    """Estimate the quadratic correlation over ``n_runs`` independent runs."""
    if n_runs < 2:
        raise InvalidInputError("n_runs must be >= 2")
    ests = np.empty(n_runs)
    for r in range(n_runs):
        batch = sample_bottleneck_prior(
            arch, h, X, n_samples, derive_seed(seed, _NS_RUN, r), threads=threads
        )
        ests[r] = empirical_quad_corr(batch, out_i, out_j, in_a, in_b)
    std = float(np.std(ests, ddof=1))
    return QuadCorrRuns(
        mean=float(np.mean(ests)),
        std=std,
        std_error=std / math.sqrt(n_runs),
        estimates=ests,
    )


def multi_bottleneck_experiment(widths, n_bottlenecks_list, h: Hyperparams, X,
                                n_samples: int, n_runs: int, seed: int,
                                total_hidden: int = 11, phi=None,
                                threads: int = 1) -> list[dict]:
    """Quadratic correlation across bottleneck counts at fixed total depth.

    For each (width, n_bottlenecks) pair, builds a network of
    ``total_hidden`` hidden layers with that many equally spaced bottlenecks
    (positions {6}, {4,8}, {3,6,9} for 11 layers) and estimates the between-
    output quadratic correlation with run-to-run dispersion.  The activation
    defaults to the normalized ReLU.
    """
    from .params import NORMALIZED_RELU

    if phi is None:
        phi = NORMALIZED_RELU
    X = np.asarray(X, dtype=float)
    rows = []
    for wi, width in enumerate(widths):
        for ni, n_b in enumerate(n_bottlenecks_list):
            arch = Architecture.equally_spaced_bottlenecks(
                input_dim=X.shape[1], output_dim=2, total_hidden=total_hidden,
                n_bottlenecks=n_b, width=width, nonlinearity=phi,
                bottleneck_noise=True,
            )
            runs = quad_corr_runs(
                arch, h, X, n_samples, n_runs,
                derive_seed(seed, wi, ni), threads=threads,
            )
            rows.append({
                "width": int(width),
                "n_bottlenecks": int(n_b),
                "qx_mean": runs.mean,
                "qx_std": runs.std,
                "qx_std_error": runs.std_error,
            })
    return rows


def wide_correspondence_check(D1: int, D2: int, widths, h: Hyperparams, X, Y,
                              n_mc: int, seed: int, zh_reps: int = 16,
                              threads: int = 1) -> dict:
    """Convergence of the bottleneck model to its wide limit.

    For each bottleneck width H: the MC marginal log-likelihood, its gap to
    the closed-form no-bottleneck MLL with D1 + D2 + 1 hidden layers, and the
    Frobenius error of the empirical second-moment matrix of scaled
    activations Z_H = (1/H) sum_i phi(h_i) phi(h_i)^T against its wide limit
    (averaged over ``zh_reps`` replicates).
    """
    from .params import NORMALIZED_RELU

    if h.v_n <= 0:
        raise InvalidInputError("wide correspondence check requires v_n > 0")
    if D2 < 1:
        raise ArchitectureError(
            "need at least one post-bottleneck hidden layer (D2 >= 1); with "
            "D2 = 0 a width-1 identity bottleneck collapses to a linear map"
        )
    widths = [int(w) for w in widths]
    if any(w < 1 for w in widths):
        raise ArchitectureError("bottleneck widths must be >= 1")
    phi = NORMALIZED_RELU
    X = np.asarray(X, dtype=float)
    mll_inf = likelihood.mll_no_bottleneck(X, Y, D1 + D2 + 1, h, phi)

    K_pre = kernels.nngp_kernel(X, D1, h, phi)
    L_pre, _ = kernels.cholesky_with_jitter(K_pre)
    # E[phi(h) phi(h)^T] is the next kernel step stripped of its affine part
    z_limit = (kernels.kernel_step(K_pre, h, phi) - h.v_b) / h.v_w

    rows = []
    for hi, width in enumerate(widths):
        est = likelihood.mll_single_bottleneck(
            X, Y, D1, width, D2, h, phi, n_mc,
            derive_seed(seed, hi), threads=threads,
        )
        errs = np.empty(zh_reps)
        for rep in range(zh_reps):
            rng = child_rng(seed, _NS_ZH, hi, rep)
            hmat = L_pre @ rng.standard_normal((X.shape[0], width))
            zh = (phi(hmat) @ phi(hmat).T) / width
            errs[rep] = np.linalg.norm(zh - z_limit)
        rows.append({
            "width": width,
            "mll": est.value,
            "mll_std_error": est.std_error,
            "mll_gap": abs(est.value - mll_inf),
            "zh_frobenius_error": float(np.mean(errs)),
        })
    return {"mll_infinite": mll_inf, "rows": rows}
